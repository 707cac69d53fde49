//! Topology, block-fading channels, projection zero-forcing beamforming and
//! the uplink rate/delay model.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{l2_norm, pseudo_inverse, vec_dot, Complex64, ComplexMatrix};
use crate::seeding::{rng_for, Purpose};

/// Projection residuals below this fraction of `|g_u|` count as annihilated.
pub const ZERO_GAIN_REL: f64 = 1e-9;

/// Thermal noise density in dBm/Hz.
pub const THERMAL_DBM_PER_HZ: f64 = -174.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub antennas: usize,
    /// Base-station positions in km.
    pub bs_positions: Vec<Point>,
    /// User positions in km.
    pub user_positions: Vec<Point>,
    /// Transmit power per user (W).
    pub tx_power_w: Vec<f64>,
    pub noise_power_w: f64,
    pub bandwidth_hz: f64,
}

impl Topology {
    pub fn bs_count(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn user_count(&self) -> usize {
        self.user_positions.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.bs_count() == 0 || self.user_count() == 0 || self.antennas == 0 {
            return Err(Error::Invalid("topology needs at least one BS, user and antenna".into()));
        }
        if self.tx_power_w.len() != self.user_count() {
            return Err(Error::Dimension {
                op: "topology",
                detail: format!("{} powers for {} users", self.tx_power_w.len(), self.user_count()),
            });
        }
        if self.tx_power_w.iter().any(|&p| !(p > 0.0 && p.is_finite()))
            || !(self.noise_power_w > 0.0 && self.bandwidth_hz > 0.0)
        {
            return Err(Error::Invalid("powers and bandwidth must be positive".into()));
        }
        let finite = |p: &Point| p.x.is_finite() && p.y.is_finite();
        if !self.bs_positions.iter().all(finite) || !self.user_positions.iter().all(finite) {
            return Err(Error::NonFinite("topology positions"));
        }
        Ok(())
    }

    /// Distance from BS `m` to user `u` in km.
    pub fn distance(&self, m: usize, u: usize) -> f64 {
        self.bs_positions[m].distance(&self.user_positions[u])
    }

    /// BS indices sorted by distance to user `u`, nearest first.
    pub fn nearest_bs(&self, u: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.bs_count()).collect();
        order.sort_by(|&a, &b| self.distance(a, u).total_cmp(&self.distance(b, u)).then(a.cmp(&b)));
        order
    }
}

/// Thermal noise power over `bandwidth_hz`, in watts.
pub fn thermal_noise_w(bandwidth_hz: f64) -> f64 {
    10f64.powf((THERMAL_DBM_PER_HZ - 30.0) / 10.0) * bandwidth_hz
}

/// Uniform point in the annulus `inner <= r <= outer` around `center`.
pub fn uniform_in_annulus<R: Rng + ?Sized>(rng: &mut R, center: Point, inner: f64, outer: f64) -> Point {
    let u: f64 = rng.random();
    let r = (inner * inner + u * (outer * outer - inner * inner)).sqrt();
    let theta = rng.random::<f64>() * std::f64::consts::TAU;
    Point::new(center.x + r * theta.cos(), center.y + r * theta.sin())
}

/// Place `bs_count` BSs in the annulus `[inner, outer]` km around the origin and
/// `user_count` users: the first at the origin, the rest uniform in the disk.
pub fn place_nodes<R: Rng + ?Sized>(
    rng: &mut R,
    bs_count: usize,
    user_count: usize,
    inner: f64,
    outer: f64,
) -> (Vec<Point>, Vec<Point>) {
    let origin = Point::new(0.0, 0.0);
    let bs = (0..bs_count).map(|_| uniform_in_annulus(rng, origin, inner, outer)).collect();
    let mut users = vec![origin];
    users.extend((1..user_count).map(|_| uniform_in_annulus(rng, origin, 0.0, outer)));
    (bs, users)
}

/// `128.1 + 37.6 log10(d)` with `d` in km.
pub fn path_loss_db(distance_km: f64) -> Result<f64> {
    if !(distance_km > 0.0 && distance_km.is_finite()) {
        return Err(Error::Invalid(format!("distance {distance_km} km")));
    }
    Ok(128.1 + 37.6 * distance_km.log10())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub slot: u64,
    antennas: usize,
    bs_count: usize,
    user_count: usize,
    coeffs: Vec<Complex64>,
}

impl ChannelRealization {
    /// Build from coefficients laid out as `[(m * U + u) * A + a]`.
    pub fn from_coefficients(
        slot: u64,
        antennas: usize,
        bs_count: usize,
        user_count: usize,
        coeffs: Vec<Complex64>,
    ) -> Result<Self> {
        if coeffs.len() != antennas * bs_count * user_count {
            return Err(Error::Dimension {
                op: "channel realization",
                detail: format!("{} coefficients for {bs_count}x{user_count}x{antennas}", coeffs.len()),
            });
        }
        if coeffs.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("channel realization"));
        }
        Ok(Self { slot, antennas, bs_count, user_count, coeffs })
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn bs_count(&self) -> usize {
        self.bs_count
    }

    pub fn user_count(&self) -> usize {
        self.user_count
    }

    /// Channel from user `u` to the `A` antennas of BS `m`.
    pub fn g(&self, m: usize, u: usize) -> &[Complex64] {
        let start = (m * self.user_count + u) * self.antennas;
        &self.coeffs[start..start + self.antennas]
    }

    /// Channel of user `u` stacked over the antennas of `cluster`, in order.
    pub fn stacked(&self, u: usize, cluster: &[usize]) -> Vec<Complex64> {
        cluster.iter().flat_map(|&m| self.g(m, u).iter().copied()).collect()
    }
}

/// Rayleigh block fading with distance path loss, deterministic in `(seed, slot)`.
pub fn generate_channels(topology: &Topology, slot: u64, seed: u64) -> Result<ChannelRealization> {
    topology.validate()?;
    let (m_count, u_count, a_count) = (topology.bs_count(), topology.user_count(), topology.antennas);
    let mut rng = rng_for(seed, slot, Purpose::Channels);
    let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid std-dev");
    let mut coeffs = Vec::with_capacity(m_count * u_count * a_count);
    for m in 0..m_count {
        for u in 0..u_count {
            let amplitude = 10f64.powf(-path_loss_db(topology.distance(m, u))? / 10.0).sqrt();
            for _ in 0..a_count {
                let h = Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
                coeffs.push(h * amplitude);
            }
        }
    }
    ChannelRealization::from_coefficients(slot, a_count, m_count, u_count, coeffs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer {
    pub target: usize,
    pub cluster: Vec<usize>,
    pub weights: Vec<Complex64>,
    /// Set when the projection annihilated the target channel; weights are zero.
    pub zero_gain: bool,
}

/// `w = P g_u / |P g_u|` with `P = I - G G^+` projecting out the intra-cluster users.
pub fn zf_beamformer(
    channels: &ChannelRealization,
    target: usize,
    cluster: &[usize],
    intra_cluster_users: &[usize],
) -> Result<Beamformer> {
    if cluster.is_empty() {
        return Err(Error::Empty("zf_beamformer cluster"));
    }
    let g_u = channels.stacked(target, cluster);
    let others: Vec<Vec<Complex64>> = intra_cluster_users
        .iter()
        .filter(|&&v| v != target)
        .map(|&v| channels.stacked(v, cluster))
        .collect();
    let projected = if others.is_empty() {
        g_u.clone()
    } else {
        let g = ComplexMatrix::from_columns(&others)?;
        let coeffs = pseudo_inverse(&g)?.matvec(&g_u)?;
        let span = g.matvec(&coeffs)?;
        g_u.iter().zip(&span).map(|(a, b)| a - b).collect()
    };
    let norm = l2_norm(&projected)?;
    let reference = l2_norm(&g_u)?;
    if norm <= ZERO_GAIN_REL * reference || norm == 0.0 {
        return Ok(Beamformer {
            target,
            cluster: cluster.to_vec(),
            weights: vec![Complex64::new(0.0, 0.0); g_u.len()],
            zero_gain: true,
        });
    }
    Ok(Beamformer {
        target,
        cluster: cluster.to_vec(),
        weights: projected.into_iter().map(|z| z / norm).collect(),
        zero_gain: false,
    })
}

/// Achievable uplink rate in bit/s; out-of-cluster users interfere through
/// the target's own combiner.
pub fn uplink_rate(
    channels: &ChannelRealization,
    beamformer: &Beamformer,
    out_of_cluster_users: &[usize],
    topology: &Topology,
) -> Result<f64> {
    if beamformer.zero_gain {
        return Ok(0.0);
    }
    let w = &beamformer.weights;
    let g_u = channels.stacked(beamformer.target, &beamformer.cluster);
    if w.len() != g_u.len() {
        return Err(Error::Dimension {
            op: "uplink_rate",
            detail: format!("beamformer of {} for {} antennas", w.len(), g_u.len()),
        });
    }
    let signal = topology.tx_power_w[beamformer.target] * vec_dot(w, &g_u)?.norm_sqr();
    let mut denom = l2_norm(w)?.powi(2) * topology.noise_power_w;
    for &v in out_of_cluster_users {
        let g_v = channels.stacked(v, &beamformer.cluster);
        denom += topology.tx_power_w[v] * vec_dot(w, &g_v)?.norm_sqr();
    }
    Ok(topology.bandwidth_hz * (1.0 + signal / denom).log2())
}

/// `bits / rate`, infinite for a zero rate.
pub fn uplink_delay(task_bits: f64, rate: f64) -> f64 {
    if rate <= 0.0 {
        f64::INFINITY
    } else {
        task_bits / rate
    }
}

/// Rate of `target` served by `cluster`, nulling `intra` users and suffering
/// interference from `inter` users.
pub fn cluster_rate(
    channels: &ChannelRealization,
    topology: &Topology,
    target: usize,
    cluster: &[usize],
    intra: &[usize],
    inter: &[usize],
) -> Result<f64> {
    let bf = zf_beamformer(channels, target, cluster, intra)?;
    uplink_rate(channels, &bf, inter, topology)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn topo(users: usize) -> Topology {
        Topology {
            antennas: 2,
            bs_positions: vec![Point::new(0.5, 0.0), Point::new(0.0, 0.7)],
            user_positions: (0..users).map(|u| Point::new(0.01 * u as f64, 0.0)).collect(),
            tx_power_w: vec![0.2; users],
            noise_power_w: thermal_noise_w(10e6),
            bandwidth_hz: 10e6,
        }
    }

    #[test]
    fn path_loss_examples() {
        assert!((path_loss_db(1.0).unwrap() - 128.1).abs() < 1e-12);
        assert!((path_loss_db(0.1).unwrap() - 90.5).abs() < 1e-12);
        assert!(path_loss_db(0.0).is_err());
    }

    #[test]
    fn channels_are_deterministic() {
        let t = topo(2);
        let a = generate_channels(&t, 4, 99).unwrap();
        let b = generate_channels(&t, 4, 99).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_channels(&t, 5, 99).unwrap());
    }

    #[test]
    fn colocated_user_is_rejected() {
        let mut t = topo(1);
        t.user_positions[0] = t.bs_positions[0];
        assert!(generate_channels(&t, 0, 1).is_err());
    }

    #[test]
    fn noise_at_ten_megahertz() {
        // -174 dBm/Hz + 70 dB = -104 dBm
        let expected = 10f64.powf(-13.4);
        assert!((thermal_noise_w(10e6) / expected - 1.0).abs() < 1e-12);
    }

    fn manual(u: Vec<Vec<Complex64>>) -> ChannelRealization {
        let users = u.len();
        let a = u[0].len();
        ChannelRealization::from_coefficients(0, a, 1, users, u.concat()).unwrap()
    }

    #[test]
    fn zf_without_interferers_is_matched_filter() {
        let ch = manual(vec![vec![c(3.0, 0.0), c(0.0, 4.0)]]);
        let bf = zf_beamformer(&ch, 0, &[0], &[]).unwrap();
        assert!(!bf.zero_gain);
        assert!((bf.weights[0] - c(0.6, 0.0)).norm() < 1e-15);
        assert!((bf.weights[1] - c(0.0, 0.8)).norm() < 1e-15);
    }

    #[test]
    fn zf_with_orthogonal_interferer_is_unchanged() {
        let ch = manual(vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(2.0, 1.0)]]);
        let bf = zf_beamformer(&ch, 0, &[0], &[0, 1]).unwrap();
        assert!((bf.weights[0] - c(1.0, 0.0)).norm() < 1e-12);
        assert!(bf.weights[1].norm() < 1e-12);
    }

    #[test]
    fn zf_with_parallel_interferer_flags_zero_gain() {
        let g = vec![c(1.0, 2.0), c(-0.5, 0.3)];
        let gv: Vec<Complex64> = g.iter().map(|z| z * c(0.0, -3.0)).collect();
        let ch = manual(vec![g, gv]);
        let bf = zf_beamformer(&ch, 0, &[0], &[1]).unwrap();
        assert!(bf.zero_gain);
        assert!(bf.weights.iter().all(|z| *z == c(0.0, 0.0)));
        let t = Topology {
            antennas: 2,
            bs_positions: vec![Point::new(1.0, 0.0)],
            user_positions: vec![Point::new(0.0, 0.0); 2],
            tx_power_w: vec![0.2; 2],
            noise_power_w: 1.0,
            bandwidth_hz: 1e7,
        };
        assert_eq!(uplink_rate(&ch, &bf, &[], &t).unwrap(), 0.0);
    }

    #[test]
    fn zf_nulls_intra_cluster_users() {
        let t = Topology {
            antennas: 2,
            bs_positions: vec![Point::new(0.3, 0.0), Point::new(0.0, 0.4), Point::new(-0.5, 0.2)],
            user_positions: vec![Point::new(0.0, 0.0), Point::new(0.1, 0.1), Point::new(-0.2, 0.1)],
            tx_power_w: vec![0.2; 3],
            noise_power_w: thermal_noise_w(10e6),
            bandwidth_hz: 10e6,
        };
        let ch = generate_channels(&t, 0, 5).unwrap();
        let cluster = [0, 2];
        let bf = zf_beamformer(&ch, 0, &cluster, &[0, 1, 2]).unwrap();
        assert!((l2_norm(&bf.weights).unwrap() - 1.0).abs() < 1e-9);
        for v in [1, 2] {
            let leak = vec_dot(&bf.weights, &ch.stacked(v, &cluster)).unwrap().norm();
            assert!(leak <= 1e-8 * l2_norm(&ch.stacked(v, &cluster)).unwrap());
        }
    }

    #[test]
    fn rate_examples() {
        // SNR 3 with unit noise: p |w^H g|^2 = 3
        let ch = manual(vec![vec![c(3f64.sqrt(), 0.0)], vec![c(1.0, 0.0)]]);
        let t = Topology {
            antennas: 1,
            bs_positions: vec![Point::new(1.0, 0.0)],
            user_positions: vec![Point::new(0.0, 0.0); 2],
            tx_power_w: vec![1.0; 2],
            noise_power_w: 1.0,
            bandwidth_hz: 10e6,
        };
        let bf = zf_beamformer(&ch, 0, &[0], &[]).unwrap();
        let clean = uplink_rate(&ch, &bf, &[], &t).unwrap();
        assert!((clean - 20e6).abs() < 1e-6);
        // interferer power equal to the noise: SINR 3/2
        let noisy = uplink_rate(&ch, &bf, &[1], &t).unwrap();
        assert!((noisy - 10e6 * 2.5f64.log2()).abs() < 1e-6);
        assert!(noisy < clean);
    }

    #[test]
    fn delay_examples() {
        assert_eq!(uplink_delay(10e6, 10e6), 1.0);
        assert_eq!(uplink_delay(10e6, 0.0), f64::INFINITY);
        assert!((uplink_delay(80e6, 50e6) - 1.6).abs() < 1e-15);
    }

    #[test]
    fn annulus_placement_respects_radii() {
        let mut rng = rng_for(1, 0, Purpose::Topology);
        let (bs, users) = place_nodes(&mut rng, 200, 20, 0.1, 1.0);
        for p in &bs {
            let r = p.distance(&Point::new(0.0, 0.0));
            assert!((0.1..=1.0).contains(&r));
        }
        assert_eq!(users[0], Point::new(0.0, 0.0));
        assert!(users.iter().all(|p| p.distance(&Point::new(0.0, 0.0)) <= 1.0));
    }
}
