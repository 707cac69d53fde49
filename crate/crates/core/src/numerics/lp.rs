//! Dense bounded-variable primal simplex.
//!
//! Two phases with one artificial per row, Bland's rule for both the entering
//! and the leaving choice. Duals follow the Lagrangian convention
//! `L(x, y) = c^T x + sum_i y_i (a_i x - b_i)`: `y_i >= 0` on `<=` rows,
//! `y_i <= 0` on `>=` rows, free on equalities. An infeasible problem returns
//! the phase-one multipliers as a Farkas-type certificate.

use crate::error::{Error, Result};

use super::{FEASIBILITY_TOL, OPTIMALITY_TOL};

const PIVOT_TOL: f64 = 1e-11;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

/// `min c^T x  s.t.  A x (<=|=|>=) b,  lo <= x <= hi`.
#[derive(Debug, Clone, Default)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub senses: Vec<RowSense>,
    pub bounds: Vec<(f64, f64)>,
}

impl LpProblem {
    /// Problem over `n` variables bounded to `[0, 1]` with zero objective.
    pub fn unit_box(n: usize) -> Self {
        Self {
            objective: vec![0.0; n],
            bounds: vec![(0.0, 1.0); n],
            ..Self::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, sense: RowSense, rhs: f64) -> usize {
        self.rows.push(coeffs);
        self.senses.push(sense);
        self.rhs.push(rhs);
        self.rows.len() - 1
    }

    fn validate(&self) -> Result<()> {
        let n = self.objective.len();
        let bad = |detail: String| Error::Dimension { op: "lp_solve", detail };
        if self.bounds.len() != n {
            return Err(bad(format!("{} bounds for {n} variables", self.bounds.len())));
        }
        if self.rhs.len() != self.rows.len() || self.senses.len() != self.rows.len() {
            return Err(bad("rows, rhs and senses differ in length".into()));
        }
        if let Some(r) = self.rows.iter().position(|r| r.len() != n) {
            return Err(bad(format!("row {r} has wrong width")));
        }
        for &(lo, hi) in &self.bounds {
            if !lo.is_finite() || hi.is_nan() || lo > hi {
                return Err(Error::Invalid(format!("variable bounds [{lo}, {hi}]")));
            }
        }
        let finite = self.objective.iter().chain(&self.rhs).chain(self.rows.iter().flatten());
        if finite.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("lp_solve"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub point: Vec<f64>,
    pub objective: f64,
    /// One multiplier per row (Farkas certificate when infeasible).
    pub duals: Vec<f64>,
    /// `c + A^T y` per variable.
    pub reduced_costs: Vec<f64>,
}

impl LpSolution {
    /// Value of the Lagrangian dual at the returned multipliers.
    pub fn dual_objective(&self, p: &LpProblem) -> f64 {
        let rows: f64 = self.duals.iter().zip(&p.rhs).map(|(y, b)| -y * b).sum();
        let bounds: f64 = self
            .reduced_costs
            .iter()
            .zip(&p.bounds)
            .map(|(&r, &(lo, hi))| {
                if r > 0.0 {
                    r * lo
                } else if r < 0.0 {
                    r * hi
                } else {
                    0.0
                }
            })
            .sum();
        rows + bounds
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Basic,
    Lower,
    Upper,
}

struct Tableau {
    t: Vec<Vec<f64>>,
    d: Vec<f64>,
    x: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    status: Vec<Status>,
    basis: Vec<usize>,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn reset_costs(&mut self, c: &[f64]) {
        let cols = self.x.len();
        self.d = c.to_vec();
        for (i, row) in self.t.iter().enumerate() {
            let cb = c[self.basis[i]];
            if cb != 0.0 {
                for j in 0..cols {
                    self.d[j] -= cb * row[j];
                }
            }
        }
    }

    fn run(&mut self) -> Result<Outcome> {
        let cols = self.x.len();
        for _ in 0..MAX_PIVOTS {
            let entering = (0..cols).find(|&j| {
                self.lo[j] < self.hi[j]
                    && match self.status[j] {
                        Status::Lower => self.d[j] < -OPTIMALITY_TOL,
                        Status::Upper => self.d[j] > OPTIMALITY_TOL,
                        Status::Basic => false,
                    }
            });
            let Some(q) = entering else {
                return Ok(Outcome::Optimal);
            };
            let dir = if self.status[q] == Status::Lower { 1.0 } else { -1.0 };

            let mut best: Option<(f64, usize, bool)> = None;
            for (i, row) in self.t.iter().enumerate() {
                let rate = -dir * row[q];
                if rate.abs() < PIVOT_TOL {
                    continue;
                }
                let b = self.basis[i];
                let (lim, to_lower) = if rate < 0.0 {
                    ((self.x[b] - self.lo[b]) / -rate, true)
                } else if self.hi[b].is_finite() {
                    ((self.hi[b] - self.x[b]) / rate, false)
                } else {
                    continue;
                };
                let lim = lim.max(0.0);
                let replace = match best {
                    None => true,
                    Some((t, p, _)) => lim < t - 1e-12 || (lim <= t + 1e-12 && b < self.basis[p]),
                };
                if replace {
                    best = Some((lim, i, to_lower));
                }
            }
            let flip = self.hi[q] - self.lo[q];
            let (theta, leave) = match best {
                Some((t, p, to_lower)) if t <= flip => (t, Some((p, to_lower))),
                _ if flip.is_finite() => (flip, None),
                _ => return Ok(Outcome::Unbounded),
            };

            self.x[q] += dir * theta;
            for (i, row) in self.t.iter().enumerate() {
                let b = self.basis[i];
                self.x[b] -= dir * row[q] * theta;
            }

            match leave {
                None => {
                    self.status[q] = if self.status[q] == Status::Lower {
                        Status::Upper
                    } else {
                        Status::Lower
                    };
                    self.x[q] = if self.status[q] == Status::Lower { self.lo[q] } else { self.hi[q] };
                }
                Some((p, to_lower)) => {
                    let l = self.basis[p];
                    self.status[l] = if to_lower { Status::Lower } else { Status::Upper };
                    self.x[l] = if to_lower { self.lo[l] } else { self.hi[l] };
                    self.pivot(p, q);
                }
            }
        }
        Err(Error::Invalid("simplex pivot limit reached".into()))
    }

    fn pivot(&mut self, p: usize, q: usize) {
        let piv = self.t[p][q];
        for v in self.t[p].iter_mut() {
            *v /= piv;
        }
        let prow = self.t[p].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == p {
                continue;
            }
            let f = row[q];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
            }
        }
        let f = self.d[q];
        if f != 0.0 {
            for (v, pv) in self.d.iter_mut().zip(&prow) {
                *v -= f * pv;
            }
        }
        self.basis[p] = q;
        self.status[q] = Status::Basic;
    }
}

/// Solve a small dense linear program.
pub fn lp_solve(p: &LpProblem) -> Result<LpSolution> {
    p.validate()?;
    let n = p.num_vars();
    let m = p.rows.len();

    // Column layout: structural | one slack per inequality row | one artificial per row.
    let mut slack_of_row = vec![None; m];
    let mut ncols = n;
    for (i, s) in p.senses.iter().enumerate() {
        if *s != RowSense::Eq {
            slack_of_row[i] = Some(ncols);
            ncols += 1;
        }
    }
    let art0 = ncols;
    ncols += m;

    let mut lo = vec![0.0; ncols];
    let mut hi = vec![f64::INFINITY; ncols];
    let mut x = vec![0.0; ncols];
    let mut status = vec![Status::Lower; ncols];
    for j in 0..n {
        lo[j] = p.bounds[j].0;
        hi[j] = p.bounds[j].1;
        x[j] = lo[j];
    }

    let mut signs = vec![1.0; m];
    let mut t = vec![vec![0.0; ncols]; m];
    let mut basis = vec![0; m];
    for i in 0..m {
        let residual = p.rhs[i] - p.rows[i].iter().zip(&x[..n]).map(|(a, v)| a * v).sum::<f64>();
        signs[i] = if residual >= 0.0 { 1.0 } else { -1.0 };
        let s = signs[i];
        // B = diag(signs), so row i of B^-1 A is signs[i] * (A row i).
        for j in 0..n {
            t[i][j] = s * p.rows[i][j];
        }
        if let Some(sc) = slack_of_row[i] {
            let coef = if p.senses[i] == RowSense::Le { 1.0 } else { -1.0 };
            t[i][sc] = s * coef;
        }
        t[i][art0 + i] = 1.0;
        basis[i] = art0 + i;
        status[art0 + i] = Status::Basic;
        x[art0 + i] = residual.abs();
    }

    let mut tab = Tableau { t, d: Vec::new(), x, lo, hi, status, basis };

    let mut phase1 = vec![0.0; ncols];
    phase1[art0..].iter_mut().for_each(|c| *c = 1.0);
    tab.reset_costs(&phase1);
    tab.run()?;

    let multipliers = |tab: &Tableau, costs: &[f64]| -> Vec<f64> {
        // pi_i = sign_i (c_art - d_art); y = -pi
        (0..m).map(|i| -signs[i] * (costs[art0 + i] - tab.d[art0 + i])).collect()
    };
    let reduced = |costs: &[f64], y: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|j| costs[j] + (0..m).map(|i| y[i] * p.rows[i][j]).sum::<f64>())
            .collect()
    };

    let infeasibility: f64 = (art0..ncols).map(|j| tab.x[j]).sum();
    let scale = 1.0 + p.rhs.iter().map(|b| b.abs()).fold(0.0, f64::max);
    if infeasibility > FEASIBILITY_TOL * scale {
        let y = multipliers(&tab, &phase1);
        let zeros = vec![0.0; ncols];
        let rc = reduced(&zeros, &y);
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            point: tab.x[..n].to_vec(),
            objective: f64::NAN,
            duals: y,
            reduced_costs: rc,
        });
    }

    for j in art0..ncols {
        tab.hi[j] = 0.0;
        if tab.status[j] != Status::Basic {
            tab.status[j] = Status::Lower;
        }
        tab.x[j] = 0.0;
    }
    let mut costs = vec![0.0; ncols];
    costs[..n].copy_from_slice(&p.objective);
    tab.reset_costs(&costs);
    let outcome = tab.run()?;

    let point: Vec<f64> = tab.x[..n].to_vec();
    let objective = p.objective.iter().zip(&point).map(|(c, v)| c * v).sum();
    let y = multipliers(&tab, &costs);
    let rc = reduced(&costs, &y);
    Ok(LpSolution {
        status: match outcome {
            Outcome::Optimal => LpStatus::Optimal,
            Outcome::Unbounded => LpStatus::Unbounded,
        },
        point,
        objective,
        duals: y,
        reduced_costs: rc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_ge_row() {
        let mut p = LpProblem::unit_box(1);
        p.objective = vec![1.0];
        p.bounds = vec![(0.0, 10.0)];
        p.add_row(vec![1.0], RowSense::Ge, 1.0);
        let s = lp_solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.point[0] - 1.0).abs() < 1e-12);
        assert!((s.objective - 1.0).abs() < 1e-12);
        assert!(s.duals[0] <= 0.0);
    }

    #[test]
    fn simplex_corner() {
        let mut p = LpProblem::unit_box(2);
        p.objective = vec![-1.0, -1.0];
        p.add_row(vec![1.0, 1.0], RowSense::Le, 1.0);
        let s = lp_solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 1.0).abs() < 1e-12);
        assert!((s.dual_objective(&p) - s.objective).abs() < 1e-9);
        assert!(s.duals[0] >= 0.0);
    }

    #[test]
    fn empty_feasible_set() {
        let mut p = LpProblem::unit_box(1);
        p.objective = vec![1.0];
        p.add_row(vec![1.0], RowSense::Le, -1.0);
        let s = lp_solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
        // Farkas: y >= 0 on the <= row with y*(x - b) > 0 for every x in the box.
        assert!(s.duals[0] > 0.0);
    }

    #[test]
    fn unbounded_is_a_status() {
        let p = LpProblem {
            objective: vec![-1.0],
            bounds: vec![(0.0, f64::INFINITY)],
            ..LpProblem::default()
        };
        assert_eq!(lp_solve(&p).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_row_and_fixed_variable() {
        let mut p = LpProblem::unit_box(3);
        p.objective = vec![1.0, 2.0, 3.0];
        p.bounds[2] = (0.5, 0.5);
        p.add_row(vec![1.0, 1.0, 0.0], RowSense::Eq, 0.7);
        let s = lp_solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - (0.7 + 1.5)).abs() < 1e-12);
        assert!((s.dual_objective(&p) - s.objective).abs() < 1e-9);
        // Fixed variable's reduced cost is its marginal price.
        assert!((s.reduced_costs[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_cost_variables_stay_at_lower_bound() {
        let mut p = LpProblem::unit_box(4);
        p.bounds[0] = (1.0, 1.0);
        p.add_row(vec![3.0, 3.0, 0.0, 0.0], RowSense::Le, 3.0);
        let s = lp_solve(&p).unwrap();
        assert_eq!(s.point, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn malformed_rejected() {
        let mut p = LpProblem::unit_box(2);
        p.rows.push(vec![1.0]);
        p.rhs.push(0.0);
        p.senses.push(RowSense::Le);
        assert!(lp_solve(&p).is_err());
        let mut q = LpProblem::unit_box(1);
        q.bounds[0] = (2.0, 1.0);
        assert!(lp_solve(&q).is_err());
    }
}
