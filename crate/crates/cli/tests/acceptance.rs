//! End-to-end acceptance checks. Prints one PASS or FAIL line per criterion
//! and exits nonzero when any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ucmec_core::gbd_master::{exhaustive_master, run_clustering, CutStore, GibbsConfig};
use ucmec_core::gbd_primal::{make_cut, solve_primal, Demand, Mode, SlotProblem, ZfUplink};
use ucmec_core::harness::{
    run_seeds, run_sweep, run_verify, verify_scenario, Algorithm, EpisodeContext, EpisodeResult, Scenario, SweepAxis,
};
use ucmec_core::jo_cdsd::Termination;
use ucmec_core::lyapunov::VirtualQueue;
use ucmec_core::numerics::{
    l2_norm, lp_solve, pseudo_inverse, vec_dot, Complex64, ComplexMatrix, LpProblem, LpStatus, RowSense,
};
use ucmec_core::radio::{generate_channels, place_nodes, thermal_noise_w, zf_beamformer, Topology};
use ucmec_core::workload::{default_catalog, processing_delay, ClusterDecision, Task};

type Outcome = Result<(bool, String), String>;

const SEEDS: u64 = 20;

fn seeds(n: u64) -> Vec<u64> {
    (0..n).collect()
}

fn episodes(s: &Scenario, alg: Algorithm, n: u64) -> Result<Vec<EpisodeResult>, String> {
    run_seeds(s, alg, &seeds(n)).map_err(|e| e.to_string())
}

fn total_delays(runs: &[EpisodeResult]) -> Vec<f64> {
    runs.iter().flat_map(|r| r.slots.iter().map(|s| s.total_delay)).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// One-sided paired test at the 95% level: `a` is not significantly larger
/// than `b`. Returns the mean difference, its standard error and the verdict.
fn not_greater(a: &[f64], b: &[f64]) -> (f64, f64, bool) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let m = mean(&d);
    let var = d.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (d.len() - 1) as f64;
    let se = (var / d.len() as f64).sqrt();
    (m, se, m - 1.645 * se <= 0.0)
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let rows = run_verify(&verify_scenario(), &seeds(SEEDS)).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let flagged = rows.iter().filter(|r| r.flagged).count();
    let worst = rows.iter().map(|r| r.rel_gap).fold(f64::NEG_INFINITY, f64::max);
    Ok((
        flagged == 0 && rows.iter().all(|r| r.rel_gap <= 0.02) && secs < 60.0,
        format!("{} slots, {flagged} flagged, worst gap {worst:.2e}, {secs:.1} s", rows.len()),
    ))
}

fn gbd_shape() -> Outcome {
    let mut s = Scenario::default();
    s.slots = 10;
    let runs = episodes(&s, Algorithm::JoCdsd, 10)?;
    let mut iters = Vec::new();
    let (mut converged, mut monotone) = (0, true);
    for slot in runs.iter().flat_map(|r| &r.slots) {
        for g in &slot.groups {
            let run = g.gbd.as_ref().ok_or("slot without a GBD run")?;
            iters.push(run.iterations as f64);
            if run.termination == Termination::Converged && run.ubd - run.lbd <= run.epsilon && run.iterations < 2000 {
                converged += 1;
            }
            monotone &= run.trace.windows(2).all(|w| w[1].ubd <= w[0].ubd && w[1].lbd >= w[0].lbd);
        }
    }
    let n = iters.len();
    let med = median(iters);
    Ok((
        n == 100 && monotone && converged * 100 >= 95 * n && med <= 50.0,
        format!("{converged}/{n} converged, monotone bounds {monotone}, median iterations {med}"),
    ))
}

fn gibbs_vs_exhaustive() -> Outcome {
    let s = Scenario::default();
    let (mut close, mut improvements) = (0, Vec::new());
    for seed in 0..50u64 {
        let ctx = EpisodeContext::new(&s, seed).map_err(|e| e.to_string())?;
        let inputs = ctx.inputs(1).map_err(|e| e.to_string())?;
        let task = &inputs.tasks[0];
        let uplink = ZfUplink::new(&inputs.channels, &ctx.topology, vec![(0, task.data_bits)], vec![]);
        let edge_delay = task.edge_delay(&ctx.services);
        let backbone_delay = task.backbone_delay(s.backbone_rate());
        let demands = [Demand { service: task.service, theta_coeff: backbone_delay - edge_delay }];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let problem = SlotProblem {
            services: &ctx.services,
            resources: &ctx.resources,
            backlog: rng.random_range(0.0..5.0),
            threshold: s.cost_threshold,
            v: s.v,
            max_cluster: 3,
            demands: &demands,
            mode: Mode::Single { pin: 1.0, edge_delay, backbone_delay },
            uplink: &uplink,
        };
        let mut store = CutStore::new();
        let all = ClusterDecision::enumerate(10, 3);
        for _ in 0..5 {
            let c = all[rng.random_range(0..all.len())];
            let primal = solve_primal(&problem, c).map_err(|e| e.to_string())?;
            store.push(make_cut(&problem, &primal, store.len() + 1));
        }
        let (_, exact) = exhaustive_master(&mut store, &problem);
        let r = run_clustering(&mut store, &problem, &GibbsConfig::default(), ctx.nearest_start(&[0]), None, &mut rng);
        let (best, found) = (exact.value(), r.value.value());
        if found - best <= 0.01 * best.abs() {
            close += 1;
        }
        improvements.push(r.last_improvement as f64);
    }
    let med = median(improvements);
    Ok((close >= 48 && med <= 500.0, format!("{close}/50 within 1%, median last improvement {med}")))
}

fn cost_budget() -> Outcome {
    let mut s = Scenario::default();
    s.slots = 1000;
    let jo = episodes(&s, Algorithm::JoCdsd, 3)?;
    let up = episodes(&s, Algorithm::Uplink, 3)?;
    let jo_cost: Vec<f64> = jo.iter().map(|r| r.summary.mean_cost).collect();
    let up_cost: Vec<f64> = up.iter().map(|r| r.summary.mean_cost).collect();
    Ok((
        jo_cost.iter().all(|&c| c <= 2.1) && up_cost.iter().all(|&c| c > s.cost_threshold),
        format!("jo_cdsd cost {jo_cost:.3?}, uplink cost {up_cost:.3?}"),
    ))
}

fn ordering() -> Outcome {
    let s = Scenario::default();
    let d: BTreeMap<Algorithm, Vec<f64>> = Algorithm::ALL
        .iter()
        .map(|&a| Ok((a, total_delays(&episodes(&s, a, SEEDS)?))))
        .collect::<Result<_, String>>()?;
    let (jo, inst) = (&d[&Algorithm::JoCdsd], &d[&Algorithm::Instant]);
    let (m1, se1, ok1) = not_greater(inst, jo);
    let (m2, se2, ok2) = not_greater(jo, &d[&Algorithm::Uplink]);
    let (m3, se3, ok3) = not_greater(jo, &d[&Algorithm::Block]);
    let ratio = mean(jo) / mean(inst);
    let means: Vec<String> = d.iter().map(|(a, v)| format!("{a} {:.4}", mean(v))).collect();
    Ok((
        ok1 && ok2 && ok3 && ratio <= 1.10,
        format!(
            "means [{}]; instant-jo {m1:.2e}+/-{se1:.1e}, jo-uplink {m2:.2e}+/-{se2:.1e}, jo-block {m3:.2e}+/-{se3:.1e}, jo/instant {ratio:.4}",
            means.join(", ")
        ),
    ))
}

fn sweep_means(axis: SweepAxis, values: &[f64]) -> Result<Vec<f64>, String> {
    let (rows, _) =
        run_sweep(&Scenario::default(), axis, values, &[Algorithm::JoCdsd], &seeds(SEEDS)).map_err(|e| e.to_string())?;
    Ok(rows.iter().map(|r| r.mean_total_delay).collect())
}

fn cluster_size_monotone() -> Outcome {
    let d = sweep_means(SweepAxis::ClusterSize, &[1.0, 2.0, 3.0, 4.0])?;
    let monotone = d.windows(2).all(|w| w[1] <= w[0] * 1.01);
    let diminishing = d[2] - d[3] <= d[0] - d[1];
    Ok((monotone && diminishing, format!("delays {d:.4?}")))
}

fn threshold_insensitive() -> Outcome {
    let d = sweep_means(SweepAxis::CostThreshold, &[1.0, 2.0, 3.0])?;
    let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = (hi - lo) / lo;
    Ok((spread < 0.10, format!("delays {d:.4?}, spread {:.2}%", 100.0 * spread)))
}

fn zf_orthogonality(rng: &mut ChaCha8Rng) -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for inst in 0..1000u64 {
        let (bs, users) = place_nodes(rng, 6, 4, 0.1, 1.0);
        let topo = Topology {
            antennas: 3,
            bs_positions: bs,
            user_positions: users,
            tx_power_w: vec![0.2; 4],
            noise_power_w: thermal_noise_w(10e6),
            bandwidth_hz: 10e6,
        };
        let channels = generate_channels(&topo, inst, inst).map_err(|e| e.to_string())?;
        for _ in 0..10 {
            let size = rng.random_range(1..=3);
            let cluster = sample(rng, 6, size).into_vec();
            let intra_count = rng.random_range(1..=3);
            let intra = sample(rng, 4, intra_count).into_vec();
            let bf = zf_beamformer(&channels, intra[0], &cluster, &intra).map_err(|e| e.to_string())?;
            for &v in &intra[1..] {
                let g = channels.stacked(v, &cluster);
                let leak = vec_dot(&bf.weights, &g).map_err(|e| e.to_string())?.norm() / l2_norm(&g).unwrap();
                worst = worst.max(leak);
            }
        }
    }
    Ok(worst)
}

fn monte_carlo_sigmas(rng: &mut ChaCha8Rng) -> f64 {
    let services = default_catalog(6, 3e9, 0.3e9);
    let task = Task { user: 0, slot: 0, data_bits: 30e6, workload_cycles: 0.4e9, service: 2 };
    let (edge, cloud) = (task.edge_delay(&services), task.backbone_delay(50e6));
    let n = 200_000;
    let mut worst: f64 = 0.0;
    for hit in [0.1, 0.3, 0.5, 0.75, 0.9] {
        let sample_mean = (0..n).map(|_| if rng.random::<f64>() < hit { edge } else { cloud }).sum::<f64>() / n as f64;
        let sigma = (hit * (1.0 - hit)).sqrt() * (cloud - edge).abs() / (n as f64).sqrt();
        worst = worst.max((sample_mean - processing_delay(&task, hit, &services, 50e6)).abs() / sigma);
    }
    worst
}

fn slackness(rng: &mut ChaCha8Rng) -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for _ in 0..2000 {
        let n = rng.random_range(2..=6);
        let mut p = LpProblem::unit_box(n);
        p.objective = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        for _ in 0..rng.random_range(1..=4) {
            let row = (0..n).map(|_| rng.random_range(-1.0..2.0)).collect();
            let sense = if rng.random_bool(0.3) { RowSense::Ge } else { RowSense::Le };
            p.add_row(row, sense, rng.random_range(0.2..2.0));
        }
        let sol = lp_solve(&p).map_err(|e| e.to_string())?;
        if sol.status != LpStatus::Optimal {
            continue;
        }
        for ((row, &b), &y) in p.rows.iter().zip(&p.rhs).zip(&sol.duals) {
            let slack: f64 = row.iter().zip(&sol.point).map(|(a, v)| a * v).sum::<f64>() - b;
            worst = worst.max((y * slack).abs());
        }
    }
    Ok(worst)
}

fn penrose(rng: &mut ChaCha8Rng) -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for _ in 0..2000 {
        let (r, c) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let mut data: Vec<Complex64> =
            (0..r * c).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        if r > 1 && rng.random_bool(0.5) {
            for j in 0..c {
                data[c + j] = data[j] * 3.0;
            }
        }
        let a = ComplexMatrix::from_row_major(r, c, data).map_err(|e| e.to_string())?;
        let p = pseudo_inverse(&a).map_err(|e| e.to_string())?;
        let ap = a.matmul(&p).unwrap();
        let pa = p.matmul(&a).unwrap();
        let residuals = [
            ap.matmul(&a).unwrap().sub(&a).unwrap().max_abs(),
            pa.matmul(&p).unwrap().sub(&p).unwrap().max_abs() / (1.0 + p.max_abs()),
            ap.sub(&ap.conjugate_transpose()).unwrap().max_abs(),
            pa.sub(&pa.conjugate_transpose()).unwrap().max_abs(),
        ];
        worst = residuals.into_iter().fold(worst, f64::max);
    }
    Ok(worst)
}

fn queue_nonnegative(rng: &mut ChaCha8Rng) -> Result<bool, String> {
    let mut q = VirtualQueue::new(2.0).map_err(|e| e.to_string())?;
    for _ in 0..1_000_000 {
        if q.update(rng.random_range(0.0..6.0)).map_err(|e| e.to_string())? < 0.0 {
            return Ok(false);
        }
    }
    Ok(true)
}

fn property_suites() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let zf = zf_orthogonality(&mut rng)?;
    let mc = monte_carlo_sigmas(&mut rng);
    let cs = slackness(&mut rng)?;
    let pen = penrose(&mut rng)?;
    let queue = queue_nonnegative(&mut rng)?;
    let secs = start.elapsed().as_secs_f64();
    Ok((
        zf <= 1e-8 && mc <= 3.0 && cs <= 1e-8 && pen <= 1e-8 && queue && secs < 120.0,
        format!(
            "zf leakage {zf:.1e}, monte carlo {mc:.2} sigma, slackness {cs:.1e}, penrose {pen:.1e}, queue ok {queue}, {secs:.1} s"
        ),
    ))
}

fn multi_user_dichotomy() -> Outcome {
    let mut s = Scenario::multi_user();
    s.slots = 3;
    let jo = episodes(&s, Algorithm::JoCdsd, SEEDS)?;
    let inst = episodes(&s, Algorithm::Instant, SEEDS)?;
    let (mut max_probes, mut max_width) = (0, 0.0f64);
    for g in jo.iter().flat_map(|r| &r.slots).flat_map(|s| &s.groups) {
        let last = g.probes.last().ok_or("group without probes")?;
        max_probes = max_probes.max(g.probes.len());
        max_width = max_width.max(last.hi - last.lo);
    }
    let (a, b) = (mean(&total_delays(&jo)), mean(&total_delays(&inst)));
    let gap = (a - b).abs() / b;
    Ok((
        max_probes <= 10 && max_width < 1e-2 && gap <= 0.05,
        format!(
            "max probes {max_probes}, max bracket width {max_width:.2e}, jo_cdsd {a:.4} vs instant {b:.4} ({:.2}%)",
            100.0 * gap
        ),
    ))
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).into_iter().flatten().flatten() {
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(".csv") {
            out.insert(name, std::fs::read(entry.path()).unwrap_or_default());
        }
    }
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scenario = tmp.path().join("scenario.toml");
    let mut s = Scenario::multi_user();
    s.slots = 4;
    std::fs::write(&scenario, s.to_toml().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let sc = scenario.to_string_lossy().into_owned();
    let commands: [(&str, Vec<&str>); 3] = [
        ("run", vec!["run", "--scenario", &sc, "--seeds", "0..3"]),
        ("sweep", vec!["sweep", "--scenario", &sc, "--axis", "cluster_b", "--values", "2,3", "--algorithms", "jo_cdsd,block", "--seeds", "0..2"]),
        ("verify", vec!["verify", "--seeds", "0..2"]),
    ];
    let mut files = 0;
    for (name, args) in &commands {
        let mut outputs = Vec::new();
        for (i, threads) in ["1", "4"].iter().enumerate() {
            let dir = tmp.path().join(format!("{name}{i}"));
            let status = Command::new(env!("CARGO_BIN_EXE_ucmec"))
                .args(args)
                .arg("--out")
                .arg(&dir)
                .env("UCMEC_THREADS", threads)
                .output()
                .map_err(|e| e.to_string())?;
            if !status.status.success() {
                return Ok((false, format!("{name} failed: {}", String::from_utf8_lossy(&status.stderr))));
            }
            outputs.push(csv_files(&dir));
        }
        if outputs[0].is_empty() || outputs[0] != outputs[1] {
            return Ok((false, format!("{name}: outputs differ between runs")));
        }
        files += outputs[0].len();
    }
    Ok((true, format!("{files} CSV files byte-identical across two runs of run, sweep and verify")))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("oracle equivalence", oracle_equivalence),
        ("GBD convergence shape", gbd_shape),
        ("Gibbs vs exhaustive master", gibbs_vs_exhaustive),
        ("cost budget", cost_budget),
        ("comparative ordering", ordering),
        ("cluster-size monotonicity", cluster_size_monotone),
        ("threshold insensitivity", threshold_insensitive),
        ("property suites", property_suites),
        ("multi-user dichotomy", multi_user_dichotomy),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!ok);
        println!(
            "{} {:>2} {name}: {detail} [{:.1} s]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
