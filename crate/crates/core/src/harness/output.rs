//! CSV outputs and the plotting scripts that read them.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::episode::EpisodeResult;
use crate::harness::sweep::SweepRow;

/// Bumped whenever a column is added, removed or reordered.
pub const SCHEMA_VERSION: u32 = 1;

pub const SLOTS_HEADER: [&str; 9] =
    ["slot", "algo", "seed", "total_delay_s", "uplink_delay_s", "cost", "queue", "gbd_iters", "flags"];

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

/// Create `dir` and prove it is writable, before any computation.
pub fn prepare_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"").map_err(io(&probe))?;
    fs::remove_file(&probe).map_err(io(&probe))
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(io(path))?;
    Ok(csv::Writer::from_writer(file))
}

fn write_slots(results: &[EpisodeResult], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SLOTS_HEADER)?;
    for r in results {
        for s in &r.slots {
            w.write_record([
                s.slot.to_string(),
                s.algorithm.tag().to_string(),
                s.seed.to_string(),
                num(s.total_delay),
                num(s.uplink_delay),
                num(s.cost),
                num(s.queue),
                s.gbd_iters.to_string(),
                s.flag_string(),
            ])?;
        }
    }
    w.flush().map_err(io(path))
}

fn write_decisions(results: &[EpisodeResult], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["slot", "algo", "seed", "group", "users", "cluster", "processing_delay_s", "objective", "probes"])?;
    for r in results {
        for s in &r.slots {
            for (i, g) in s.groups.iter().enumerate() {
                let users = g.users.iter().map(usize::to_string).collect::<Vec<_>>().join(";");
                w.write_record([
                    s.slot.to_string(),
                    s.algorithm.tag().to_string(),
                    s.seed.to_string(),
                    i.to_string(),
                    users,
                    g.cluster.to_string(),
                    num(g.processing_delay),
                    num(g.objective),
                    g.probes.len().to_string(),
                ])?;
            }
        }
    }
    w.flush().map_err(io(path))
}

fn write_summary(results: &[EpisodeResult], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "schema_version",
        "algo",
        "seed",
        "slots",
        "mean_total_delay_s",
        "mean_uplink_delay_s",
        "mean_processing_delay_s",
        "mean_cost",
        "final_queue",
        "flagged_slots",
    ])?;
    for r in results {
        let s = &r.summary;
        w.write_record([
            SCHEMA_VERSION.to_string(),
            s.algorithm.tag().to_string(),
            s.seed.to_string(),
            s.slots.to_string(),
            num(s.mean_total_delay),
            num(s.mean_uplink_delay),
            num(s.mean_processing_delay),
            num(s.mean_cost),
            num(s.final_queue),
            s.flagged_slots.to_string(),
        ])?;
    }
    w.flush().map_err(io(path))
}

/// Bound traces for every slot; the Gibbs trace of the first master solve
/// for the first slot of each episode.
fn write_convergence(results: &[EpisodeResult], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["algo", "seed", "slot", "group", "series", "iter", "value"])?;
    for r in results {
        for s in &r.slots {
            for (i, g) in s.groups.iter().enumerate() {
                let Some(run) = &g.gbd else { continue };
                let base = [s.algorithm.tag().to_string(), s.seed.to_string(), s.slot.to_string(), i.to_string()];
                for p in &run.trace {
                    for (series, v) in [("ubd", p.ubd), ("lbd", p.lbd)] {
                        let mut rec = base.to_vec();
                        rec.extend([series.to_string(), p.tau.to_string(), num(v)]);
                        w.write_record(&rec)?;
                    }
                }
                if s.slot == 1 {
                    for (it, v) in run.gibbs_trace.iter().enumerate() {
                        let mut rec = base.to_vec();
                        rec.extend(["gibbs".to_string(), (it + 1).to_string(), num(*v)]);
                        w.write_record(&rec)?;
                    }
                }
            }
        }
    }
    w.flush().map_err(io(path))
}

fn write_sweep(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "schema_version",
        "axis",
        "value",
        "algo",
        "seeds",
        "mean_total_delay_s",
        "ci95_total_delay_s",
        "mean_uplink_delay_s",
        "mean_cost",
    ])?;
    for r in rows {
        w.write_record([
            SCHEMA_VERSION.to_string(),
            r.axis.tag().to_string(),
            num(r.value),
            r.algorithm.tag().to_string(),
            r.seeds.to_string(),
            num(r.mean_total_delay),
            num(r.ci95_total_delay),
            num(r.mean_uplink_delay),
            num(r.mean_cost),
        ])?;
    }
    w.flush().map_err(io(path))
}

const PLOT_CONVERGENCE: &str = r#"#!/usr/bin/env python3
"""Gibbs master score and GBD bounds against iteration."""
import csv
import sys
from collections import defaultdict

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "convergence.csv"
series = defaultdict(list)
with open(path, newline="") as f:
    for row in csv.DictReader(f):
        if row["algo"] != "jo_cdsd" or row["slot"] != "1" or row["group"] != "0":
            continue
        series[(row["seed"], row["series"])].append((int(row["iter"]), float(row["value"])))
seed = min(s for s, _ in series) if series else None
fig, (left, right) = plt.subplots(1, 2, figsize=(10, 4))
for name, ax in (("gibbs", left), ("ubd", right), ("lbd", right)):
    pts = series.get((seed, name), [])
    ax.plot([p[0] for p in pts], [p[1] for p in pts], label=name.upper())
left.set_xlabel("Gibbs iteration")
left.set_ylabel("master value")
right.set_xlabel("GBD iteration")
right.set_ylabel("bound")
right.legend()
fig.tight_layout()
fig.savefig("convergence.png", dpi=150)
"#;

const PLOT_SLOTS: &str = r#"#!/usr/bin/env python3
"""Running time averages of total delay, uplink delay and caching cost."""
import csv
import sys
from collections import defaultdict

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "slots.csv"
rows = defaultdict(lambda: defaultdict(list))
with open(path, newline="") as f:
    for row in csv.DictReader(f):
        rows[row["algo"]][int(row["slot"])].append(row)
metrics = [("total_delay_s", "total delay (s)"), ("uplink_delay_s", "uplink delay (s)"), ("cost", "caching cost")]
fig, axes = plt.subplots(1, len(metrics), figsize=(14, 4))
for algo, by_slot in sorted(rows.items()):
    slots = sorted(by_slot)
    for ax, (key, label) in zip(axes, metrics):
        acc, curve = 0.0, []
        for i, t in enumerate(slots, start=1):
            acc += sum(float(r[key]) for r in by_slot[t]) / len(by_slot[t])
            curve.append(acc / i)
        ax.plot(slots, curve, label=algo)
        ax.set_xlabel("time slot")
        ax.set_ylabel(label)
axes[0].legend()
fig.tight_layout()
fig.savefig("slots.png", dpi=150)
"#;

const PLOT_SWEEP: &str = r#"#!/usr/bin/env python3
"""Mean total delay, uplink delay and caching cost across a parameter sweep."""
import csv
import sys
from collections import defaultdict

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "sweep.csv"
rows = defaultdict(list)
axis = None
with open(path, newline="") as f:
    for row in csv.DictReader(f):
        axis = row["axis"]
        rows[row["algo"]].append(row)
metrics = [("mean_total_delay_s", "total delay (s)"), ("mean_uplink_delay_s", "uplink delay (s)"), ("mean_cost", "caching cost")]
fig, axes = plt.subplots(1, len(metrics), figsize=(14, 4))
for algo, items in sorted(rows.items()):
    xs = [float(r["value"]) for r in items]
    for ax, (key, label) in zip(axes, metrics):
        err = [float(r["ci95_total_delay_s"]) for r in items] if key == "mean_total_delay_s" else None
        ax.errorbar(xs, [float(r[key]) for r in items], yerr=err, marker="o", label=algo)
        ax.set_xlabel(axis)
        ax.set_ylabel(label)
axes[0].legend()
fig.tight_layout()
fig.savefig("sweep.png", dpi=150)
"#;

/// Write every output file for `results` (and `sweep`, when given) to `dir`.
pub fn emit_outputs(results: &[EpisodeResult], sweep: Option<&[SweepRow]>, dir: &Path) -> Result<Vec<PathBuf>> {
    if results.is_empty() {
        return Err(Error::Empty("emit_outputs"));
    }
    prepare_out_dir(dir)?;
    let mut written = Vec::new();
    let mut emit = |name: &str, f: &dyn Fn(&Path) -> Result<()>| -> Result<()> {
        let path = dir.join(name);
        f(&path)?;
        written.push(path);
        Ok(())
    };
    emit("slots.csv", &|p| write_slots(results, p))?;
    emit("decisions.csv", &|p| write_decisions(results, p))?;
    emit("summary.csv", &|p| write_summary(results, p))?;
    emit("convergence.csv", &|p| write_convergence(results, p))?;
    emit("plot_convergence.py", &|p| fs::write(p, PLOT_CONVERGENCE).map_err(io(p)))?;
    emit("plot_slots.py", &|p| fs::write(p, PLOT_SLOTS).map_err(io(p)))?;
    if let Some(rows) = sweep {
        emit("sweep.csv", &|p| write_sweep(rows, p))?;
        emit("plot_sweep.py", &|p| fs::write(p, PLOT_SWEEP).map_err(io(p)))?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::episode::run_episode;
    use crate::harness::scenario::{Algorithm, Scenario};

    fn results() -> Vec<EpisodeResult> {
        let mut s = Scenario::default();
        s.slots = 3;
        s.network.bs_count = 4;
        s.network.max_cluster = 2;
        s.services.count = 3;
        vec![run_episode(&s, Algorithm::JoCdsd, 2).unwrap()]
    }

    #[test]
    fn files_are_identical_on_rewrite() {
        let r = results();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let fa = emit_outputs(&r, None, a.path()).unwrap();
        emit_outputs(&r, None, b.path()).unwrap();
        for p in fa {
            let name = p.file_name().unwrap();
            assert_eq!(fs::read(&p).unwrap(), fs::read(b.path().join(name)).unwrap());
        }
    }

    #[test]
    fn slots_header_and_convergence_shape() {
        let r = results();
        let dir = tempfile::tempdir().unwrap();
        emit_outputs(&r, None, dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("slots.csv")).unwrap();
        assert_eq!(text.lines().next().unwrap(), "slot,algo,seed,total_delay_s,uplink_delay_s,cost,queue,gbd_iters,flags");
        assert_eq!(text.lines().count(), 4);
        for line in text.lines().skip(1) {
            if r[0].slots.iter().all(|s| s.flags.is_empty()) {
                assert!(line.ends_with(','));
            }
        }
        let mut rd = csv::Reader::from_path(dir.path().join("convergence.csv")).unwrap();
        let mut last: Option<(String, f64)> = None;
        for rec in rd.records() {
            let rec = rec.unwrap();
            if &rec[4] != "ubd" {
                continue;
            }
            let v: f64 = rec[6].parse().unwrap();
            if let Some((slot, prev)) = &last {
                if slot == &rec[2] {
                    assert!(v <= *prev);
                }
            }
            last = Some((rec[2].to_string(), v));
        }
    }

    #[test]
    fn unwritable_directory_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain-file");
        fs::write(&file, b"x").unwrap();
        assert!(matches!(prepare_out_dir(&file.join("sub")), Err(Error::Io { .. })));
    }
}
