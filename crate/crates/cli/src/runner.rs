//! Executes a validated [`RunPlan`] and writes its artifacts.
//!
//! Every CSV this module emits starts with a `#`-prefixed provenance line
//! (binary version, config digest, seed) so an output directory is
//! self-describing. Numbers are written with `f64::to_string`, the shortest
//! representation that round-trips, which is what makes byte-for-byte
//! comparison across runs meaningful.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use maxvi_core::mle::fit_mle;
use maxvi_core::simulate::{sample_brown_resnick, sample_brown_resnick_recorded, sample_logistic};
use maxvi_core::vi::{fit, FitResult, VIConfig};
use maxvi_core::{io, ModelParams, RandomStream, SpatialDataset};

use crate::config::{CliError, Command, DataPlan, RunPlan, SweepPlan};

pub fn run(plan: &RunPlan) -> Result<(), CliError> {
    std::fs::create_dir_all(&plan.out)?;
    match plan.command {
        Command::Simulate => run_simulate(plan),
        Command::Fit => run_fit(plan),
        Command::Mle => run_mle(plan),
        Command::Sweep => run_sweep(plan),
    }
}

/// CSV writer that first emits the provenance comment line.
fn csv_writer(path: &Path, note: &str) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# {note}")?;
    Ok(csv::Writer::from_writer(out))
}

/// Placeholder geometry for the logistic model, which has no spatial
/// structure: site i sits at (i, 0).
fn line_sites(d: usize) -> Vec<[f64; 2]> {
    (0..d).map(|i| [i as f64, 0.0]).collect()
}

fn run_simulate(plan: &RunPlan) -> Result<(), CliError> {
    let DataPlan::Synthetic { d, n } = plan.data else {
        unreachable!("simulate always plans synthetic data");
    };
    let truth = plan.truth.as_ref().expect("simulate requires truth");
    let stream = RandomStream::new(plan.seed);
    let note = plan.provenance.as_str();
    match truth {
        ModelParams::Logistic(p) => {
            let obs = sample_logistic(p, d, n, stream)?;
            io::write_sites(plan.out.join("sites.csv"), &line_sites(d), Some(note))?;
            io::write_observations(plan.out.join("observations.csv"), &obs, Some(note))?;
        }
        ModelParams::BrownResnick(p) => {
            io::write_sites(plan.out.join("sites.csv"), p.sites(), Some(note))?;
            if plan.write_partitions {
                let draws = sample_brown_resnick_recorded(p, n, stream)?;
                let obs: Vec<Vec<f64>> = draws.iter().map(|(z, _)| z.clone()).collect();
                let parts: Vec<_> = draws.into_iter().map(|(_, part)| part).collect();
                io::write_observations(plan.out.join("observations.csv"), &obs, Some(note))?;
                io::write_partitions(plan.out.join("partitions.csv"), &parts, Some(note))?;
            } else {
                let obs = sample_brown_resnick(p, n, stream)?;
                io::write_observations(plan.out.join("observations.csv"), &obs, Some(note))?;
            }
        }
    }
    eprintln!("maxvi: wrote {n} replicates of dimension {d} to {}", plan.out.display());
    Ok(())
}

fn load_files(plan: &RunPlan) -> Result<SpatialDataset, CliError> {
    let DataPlan::Files { sites, observations } = &plan.data else {
        unreachable!("fit and mle always plan file-backed data");
    };
    Ok(io::read_dataset(sites, observations)?)
}

fn run_fit(plan: &RunPlan) -> Result<(), CliError> {
    let data = load_files(plan)?;
    let init = plan.init.as_ref().expect("fit requires init");
    let cfg = plan.vicfg.as_ref().expect("fit requires [vi]");
    let res = fit(init, &plan.guide, &data, cfg, RandomStream::new(plan.seed))?;
    write_trace(&plan.out.join("trace.csv"), &plan.provenance, init, &res)?;
    write_estimate(&plan.out.join("estimate.csv"), &plan.provenance, &res)?;
    let last = res.trace.rows.last().expect("iters >= 1 is validated");
    eprintln!(
        "maxvi: fit finished, bound {:.4} after {} iterations ({} skipped draws)",
        last.iwae,
        res.trace.rows.len(),
        res.skipped
    );
    Ok(())
}

fn write_trace(
    path: &Path,
    note: &str,
    init: &ModelParams,
    res: &FitResult,
) -> Result<(), CliError> {
    let mut w = csv_writer(path, note)?;
    let mut header: Vec<String> = vec!["iter".into()];
    header.extend(init.param_names().iter().map(|s| s.to_string()));
    for tail in [
        "alpha",
        "delta",
        "rho",
        "iwae",
        "grad_norm_theta",
        "grad_norm_phi",
        "skipped",
        "wall_ms",
    ] {
        header.push(tail.into());
    }
    w.write_record(&header)?;
    for row in &res.trace.rows {
        let mut rec: Vec<String> = vec![row.iter.to_string()];
        rec.extend(row.model.iter().map(|v| v.to_string()));
        rec.push(row.alpha.to_string());
        rec.push(row.delta.to_string());
        rec.push(row.rho.to_string());
        rec.push(row.iwae.to_string());
        rec.push(row.grad_norm_model.to_string());
        rec.push(row.grad_norm_guide.to_string());
        rec.push(row.skipped.to_string());
        rec.push(row.wall_ms.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn write_estimate(path: &Path, note: &str, res: &FitResult) -> Result<(), CliError> {
    let mut w = csv_writer(path, note)?;
    w.write_record(["param", "value"])?;
    for (name, value) in res.model.param_names().iter().zip(res.model.values()) {
        w.write_record([name.to_string(), value.to_string()])?;
    }
    for (name, value) in [
        ("alpha", res.guide.alpha()),
        ("delta", res.guide.delta()),
        ("rho", res.guide.rho()),
    ] {
        w.write_record([name.to_string(), value.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn run_mle(plan: &RunPlan) -> Result<(), CliError> {
    let data = load_files(plan)?;
    let init = plan.init.as_ref().expect("mle requires init");
    let res = fit_mle(init, &data, &plan.mvn, RandomStream::new(plan.seed))?;
    let mut w = csv_writer(&plan.out.join("mle.csv"), &plan.provenance)?;
    let mut header: Vec<String> = init.param_names().iter().map(|s| s.to_string()).collect();
    for tail in ["loglik", "evals", "converged"] {
        header.push(tail.into());
    }
    w.write_record(&header)?;
    let mut rec: Vec<String> = res.params.values().iter().map(|v| v.to_string()).collect();
    rec.push(res.loglik.to_string());
    rec.push(res.evals.to_string());
    rec.push(res.converged.to_string());
    w.write_record(&rec)?;
    w.flush()?;
    eprintln!(
        "maxvi: mle finished, loglik {:.4} in {} evaluations (converged: {})",
        res.loglik, res.evals, res.converged
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep

/// One estimate of one parameter in one replication. Failed runs keep their
/// rows (estimate NaN, status carrying the error) so reps.csv always has
/// `replications * estimators * params` rows per scenario.
struct RepRow {
    replication: usize,
    m: Option<usize>,
    estimator: String,
    param: String,
    estimate: f64,
    status: String,
}

fn synth_data(truth: &ModelParams, d: usize, n: usize, stream: RandomStream) -> maxvi_core::Result<SpatialDataset> {
    match truth {
        ModelParams::Logistic(p) => {
            SpatialDataset::new(line_sites(d), sample_logistic(p, d, n, stream)?)
        }
        ModelParams::BrownResnick(p) => {
            SpatialDataset::new(p.sites().to_vec(), sample_brown_resnick(p, n, stream)?)
        }
    }
}

/// Streams inside a replication: child 0 draws the data, children 1..=K the
/// VI fits for the K entries of m_list, child K+1 the MLE. Keeping the
/// layout fixed means adding an estimator never reshuffles another's draws.
fn one_replication(
    plan: &RunPlan,
    sweep: &SweepPlan,
    d: usize,
    n: usize,
    rep: usize,
    root: RandomStream,
) -> Vec<RepRow> {
    let truth = plan.truth.as_ref().expect("sweep requires truth");
    let init = plan.init.as_ref().expect("sweep requires init");
    let names: Vec<String> = init.param_names().iter().map(|s| s.to_string()).collect();
    let rep_stream = root.child(rep as u64);

    let mut rows = Vec::new();
    let push = |rows: &mut Vec<RepRow>,
                    m: Option<usize>,
                    estimator: &str,
                    outcome: &Result<Vec<f64>, String>| {
        for (j, param) in names.iter().enumerate() {
            let (estimate, status) = match outcome {
                Ok(values) => (values[j], "ok".to_string()),
                Err(msg) => (f64::NAN, format!("error: {msg}")),
            };
            rows.push(RepRow {
                replication: rep,
                m,
                estimator: estimator.to_string(),
                param: param.clone(),
                estimate,
                status,
            });
        }
    };

    let data = synth_data(truth, d, n, rep_stream.child(0));
    match data {
        Ok(data) => {
            if sweep.with_vi {
                let tmpl = plan.vicfg.as_ref().expect("vi estimator requires [vi]");
                for (k, &m) in sweep.m_list.iter().enumerate() {
                    let cfg = VIConfig { m_draws: m, ..tmpl.clone() };
                    let stream = rep_stream.child(1 + k as u64);
                    let outcome = fit(init, &plan.guide, &data, &cfg, stream)
                        .map(|res| res.model.values())
                        .map_err(|e| e.to_string());
                    push(&mut rows, Some(m), &format!("vi_m{m}"), &outcome);
                }
            }
            if sweep.with_mle {
                let stream = rep_stream.child(1 + sweep.m_list.len() as u64);
                let outcome = fit_mle(init, &data, &plan.mvn, stream)
                    .map(|res| res.params.values())
                    .map_err(|e| e.to_string());
                push(&mut rows, None, "mle", &outcome);
            }
        }
        Err(e) => {
            // data draw failed: every planned estimate fails with the same cause
            let outcome = Err(e.to_string());
            if sweep.with_vi {
                for &m in &sweep.m_list {
                    push(&mut rows, Some(m), &format!("vi_m{m}"), &outcome);
                }
            }
            if sweep.with_mle {
                push(&mut rows, None, "mle", &outcome);
            }
        }
    }
    rows
}

/// Linear-interpolation quantile of an already sorted slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

const BOOTSTRAP_RESAMPLES: usize = 10_000;

fn run_sweep(plan: &RunPlan) -> Result<(), CliError> {
    let sweep = plan.sweep.as_ref().expect("sweep requires [sweep]");
    let DataPlan::Synthetic { d, n } = plan.data else {
        unreachable!("sweep always plans synthetic data");
    };
    let root = RandomStream::new(plan.seed);

    // replications run in parallel but land in a Vec indexed by rep, so the
    // files that follow never depend on scheduling
    let per_rep: Vec<Vec<RepRow>> = (0..sweep.replications)
        .into_par_iter()
        .map(|rep| one_replication(plan, sweep, d, n, rep, root))
        .collect();

    // deterministic group order: estimators as configured, params in model order
    let names: Vec<String> = plan
        .init
        .as_ref()
        .expect("sweep requires init")
        .param_names()
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut estimators: Vec<String> = Vec::new();
    if sweep.with_vi {
        estimators.extend(sweep.m_list.iter().map(|m| format!("vi_m{m}")));
    }
    if sweep.with_mle {
        estimators.push("mle".to_string());
    }

    // outlier flags per (estimator, param) group: more than 5 IQRs from the
    // median is reported but never dropped
    let mut flagged: Vec<Vec<bool>> = per_rep
        .iter()
        .map(|rows| vec![false; rows.len()])
        .collect();
    for estimator in &estimators {
        for param in &names {
            let mut values = Vec::new();
            for (r, rows) in per_rep.iter().enumerate() {
                for (i, row) in rows.iter().enumerate() {
                    if &row.estimator == estimator && &row.param == param && row.status == "ok" {
                        values.push((r, i, row.estimate));
                    }
                }
            }
            if values.len() < 2 {
                continue;
            }
            let mut sorted: Vec<f64> = values.iter().map(|&(_, _, v)| v).collect();
            sorted.sort_by(f64::total_cmp);
            let median = quantile(&sorted, 0.5);
            let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
            for &(r, i, v) in &values {
                if (v - median).abs() > 5.0 * iqr {
                    flagged[r][i] = true;
                }
            }
        }
    }

    let note = plan.provenance.as_str();
    let mut w = csv_writer(&plan.out.join("reps.csv"), note)?;
    w.write_record([
        "scenario",
        "replication",
        "m",
        "estimator",
        "param",
        "estimate",
        "status",
        "flagged",
    ])?;
    for (r, rows) in per_rep.iter().enumerate() {
        for (i, row) in rows.iter().enumerate() {
            w.write_record([
                plan.label.clone(),
                row.replication.to_string(),
                row.m.map(|m| m.to_string()).unwrap_or_default(),
                row.estimator.clone(),
                row.param.clone(),
                row.estimate.to_string(),
                row.status.clone(),
                flagged[r][i].to_string(),
            ])?;
        }
    }
    w.flush()?;

    // summary: mean, sd and a percentile bootstrap CI over the successful
    // replications of each group, resampled from one fixed stream
    let mut boot_rng = root.child(sweep.replications as u64).rng();
    let mut w = csv_writer(&plan.out.join("summary.csv"), note)?;
    w.write_record([
        "scenario",
        "estimator",
        "param",
        "mean",
        "sd",
        "ci_lo",
        "ci_hi",
        "n_reps",
        "n_failed",
    ])?;
    for estimator in &estimators {
        for param in &names {
            // collect in replication order so the sum is reproducible
            let mut values = Vec::new();
            let mut n_failed = 0usize;
            for rows in &per_rep {
                for row in rows {
                    if &row.estimator == estimator && &row.param == param {
                        if row.status == "ok" {
                            values.push(row.estimate);
                        } else {
                            n_failed += 1;
                        }
                    }
                }
            }
            let k = values.len();
            let mean = if k == 0 {
                f64::NAN
            } else {
                values.iter().sum::<f64>() / k as f64
            };
            let sd = if k < 2 {
                f64::NAN
            } else {
                let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
                (ss / (k - 1) as f64).sqrt()
            };
            let (ci_lo, ci_hi) = if k == 0 {
                (f64::NAN, f64::NAN)
            } else {
                let mut means = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
                for _ in 0..BOOTSTRAP_RESAMPLES {
                    let mut s = 0.0;
                    for _ in 0..k {
                        s += values[boot_rng.random_range(0..k)];
                    }
                    means.push(s / k as f64);
                }
                means.sort_by(f64::total_cmp);
                (quantile(&means, 0.025), quantile(&means, 0.975))
            };
            w.write_record([
                plan.label.clone(),
                estimator.clone(),
                param.clone(),
                mean.to_string(),
                sd.to_string(),
                ci_lo.to_string(),
                ci_hi.to_string(),
                k.to_string(),
                n_failed.to_string(),
            ])?;
        }
    }
    w.flush()?;

    let all_failed = per_rep
        .iter()
        .all(|rows| rows.iter().all(|row| row.status != "ok"));
    if all_failed {
        return Err(CliError::AllFailed);
    }
    let failed_reps = per_rep
        .iter()
        .filter(|rows| rows.iter().all(|row| row.status != "ok"))
        .count();
    eprintln!(
        "maxvi: sweep finished, {} replications ({} fully failed), {} estimators",
        sweep.replications,
        failed_reps,
        estimators.len()
    );
    Ok(())
}
