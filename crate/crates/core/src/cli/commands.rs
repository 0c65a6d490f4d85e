//! The `train`, `grid`, `eval`, `llc` and `compare` commands.
//!
//! Each command reads a validated [`RunConfig`], writes its artifacts
//! atomically under an output directory and embeds the config hash and the
//! library version in a JSON metadata file next to them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::eval::{
    collect_states, estimate_llc, evaluate_episodes, export_heatmap, llc_csv, load_report,
    run_grid, smoothness_csv, to_json_bytes, LlcEstimate, NetworkTag, ReportMeta,
    RobustnessReport, LLC_CSV, SMOOTHNESS_CSV,
};
use crate::io::{write_atomic, LIBRARY_VERSION};
use crate::ppo::{train_with, PolicyCheckpoint, TrainOptions};

use super::config::RunConfig;

pub const THREADS_ENV: &str = "ROBUSTRL_THREADS";
pub const RUN_META: &str = "run.json";
pub const EVAL_JSON: &str = "eval.json";
pub const LLC_META: &str = "llc.meta.json";
pub const COMPARE_CSV: &str = "compare.csv";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";
pub const TRAIN_LOG: &str = "log.csv";

/// Worker count: the request (or the number of cores), capped by
/// `ROBUSTRL_THREADS` when that is set to a positive integer.
pub fn effective_workers(requested: Option<usize>) -> usize {
    let cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    let want = requested
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    cap.map_or(want, |c| want.min(c))
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?
        .install(f)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed-{seed}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub config_hash: String,
    pub library_version: String,
    pub config: RunConfig,
}

/// Trains one run per seed in `output.seeds`, each under `out/seed-<s>/`
/// with `log.csv`, periodic checkpoints and `final.ckpt`. Returns the run
/// directories. A diverged run stops the command; the files written so
/// far, including `last_good.ckpt`, are kept.
pub fn cmd_train(config: &RunConfig, out: &Path, workers: usize) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let env = config.env.build()?;
    create_dir(out)?;
    let hash = config.hash();
    let meta = RunMeta {
        config_hash: hash.clone(),
        library_version: LIBRARY_VERSION.to_string(),
        config: config.clone(),
    };
    write_atomic(&out.join(RUN_META), &to_json_bytes(&meta))?;
    let mut dirs = Vec::new();
    for &seed in &config.output.seeds {
        let dir = seed_dir(out, seed);
        create_dir(&dir)?;
        let options = TrainOptions {
            workers,
            checkpoint_dir: Some(dir.clone()),
            log_path: Some(dir.join(TRAIN_LOG)),
            variant: Some(config.algorithm.variant),
            config_hash: Some(hash.clone()),
        };
        train_with(&env, &config.train_config(seed), &options)?;
        dirs.push(dir);
    }
    Ok(dirs)
}

/// Expands run directories into their per-seed final checkpoints, in seed
/// directory order; plain files are kept as given.
pub fn resolve_checkpoints(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<(u64, PathBuf)> = std::fs::read_dir(p)
                .map_err(|e| Error::io(p, e))?
                .filter_map(|e| e.ok())
                .filter_map(|e| {
                    let name = e.file_name().into_string().ok()?;
                    let seed = name.strip_prefix("seed-")?.parse().ok()?;
                    let ck = e.path().join(FINAL_CHECKPOINT);
                    ck.is_file().then_some((seed, ck))
                })
                .collect();
            if found.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "{} holds no seed-*/{FINAL_CHECKPOINT}",
                    p.display()
                )));
            }
            found.sort();
            out.extend(found.into_iter().map(|(_, ck)| ck));
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidInput("no checkpoints given".into()));
    }
    Ok(out)
}

fn load_all(paths: &[PathBuf]) -> Result<Vec<PolicyCheckpoint>> {
    resolve_checkpoints(paths)?
        .iter()
        .map(|p| PolicyCheckpoint::load(p))
        .collect()
}

fn display_paths(paths: &[PathBuf]) -> Result<Vec<String>> {
    Ok(resolve_checkpoints(paths)?
        .iter()
        .map(|p| p.display().to_string())
        .collect())
}

/// Sweeps the `[grid]` over the pooled checkpoints and writes `grid.csv`,
/// `grid.meta.json` and `rho.csv`. Nothing is written unless every
/// checkpoint loads.
pub fn cmd_grid(config: &RunConfig, checkpoints: &[PathBuf], out: &Path, workers: usize) -> Result<RobustnessReport> {
    config.validate()?;
    let cks = load_all(checkpoints)?;
    let agents: Vec<_> = cks.iter().map(PolicyCheckpoint::agent).collect();
    let mut report = with_pool(workers, || {
        run_grid(&agents, &config.grid.grid(), config.grid.seed)
    })?;
    report.meta = ReportMeta {
        env: agents[0].env.name().to_string(),
        variants: cks
            .iter()
            .map(|c| c.variant.map_or_else(|| c.solver.name().to_string(), |v| v.to_string()))
            .collect(),
        epsilons: cks.iter().map(|c| c.epsilon).collect(),
        lambdas: cks.iter().map(|c| c.lambda_lips).collect(),
        policy_seeds: cks.iter().map(|c| c.seed).collect(),
        checkpoints: display_paths(checkpoints)?,
        config_hash: Some(config.hash()),
        library_version: LIBRARY_VERSION.to_string(),
    };
    export_heatmap(&report, out)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub checkpoint: String,
    pub env: String,
    pub n_episodes: usize,
    pub seed: u64,
    pub mean_return: f64,
    pub std_return: f64,
    pub min_return: f64,
    pub max_return: f64,
    pub mean_action_smoothness: f64,
    pub mean_second_order_fluctuation: f64,
    pub mean_tracking_error: Option<f64>,
    pub diverged_episodes: usize,
    pub config_hash: String,
    pub library_version: String,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Runs `[eval] n_episodes` nominal episodes with the mean action and
/// writes `smoothness.csv` and `eval.json`.
pub fn cmd_eval(config: &RunConfig, checkpoint: &Path, out: &Path) -> Result<EvalSummary> {
    config.validate()?;
    let ck = PolicyCheckpoint::load(checkpoint)?;
    let agent = ck.agent();
    let episodes = evaluate_episodes(&agent, config.eval.n_episodes, config.eval.seed)?;
    let with_tracking = agent.env.tracking_error(&agent.env.reset(0)).is_some();
    let returns: Vec<f64> = episodes.iter().map(|e| e.total_reward).collect();
    let m = mean(returns.iter().copied());
    let smooth: Vec<_> = episodes.iter().filter_map(|e| e.smoothness).collect();
    let summary = EvalSummary {
        checkpoint: checkpoint.display().to_string(),
        env: agent.env.name().to_string(),
        n_episodes: episodes.len(),
        seed: config.eval.seed,
        mean_return: m,
        std_return: mean(returns.iter().map(|r| (r - m) * (r - m))).sqrt(),
        min_return: returns.iter().copied().fold(f64::INFINITY, f64::min),
        max_return: returns.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean_action_smoothness: mean(smooth.iter().map(|s| s.action_smoothness)),
        mean_second_order_fluctuation: mean(smooth.iter().map(|s| s.second_order_fluctuation)),
        mean_tracking_error: with_tracking
            .then(|| mean(smooth.iter().filter_map(|s| s.tracking_error))),
        diverged_episodes: episodes.iter().filter(|e| e.diverged).count(),
        config_hash: config.hash(),
        library_version: LIBRARY_VERSION.to_string(),
    };
    create_dir(out)?;
    write_atomic(&out.join(SMOOTHNESS_CSV), &smoothness_csv(&episodes, with_tracking))?;
    write_atomic(&out.join(EVAL_JSON), &to_json_bytes(&summary))?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlcMeta {
    pub epsilon_probe: f64,
    pub n_states: usize,
    pub n_probes: usize,
    pub seed: u64,
    pub checkpoints: Vec<String>,
    pub config_hash: String,
    pub library_version: String,
}

/// Estimates the local Lipschitz constants of every checkpoint's networks
/// on one shared set of states, visited by the first checkpoint's policy.
/// Writes `llc.csv` with one row per checkpoint and network.
pub fn cmd_llc(config: &RunConfig, checkpoints: &[PathBuf], out: &Path, workers: usize) -> Result<Vec<(String, LlcEstimate)>> {
    config.validate()?;
    let c = &config.llc;
    let cks = load_all(checkpoints)?;
    let names = display_paths(checkpoints)?;
    let states = collect_states(&cks[0].agent(), c.n_states, c.seed)?;
    let jobs: Vec<(usize, NetworkTag)> = (0..cks.len())
        .flat_map(|k| c.networks.iter().map(move |&t| (k, t)))
        .collect();
    let rows = with_pool(workers, || {
        use rayon::prelude::*;
        jobs.par_iter()
            .map(|&(k, tag)| {
                let agent = cks[k].agent();
                let inputs: Vec<Vec<f64>> = states.iter().map(|s| agent.network_obs(s)).collect();
                let net = match tag {
                    NetworkTag::Actor => &agent.policy.mean_net,
                    NetworkTag::Critic => &agent.critic,
                };
                let est = estimate_llc(net, tag, &inputs, c.epsilon_probe, c.n_probes, c.seed)?;
                Ok((names[k].clone(), est))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let meta = LlcMeta {
        epsilon_probe: c.epsilon_probe,
        n_states: c.n_states,
        n_probes: c.n_probes,
        seed: c.seed,
        checkpoints: names,
        config_hash: config.hash(),
        library_version: LIBRARY_VERSION.to_string(),
    };
    create_dir(out)?;
    write_atomic(&out.join(LLC_CSV), &llc_csv(&rows))?;
    write_atomic(&out.join(LLC_META), &to_json_bytes(&meta))?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub run: String,
    pub label: String,
    pub rho_robustness: Vec<f64>,
}

fn run_label(meta: &ReportMeta) -> String {
    let mut variants = meta.variants.clone();
    variants.dedup();
    let mut label = variants.join("+");
    if let (Some(e), true) = (meta.epsilons.first(), meta.epsilons.iter().any(|&e| e > 0.0)) {
        label.push_str(&format!(" eps={e}"));
    }
    if let (Some(l), true) = (meta.lambdas.first(), meta.lambdas.iter().any(|&l| l > 0.0)) {
        label.push_str(&format!(" lambda={l}"));
    }
    label
}

/// Tabulates ρ-robustness of several grid reports, one row per report and
/// one column per radius, and writes `compare.csv`. Returns the rows and a
/// text table in which the best value of each column is starred.
pub fn cmd_compare(report_dirs: &[PathBuf], out: &Path) -> Result<(Vec<CompareRow>, String)> {
    if report_dirs.is_empty() {
        return Err(Error::InvalidInput("no report directories given".into()));
    }
    let reports: Vec<RobustnessReport> = report_dirs.iter().map(|d| load_report(d)).collect::<Result<_>>()?;
    let radii = reports[0].rho_robustness.len();
    if let Some(r) = reports.iter().find(|r| r.rho_robustness.len() != radii) {
        return Err(Error::InvalidInput(format!(
            "reports disagree on grid size ({} vs {} radii)",
            radii,
            r.rho_robustness.len()
        )));
    }
    let rows: Vec<CompareRow> = report_dirs
        .iter()
        .zip(&reports)
        .map(|(d, r)| CompareRow {
            run: d.display().to_string(),
            label: run_label(&r.meta),
            rho_robustness: r.rho_robustness.clone(),
        })
        .collect();

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["run".to_string(), "label".to_string()];
    header.extend((0..radii).map(|r| format!("rho_{r}")));
    w.write_record(&header).expect("in-memory csv write");
    for row in &rows {
        let mut rec = vec![row.run.clone(), row.label.clone()];
        rec.extend(row.rho_robustness.iter().map(f64::to_string));
        w.write_record(&rec).expect("in-memory csv write");
    }
    create_dir(out)?;
    write_atomic(&out.join(COMPARE_CSV), &w.into_inner().expect("in-memory csv flush"))?;

    let best: Vec<f64> = (0..radii)
        .map(|r| rows.iter().map(|x| x.rho_robustness[r]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let width = rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(9);
    let mut table = format!("{:width$}", "algorithm");
    for r in 0..radii {
        table.push_str(&format!(" {:>10}", format!("rho={r}")));
    }
    table.push('\n');
    for row in &rows {
        table.push_str(&format!("{:width$}", row.label));
        for (r, v) in row.rho_robustness.iter().enumerate() {
            let mark = if *v == best[r] { "*" } else { " " };
            table.push_str(&format!(" {:>9.1}{mark}", v));
        }
        table.push('\n');
    }
    Ok((rows, table))
}
