use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use robustrl::cli::{
    cmd_compare, cmd_eval, cmd_grid, cmd_llc, cmd_train, effective_workers, RunConfig,
};

#[derive(Parser)]
#[command(name = "robustrl", version, about = "Robust PPO training and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory. Defaults to `output.dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed overriding the config's seed for this command.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; capped by ROBUSTRL_THREADS.
    #[arg(long)]
    workers: Option<usize>,
    /// Use the final PGD iterate instead of the best one.
    #[arg(long)]
    strict_alg1: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train one policy per configured seed.
    Train(Common),
    /// Evaluate checkpoints over the perturbation grid.
    Grid {
        #[command(flatten)]
        common: Common,
        /// Checkpoint files or training run directories.
        #[arg(required = true)]
        checkpoints: Vec<PathBuf>,
    },
    /// Nominal episodes with smoothness metrics.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Overrides `eval.n_episodes`.
        #[arg(long)]
        episodes: Option<usize>,
        checkpoint: PathBuf,
    },
    /// Local Lipschitz constants of actor and critic networks.
    Llc {
        #[command(flatten)]
        common: Common,
        #[arg(required = true)]
        checkpoints: Vec<PathBuf>,
    },
    /// Tabulate ρ-robustness across grid report directories.
    Compare {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
}

fn load(common: &Common) -> robustrl::Result<RunConfig> {
    let mut config = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if common.strict_alg1 {
        config.algorithm.strict_alg1 = true;
    }
    config.validate()?;
    Ok(config)
}

fn out_dir(common: &Common, config: &RunConfig, sub: &str) -> PathBuf {
    common.out.clone().unwrap_or_else(|| {
        let base = Path::new(&config.output.dir);
        if sub.is_empty() {
            base.to_path_buf()
        } else {
            base.join(sub)
        }
    })
}

fn run(cli: Cli) -> robustrl::Result<()> {
    match cli.command {
        Command::Train(common) => {
            let mut config = load(&common)?;
            if let Some(s) = common.seed {
                config.output.seeds = vec![s];
            }
            let out = out_dir(&common, &config, "");
            for dir in cmd_train(&config, &out, effective_workers(common.workers))? {
                println!("{}", dir.display());
            }
        }
        Command::Grid { common, checkpoints } => {
            let mut config = load(&common)?;
            if let Some(s) = common.seed {
                config.grid.seed = s;
            }
            let out = out_dir(&common, &config, "grid");
            let report = cmd_grid(&config, &checkpoints, &out, effective_workers(common.workers))?;
            for (rho, v) in report.rho_robustness.iter().enumerate() {
                println!("rho={rho} {v}");
            }
        }
        Command::Eval { common, episodes, checkpoint } => {
            let mut config = load(&common)?;
            if let Some(s) = common.seed {
                config.eval.seed = s;
            }
            if let Some(n) = episodes {
                config.eval.n_episodes = n;
                config.validate()?;
            }
            let out = out_dir(&common, &config, "eval");
            let s = cmd_eval(&config, &checkpoint, &out)?;
            println!(
                "return {:.3} ± {:.3}  AS {:.5}  SFR {:.5}",
                s.mean_return, s.std_return, s.mean_action_smoothness, s.mean_second_order_fluctuation
            );
        }
        Command::Llc { common, checkpoints } => {
            let mut config = load(&common)?;
            if let Some(s) = common.seed {
                config.llc.seed = s;
            }
            let out = out_dir(&common, &config, "llc");
            for (ck, e) in cmd_llc(&config, &checkpoints, &out, effective_workers(common.workers))? {
                println!("{ck} {} {}", e.network.name(), e.estimate);
            }
        }
        Command::Compare { out, reports } => {
            let out = out.unwrap_or_else(|| PathBuf::from("."));
            let (_, table) = cmd_compare(&reports, &out)?;
            print!("{table}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
