use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use rtfqi::dynamics::generate_transitions;
use rtfqi::dynamics::io::{read_transitions, write_transitions};
use rtfqi::harness::{
    parse_config, run_experiment_detailed, to_config_text, train_experiment, train_on_transitions,
    write_metrics, write_trajectory, EvalReport, ExperimentConfig, PolicyBundle, RampVariant,
    Scale,
};
use rtfqi::tracking::write_phase_diagnostics;

#[derive(Parser)]
#[command(
    name = "rtfqi",
    version,
    about = "Periodic reference tracking with Fitted Q Iteration"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Log random-action trajectories and write transitions.csv.
    Generate(Common),
    /// Train a tracking policy and write policy.json.
    Train {
        #[command(flatten)]
        common: Common,
        /// Train on this transitions CSV instead of generating one.
        #[arg(long)]
        transitions: Option<PathBuf>,
    },
    /// Roll out a trained policy and write trajectory.csv and metrics.csv.
    Evaluate {
        /// policy.json written by `train`.
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run an end-to-end experiment recipe.
    Experiment {
        recipe: Recipe,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Recipe {
    /// One sinusoid on protein 2 at periods 50, 150 and 250.
    Fig3,
    /// Two lagged sinusoids on proteins 1 and 2.
    Fig4,
    /// Two ramps, with a long and a short low stretch.
    Fig5,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Paper,
    Desk,
}

#[derive(Args, Clone)]
struct Common {
    /// key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "paper")]
    scale: ScaleArg,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    period: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    trajectories: Option<usize>,
    #[arg(long = "traj-len")]
    traj_len: Option<usize>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
    alpha: Option<u8>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Common {
    fn scale(&self) -> Scale {
        match self.scale {
            ScaleArg::Paper => Scale::Paper,
            ScaleArg::Desk => Scale::Desk,
        }
    }

    /// Applies the config file, then the individual flags, to `base`.
    fn apply(&self, base: ExperimentConfig) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                parse_config(&text, base)?
            }
            None => base,
        };
        if let Some(period) = self.period {
            let old = cfg.reference.period;
            cfg.reference.period = period;
            if cfg.transient_cutoff == 2 * old {
                cfg.transient_cutoff = 2 * period;
                cfg.horizon = cfg.transient_cutoff + (4 * period).max(400);
            }
        }
        if let Some(k) = self.iterations {
            cfg.fqi.iteration_cap = k;
        }
        if let Some(n) = self.trajectories {
            cfg.sim.trajectory_count = n;
        }
        if let Some(n) = self.traj_len {
            cfg.sim.max_trajectory_length = n;
        }
        if let Some(a) = self.alpha {
            cfg.alpha = a;
        }
        if let Some(seed) = self.seed {
            cfg = cfg.with_seed(seed);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_report(dir: &Path, report: &EvalReport, cfg: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_trajectory(create(&dir.join("trajectory.csv"))?, report)?;
    write_metrics(
        create(&dir.join("metrics.csv"))?,
        report,
        &[
            ("period", cfg.reference.period as f64),
            ("seed", cfg.seed as f64),
        ],
    )?;
    for e in &report.rms_error {
        println!(
            "{}: rms_error_p{} = {:.4}",
            dir.display(),
            e.gene + 1,
            e.rms
        );
    }
    Ok(())
}

fn run_recipe(dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    let started = Instant::now();
    let outcome = run_experiment_detailed(cfg)?;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.txt"), to_config_text(cfg))?;
    write_phase_diagnostics(create(&dir.join("diagnostics.csv"))?, &outcome.diagnostics)?;
    write_report(dir, &outcome.report, cfg)?;
    log::info!(
        "{} finished in {:.1} s",
        dir.display(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();

    match cli.command {
        Command::Generate(common) => {
            let cfg = common.apply(ExperimentConfig::fig3(150, common.scale()))?;
            let transitions = generate_transitions(&cfg.sim, &cfg.params)?;
            fs::create_dir_all(&common.out)?;
            let path = common.out.join("transitions.csv");
            write_transitions(create(&path)?, &transitions)?;
            println!(
                "wrote {} transitions to {}",
                transitions.len(),
                path.display()
            );
        }
        Command::Train {
            common,
            transitions,
        } => {
            let cfg = common.apply(ExperimentConfig::fig3(150, common.scale()))?;
            let (bundle, diagnostics) = match transitions {
                Some(path) => {
                    let f = read_transitions(
                        File::open(&path).with_context(|| format!("opening {}", path.display()))?,
                    )?;
                    train_on_transitions(&cfg, &f)?
                }
                None => {
                    let (bundle, diagnostics, _) = train_experiment(&cfg)?;
                    (bundle, diagnostics)
                }
            };
            fs::create_dir_all(&common.out)?;
            fs::write(common.out.join("policy.json"), bundle.to_json()?)?;
            write_phase_diagnostics(create(&common.out.join("diagnostics.csv"))?, &diagnostics)?;
            println!("wrote {}", common.out.join("policy.json").display());
        }
        Command::Evaluate { policy, out } => {
            let text = fs::read_to_string(&policy)
                .with_context(|| format!("reading {}", policy.display()))?;
            let bundle = PolicyBundle::from_json(&text)?;
            let report = bundle.evaluate()?;
            write_report(&out, &report, &bundle.config)?;
        }
        Command::Experiment { recipe, common } => {
            let scale = common.scale();
            let runs: Vec<(String, ExperimentConfig)> = match recipe {
                Recipe::Fig3 => {
                    let periods = match common.period {
                        Some(p) => vec![p],
                        None => vec![50, 150, 250],
                    };
                    periods
                        .into_iter()
                        .map(|p| (format!("fig3_T{p}"), ExperimentConfig::fig3(p, scale)))
                        .collect()
                }
                Recipe::Fig4 => vec![("fig4".into(), ExperimentConfig::fig4(scale))],
                Recipe::Fig5 => vec![
                    (
                        "fig5_long_low".into(),
                        ExperimentConfig::fig5(RampVariant::LongLow, scale),
                    ),
                    (
                        "fig5_short_low".into(),
                        ExperimentConfig::fig5(RampVariant::ShortLow, scale),
                    ),
                ],
            };
            if runs.is_empty() {
                bail!("no runs selected");
            }
            for (name, base) in runs {
                let mut flags = common.clone();
                if matches!(recipe, Recipe::Fig3) {
                    flags.period = None;
                }
                let cfg = flags.apply(base)?;
                run_recipe(&common.out.join(name), &cfg)?;
            }
        }
    }
    Ok(())
}
