use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use qgasvm::harness::experiment::{write_synthetic, DataSource, ExperimentConfig, FitnessKind};
use qgasvm::harness::io::{load_dataset, load_features, write_features};
use qgasvm::harness::split::to_samples;
use qgasvm::harness::{render_text, run_experiment, ExperimentReport, SynthSpec};
use qgasvm::tuning::{grid_search, qga_tune, TuningMethod, TuningResult};

#[derive(Parser)]
#[command(name = "qgasvm", version, about = "Skeleton action recognition with a QGA-tuned SVM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract joint-angle variance features from a capture and its annotations.
    Extract {
        #[arg(long)]
        capture: PathBuf,
        #[arg(long)]
        annotation: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a synthetic two-class capture with annotations.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Tune (C, sigma) on a feature file.
    Tune {
        #[arg(long)]
        features: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a full experiment.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Re-render a stored report.
    Report {
        /// A report.toml file or a directory containing one.
        path: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Clone, Default)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    fitness: Option<FitnessArg>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    population: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy)]
enum MethodArg {
    Grid,
    Qga,
    Both,
}

#[derive(ValueEnum, Clone, Copy)]
enum FitnessArg {
    Cv,
    Holdout,
    Train,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(method) = self.method {
            config.methods = match method {
                MethodArg::Grid => vec![TuningMethod::Grid],
                MethodArg::Qga => vec![TuningMethod::Qga],
                MethodArg::Both => vec![TuningMethod::Grid, TuningMethod::Qga],
            };
        }
        if let Some(out) = &self.out {
            config.output_dir = Some(out.clone());
        }
        if let Some(fitness) = self.fitness {
            config.protocol.fitness = match fitness {
                FitnessArg::Cv => FitnessKind::Cv,
                FitnessArg::Holdout => FitnessKind::Holdout,
                FitnessArg::Train => FitnessKind::Train,
            };
        }
        if let Some(g) = self.generations {
            config.qga.max_generations = g;
        }
        if let Some(p) = self.population {
            config.qga.population_size = p;
        }
        Ok(config)
    }

    fn out_dir(&self) -> Result<&Path> {
        self.out.as_deref().context("--out <dir> is required")
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn print_tuning(result: &TuningResult) {
    println!(
        "{:<5} C = {:<10.6} sigma = {:<10.6} fitness = {:.4} ({} evaluations, {:.2}s)",
        result.method.to_string(),
        result.best_c,
        result.best_sigma,
        result.fitness,
        result.trace.len(),
        result.wall_time_secs
    );
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Extract {
            capture,
            annotation,
            common,
        } => {
            let features = load_dataset(&capture, &annotation)?;
            let out = common.out_dir()?;
            create_dir(out)?;
            let path = out.join("features.txt");
            std::fs::write(&path, write_features(&features)?).with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {} feature vectors to {}", features.len(), path.display());
        }
        Command::Synth { common } => {
            let config = common.config()?;
            let spec = match &config.data {
                DataSource::Synthetic(spec) => spec.clone(),
                _ => SynthSpec::default(),
            };
            let out = common.out_dir()?;
            create_dir(out)?;
            let n = write_synthetic(&spec, config.seed, &out.join("capture.txt"), &out.join("annotation.txt"))?;
            println!("wrote {n} annotated windows to {}", out.display());
        }
        Command::Tune { features, common } => {
            let config = common.config()?;
            config.validate()?;
            let samples = to_samples(&load_features(&features)?)?;
            let protocol = config.protocol();
            for method in &config.methods {
                let result = match method {
                    TuningMethod::Grid => grid_search(&samples, &config.grid, &protocol)?,
                    TuningMethod::Qga => qga_tune(
                        &samples,
                        &config.search_space()?,
                        &protocol,
                        &config.qga_config(config.seed),
                    )?,
                };
                print_tuning(&result);
                if let Some(out) = &common.out {
                    create_dir(out)?;
                    let path = out.join(format!("{method}_trace.txt"));
                    std::fs::write(&path, result.trace_text())
                        .with_context(|| format!("writing {}", path.display()))?;
                }
            }
        }
        Command::Run { common } => {
            let config = common.config()?;
            let report = run_experiment(&config)?;
            print!("{}", render_text(&report));
            for result in &report.tuning {
                print_tuning(result);
            }
        }
        Command::Report { path, common } => {
            let path = match path.or(common.out) {
                Some(p) if p.is_dir() => p.join("report.toml"),
                Some(p) => p,
                None => bail!("give a report path or --out <dir>"),
            };
            let report = ExperimentReport::load(&path)?;
            print!("{}", render_text(&report));
        }
    }
    Ok(())
}
