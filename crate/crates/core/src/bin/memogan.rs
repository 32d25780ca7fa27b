use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use memogan::adversary::{
    bigan_objective, train_discriminator, write_trace, Discriminator, GeneratorPairs, NoisedPairs,
};
use memogan::generator::{build_generator, MemorizingGenerator, SeedToImage};
use memogan::harness::{
    run_birthday_report, run_collapse_experiment, run_concentration_experiment, run_finite_sample_experiment,
    ExperimentConfig, Report,
};
use memogan::partition::{compute_thresholds, BlockPartition};
use memogan::relu::compile_generator;
use memogan::rng::stream;

#[derive(Parser)]
#[command(name = "memogan", version, about = "Memorizing generators that fool bounded discriminators")]
struct Cli {
    /// Overrides the master seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Experiment {
    Collapse,
    Concentration,
    FiniteSample,
    Birthday,
}

#[derive(Subcommand)]
enum Command {
    /// Half-normal equal-mass thresholds.
    Thresholds {
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
    },
    /// Memorize images and save the generator.
    BuildGen {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Cells per coordinate (default: first entry of k_grid).
        #[arg(long)]
        k: Option<usize>,
    },
    /// Compile a saved generator into a ReLU network.
    Compile {
        #[arg(long)]
        gen: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Estimate the objective of a saved discriminator against a generator.
    EvalObjective {
        #[arg(long)]
        gen: PathBuf,
        #[arg(long)]
        disc: PathBuf,
        #[arg(long, default_value_t = 20_000)]
        n: usize,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train a discriminator against a saved generator.
    TrainDisc {
        #[arg(long)]
        gen: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run an experiment and write its report.
    Experiment {
        #[arg(value_enum)]
        kind: Experiment,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    Ok(cfg)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row)?;
    }
    Ok(String::from_utf8(writer.into_inner()?)?)
}

fn write_report<R: Report>(report: &R, out: Option<&Path>, format: Format) -> Result<()> {
    match format {
        Format::Json => {
            emit(out, &report.to_json()?)?;
            if let Some(p) = out {
                let table = p.with_extension("csv");
                report.write_csv(fs::File::create(&table)?)?;
            }
        }
        Format::Csv => {
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            emit(out, std::str::from_utf8(&buf)?)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ThresholdRow {
    i: usize,
    tau: f64,
}

#[derive(Serialize)]
struct ThresholdsOut {
    k: usize,
    sigma: f64,
    thresholds: Vec<f64>,
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Thresholds { k, sigma } => {
            let thresholds = compute_thresholds(k, sigma)?;
            let text = match cli.format {
                Format::Json => to_json(&ThresholdsOut { k, sigma, thresholds })?,
                Format::Csv => to_csv(
                    &thresholds
                        .iter()
                        .enumerate()
                        .map(|(i, &tau)| ThresholdRow { i: i + 1, tau })
                        .collect::<Vec<_>>(),
                )?,
            };
            emit(None, &text)
        }
        Command::BuildGen { config, out, k } => {
            let cfg = load_config(config.as_deref(), cli.seed)?;
            let k = k.unwrap_or(cfg.k_grid[0]);
            let spec = cfg.spec;
            let part = BlockPartition::new(k, spec.d_tilde(), spec.sigma())?;
            let mut images = cfg.images.sampler(&spec)?;
            let mut rng = stream(cfg.master_seed, "cli.build-gen", k as u64);
            let gen = build_generator(&mut rng, part, &mut images, &spec)?;
            gen.save(&out)?;
            eprintln!("memorized {} images into {}", gen.m(), out.display());
            Ok(())
        }
        Command::Compile { gen, delta, out, report } => {
            let gen = MemorizingGenerator::load(&gen)?;
            let (net, rep) = compile_generator(&gen, delta)?;
            fs::write(&out, net.to_json()?)?;
            let text = to_json(&rep)?;
            emit(report.as_deref(), &text)
        }
        Command::EvalObjective { gen, disc, n, config } => {
            let cfg = load_config(config.as_deref(), None)?;
            let gen = MemorizingGenerator::load(&gen)?;
            let d = Discriminator::from_json(&fs::read_to_string(&disc)?)?;
            let spec = *gen.spec();
            let mut real = NoisedPairs::new(cfg.images.sampler(&spec)?, spec)?;
            let mut fake = GeneratorPairs::new(&gen);
            let mut rng = stream(cli.seed.unwrap_or(cfg.master_seed), "cli.eval-objective", 0);
            let est = bigan_objective(&d, &mut real, &mut fake, n, n, &mut rng, &cfg.measuring)?;
            let text = match cli.format {
                Format::Json => to_json(&est)?,
                Format::Csv => to_csv(&[est])?,
            };
            emit(None, &text)
        }
        Command::TrainDisc { gen, config, out, trace } => {
            let cfg = load_config(config.as_deref(), cli.seed)?;
            let gen = MemorizingGenerator::load(&gen)?;
            let spec = *gen.spec();
            let real = NoisedPairs::new(cfg.images.sampler(&spec)?, spec)?;
            let fake = GeneratorPairs::new(&gen);
            let outcome = train_discriminator(
                cfg.master_seed,
                &cfg.layer_sizes(&spec),
                &real,
                &fake,
                &cfg.train,
                &cfg.measuring,
            )?;
            fs::write(&out, outcome.best.to_json()?)?;
            if let Some(t) = trace {
                write_trace(&outcome.trace, fs::File::create(&t)?)?;
            }
            let text = match cli.format {
                Format::Json => to_json(&outcome.runs)?,
                Format::Csv => to_csv(
                    &outcome
                        .runs
                        .iter()
                        .map(|r| (r.restart, r.sign, r.selection.gap, r.selection.std_err))
                        .collect::<Vec<_>>(),
                )?,
            };
            emit(None, &text)
        }
        Command::Experiment { kind, config, out } => {
            let cfg = load_config(config.as_deref(), cli.seed)?;
            let out = out.as_deref();
            match kind {
                Experiment::Collapse => {
                    let report = run_collapse_experiment(&cfg)?;
                    for e in &report.errors {
                        eprintln!("cell k={} failed: {}", e.k, e.message);
                    }
                    write_report(&report, out, cli.format)
                }
                Experiment::Concentration => write_report(&run_concentration_experiment(&cfg)?, out, cli.format),
                Experiment::FiniteSample => write_report(&run_finite_sample_experiment(&cfg)?, out, cli.format),
                Experiment::Birthday => write_report(&run_birthday_report(&cfg)?, out, cli.format),
            }
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

