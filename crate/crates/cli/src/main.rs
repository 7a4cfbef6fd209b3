//! `geodisambig`: geocode, disambiguate, evaluate and synthesize patent
//! name corpora.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use geodisambig::corpus::{load_entity_map, load_mentions, Role, TableFormat};
use geodisambig::evaluation::{evaluate, load_benchmark};
use geodisambig::pipeline::{geocode_mentions, run, trial_mentions, PipelineConfig, ENTITY_MAP_FILE};
use geodisambig::synth::{generate_synthetic, NoiseParams, SynthParams};
use geodisambig::textnorm::Normalizer;
use geodisambig::Error;

#[derive(Parser)]
#[command(name = "geodisambig", version, about = "Geolocation-blocked patent name disambiguation")]
struct Cli {
    /// Flat key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    high_res_threshold: Option<u8>,
    #[arg(long)]
    link_radius_km: Option<f64>,
    /// Worker threads; output does not depend on this.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Geocode cache file.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Offline geocoder answers: `address  lat  lon  code`.
    #[arg(long)]
    fixture: Option<PathBuf>,
    /// Write intermediate dumps next to the entity map.
    #[arg(long)]
    debug: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Fill the geocode cache for every mention address.
    Geocode {
        #[arg(long)]
        mentions: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run all stages and write the entity map.
    Disambiguate {
        #[arg(long)]
        mentions: PathBuf,
        #[arg(long)]
        contexts: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// One ID per distinct raw name, no matching.
        #[arg(long)]
        baseline: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Score an entity map against a benchmark.
    Evaluate {
        /// Entity map file, or a directory holding `entity_map.tsv`.
        #[arg(long)]
        entity_map: PathBuf,
        #[arg(long)]
        mentions: PathBuf,
        #[arg(long)]
        benchmark: PathBuf,
        #[arg(long, value_enum, default_value_t = RoleArg::Both)]
        role: RoleArg,
        /// Keep only patents whose matched entities are all high-resolution.
        #[arg(long)]
        high_res_only: bool,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic corpus with ground truth.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        entities: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Generate without any noise.
        #[arg(long)]
        clean: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RoleArg {
    Inventor,
    Assignee,
    Both,
}

impl RoleArg {
    fn roles(self) -> Vec<Role> {
        match self {
            RoleArg::Inventor => vec![Role::Inventor],
            RoleArg::Assignee => vec![Role::Assignee],
            RoleArg::Both => Role::ALL.to_vec(),
        }
    }
}

fn load_config(path: Option<&Path>, o: &Overrides) -> anyhow::Result<PipelineConfig> {
    let mut config = match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(v) = o.high_res_threshold {
        config.high_res_threshold = v;
    }
    if let Some(v) = o.link_radius_km {
        config.link_radius_km = v;
    }
    if let Some(v) = o.jobs {
        config.jobs = v;
    }
    if let Some(v) = o.seed {
        config.seed = v;
    }
    if let Some(v) = &o.cache {
        config.cache_path = Some(v.clone());
    }
    if let Some(v) = &o.fixture {
        config.geocode_fixture = Some(v.clone());
    }
    config.debug |= o.debug;
    config.validate()?;
    Ok(config)
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let config_path = cli.config.as_deref();
    match cli.command {
        Command::Geocode { mentions, overrides } => {
            let config = load_config(config_path, &overrides)?;
            let load = load_mentions(&mentions, TableFormat::for_path(&mentions))?;
            let (_, s) = geocode_mentions(&load.mentions, &config)?;
            println!(
                "addresses {}  located {}  not found {}  failed {}  uncached {}",
                s.addresses, s.located, s.not_found, s.failed, s.uncached
            );
        }
        Command::Disambiguate {
            mentions,
            contexts,
            out,
            baseline,
            overrides,
        } => {
            let config = load_config(config_path, &overrides)?;
            let report = run(&config, &mentions, contexts.as_deref(), &out, baseline)?;
            println!(
                "{} mentions read, {} skipped ({} empty names, {} bad rows)",
                report.load.mentions.len(),
                report.load.skipped(),
                report.load.skipped_empty_name,
                report.load.errors.len()
            );
            if report.resumed {
                println!("inputs unchanged, kept outputs in {}", out.display());
            } else if let Some(summary) = &report.summary {
                print!("{}", summary.render());
            }
            println!("entity map: {}", out.join(ENTITY_MAP_FILE).display());
        }
        Command::Evaluate {
            entity_map,
            mentions,
            benchmark,
            role,
            high_res_only,
            out,
        } => {
            let map_path = if entity_map.is_dir() {
                entity_map.join(ENTITY_MAP_FILE)
            } else {
                entity_map
            };
            let rows = load_entity_map(&map_path)?;
            let load = load_mentions(&mentions, TableFormat::for_path(&mentions))?;
            let trial = trial_mentions(&load.mentions, &rows)?;
            let bench = load_benchmark(&benchmark)?;
            let config = load_config(config_path, &Overrides::default())?;
            let normalizer = Normalizer::from_files(
                config.assignee_stoplist.as_deref(),
                config.inventor_stoplist.as_deref(),
            )?;
            let mut text = String::new();
            for r in role.roles() {
                let report = evaluate(&trial, &bench, r, &normalizer, high_res_only)?;
                text.push_str(&report.render());
                text.push('\n');
            }
            print!("{text}");
            if let Some(path) = out {
                std::fs::write(&path, &text).with_context(|| format!("cannot write {}", path.display()))?;
            }
        }
        Command::Synth {
            out,
            entities,
            seed,
            clean,
        } => {
            let config = load_config(config_path, &Overrides::default())?;
            let mut params = SynthParams::new(seed.unwrap_or(config.seed), entities);
            if clean {
                params.noise = NoiseParams::none();
            }
            let corpus = generate_synthetic(&params);
            let paths = corpus.write(&out)?;
            println!(
                "{} mentions, {} entities\n{}\n{}\n{}\n{}",
                corpus.mentions.len(),
                corpus.entity_labels().len(),
                paths.mentions.display(),
                paths.geocodes.display(),
                paths.contexts.display(),
                paths.benchmark.display()
            );
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if !e.is_input_error() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
