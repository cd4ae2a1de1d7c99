use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use staticprobe_cli::{read_report, run, write_report, CommandOptions, LambdaGrid, Payload, Report, RunConfig};
use staticprobe_core::planted::{PlantedConfig, PlantedWorld};
use staticprobe_core::{CasePolicy, EmbeddingFormat, LookupMode, LookupStrategy};

#[derive(Parser)]
#[command(name = "staticprobe", version, about = "Linear probes and semantic scans over static word embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit held-out ridge probes for each target.
    Probe {
        #[command(flatten)]
        common: Common,
        /// Also run a stability sweep over this many consecutive seeds.
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Correlate vocabulary similarity profiles with each target.
    Scan {
        #[command(flatten)]
        common: Common,
        /// Words listed per direction in the report.
        #[arg(long, default_value_t = 20)]
        top_k: usize,
        /// Only the first N embedding entries are scanned.
        #[arg(long, default_value_t = 20_000)]
        vocab_size: usize,
        #[arg(long, default_value_t = 4)]
        min_length: usize,
        /// Directory of exclusion lists (one `*.txt` per list).
        #[arg(long)]
        exclusions: Option<PathBuf>,
        /// Keep tokens containing digits or punctuation.
        #[arg(long)]
        allow_nonalphabetic: bool,
    },
    /// Score entities by cos(e, pos) − cos(e, neg) and correlate with each target.
    Composite {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        pos: String,
        #[arg(long)]
        neg: String,
    },
    /// Remove category subspaces and compare against random controls.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// Category names (files in --categories-dir) or paths to word lists.
        #[arg(long, value_delimiter = ',', required = true)]
        categories: Vec<String>,
        #[arg(long, default_value = "data/categories")]
        categories_dir: PathBuf,
        #[arg(long, default_value_t = 100)]
        n_random: usize,
        #[arg(long, default_value_t = 0)]
        master_seed: u64,
        #[arg(long, default_value_t = 0.9)]
        var_threshold: f64,
        #[arg(long, default_value_t = 20)]
        max_dims: usize,
        /// Skip the sequential all-categories ablation.
        #[arg(long)]
        no_combined: bool,
    },
    /// Write a synthetic world with planted structure.
    Synth {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 100)]
        entities: usize,
        #[arg(long, default_value_t = 50)]
        dim: usize,
        #[arg(long, default_value_t = 1000)]
        vocab: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Re-run the configuration recorded in a report.
    Rerun {
        report: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Glove,
    Word2vec,
}

#[derive(Clone, Copy, ValueEnum)]
enum Lookup {
    Exact,
    Phrase,
    Average,
}

#[derive(Clone, Copy, ValueEnum)]
enum Case {
    Lowercase,
    Preserve,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, value_enum, default_value = "glove")]
    format: Format,
    /// Entity name lookup; defaults depend on --format.
    #[arg(long, value_enum)]
    lookup: Option<Lookup>,
    #[arg(long, value_enum)]
    case: Option<Case>,
    #[arg(long)]
    dataset: PathBuf,
    /// File of entity names to keep.
    #[arg(long)]
    entity_subset: Option<PathBuf>,
    /// Comma-separated targets; all by default.
    #[arg(long, value_delimiter = ',')]
    targets: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Log-uniform grid as lo,hi,count.
    #[arg(long, default_value = "0.01,1000,8")]
    lambda_grid: LambdaGrid,
    /// JSON report path; CSV tables are written alongside. Prints JSON when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

impl Common {
    fn into_config(self, options: CommandOptions) -> RunConfig {
        let format = match self.format {
            Format::Glove => EmbeddingFormat::GloveText,
            Format::Word2vec => EmbeddingFormat::Word2vecBin,
        };
        let default = format.default_strategy();
        let lookup = LookupStrategy::new(
            match self.lookup {
                None => default.mode,
                Some(Lookup::Exact) => LookupMode::Exact,
                Some(Lookup::Phrase) => LookupMode::PhraseThenAverage,
                Some(Lookup::Average) => LookupMode::AverageOnly,
            },
            match self.case {
                None => default.case,
                Some(Case::Lowercase) => CasePolicy::Lowercase,
                Some(Case::Preserve) => CasePolicy::Preserve,
            },
        );
        RunConfig {
            embeddings: self.embeddings,
            format,
            lookup,
            dataset: self.dataset,
            subset: self.entity_subset,
            targets: self.targets,
            seed: self.seed,
            test_fraction: self.test_fraction,
            folds: self.folds,
            lambda_grid: self.lambda_grid,
            output: self.output,
            options,
        }
    }
}

fn to_config(command: Command) -> anyhow::Result<RunConfig> {
    Ok(match command {
        Command::Probe { common, seeds } => common.into_config(CommandOptions::Probe { seeds }),
        Command::Scan {
            common,
            top_k,
            vocab_size,
            min_length,
            exclusions,
            allow_nonalphabetic,
        } => common.into_config(CommandOptions::Scan {
            top_k,
            vocab_size,
            min_length,
            alphabetic_only: !allow_nonalphabetic,
            exclusions,
        }),
        Command::Composite { common, pos, neg } => {
            common.into_config(CommandOptions::Composite { pos, neg })
        }
        Command::Ablate {
            common,
            categories,
            categories_dir,
            n_random,
            master_seed,
            var_threshold,
            max_dims,
            no_combined,
        } => common.into_config(CommandOptions::Ablate {
            categories,
            categories_dir,
            n_random,
            master_seed,
            var_threshold,
            max_dims,
            combined: !no_combined,
        }),
        Command::Rerun { report, output } => {
            let mut config = read_report(&report)?.config;
            config.output = output;
            config
        }
        Command::Synth { .. } => unreachable!("handled before config"),
    })
}

fn summarize(report: &Report) {
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    match &report.payload {
        Payload::Probe { results, sweeps } => {
            for r in results {
                println!(
                    "{:<24} R² {:>7.4}  MAE {:>10.4}  λ {:<10.4} n {}/{}",
                    r.target, r.r2_test, r.mae_test, r.lambda_chosen, r.n_train, r.n_test
                );
            }
            for s in sweeps {
                println!(
                    "{:<24} {} seeds: mean R² {:.4}, min {:.4}",
                    s.target,
                    s.seeds.len(),
                    s.mean_r2,
                    s.min_r2
                );
            }
        }
        Payload::Scan { scans } => {
            for s in scans {
                let words = |list: &[staticprobe_core::WordCorrelation]| {
                    list.iter()
                        .take(5)
                        .map(|c| format!("{} ({:+.3})", c.word, c.r))
                        .collect::<Vec<_>>()
                        .join(", ")
                };
                println!("{} [{} words, {} entities]", s.target, s.vocabulary_size, s.n_entities);
                println!("  + {}", words(&s.top_positive));
                println!("  - {}", words(&s.top_negative));
            }
        }
        Payload::Composite { composites } => {
            for c in composites {
                println!(
                    "{} − {} vs {:<20} r {:+.4}  p {:.3e}  n {}",
                    c.pos_word, c.neg_word, c.target, c.correlation.r, c.correlation.p_value, c.correlation.n
                );
            }
        }
        Payload::Ablate { categories, reports } => {
            for c in categories {
                println!("{}: {} words → {} dims", c.name, c.words, c.dims);
            }
            for rep in reports {
                for t in &rep.targets {
                    let z = t.z_score.map_or("n/a".to_string(), |z| format!("{z:+.2}"));
                    println!(
                        "{:<20} {:<20} R² {:.4} → {:.4}  Δ {:+.4}  random Δ {:+.4}±{:.4}  z {}",
                        rep.category, t.target, t.baseline_r2, t.ablated_r2, t.delta_r2,
                        t.random_mean_delta, t.random_std_delta, z
                    );
                }
            }
        }
    }
}

fn main_inner() -> anyhow::Result<()> {
    let cli = Cli::parse();
    if let Command::Synth {
        output,
        entities,
        dim,
        vocab,
        noise,
        seed,
    } = cli.command
    {
        let world = PlantedWorld::generate(&PlantedConfig {
            n_entities: entities,
            dim,
            vocab_size: vocab,
            noise,
            seed,
            ..PlantedConfig::default()
        })?;
        world
            .write_to_dir(&output)
            .with_context(|| format!("writing {}", output.display()))?;
        println!("wrote synthetic world to {}", output.display());
        return Ok(());
    }
    let config = to_config(cli.command)?;
    let report = run(&config)?;
    match &config.output {
        Some(path) => {
            summarize(&report);
            for p in write_report(&report, path)? {
                eprintln!("wrote {}", p.display());
            }
        }
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
