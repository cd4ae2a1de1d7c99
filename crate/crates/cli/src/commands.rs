use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use staticprobe_core::ablation::SubspaceSource;
use staticprobe_core::dataset::Dropped;
use staticprobe_core::embeddings::load;
use staticprobe_core::scan::{load_exclusions, read_word_list, ScanResult};
use staticprobe_core::{
    ablation_experiment, apply_transforms, category_subspace, combined_ablation, composite,
    join_embeddings, load_entity_table, probe_target, scan, stability_sweep, top_k,
    AblationReport, AblationSettings, CompositeScore, Direction, EmbeddingStore, JoinedDesign,
    ProbeResult, SemanticCategory, StabilitySweep, VocabFilter, WordCorrelation,
};

use crate::config::{CommandOptions, RunConfig};

pub const TOOL: &str = "staticprobe";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSummary {
    pub n_entities: usize,
    pub dim: usize,
    pub vocabulary_size: usize,
    pub dropped: Vec<Dropped>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub target: String,
    pub n_entities: usize,
    pub vocabulary_size: usize,
    pub top_positive: Vec<WordCorrelation>,
    pub top_negative: Vec<WordCorrelation>,
    /// The full ranking, strongest positive first.
    pub correlations: Vec<WordCorrelation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryInfo {
    pub name: String,
    pub words: usize,
    pub dims: usize,
    pub explained_variance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Payload {
    Probe {
        results: Vec<ProbeResult>,
        sweeps: Vec<StabilitySweep>,
    },
    Scan {
        scans: Vec<ScanSummary>,
    },
    Composite {
        composites: Vec<CompositeScore>,
    },
    Ablate {
        categories: Vec<CategoryInfo>,
        reports: Vec<AblationReport>,
    },
}

/// Self-describing record of one run: feeding `config` back through
/// [`run`] reproduces `payload`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub design: DesignSummary,
    pub warnings: Vec<String>,
    pub payload: Payload,
    pub duration_secs: f64,
}

struct Loaded {
    store: EmbeddingStore,
    design: JoinedDesign,
    warnings: Vec<String>,
}

fn load_inputs(config: &RunConfig) -> anyhow::Result<Loaded> {
    let store = load(&config.embeddings, config.format)
        .with_context(|| format!("loading embeddings {}", config.embeddings.display()))?;
    let mut table = load_entity_table(&config.dataset)
        .with_context(|| format!("loading dataset {}", config.dataset.display()))?;
    if table.is_transformed() {
        table = apply_transforms(&table)?;
    }
    if let Some(path) = &config.subset {
        let names = read_word_list(path)?;
        let lower: Vec<String> = names.iter().map(|n| n.to_lowercase()).collect();
        let keep: Vec<String> = table
            .entities()
            .iter()
            .filter(|e| lower.contains(&e.name.to_lowercase()))
            .map(|e| e.name.clone())
            .collect();
        table = table.retain_names(&keep);
        if table.is_empty() {
            bail!("entity subset {} matched no dataset rows", path.display());
        }
    }
    for t in &config.targets {
        if table.target_index(t).is_none() {
            bail!(
                "unknown target {t:?}; dataset has {}",
                table.target_names().join(", ")
            );
        }
    }
    let design = join_embeddings(&table, &store, &config.lookup)?;
    let mut warnings: Vec<String> = design
        .dropped
        .iter()
        .map(|d| format!("dropped entity {:?}: {}", d.name, d.reason))
        .collect();
    for t in targets_of(config, &design) {
        let missing = design.n() - design.rows_with(&t)?.len();
        if missing > 0 {
            warnings.push(format!("target {t:?}: {missing} entities have no value"));
        }
    }
    Ok(Loaded {
        store,
        design,
        warnings,
    })
}

fn targets_of(config: &RunConfig, design: &JoinedDesign) -> Vec<String> {
    if config.targets.is_empty() {
        design.target_names.clone()
    } else {
        config.targets.clone()
    }
}

pub fn run(config: &RunConfig) -> anyhow::Result<Report> {
    let started = Instant::now();
    let Loaded {
        store,
        design,
        mut warnings,
    } = load_inputs(config)?;
    let targets = targets_of(config, &design);
    let payload = match &config.options {
        CommandOptions::Probe { seeds } => probe(config, &design, &targets, *seeds, &mut warnings)?,
        CommandOptions::Scan { .. } => run_scan(config, &store, &design, &targets)?,
        CommandOptions::Composite { pos, neg } => {
            run_composite(&store, &design, &targets, pos, neg, &mut warnings)?
        }
        CommandOptions::Ablate { .. } => run_ablate(config, &store, &design, &targets)?,
    };
    Ok(Report {
        tool: TOOL.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: config.options.name().into(),
        config: config.clone(),
        design: DesignSummary {
            n_entities: design.n(),
            dim: design.dim(),
            vocabulary_size: store.len(),
            dropped: design.dropped.clone(),
        },
        warnings,
        payload,
        duration_secs: started.elapsed().as_secs_f64(),
    })
}

fn probe(
    config: &RunConfig,
    design: &JoinedDesign,
    targets: &[String],
    seeds: Option<usize>,
    warnings: &mut Vec<String>,
) -> anyhow::Result<Payload> {
    let cv = config.cv()?;
    let mut results = Vec::new();
    let mut sweeps = Vec::new();
    for t in targets {
        match probe_target(design, t, &config.split(), &cv) {
            Ok(r) => results.push(r),
            // One unprobeable target should not sink the others.
            Err(e) if targets.len() > 1 => {
                warnings.push(format!("target {t:?} skipped: {e}"));
                continue;
            }
            Err(e) => return Err(e).with_context(|| format!("probing {t:?}")),
        }
        if let Some(n) = seeds {
            sweeps.push(stability_sweep(design, t, config.seed, config.test_fraction, n, &cv)?);
        }
    }
    if results.is_empty() {
        bail!("no target could be probed");
    }
    Ok(Payload::Probe { results, sweeps })
}

fn run_scan(
    config: &RunConfig,
    store: &EmbeddingStore,
    design: &JoinedDesign,
    targets: &[String],
) -> anyhow::Result<Payload> {
    let CommandOptions::Scan {
        top_k: k,
        vocab_size,
        min_length,
        alphabetic_only,
        exclusions,
    } = &config.options
    else {
        unreachable!("dispatched on scan options")
    };
    let filter = VocabFilter {
        top_k: (*vocab_size).min(store.len()),
        min_length: *min_length,
        alphabetic_only: *alphabetic_only,
        exclusions: match exclusions {
            Some(dir) => load_exclusions(dir)?,
            None => BTreeMap::new(),
        },
    };
    let mut scans = Vec::new();
    for t in targets {
        let ScanResult {
            target,
            n_entities,
            vocabulary_size,
            correlations,
            ..
        } = scan(store, design, t, &filter).with_context(|| format!("scanning {t:?}"))?;
        let k = (*k).min(correlations.len());
        scans.push(ScanSummary {
            top_positive: top_k(&correlations, k, Direction::Positive)?,
            top_negative: top_k(&correlations, k, Direction::Negative)?,
            target,
            n_entities,
            vocabulary_size,
            correlations,
        });
    }
    Ok(Payload::Scan { scans })
}

fn run_composite(
    store: &EmbeddingStore,
    design: &JoinedDesign,
    targets: &[String],
    pos: &str,
    neg: &str,
    warnings: &mut Vec<String>,
) -> anyhow::Result<Payload> {
    let mut composites = Vec::new();
    for t in targets {
        match composite(store, design, pos, neg, t) {
            Ok(c) => composites.push(c),
            Err(e @ staticprobe_core::Error::ZeroVariance(_)) if targets.len() > 1 => {
                warnings.push(format!("target {t:?} skipped: {e}"))
            }
            Err(e) => return Err(e).with_context(|| format!("composite {pos}−{neg} on {t:?}")),
        }
    }
    Ok(Payload::Composite { composites })
}

fn run_ablate(
    config: &RunConfig,
    store: &EmbeddingStore,
    design: &JoinedDesign,
    targets: &[String],
) -> anyhow::Result<Payload> {
    let CommandOptions::Ablate {
        categories,
        categories_dir,
        n_random,
        master_seed,
        var_threshold,
        max_dims,
        combined,
    } = &config.options
    else {
        unreachable!("dispatched on ablate options")
    };
    if categories.is_empty() {
        bail!("no categories given");
    }
    let settings = AblationSettings {
        split: config.split(),
        cv: config.cv()?,
        n_random: *n_random,
        master_seed: *master_seed,
    };
    let mut infos = Vec::new();
    let mut subspaces = Vec::new();
    for name in categories {
        let cat = load_category(categories_dir, name)?;
        let sub = category_subspace(store, &cat, *var_threshold, *max_dims)
            .with_context(|| format!("category {name:?}"))?;
        infos.push(CategoryInfo {
            name: cat.name.clone(),
            words: cat.words.len(),
            dims: sub.k(),
            explained_variance: sub.explained_variance,
        });
        subspaces.push(sub);
    }
    let mut reports = Vec::new();
    for sub in &subspaces {
        let label = match &sub.source {
            SubspaceSource::Category { name } => name.clone(),
            SubspaceSource::Random { seed } => format!("random{seed}"),
        };
        reports.push(
            ablation_experiment(design, targets, sub, &settings)
                .with_context(|| format!("ablating {label:?}"))?,
        );
    }
    if *combined && subspaces.len() > 1 {
        reports.push(combined_ablation(design, targets, &subspaces, &settings)?);
    }
    Ok(Payload::Ablate {
        categories: infos,
        reports,
    })
}

/// `name` may be a path to a word list or a file stem inside `dir`.
fn load_category(dir: &Path, name: &str) -> anyhow::Result<SemanticCategory> {
    let direct = Path::new(name);
    let path = if direct.extension().is_some() && direct.exists() {
        direct.to_path_buf()
    } else {
        dir.join(format!("{name}.txt"))
    };
    SemanticCategory::load(&path).with_context(|| format!("category list {}", path.display()))
}
