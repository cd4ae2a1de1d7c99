//! Entity/target tables, target transforms, embedding joins and splits.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embeddings::{EmbeddingStore, LookupStrategy};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    #[default]
    None,
    Log10,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TargetMeta {
    pub transform: Transform,
    pub units: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entity {
    pub name: String,
    /// Aligned with [`EntityTable::target_names`]; `None` is a missing cell.
    pub values: Vec<Option<f64>>,
}

/// Named entities with numeric targets.
///
/// Target columns are declared as `name`, `name[units]`, optionally
/// suffixed with `:log10`. A sidecar file `<stem>.transforms` next to the
/// CSV may also carry `target=log10` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityTable {
    target_names: Vec<String>,
    meta: Vec<TargetMeta>,
    entities: Vec<Entity>,
    transformed: bool,
}

impl EntityTable {
    pub fn new(
        target_names: Vec<String>,
        meta: Vec<TargetMeta>,
        entities: Vec<Entity>,
    ) -> Result<Self> {
        if meta.len() != target_names.len() {
            return Err(Error::InvalidArgument("target metadata length mismatch".into()));
        }
        let mut seen = HashSet::new();
        for t in &target_names {
            if !seen.insert(t.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate target {t:?}")));
            }
        }
        let mut names = HashSet::new();
        for e in &entities {
            if e.values.len() != target_names.len() {
                return Err(Error::InvalidArgument(format!(
                    "entity {:?} has {} values for {} targets",
                    e.name,
                    e.values.len(),
                    target_names.len()
                )));
            }
            if !names.insert(e.name.as_str()) {
                return Err(Error::DuplicateEntity(e.name.clone()));
            }
        }
        Ok(EntityTable {
            target_names,
            meta,
            entities,
            transformed: false,
        })
    }

    pub fn target_names(&self) -> &[String] {
        &self.target_names
    }

    pub fn target_meta(&self, target: &str) -> Option<&TargetMeta> {
        self.target_index(target).map(|i| &self.meta[i])
    }

    pub fn target_index(&self, target: &str) -> Option<usize> {
        self.target_names.iter().position(|t| t == target)
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn is_transformed(&self) -> bool {
        self.transformed
    }

    pub fn value(&self, entity: usize, target: &str) -> Option<f64> {
        let t = self.target_index(target)?;
        self.entities[entity].values[t]
    }

    /// Keeps only the entities whose names appear in `names`, in table order.
    pub fn retain_names(&self, names: &[String]) -> EntityTable {
        let keep: HashSet<&str> = names.iter().map(String::as_str).collect();
        EntityTable {
            target_names: self.target_names.clone(),
            meta: self.meta.clone(),
            entities: self
                .entities
                .iter()
                .filter(|e| keep.contains(e.name.as_str()))
                .cloned()
                .collect(),
            transformed: self.transformed,
        }
    }
}

struct ColumnSpec {
    name: String,
    meta: TargetMeta,
}

fn parse_column(header: &str) -> Result<ColumnSpec> {
    let mut meta = TargetMeta::default();
    let mut rest = header.trim();
    if let Some(stripped) = rest.strip_suffix(":log10") {
        meta.transform = Transform::Log10;
        rest = stripped.trim_end();
    }
    let name = match rest.find('[') {
        Some(open) if rest.ends_with(']') => {
            meta.units = rest[open + 1..rest.len() - 1].trim().to_string();
            rest[..open].trim()
        }
        _ => rest,
    };
    if name.is_empty() {
        return Err(Error::Table {
            row: 0,
            column: header.to_string(),
            message: "empty target name".into(),
        });
    }
    Ok(ColumnSpec {
        name: name.to_string(),
        meta,
    })
}

pub fn load_entity_table(path: impl AsRef<Path>) -> Result<EntityTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut table = parse_entity_table(&text)?;
    let sidecar = path.with_extension("transforms");
    if sidecar.exists() {
        let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        apply_sidecar(&mut table, &text)?;
    }
    Ok(table)
}

/// Parses entity CSV text. Data rows are numbered from 1.
pub fn parse_entity_table(text: &str) -> Result<EntityTable> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Table {
            row: 0,
            column: String::new(),
            message: e.to_string(),
        })?
        .clone();
    if headers.get(0) != Some("name") {
        return Err(Error::Table {
            row: 0,
            column: headers.get(0).unwrap_or_default().to_string(),
            message: "first column must be `name`".into(),
        });
    }
    let columns = headers
        .iter()
        .skip(1)
        .map(parse_column)
        .collect::<Result<Vec<_>>>()?;

    let mut entities = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Table {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        let name = record.get(0).unwrap_or_default().to_string();
        if name.is_empty() {
            return Err(Error::Table {
                row,
                column: "name".into(),
                message: "empty entity name".into(),
            });
        }
        let mut values = Vec::with_capacity(columns.len());
        for (c, col) in columns.iter().enumerate() {
            let cell = record.get(c + 1).unwrap_or_default();
            if cell.is_empty() {
                values.push(None);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Table {
                row,
                column: col.name.clone(),
                message: format!("non-numeric value {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Table {
                    row,
                    column: col.name.clone(),
                    message: format!("non-finite value {cell:?}"),
                });
            }
            values.push(Some(v));
        }
        entities.push(Entity { name, values });
    }
    let (names, meta) = columns.into_iter().map(|c| (c.name, c.meta)).unzip();
    EntityTable::new(names, meta, entities)
}

fn apply_sidecar(table: &mut EntityTable, text: &str) -> Result<()> {
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (target, transform) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("bad transform line {line:?}")))?;
        let idx = table
            .target_index(target.trim())
            .ok_or_else(|| Error::UnknownTarget(target.trim().to_string()))?;
        table.meta[idx].transform = match transform.trim() {
            "log10" => Transform::Log10,
            "none" => Transform::None,
            other => {
                return Err(Error::InvalidArgument(format!("unknown transform {other:?}")))
            }
        };
    }
    Ok(())
}

/// Replaces every `log10`-flagged column by its base-10 logarithm.
///
/// Flags are cleared afterwards and the table is marked transformed; a
/// second call is refused rather than double-logging.
pub fn apply_transforms(table: &EntityTable) -> Result<EntityTable> {
    if table.transformed {
        return Err(Error::TransformsAlreadyApplied);
    }
    let mut out = table.clone();
    for (t, meta) in out.meta.iter_mut().enumerate() {
        if meta.transform != Transform::Log10 {
            continue;
        }
        for e in out.entities.iter_mut() {
            if let Some(v) = e.values[t] {
                if v <= 0.0 {
                    return Err(Error::NonPositiveLog {
                        entity: e.name.clone(),
                        target: table.target_names[t].clone(),
                        value: v,
                    });
                }
                e.values[t] = Some(v.log10());
            }
        }
        meta.transform = Transform::None;
        meta.units = if meta.units.is_empty() {
            "log10".into()
        } else {
            format!("log10 {}", meta.units)
        };
    }
    out.transformed = true;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dropped {
    pub name: String,
    pub reason: String,
}

/// Entity embeddings stacked row-wise, with their target columns.
#[derive(Debug, Clone)]
pub struct JoinedDesign {
    pub x: DMatrix<f64>,
    pub names: Vec<String>,
    pub target_names: Vec<String>,
    /// One column per target, each of length `names.len()`.
    pub targets: Vec<Vec<Option<f64>>>,
    pub dropped: Vec<Dropped>,
}

impl JoinedDesign {
    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn target(&self, name: &str) -> Result<&[Option<f64>]> {
        self.target_names
            .iter()
            .position(|t| t == name)
            .map(|i| self.targets[i].as_slice())
            .ok_or_else(|| Error::UnknownTarget(name.to_string()))
    }

    /// Row indices whose value for `target` is present.
    pub fn rows_with(&self, target: &str) -> Result<Vec<usize>> {
        Ok(self
            .target(target)?
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|_| i))
            .collect())
    }

    /// Same rows and targets with a replacement embedding matrix.
    pub fn with_x(&self, x: DMatrix<f64>) -> Result<JoinedDesign> {
        if x.nrows() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: x.nrows(),
            });
        }
        Ok(JoinedDesign {
            x,
            names: self.names.clone(),
            target_names: self.target_names.clone(),
            targets: self.targets.clone(),
            dropped: self.dropped.clone(),
        })
    }

    /// Builds a design directly from a matrix and named target columns.
    pub fn from_parts(
        x: DMatrix<f64>,
        names: Vec<String>,
        targets: Vec<(String, Vec<f64>)>,
    ) -> Result<JoinedDesign> {
        if names.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: names.len(),
            });
        }
        let mut target_names = Vec::new();
        let mut columns = Vec::new();
        for (t, col) in targets {
            if col.len() != x.nrows() {
                return Err(Error::DimensionMismatch {
                    expected: x.nrows(),
                    got: col.len(),
                });
            }
            target_names.push(t);
            columns.push(col.into_iter().map(Some).collect());
        }
        Ok(JoinedDesign {
            x,
            names,
            target_names,
            targets: columns,
            dropped: Vec::new(),
        })
    }
}

/// Looks up every entity; rows follow table order, OOV entities are recorded
/// in `dropped`.
pub fn join_embeddings(
    table: &EntityTable,
    store: &EmbeddingStore,
    strategy: &LookupStrategy,
) -> Result<JoinedDesign> {
    if table.is_empty() {
        return Err(Error::InvalidArgument("empty entity table".into()));
    }
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(table.len());
    let mut names = Vec::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (i, e) in table.entities().iter().enumerate() {
        match store.lookup_entity(&e.name, strategy) {
            Some(v) => {
                rows.push(v);
                names.push(e.name.clone());
                kept.push(i);
            }
            None => dropped.push(Dropped {
                name: e.name.clone(),
                reason: format!("not resolvable with {:?} lookup", strategy.mode),
            }),
        }
    }
    if rows.is_empty() {
        return Err(Error::AllEntitiesDropped);
    }
    let d = store.dim();
    let x = DMatrix::from_fn(rows.len(), d, |r, c| rows[r][c]);
    let targets = (0..table.target_names().len())
        .map(|t| kept.iter().map(|&i| table.entities()[i].values[t]).collect())
        .collect();
    Ok(JoinedDesign {
        x,
        names,
        target_names: table.target_names().to_vec(),
        targets,
        dropped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(test_fraction: f64, seed: u64) -> Self {
        SplitSpec {
            test_fraction,
            seed,
        }
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec::new(0.2, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle of `0..n`; the first `round(n * test_fraction)` positions
/// become the test set. Both index lists are returned sorted.
pub fn train_test_split(n: usize, spec: &SplitSpec) -> Result<Split> {
    if n < 5 {
        return Err(Error::TooFewRows { needed: 5, got: n });
    }
    if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction {} outside (0, 1)",
            spec.test_fraction
        )));
    }
    let n_test = (n as f64 * spec.test_fraction).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::InvalidArgument(format!(
            "test fraction {} leaves an empty side for n = {n}",
            spec.test_fraction
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let mut test = perm[..n_test].to_vec();
    let mut train = perm[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok(Split { train, test })
}
