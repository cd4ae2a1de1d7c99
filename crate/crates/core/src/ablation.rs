//! Semantic subspace ablation with matched random-subspace controls.
//!
//! A category's word vectors are centered and reduced by PCA to the
//! smallest basis reaching the variance threshold (capped). Entity
//! embeddings, uncentered, lose their component in that basis
//! (`X − XBBᵀ`) and the probes are re-run. The same removal with random
//! orthonormal bases of equal size gives the null distribution for the
//! R² drop.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{JoinedDesign, SplitSpec};
use crate::embeddings::EmbeddingStore;
use crate::error::{Error, Result};
use crate::ridge::{probe_target, CvSpec};
use crate::scan::read_word_list;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticCategory {
    pub name: String,
    pub words: Vec<String>,
}

impl SemanticCategory {
    /// Reads `<dir>/<name>.txt`-style lists; the category is named by the file stem.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        Ok(SemanticCategory {
            name,
            words: read_word_list(path)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SubspaceSource {
    Category { name: String },
    Random { seed: u64 },
}

/// Orthonormal basis stored column-wise (`d × k`).
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    pub basis: DMatrix<f64>,
    pub source: SubspaceSource,
    /// Fraction of category variance captured, when built by PCA.
    pub explained_variance: Option<f64>,
}

impl Subspace {
    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn k(&self) -> usize {
        self.basis.ncols()
    }

    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// `max |BᵀB − I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.basis.tr_mul(&self.basis);
        let k = self.k();
        (0..k)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .map(|(i, j)| (g[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max)
    }
}

/// Thin-QR orthonormalization with sign-fixed columns (`R` has a positive diagonal).
fn orthonormalize(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = m.ncols();
    let qr = m.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..k {
        if r[(j, j)].abs() < 1e-12 {
            return Err(Error::Numerical("rank-deficient basis".into()));
        }
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

/// PCA basis of a category's centered word vectors.
///
/// Keeps the smallest `k` whose cumulative explained variance reaches
/// `var_threshold`, then caps it at `max_dims`.
pub fn category_subspace(
    store: &EmbeddingStore,
    category: &SemanticCategory,
    var_threshold: f64,
    max_dims: usize,
) -> Result<Subspace> {
    if !(var_threshold > 0.0 && var_threshold <= 1.0) || max_dims == 0 {
        return Err(Error::InvalidArgument(format!(
            "variance threshold {var_threshold} / max dims {max_dims}"
        )));
    }
    let mut missing = Vec::new();
    let mut rows: Vec<&[f32]> = Vec::new();
    for w in &category.words {
        match store.get_case_insensitive(w) {
            Some(v) => rows.push(v),
            None => missing.push(w.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::OutOfVocabulary(missing));
    }
    if rows.len() < 2 {
        return Err(Error::TooFewRows {
            needed: 2,
            got: rows.len(),
        });
    }
    let (m, d) = (rows.len(), store.dim());
    let mut c = DMatrix::from_fn(m, d, |r, col| f64::from(rows[r][col]));
    for mut col in c.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }

    // Eigen-decompose whichever Gram matrix is smaller. For the m × m form,
    // the principal directions are Cᵀv / √λ.
    if m < d {
        let eig = SymmetricEigen::new(&c * c.transpose());
        finish_pca(
            eig.eigenvalues.as_slice(),
            |j| {
                let u = c.tr_mul(&eig.eigenvectors.column(j));
                let norm = u.norm();
                u / norm
            },
            var_threshold,
            max_dims,
            d,
            &category.name,
        )
    } else {
        let eig = SymmetricEigen::new(c.tr_mul(&c));
        finish_pca(
            eig.eigenvalues.as_slice(),
            |j| eig.eigenvectors.column(j).into_owned(),
            var_threshold,
            max_dims,
            d,
            &category.name,
        )
    }
}

fn finish_pca(
    eigenvalues: &[f64],
    direction: impl Fn(usize) -> nalgebra::DVector<f64>,
    var_threshold: f64,
    max_dims: usize,
    d: usize,
    name: &str,
) -> Result<Subspace> {
    let mut order: Vec<usize> = (0..eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eigenvalues[b].total_cmp(&eigenvalues[a]).then(a.cmp(&b)));
    let total: f64 = eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let top = eigenvalues[order[0]];
    if total.is_nan() || total <= 0.0 || top <= 1e-12 * total.max(1.0) {
        return Err(Error::ZeroVariance(format!("category {name:?}")));
    }
    let usable: Vec<usize> = order
        .into_iter()
        .filter(|&j| eigenvalues[j] > top * 1e-10)
        .collect();
    let mut k = 0;
    let mut cumulative = 0.0;
    for &j in &usable {
        cumulative += eigenvalues[j];
        k += 1;
        if cumulative / total >= var_threshold * (1.0 - 1e-12) {
            break;
        }
    }
    let k = k.min(max_dims);
    let explained = usable[..k].iter().map(|&j| eigenvalues[j]).sum::<f64>() / total;
    let mut basis = DMatrix::zeros(d, k);
    for (col, &j) in usable[..k].iter().enumerate() {
        basis.set_column(col, &direction(j));
    }
    Ok(Subspace {
        basis: orthonormalize(basis)?,
        source: SubspaceSource::Category {
            name: name.to_string(),
        },
        explained_variance: Some(explained),
    })
}

/// Orthonormalized `d × k` matrix of seeded standard normal draws.
pub fn random_subspace(d: usize, k: usize, seed: u64) -> Result<Subspace> {
    if k == 0 || k > d {
        return Err(Error::InvalidArgument(format!(
            "random subspace of {k} dims in {d} dimensions"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws = DMatrix::from_fn(d, k, |_, _| StandardNormal.sample(&mut rng));
    Ok(Subspace {
        basis: orthonormalize(draws)?,
        source: SubspaceSource::Random { seed },
        explained_variance: None,
    })
}

/// `X − XBBᵀ`.
pub fn ablate(x: &DMatrix<f64>, sub: &Subspace) -> Result<DMatrix<f64>> {
    if x.ncols() != sub.dim() {
        return Err(Error::DimensionMismatch {
            expected: sub.dim(),
            got: x.ncols(),
        });
    }
    let coords = x * &sub.basis;
    Ok(x - coords * sub.basis.transpose())
}

/// Per-target outcome of one ablation experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetAblation {
    pub target: String,
    pub baseline_r2: f64,
    pub ablated_r2: f64,
    /// `baseline − ablated`; positive means the probe got worse.
    pub delta_r2: f64,
    pub random_mean_delta: f64,
    pub random_std_delta: f64,
    /// `None` when the random deltas have zero spread.
    pub z_score: Option<f64>,
    pub n_random: usize,
    pub random_mean_ablated_r2: f64,
    /// One entry per random repeat, in repeat order.
    pub random_deltas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceOverlap {
    pub first: String,
    pub second: String,
    /// `‖BᵢᵀBⱼ‖²_F`: 0 for orthogonal subspaces, up to `min(kᵢ, kⱼ)`.
    pub frobenius_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub category: String,
    /// Nominal removed dimensions (sum over categories when combined).
    pub dims: usize,
    pub components: Vec<String>,
    pub n_random: usize,
    pub master_seed: u64,
    pub split: SplitSpec,
    pub targets: Vec<TargetAblation>,
    /// Pairwise overlap between sequentially removed subspaces.
    pub overlaps: Vec<SubspaceOverlap>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSettings {
    pub split: SplitSpec,
    pub cv: CvSpec,
    pub n_random: usize,
    pub master_seed: u64,
}

impl Default for AblationSettings {
    fn default() -> Self {
        AblationSettings {
            split: SplitSpec::default(),
            cv: CvSpec::default(),
            n_random: 100,
            master_seed: 0,
        }
    }
}

fn probe_all(design: &JoinedDesign, targets: &[String], s: &AblationSettings) -> Result<Vec<f64>> {
    targets
        .iter()
        .map(|t| probe_target(design, t, &s.split, &s.cv).map(|p| p.r2_test))
        .collect()
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Removes one category subspace and compares against `n_random` random
/// subspaces of the same size. Repeat `i` uses seed `master_seed + i`.
pub fn ablation_experiment(
    design: &JoinedDesign,
    targets: &[String],
    subspace: &Subspace,
    settings: &AblationSettings,
) -> Result<AblationReport> {
    run_experiment(design, targets, std::slice::from_ref(subspace), None, settings)
}

/// Removes several subspaces one after another, in the order given. The
/// random control is a single random subspace with the summed size.
pub fn combined_ablation(
    design: &JoinedDesign,
    targets: &[String],
    subspaces: &[Subspace],
    settings: &AblationSettings,
) -> Result<AblationReport> {
    if subspaces.len() < 2 {
        return Err(Error::InvalidArgument("combined ablation needs at least two subspaces".into()));
    }
    run_experiment(design, targets, subspaces, Some("combined"), settings)
}

fn source_name(s: &Subspace) -> String {
    match &s.source {
        SubspaceSource::Category { name } => name.clone(),
        SubspaceSource::Random { seed } => format!("random:{seed}"),
    }
}

fn run_experiment(
    design: &JoinedDesign,
    targets: &[String],
    subspaces: &[Subspace],
    label: Option<&str>,
    settings: &AblationSettings,
) -> Result<AblationReport> {
    if targets.is_empty() {
        return Err(Error::InvalidArgument("no targets to ablate".into()));
    }
    if settings.n_random == 0 {
        return Err(Error::InvalidArgument("need at least one random repeat".into()));
    }
    let d = design.dim();
    for s in subspaces {
        if s.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: s.dim(),
            });
        }
    }
    let dims: usize = subspaces.iter().map(Subspace::k).sum();
    if dims > d {
        return Err(Error::InvalidArgument(format!(
            "removing {dims} dimensions from {d}-dimensional embeddings"
        )));
    }

    let baseline = probe_all(design, targets, settings)?;
    let mut x = design.x.clone();
    for s in subspaces {
        x = ablate(&x, s)?;
    }
    let ablated = probe_all(&design.with_x(x)?, targets, settings)?;

    let random: Vec<Vec<f64>> = (0..settings.n_random as u64)
        .into_par_iter()
        .map(|i| {
            let sub = random_subspace(d, dims, settings.master_seed.wrapping_add(i))?;
            let x = ablate(&design.x, &sub)?;
            probe_all(&design.with_x(x)?, targets, settings)
        })
        .collect::<Result<_>>()?;

    let per_target = targets
        .iter()
        .enumerate()
        .map(|(t, name)| {
            let delta = baseline[t] - ablated[t];
            let random_r2: Vec<f64> = random.iter().map(|r| r[t]).collect();
            let deltas: Vec<f64> = random_r2.iter().map(|r| baseline[t] - r).collect();
            let (mean, std) = mean_std(&deltas);
            TargetAblation {
                target: name.clone(),
                baseline_r2: baseline[t],
                ablated_r2: ablated[t],
                delta_r2: delta,
                random_mean_delta: mean,
                random_std_delta: std,
                z_score: (std > 0.0).then(|| (delta - mean) / std),
                n_random: deltas.len(),
                random_mean_ablated_r2: random_r2.iter().sum::<f64>() / random_r2.len() as f64,
                random_deltas: deltas,
            }
        })
        .collect();

    let mut overlaps = Vec::new();
    for i in 0..subspaces.len() {
        for j in i + 1..subspaces.len() {
            let cross = subspaces[i].basis.tr_mul(&subspaces[j].basis);
            overlaps.push(SubspaceOverlap {
                first: source_name(&subspaces[i]),
                second: source_name(&subspaces[j]),
                frobenius_sq: cross.norm_squared(),
            });
        }
    }
    let components: Vec<String> = subspaces.iter().map(source_name).collect();
    Ok(AblationReport {
        category: label
            .map(str::to_string)
            .unwrap_or_else(|| components[0].clone()),
        dims,
        components,
        n_random: settings.n_random,
        master_seed: settings.master_seed,
        split: settings.split,
        targets: per_target,
        overlaps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis_subspace(d: usize, axes: &[usize]) -> Subspace {
        let mut b = DMatrix::zeros(d, axes.len());
        for (c, &a) in axes.iter().enumerate() {
            b[(a, c)] = 1.0;
        }
        Subspace {
            basis: b,
            source: SubspaceSource::Category { name: "axes".into() },
            explained_variance: None,
        }
    }

    #[test]
    fn ablating_first_axis_zeroes_first_column() {
        let x = DMatrix::from_fn(4, 3, |r, c| (r * 3 + c) as f64 + 1.0);
        let out = ablate(&x, &axis_subspace(3, &[0])).unwrap();
        assert!(out.column(0).iter().all(|&v| v == 0.0));
        assert_eq!(out.column(1), x.column(1));
        assert_eq!(out.column(2), x.column(2));
        assert!(ablate(&x, &axis_subspace(4, &[0])).is_err());
    }

    #[test]
    fn full_rank_random_subspace_removes_everything() {
        let sub = random_subspace(5, 5, 1).unwrap();
        let x = DMatrix::from_fn(3, 5, |r, c| (r + 2 * c) as f64 - 3.0);
        assert!(ablate(&x, &sub).unwrap().amax() < 1e-12);
        assert_eq!(sub, random_subspace(5, 5, 1).unwrap());
        assert!(random_subspace(5, 6, 1).is_err());
        assert!(random_subspace(5, 0, 1).is_err());
    }

    #[test]
    fn random_columns_orthonormal_over_many_draws() {
        for seed in 0..1000 {
            let sub = random_subspace(12, 1 + (seed as usize % 12), seed).unwrap();
            assert!(sub.orthonormality_error() < 1e-10, "seed {seed}");
        }
    }

    fn store_from(rows: &[(&str, Vec<f32>)]) -> EmbeddingStore {
        EmbeddingStore::from_entries(rows.iter().map(|(w, v)| (w.to_string(), v.clone()))).unwrap()
    }

    #[test]
    fn identical_words_have_no_variance() {
        let store = store_from(&[("a", vec![1.0, 2.0, 3.0]), ("b", vec![1.0, 2.0, 3.0])]);
        let cat = SemanticCategory {
            name: "twins".into(),
            words: vec!["a".into(), "b".into()],
        };
        assert!(matches!(category_subspace(&store, &cat, 0.9, 20), Err(Error::ZeroVariance(_))));
    }

    #[test]
    fn oov_words_are_listed() {
        let store = store_from(&[("a", vec![1.0, 2.0]), ("b", vec![0.0, 2.0])]);
        let cat = SemanticCategory {
            name: "c".into(),
            words: vec!["a".into(), "zz".into(), "b".into(), "yy".into()],
        };
        match category_subspace(&store, &cat, 0.9, 20).unwrap_err() {
            Error::OutOfVocabulary(w) => assert_eq!(w, ["zz", "yy"]),
            other => panic!("{other}"),
        }
        let single = SemanticCategory {
            name: "one".into(),
            words: vec!["a".into()],
        };
        assert!(category_subspace(&store, &single, 0.9, 20).is_err());
    }

    #[test]
    fn equal_variance_three_dim_span_keeps_three() {
        // ±e1, ±e2, ±e3 scaled equally, embedded in 6 dims with a constant offset.
        let mut rows = Vec::new();
        for axis in 0..3 {
            for sign in [1.0f32, -1.0] {
                let mut v = vec![0.5f32; 6];
                v[axis] += 2.0 * sign;
                rows.push((format!("w{axis}{}", sign > 0.0), v));
            }
        }
        let store = EmbeddingStore::from_entries(rows.clone()).unwrap();
        let cat = SemanticCategory {
            name: "cube".into(),
            words: rows.iter().map(|(w, _)| w.clone()).collect(),
        };
        let sub = category_subspace(&store, &cat, 0.9, 20).unwrap();
        assert_eq!(sub.k(), 3);
        assert!((sub.explained_variance.unwrap() - 1.0).abs() < 1e-12);
        // The basis spans e1..e3 exactly.
        let p = sub.projector();
        for i in 0..6 {
            let expect = if i < 3 { 1.0 } else { 0.0 };
            assert!((p[(i, i)] - expect).abs() < 1e-10);
        }
        assert_eq!(category_subspace(&store, &cat, 0.9, 2).unwrap().k(), 2);
    }

    #[test]
    fn more_words_than_dimensions_uses_covariance_form() {
        let rows: Vec<(String, Vec<f32>)> = (0..8)
            .map(|i| {
                let t = i as f32;
                (format!("w{i}"), vec![t, 2.0 * t + 0.01 * (t * t), 1.0])
            })
            .collect();
        let store = EmbeddingStore::from_entries(rows.clone()).unwrap();
        let cat = SemanticCategory {
            name: "line".into(),
            words: rows.iter().map(|(w, _)| w.clone()).collect(),
        };
        let sub = category_subspace(&store, &cat, 0.9, 20).unwrap();
        assert_eq!(sub.k(), 1);
        let b = sub.basis.column(0);
        // Dominant direction is close to (1, 2, 0)/√5.
        assert!((b[0].abs() - 1.0 / 5f64.sqrt()).abs() < 0.02);
        assert!(b[2].abs() < 1e-10);
    }

    #[test]
    fn z_undefined_without_spread() {
        assert_eq!(mean_std(&[0.3, 0.3, 0.3]), (0.3, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }
}
