//! Linear probes, semantic scans and subspace ablation for static word
//! embeddings.
//!
//! The pipeline: load an [`EmbeddingStore`], join an [`EntityTable`] onto it
//! to get a [`JoinedDesign`], then fit held-out ridge probes
//! ([`probe_target`]), correlate vocabulary similarity profiles with a
//! target ([`scan()`]), or remove semantic subspaces and re-probe against
//! random controls ([`ablation_experiment`]).

pub mod ablation;
pub mod dataset;
pub mod embeddings;
pub mod error;
pub mod planted;
pub mod ridge;
pub mod scan;

pub use ablation::{
    ablate, ablation_experiment, category_subspace, combined_ablation, random_subspace,
    AblationReport, AblationSettings, SemanticCategory, Subspace, TargetAblation,
};
pub use dataset::{
    apply_transforms, join_embeddings, load_entity_table, train_test_split, EntityTable,
    JoinedDesign, Split, SplitSpec,
};
pub use embeddings::{
    load_glove_text, load_word2vec_binary, CasePolicy, EmbeddingFormat, EmbeddingStore,
    LookupMode, LookupStrategy,
};
pub use error::{Error, Result};
pub use ridge::{
    cross_validate_lambda, evaluate, probe_target, ridge_fit, stability_sweep, CvSpec,
    ProbeResult, RidgeModel, StabilitySweep,
};
pub use scan::{
    composite, cosine, filter_vocabulary, pearson, scan, top_k, CompositeScore, Correlation,
    Direction, VocabFilter, WordCorrelation,
};
