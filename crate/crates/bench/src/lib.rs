//! Fixtures shared by the benchmarks.

use nalgebra::DMatrix;
use staticprobe_core::planted::{PlantedConfig, PlantedWorld};
use staticprobe_core::{join_embeddings, JoinedDesign, LookupStrategy};

pub struct Fixture {
    pub world: PlantedWorld,
    pub design: JoinedDesign,
}

/// A planted world with a little noise on the signal target.
pub fn fixture(n_entities: usize, dim: usize, vocab_size: usize) -> Fixture {
    let world = PlantedWorld::generate(&PlantedConfig {
        n_entities,
        dim,
        vocab_size,
        noise: 0.5,
        ..PlantedConfig::default()
    })
    .expect("valid planted config");
    let design = join_embeddings(&world.table, &world.store, &LookupStrategy::glove())
        .expect("planted entities resolve");
    Fixture { world, design }
}

/// Design matrix and `signal` column as a plain regression problem.
pub fn regression(f: &Fixture) -> (DMatrix<f64>, Vec<f64>) {
    let y = f
        .design
        .target("signal")
        .expect("planted target")
        .iter()
        .map(|v| v.expect("planted values are complete"))
        .collect();
    (f.design.x.clone(), y)
}
