//! Synthetic embeddings with known, planted structure.
//!
//! Used by tests, benchmarks and the CLI's `synth` command. Entity vectors
//! are isotropic Gaussians. The `signal` target is linear in one hidden
//! direction `q0`, `secondary` in an orthogonal direction `q1`, and
//! `control` is independent noise. Word `warm` points along `q0` and `cold`
//! against it. Every word token is purely alphabetic so default vocabulary
//! filters keep it. Category `signal_words` spans `{q0, q2}`; `orthogonal_words`
//! spans `{q3, q4}` and carries no target signal.

use std::fs;
use std::path::Path;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::ablation::{random_subspace, SemanticCategory};
use crate::dataset::{Entity, EntityTable, TargetMeta};
use crate::embeddings::EmbeddingStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub n_entities: usize,
    pub dim: usize,
    /// Filler vocabulary size, excluding the planted words.
    pub vocab_size: usize,
    /// Standard deviation of Gaussian noise added to `signal`.
    pub noise: f64,
    pub words_per_category: usize,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            n_entities: 100,
            dim: 50,
            vocab_size: 1000,
            noise: 0.0,
            words_per_category: 12,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedWorld {
    pub store: EmbeddingStore,
    pub table: EntityTable,
    pub categories: Vec<SemanticCategory>,
    /// Unit direction the `signal` target is read from.
    pub signal_direction: DVector<f64>,
    pub entity_names: Vec<String>,
}

pub const SIGNAL_SCALE: f64 = 10.0;

fn round_f32(v: &DVector<f64>) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

/// `i` written in base 26 with `width` letters, `a` = 0.
fn letters(mut i: usize, width: usize) -> String {
    let mut out = vec![b'a'; width];
    for slot in out.iter_mut().rev() {
        *slot = b'a' + (i % 26) as u8;
        i /= 26;
    }
    String::from_utf8(out).expect("ascii")
}

fn widen(v: &[f32]) -> DVector<f64> {
    DVector::from_iterator(v.len(), v.iter().map(|&x| f64::from(x)))
}

impl PlantedWorld {
    pub fn generate(cfg: &PlantedConfig) -> Result<PlantedWorld> {
        let d = cfg.dim;
        if d < 6 || cfg.n_entities < 10 || cfg.words_per_category < 3 {
            return Err(Error::InvalidArgument(
                "planted world needs dim ≥ 6, ≥ 10 entities and ≥ 3 words per category".into(),
            ));
        }
        let frame = random_subspace(d, 6, cfg.seed ^ 0x5eed_f4a3)?.basis;
        let q = |j: usize| -> DVector<f64> { frame.column(j).into_owned() };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut gauss = |scale: f64| -> f64 { scale * rng.sample::<f64, _>(StandardNormal) };

        let mut entries: Vec<(String, Vec<f32>)> = Vec::new();
        let filler = |gauss: &mut dyn FnMut(f64) -> f64| DVector::from_fn(d, |_, _| gauss(1.0));
        for i in 0..cfg.vocab_size {
            entries.push((format!("w{}", letters(i, 4)), round_f32(&filler(&mut gauss))));
            if i == 9 {
                let jitter = filler(&mut gauss) * (0.3 / (d as f64).sqrt());
                entries.push(("warm".into(), round_f32(&(q(0) * 3.0 + jitter))));
            }
            if i == 19 {
                let jitter = filler(&mut gauss) * (0.3 / (d as f64).sqrt());
                entries.push(("cold".into(), round_f32(&(q(0) * -3.0 + jitter))));
            }
        }

        let offset = q(5) * 1.5;
        let mut categories = Vec::new();
        for (name, prefix, (a, b)) in [
            ("signal_words", "sigword", (0usize, 2usize)),
            ("orthogonal_words", "orthword", (3, 4)),
        ] {
            let mut words = Vec::new();
            for j in 0..cfg.words_per_category {
                let v = &offset + q(a) * gauss(2.0) + q(b) * gauss(1.0);
                let w = format!("{prefix}{}", letters(j, 2));
                entries.push((w.clone(), round_f32(&v)));
                words.push(w);
            }
            categories.push(SemanticCategory {
                name: name.into(),
                words,
            });
        }

        let mean = DVector::from_fn(d, |_, _| gauss(0.5));
        let mut entities = Vec::new();
        let mut entity_names = Vec::new();
        for i in 0..cfg.n_entities {
            let name = format!("ent{i:04}");
            let v = round_f32(&(&mean + DVector::from_fn(d, |_, _| gauss(1.0))));
            let e = widen(&v);
            let signal = SIGNAL_SCALE * e.dot(&q(0)) + gauss(cfg.noise);
            let secondary = 5.0 * e.dot(&q(1)) + 3.0;
            let control = gauss(1.0);
            entries.push((name.clone(), v));
            entities.push(Entity {
                name: name.clone(),
                values: vec![Some(signal), Some(secondary), Some(control)],
            });
            entity_names.push(name);
        }

        let store = EmbeddingStore::from_entries(entries)?;
        let table = EntityTable::new(
            vec!["signal".into(), "secondary".into(), "control".into()],
            vec![TargetMeta::default(); 3],
            entities,
        )?;
        Ok(PlantedWorld {
            store,
            table,
            categories,
            signal_direction: q(0),
            entity_names,
        })
    }

    /// Writes `embeddings.txt`, `entities.csv`, `categories/*.txt` and
    /// `exclusions/entities.txt` under `dir`.
    pub fn write_to_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let io = |p: &Path| {
            let p = p.to_path_buf();
            move |e| Error::io(p, e)
        };
        for sub in ["categories", "exclusions"] {
            let p = dir.join(sub);
            fs::create_dir_all(&p).map_err(io(&p))?;
        }
        let emb = dir.join("embeddings.txt");
        let file = fs::File::create(&emb).map_err(io(&emb))?;
        self.store.write_glove_text(file)?;

        let mut csv = String::from("name");
        for t in self.table.target_names() {
            csv.push(',');
            csv.push_str(t);
        }
        csv.push('\n');
        for e in self.table.entities() {
            csv.push_str(&e.name);
            for v in &e.values {
                csv.push(',');
                if let Some(v) = v {
                    csv.push_str(&format!("{v:?}"));
                }
            }
            csv.push('\n');
        }
        let p = dir.join("entities.csv");
        fs::write(&p, csv).map_err(io(&p))?;

        for c in &self.categories {
            let p = dir.join("categories").join(format!("{}.txt", c.name));
            fs::write(&p, c.words.join("\n") + "\n").map_err(io(&p))?;
        }
        let p = dir.join("exclusions").join("entities.txt");
        fs::write(&p, self.entity_names.join("\n") + "\n").map_err(io(&p))?;
        Ok(())
    }
}
