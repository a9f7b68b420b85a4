//! Learned seed recommendation: labelled block datasets, the MLP
//! recommender, and explained-variance analysis.

mod mlp;
mod pca;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use mlp::{softmax, Layer, Mlp, Objective, TrainConfig, TrainReport, BOTTLENECK, HIDDEN, MODEL_VERSION};
pub use pca::{pca_explained_variance, PcaReport};

use crate::canonical::{canonicalize, feature_vector};
use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::linalg::UnitaryMatrix;
use crate::partition::partition;
use crate::synth::{synthesize, SearchConfig};
use crate::templates::TemplateCatalog;

/// Length of a 3-qubit feature vector.
pub const FEATURE_DIM: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledUnitary {
    /// Interleaved real/imaginary parts of the canonical block unitary.
    pub features: Vec<f64>,
    pub template_id: usize,
    pub topology_tag: usize,
    pub family: String,
    pub width: usize,
    /// CNOTs in the block before resynthesis.
    pub block_cnots: usize,
}

impl LabeledUnitary {
    /// The canonical block unitary the features were taken from.
    pub fn unitary(&self) -> Result<UnitaryMatrix> {
        crate::canonical::matrix_from_features(&self.features)
    }
}

/// A circuit to mine for blocks, tagged with its family and width.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceCircuit {
    pub circuit: Circuit,
    pub family: String,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockFailure {
    pub circuit: usize,
    pub block: Option<usize>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<LabeledUnitary>,
    pub failures: Vec<BlockFailure>,
    pub blocks_total: usize,
}

/// Partition each circuit, canonicalize every block and label it with the
/// template found by root-start synthesis. Blocks whose CNOT edges fit a
/// topology are searched within it; blocks that fail are skipped and
/// reported.
pub fn generate_dataset(circuits: &[SourceCircuit], catalog: &TemplateCatalog, cfg: &SearchConfig) -> Result<Dataset> {
    cfg.validate()?;
    let w = catalog.n_qubits();
    let mut failures = Vec::new();
    let mut jobs = Vec::new();
    for (ci, src) in circuits.iter().enumerate() {
        match partition(&src.circuit, w) {
            Ok(p) => jobs.extend(p.blocks.into_iter().enumerate().map(|(bi, b)| (ci, bi, b))),
            Err(e) => {
                warn!("circuit {ci} skipped: {e}");
                failures.push(BlockFailure {
                    circuit: ci,
                    block: None,
                    reason: e.to_string(),
                });
            }
        }
    }
    let blocks_total = jobs.len();
    let label = |ci: usize, block: &crate::partition::Block| -> Result<LabeledUnitary> {
        let tag = block.topology_tag(catalog.topologies());
        let search = SearchConfig { topology: tag, ..*cfg };
        let found = synthesize(&block.local_unitary, catalog, &search)?;
        let src = &circuits[ci];
        Ok(LabeledUnitary {
            features: feature_vector(&canonicalize(&block.local_unitary)),
            template_id: found.template_id,
            topology_tag: tag.unwrap_or(catalog.templates()[found.template_id].topology),
            family: src.family.clone(),
            width: src.width,
            block_cnots: block.circuit.cnot_count(),
        })
    };
    let results: Vec<_> = jobs
        .par_iter()
        .map(|(ci, bi, block)| label(*ci, block).map_err(|e| (*ci, *bi, e)))
        .collect();
    let mut samples = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(s) => samples.push(s),
            Err((ci, bi, e)) => {
                warn!("circuit {ci} block {bi} skipped: {e}");
                failures.push(BlockFailure {
                    circuit: ci,
                    block: Some(bi),
                    reason: e.to_string(),
                });
            }
        }
    }
    Ok(Dataset {
        samples,
        failures,
        blocks_total,
    })
}

pub fn write_dataset(path: impl AsRef<Path>, samples: &[LabeledUnitary]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for s in samples {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<LabeledUnitary>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Split off every sample whose `(family, width)` is listed in `holdout`.
pub fn split_holdout(samples: &[LabeledUnitary], holdout: &[(String, usize)]) -> (Vec<LabeledUnitary>, Vec<LabeledUnitary>) {
    samples
        .iter()
        .cloned()
        .partition(|s| !holdout.iter().any(|(f, w)| *f == s.family && *w == s.width))
}

/// Random `(train, test)` split with `fraction` of the samples in test.
pub fn split_fraction(samples: &[LabeledUnitary], fraction: f64, seed: u64) -> Result<(Vec<LabeledUnitary>, Vec<LabeledUnitary>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument("holdout fraction must be in (0, 1)".into()));
    }
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = (samples.len() as f64 * fraction).round() as usize;
    let (test, train) = idx.split_at(n_test);
    let pick = |ids: &[usize]| {
        let mut ids = ids.to_vec();
        ids.sort_unstable();
        ids.into_iter().map(|i| samples[i].clone()).collect()
    };
    Ok((pick(train), pick(test)))
}

/// Pretrain as a denoising autoencoder, then fit the template head.
pub fn train_recommender(
    samples: &[LabeledUnitary],
    catalog: &TemplateCatalog,
    cfg: &TrainConfig,
) -> Result<(Mlp, TrainReport, TrainReport)> {
    let mut model = Mlp::new(FEATURE_DIM, catalog, cfg.rng_seed);
    let pre = model.pretrain_denoise(samples, cfg)?;
    let fine = model.finetune(samples, cfg)?;
    Ok((model, pre, fine))
}

/// Ids ranked by model confidence, best first; ties go to the lower id.
pub fn rank_templates(model: &Mlp, features: &[f64], tag: Option<usize>) -> Result<Vec<(usize, f64)>> {
    if !model.trained {
        return Err(Error::Model("model has not been trained".into()));
    }
    let mut p = model.probabilities(features, tag)?;
    p.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(p)
}

/// Top-`k` seed templates for `u` among the templates of `tag` (all
/// templates when `None`).
pub fn recommend_seeds(model: &Mlp, u: &UnitaryMatrix, tag: Option<usize>, k: usize) -> Result<Vec<usize>> {
    let features = feature_vector(&canonicalize(u));
    let ranked = rank_templates(model, &features, tag)?;
    if k == 0 || k > ranked.len() {
        return Err(Error::InvalidArgument(format!(
            "k must be in 1..={}, got {k}",
            ranked.len()
        )));
    }
    Ok(ranked.into_iter().take(k).map(|(id, _)| id).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub k: usize,
    pub samples: usize,
    /// Fraction of samples whose label is in the top `k`.
    pub accuracy: f64,
    /// `(tag, accuracy, count)` for every tag present.
    pub per_tag: Vec<(usize, f64, usize)>,
    /// Expected accuracy of `k` uniform guesses over the whole catalog.
    pub chance: f64,
    /// Expected accuracy of `k` uniform guesses within each sample's tag.
    pub masked_chance: f64,
}

pub fn top_k_accuracy(model: &Mlp, samples: &[LabeledUnitary], k: usize) -> Result<AccuracyReport> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples to evaluate".into()));
    }
    let mut per_tag = vec![(0usize, 0usize); model.n_tags];
    let mut masked_chance = 0.0;
    for s in samples {
        let ranked = rank_templates(model, &s.features, Some(s.topology_tag))?;
        let hit = ranked.iter().take(k).any(|(id, _)| *id == s.template_id);
        let e = &mut per_tag[s.topology_tag];
        e.0 += hit as usize;
        e.1 += 1;
        masked_chance += (k as f64 / ranked.len() as f64).min(1.0);
    }
    let hits: usize = per_tag.iter().map(|e| e.0).sum();
    Ok(AccuracyReport {
        k,
        samples: samples.len(),
        accuracy: hits as f64 / samples.len() as f64,
        per_tag: per_tag
            .iter()
            .enumerate()
            .filter(|(_, e)| e.1 > 0)
            .map(|(t, e)| (t, e.0 as f64 / e.1 as f64, e.1))
            .collect(),
        chance: (k as f64 / model.catalog_size as f64).min(1.0),
        masked_chance: masked_chance / samples.len() as f64,
    })
}

pub fn save_model(path: impl AsRef<Path>, model: &Mlp) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, model)?;
    out.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Mlp> {
    let model: Mlp = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    if model.version != MODEL_VERSION {
        return Err(Error::Model(format!("unsupported model version {}", model.version)));
    }
    Ok(model)
}
