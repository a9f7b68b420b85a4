//! End-to-end optimization of partitioned circuits and the comparison
//! metrics between root-start, random-seeded and learned-seeded search.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::OpenOptions;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::{generate, Family};
use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::instantiate::InstantiationCounter;
use crate::linalg::UnitaryMatrix;
use crate::partition::{partition, reassemble, verify_bound, PartitionedCircuit, Reassembled, VerificationReport, DEFAULT_WIDTH};
use crate::recommend::{rank_templates, recommend_seeds, top_k_accuracy, AccuracyReport, LabeledUnitary, Mlp, SourceCircuit};
use crate::synth::{random_seeds_from, seeded_synthesize_counted, synthesize_counted, SearchConfig, Strategy, SynthesisResult};
use crate::templates::TemplateCatalog;

pub const CSV_HEADER: &str = "block,strategy,instantiation_calls,cnot_before,cnot_after,cost,wall_time_s";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedStrategy {
    Root,
    Random,
    Learned,
}

impl SeedStrategy {
    pub const ALL: [SeedStrategy; 3] = [SeedStrategy::Root, SeedStrategy::Random, SeedStrategy::Learned];

    pub fn name(self) -> &'static str {
        match self {
            SeedStrategy::Root => "root",
            SeedStrategy::Random => "random",
            SeedStrategy::Learned => "learned",
        }
    }
}

impl fmt::Display for SeedStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SeedStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SeedStrategy::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown strategy '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMetrics {
    pub block: usize,
    pub strategy: SeedStrategy,
    pub instantiation_calls: usize,
    pub cnot_before: usize,
    pub cnot_after: usize,
    pub cost: f64,
    pub wall_time_s: f64,
    #[serde(default)]
    pub failed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub rows: Vec<BlockMetrics>,
}

impl RunMetrics {
    pub fn for_strategy(&self, s: SeedStrategy) -> RunMetrics {
        RunMetrics {
            rows: self.rows.iter().filter(|r| r.strategy == s).cloned().collect(),
        }
    }

    pub fn total_calls(&self) -> usize {
        self.rows.iter().map(|r| r.instantiation_calls).sum()
    }

    pub fn mean_calls(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.total_calls() as f64 / self.rows.len() as f64
    }

    /// `Σ cnot_after / Σ cnot_before`; `None` when there were no CNOTs before.
    pub fn relative_cnot_ratio(&self) -> Option<f64> {
        let before: usize = self.rows.iter().map(|r| r.cnot_before).sum();
        let after: usize = self.rows.iter().map(|r| r.cnot_after).sum();
        (before > 0).then(|| after as f64 / before as f64)
    }

    /// Mean root-start calls divided by this run's mean calls.
    pub fn speedup_vs(&self, root: &RunMetrics) -> Option<f64> {
        let mine = self.mean_calls();
        (mine > 0.0).then(|| root.mean_calls() / mine)
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.failed).count()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&csv_row(r));
        }
        s
    }

    /// Append rows to `path`, writing the header only when the file is new or empty.
    pub fn append_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let mut out = BufWriter::new(OpenOptions::new().create(true).append(true).open(path)?);
        if fresh {
            writeln!(out, "{CSV_HEADER}")?;
        }
        for r in &self.rows {
            out.write_all(csv_row(r).as_bytes())?;
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_row(r: &BlockMetrics) -> String {
    format!(
        "{},{},{},{},{},{:.6e},{:.6}\n",
        r.block, r.strategy, r.instantiation_calls, r.cnot_before, r.cnot_after, r.cost, r.wall_time_s
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOptions {
    pub search: SearchConfig,
    pub strategy: SeedStrategy,
    pub seeds_per_block: usize,
    pub seed: u64,
    /// Worker threads; 0 uses rayon's default.
    pub jobs: usize,
    /// Record wall-clock times; off by default so outputs are reproducible.
    pub timing: bool,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            search: SearchConfig::default(),
            strategy: SeedStrategy::Root,
            seeds_per_block: 3,
            seed: 0,
            jobs: 0,
            timing: false,
        }
    }
}

fn mix(seed: u64, i: usize) -> u64 {
    let mut z = seed.wrapping_add((i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Outcome of resynthesizing one block.
#[derive(Debug)]
pub struct BlockOutcome {
    pub result: Result<SynthesisResult>,
    pub metrics: BlockMetrics,
}

/// Synthesize one block unitary with `strategy`, searching within `tag`.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_block(
    index: usize,
    target: &UnitaryMatrix,
    tag: Option<usize>,
    cnot_before: usize,
    catalog: &TemplateCatalog,
    model: Option<&Mlp>,
    opts: &OptimizeOptions,
) -> BlockOutcome {
    let start = Instant::now();
    let counter = InstantiationCounter::new();
    let search = SearchConfig {
        topology: tag,
        instantiation: crate::instantiate::InstantiationConfig {
            rng_seed: opts.seed,
            ..opts.search.instantiation
        },
        ..opts.search
    };
    let result = (|| match opts.strategy {
        SeedStrategy::Root => synthesize_counted(target, catalog, &search, &counter),
        SeedStrategy::Random => {
            let pool = match tag {
                Some(t) => catalog.ids_for_topology(t),
                None => (0..catalog.len()).collect(),
            };
            let seeds = random_seeds_from(&pool, opts.seeds_per_block.min(pool.len()), mix(opts.seed, index))?;
            seeded_synthesize_counted(target, catalog, &seeds, Strategy::RandomSeeded, &search, &counter)
        }
        SeedStrategy::Learned => {
            let model = model.ok_or_else(|| Error::Model("learned strategy needs a model".into()))?;
            if model.catalog_size != catalog.len() {
                return Err(Error::Model(format!(
                    "model was trained for {} templates, catalog has {}",
                    model.catalog_size,
                    catalog.len()
                )));
            }
            let k = opts.seeds_per_block.min(model.candidates(tag)?.len());
            let seeds = recommend_seeds(model, target, tag, k)?;
            seeded_synthesize_counted(target, catalog, &seeds, Strategy::Seeded, &search, &counter)
        }
    })();
    let (cnot_after, cost, failed) = match &result {
        Ok(r) => (r.circuit.cnot_count(), r.cost, false),
        Err(Error::NoSolution { best_cost, .. }) => (cnot_before, *best_cost, true),
        Err(_) => (cnot_before, f64::NAN, true),
    };
    BlockOutcome {
        result,
        metrics: BlockMetrics {
            block: index,
            strategy: opts.strategy,
            instantiation_calls: counter.get(),
            cnot_before,
            cnot_after,
            cost,
            wall_time_s: if opts.timing { start.elapsed().as_secs_f64() } else { 0.0 },
            failed,
        },
    }
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    pub partitioned: PartitionedCircuit,
    pub optimized: Reassembled,
    pub metrics: RunMetrics,
    pub verification: VerificationReport,
}

impl OptimizeOutcome {
    pub fn circuit(&self) -> &Circuit {
        &self.optimized.circuit
    }
}

/// Partition width used for an `n`-qubit circuit.
pub fn block_width(n_qubits: usize) -> usize {
    n_qubits.min(DEFAULT_WIDTH)
}

/// Partition → resynthesize every block → reassemble → verify the bound.
/// Blocks keep their original gates when synthesis fails (flagged in the
/// metrics) or when the result has more CNOTs than the original; the
/// metrics always report the synthesized CNOT count.
pub fn optimize_circuit(
    circuit: &Circuit,
    catalog: &TemplateCatalog,
    model: Option<&Mlp>,
    opts: &OptimizeOptions,
) -> Result<OptimizeOutcome> {
    let w = catalog.n_qubits();
    if w != block_width(circuit.n_qubits()) {
        return Err(Error::Dimension(format!(
            "{}-qubit catalog cannot serve a {}-qubit circuit",
            w,
            circuit.n_qubits()
        )));
    }
    if opts.strategy == SeedStrategy::Learned && model.is_none() {
        return Err(Error::Model("learned strategy needs a model".into()));
    }
    let partitioned = partition(circuit, w)?;
    let outcomes: Vec<BlockOutcome> = with_pool(opts.jobs, || {
        partitioned
            .blocks
            .par_iter()
            .enumerate()
            .map(|(i, b)| {
                let tag = b.topology_tag(catalog.topologies());
                synthesize_block(i, &b.local_unitary, tag, b.circuit.cnot_count(), catalog, model, opts)
            })
            .collect()
    })?;
    let mut replacements = BTreeMap::new();
    let mut metrics = RunMetrics::default();
    for (i, o) in outcomes.into_iter().enumerate() {
        // a block is only replaced when resynthesis does not add CNOTs
        if let Ok(r) = o.result {
            if r.circuit.cnot_count() <= o.metrics.cnot_before {
                replacements.insert(i, r.circuit);
            }
        }
        metrics.rows.push(o.metrics);
    }
    let optimized = reassemble(&partitioned, &replacements)?;
    let verification = verify_bound(&partitioned, &optimized)?;
    Ok(OptimizeOutcome {
        partitioned,
        optimized,
        metrics,
        verification,
    })
}

/// A family/width grid of benchmark circuits for dataset generation.
/// `variants` random instances are drawn per TFIM and random-layer width.
pub fn benchmark_suite(widths: &[usize], variants: usize, seed: u64) -> Result<Vec<SourceCircuit>> {
    let mut out = Vec::new();
    for family in Family::ALL {
        for &width in widths {
            let count = if family == Family::Qft { 1 } else { variants };
            for v in 0..count {
                let s = mix(seed, out.len());
                let depth = match family {
                    Family::Qft => 1,
                    Family::Tfim => 1 + v % 3,
                    Family::RandomLayers => 2 * width,
                };
                out.push(SourceCircuit {
                    circuit: generate(family, width, depth, s)?,
                    family: family.name().into(),
                    width,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub top1: AccuracyReport,
    pub top3: AccuracyReport,
    pub metrics: RunMetrics,
}

impl EvalReport {
    pub fn strategy(&self, s: SeedStrategy) -> RunMetrics {
        self.metrics.for_strategy(s)
    }
}

/// Accuracy of `model` on `samples` plus per-strategy synthesis metrics
/// over the same blocks. Strategies without a model skip `learned`.
pub fn evaluate_holdout(
    samples: &[LabeledUnitary],
    catalog: &TemplateCatalog,
    model: &Mlp,
    strategies: &[SeedStrategy],
    opts: &OptimizeOptions,
) -> Result<EvalReport> {
    let top1 = top_k_accuracy(model, samples, 1)?;
    let top3 = top_k_accuracy(model, samples, 3)?;
    let targets: Vec<UnitaryMatrix> = samples.iter().map(|s| s.unitary()).collect::<Result<_>>()?;
    let mut metrics = RunMetrics::default();
    for &strategy in strategies {
        let o = OptimizeOptions { strategy, ..*opts };
        let rows: Vec<BlockMetrics> = with_pool(opts.jobs, || {
            samples
                .par_iter()
                .zip(&targets)
                .enumerate()
                .map(|(i, (s, u))| {
                    synthesize_block(i, u, Some(s.topology_tag), s.block_cnots, catalog, Some(model), &o).metrics
                })
                .collect()
        })?;
        metrics.rows.extend(rows);
    }
    Ok(EvalReport { top1, top3, metrics })
}

/// Rank of each sample's label under the model (0 = top-1).
pub fn label_ranks(model: &Mlp, samples: &[LabeledUnitary]) -> Result<Vec<usize>> {
    samples
        .iter()
        .map(|s| {
            let ranked = rank_templates(model, &s.features, Some(s.topology_tag))?;
            Ok(ranked.iter().position(|(id, _)| *id == s.template_id).unwrap_or(ranked.len()))
        })
        .collect()
}
