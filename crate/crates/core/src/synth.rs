//! Best-first search over the template tree.
//!
//! Root-start search begins at the 0-CNOT template and only appends CNOT
//! blocks. Seeded search starts from any set of templates and may also
//! remove the last CNOT block, so an over-deep seed can walk back up.
//! Nodes are ordered by `cost + depth_weight · cnot_count`, ties broken by
//! CNOT count and then template id.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::instantiate::{instantiate, InstantiationConfig, InstantiationCounter, InstantiationResult};
use crate::linalg::UnitaryMatrix;
use crate::templates::TemplateCatalog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Root,
    Seeded,
    RandomSeeded,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Root => "root",
            Strategy::Seeded => "seeded",
            Strategy::RandomSeeded => "random_seeded",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub instantiation: InstantiationConfig,
    pub depth_weight: f64,
    /// Deepest template the search may visit; `None` means the catalog's `K`.
    pub max_cnots: Option<usize>,
    pub frontier_limit: usize,
    /// Give up after instantiating this many templates.
    pub max_nodes: usize,
    /// Restrict the search to templates that fit this topology tag.
    pub topology: Option<usize>,
    pub parallel: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            instantiation: InstantiationConfig::default(),
            depth_weight: 0.01,
            max_cnots: None,
            frontier_limit: 10_000,
            max_nodes: 2_000,
            topology: None,
            parallel: true,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        self.instantiation.validate()?;
        if !(self.depth_weight >= 0.0 && self.depth_weight.is_finite()) {
            return Err(Error::InvalidArgument("depth_weight must be finite and >= 0".into()));
        }
        if self.frontier_limit == 0 || self.max_nodes == 0 {
            return Err(Error::InvalidArgument("search limits must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub circuit: Circuit,
    pub template_id: usize,
    pub cost: f64,
    pub instantiation_calls: usize,
    pub nodes_visited: usize,
    pub strategy: Strategy,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    priority: f64,
    cnots: usize,
    id: usize,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl Ord for Node {
    // reversed: BinaryHeap pops the smallest (priority, cnots, id)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .priority
            .total_cmp(&self.priority)
            .then_with(|| other.cnots.cmp(&self.cnots))
            .then_with(|| other.id.cmp(&self.id))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Per-template instantiation seed, so results do not depend on visit order.
fn node_seed(base: u64, id: usize) -> u64 {
    let mut z = base ^ (id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Search<'a> {
    target: &'a UnitaryMatrix,
    catalog: &'a TemplateCatalog,
    cfg: &'a SearchConfig,
    counter: InstantiationCounter,
    visited: HashSet<usize>,
    frontier: BinaryHeap<Node>,
    best: Option<(f64, usize)>,
    cap: usize,
}

impl<'a> Search<'a> {
    fn allowed(&self, id: usize) -> bool {
        let t = &self.catalog.templates()[id];
        t.cnot_count() <= self.cap && self.cfg.topology.is_none_or(|tag| self.catalog.is_compatible(id, tag))
    }

    fn evaluate(&self, id: usize) -> Result<InstantiationResult> {
        let inst = InstantiationConfig {
            rng_seed: node_seed(self.cfg.instantiation.rng_seed, id),
            ..self.cfg.instantiation
        };
        instantiate(self.target, &self.catalog.templates()[id], &inst, &self.counter)
    }

    fn evaluate_batch(&self, ids: &[usize]) -> Result<Vec<InstantiationResult>> {
        if self.cfg.parallel && ids.len() > 1 {
            ids.par_iter().map(|&id| self.evaluate(id)).collect()
        } else {
            ids.iter().map(|&id| self.evaluate(id)).collect()
        }
    }

    fn push(&mut self, id: usize, res: &InstantiationResult) {
        let cnots = self.catalog.templates()[id].cnot_count();
        if self.best.is_none_or(|(c, _)| res.cost < c) {
            self.best = Some((res.cost, id));
        }
        self.frontier.push(Node {
            priority: res.cost + self.cfg.depth_weight * cnots as f64,
            cnots,
            id,
        });
        if self.frontier.len() > self.cfg.frontier_limit {
            let mut keep = std::mem::take(&mut self.frontier).into_sorted_vec();
            // sorted ascending by Ord, i.e. worst first under the reversed order
            keep.drain(..keep.len() - self.cfg.frontier_limit);
            self.frontier = keep.into_iter().collect();
        }
    }

    fn finish(&self, id: usize, res: InstantiationResult, strategy: Strategy) -> Result<SynthesisResult> {
        let circuit = self.catalog.templates()[id].skeleton.with_params(res.params)?;
        Ok(SynthesisResult {
            circuit,
            template_id: id,
            cost: res.cost,
            instantiation_calls: self.counter.get(),
            nodes_visited: self.visited.len(),
            strategy,
        })
    }

    fn no_solution(&self) -> Error {
        Error::NoSolution {
            best_cost: self.best.map_or(f64::INFINITY, |b| b.0),
            best_template: self.best.map(|b| b.1),
        }
    }
}

fn run_search(
    target: &UnitaryMatrix,
    catalog: &TemplateCatalog,
    seeds: &[usize],
    parent_moves: bool,
    strategy: Strategy,
    cfg: &SearchConfig,
    metrics: Option<&InstantiationCounter>,
) -> Result<SynthesisResult> {
    cfg.validate()?;
    if target.n_qubits() != catalog.n_qubits() {
        return Err(Error::Dimension(format!(
            "{}-qubit target for a {}-qubit catalog",
            target.n_qubits(),
            catalog.n_qubits()
        )));
    }
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("no seeds given".into()));
    }
    let mut search = Search {
        target,
        catalog,
        cfg,
        counter: InstantiationCounter::new(),
        visited: HashSet::new(),
        frontier: BinaryHeap::new(),
        best: None,
        cap: cfg.max_cnots.unwrap_or(catalog.k()).min(catalog.k()),
    };
    for &id in seeds {
        catalog.get(id)?;
        if !search.allowed(id) {
            return Err(Error::InvalidArgument(format!(
                "seed template {id} is outside the search space"
            )));
        }
    }

    let outcome = (|| {
        // Seeds are tried in the order given; the first that converges wins.
        for &id in seeds {
            if !search.visited.insert(id) {
                continue;
            }
            let res = search.evaluate(id)?;
            if res.converged {
                return search.finish(id, res, strategy);
            }
            search.push(id, &res);
        }

        while let Some(node) = search.frontier.pop() {
            if search.visited.len() >= cfg.max_nodes {
                break;
            }
            let mut next: Vec<usize> = catalog.children(node.id)?.to_vec();
            if parent_moves {
                if let Some(p) = catalog.parent(node.id)? {
                    next.push(p);
                }
            }
            next.retain(|&id| search.allowed(id) && !search.visited.contains(&id));
            next.truncate(cfg.max_nodes - search.visited.len());
            if next.is_empty() {
                continue;
            }
            search.visited.extend(next.iter().copied());
            let results = search.evaluate_batch(&next)?;

            let winner = next
                .iter()
                .zip(&results)
                .filter(|(_, r)| r.converged)
                .min_by_key(|(&id, _)| (catalog.templates()[id].cnot_count(), id))
                .map(|(&id, r)| (id, r.clone()));
            if let Some((id, res)) = winner {
                return search.finish(id, res, strategy);
            }
            for (&id, res) in next.iter().zip(&results) {
                search.push(id, res);
            }
        }
        Err(search.no_solution())
    })();

    if let Some(m) = metrics {
        m.add(search.counter.get());
    }
    outcome
}

/// Root-start best-first synthesis.
pub fn synthesize(target: &UnitaryMatrix, catalog: &TemplateCatalog, cfg: &SearchConfig) -> Result<SynthesisResult> {
    run_search(target, catalog, &[catalog.root()], false, Strategy::Root, cfg, None)
}

/// [`synthesize`], also adding the instantiation calls to `metrics`.
pub fn synthesize_counted(
    target: &UnitaryMatrix,
    catalog: &TemplateCatalog,
    cfg: &SearchConfig,
    metrics: &InstantiationCounter,
) -> Result<SynthesisResult> {
    run_search(target, catalog, &[catalog.root()], false, Strategy::Root, cfg, Some(metrics))
}

/// Search starting from `seeds`, moving both down (append) and up (remove).
pub fn seeded_synthesize(
    target: &UnitaryMatrix,
    catalog: &TemplateCatalog,
    seeds: &[usize],
    cfg: &SearchConfig,
) -> Result<SynthesisResult> {
    run_search(target, catalog, seeds, true, Strategy::Seeded, cfg, None)
}

pub fn seeded_synthesize_counted(
    target: &UnitaryMatrix,
    catalog: &TemplateCatalog,
    seeds: &[usize],
    strategy: Strategy,
    cfg: &SearchConfig,
    metrics: &InstantiationCounter,
) -> Result<SynthesisResult> {
    run_search(target, catalog, seeds, true, strategy, cfg, Some(metrics))
}

/// `count` distinct ids drawn uniformly from `pool`.
pub fn random_seeds_from(pool: &[usize], count: usize, rng_seed: u64) -> Result<Vec<usize>> {
    if count == 0 {
        return Err(Error::InvalidArgument("seed count must be at least 1".into()));
    }
    if count > pool.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot draw {count} seeds from {} templates",
            pool.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    Ok(rand::seq::index::sample(&mut rng, pool.len(), count)
        .into_iter()
        .map(|i| pool[i])
        .collect())
}

pub fn random_seeds(catalog: &TemplateCatalog, count: usize, rng_seed: u64) -> Result<Vec<usize>> {
    let pool: Vec<usize> = (0..catalog.len()).collect();
    random_seeds_from(&pool, count, rng_seed)
}
