//! Splitting wide circuits into small blocks and putting them back together.
//!
//! Blocks are contiguous runs of gates touching at most `w` qubits. Each
//! block is padded to exactly `w` qubits (when the circuit is wide enough)
//! so every block can be synthesized against the same template catalog.
//!
//! The error bound is checked in the `hs_distance` metric, which is
//! subadditive under composition and unchanged by embedding into a wider
//! register: the full-circuit distance can never exceed the per-block sum.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate, QubitTopology};
use crate::error::{Error, Result};
use crate::linalg::{hs_distance, phase_invariant_distance, UnitaryMatrix, MAX_QUBITS};

pub const DEFAULT_WIDTH: usize = 3;

/// Slack allowed when comparing the exact distance against the summed bound.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    /// Global qubit indices, ascending; local qubit `i` is `qubits[i]`.
    pub qubits: Vec<usize>,
    /// Position of the block's gates in the source circuit.
    pub gate_range: Range<usize>,
    /// The block's gates on local qubits.
    pub circuit: Circuit,
    pub local_unitary: UnitaryMatrix,
}

impl Block {
    pub fn width(&self) -> usize {
        self.qubits.len()
    }

    /// Undirected CNOT edges in local indices, `(lo, hi)`.
    pub fn cnot_edges(&self) -> BTreeSet<(usize, usize)> {
        self.circuit
            .gates()
            .iter()
            .filter_map(|p| match p.gate {
                Gate::Cnot { control, target } => Some((control.min(target), control.max(target))),
                _ => None,
            })
            .collect()
    }

    /// First topology whose edges contain every CNOT edge of the block.
    /// `None` if no single topology covers them.
    pub fn topology_tag(&self, topologies: &[QubitTopology]) -> Option<usize> {
        let edges = self.cnot_edges();
        topologies.iter().position(|t| {
            t.n_qubits() == self.width() && edges.iter().all(|&(a, b)| t.contains(a, b))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedCircuit {
    pub source: Circuit,
    pub blocks: Vec<Block>,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionRecord {
    pub block_index: usize,
    pub qubits: Vec<usize>,
    pub gate_count: usize,
    pub cnot_count: usize,
}

impl PartitionedCircuit {
    pub fn report(&self) -> Vec<PartitionRecord> {
        self.blocks
            .iter()
            .enumerate()
            .map(|(i, b)| PartitionRecord {
                block_index: i,
                qubits: b.qubits.clone(),
                gate_count: b.circuit.gates().len(),
                cnot_count: b.circuit.cnot_count(),
            })
            .collect()
    }
}

/// Copy gates `range` of `c` onto a `qubits.len()`-qubit register.
fn extract(c: &Circuit, range: Range<usize>, qubits: &[usize]) -> Result<Circuit> {
    let local = |q: usize| qubits.iter().position(|&g| g == q);
    let mut out = Circuit::new(qubits.len());
    let mut params = Vec::new();
    for p in &c.gates()[range] {
        if let Some(q) = p.gate.qubits().into_iter().find(|&q| local(q).is_none()) {
            return Err(Error::InvalidArgument(format!(
                "gate on qubit {q} outside block qubits {qubits:?}"
            )));
        }
        let gate = p.gate.remap(|q| local(q).expect("checked above"));
        out.push_gate(gate)?;
        params.extend_from_slice(&c.params()[p.param_offset..p.param_offset + p.gate.num_params()]);
    }
    out.set_params(params)?;
    Ok(out)
}

/// Grow `active` to `w` qubits using the unused qubits closest to it.
fn pad(active: &BTreeSet<usize>, n_qubits: usize, w: usize) -> Vec<usize> {
    let mut set = active.clone();
    while set.len() < w.min(n_qubits) {
        let next = (0..n_qubits)
            .filter(|q| !set.contains(q))
            .min_by_key(|&q| (set.iter().map(|&s| s.abs_diff(q)).min().unwrap_or(0), q))
            .expect("free qubit exists");
        set.insert(next);
    }
    set.into_iter().collect()
}

/// Greedy left-to-right partition into contiguous blocks of at most `w` qubits.
pub fn partition(c: &Circuit, w: usize) -> Result<PartitionedCircuit> {
    if w == 0 || w > c.n_qubits() {
        return Err(Error::InvalidArgument(format!(
            "partition width {w} invalid for a {}-qubit circuit",
            c.n_qubits()
        )));
    }
    let mut spans: Vec<(Range<usize>, BTreeSet<usize>)> = Vec::new();
    let mut start = 0;
    let mut active = BTreeSet::new();
    for (i, p) in c.gates().iter().enumerate() {
        let qs = p.gate.qubits();
        if qs.len() > w {
            return Err(Error::InvalidArgument(format!(
                "gate {i} acts on {} qubits, wider than the partition width {w}",
                qs.len()
            )));
        }
        let mut joined = active.clone();
        joined.extend(qs.iter().copied());
        if joined.len() > w {
            spans.push((start..i, std::mem::take(&mut active)));
            start = i;
            active = qs.into_iter().collect();
        } else {
            active = joined;
        }
    }
    if !active.is_empty() {
        spans.push((start..c.gates().len(), active));
    }

    let blocks = spans
        .into_iter()
        .map(|(range, active)| {
            let qubits = pad(&active, c.n_qubits(), w);
            let circuit = extract(c, range.clone(), &qubits)?;
            let local_unitary = circuit.evaluate();
            Ok(Block {
                qubits,
                gate_range: range,
                circuit,
                local_unitary,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PartitionedCircuit {
        source: c.clone(),
        blocks,
        width: w,
    })
}

/// A reassembled circuit with the gate range each block landed in.
#[derive(Debug, Clone, PartialEq)]
pub struct Reassembled {
    pub circuit: Circuit,
    pub spans: Vec<Range<usize>>,
}

/// Splice `replacements` (local circuits keyed by block index) into the
/// source order; blocks without a replacement keep their original gates.
pub fn reassemble(p: &PartitionedCircuit, replacements: &BTreeMap<usize, Circuit>) -> Result<Reassembled> {
    if let Some((&i, _)) = replacements.range(p.blocks.len()..).next() {
        return Err(Error::InvalidArgument(format!("no block {i} to replace")));
    }
    let mut circuit = Circuit::new(p.source.n_qubits());
    let mut spans = Vec::with_capacity(p.blocks.len());
    for (i, block) in p.blocks.iter().enumerate() {
        let local = match replacements.get(&i) {
            Some(r) if r.n_qubits() != block.width() => {
                return Err(Error::Dimension(format!(
                    "replacement for block {i} has {} qubits, block has {}",
                    r.n_qubits(),
                    block.width()
                )))
            }
            Some(r) => r,
            None => &block.circuit,
        };
        let start = circuit.gates().len();
        let mut params = circuit.params().to_vec();
        for g in local.gates() {
            circuit.push_gate(g.gate.remap(|q| block.qubits[q]))?;
        }
        params.extend_from_slice(local.params());
        circuit.set_params(params)?;
        spans.push(start..circuit.gates().len());
    }
    Ok(Reassembled { circuit, spans })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockBound {
    pub block_index: usize,
    /// `hs_distance` between original and replacement block unitaries.
    pub distance: f64,
    /// Phase-invariant cost `1 − |Tr(U†V)|/N` of the same pair.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub circuit: String,
    /// Σ per-block `hs_distance`; bounds the exact full-circuit distance.
    pub total_bound: f64,
    /// Σ per-block phase-invariant cost.
    pub total_cost: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_cost: Option<f64>,
    pub per_block: Vec<BlockBound>,
}

/// Per-block distances and their sum. For circuits of at most 8 qubits the
/// exact full-unitary distance is computed too, and exceeding the sum (plus
/// [`BOUND_SLACK`]) is an error.
pub fn verify_bound(original: &PartitionedCircuit, optimized: &Reassembled) -> Result<VerificationReport> {
    let n = original.source.n_qubits();
    if optimized.circuit.n_qubits() != n {
        return Err(Error::Dimension(format!(
            "optimized circuit has {} qubits, original has {n}",
            optimized.circuit.n_qubits()
        )));
    }
    if optimized.spans.len() != original.blocks.len() {
        return Err(Error::InvalidArgument(format!(
            "{} spans for {} blocks",
            optimized.spans.len(),
            original.blocks.len()
        )));
    }
    let mut expected_start = 0;
    let mut per_block = Vec::with_capacity(original.blocks.len());
    for (i, (block, span)) in original.blocks.iter().zip(&optimized.spans).enumerate() {
        if span.start != expected_start || span.end < span.start || span.end > optimized.circuit.gates().len() {
            return Err(Error::InvalidArgument(format!("span {i} does not continue the previous one")));
        }
        expected_start = span.end;
        let local = extract(&optimized.circuit, span.clone(), &block.qubits)?;
        let v = local.evaluate();
        per_block.push(BlockBound {
            block_index: i,
            distance: hs_distance(&block.local_unitary, &v)?,
            cost: phase_invariant_distance(&block.local_unitary, &v)?,
        });
    }
    if expected_start != optimized.circuit.gates().len() {
        return Err(Error::InvalidArgument("spans do not cover the optimized circuit".into()));
    }
    let total_bound: f64 = per_block.iter().map(|b| b.distance).sum();
    let total_cost: f64 = per_block.iter().map(|b| b.cost).sum();

    let (exact_distance, exact_cost) = if n <= MAX_QUBITS {
        let u = original.source.evaluate();
        let v = optimized.circuit.evaluate();
        let exact = hs_distance(&u, &v)?;
        if exact > total_bound + BOUND_SLACK {
            return Err(Error::BoundViolated {
                exact,
                bound: total_bound,
            });
        }
        (Some(exact), Some(phase_invariant_distance(&u, &v)?))
    } else {
        (None, None)
    };
    Ok(VerificationReport {
        circuit: String::new(),
        total_bound,
        total_cost,
        exact_distance,
        exact_cost,
        per_block,
    })
}
