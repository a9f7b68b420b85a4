//! CNOT + U3 circuits: data model, unitary evaluation and analytic gradients.
//!
//! Gates are applied in list order: the circuit unitary is
//! `G_m ⋯ G_2 G_1` for gates `G_1, ..., G_m`.

mod qasm;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, ComplexMatrix, UnitaryMatrix, C64};

pub use qasm::{emit_qasm, parse_qasm};

pub type Mat2 = [[C64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gate {
    U3 { qubit: usize },
    Cnot { control: usize, target: usize },
}

impl Gate {
    pub fn num_params(&self) -> usize {
        match self {
            Gate::U3 { .. } => 3,
            Gate::Cnot { .. } => 0,
        }
    }

    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::U3 { qubit } => vec![qubit],
            Gate::Cnot { control, target } => vec![control, target],
        }
    }

    pub fn is_cnot(&self) -> bool {
        matches!(self, Gate::Cnot { .. })
    }

    /// Same gate with its qubits renamed through `map`.
    pub fn remap(&self, map: impl Fn(usize) -> usize) -> Gate {
        match *self {
            Gate::U3 { qubit } => Gate::U3 { qubit: map(qubit) },
            Gate::Cnot { control, target } => Gate::Cnot {
                control: map(control),
                target: map(target),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GatePlacement {
    pub gate: Gate,
    pub param_offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<GatePlacement>,
    params: Vec<f64>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        assert!(n_qubits > 0, "circuit needs at least one qubit");
        Self {
            n_qubits,
            gates: Vec::new(),
            params: Vec::new(),
        }
    }

    /// Build from a gate list and a matching parameter vector.
    pub fn from_gates(n_qubits: usize, gates: &[Gate], params: Vec<f64>) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidArgument("circuit needs at least one qubit".into()));
        }
        let mut circuit = Circuit::new(n_qubits);
        for &g in gates {
            circuit.push_gate(g)?;
        }
        circuit.set_params(params)?;
        Ok(circuit)
    }

    fn check_gate(&self, gate: Gate) -> Result<()> {
        for q in gate.qubits() {
            if q >= self.n_qubits {
                return Err(Error::InvalidArgument(format!(
                    "qubit {q} out of range for a {}-qubit circuit",
                    self.n_qubits
                )));
            }
        }
        if let Gate::Cnot { control, target } = gate {
            if control == target {
                return Err(Error::InvalidArgument(format!(
                    "cnot control and target are both qubit {control}"
                )));
            }
        }
        Ok(())
    }

    /// Append a gate; new U3 parameters start at zero.
    pub fn push_gate(&mut self, gate: Gate) -> Result<()> {
        self.check_gate(gate)?;
        self.gates.push(GatePlacement {
            gate,
            param_offset: self.params.len(),
        });
        self.params.extend(std::iter::repeat_n(0.0, gate.num_params()));
        Ok(())
    }

    pub fn push_u3(&mut self, qubit: usize, angles: [f64; 3]) -> Result<()> {
        self.push_gate(Gate::U3 { qubit })?;
        let n = self.params.len();
        self.params[n - 3..].copy_from_slice(&angles);
        Ok(())
    }

    pub fn push_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.push_gate(Gate::Cnot { control, target })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[GatePlacement] {
        &self.gates
    }

    pub fn gate_list(&self) -> Vec<Gate> {
        self.gates.iter().map(|p| p.gate).collect()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Dimension(format!(
                "circuit takes {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        self.params = params;
        Ok(())
    }

    pub fn with_params(&self, params: Vec<f64>) -> Result<Circuit> {
        let mut out = self.clone();
        out.set_params(params)?;
        Ok(out)
    }

    pub fn cnot_count(&self) -> usize {
        self.gates.iter().filter(|p| p.gate.is_cnot()).count()
    }

    /// Parameters of the U3 gate at `placement`.
    pub fn u3_angles(&self, placement: &GatePlacement) -> [f64; 3] {
        let o = placement.param_offset;
        [self.params[o], self.params[o + 1], self.params[o + 2]]
    }

    /// Append every gate of `other` (same width) after the gates of `self`.
    pub fn append(&mut self, other: &Circuit) -> Result<()> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::Dimension("appending circuits of different widths".into()));
        }
        for p in &other.gates {
            self.push_gate(p.gate)?;
            let n = self.params.len();
            let k = p.gate.num_params();
            self.params[n - k..].copy_from_slice(&other.params[p.param_offset..p.param_offset + k]);
        }
        Ok(())
    }

    pub fn evaluate(&self) -> UnitaryMatrix {
        evaluate_gates(self.n_qubits, &self.gates, &self.params)
    }

    /// Gradient of `1 − |Tr(target† U(θ))|/N` at the circuit's parameters.
    pub fn gradient(&self, target: &UnitaryMatrix) -> Result<Vec<f64>> {
        let eval = CostEvaluator::new(self, target)?;
        let mut grad = vec![0.0; self.num_params()];
        eval.cost_and_gradient(&self.params, &mut grad);
        Ok(grad)
    }

    pub fn cost(&self, target: &UnitaryMatrix) -> Result<f64> {
        Ok(CostEvaluator::new(self, target)?.cost(&self.params))
    }
}

/// `[[cos(θ/2), −e^{iλ}sin(θ/2)], [e^{iφ}sin(θ/2), e^{i(φ+λ)}cos(θ/2)]]`.
pub fn u3(theta: f64, phi: f64, lam: f64) -> Mat2 {
    let (s, co) = (theta / 2.0).sin_cos();
    [
        [c(co, 0.0), -C64::from_polar(s, lam)],
        [C64::from_polar(s, phi), C64::from_polar(co, phi + lam)],
    ]
}

pub fn u3_matrix(theta: f64, phi: f64, lam: f64) -> UnitaryMatrix {
    let g = u3(theta, phi, lam);
    UnitaryMatrix::from_trusted(
        ComplexMatrix::new(2, 2, vec![g[0][0], g[0][1], g[1][0], g[1][1]]).expect("2x2"),
    )
}

/// Partial derivatives of [`u3`] with respect to `(θ, φ, λ)`.
fn u3_derivatives(theta: f64, phi: f64, lam: f64) -> [Mat2; 3] {
    let (s, co) = (theta / 2.0).sin_cos();
    let i = c(0.0, 1.0);
    let zero = c(0.0, 0.0);
    let e_lam = C64::from_polar(1.0, lam);
    let e_phi = C64::from_polar(1.0, phi);
    let e_both = C64::from_polar(1.0, phi + lam);
    [
        [
            [c(-s / 2.0, 0.0), -e_lam * (co / 2.0)],
            [e_phi * (co / 2.0), -e_both * (s / 2.0)],
        ],
        [[zero, zero], [i * e_phi * s, i * e_both * co]],
        [[zero, -i * e_lam * s], [zero, i * e_both * co]],
    ]
}

fn adjoint2(g: &Mat2) -> Mat2 {
    [
        [g[0][0].conj(), g[1][0].conj()],
        [g[0][1].conj(), g[1][1].conj()],
    ]
}

/// `Σ_ab r[a][b] · e[b][a]`.
fn contract(r: &Mat2, e: &Mat2) -> C64 {
    r[0][0] * e[0][0] + r[0][1] * e[1][0] + r[1][0] * e[0][1] + r[1][1] * e[1][1]
}

pub(crate) fn evaluate_gates(n_qubits: usize, gates: &[GatePlacement], params: &[f64]) -> UnitaryMatrix {
    let mut u = ComplexMatrix::identity(1 << n_qubits);
    for p in gates {
        match p.gate {
            Gate::U3 { qubit } => {
                let o = p.param_offset;
                u.apply_1q_left(n_qubits, qubit, &u3(params[o], params[o + 1], params[o + 2]));
            }
            Gate::Cnot { control, target } => u.apply_cnot_left(n_qubits, control, target),
        }
    }
    UnitaryMatrix::from_trusted(u)
}

/// Phase-invariant cost of a fixed circuit structure against a target,
/// with its analytic gradient. Reusable across parameter vectors.
#[derive(Debug, Clone)]
pub struct CostEvaluator {
    n_qubits: usize,
    gates: Vec<GatePlacement>,
    num_params: usize,
    target: UnitaryMatrix,
    target_adj: ComplexMatrix,
}

impl CostEvaluator {
    pub fn new(structure: &Circuit, target: &UnitaryMatrix) -> Result<Self> {
        if structure.n_qubits != target.n_qubits() {
            return Err(Error::Dimension(format!(
                "{}-qubit circuit against a {}-qubit target",
                structure.n_qubits,
                target.n_qubits()
            )));
        }
        Ok(Self {
            n_qubits: structure.n_qubits,
            gates: structure.gates.clone(),
            num_params: structure.num_params(),
            target: target.clone(),
            target_adj: target.matrix().adjoint(),
        })
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn cost(&self, params: &[f64]) -> f64 {
        let u = evaluate_gates(self.n_qubits, &self.gates, params);
        let t = self.target.matrix().inner(u.matrix()).expect("shapes agree");
        1.0 - t.norm() / self.target.dim() as f64
    }

    /// Writes the gradient into `grad` and returns the cost.
    pub fn cost_and_gradient(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        let n = self.n_qubits;
        let dim = self.target.dim() as f64;
        let u = evaluate_gates(n, &self.gates, params);
        let t = self.target.matrix().inner(u.matrix()).expect("shapes agree");
        let t_abs = t.norm();
        let cost = 1.0 - t_abs / dim;
        grad.iter_mut().for_each(|g| *g = 0.0);
        if t_abs == 0.0 {
            return cost;
        }
        let t_conj = t.conj();

        // Sweep from the last gate: P holds B_k · target† · A_k where
        // B_k is the product of gates before k and A_k of gates after k.
        let mut p = u.matrix().matmul(&self.target_adj).expect("shapes agree");
        for placement in self.gates.iter().rev() {
            match placement.gate {
                Gate::U3 { qubit } => {
                    let o = placement.param_offset;
                    let (th, ph, la) = (params[o], params[o + 1], params[o + 2]);
                    let g = u3(th, ph, la);
                    p.apply_1q_left(n, qubit, &adjoint2(&g));
                    let r = p.partial_trace_to(n, qubit);
                    for (k, d) in u3_derivatives(th, ph, la).iter().enumerate() {
                        let dt = contract(&r, d);
                        grad[o + k] = -(t_conj * dt).re / (t_abs * dim);
                    }
                    p.apply_1q_right(n, qubit, &g);
                }
                Gate::Cnot { control, target } => {
                    p.apply_cnot_left(n, control, target);
                    p.apply_cnot_right(n, control, target);
                }
            }
        }
        cost
    }
}

/// Undirected coupling graph; edges are stored as `(low, high)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QubitTopology {
    n_qubits: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl QubitTopology {
    pub fn new(n_qubits: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidArgument(format!("self-loop on qubit {a}")));
            }
            if a >= n_qubits || b >= n_qubits {
                return Err(Error::InvalidArgument(format!(
                    "edge ({a},{b}) outside a {n_qubits}-qubit topology"
                )));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Self {
            n_qubits,
            edges: set,
        })
    }

    /// Path topology visiting qubits in `order`, e.g. `[0, 2, 1]` is 0–2–1.
    pub fn line(order: &[usize]) -> Result<Self> {
        Self::new(order.len(), order.windows(2).map(|w| (w[0], w[1])))
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }
}
