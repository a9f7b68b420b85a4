//! Small benchmark circuits: QFT, transverse-field Ising Trotter steps, and
//! seeded random CNOT+U3 layers.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::linalg::MAX_QUBITS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Qft,
    Tfim,
    RandomLayers,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Qft, Family::Tfim, Family::RandomLayers];

    pub fn name(self) -> &'static str {
        match self {
            Family::Qft => "qft",
            Family::Tfim => "tfim",
            Family::RandomLayers => "random_layers",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown benchmark family '{s}'")))
    }
}

fn check_width(width: usize) -> Result<()> {
    if width == 0 || width > MAX_QUBITS {
        return Err(Error::InvalidArgument(format!(
            "benchmark width must be in 1..={MAX_QUBITS}, got {width}"
        )));
    }
    Ok(())
}

fn hadamard(c: &mut Circuit, q: usize) -> Result<()> {
    c.push_u3(q, [FRAC_PI_2, 0.0, PI])
}

fn phase(c: &mut Circuit, q: usize, lam: f64) -> Result<()> {
    c.push_u3(q, [0.0, 0.0, lam])
}

/// Controlled phase `diag(1, 1, 1, e^{iλ})` from two CNOTs.
fn controlled_phase(c: &mut Circuit, ctrl: usize, tgt: usize, lam: f64) -> Result<()> {
    phase(c, ctrl, lam / 2.0)?;
    c.push_cnot(ctrl, tgt)?;
    phase(c, tgt, -lam / 2.0)?;
    c.push_cnot(ctrl, tgt)?;
    phase(c, tgt, lam / 2.0)
}

fn swap(c: &mut Circuit, a: usize, b: usize) -> Result<()> {
    c.push_cnot(a, b)?;
    c.push_cnot(b, a)?;
    c.push_cnot(a, b)
}

/// Quantum Fourier transform; evaluates exactly to the DFT matrix
/// `F[x][y] = ω^{xy}/√N` with qubit 0 as the most significant bit.
pub fn qft(width: usize) -> Result<Circuit> {
    check_width(width)?;
    let mut c = Circuit::new(width);
    for j in 0..width {
        hadamard(&mut c, j)?;
        for k in j + 1..width {
            controlled_phase(&mut c, k, j, PI / (1u64 << (k - j)) as f64)?;
        }
    }
    for q in 0..width / 2 {
        swap(&mut c, q, width - 1 - q)?;
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TfimParams {
    pub coupling: f64,
    pub field: f64,
    pub dt: f64,
}

impl Default for TfimParams {
    fn default() -> Self {
        Self {
            coupling: 1.0,
            field: 1.0,
            dt: 0.1,
        }
    }
}

/// First-order Trotter steps of `H = −J Σ Z_i Z_{i+1} − h Σ X_i` on a line.
/// Each qubit's X rotation is emitted right after its last ZZ term of the
/// step, which keeps neighbouring gates together for partitioning.
pub fn tfim(width: usize, steps: usize, p: TfimParams) -> Result<Circuit> {
    check_width(width)?;
    // RX(θ) = U3(θ, −π/2, π/2)
    let rx = [-2.0 * p.field * p.dt, -FRAC_PI_2, FRAC_PI_2];
    let mut c = Circuit::new(width);
    for _ in 0..steps {
        for q in 0..width - 1 {
            c.push_cnot(q, q + 1)?;
            phase(&mut c, q + 1, -2.0 * p.coupling * p.dt)?;
            c.push_cnot(q, q + 1)?;
            c.push_u3(q, rx)?;
        }
        c.push_u3(width - 1, rx)?;
    }
    Ok(c)
}

/// Random layers. Each layer picks a window of up to three neighbouring
/// qubits, applies random U3s to it, then two CNOTs of random orientation on
/// random neighbouring pairs in the window, each followed by U3s.
pub fn random_layers(width: usize, layers: usize, seed: u64) -> Result<Circuit> {
    check_width(width)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = Circuit::new(width);
    let span = width.min(3);
    for _ in 0..layers {
        let lo = rng.random_range(0..=width - span);
        for q in lo..lo + span {
            let a = [rng.random_range(-PI..PI), rng.random_range(-PI..PI), rng.random_range(-PI..PI)];
            c.push_u3(q, a)?;
        }
        if span < 2 {
            continue;
        }
        for _ in 0..2 {
            let q = lo + rng.random_range(0..span - 1);
            let (a, b) = if rng.random_bool(0.5) { (q, q + 1) } else { (q + 1, q) };
            c.push_cnot(a, b)?;
            for t in [a, b] {
                let ang = [rng.random_range(-PI..PI), rng.random_range(-PI..PI), rng.random_range(-PI..PI)];
                c.push_u3(t, ang)?;
            }
        }
    }
    Ok(c)
}

/// One circuit of `family`. `depth` is the Trotter step or layer count
/// (ignored for QFT); `seed` drives the random family and the TFIM
/// parameters when nonzero.
pub fn generate(family: Family, width: usize, depth: usize, seed: u64) -> Result<Circuit> {
    match family {
        Family::Qft => qft(width),
        Family::Tfim => {
            let p = if seed == 0 {
                TfimParams::default()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                TfimParams {
                    coupling: rng.random_range(0.5..1.5),
                    field: rng.random_range(0.5..1.5),
                    dt: rng.random_range(0.05..0.3),
                }
            };
            tfim(width, depth, p)
        }
        Family::RandomLayers => random_layers(width, depth, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Gate;
    use crate::linalg::{c, ComplexMatrix};

    fn dft(n: usize) -> ComplexMatrix {
        let dim = 1usize << n;
        let norm = 1.0 / (dim as f64).sqrt();
        ComplexMatrix::from_fn(dim, dim, |x, y| {
            let a = 2.0 * PI * ((x * y) % dim) as f64 / dim as f64;
            c(a.cos() * norm, a.sin() * norm)
        })
    }

    #[test]
    fn qft_is_dft() {
        for n in 1..=4 {
            let u = qft(n).unwrap().evaluate();
            assert!(u.matrix().max_abs_diff(&dft(n)).unwrap() < 1e-9, "width {n}");
        }
    }

    #[test]
    fn qft_width_one_is_hadamard() {
        let c = qft(1).unwrap();
        assert_eq!(c.gate_list(), vec![Gate::U3 { qubit: 0 }]);
        assert_eq!(c.params(), &[FRAC_PI_2, 0.0, PI]);
    }

    #[test]
    fn tfim_scales_with_steps() {
        let p = TfimParams::default();
        let one = tfim(4, 1, p).unwrap();
        assert_eq!(one.cnot_count(), 6);
        for s in 2..5 {
            let c = tfim(4, s, p).unwrap();
            assert_eq!(c.gates().len(), s * one.gates().len());
        }
    }

    #[test]
    fn tfim_zero_time_is_identity() {
        let c = tfim(3, 2, TfimParams { dt: 0.0, ..Default::default() }).unwrap();
        let d = c.evaluate().matrix().max_abs_diff(&ComplexMatrix::identity(8)).unwrap();
        assert!(d < 1e-12);
    }

    #[test]
    fn random_layers_deterministic() {
        assert_eq!(random_layers(5, 6, 3).unwrap(), random_layers(5, 6, 3).unwrap());
        assert_ne!(random_layers(5, 6, 3).unwrap(), random_layers(5, 6, 4).unwrap());
        assert_eq!(random_layers(1, 3, 0).unwrap().cnot_count(), 0);
    }

    #[test]
    fn family_names_round_trip() {
        for f in Family::ALL {
            assert_eq!(f.name().parse::<Family>().unwrap(), f);
        }
        assert!("shor".parse::<Family>().is_err());
        assert!(generate(Family::Qft, 0, 1, 0).is_err());
        assert!(generate(Family::Tfim, MAX_QUBITS + 1, 1, 0).is_err());
    }
}
