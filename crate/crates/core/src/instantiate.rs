//! Instantiation: fit a template's U3 angles to a target unitary.
//!
//! Minimizes `1 − |Tr(U_T† U(θ))|/N` with multi-start L-BFGS. Every call to
//! [`instantiate`] is recorded on an [`InstantiationCounter`]; that count is
//! the hardware-independent cost metric of a synthesis run.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, CostEvaluator};
use crate::error::{Error, Result};
use crate::linalg::UnitaryMatrix;
use crate::templates::Template;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstantiationConfig {
    /// Success threshold on the phase-invariant distance.
    pub epsilon: f64,
    pub max_restarts: usize,
    pub max_iterations: usize,
    pub rng_seed: u64,
}

impl Default for InstantiationConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-8,
            max_restarts: 8,
            max_iterations: 1000,
            rng_seed: 0,
        }
    }
}

impl InstantiationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidArgument("epsilon must be positive".into()));
        }
        if self.max_restarts == 0 || self.max_iterations == 0 {
            return Err(Error::InvalidArgument("restart and iteration limits must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstantiationResult {
    pub params: Vec<f64>,
    pub cost: f64,
    pub converged: bool,
    /// Optimizer iterations summed over restarts.
    pub iterations: usize,
    pub restarts_used: usize,
}

/// Shared tally of instantiation calls.
#[derive(Debug, Default)]
pub struct InstantiationCounter(AtomicUsize);

impl InstantiationCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }

    pub fn add(&self, n: usize) {
        self.0.fetch_add(n, Ordering::Relaxed);
    }

    pub fn get(&self) -> usize {
        self.0.load(Ordering::Relaxed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    pub max_iterations: usize,
    /// Stop as soon as the cost falls to this value.
    pub target_cost: f64,
    pub gradient_tol: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iterations: 1000,
            target_cost: f64::NEG_INFINITY,
            gradient_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
}

const HISTORY: usize = 10;
const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 50;
/// Consecutive negligible-progress iterations before giving up.
const STALL_LIMIT: usize = 5;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_finite(f: f64, g: &[f64]) -> Result<()> {
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite cost or gradient".into()));
    }
    Ok(())
}

/// L-BFGS with Armijo backtracking. `objective(x, grad)` fills `grad` and
/// returns the cost. Accepted steps never increase the cost.
pub fn minimize<F>(mut objective: F, x0: &[f64], opts: &MinimizeOptions) -> Result<Minimum>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite starting point".into()));
    }
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut f = objective(&x, &mut g);
    check_finite(f, &g)?;

    let mut s_hist: VecDeque<Vec<f64>> = VecDeque::with_capacity(HISTORY);
    let mut y_hist: VecDeque<Vec<f64>> = VecDeque::with_capacity(HISTORY);
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut iterations = 0;
    let mut stalled = 0;

    while iterations < opts.max_iterations {
        if f <= opts.target_cost || dot(&g, &g).sqrt() <= opts.gradient_tol || n == 0 {
            break;
        }
        iterations += 1;

        // two-loop recursion: d = −H·g
        d.copy_from_slice(&g);
        let mut alphas = Vec::with_capacity(s_hist.len());
        for (s, y) in s_hist.iter().zip(&y_hist).rev() {
            let a = dot(s, &d) / dot(y, s);
            d.iter_mut().zip(y).for_each(|(di, yi)| *di -= a * yi);
            alphas.push(a);
        }
        if let (Some(s), Some(y)) = (s_hist.back(), y_hist.back()) {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|di| *di *= gamma);
        }
        for ((s, y), a) in s_hist.iter().zip(&y_hist).zip(alphas.iter().rev()) {
            let b = dot(y, &d) / dot(y, s);
            d.iter_mut().zip(s).for_each(|(di, si)| *di += (a - b) * si);
        }
        d.iter_mut().for_each(|di| *di = -*di);

        let mut slope = dot(&g, &d);
        if slope >= 0.0 || !slope.is_finite() {
            s_hist.clear();
            y_hist.clear();
            d.iter_mut().zip(&g).for_each(|(di, gi)| *di = -gi);
            slope = dot(&g, &d);
        }

        let mut step = if s_hist.is_empty() {
            (1.0 / dot(&g, &g).sqrt()).min(1.0)
        } else {
            1.0
        };
        let mut f_new = f;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            x_new.iter_mut().zip(&x).zip(&d).for_each(|((xn, xi), di)| *xn = xi + step * di);
            f_new = objective(&x_new, &mut g_new);
            check_finite(f_new, &g_new)?;
            if f_new <= f + ARMIJO_C1 * step * slope {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            if s_hist.is_empty() {
                break;
            }
            s_hist.clear();
            y_hist.clear();
            continue;
        }

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        if dot(&s, &y) > 1e-16 * dot(&y, &y).max(1e-300) {
            if s_hist.len() == HISTORY {
                s_hist.pop_front();
                y_hist.pop_front();
            }
            s_hist.push_back(s);
            y_hist.push_back(y);
        }

        let progress = f - f_new;
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        f = f_new;

        if progress <= 1e-13 * (1.0 + f.abs()) {
            stalled += 1;
            if stalled >= STALL_LIMIT {
                break;
            }
        } else {
            stalled = 0;
        }
    }
    Ok(Minimum {
        x,
        cost: f,
        iterations,
    })
}

/// Fit `structure`'s parameters to `target`. The first start is all zeros,
/// later starts are uniform in `[−π, π)`. Stops at the first converged start.
pub fn instantiate_circuit(
    target: &UnitaryMatrix,
    structure: &Circuit,
    cfg: &InstantiationConfig,
    counter: &InstantiationCounter,
) -> Result<InstantiationResult> {
    cfg.validate()?;
    let eval = CostEvaluator::new(structure, target)?;
    counter.record();

    let m = eval.num_params();
    let opts = MinimizeOptions {
        max_iterations: cfg.max_iterations,
        target_cost: cfg.epsilon / 10.0,
        gradient_tol: 1e-10,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut best: Option<Minimum> = None;
    let mut iterations = 0;
    let mut restarts_used = 0;
    for restart in 0..cfg.max_restarts {
        let x0: Vec<f64> = if restart == 0 {
            vec![0.0; m]
        } else {
            (0..m).map(|_| rng.random_range(-PI..PI)).collect()
        };
        let run = minimize(|x, g| eval.cost_and_gradient(x, g), &x0, &opts)?;
        iterations += run.iterations;
        restarts_used += 1;
        if best.as_ref().is_none_or(|b| run.cost < b.cost) {
            best = Some(run);
        }
        if best.as_ref().is_some_and(|b| b.cost <= cfg.epsilon) {
            break;
        }
    }
    let best = best.expect("at least one restart");
    let cost = best.cost.max(0.0);
    Ok(InstantiationResult {
        params: best.x,
        cost,
        converged: cost <= cfg.epsilon,
        iterations,
        restarts_used,
    })
}

pub fn instantiate(
    target: &UnitaryMatrix,
    template: &Template,
    cfg: &InstantiationConfig,
    counter: &InstantiationCounter,
) -> Result<InstantiationResult> {
    instantiate_circuit(target, &template.skeleton, cfg, counter)
}
