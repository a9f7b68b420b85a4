//! Explained-variance analysis of feature sets.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaReport {
    /// Per-component variance ratios, descending.
    pub ratios: Vec<f64>,
    /// Running sums of `ratios`.
    pub cumulative: Vec<f64>,
    pub total_variance: f64,
    /// All samples identical: ratios are zero and carry no direction.
    pub degenerate: bool,
}

impl PcaReport {
    /// Cumulative ratio after `k` components (`k ≥ 1`).
    pub fn cumulative_at(&self, k: usize) -> f64 {
        match k {
            0 => 0.0,
            k => self.cumulative[(k - 1).min(self.cumulative.len() - 1)],
        }
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "component_index,cumulative_ratio")?;
        for (i, c) in self.cumulative.iter().enumerate() {
            writeln!(out, "{},{:.12}", i + 1, c)?;
        }
        Ok(())
    }
}

/// Mean-centre, eigendecompose the sample covariance, and return the
/// variance ratios sorted in descending order.
pub fn pca_explained_variance(features: &[Vec<f64>]) -> Result<PcaReport> {
    if features.len() < 2 {
        return Err(Error::InvalidArgument("PCA needs at least two samples".into()));
    }
    let d = features[0].len();
    if d == 0 || features.iter().any(|f| f.len() != d) {
        return Err(Error::Dimension("PCA samples must share a nonzero length".into()));
    }
    let n = features.len();
    let x = DMatrix::from_fn(n, d, |i, j| features[i][j]);
    let mean = x.row_mean();
    let centred = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
    let cov = centred.transpose() * &centred / (n - 1) as f64;
    let mut eig: Vec<f64> = SymmetricEigen::new(cov).eigenvalues.iter().map(|&v| v.max(0.0)).collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = eig.iter().sum();
    let scale = features.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let degenerate = total <= 1e-24 * scale * scale;
    let ratios: Vec<f64> = if degenerate {
        vec![0.0; d]
    } else {
        eig.iter().map(|v| v / total).collect()
    };
    let cumulative = ratios
        .iter()
        .scan(0.0, |acc, r| {
            *acc += r;
            Some(*acc)
        })
        .collect();
    Ok(PcaReport {
        ratios,
        cumulative,
        total_variance: if degenerate { 0.0 } else { total },
        degenerate,
    })
}
