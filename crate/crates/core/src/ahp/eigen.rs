use serde::{Deserialize, Serialize};

use super::PairwiseMatrix;

/// Principal eigenpair estimate from power iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenEstimate {
    pub eigenvalue: f64,
    /// Eigenvector scaled to sum to 1.
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Power iteration on a positive matrix. Used as a cross-check for the
/// row-average priorities, never as the primary derivation.
pub fn principal_eigen(m: &PairwiseMatrix, tol: f64, max_iter: usize) -> EigenEstimate {
    let n = m.order();
    let mut v = vec![1.0 / n as f64; n];
    let mut eigenvalue = 0.0;
    for it in 1..=max_iter {
        let mv = m.mul_vec(&v);
        // With sum(v) = 1 the Rayleigh-style estimate is just sum(Mv).
        let total: f64 = mv.iter().sum();
        let next: Vec<f64> = mv.iter().map(|x| x / total).collect();
        let delta = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        eigenvalue = total;
        if delta < tol {
            return EigenEstimate {
                eigenvalue,
                vector: v,
                iterations: it,
                converged: true,
            };
        }
    }
    EigenEstimate {
        eigenvalue,
        vector: v,
        iterations: max_iter,
        converged: false,
    }
}
