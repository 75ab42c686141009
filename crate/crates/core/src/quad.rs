//! Gauss-Hermite quadrature for expectations over circular complex Gaussian
//! noise.
//!
//! For `v ~ CN(0, σ²)` the real and imaginary parts are independent
//! `N(0, σ²/2)`, and with the substitution `v = σ·x` each real dimension
//! becomes a ∫e^{−x²}f(σx)dx integral: exactly the weight handled by
//! Gauss-Hermite rules. Weights are stored pre-normalized (they sum to 1), so
//! a 2-D tensor product is a probability-weighted average directly:
//! `E[f(v)] ≈ Σ_ij w̃_i w̃_j f(σ(x_i + j·x_j))`.
//!
//! Nodes and weights come from the Golub-Welsch eigenvalue method on the
//! Jacobi matrix of the (physicists') Hermite recurrence: off-diagonal
//! entries √(k/2), normalized weights equal to the squared first components
//! of the eigenvectors.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum QuadError {
    #[error("quadrature order must be between 1 and {max}, got {got}")]
    InvalidOrder { got: usize, max: usize },
}

const MAX_ORDER: usize = 200;

/// A one-dimensional Gauss-Hermite rule with probability-normalized weights,
/// used pairwise for complex (2-D) expectations.
#[derive(Debug, Clone)]
pub struct GaussHermiteRule {
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermiteRule {
    pub fn new(order: usize) -> Result<Self, QuadError> {
        if order == 0 || order > MAX_ORDER {
            return Err(QuadError::InvalidOrder { got: order, max: MAX_ORDER });
        }
        if order == 1 {
            return Ok(Self { order, nodes: vec![0.0], weights: vec![1.0] });
        }
        let mut jacobi = DMatrix::<f64>::zeros(order, order);
        for k in 1..order {
            let b = (k as f64 / 2.0).sqrt();
            jacobi[(k - 1, k)] = b;
            jacobi[(k, k - 1)] = b;
        }
        let eig = jacobi.symmetric_eigen();
        let mut pairs: Vec<(f64, f64)> = (0..order)
            .map(|i| {
                let node = eig.eigenvalues[i];
                let w = eig.eigenvectors[(0, i)].powi(2);
                (node, w)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let norm: f64 = pairs.iter().map(|p| p.1).sum();
        let nodes = pairs.iter().map(|p| p.0).collect();
        let weights = pairs.iter().map(|p| p.1 / norm).collect();
        Ok(Self { order, nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Nodes of the e^{−x²} weight; scale by σ = √(noise power) per real
    /// dimension.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Weights normalized to sum to 1.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[f(v)]` for `v ~ CN(0, noise_power)` via the 2-D tensor rule.
    pub fn complex_mean<F: FnMut(Complex64) -> f64>(&self, noise_power: f64, mut f: F) -> f64 {
        let sigma = noise_power.sqrt();
        let mut acc = 0.0;
        for (i, &xi) in self.nodes.iter().enumerate() {
            for (j, &xj) in self.nodes.iter().enumerate() {
                let v = Complex64::new(sigma * xi, sigma * xj);
                acc += self.weights[i] * self.weights[j] * f(v);
            }
        }
        acc
    }

    /// `(E[f(v)], E[f(v)²])` in a single pass over the tensor nodes.
    pub fn complex_mean_and_square<F: FnMut(Complex64) -> f64>(
        &self,
        noise_power: f64,
        mut f: F,
    ) -> (f64, f64) {
        let sigma = noise_power.sqrt();
        let (mut m1, mut m2) = (0.0, 0.0);
        for (i, &xi) in self.nodes.iter().enumerate() {
            for (j, &xj) in self.nodes.iter().enumerate() {
                let w = self.weights[i] * self.weights[j];
                let v = f(Complex64::new(sigma * xi, sigma * xj));
                m1 += w * v;
                m2 += w * v * v;
            }
        }
        (m1, m2)
    }
}
