//! Gauss–Hermite quadrature for the weight `e^{−t²}`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{GkpError, Result};
use crate::scalar::{lit, Real};

/// Nodes and weights of an `n`-point rule: `∫ e^{−t²} f(t) dt ≈ Σ w_k f(t_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite<T: Real> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> GaussHermite<T> {
    /// Golub–Welsch: nodes are the eigenvalues of the Jacobi matrix with
    /// off-diagonal `√(k/2)`, weights `√π · v₀²`.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(GkpError::invalid("nodes", "quadrature needs at least one node"));
        }
        let mut jacobi = DMatrix::<T>::zeros(n, n);
        for k in 1..n {
            let b = lit::<T>((k as f64 / 2.0).sqrt());
            jacobi[(k - 1, k)] = b;
            jacobi[(k, k - 1)] = b;
        }
        let eig = SymmetricEigen::new(jacobi);
        let sqrt_pi = T::PI().sqrt();
        let mut pairs: Vec<(T, T)> = (0..n)
            .map(|j| {
                let v0 = eig.eigenvectors[(0, j)];
                (eig.eigenvalues[j], sqrt_pi * v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite nodes"));
        // Symmetrise: the rule is exactly even.
        for k in 0..n / 2 {
            let j = n - 1 - k;
            let node = (pairs[j].0 - pairs[k].0) * lit::<T>(0.5);
            let weight = (pairs[j].1 + pairs[k].1) * lit::<T>(0.5);
            pairs[k] = (-node, weight);
            pairs[j] = (node, weight);
        }
        if n % 2 == 1 {
            pairs[n / 2].0 = T::zero();
        }
        let (nodes, weights) = pairs.into_iter().unzip();
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(T) -> T) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (&t, &w)| acc + w * f(t))
    }

    /// Rule for the normalised Gaussian average `E[f(Z)]`, `Z ~ N(0, s²)`.
    pub fn gaussian_average(&self, std_dev: T, f: impl Fn(T) -> T) -> T {
        let scale = T::SQRT_2() * std_dev;
        self.integrate(|t| f(scale * t)) / T::PI().sqrt()
    }
}
