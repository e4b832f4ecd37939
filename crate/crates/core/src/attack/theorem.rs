//! Executable check of the representation-stability bound for ego-network
//! encoders of the form `H^l = ReLU(Psi(L) H^{l-1} W^l)` with `Psi = I - L`
//! and all-ones input features.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Subgraph;
use crate::matrix::Matrix;

/// Largest singular value.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.rows() == 0 || m.cols() == 0 {
        return 0.0;
    }
    let d = DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice());
    d.singular_values().max()
}

/// Weights of a `K`-layer filter encoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiEncoder {
    pub input_dim: usize,
    pub weights: Vec<Matrix>,
}

impl PsiEncoder {
    /// Uniform(-a, a) Glorot weights; `widths[0]` is the input dimension.
    pub fn random(widths: &[usize], seed: u64) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::contract(
                "encoder needs an input width and at least one positive layer width",
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = widths
            .windows(2)
            .map(|w| {
                let a = (6.0 / (w[0] + w[1]) as f64).sqrt();
                let data = (0..w[0] * w[1]).map(|_| rng.random_range(-a..a)).collect();
                Matrix::from_vec(w[0], w[1], data)
            })
            .collect();
        Ok(Self {
            input_dim: widths[0],
            weights,
        })
    }

    pub fn layers(&self) -> usize {
        self.weights.len()
    }

    /// `H^0 ..= H^K` for the given Laplacian.
    pub fn forward(&self, laplacian: &Matrix) -> Vec<Matrix> {
        let psi = psi(laplacian);
        let mut hs = vec![Matrix::filled(laplacian.rows(), self.input_dim, 1.0)];
        for w in &self.weights {
            let h = psi.matmul(hs.last().expect("nonempty")).matmul(w);
            hs.push(h.map(|x| x.max(0.0)));
        }
        hs
    }
}

fn psi(laplacian: &Matrix) -> Matrix {
    let n = laplacian.rows();
    Matrix::identity(n).zip_map(laplacian, |a, b| a - b)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Spectral norm of the difference of final representations.
    pub lhs: f64,
    pub rhs: f64,
    pub tau: f64,
    pub tau_sigma: f64,
    pub tau_w: f64,
    /// Largest Frobenius norm among representations of either subgraph.
    pub tau_h: f64,
    pub tau_l: f64,
    pub laplacian_distance: f64,
    pub layers: usize,
    pub holds: bool,
}

/// Compares `||H_i - H_j||_2` with `tau ||L_i - L_j||_2` for two ego networks
/// of equal size.
pub fn check_theorem_bound(sub_i: &Subgraph, sub_j: &Subgraph, encoder: &PsiEncoder) -> Result<BoundReport> {
    if sub_i.node_count() != sub_j.node_count() {
        return Err(Error::contract(format!(
            "subgraphs must have equal node counts ({} vs {})",
            sub_i.node_count(),
            sub_j.node_count()
        )));
    }
    if encoder.layers() == 0 {
        return Err(Error::contract("encoder has no layers"));
    }
    let li = sub_i.normalized_laplacian();
    let lj = sub_j.normalized_laplacian();
    let hi = encoder.forward(&li);
    let hj = encoder.forward(&lj);
    let k = encoder.layers();
    let lhs = spectral_norm(&hi[k].zip_map(&hj[k], |a, b| a - b));
    let tau_sigma = 1.0;
    let tau_w = encoder.weights.iter().map(spectral_norm).fold(0.0, f64::max);
    let tau_h = hi.iter().chain(&hj).map(Matrix::frobenius_norm).fold(0.0, f64::max);
    let tau_l = spectral_norm(&psi(&li)).max(spectral_norm(&psi(&lj)));
    let a = tau_sigma * tau_w * tau_l;
    let series = if (a - 1.0).abs() < 1e-12 {
        k as f64
    } else {
        (a.powi(k as i32) - 1.0) / (a - 1.0)
    };
    let tau = series * tau_sigma * tau_w * tau_h;
    let laplacian_distance = spectral_norm(&li.zip_map(&lj, |a, b| a - b));
    let rhs = tau * laplacian_distance;
    Ok(BoundReport {
        lhs,
        rhs,
        tau,
        tau_sigma,
        tau_w,
        tau_h,
        tau_l,
        laplacian_distance,
        layers: k,
        holds: lhs <= rhs + 1e-9,
    })
}
