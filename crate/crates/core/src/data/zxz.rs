//! The 1D ZXZ chain `H = −Σ_i [h1 X_i + h2 X_i X_{i+1} + J Z_{i−1} X_i Z_{i+1}]`
//! with open boundaries: a term is kept only if every site it touches exists.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::state::MAX_QUBITS;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZxzParams {
    pub n: usize,
    pub h1: f64,
    pub h2: f64,
    pub j: f64,
}

/// `coeff · Z^{z_mask} X^{x_mask}` with disjoint masks, so the term is real.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PauliTerm {
    pub coeff: f64,
    pub x_mask: usize,
    pub z_mask: usize,
}

impl PauliTerm {
    #[inline]
    fn sign(&self, x: usize) -> f64 {
        if (x & self.z_mask).count_ones().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }
}

/// Real symmetric operator stored as a sum of X/Z Pauli products.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    n_qubits: usize,
    terms: Vec<PauliTerm>,
}

impl SparseOperator {
    pub fn new(n_qubits: usize, terms: Vec<PauliTerm>) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::Size(format!("operator on {n_qubits} qubits")));
        }
        let full = (1usize << n_qubits) - 1;
        for t in &terms {
            if t.x_mask & t.z_mask != 0 {
                return Err(Error::Contract(
                    "X and Z masks overlap (term would not be real symmetric)".into(),
                ));
            }
            if (t.x_mask | t.z_mask) & !full != 0 {
                return Err(Error::Contract("term acts outside the register".into()));
            }
        }
        Ok(SparseOperator { n_qubits, terms })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    /// `out = H v`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for t in &self.terms {
            for (x, &vx) in v.iter().enumerate() {
                out[x ^ t.x_mask] += t.coeff * t.sign(x) * vx;
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for t in &self.terms {
            for x in 0..d {
                m[(x ^ t.x_mask, x)] += t.coeff * t.sign(x);
            }
        }
        m
    }
}

/// Sites `1..=n` map to qubits `0..n`.
pub fn build_zxz(p: &ZxzParams) -> Result<SparseOperator> {
    if p.n < 3 {
        return Err(Error::config(
            "n",
            format!("ZXZ chain needs at least 3 sites, got {}", p.n),
        ));
    }
    let n = p.n;
    let mut terms = Vec::new();
    let mut push = |coeff: f64, x_mask: usize, z_mask: usize| {
        if coeff != 0.0 {
            terms.push(PauliTerm {
                coeff,
                x_mask,
                z_mask,
            });
        }
    };
    for q in 0..n {
        push(-p.h1, 1 << q, 0);
    }
    for q in 0..n - 1 {
        push(-p.h2, (1 << q) | (1 << (q + 1)), 0);
    }
    for q in 1..n - 1 {
        push(-p.j, 1 << q, (1 << (q - 1)) | (1 << (q + 1)));
    }
    SparseOperator::new(n, terms)
}
