//! Labelled ZXZ ground states: `h1 = 0`, `J = 1`, `h2 ~ U[h_lo, h_hi]`.
//! Label 1 (SPT phase) iff `|h2 / J| < 1`, label 0 (paramagnet) otherwise.
//!
//! With `h1 = 0` the open chain has a doubly degenerate ground space at every
//! `h2`. Every sample is solved from the same fixed Lanczos start vector, and
//! a Krylov method returns the normalized projection of its start vector onto
//! that space, so the selected ground state varies smoothly with `h2` and is
//! the same rule for training and test sets.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use super::eigen::{ground_state, LanczosOptions};
use super::zxz::{build_zxz, ZxzParams};
use crate::binio::ByteCursor;
use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::scalar::{Real, C};
use crate::sim::StateVector;

pub const DEFAULT_H_RANGE: (f64, f64) = (0.8, 1.2);
pub const DEFAULT_TRAIN_COUNT: usize = 1000;
pub const DEFAULT_TEST_COUNT: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSample {
    pub h2: f64,
    pub label: usize,
    /// Real ground-state amplitudes.
    pub amplitudes: Vec<f64>,
}

impl PhaseSample {
    pub fn state<T: Real>(&self) -> Result<StateVector<T>> {
        StateVector::from_amplitudes(
            self.amplitudes
                .iter()
                .map(|&a| C::new(T::lit(a), T::zero()))
                .collect(),
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseDataset {
    pub n_qubits: usize,
    pub seed: u64,
    pub h_range: (f64, f64),
    pub samples: Vec<PhaseSample>,
}

pub fn phase_label(h2: f64, j: f64) -> usize {
    usize::from((h2 / j).abs() < 1.0)
}

/// `count` ground states with couplings drawn from the `seed` stream.
pub fn generate_phase_dataset(n: usize, count: usize, seed: u64) -> Result<PhaseDataset> {
    generate_phase_dataset_in(n, count, seed, DEFAULT_H_RANGE)
}

pub fn generate_phase_dataset_in(
    n: usize,
    count: usize,
    seed: u64,
    h_range: (f64, f64),
) -> Result<PhaseDataset> {
    if count == 0 {
        return Err(Error::config("count", "must be ≥ 1"));
    }
    if !(h_range.0 < h_range.1) {
        return Err(Error::config(
            "h_range",
            "lower bound must be below upper bound",
        ));
    }
    // validates n before any work
    build_zxz(&ZxzParams {
        n,
        h1: 0.0,
        h2: 1.0,
        j: 1.0,
    })?;
    let mut rng = stream_rng(seed, "phase-couplings");
    let couplings: Vec<f64> = (0..count)
        .map(|_| rng.random_range(h_range.0..=h_range.1))
        .collect();
    let samples = couplings
        .par_iter()
        .map(|&h2| {
            let h = build_zxz(&ZxzParams {
                n,
                h1: 0.0,
                h2,
                j: 1.0,
            })?;
            let g = ground_state(&h, &LanczosOptions::default())?;
            Ok(PhaseSample {
                h2,
                label: phase_label(h2, 1.0),
                amplitudes: g.vector,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseDataset {
        n_qubits: n,
        seed,
        h_range,
        samples,
    })
}

const PHASE_MAGIC: &[u8; 8] = b"QKDPHASE";

impl PhaseDataset {
    /// Header: magic, n (u32), count (u64), seed (u64), h range (2 × f64);
    /// each sample: h2 (f64), label (u8), amplitudes as (re, im) f64 pairs.
    /// All little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(PHASE_MAGIC);
        out.extend_from_slice(&(self.n_qubits as u32).to_le_bytes());
        out.extend_from_slice(&(self.samples.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.h_range.0.to_le_bytes());
        out.extend_from_slice(&self.h_range.1.to_le_bytes());
        for s in &self.samples {
            out.extend_from_slice(&s.h2.to_le_bytes());
            out.push(s.label as u8);
            for &a in &s.amplitudes {
                out.extend_from_slice(&a.to_le_bytes());
                out.extend_from_slice(&0f64.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = ByteCursor::new(bytes);
        if cur.take(8)? != PHASE_MAGIC {
            return Err(Error::Parse("phase dataset: bad magic".into()));
        }
        let n_qubits = cur.u32()? as usize;
        if !(3..=crate::sim::state::MAX_QUBITS).contains(&n_qubits) {
            return Err(Error::Parse(format!("phase dataset: {n_qubits} qubits")));
        }
        let count = cur.u64()? as usize;
        let seed = cur.u64()?;
        let h_range = (cur.f64()?, cur.f64()?);
        let dim = 1usize << n_qubits;
        let mut samples = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let h2 = cur.f64()?;
            let label = cur.u8()? as usize;
            let mut amplitudes = Vec::with_capacity(dim);
            for _ in 0..dim {
                let re = cur.f64()?;
                let im = cur.f64()?;
                if im != 0.0 {
                    return Err(Error::Parse("phase dataset: complex ground state".into()));
                }
                amplitudes.push(re);
            }
            samples.push(PhaseSample {
                h2,
                label,
                amplitudes,
            });
        }
        if !cur.is_empty() {
            return Err(Error::Parse("phase dataset: trailing bytes".into()));
        }
        Ok(PhaseDataset {
            n_qubits,
            seed,
            h_range,
            samples,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// `(state, label)` pairs for training.
    pub fn labelled_states<T: Real>(&self) -> Result<Vec<(StateVector<T>, usize)>> {
        self.samples
            .iter()
            .map(|s| Ok((s.state()?, s.label)))
            .collect()
    }
}
