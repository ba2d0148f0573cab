use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{c, czero, Real, C};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix<T: Real>(self) -> [[C<T>; 2]; 2] {
        let o = T::one();
        let z = T::zero();
        match self {
            Pauli::X => [[czero(), c(o, z)], [c(o, z), czero()]],
            Pauli::Y => [[czero(), c(z, -o)], [c(z, o), czero()]],
            Pauli::Z => [[c(o, z), czero()], [czero(), c(-o, z)]],
        }
    }
}

/// Weighted tensor product of Paulis; identity on every qubit not listed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PauliString<T: Real> {
    pub terms: BTreeMap<usize, Pauli>,
    pub coefficient: T,
}

/// Bit masks describing how a Pauli string acts on computational basis states:
/// `P|x⟩ = phase(x) |x ^ flip⟩` with `phase(x) = i^{n_y} (-1)^{popcount(x & sign)}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct PauliMasks {
    pub flip: usize,
    pub sign: usize,
    pub n_y: u32,
}

impl PauliMasks {
    #[inline]
    pub fn phase<T: Real>(&self, x: usize) -> C<T> {
        let base: C<T> = match self.n_y % 4 {
            0 => c(T::one(), T::zero()),
            1 => c(T::zero(), T::one()),
            2 => c(-T::one(), T::zero()),
            _ => c(T::zero(), -T::one()),
        };
        if (x & self.sign).count_ones() % 2 == 1 {
            -base
        } else {
            base
        }
    }
}

impl<T: Real> PauliString<T> {
    pub fn new(terms: impl IntoIterator<Item = (usize, Pauli)>, coefficient: T) -> Self {
        PauliString {
            terms: terms.into_iter().collect(),
            coefficient,
        }
    }

    pub fn single(qubit: usize, pauli: Pauli) -> Self {
        Self::new([(qubit, pauli)], T::one())
    }

    pub fn z(qubit: usize) -> Self {
        Self::single(qubit, Pauli::Z)
    }

    pub fn identity(coefficient: T) -> Self {
        Self::new([], coefficient)
    }

    /// Highest qubit index touched, if any.
    pub fn max_qubit(&self) -> Option<usize> {
        self.terms.keys().next_back().copied()
    }

    pub fn check_fits(&self, n_qubits: usize) -> Result<()> {
        match self.max_qubit() {
            Some(q) if q >= n_qubits => Err(Error::IndexOutOfRange {
                index: q,
                len: n_qubits,
            }),
            _ => Ok(()),
        }
    }

    pub(crate) fn masks(&self) -> PauliMasks {
        let mut m = PauliMasks {
            flip: 0,
            sign: 0,
            n_y: 0,
        };
        for (&q, &p) in &self.terms {
            let bit = 1usize << q;
            match p {
                Pauli::X => m.flip |= bit,
                Pauli::Y => {
                    m.flip |= bit;
                    m.sign |= bit;
                    m.n_y += 1;
                }
                Pauli::Z => m.sign |= bit,
            }
        }
        m
    }

    /// `Σ_x conj(ψ[x ^ flip]) phase(x) ψ[x]`, times the coefficient.
    pub(crate) fn expectation_raw(&self, amps: &[C<T>]) -> T {
        let m = self.masks();
        let mut acc = czero::<T>();
        if m.flip == 0 && m.sign == 0 {
            for a in amps {
                acc.re += a.norm_sqr();
            }
        } else if m.flip == 0 && m.n_y == 0 {
            for (x, a) in amps.iter().enumerate() {
                let p = a.norm_sqr();
                if (x & m.sign).count_ones() % 2 == 1 {
                    acc.re -= p;
                } else {
                    acc.re += p;
                }
            }
        } else {
            for (x, a) in amps.iter().enumerate() {
                acc += amps[x ^ m.flip].conj() * m.phase::<T>(x) * a;
            }
        }
        acc.re * self.coefficient
    }

    /// Writes `coefficient · P ψ` into a fresh vector.
    pub(crate) fn apply_raw(&self, amps: &[C<T>]) -> Vec<C<T>> {
        let m = self.masks();
        let mut out = vec![czero::<T>(); amps.len()];
        for (x, a) in amps.iter().enumerate() {
            out[x ^ m.flip] = m.phase::<T>(x) * a * self.coefficient;
        }
        out
    }
}
