use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sim::density::MAX_DENSITY_QUBITS;
use crate::sim::{BoundCircuit, DensityMatrix, PauliString, Program, StateVector};

/// Quantum model input: a pure state, a mixed state (after compression), or a
/// phase-encoded bit string kept in compact form.
#[derive(Clone, Debug, PartialEq)]
pub enum QuantumInput<T: Real> {
    Pure(StateVector<T>),
    Mixed(DensityMatrix<T>),
    /// `⊗_i (|0⟩ + (−1)^{b_i}|1⟩)/√2`, built on demand.
    PhaseBits(Vec<u8>),
}

impl<T: Real> QuantumInput<T> {
    pub fn n_qubits(&self) -> usize {
        match self {
            QuantumInput::Pure(s) => s.n_qubits(),
            QuantumInput::Mixed(r) => r.n_qubits(),
            QuantumInput::PhaseBits(b) => b.len(),
        }
    }

    /// The state vector behind a pure or bit-string input.
    pub fn pure_state(&self) -> Result<Option<std::borrow::Cow<'_, StateVector<T>>>> {
        use std::borrow::Cow;
        Ok(match self {
            QuantumInput::Pure(s) => Some(Cow::Borrowed(s)),
            QuantumInput::PhaseBits(b) => Some(Cow::Owned(StateVector::phase_product(b)?)),
            QuantumInput::Mixed(_) => None,
        })
    }

    pub fn to_density(&self) -> Result<DensityMatrix<T>> {
        match self {
            QuantumInput::Mixed(r) => Ok(r.clone()),
            _ => {
                let s = self.pure_state()?.expect("pure input");
                if s.n_qubits() > MAX_DENSITY_QUBITS {
                    return Err(Error::Size(format!(
                        "{} qubits is too many for a density matrix",
                        s.n_qubits()
                    )));
                }
                Ok(DensityMatrix::from_pure(&s))
            }
        }
    }

    /// Evolves the input through `circuit` and reads every observable.
    pub fn measure_after(
        &self,
        circuit: &BoundCircuit<T>,
        observables: &[PauliString<T>],
    ) -> Result<Vec<T>> {
        match self {
            QuantumInput::Mixed(r) => {
                let out = r.evolve(circuit)?;
                observables.iter().map(|o| out.expectation(o)).collect()
            }
            _ => {
                let s = self.pure_state()?.expect("pure input");
                s.check_register(circuit.n_qubits)?;
                let mut amps = s.amplitudes().to_vec();
                let mut scratch = Vec::new();
                Program::compile(circuit).run(&mut amps, &mut scratch);
                observables
                    .iter()
                    .map(|o| {
                        o.check_fits(s.n_qubits())?;
                        Ok(o.expectation_raw(&amps))
                    })
                    .collect()
            }
        }
    }

    /// The input's state on the qubits in `keep` (ascending, relabeled from
    /// 0), exactly: bit strings keep their selected bits, other inputs become
    /// the reduced density matrix. `None` when the reduced state would not fit
    /// in a density matrix or a mixed input would need a partial trace.
    pub fn reduce(&self, keep: &[usize]) -> Result<Option<Self>> {
        if keep.len() == self.n_qubits() {
            return Ok(Some(self.clone()));
        }
        Ok(match self {
            QuantumInput::PhaseBits(b) => {
                let bits = keep
                    .iter()
                    .map(|&q| {
                        b.get(q).copied().ok_or(Error::IndexOutOfRange {
                            index: q,
                            len: b.len(),
                        })
                    })
                    .collect::<Result<Vec<u8>>>()?;
                Some(QuantumInput::PhaseBits(bits))
            }
            QuantumInput::Pure(s) if keep.len() <= MAX_DENSITY_QUBITS => {
                Some(QuantumInput::Mixed(s.partial_trace(keep)?))
            }
            _ => None,
        })
    }
}

impl<T: Real> From<StateVector<T>> for QuantumInput<T> {
    fn from(s: StateVector<T>) -> Self {
        QuantumInput::Pure(s)
    }
}

impl<T: Real> From<DensityMatrix<T>> for QuantumInput<T> {
    fn from(r: DensityMatrix<T>) -> Self {
        QuantumInput::Mixed(r)
    }
}
