use crate::error::{Error, Result};
use crate::scalar::{cast_complex, cone, czero, Real, C};
use crate::sim::density::DensityMatrix;
use crate::sim::gate::{BoundCircuit, GateSpec};
use crate::sim::kernel;
use crate::sim::pauli::PauliString;
use crate::sim::program::Program;

pub const MAX_QUBITS: usize = 20;

/// Tolerance used for normalization / trace checks at scalar precision `T`.
pub(crate) fn check_tol<T: Real>() -> f64 {
    (T::epsilon().to_f64_lossy() * 1e3).max(1e-10)
}

/// Pure state over `2^n_qubits` basis states, qubit 0 = least significant bit.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector<T: Real> {
    n_qubits: usize,
    amps: Vec<C<T>>,
}

impl<T: Real> StateVector<T> {
    /// |0…0⟩ on `n_qubits` qubits.
    pub fn zero_state(n_qubits: usize) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&n_qubits) {
            return Err(Error::Size(format!(
                "qubit count {n_qubits} outside 1..={MAX_QUBITS}"
            )));
        }
        let mut amps = vec![czero(); 1 << n_qubits];
        amps[0] = cone();
        Ok(StateVector { n_qubits, amps })
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let mut s = Self::zero_state(n_qubits)?;
        if index >= s.amps.len() {
            return Err(Error::IndexOutOfRange {
                index,
                len: s.amps.len(),
            });
        }
        s.amps[0] = czero();
        s.amps[index] = cone();
        Ok(s)
    }

    /// `⊗_i (|0⟩ + (−1)^{b_i}|1⟩)/√2` with bit `i` on qubit `i`.
    pub fn phase_product(bits: &[u8]) -> Result<Self> {
        let n = bits.len();
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::Size(format!("phase product over {n} bits")));
        }
        let mask = bits
            .iter()
            .enumerate()
            .fold(0usize, |m, (i, &b)| m | (usize::from(b != 0) << i));
        let a = T::lit((0.5f64).powf(n as f64 / 2.0));
        let amps = (0..1usize << n)
            .map(|x| {
                let s = if (x & mask).count_ones() % 2 == 0 {
                    a
                } else {
                    -a
                };
                C::new(s, T::zero())
            })
            .collect();
        Ok(StateVector { n_qubits: n, amps })
    }

    /// Wraps an amplitude array; length must be a power of two and the norm 1.
    pub fn from_amplitudes(amps: Vec<C<T>>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::Size(format!(
                "amplitude length {len} is not a power of two ≥ 2"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(Error::Size(format!(
                "{n_qubits} qubits exceeds {MAX_QUBITS}"
            )));
        }
        let norm = kernel::norm_sqr(&amps).to_f64_lossy();
        if (norm - 1.0).abs() > check_tol::<T>() {
            return Err(Error::Contract(format!(
                "state norm² {norm} differs from 1"
            )));
        }
        Ok(StateVector { n_qubits, amps })
    }

    /// Normalizes arbitrary nonzero amplitudes.
    pub fn normalized(mut amps: Vec<C<T>>) -> Result<Self> {
        let norm = kernel::norm_sqr(&amps).sqrt();
        if norm == T::zero() {
            return Err(Error::Contract("cannot normalize a zero vector".into()));
        }
        for a in &mut amps {
            *a /= norm;
        }
        Self::from_amplitudes(amps)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C<T>] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C<T>> {
        self.amps
    }

    pub fn norm_sqr(&self) -> T {
        kernel::norm_sqr(&self.amps)
    }

    pub fn inner(&self, other: &Self) -> C<T> {
        kernel::inner(&self.amps, &other.amps)
    }

    pub fn cast<U: Real>(&self) -> StateVector<U> {
        StateVector {
            n_qubits: self.n_qubits,
            amps: self.amps.iter().map(|&z| cast_complex(z)).collect(),
        }
    }

    /// `U·ψ` for one gate; the receiver is left untouched.
    pub fn apply_gate(&self, gate: &GateSpec, angle: Option<T>) -> Result<Self> {
        let mut out = self.clone();
        out.apply_gate_mut(gate, angle)?;
        Ok(out)
    }

    pub fn apply_gate_mut(&mut self, gate: &GateSpec, angle: Option<T>) -> Result<()> {
        gate.validate(self.n_qubits)?;
        let bound = gate.bind(angle)?;
        kernel::apply_bound(&mut self.amps, &bound);
        Ok(())
    }

    /// Runs a bound circuit through the fused program.
    pub fn run(&self, circuit: &BoundCircuit<T>) -> Result<Self> {
        self.check_register(circuit.n_qubits)?;
        let mut out = self.clone();
        let mut scratch = Vec::new();
        Program::compile(circuit).run(&mut out.amps, &mut scratch);
        Ok(out)
    }

    pub(crate) fn check_register(&self, n: usize) -> Result<()> {
        if n != self.n_qubits {
            return Err(Error::Dimension {
                expected: self.n_qubits,
                got: n,
            });
        }
        Ok(())
    }

    /// `⟨ψ|O|ψ⟩` (exact, real).
    pub fn expectation(&self, obs: &PauliString<T>) -> Result<T> {
        obs.check_fits(self.n_qubits)?;
        Ok(obs.expectation_raw(&self.amps))
    }

    /// Reduced state on `keep` (sorted ascending; kept qubit `keep[k]` becomes qubit `k`).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix<T>> {
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if keep.is_empty() || keep.len() >= self.n_qubits {
            return Err(Error::Contract(format!(
                "keep set must be a nonempty proper subset of {} qubits",
                self.n_qubits
            )));
        }
        if let Some(&q) = keep.iter().find(|&&q| q >= self.n_qubits) {
            return Err(Error::IndexOutOfRange {
                index: q,
                len: self.n_qubits,
            });
        }
        let traced: Vec<usize> = (0..self.n_qubits).filter(|q| !keep.contains(q)).collect();
        let dim_a = 1usize << keep.len();
        let dim_r = 1usize << traced.len();
        // psi_mat[a * dim_r + r]
        let mut psi_mat = vec![czero::<T>(); dim_a * dim_r];
        for (x, &amp) in self.amps.iter().enumerate() {
            let a = gather_bits(x, &keep);
            let r = gather_bits(x, &traced);
            psi_mat[a * dim_r + r] = amp;
        }
        let mut rho = vec![czero::<T>(); dim_a * dim_a];
        for a in 0..dim_a {
            let row_a = &psi_mat[a * dim_r..(a + 1) * dim_r];
            for b in a..dim_a {
                let row_b = &psi_mat[b * dim_r..(b + 1) * dim_r];
                let mut acc = czero::<T>();
                for (x, y) in row_a.iter().zip(row_b) {
                    acc += x * y.conj();
                }
                rho[a * dim_a + b] = acc;
                rho[b * dim_a + a] = acc.conj();
            }
        }
        Ok(DensityMatrix::from_raw(keep.len(), rho))
    }

    /// Appends `k` fresh |0⟩ qubits above the current register.
    pub fn adjoin_zeros(&self, k: usize) -> Result<Self> {
        let n = self.n_qubits + k;
        if n > MAX_QUBITS {
            return Err(Error::Size(format!("{n} qubits exceeds {MAX_QUBITS}")));
        }
        let mut amps = vec![czero(); 1 << n];
        amps[..self.amps.len()].copy_from_slice(&self.amps);
        Ok(StateVector { n_qubits: n, amps })
    }

    /// `ψ ⊗ φ` with `self` on the low qubits.
    pub fn tensor(&self, high: &Self) -> Result<Self> {
        let n = self.n_qubits + high.n_qubits;
        if n > MAX_QUBITS {
            return Err(Error::Size(format!("{n} qubits exceeds {MAX_QUBITS}")));
        }
        let mut amps = Vec::with_capacity(1 << n);
        for h in &high.amps {
            for l in &self.amps {
                amps.push(*l * *h);
            }
        }
        Ok(StateVector { n_qubits: n, amps })
    }
}

#[inline]
pub(crate) fn gather_bits(x: usize, positions: &[usize]) -> usize {
    positions
        .iter()
        .enumerate()
        .fold(0, |acc, (k, &q)| acc | (((x >> q) & 1) << k))
}

/// `⟨ψ|ρ|ψ⟩`, the fidelity between a pure reference and a mixed state.
pub fn fidelity_pure<T: Real>(psi: &StateVector<T>, rho: &DensityMatrix<T>) -> Result<T> {
    if psi.dim() != rho.dim() {
        return Err(Error::Dimension {
            expected: psi.dim(),
            got: rho.dim(),
        });
    }
    Ok(rho.sandwich(psi.amplitudes()).re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::gate::GateSpec;
    use crate::sim::pauli::Pauli;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn plus() -> StateVector<f64> {
        StateVector::from_amplitudes(vec![C::new(FRAC_1_SQRT_2, 0.0), C::new(FRAC_1_SQRT_2, 0.0)])
            .unwrap()
    }

    #[test]
    fn zero_state_sizes() {
        let s = StateVector::<f64>::zero_state(1).unwrap();
        assert_eq!(s.amplitudes(), &[cone(), czero()]);
        let s = StateVector::<f64>::zero_state(2).unwrap();
        assert_eq!(s.amplitudes(), &[cone(), czero(), czero(), czero()]);
        let s = StateVector::<f64>::zero_state(15).unwrap();
        assert_eq!(s.dim(), 32768);
        assert_eq!(s.amplitudes()[0], cone());
        assert!(StateVector::<f64>::zero_state(0).is_err());
        assert!(StateVector::<f64>::zero_state(21).is_err());
    }

    #[test]
    fn single_gate_examples() {
        let zero = StateVector::<f64>::zero_state(1).unwrap();
        let same = zero.apply_gate(&GateSpec::rx(0, 0), Some(0.0)).unwrap();
        assert_eq!(same, zero);

        let one = zero.apply_gate(&GateSpec::ry(0, 0), Some(PI)).unwrap();
        assert!(one.amplitudes()[0].norm() < 1e-15);
        assert!((one.amplitudes()[1].norm() - 1.0).abs() < 1e-15);

        // |10⟩ in ket order means qubit 0 = 1, i.e. basis index 1
        let s = StateVector::<f64>::basis(2, 0b01).unwrap();
        let out = s.apply_gate(&GateSpec::cnot(0, 1), None).unwrap();
        assert_eq!(out, StateVector::basis(2, 0b11).unwrap());

        assert!(zero.apply_gate(&GateSpec::rx(0, 0), None).is_err());
        assert!(zero.apply_gate(&GateSpec::rx(1, 0), Some(0.1)).is_err());
    }

    #[test]
    fn z_expectations() {
        let z = PauliString::single(0, Pauli::Z);
        let zero = StateVector::<f64>::zero_state(1).unwrap();
        let one = StateVector::<f64>::basis(1, 1).unwrap();
        assert_eq!(zero.expectation(&z).unwrap(), 1.0);
        assert_eq!(one.expectation(&z).unwrap(), -1.0);
        assert!(plus().expectation(&z).unwrap().abs() < 1e-15);
        assert!(zero.expectation(&PauliString::z(1)).is_err());
    }

    #[test]
    fn partial_trace_examples() {
        let s = StateVector::<f64>::zero_state(2).unwrap();
        let r = s.partial_trace(&[0]).unwrap();
        assert!((r.get(0, 0).re - 1.0).abs() < 1e-15);
        assert!(r.get(1, 1).norm() < 1e-15);

        let h = FRAC_1_SQRT_2;
        let bell =
            StateVector::from_amplitudes(vec![C::new(h, 0.0), czero(), czero(), C::new(h, 0.0)])
                .unwrap();
        let r = bell.partial_trace(&[0]).unwrap();
        assert!((r.get(0, 0).re - 0.5).abs() < 1e-15);
        assert!((r.get(1, 1).re - 0.5).abs() < 1e-15);
        assert!(r.get(0, 1).norm() < 1e-15);

        // |+⟩ on qubit 0, |1⟩ on qubit 1
        let s = plus().tensor(&StateVector::basis(1, 1).unwrap()).unwrap();
        let r = s.partial_trace(&[1]).unwrap();
        assert!((r.get(1, 1).re - 1.0).abs() < 1e-15);
        assert!(r.get(0, 0).norm() < 1e-15);

        assert!(s.partial_trace(&[]).is_err());
        assert!(s.partial_trace(&[0, 1]).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let zero = StateVector::<f64>::zero_state(1).unwrap();
        let one = StateVector::<f64>::basis(1, 1).unwrap();
        let p0 = DensityMatrix::from_pure(&zero);
        let p1 = DensityMatrix::from_pure(&one);
        assert!((fidelity_pure(&zero, &p0).unwrap() - 1.0).abs() < 1e-15);
        assert!(fidelity_pure(&zero, &p1).unwrap().abs() < 1e-15);
        let mixed = DensityMatrix::<f64>::maximally_mixed(1).unwrap();
        assert!((fidelity_pure(&plus(), &mixed).unwrap() - 0.5).abs() < 1e-15);
        let two = StateVector::<f64>::zero_state(2).unwrap();
        assert!(fidelity_pure(&two, &p0).is_err());
    }

    #[test]
    fn adjoin_then_trace_recovers_projector() {
        let s = plus();
        let big = s.adjoin_zeros(2).unwrap();
        let r = big.partial_trace(&[0]).unwrap();
        let p = DensityMatrix::from_pure(&s);
        assert!(r.max_abs_diff(&p).unwrap() < 1e-15);
    }
}
