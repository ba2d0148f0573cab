use nalgebra::{Complex as NaComplex, DMatrix};

use crate::error::{Error, Result};
use crate::scalar::{cast_complex, cone, czero, Real, C};
use crate::sim::gate::{conj2, rotation_matrix, two_qubit_matrix, BoundCircuit, GateKind};
use crate::sim::kernel;
use crate::sim::pauli::PauliString;
use crate::sim::state::{check_tol, StateVector};

/// Density matrices are only materialized for small registers.
pub const MAX_DENSITY_QUBITS: usize = 10;

/// Row-major `2^n × 2^n` density matrix. Viewed as a `2n`-qubit vector the
/// column index occupies the low `n` bits and the row index the high `n` bits.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix<T: Real> {
    n_qubits: usize,
    entries: Vec<C<T>>,
}

impl<T: Real> DensityMatrix<T> {
    pub(crate) fn from_raw(n_qubits: usize, entries: Vec<C<T>>) -> Self {
        debug_assert_eq!(entries.len(), 1 << (2 * n_qubits));
        DensityMatrix { n_qubits, entries }
    }

    fn check_size(n_qubits: usize) -> Result<()> {
        if !(1..=MAX_DENSITY_QUBITS).contains(&n_qubits) {
            return Err(Error::Size(format!(
                "density matrices support 1..={MAX_DENSITY_QUBITS} qubits, got {n_qubits}"
            )));
        }
        Ok(())
    }

    /// Validates shape, Hermiticity and unit trace.
    pub fn from_entries(n_qubits: usize, entries: Vec<C<T>>) -> Result<Self> {
        Self::check_size(n_qubits)?;
        let want = 1usize << (2 * n_qubits);
        if entries.len() != want {
            return Err(Error::Dimension {
                expected: want,
                got: entries.len(),
            });
        }
        let rho = DensityMatrix { n_qubits, entries };
        let tol = check_tol::<T>();
        if rho.hermiticity_error() > tol {
            return Err(Error::Contract("density matrix is not Hermitian".into()));
        }
        let tr = rho.trace().re.to_f64_lossy();
        if (tr - 1.0).abs() > tol {
            return Err(Error::Contract(format!("density matrix trace {tr} ≠ 1")));
        }
        Ok(rho)
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn from_pure(psi: &StateVector<T>) -> Self {
        let a = psi.amplitudes();
        let d = a.len();
        let mut entries = vec![czero(); d * d];
        for r in 0..d {
            for c in 0..d {
                entries[r * d + c] = a[r] * a[c].conj();
            }
        }
        DensityMatrix {
            n_qubits: psi.n_qubits(),
            entries,
        }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        Self::check_size(n_qubits)?;
        let d = 1usize << n_qubits;
        let mut entries = vec![czero(); d * d];
        let w = T::one() / T::lit(d as f64);
        for i in 0..d {
            entries[i * d + i] = C::new(w, T::zero());
        }
        Ok(DensityMatrix { n_qubits, entries })
    }

    /// Diagonal state with the given probabilities.
    pub fn diagonal(probs: &[T]) -> Result<Self> {
        let d = probs.len();
        if !d.is_power_of_two() || d < 2 {
            return Err(Error::Size(format!("{d} is not a power of two ≥ 2")));
        }
        let mut entries = vec![czero(); d * d];
        for (i, &p) in probs.iter().enumerate() {
            entries[i * d + i] = C::new(p, T::zero());
        }
        Self::from_entries(d.trailing_zeros() as usize, entries)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn entries(&self) -> &[C<T>] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> C<T> {
        self.entries[row * self.dim() + col]
    }

    pub fn cast<U: Real>(&self) -> DensityMatrix<U> {
        DensityMatrix {
            n_qubits: self.n_qubits,
            entries: self.entries.iter().map(|&z| cast_complex(z)).collect(),
        }
    }

    pub fn trace(&self) -> C<T> {
        let d = self.dim();
        (0..d).fold(czero(), |acc, i| acc + self.entries[i * d + i])
    }

    /// `tr(ρ²)`.
    pub fn purity(&self) -> T {
        // ρ Hermitian ⇒ tr(ρ²) = Σ |ρ_ij|²
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for r in 0..d {
            for c in r..d {
                let diff = (self.get(r, c) - self.get(c, r).conj())
                    .norm()
                    .to_f64_lossy();
                worst = worst.max(diff);
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (*a - *b).norm().to_f64_lossy())
            .fold(0.0, f64::max))
    }

    /// Eigenvalues in ascending order (computed in `f64`).
    pub fn eigenvalues(&self) -> Vec<f64> {
        let d = self.dim();
        let m = DMatrix::from_fn(d, d, |r, c| {
            let z = self.get(r, c);
            NaComplex::new(z.re.to_f64_lossy(), z.im.to_f64_lossy())
        });
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    /// Hermitian, unit-trace and positive semidefinite within `tol`.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > tol {
            return Err(Error::Contract(format!("Hermiticity error {herm:e}")));
        }
        let tr = self.trace();
        if (tr.re.to_f64_lossy() - 1.0).abs() > tol || tr.im.to_f64_lossy().abs() > tol {
            return Err(Error::Contract(format!("trace {tr} ≠ 1")));
        }
        let min = self.eigenvalues()[0];
        if min < -tol {
            return Err(Error::Contract(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// `tr(O ρ)`.
    pub fn expectation(&self, obs: &PauliString<T>) -> Result<T> {
        obs.check_fits(self.n_qubits)?;
        let m = obs.masks();
        let d = self.dim();
        let mut acc = czero::<T>();
        for y in 0..d {
            acc += m.phase::<T>(y) * self.entries[y * d + (y ^ m.flip)];
        }
        Ok(acc.re * obs.coefficient)
    }

    /// `v† ρ v` for an arbitrary (not necessarily normalized) vector.
    pub fn sandwich(&self, v: &[C<T>]) -> C<T> {
        let d = self.dim();
        let mut acc = czero::<T>();
        for r in 0..d {
            let row = &self.entries[r * d..(r + 1) * d];
            acc += v[r].conj() * kernel::inner_conj_free(row, v);
        }
        acc
    }

    /// `U ρ U†` for a bound circuit on the same register.
    pub fn evolve(&self, circuit: &BoundCircuit<T>) -> Result<Self> {
        if circuit.n_qubits != self.n_qubits {
            return Err(Error::Dimension {
                expected: self.n_qubits,
                got: circuit.n_qubits,
            });
        }
        let n = self.n_qubits;
        let mut e = self.entries.clone();
        for g in &circuit.gates {
            match g.kind {
                GateKind::Rx | GateKind::Ry | GateKind::Rz => {
                    let m = rotation_matrix(g.kind, g.angle_or_zero());
                    kernel::apply_single(&mut e, g.targets[0] + n, &m);
                    kernel::apply_single(&mut e, g.targets[0], &conj2(&m));
                }
                GateKind::Cnot => {
                    kernel::apply_cnot(&mut e, g.targets[0] + n, g.targets[1] + n);
                    kernel::apply_cnot(&mut e, g.targets[0], g.targets[1]);
                }
                GateKind::Rxx | GateKind::Ryy | GateKind::Rzz => {
                    let m = two_qubit_matrix(g.kind, g.angle_or_zero());
                    let mut mc = m;
                    for row in mc.iter_mut() {
                        for z in row.iter_mut() {
                            *z = z.conj();
                        }
                    }
                    kernel::apply_two(&mut e, g.targets[0] + n, g.targets[1] + n, &m);
                    kernel::apply_two(&mut e, g.targets[0], g.targets[1], &mc);
                }
            }
        }
        Ok(DensityMatrix {
            n_qubits: n,
            entries: e,
        })
    }

    /// `ρ ⊗ |0…0⟩⟨0…0|` with the `k` fresh qubits placed above the register.
    pub fn tensor_zeros(&self, k: usize) -> Result<Self> {
        let n = self.n_qubits + k;
        Self::check_size(n)?;
        let d_old = self.dim();
        let d = 1usize << n;
        let mut entries = vec![czero(); d * d];
        for r in 0..d_old {
            entries[r * d..r * d + d_old]
                .copy_from_slice(&self.entries[r * d_old..(r + 1) * d_old]);
        }
        Ok(DensityMatrix {
            n_qubits: n,
            entries,
        })
    }

    /// Projector onto a computational basis state.
    pub fn basis_projector(n_qubits: usize, index: usize) -> Result<Self> {
        Self::check_size(n_qubits)?;
        let d = 1usize << n_qubits;
        if index >= d {
            return Err(Error::IndexOutOfRange { index, len: d });
        }
        let mut entries = vec![czero(); d * d];
        entries[index * d + index] = cone();
        Ok(DensityMatrix { n_qubits, entries })
    }
}
