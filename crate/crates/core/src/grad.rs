//! Parameter-shift differentiation of logits and chain-rule assembly of loss
//! gradients.
//!
//! For `R_P(θ) = exp(-iθP/2)` every expectation is a sinusoid of period 2π in
//! each slot, so `∂⟨O⟩/∂θ_l = ½[⟨O⟩(θ_l + π/2) − ⟨O⟩(θ_l − π/2)]` exactly.
//! The adjoint sweep in [`AdjointPass`] produces the same numbers with one
//! backward pass; it is an opt-in accelerator for large registers.

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::circuit::{ParamCircuit, ParamVector};
use crate::error::{Error, Result};
use crate::scalar::{czero, Real, C};
use crate::sim::gate::{adjoint2, identity2, matmul2, rotation_matrix, BoundCircuit};
use crate::sim::kernel;
use crate::sim::program::{apply_op, unapply_op, Op, Program};
use crate::sim::{PauliString, QuantumInput, StateVector};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMethod {
    /// Two shifted circuit evaluations per slot.
    #[default]
    ParameterShift,
    /// Reverse sweep; pure-state inputs only (mixed inputs use parameter shift).
    Adjoint,
}

/// Copy of `params` with slot `l` moved by `sign · π/2`.
pub fn shifted_params<T: Real>(
    params: &ParamVector<T>,
    l: usize,
    sign: i8,
) -> Result<ParamVector<T>> {
    if l >= params.len() {
        return Err(Error::IndexOutOfRange {
            index: l,
            len: params.len(),
        });
    }
    let mut out = params.clone();
    let shift = T::FRAC_PI_2();
    if sign >= 0 {
        out.0[l] += shift;
    } else {
        out.0[l] -= shift;
    }
    Ok(out)
}

/// `∂ l_j / ∂ θ_l`, row-major `n_classes × n_params`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogitJacobian<T: Real> {
    n_classes: usize,
    n_params: usize,
    entries: Vec<T>,
}

impl<T: Real> LogitJacobian<T> {
    pub fn from_rows(n_classes: usize, n_params: usize, entries: Vec<T>) -> Result<Self> {
        if entries.len() != n_classes * n_params {
            return Err(Error::Dimension {
                expected: n_classes * n_params,
                got: entries.len(),
            });
        }
        Ok(LogitJacobian {
            n_classes,
            n_params,
            entries,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn get(&self, class: usize, slot: usize) -> T {
        self.entries[class * self.n_params + slot]
    }

    pub fn row(&self, class: usize) -> &[T] {
        &self.entries[class * self.n_params..(class + 1) * self.n_params]
    }
}

/// Logits `⟨O_j⟩` after the circuit (one evaluation).
pub fn logits<T: Real>(
    circuit: &ParamCircuit,
    params: &ParamVector<T>,
    input: &QuantumInput<T>,
    observables: &[PauliString<T>],
) -> Result<Vec<T>> {
    check_input(circuit, input)?;
    input.measure_after(&circuit.bind(params)?, observables)
}

fn check_input<T: Real>(circuit: &ParamCircuit, input: &QuantumInput<T>) -> Result<()> {
    if input.n_qubits() != circuit.n_qubits() {
        return Err(Error::Dimension {
            expected: circuit.n_qubits(),
            got: input.n_qubits(),
        });
    }
    Ok(())
}

pub fn logit_jacobian<T: Real>(
    circuit: &ParamCircuit,
    params: &ParamVector<T>,
    input: &QuantumInput<T>,
    observables: &[PauliString<T>],
) -> Result<LogitJacobian<T>> {
    let counter = AtomicUsize::new(0);
    logit_jacobian_counted(circuit, params, input, observables, &counter)
}

/// As [`logit_jacobian`], adding the number of shifted circuit evaluations to `evaluations`.
/// Every observable is read from the same shifted state.
pub fn logit_jacobian_counted<T: Real>(
    circuit: &ParamCircuit,
    params: &ParamVector<T>,
    input: &QuantumInput<T>,
    observables: &[PauliString<T>],
    evaluations: &AtomicUsize,
) -> Result<LogitJacobian<T>> {
    if observables.is_empty() {
        return Err(Error::Contract(
            "at least one observable is required".into(),
        ));
    }
    check_input(circuit, input)?;
    circuit.check_params(params)?;
    let m = observables.len();
    let p = params.len();
    let mut entries = vec![T::zero(); m * p];
    let half = T::lit(0.5);
    // a slot no gate reads has an identically zero column
    let used = circuit.used_slots();
    for l in (0..p).filter(|&l| used[l]) {
        let plus =
            input.measure_after(&circuit.bind(&shifted_params(params, l, 1)?)?, observables)?;
        let minus =
            input.measure_after(&circuit.bind(&shifted_params(params, l, -1)?)?, observables)?;
        evaluations.fetch_add(2, Ordering::Relaxed);
        for j in 0..m {
            entries[j * p + l] = half * (plus[j] - minus[j]);
        }
    }
    LogitJacobian::from_rows(m, p, entries)
}

/// `jacᵀ · dloss_dlogits`.
pub fn loss_gradient<T: Real>(jac: &LogitJacobian<T>, dloss_dlogits: &[T]) -> Result<Vec<T>> {
    if dloss_dlogits.len() != jac.n_classes {
        return Err(Error::Dimension {
            expected: jac.n_classes,
            got: dloss_dlogits.len(),
        });
    }
    let mut g = vec![T::zero(); jac.n_params];
    for (j, &w) in dloss_dlogits.iter().enumerate() {
        for (gl, &d) in g.iter_mut().zip(jac.row(j)) {
            *gl += w * d;
        }
    }
    Ok(g)
}

/// Central differences `(f(θ + ε e_l) − f(θ − ε e_l)) / 2ε`.
pub fn finite_difference<T: Real, F>(mut f: F, params: &ParamVector<T>, eps: T) -> Result<Vec<T>>
where
    F: FnMut(&ParamVector<T>) -> T,
{
    if eps <= T::zero() {
        return Err(Error::Contract(
            "finite-difference step must be positive".into(),
        ));
    }
    let mut work = params.clone();
    let mut out = Vec::with_capacity(params.len());
    for l in 0..params.len() {
        let orig = work.0[l];
        work.0[l] = orig + eps;
        let up = f(&work);
        work.0[l] = orig - eps;
        let down = f(&work);
        work.0[l] = orig;
        out.push((up - down) / (eps + eps));
    }
    Ok(out)
}

/// Forward state of a pure-input circuit, kept for a reverse sweep.
pub struct AdjointPass<'a, T: Real> {
    circuit: &'a ParamCircuit,
    bound: BoundCircuit<T>,
    program: Program<T>,
    final_state: Vec<C<T>>,
    observables: &'a [PauliString<T>],
    logits: Vec<T>,
}

impl<'a, T: Real> AdjointPass<'a, T> {
    pub fn forward(
        circuit: &'a ParamCircuit,
        params: &ParamVector<T>,
        input: &StateVector<T>,
        observables: &'a [PauliString<T>],
    ) -> Result<Self> {
        if input.n_qubits() != circuit.n_qubits() {
            return Err(Error::Dimension {
                expected: circuit.n_qubits(),
                got: input.n_qubits(),
            });
        }
        for o in observables {
            o.check_fits(input.n_qubits())?;
        }
        let bound = circuit.bind(params)?;
        let program = Program::compile(&bound);
        let mut state = input.amplitudes().to_vec();
        let mut scratch = Vec::new();
        for op in &program.ops {
            apply_op(&mut state, &mut scratch, op);
        }
        let logits = observables
            .iter()
            .map(|o| o.expectation_raw(&state))
            .collect();
        Ok(AdjointPass {
            circuit,
            bound,
            program,
            final_state: state,
            observables,
            logits,
        })
    }

    pub fn logits(&self) -> &[T] {
        &self.logits
    }

    /// Gradient of `Σ_j weights[j] · ⟨O_j⟩` with respect to every slot.
    pub fn backward(&self, weights: &[T]) -> Result<Vec<T>> {
        if weights.len() != self.observables.len() {
            return Err(Error::Dimension {
                expected: self.observables.len(),
                got: weights.len(),
            });
        }
        let mut lambda = vec![czero::<T>(); self.final_state.len()];
        for (o, &w) in self.observables.iter().zip(weights) {
            if w == T::zero() {
                continue;
            }
            let applied = o.apply_raw(&self.final_state);
            for (l, a) in lambda.iter_mut().zip(applied) {
                *l += a * w;
            }
        }
        self.backward_cotangent(lambda)
    }

    /// Output amplitudes of the forward pass.
    pub fn final_state(&self) -> &[C<T>] {
        &self.final_state
    }

    /// Gradient of any real `f(φ)` of the output state, given
    /// `lambda = ∂f/∂φ*` (so that `df = 2 Re⟨lambda|dφ⟩`).
    pub fn backward_cotangent(&self, mut lambda: Vec<C<T>>) -> Result<Vec<T>> {
        if lambda.len() != self.final_state.len() {
            return Err(Error::Dimension {
                expected: self.final_state.len(),
                got: lambda.len(),
            });
        }
        let mut phi = self.final_state.clone();
        let specs = self.circuit.gates();
        let mut grad = vec![T::zero(); self.circuit.n_params()];
        let mut scratch = Vec::new();
        let accumulate = |grad: &mut [T], gate_index: usize, d: T| {
            let spec = &specs[gate_index];
            if let Some(slot) = spec.param_slot {
                grad[slot] += if spec.negated { -d } else { d };
            }
        };
        for op in self.program.ops.iter().rev() {
            match op {
                Op::Single { q, members, .. } => {
                    let cross = kernel::cross_block(&lambda, &phi, *q);
                    let mut w = identity2::<T>();
                    for &gi in members.iter().rev() {
                        let g = &self.bound.gates[gi];
                        let p = g.kind.generator().expect("rotation").matrix::<T>();
                        let q_mat = matmul2(&matmul2(&w, &p), &adjoint2(&w));
                        let mut z = czero::<T>();
                        for a in 0..2 {
                            for b in 0..2 {
                                z += q_mat[a][b] * cross[a][b];
                            }
                        }
                        accumulate(&mut grad, gi, z.im);
                        w = matmul2(&w, &rotation_matrix(g.kind, g.angle_or_zero()));
                    }
                }
                Op::Two { member, .. } => {
                    let g = &self.bound.gates[*member];
                    let p = g.kind.generator().expect("entangler");
                    let pp = PauliString::new([(g.targets[0], p), (g.targets[1], p)], T::one());
                    let z = kernel::inner(&lambda, &pp.apply_raw(&phi));
                    accumulate(&mut grad, *member, z.im);
                }
                Op::CnotRun(_) => {}
            }
            unapply_op(&mut phi, &mut scratch, op);
            unapply_op(&mut lambda, &mut scratch, op);
        }
        Ok(grad)
    }
}

/// Logits and `∂L/∂θ` for one sample, where `dloss` maps logits to `∂L/∂l`.
pub fn sample_gradient<T: Real, F>(
    method: GradientMethod,
    circuit: &ParamCircuit,
    params: &ParamVector<T>,
    input: &QuantumInput<T>,
    observables: &[PauliString<T>],
    dloss: F,
) -> Result<(Vec<T>, Vec<T>)>
where
    F: FnOnce(&[T]) -> Result<Vec<T>>,
{
    match (method, input) {
        (GradientMethod::Adjoint, QuantumInput::Pure(_) | QuantumInput::PhaseBits(_)) => {
            let psi = input.pure_state()?.expect("pure input");
            let pass = AdjointPass::forward(circuit, params, &psi, observables)?;
            let weights = dloss(pass.logits())?;
            let g = pass.backward(&weights)?;
            Ok((pass.logits, g))
        }
        _ => {
            let l = logits(circuit, params, input, observables)?;
            let weights = dloss(&l)?;
            let jac = logit_jacobian(circuit, params, input, observables)?;
            let g = loss_gradient(&jac, &weights)?;
            Ok((l, g))
        }
    }
}
