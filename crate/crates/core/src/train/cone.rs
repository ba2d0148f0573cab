//! Light-cone reduction of a training problem.
//!
//! Readouts on a few qubits only see the backward light cone of those qubits.
//! Restricting the circuit and every input to that cone gives the same logits
//! and gradients on a smaller register, which is what makes deep 15-qubit
//! sweeps affordable.

use std::collections::BTreeMap;

use crate::circuit::ParamCircuit;
use crate::data::Dataset;
use crate::error::Result;
use crate::grad::GradientMethod;
use crate::scalar::Real;
use crate::sim::{PauliString, QuantumInput};

use super::model::QnnModel;

/// A model restricted to its light cone.
#[derive(Clone, Debug)]
pub struct ConeModel<T: Real> {
    /// Original qubit of each reduced qubit.
    pub cone: Vec<usize>,
    pub model: QnnModel<T>,
}

fn readout_qubits<T: Real>(observables: &[PauliString<T>]) -> Vec<usize> {
    let mut qs: Vec<usize> = observables
        .iter()
        .flat_map(|o| o.terms.keys().copied())
        .collect();
    qs.sort_unstable();
    qs.dedup();
    qs
}

/// The model's light cone and its restriction; `None` when the cone is the
/// whole register or there is nothing to measure.
pub fn cone_model<T: Real>(model: &QnnModel<T>) -> Result<Option<ConeModel<T>>> {
    let readout = readout_qubits(&model.observables);
    if readout.is_empty() {
        return Ok(None);
    }
    let (cone, ansatz) = model.ansatz.light_cone(&readout)?;
    if cone.len() == model.n_qubits() {
        return Ok(None);
    }
    let mut index = vec![0; model.n_qubits()];
    for (k, &q) in cone.iter().enumerate() {
        index[q] = k;
    }
    let observables = model
        .observables
        .iter()
        .map(|o| PauliString {
            terms: o
                .terms
                .iter()
                .map(|(&q, &p)| (index[q], p))
                .collect::<BTreeMap<_, _>>(),
            coefficient: o.coefficient,
        })
        .collect();
    Ok(Some(ConeModel {
        model: QnnModel {
            ansatz,
            params: model.params.clone(),
            observables,
        },
        cone,
    }))
}

/// Rough cost, in amplitude updates per gate, of one sample's forward pass or
/// forward-plus-gradient on `input`.
fn sample_cost<T: Real>(
    input: &QuantumInput<T>,
    circuit: &ParamCircuit,
    method: GradientMethod,
    forward_only: bool,
) -> f64 {
    let n = input.n_qubits() as i32;
    let used = circuit.used_slots().iter().filter(|&&u| u).count() as f64;
    match input {
        QuantumInput::Mixed(_) => {
            let passes = if forward_only { 1.0 } else { 2.0 * used + 1.0 };
            // U ρ U† touches every entry twice
            passes * 2.0 * 4f64.powi(n)
        }
        _ => {
            let passes = match (forward_only, method) {
                (true, _) => 1.0,
                (false, GradientMethod::Adjoint) => 3.0,
                (false, GradientMethod::ParameterShift) => 2.0 * used + 1.0,
            };
            passes * 2f64.powi(n)
        }
    }
}

/// Whether training (or, with `forward_only`, evaluating) on the reduced
/// form of `sample` is cheaper than on the original.
pub fn worthwhile<T: Real>(
    sample: &QuantumInput<T>,
    full: &ParamCircuit,
    reduced: &ConeModel<T>,
    method: GradientMethod,
    forward_only: bool,
) -> Result<bool> {
    Ok(match sample.reduce(&reduced.cone)? {
        Some(small) => {
            sample_cost(&small, &reduced.model.ansatz, method, forward_only)
                < sample_cost(sample, full, method, forward_only)
        }
        None => false,
    })
}

/// Every input reduced to `cone`, or `None` if any of them does not reduce.
pub fn reduce_all<T: Real>(
    inputs: &[QuantumInput<T>],
    cone: &[usize],
) -> Result<Option<Vec<QuantumInput<T>>>> {
    let mut out = Vec::with_capacity(inputs.len());
    for x in inputs {
        match x.reduce(cone)? {
            Some(r) => out.push(r),
            None => return Ok(None),
        }
    }
    Ok(Some(out))
}

/// `data` with its inputs replaced.
pub fn with_inputs<T: Real>(data: &Dataset<T>, inputs: Vec<QuantumInput<T>>) -> Dataset<T> {
    Dataset {
        inputs,
        labels: data.labels.clone(),
        n_classes: data.n_classes,
    }
}
