//! Variational classifier: an ansatz, its parameters and one readout per class.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::optim::init_params;
use crate::circuit::{ParamCircuit, ParamVector};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::grad::logits;
use crate::losses::argmax;
use crate::scalar::Real;
use crate::sim::{PauliString, QuantumInput};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct QnnModel<T: Real> {
    pub ansatz: ParamCircuit,
    pub params: ParamVector<T>,
    pub observables: Vec<PauliString<T>>,
}

/// Class `j` reads `⟨Z⟩` on qubit `j`.
pub fn z_readouts<T: Real>(n_classes: usize) -> Vec<PauliString<T>> {
    (0..n_classes).map(PauliString::z).collect()
}

impl<T: Real> QnnModel<T> {
    pub fn new(
        ansatz: ParamCircuit,
        params: ParamVector<T>,
        observables: Vec<PauliString<T>>,
    ) -> Result<Self> {
        ansatz.check_params(&params)?;
        if observables.is_empty() {
            return Err(Error::Contract(
                "a classifier needs at least one readout".into(),
            ));
        }
        for o in &observables {
            o.check_fits(ansatz.n_qubits())?;
        }
        Ok(QnnModel {
            ansatz,
            params,
            observables,
        })
    }

    /// Hardware-efficient ansatz, Z readouts, parameters drawn from `seed`.
    pub fn hardware_efficient(
        n_qubits: usize,
        depth: usize,
        n_classes: usize,
        seed: u64,
    ) -> Result<Self> {
        if n_classes < 2 || n_classes > n_qubits {
            return Err(Error::config(
                "n_classes",
                format!("need 2 ≤ classes ≤ qubits, got {n_classes} classes on {n_qubits} qubits"),
            ));
        }
        let ansatz = ParamCircuit::hardware_efficient(n_qubits, depth)?;
        let params = init_params(ansatz.n_params(), seed);
        Self::new(ansatz, params, z_readouts(n_classes))
    }

    pub fn n_qubits(&self) -> usize {
        self.ansatz.n_qubits()
    }

    pub fn n_classes(&self) -> usize {
        self.observables.len()
    }

    /// Readout expectations on the evolved input.
    pub fn forward(&self, input: &QuantumInput<T>) -> Result<Vec<T>> {
        logits(&self.ansatz, &self.params, input, &self.observables)
    }

    pub fn predict(&self, input: &QuantumInput<T>) -> Result<usize> {
        Ok(argmax(&self.forward(input)?))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: QnnModel<T> =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let ansatz = ParamCircuit::new(
            raw.ansatz.n_qubits(),
            raw.ansatz.gates().to_vec(),
            raw.ansatz.n_params(),
        )?;
        Self::new(ansatz, raw.params, raw.observables)
    }
}

/// Fraction of samples whose argmax logit equals the label.
pub fn evaluate<T: Real>(model: &QnnModel<T>, data: &Dataset<T>) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Data("evaluation on an empty set".into()));
    }
    let hits: Vec<bool> = data
        .inputs
        .par_iter()
        .zip(&data.labels)
        .map(|(x, &y)| Ok(model.predict(x)? == y))
        .collect::<Result<_>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / data.len() as f64)
}
