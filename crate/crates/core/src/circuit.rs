//! Parameterized circuits: the hardware-efficient classifier ansatz and the
//! autoencoder ansatz, parameter binding, evaluation and inversion.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sim::{BoundCircuit, DensityMatrix, GateKind, GateSpec, StateVector};

/// Real parameter vector (radians), one entry per circuit slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", transparent)]
pub struct ParamVector<T: Real>(pub Vec<T>);

impl<T: Real> ParamVector<T> {
    pub fn zeros(n: usize) -> Self {
        ParamVector(vec![T::zero(); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.0
    }
}

impl<T: Real> From<Vec<T>> for ParamVector<T> {
    fn from(v: Vec<T>) -> Self {
        ParamVector(v)
    }
}

/// Entangling pattern of the CNOT layer in the hardware-efficient ansatz.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CnotTopology {
    /// control `i` → target `i+1` for `i = 0..n-2`
    #[default]
    Chain,
    /// chain plus the closing `n-1 → 0` link
    Ring,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCircuit {
    n_qubits: usize,
    gates: Vec<GateSpec>,
    n_params: usize,
}

impl ParamCircuit {
    /// Validates every gate and the slot invariants (each slot in range and used).
    pub fn new(n_qubits: usize, gates: Vec<GateSpec>, n_params: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::Size("circuit needs at least one qubit".into()));
        }
        let mut used = vec![false; n_params];
        for g in &gates {
            g.validate(n_qubits)?;
            if let Some(s) = g.param_slot {
                if s >= n_params {
                    return Err(Error::IndexOutOfRange {
                        index: s,
                        len: n_params,
                    });
                }
                used[s] = true;
            }
        }
        if let Some(s) = used.iter().position(|u| !u) {
            return Err(Error::Contract(format!("parameter slot {s} is never used")));
        }
        Ok(ParamCircuit {
            n_qubits,
            gates,
            n_params,
        })
    }

    pub fn empty(n_qubits: usize) -> Result<Self> {
        Self::new(n_qubits, Vec::new(), 0)
    }

    pub fn hardware_efficient(n_qubits: usize, depth: usize) -> Result<Self> {
        Self::hardware_efficient_with(n_qubits, depth, CnotTopology::Chain)
    }

    /// Per layer: RX, RY, RZ on every qubit (one slot each), then a CNOT layer.
    pub fn hardware_efficient_with(
        n_qubits: usize,
        depth: usize,
        topology: CnotTopology,
    ) -> Result<Self> {
        if n_qubits < 2 || depth < 1 {
            return Err(Error::Size(format!(
                "hardware-efficient ansatz needs ≥2 qubits and ≥1 layer, got ({n_qubits}, {depth})"
            )));
        }
        let mut gates = Vec::with_capacity(depth * 4 * n_qubits);
        let mut slot = 0;
        for _ in 0..depth {
            push_rotation_layer(&mut gates, n_qubits, &mut slot);
            for i in 0..n_qubits - 1 {
                gates.push(GateSpec::cnot(i, i + 1));
            }
            if topology == CnotTopology::Ring && n_qubits > 2 {
                gates.push(GateSpec::cnot(n_qubits - 1, 0));
            }
        }
        Self::new(n_qubits, gates, slot)
    }

    /// Per layer: RX, RY, RZ on every qubit, then parametric ZZ, YY and XX
    /// ladders over nearest neighbours.
    pub fn qae_ansatz(n_total: usize, n_latent: usize, depth: usize) -> Result<Self> {
        if n_latent < 1 || n_latent >= n_total {
            return Err(Error::Size(format!(
                "latent size {n_latent} must lie in 1..{n_total}"
            )));
        }
        if depth < 1 {
            return Err(Error::Size("autoencoder depth must be ≥ 1".into()));
        }
        let mut gates = Vec::new();
        let mut slot = 0;
        for _ in 0..depth {
            push_rotation_layer(&mut gates, n_total, &mut slot);
            for kind in [GateKind::Rzz, GateKind::Ryy, GateKind::Rxx] {
                for i in 0..n_total - 1 {
                    gates.push(GateSpec::entangler(kind, i, i + 1, slot));
                    slot += 1;
                }
            }
        }
        Self::new(n_total, gates, slot)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn gates(&self) -> &[GateSpec] {
        &self.gates
    }

    pub fn count(&self, kind: GateKind) -> usize {
        self.gates.iter().filter(|g| g.kind == kind).count()
    }

    pub fn check_params<T: Real>(&self, params: &ParamVector<T>) -> Result<()> {
        if params.len() != self.n_params {
            return Err(Error::Dimension {
                expected: self.n_params,
                got: params.len(),
            });
        }
        Ok(())
    }

    pub fn bind<T: Real>(&self, params: &ParamVector<T>) -> Result<BoundCircuit<T>> {
        self.check_params(params)?;
        let mut out = BoundCircuit::empty(self.n_qubits);
        for g in &self.gates {
            out.push(g.bind(g.param_slot.map(|s| params.0[s]))?);
        }
        Ok(out)
    }

    /// Applies every gate in order to `input`.
    pub fn evaluate<T: Real>(
        &self,
        params: &ParamVector<T>,
        input: &StateVector<T>,
    ) -> Result<StateVector<T>> {
        input.run(&self.bind(params)?)
    }

    /// `U ρ U†`.
    pub fn evaluate_density<T: Real>(
        &self,
        params: &ParamVector<T>,
        rho: &DensityMatrix<T>,
    ) -> Result<DensityMatrix<T>> {
        rho.evolve(&self.bind(params)?)
    }

    /// Reversed gate order with every rotation negated: the same parameter
    /// vector then realizes `U(θ)†`.
    pub fn inverse(&self) -> ParamCircuit {
        let gates = self
            .gates
            .iter()
            .rev()
            .map(|g| {
                let mut g = g.clone();
                if g.kind.is_parametric() {
                    g.negated = !g.negated;
                }
                g
            })
            .collect();
        ParamCircuit {
            n_qubits: self.n_qubits,
            gates,
            n_params: self.n_params,
        }
    }

    /// Backward light cone of a measurement on `readout`.
    ///
    /// Walking the gates in reverse, a gate is kept when it touches a qubit
    /// already in the cone, and its qubits then join the cone. Every dropped
    /// gate acts outside the cone at its own time step, so it commutes past
    /// the measured operator and leaves every readout unchanged. Returns the
    /// cone (ascending) and the kept gates relabeled so that `cone[k]` becomes
    /// qubit `k`. Slots of dropped gates stay in the parameter vector but no
    /// longer influence anything.
    pub fn light_cone(&self, readout: &[usize]) -> Result<(Vec<usize>, ParamCircuit)> {
        let mut inside = vec![false; self.n_qubits];
        for &q in readout {
            if q >= self.n_qubits {
                return Err(Error::IndexOutOfRange {
                    index: q,
                    len: self.n_qubits,
                });
            }
            inside[q] = true;
        }
        if readout.is_empty() {
            return Err(Error::Contract("light cone of an empty readout".into()));
        }
        let mut keep = vec![false; self.gates.len()];
        for (k, g) in self.gates.iter().enumerate().rev() {
            if g.targets.iter().any(|&q| inside[q]) {
                keep[k] = true;
                for &q in &g.targets {
                    inside[q] = true;
                }
            }
        }
        let cone: Vec<usize> = (0..self.n_qubits).filter(|&q| inside[q]).collect();
        let mut index = vec![0; self.n_qubits];
        for (k, &q) in cone.iter().enumerate() {
            index[q] = k;
        }
        let gates = self
            .gates
            .iter()
            .zip(&keep)
            .filter(|(_, &kept)| kept)
            .map(|(g, _)| {
                let mut g = g.clone();
                g.targets.iter_mut().for_each(|q| *q = index[*q]);
                g
            })
            .collect();
        let circuit = ParamCircuit {
            n_qubits: cone.len(),
            gates,
            n_params: self.n_params,
        };
        Ok((cone, circuit))
    }

    /// `used[s]` is true when some gate reads slot `s`.
    pub fn used_slots(&self) -> Vec<bool> {
        let mut used = vec![false; self.n_params];
        for s in self.gates.iter().filter_map(|g| g.param_slot) {
            used[s] = true;
        }
        used
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("circuit serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: ParamCircuit =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::new(raw.n_qubits, raw.gates, raw.n_params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

fn push_rotation_layer(gates: &mut Vec<GateSpec>, n: usize, slot: &mut usize) {
    for q in 0..n {
        for kind in [GateKind::Rx, GateKind::Ry, GateKind::Rz] {
            gates.push(GateSpec::rotation(kind, q, *slot));
            *slot += 1;
        }
    }
}
