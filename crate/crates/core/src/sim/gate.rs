//! Gate vocabulary and the dense matrices behind each kind.
//!
//! Every parametric gate is `exp(-i θ P / 2)` for its generator `P`
//! (a single Pauli or a Pauli product `P ⊗ P`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{c, cone, czero, Real, C};
use crate::sim::pauli::Pauli;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    Cnot,
    Rxx,
    Ryy,
    Rzz,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::Rx | GateKind::Ry | GateKind::Rz => 1,
            GateKind::Cnot | GateKind::Rxx | GateKind::Ryy | GateKind::Rzz => 2,
        }
    }

    pub fn is_parametric(self) -> bool {
        !matches!(self, GateKind::Cnot)
    }

    /// Pauli generator for rotation kinds.
    pub fn generator(self) -> Option<Pauli> {
        match self {
            GateKind::Rx | GateKind::Rxx => Some(Pauli::X),
            GateKind::Ry | GateKind::Ryy => Some(Pauli::Y),
            GateKind::Rz | GateKind::Rzz => Some(Pauli::Z),
            GateKind::Cnot => None,
        }
    }
}

/// One gate of a parameterized circuit.
///
/// For `Cnot`, `targets[0]` is the control. `negated` flips the sign of the
/// bound angle, which is how inverted circuits reuse the forward slots.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateSpec {
    pub kind: GateKind,
    pub targets: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param_slot: Option<usize>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub negated: bool,
}

impl GateSpec {
    pub fn rotation(kind: GateKind, qubit: usize, slot: usize) -> Self {
        debug_assert_eq!(kind.arity(), 1);
        GateSpec {
            kind,
            targets: vec![qubit],
            param_slot: Some(slot),
            negated: false,
        }
    }

    pub fn rx(qubit: usize, slot: usize) -> Self {
        Self::rotation(GateKind::Rx, qubit, slot)
    }

    pub fn ry(qubit: usize, slot: usize) -> Self {
        Self::rotation(GateKind::Ry, qubit, slot)
    }

    pub fn rz(qubit: usize, slot: usize) -> Self {
        Self::rotation(GateKind::Rz, qubit, slot)
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        GateSpec {
            kind: GateKind::Cnot,
            targets: vec![control, target],
            param_slot: None,
            negated: false,
        }
    }

    pub fn entangler(kind: GateKind, a: usize, b: usize, slot: usize) -> Self {
        debug_assert!(kind.arity() == 2 && kind.is_parametric());
        GateSpec {
            kind,
            targets: vec![a, b],
            param_slot: Some(slot),
            negated: false,
        }
    }

    /// Checks arity, distinct targets and the slot/kind pairing against a register size.
    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        if self.targets.len() != self.kind.arity() {
            return Err(Error::Contract(format!(
                "{:?} expects {} target(s), got {}",
                self.kind,
                self.kind.arity(),
                self.targets.len()
            )));
        }
        if self.kind.arity() == 2 && self.targets[0] == self.targets[1] {
            return Err(Error::Contract(format!(
                "{:?} targets must be distinct",
                self.kind
            )));
        }
        for &q in &self.targets {
            if q >= n_qubits {
                return Err(Error::IndexOutOfRange {
                    index: q,
                    len: n_qubits,
                });
            }
        }
        match (self.kind.is_parametric(), self.param_slot) {
            (true, None) => Err(Error::Contract(format!(
                "{:?} requires a parameter slot",
                self.kind
            ))),
            (false, Some(_)) => Err(Error::Contract(format!(
                "{:?} takes no parameter slot",
                self.kind
            ))),
            _ => Ok(()),
        }
    }

    /// Attaches a concrete angle, enforcing that one is given iff the gate is parametric.
    pub fn bind<T: Real>(&self, angle: Option<T>) -> Result<BoundGate<T>> {
        let angle = match (self.kind.is_parametric(), angle) {
            (true, Some(a)) => Some(if self.negated { -a } else { a }),
            (false, None) => None,
            (true, None) => return Err(Error::Contract(format!("{:?} needs an angle", self.kind))),
            (false, Some(_)) => {
                return Err(Error::Contract(format!("{:?} takes no angle", self.kind)))
            }
        };
        let mut targets = [0usize; 2];
        for (dst, &q) in targets.iter_mut().zip(&self.targets) {
            *dst = q;
        }
        Ok(BoundGate {
            kind: self.kind,
            targets,
            angle,
        })
    }
}

/// A gate with its angle resolved. Only the first `kind.arity()` targets are meaningful.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundGate<T> {
    pub kind: GateKind,
    pub targets: [usize; 2],
    pub angle: Option<T>,
}

impl<T: Real> BoundGate<T> {
    pub fn qubits(&self) -> &[usize] {
        &self.targets[..self.kind.arity()]
    }

    pub fn angle_or_zero(&self) -> T {
        self.angle.unwrap_or_else(T::zero)
    }

    pub fn inverse(&self) -> Self {
        BoundGate {
            kind: self.kind,
            targets: self.targets,
            angle: self.angle.map(|a| -a),
        }
    }
}

/// An ordered list of bound gates on a fixed register.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundCircuit<T> {
    pub n_qubits: usize,
    pub gates: Vec<BoundGate<T>>,
}

impl<T: Real> BoundCircuit<T> {
    pub fn empty(n_qubits: usize) -> Self {
        BoundCircuit {
            n_qubits,
            gates: Vec::new(),
        }
    }

    pub fn push(&mut self, gate: BoundGate<T>) {
        self.gates.push(gate);
    }
}

pub type Mat2<T> = [[C<T>; 2]; 2];
pub type Mat4<T> = [[C<T>; 4]; 4];

/// `exp(-i θ P / 2)` for a single-qubit rotation kind.
pub fn rotation_matrix<T: Real>(kind: GateKind, theta: T) -> Mat2<T> {
    let half = theta / T::lit(2.0);
    let (s, co) = half.sin_cos();
    let z = T::zero();
    match kind {
        GateKind::Rx => [[c(co, z), c(z, -s)], [c(z, -s), c(co, z)]],
        GateKind::Ry => [[c(co, z), c(-s, z)], [c(s, z), c(co, z)]],
        GateKind::Rz => [[c(co, -s), czero()], [czero(), c(co, s)]],
        other => panic!("{other:?} is not a single-qubit rotation"),
    }
}

/// Dense 4×4 matrix of a two-qubit kind. Local basis index is `b0 + 2·b1`
/// where `b0` is the bit of `targets[0]`.
pub fn two_qubit_matrix<T: Real>(kind: GateKind, theta: T) -> Mat4<T> {
    let mut m = [[czero::<T>(); 4]; 4];
    match kind {
        GateKind::Cnot => {
            // control = b0; flips b1 when b0 = 1
            m[0][0] = cone();
            m[2][2] = cone();
            m[3][1] = cone();
            m[1][3] = cone();
        }
        GateKind::Rxx | GateKind::Ryy | GateKind::Rzz => {
            let p = kind.generator().unwrap().matrix::<T>();
            let half = theta / T::lit(2.0);
            let (s, co) = half.sin_cos();
            let minus_i_s = c(T::zero(), -s);
            for r in 0..4 {
                for col in 0..4 {
                    let pp = p[r & 1][col & 1] * p[r >> 1][col >> 1];
                    let id = if r == col { c(co, T::zero()) } else { czero() };
                    m[r][col] = id + minus_i_s * pp;
                }
            }
        }
        other => panic!("{other:?} is not a two-qubit gate"),
    }
    m
}

pub fn matmul2<T: Real>(a: &Mat2<T>, b: &Mat2<T>) -> Mat2<T> {
    let mut out = [[czero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn adjoint2<T: Real>(a: &Mat2<T>) -> Mat2<T> {
    [
        [a[0][0].conj(), a[1][0].conj()],
        [a[0][1].conj(), a[1][1].conj()],
    ]
}

pub fn conj2<T: Real>(a: &Mat2<T>) -> Mat2<T> {
    [
        [a[0][0].conj(), a[0][1].conj()],
        [a[1][0].conj(), a[1][1].conj()],
    ]
}

pub fn identity2<T: Real>() -> Mat2<T> {
    [[cone(), czero()], [czero(), cone()]]
}
