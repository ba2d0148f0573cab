//! Fused execution plan for a bound circuit.
//!
//! Consecutive single-qubit gates on a qubit collapse into one 2×2 matrix and
//! runs of CNOTs become a single basis permutation, so a hardware-efficient
//! layer costs roughly one pass per qubit plus one permutation pass.

use crate::scalar::{Real, C};
use crate::sim::gate::{
    identity2, matmul2, rotation_matrix, two_qubit_matrix, BoundCircuit, GateKind, Mat2, Mat4,
};
use crate::sim::kernel;

#[derive(Clone, Debug)]
pub enum Op<T> {
    /// Fused single-qubit block; `members` index the source gates in application order.
    Single {
        q: usize,
        m: Mat2<T>,
        members: Vec<usize>,
    },
    Two {
        q0: usize,
        q1: usize,
        m: Mat4<T>,
        member: usize,
    },
    CnotRun(Vec<(usize, usize)>),
}

#[derive(Clone, Debug)]
pub struct Program<T> {
    pub n_qubits: usize,
    pub ops: Vec<Op<T>>,
}

impl<T: Real> Program<T> {
    pub fn compile(circuit: &BoundCircuit<T>) -> Self {
        let n = circuit.n_qubits;
        let mut pending: Vec<Option<(Mat2<T>, Vec<usize>)>> = vec![None; n];
        let mut ops = Vec::new();

        fn flush<T: Real>(
            q: usize,
            pending: &mut [Option<(Mat2<T>, Vec<usize>)>],
            ops: &mut Vec<Op<T>>,
        ) {
            if let Some((m, members)) = pending[q].take() {
                ops.push(Op::Single { q, m, members });
            }
        }

        let gates = &circuit.gates;
        let mut i = 0;
        while i < gates.len() {
            let g = &gates[i];
            match g.kind {
                GateKind::Rx | GateKind::Ry | GateKind::Rz => {
                    let q = g.targets[0];
                    let m = rotation_matrix(g.kind, g.angle_or_zero());
                    let slot = pending[q].get_or_insert_with(|| (identity2(), Vec::new()));
                    slot.0 = matmul2(&m, &slot.0);
                    slot.1.push(i);
                    i += 1;
                }
                GateKind::Cnot => {
                    let mut run = Vec::new();
                    while i < gates.len() && gates[i].kind == GateKind::Cnot {
                        run.push((gates[i].targets[0], gates[i].targets[1]));
                        i += 1;
                    }
                    for &(c, t) in &run {
                        flush(c, &mut pending, &mut ops);
                        flush(t, &mut pending, &mut ops);
                    }
                    ops.push(Op::CnotRun(run));
                }
                GateKind::Rxx | GateKind::Ryy | GateKind::Rzz => {
                    let (q0, q1) = (g.targets[0], g.targets[1]);
                    flush(q0, &mut pending, &mut ops);
                    flush(q1, &mut pending, &mut ops);
                    ops.push(Op::Two {
                        q0,
                        q1,
                        m: two_qubit_matrix(g.kind, g.angle_or_zero()),
                        member: i,
                    });
                    i += 1;
                }
            }
        }
        for q in 0..n {
            flush(q, &mut pending, &mut ops);
        }
        Program { n_qubits: n, ops }
    }

    pub fn run(&self, amps: &mut [C<T>], scratch: &mut Vec<C<T>>) {
        for op in &self.ops {
            apply_op(amps, scratch, op);
        }
    }
}

pub(crate) fn apply_op<T: Real>(amps: &mut [C<T>], scratch: &mut Vec<C<T>>, op: &Op<T>) {
    match op {
        Op::Single { q, m, .. } => kernel::apply_single(amps, *q, m),
        Op::Two { q0, q1, m, .. } => kernel::apply_two(amps, *q0, *q1, m),
        Op::CnotRun(run) if run.len() == 1 => kernel::apply_cnot(amps, run[0].0, run[0].1),
        Op::CnotRun(run) => kernel::apply_cnot_run(amps, scratch, run),
    }
}

/// Applies the inverse of `op`.
pub(crate) fn unapply_op<T: Real>(amps: &mut [C<T>], scratch: &mut Vec<C<T>>, op: &Op<T>) {
    match op {
        Op::Single { q, m, .. } => kernel::apply_single(amps, *q, &crate::sim::gate::adjoint2(m)),
        Op::Two { q0, q1, m, .. } => {
            let mut adj = *m;
            for r in 0..4 {
                for c in 0..4 {
                    adj[r][c] = m[c][r].conj();
                }
            }
            kernel::apply_two(amps, *q0, *q1, &adj)
        }
        Op::CnotRun(run) => {
            let rev: Vec<_> = run.iter().rev().copied().collect();
            if rev.len() == 1 {
                kernel::apply_cnot(amps, rev[0].0, rev[0].1)
            } else {
                kernel::apply_cnot_run(amps, scratch, &rev)
            }
        }
    }
}
