//! In-place amplitude kernels. Qubit `q` is bit `q` of the basis index.

use crate::scalar::{Real, C};
use crate::sim::gate::{rotation_matrix, two_qubit_matrix, BoundGate, GateKind, Mat2, Mat4};

#[inline]
fn insert_zero_bit(x: usize, bit: usize) -> usize {
    let low = x & ((1 << bit) - 1);
    ((x >> bit) << (bit + 1)) | low
}

pub fn apply_single<T: Real>(amps: &mut [C<T>], q: usize, m: &Mat2<T>) {
    let zero = T::zero();
    if m[0][1].re == zero && m[0][1].im == zero && m[1][0].re == zero && m[1][0].im == zero {
        return apply_diag(amps, q, m[0][0], m[1][1]);
    }
    let stride = 1usize << q;
    let [[m00, m01], [m10, m11]] = *m;
    for chunk in amps.chunks_exact_mut(2 * stride) {
        let (lo, hi) = chunk.split_at_mut(stride);
        for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
            let x = *a;
            let y = *b;
            *a = m00 * x + m01 * y;
            *b = m10 * x + m11 * y;
        }
    }
}

pub fn apply_diag<T: Real>(amps: &mut [C<T>], q: usize, d0: C<T>, d1: C<T>) {
    let stride = 1usize << q;
    for chunk in amps.chunks_exact_mut(2 * stride) {
        let (lo, hi) = chunk.split_at_mut(stride);
        for a in lo.iter_mut() {
            *a *= d0;
        }
        for b in hi.iter_mut() {
            *b *= d1;
        }
    }
}

pub fn apply_cnot<T: Real>(amps: &mut [C<T>], control: usize, target: usize) {
    let (lo, hi) = if control < target {
        (control, target)
    } else {
        (target, control)
    };
    let cbit = 1usize << control;
    let tbit = 1usize << target;
    for i in 0..amps.len() / 4 {
        let base = insert_zero_bit(insert_zero_bit(i, lo), hi) | cbit;
        amps.swap(base, base | tbit);
    }
}

/// Applies a run of CNOTs (in order) as a single basis permutation.
pub fn apply_cnot_run<T: Real>(
    amps: &mut [C<T>],
    scratch: &mut Vec<C<T>>,
    cnots: &[(usize, usize)],
) {
    scratch.clear();
    scratch.extend_from_slice(amps);
    for (x, a) in scratch.iter().enumerate() {
        let mut y = x;
        for &(c, t) in cnots {
            y ^= ((y >> c) & 1) << t;
        }
        amps[y] = *a;
    }
}

/// Dense two-qubit gate; local index is `b0 + 2·b1` with `b0` the bit of `q0`.
pub fn apply_two<T: Real>(amps: &mut [C<T>], q0: usize, q1: usize, m: &Mat4<T>) {
    let (lo, hi) = if q0 < q1 { (q0, q1) } else { (q1, q0) };
    let b0 = 1usize << q0;
    let b1 = 1usize << q1;
    for i in 0..amps.len() / 4 {
        let base = insert_zero_bit(insert_zero_bit(i, lo), hi);
        let idx = [base, base | b0, base | b1, base | b0 | b1];
        let v = [amps[idx[0]], amps[idx[1]], amps[idx[2]], amps[idx[3]]];
        for r in 0..4 {
            amps[idx[r]] = m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2] + m[r][3] * v[3];
        }
    }
}

pub fn apply_bound<T: Real>(amps: &mut [C<T>], gate: &BoundGate<T>) {
    match gate.kind {
        GateKind::Rx | GateKind::Ry | GateKind::Rz => {
            let m = rotation_matrix(gate.kind, gate.angle_or_zero());
            apply_single(amps, gate.targets[0], &m);
        }
        GateKind::Cnot => apply_cnot(amps, gate.targets[0], gate.targets[1]),
        GateKind::Rxx | GateKind::Ryy | GateKind::Rzz => {
            let m = two_qubit_matrix(gate.kind, gate.angle_or_zero());
            apply_two(amps, gate.targets[0], gate.targets[1], &m);
        }
    }
}

/// `Σ_rest conj(λ[rest, a]) φ[rest, b]` for the 2×2 block on qubit `q`.
pub fn cross_block<T: Real>(lambda: &[C<T>], phi: &[C<T>], q: usize) -> Mat2<T> {
    let stride = 1usize << q;
    let mut acc = [[C::new(T::zero(), T::zero()); 2]; 2];
    for (lc, pc) in lambda
        .chunks_exact(2 * stride)
        .zip(phi.chunks_exact(2 * stride))
    {
        let (l0, l1) = lc.split_at(stride);
        let (p0, p1) = pc.split_at(stride);
        for k in 0..stride {
            let a0 = l0[k].conj();
            let a1 = l1[k].conj();
            acc[0][0] += a0 * p0[k];
            acc[0][1] += a0 * p1[k];
            acc[1][0] += a1 * p0[k];
            acc[1][1] += a1 * p1[k];
        }
    }
    acc
}

pub fn inner<T: Real>(a: &[C<T>], b: &[C<T>]) -> C<T> {
    let mut acc = C::new(T::zero(), T::zero());
    for (x, y) in a.iter().zip(b) {
        acc += x.conj() * y;
    }
    acc
}

pub fn norm_sqr<T: Real>(a: &[C<T>]) -> T {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// `Σ a_k b_k` without conjugation.
pub fn inner_conj_free<T: Real>(a: &[C<T>], b: &[C<T>]) -> C<T> {
    let mut acc = C::new(T::zero(), T::zero());
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}
