//! Classical-to-quantum encodings.

use crate::error::{Error, Result};
use crate::scalar::{Real, C};
use crate::sim::state::MAX_QUBITS;
use crate::sim::StateVector;

/// 1 where the value is strictly above 0.5.
pub fn binarize(v: &[f64]) -> Vec<u8> {
    v.iter().map(|&x| u8::from(x > 0.5)).collect()
}

/// `⊗_i (|0⟩ + (−1)^{b_i}|1⟩)/√2` with bit `i` on qubit `i`. Equivalent to a
/// Hadamard on every qubit followed by Z on the qubits whose bit is set.
pub fn phase_encode<T: Real>(bits: &[u8]) -> Result<StateVector<T>> {
    StateVector::phase_product(bits)
}

/// Zero-pads `v` to `2^n` entries and normalizes; amplitude `x` is entry `x`.
pub fn amplitude_encode<T: Real>(v: &[f64], n: usize) -> Result<StateVector<T>> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::Size(format!("amplitude encoding on {n} qubits")));
    }
    let dim = 1usize << n;
    if v.len() > dim {
        return Err(Error::Dimension {
            expected: dim,
            got: v.len(),
        });
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::Data(
            "cannot amplitude-encode an all-zero vector".into(),
        ));
    }
    let mut amps = vec![C::new(T::zero(), T::zero()); dim];
    for (a, &x) in amps.iter_mut().zip(v) {
        *a = C::new(T::lit(x / norm), T::zero());
    }
    StateVector::from_amplitudes(amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn re(s: &StateVector<f64>) -> Vec<f64> {
        s.amplitudes().iter().map(|a| a.re).collect()
    }

    #[test]
    fn binarize_examples() {
        assert_eq!(binarize(&[0.6, 0.5, 0.4]), vec![1, 0, 0]);
        assert_eq!(binarize(&[0.0; 4]), vec![0; 4]);
        assert_eq!(binarize(&[0.5000001]), vec![1]);
    }

    #[test]
    fn phase_encode_examples() {
        let h = FRAC_1_SQRT_2;
        assert_eq!(re(&phase_encode(&[0]).unwrap()), vec![h, h]);
        let minus = re(&phase_encode(&[1]).unwrap());
        assert!((minus[0] - h).abs() < 1e-15 && (minus[1] + h).abs() < 1e-15);
        // |+⟩ on qubit 0, |−⟩ on qubit 1: index x = b0 + 2 b1
        let s = re(&phase_encode(&[0, 1]).unwrap());
        let expected = [0.5, 0.5, -0.5, -0.5];
        for (a, b) in s.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(phase_encode::<f64>(&[]).is_err());
    }

    #[test]
    fn amplitude_encode_examples() {
        let mut v = vec![0.0; 784];
        v[0] = 1.0;
        let s = amplitude_encode::<f64>(&v, 10).unwrap();
        assert_eq!(s.dim(), 1024);
        assert_eq!(s.amplitudes()[0].re, 1.0);
        let s = re(&amplitude_encode(&[1.0, 1.0], 2).unwrap());
        assert!((s[0] - FRAC_1_SQRT_2).abs() < 1e-15 && (s[1] - FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(&s[2..], &[0.0, 0.0]);
        assert!(amplitude_encode::<f64>(&[0.0; 784], 10).is_err());
        assert!(amplitude_encode::<f64>(&[1.0; 5], 2).is_err());
    }

    #[test]
    fn encodings_are_unit_norm() {
        let bits: Vec<u8> = (0..15).map(|i| (i * 7 % 3 == 0) as u8).collect();
        assert!((phase_encode::<f64>(&bits).unwrap().norm_sqr() - 1.0).abs() < 1e-12);
        let v: Vec<f64> = (0..784).map(|i| (i % 17) as f64 / 17.0).collect();
        assert!((amplitude_encode::<f64>(&v, 10).unwrap().norm_sqr() - 1.0).abs() < 1e-12);
    }
}
