//! Softmax, KL and distillation-loss identities on random logits.

use approx::assert_relative_eq;
use proptest::prelude::*;
use qnnkd::losses::{
    argmax, cross_entropy, kd_loss, kd_loss_batch, kd_loss_dlogits, kl_divergence, softmax,
    softmax_t, KdConfig, KlDirection,
};

fn logits(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-30.0f64..30.0, 2..=max_len)
}

fn distribution(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, len).prop_filter_map("nonzero mass", |w| {
        let s: f64 = w.iter().sum();
        (s > 1e-6).then(|| w.iter().map(|x| x / s).collect())
    })
}

proptest! {
    #[test]
    fn softmax_is_a_distribution_preserving_order(l in logits(10)) {
        let p = softmax(&l);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
        prop_assert_eq!(argmax(&p), argmax(&l));
    }

    #[test]
    fn softmax_ignores_constant_shifts(l in logits(8), c in -100.0f64..100.0) {
        let shifted: Vec<f64> = l.iter().map(|x| x + c).collect();
        for (a, b) in softmax(&l).iter().zip(softmax(&shifted)) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn temperature_flattens(l in logits(6), t in 1.0f64..10.0) {
        // entropy is nondecreasing in temperature
        let h = |p: &[f64]| -p.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>();
        prop_assert!(h(&softmax_t(&l, t)) >= h(&softmax(&l)) - 1e-12);
    }

    #[test]
    fn kl_is_nonnegative_and_zero_on_identical(
        (p, q) in (2usize..8).prop_flat_map(|n| (distribution(n), distribution(n)))
    ) {
        prop_assert!(kl_divergence(&p, &q).unwrap() >= -1e-12);
        prop_assert!(kl_divergence(&p, &p).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn kd_with_zero_alpha_is_cross_entropy(l in logits(6), t in 0.1f64..10.0, seed in any::<u64>()) {
        let teacher: Vec<f64> = l.iter().enumerate().map(|(i, x)| x * 0.3 + (seed.wrapping_mul(i as u64 + 1) % 7) as f64).collect();
        let label = (seed as usize) % l.len();
        let cfg = KdConfig::new(t, 0.0).unwrap();
        let ce = cross_entropy(&[softmax(&l)], &[label]).unwrap();
        prop_assert_eq!(kd_loss(&l, &teacher, label, &cfg).unwrap().to_bits(), ce.to_bits());
        prop_assert_eq!(
            kd_loss_batch(std::slice::from_ref(&l), &[teacher], &[label], &cfg).unwrap().to_bits(),
            ce.to_bits()
        );
    }

    #[test]
    // logits kept moderate so no probability reaches the log floor
    fn kd_gradient_matches_finite_differences(l in prop::collection::vec(-5.0f64..5.0, 2..=5), t in 0.5f64..5.0, alpha in 0.0f64..=1.0, teacher_first in any::<bool>()) {
        let teacher: Vec<f64> = l.iter().rev().map(|x| x * 0.5 + 0.1).collect();
        let mut cfg = KdConfig::new(t, alpha).unwrap();
        if teacher_first {
            cfg.direction = KlDirection::TeacherFirst;
        }
        let g = kd_loss_dlogits(&l, &teacher, 0, &cfg).unwrap();
        let eps = 1e-6;
        for k in 0..l.len() {
            let mut up = l.clone();
            up[k] += eps;
            let mut down = l.clone();
            down[k] -= eps;
            let fd = (kd_loss(&up, &teacher, 0, &cfg).unwrap() - kd_loss(&down, &teacher, 0, &cfg).unwrap()) / (2.0 * eps);
            prop_assert!((fd - g[k]).abs() <= 1e-6 * (1.0 + g[k].abs()));
        }
    }
}

#[test]
fn kd_is_a_convex_combination_of_its_terms() {
    let s = [0.3f64, -0.2, 0.9];
    let t = [0.1, 0.5, -0.4];
    let temp = 2.0;
    let kl = kl_divergence(&softmax_t(&s, temp), &softmax_t(&t, temp)).unwrap();
    let ce = -softmax(&s)[2].ln();
    let cfg = KdConfig::new(temp, 0.8).unwrap();
    assert_relative_eq!(
        kd_loss(&s, &t, 2, &cfg).unwrap(),
        0.8 * temp * temp * kl + 0.2 * ce,
        max_relative = 1e-14
    );
    assert_relative_eq!(
        kd_loss(&s, &t, 2, &KdConfig::new(temp, 1.0).unwrap()).unwrap(),
        temp * temp * kl,
        max_relative = 1e-14
    );
}
