mod common;

use dplab_core::codec::DEFAULT_ENUMERATION_CAP;
use dplab_core::{
    decoder_output_dist, distortion, exhaustive_optimal_encoder, interpolate, joint_from_encoder,
    lloyd_train, mmse_decoder_for, perceptual_decoder_for, w1_exact, w2sq_exact,
    w_1d_closed_form, DiscreteDistribution, Encoder, LloydOptions, Order,
};
use proptest::prelude::*;

fn scalar_law(max_n: usize) -> impl Strategy<Value = DiscreteDistribution> {
    prop::collection::vec((-20i32..=20, 1u32..=50), 1..=max_n).prop_map(|atoms| {
        let total: u32 = atoms.iter().map(|a| a.1).sum();
        let (points, probs) = atoms
            .into_iter()
            .map(|(x, w)| (vec![f64::from(x) / 4.0], f64::from(w) / f64::from(total)))
            .unzip();
        DiscreteDistribution::new(points, probs).unwrap()
    })
}

fn planar_law(max_n: usize) -> impl Strategy<Value = DiscreteDistribution> {
    prop::collection::vec(((-3.0..3.0f64, -3.0..3.0f64), 0.05..1.0f64), 1..=max_n).prop_map(|atoms| {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let (points, probs) = atoms
            .into_iter()
            .map(|((x, y), w)| (vec![x, y], w / total))
            .unzip();
        DiscreteDistribution::new(points, probs).unwrap()
    })
}

/// A law together with an encoder onto `k` non-empty cells.
fn coded_law() -> impl Strategy<Value = (DiscreteDistribution, Encoder)> {
    (planar_law(7), 1usize..=3, any::<u64>()).prop_map(|(src, k, salt)| {
        let n = src.len();
        let k = k.min(n);
        let mut assignment: Vec<usize> = (0..n).map(|i| ((salt >> (i % 60)) as usize + i) % k).collect();
        for (z, a) in assignment.iter_mut().take(k).enumerate() {
            *a = z;
        }
        (src, Encoder::new(assignment, k).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_form_is_idempotent(d in planar_law(10)) {
        let again = DiscreteDistribution::new(d.points().to_vec(), d.probs().to_vec()).unwrap();
        prop_assert_eq!(again, d);
    }

    #[test]
    fn expectation_is_linear(d in planar_law(10), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let f = |x: &[f64]| x[0] * x[1];
        let g = |x: &[f64]| x[0] + 2.0 * x[1];
        let lhs = d.expect(|x| a * f(x) + b * g(x));
        let rhs = a * d.expect(f) + b * d.expect(g);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn conditionals_reassemble((src, enc) in coded_law()) {
        let joint = joint_from_encoder(&src, &enc).unwrap();
        let parts: Vec<(f64, DiscreteDistribution)> = (0..enc.codes())
            .map(|z| (joint.code_prob(z), joint.conditional(z).unwrap()))
            .collect();
        let rebuilt = DiscreteDistribution::mixture(parts.iter().map(|(w, d)| (*w, d))).unwrap();
        prop_assert_eq!(rebuilt.points(), src.points());
        for (p, q) in rebuilt.probs().iter().zip(src.probs()) {
            prop_assert!((p - q).abs() <= 1e-14);
        }
    }

    #[test]
    fn error_is_orthogonal_to_code_functions((src, enc) in coded_law(), salt in any::<u32>()) {
        let gd = mmse_decoder_for(&src, &enc).unwrap();
        let v = |z: usize| [f64::from((salt >> z) & 7) - 3.5, f64::from((salt >> (z + 8)) & 7) - 3.5];
        let inner: f64 = src
            .iter()
            .enumerate()
            .map(|(i, (x, p))| {
                let z = enc.code_of(i);
                let g = gd.output(z);
                p * ((x[0] - g[0]) * v(z)[0] + (x[1] - g[1]) * v(z)[1])
            })
            .sum();
        prop_assert!(inner.abs() <= 1e-12);
    }

    #[test]
    fn resampler_doubles_distortion((src, enc) in coded_law()) {
        let gd = mmse_decoder_for(&src, &enc).unwrap();
        let gp = perceptual_decoder_for(&src, &enc).unwrap();
        let d_d = distortion(&src, &enc, &gd).unwrap();
        let d_p = distortion(&src, &enc, &gp).unwrap();
        prop_assert!((d_p - 2.0 * d_d).abs() <= 1e-12);
        let out = decoder_output_dist(&src, &enc, &gp).unwrap();
        prop_assert_eq!(out.points(), src.points());
    }

    #[test]
    fn interpolated_distortion_follows_closed_form((src, enc) in coded_law(), alpha in 0.0..=1.0f64) {
        let gd = mmse_decoder_for(&src, &enc).unwrap();
        let gp = perceptual_decoder_for(&src, &enc).unwrap();
        let d_d = distortion(&src, &enc, &gd).unwrap();
        let dec = interpolate(&gd, &gp, alpha).unwrap();
        let d = distortion(&src, &enc, &dec.realized).unwrap();
        prop_assert!((d - (1.0 + (1.0 - alpha).powi(2)) * d_d).abs() <= 1e-12);
    }

    #[test]
    fn wasserstein_metric_axioms(a in planar_law(6), b in planar_law(6), c in planar_law(6)) {
        for (order, root) in [(Order::One, false), (Order::Two, true)] {
            let w = |x: &DiscreteDistribution, y: &DiscreteDistribution| {
                let cost = match order {
                    Order::One => w1_exact(x, y).unwrap().cost,
                    Order::Two => w2sq_exact(x, y).unwrap().cost,
                };
                if root { cost.sqrt() } else { cost }
            };
            prop_assert!(w(&a, &a).abs() <= 1e-12);
            prop_assert!((w(&a, &b) - w(&b, &a)).abs() <= 1e-12);
            prop_assert!(w(&a, &c) <= w(&a, &b) + w(&b, &c) + 1e-12);
        }
    }

    #[test]
    fn transport_matches_line_oracles(a in scalar_law(12), b in scalar_law(12)) {
        for (order, exp, lp) in [
            (Order::One, 1, w1_exact(&a, &b).unwrap()),
            (Order::Two, 2, w2sq_exact(&a, &b).unwrap()),
        ] {
            prop_assert!((lp.cost - w_1d_closed_form(&a, &b, order).unwrap()).abs() <= 1e-10);
            prop_assert!((lp.cost - common::monotone_cost(&a, &b, exp)).abs() <= 1e-10);
            prop_assert!(lp.marginal_error() <= 1e-12);
            prop_assert!(lp.pi.iter().flatten().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn lloyd_is_monotone(src in planar_law(12), k in 1usize..=4, seed in any::<u64>()) {
        let k = k.min(src.len());
        let out = lloyd_train(&src, k, &LloydOptions { seed, ..LloydOptions::default() }).unwrap();
        for w in out.history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
        }
        prop_assert!(out.encoder.first_empty_cell().is_none());
    }

    #[test]
    fn exhaustive_matches_brute_force(src in planar_law(6), k in 1usize..=3) {
        let k = k.min(src.len());
        let pair = exhaustive_optimal_encoder(&src, k, DEFAULT_ENUMERATION_CAP).unwrap();
        prop_assert!((pair.distortion - common::brute_force_mse(&src, k)).abs() <= 1e-12);
    }
}
