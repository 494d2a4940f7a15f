//! Property-based invariants.

mod common;

use proptest::prelude::*;
use snn_stability::data::{read_examples_csv, write_examples_csv};
use snn_stability::model::make_signs;
use snn_stability::stability::{estimate_on_average_stability, StabilityOptions};
use snn_stability::theory::constants::constants;
use snn_stability::theory::spectrum::{rank_one_extremes, structured_extremes};
use snn_stability::theory::{
    gd_generalization_bound, overparam_thresholds, self_bounding_margin, sgd_stability_bound,
    smoothness_margin, weak_convexity_margin, CHECK_SLACK,
};
use snn_stability::{
    certify_bounds, ActivationKind, Example, InitPolicy, ModelState, Network, SignPattern,
    TrainConfig, Weights,
};

fn weights(d: usize, m: usize) -> impl Strategy<Value = Weights> {
    prop::collection::vec(-2.0f64..2.0, d * m).prop_map(move |v| Weights::from_columns(d, m, v).unwrap())
}

fn example(d: usize) -> impl Strategy<Value = Example> {
    (prop::collection::vec(-1.0f64..1.0, d), -1.0f64..1.0).prop_map(|(mut x, y)| {
        let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1.0 {
            x.iter_mut().for_each(|v| *v /= n);
        }
        Example::new(x, y)
    })
}

fn kind() -> impl Strategy<Value = ActivationKind> {
    prop_oneof![Just(ActivationKind::Tanh), Just(ActivationKind::Sigmoid)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn smoothness_and_self_bounding(k in kind(), w in weights(3, 8), w2 in weights(3, 8), z in example(3)) {
        let act = certify_bounds(k).unwrap();
        let net = Network::new(3, make_signs(8, SignPattern::Alternating), act).unwrap();
        let kc = constants(&act, 1.0, 1.0, 0.5, 8, 3);
        prop_assert!(smoothness_margin(&net, kc.rho, &w, &w2, &z) >= -CHECK_SLACK);
        prop_assert!(self_bounding_margin(&net, kc.rho, &w, &z) >= -CHECK_SLACK);
    }

    #[test]
    fn weak_convexity_from_zero_init(w in weights(3, 8), w2 in weights(3, 8), z in example(3)) {
        let act = certify_bounds(ActivationKind::Tanh).unwrap();
        let net = Network::new(3, make_signs(8, SignPattern::Alternating), act).unwrap();
        let w0 = Weights::zeros(3, 8);
        // ℓ(W₀; z) = y²/2 ≤ 1/2
        let kc = constants(&act, 1.0, 1.0, 0.5, 8, 3);
        prop_assert!(weak_convexity_margin(&net, &kc, &w, &w2, &w0, &z) >= -CHECK_SLACK);
    }

    #[test]
    fn curvature_never_exceeds_rho(w in weights(4, 6), z in example(4)) {
        let act = certify_bounds(ActivationKind::Tanh).unwrap();
        let net = Network::new(4, make_signs(6, SignPattern::Alternating), act).unwrap();
        let kc = constants(&act, 1.0, 1.0, 0.5, 6, 4);
        let ext = structured_extremes(&net, &w, &z);
        prop_assert!(ext.lambda_max <= kc.rho + CHECK_SLACK);
        prop_assert!(ext.lambda_min <= ext.lambda_max);
    }

    #[test]
    fn rank_one_extremes_bracket_the_diagonal(
        c in prop::collection::vec(-3.0f64..3.0, 1..12),
        seed in any::<u64>(),
    ) {
        let a: Vec<f64> = c.iter().enumerate().map(|(i, _)| ((seed >> (i % 60)) & 7) as f64 / 7.0 - 0.5).collect();
        let (lo, hi) = rank_one_extremes(&c, &a);
        let cmin = c.iter().copied().fold(f64::INFINITY, f64::min);
        let cmax = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = a.iter().map(|v| v * v).sum();
        // Weyl: adding a PSD rank-one term moves eigenvalues up by at most ‖a‖²
        prop_assert!(lo >= cmin - 1e-12 && lo <= cmin + total + 1e-12);
        prop_assert!(hi >= cmax - 1e-12 && hi <= cmax + total + 1e-12);
    }

    #[test]
    fn bounds_monotone_in_risks(
        risks in prop::collection::vec(0.0f64..1.0, 11),
        bump in 0.0f64..1.0,
        idx in 0usize..10,
    ) {
        let act = certify_bounds(ActivationKind::Tanh).unwrap();
        let kc = constants(&act, 1.0, 1.0, 0.5, 100, 5);
        let mut more = risks.clone();
        more[idx] += bump;
        let g1 = gd_generalization_bound(&kc, 64, 0.1, 10, &risks).unwrap();
        let g2 = gd_generalization_bound(&kc, 64, 0.1, 10, &more).unwrap();
        prop_assert!(g1 >= 0.0 && g2 >= g1);
        let s1 = sgd_stability_bound(&kc, 64, 0.1, 9, &risks).unwrap();
        let s2 = sgd_stability_bound(&kc, 64, 0.1, 9, &more).unwrap();
        prop_assert!(s1 >= 0.0 && s2 >= s1);
    }

    #[test]
    fn thresholds_grow_with_eta(eta in 0.001f64..0.2, t in 1usize..200) {
        let act = certify_bounds(ActivationKind::Tanh).unwrap();
        let kc = constants(&act, 1.0, 1.0, 0.5, 100, 5);
        let a = overparam_thresholds(&kc, 100, eta, t, 0.5);
        let b = overparam_thresholds(&kc, 100, 2.0 * eta, t, 0.5);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(x.required_m >= 0.0 && y.required_m >= x.required_m, "{}", x.name);
        }
    }

    #[test]
    fn examples_csv_round_trip(rows in prop::collection::vec((prop::collection::vec(-1.0f64..1.0, 3), -1.0f64..1.0), 1..20)) {
        let ex: Vec<Example> = rows.into_iter().map(|(x, y)| Example::new(x, y)).collect();
        let mut buf = Vec::new();
        write_examples_csv(&ex, &mut buf).unwrap();
        prop_assert_eq!(read_examples_csv(buf.as_slice()).unwrap(), ex);
    }

    #[test]
    fn model_state_round_trip(w in weights(2, 4), w0 in weights(2, 4), tanh in any::<bool>()) {
        let kind = if tanh { ActivationKind::Tanh } else { ActivationKind::Sigmoid };
        let net = Network::new(2, make_signs(4, SignPattern::Random { seed: 3 }), certify_bounds(kind).unwrap()).unwrap();
        let state = ModelState::new(net, w, w0).unwrap();
        let mut buf = Vec::new();
        state.write_to(&mut buf).unwrap();
        prop_assert_eq!(ModelState::read_from(buf.as_slice()).unwrap(), state);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn on_average_is_mean_of_per_index(n in 2usize..8, horizon in 0usize..6, seed in any::<u64>(), sgd in any::<bool>()) {
        let dist = common::teacher(3, 0.0);
        let init = common::student(3, 6, ActivationKind::Tanh, InitPolicy::Gaussian { scale: 0.3, seed: 1 });
        let cfg = TrainConfig {
            horizon,
            algorithm: if sgd { snn_stability::Algorithm::Sgd } else { snn_stability::Algorithm::Gd },
            ..TrainConfig::default()
        };
        let rep = estimate_on_average_stability(&dist, &init, n, &cfg, 2, seed, &StabilityOptions::default()).unwrap();
        let mean = rep.per_index_sq_distance.iter().sum::<f64>() / n as f64;
        prop_assert!((rep.on_average_sq - mean).abs() <= 1e-15 * (1.0 + mean));
        prop_assert!(rep.on_average_sq >= 0.0);
        prop_assert_eq!(rep.per_step_trace[0], 0.0);
    }
}
