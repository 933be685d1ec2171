use mixsig::counterfactual::monte_carlo;
use mixsig::model::{examples, Combiner, Covariates, SignalCopula, SlopeFunction};
use mixsig::numerics::interp::CubicHermite;
use mixsig::sieve::design_grid;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn model(rho: f64) -> mixsig::model::MixedSignalModel {
    examples::from_first_bidder(
        Combiner::bilinear_interaction(),
        vec![
            SlopeFunction::linear(0.5, 1.0),
            SlopeFunction::linear(0.4, 1.2),
        ],
        SignalCopula::gaussian(2, rho).unwrap(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rescaling_leaves_valuations_unchanged(
        lambda in 0.1f64..10.0,
        a1 in 0.0f64..=1.0,
        a2 in 0.0f64..=1.0,
        z1 in 0.5f64..3.0,
        z2 in 0.5f64..3.0,
    ) {
        let m = model(0.2);
        let r = m.rescale(lambda).unwrap();
        let z = Covariates::scalar(&[z1, z2]).unwrap();
        for i in 0..2 {
            let v = m.evaluate_valuation(i, &[a1, a2], &z).unwrap();
            let w = r.evaluate_valuation(i, &[a1, a2], &z).unwrap();
            prop_assert!((v - w).abs() <= 1e-10 * (1.0 + v.abs()), "{v} vs {w}");
        }
    }

    #[test]
    fn normalized_model_has_unit_origin_gradient(lo in 0.1f64..1.0, span in 0.1f64..2.0) {
        let m = examples::from_first_bidder(
            Combiner::additive(vec![2.0, 0.5]),
            vec![SlopeFunction::linear(lo, lo + span), SlopeFunction::linear(0.3, 0.9)],
            SignalCopula::independence(2),
        )
        .unwrap();
        let z = Covariates::scalar(&[1.3, 1.7]).unwrap();
        let norm = m.normalized();
        for i in 0..2 {
            for g in norm.combiner(i).origin_gradient() {
                prop_assert!((g - 1.0).abs() <= 1e-12);
            }
            let v = m.evaluate_valuation(i, &[0.3, 0.6], &z).unwrap();
            let w = norm.evaluate_valuation(i, &[0.3, 0.6], &z).unwrap();
            prop_assert!((v - w).abs() <= 1e-10);
        }
    }

    #[test]
    fn copula_draws_lie_in_unit_cube(rho in -0.9f64..0.9, seed in any::<u64>()) {
        let c = SignalCopula::gaussian(2, rho).unwrap();
        let z = Covariates::scalar(&[1.0, 1.0]).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let a = c.sample(&z, &mut rng);
            prop_assert_eq!(a.len(), 2);
            prop_assert!(a.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn conditional_probability_is_monotone(
        rho in 0.0f64..0.9,
        given in 0.01f64..0.99,
        u in 0.0f64..1.0,
        step in 0.0f64..0.5,
    ) {
        let c = SignalCopula::gaussian(3, rho).unwrap();
        let z = Covariates::new(3, 1, vec![1.0; 3]).unwrap();
        let lo = c.cond_prob(&[given], &[u, 0.5], &z);
        let hi = c.cond_prob(&[given], &[(u + step).min(1.0), 0.5], &z);
        prop_assert!((0.0..=1.0).contains(&lo));
        prop_assert!(hi >= lo - 1e-12, "{lo} > {hi}");
    }

    #[test]
    fn nondecreasing_bernstein_coefficients_give_nondecreasing_slopes(
        mut coefs in prop::collection::vec(0.0f64..3.0, 2..8),
        t in 0.0f64..1.0,
        dt in 0.0f64..0.5,
    ) {
        coefs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let g = SlopeFunction::scalar(coefs).unwrap();
        prop_assert!(g.component(0, (t + dt).min(1.0)) >= g.component(0, t) - 1e-12);
        prop_assert!(g.component_deriv(0, t) >= -1e-10);
    }

    #[test]
    fn monotone_hermite_preserves_order(
        mut ys in prop::collection::vec(-5.0f64..5.0, 3..12),
        x in 0.0f64..1.0,
        dx in 0.0f64..0.5,
    ) {
        ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let k = ys.len();
        let xs: Vec<f64> = (0..k).map(|i| i as f64 / (k - 1) as f64).collect();
        let h = CubicHermite::monotone(xs.clone(), ys.clone()).unwrap();
        for (xi, yi) in xs.iter().zip(&ys) {
            prop_assert!((h.eval(*xi) - yi).abs() <= 1e-12);
        }
        prop_assert!(h.eval((x + dx).min(1.0)) >= h.eval(x) - 1e-12);
    }

    #[test]
    fn design_grid_has_full_tensor_size(n in 2usize..4, dim in 1usize..3, per_axis in 1usize..4) {
        let g = design_grid(n, dim, 1.0, 2.0, per_axis).unwrap();
        prop_assert_eq!(g.len(), per_axis.pow((n * dim) as u32));
        prop_assert!(g.iter().all(|z| z.n() == n && z.dim() == dim));
    }

    #[test]
    fn permuting_covariates_round_trips(values in prop::collection::vec(0.1f64..5.0, 6)) {
        let z = Covariates::new(3, 2, values).unwrap();
        let p = z.permuted(&[2, 0, 1]);
        prop_assert_eq!(p.bidder(0), z.bidder(2));
        prop_assert_eq!(p.permuted(&[1, 2, 0]), z);
    }

    #[test]
    fn constant_integrand_has_zero_standard_error(c in -10.0f64..10.0, seed in any::<u64>()) {
        let copula = SignalCopula::independence(2);
        let z = Covariates::scalar(&[1.0, 1.0]).unwrap();
        let (mean, se) = monte_carlo(&copula, &z, 256, seed, |_| c).unwrap();
        prop_assert!((mean - c).abs() <= 1e-12);
        prop_assert!(se.abs() <= 1e-12);
    }
}
