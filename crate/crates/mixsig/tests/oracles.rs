//! Closed-form values the solvers must reproduce.

use mixsig::counterfactual::pseudo_private_values;
use mixsig::model::{examples, Combiner, Covariates, SignalCopula, SlopeFunction};
use mixsig::strategy::{solve_symmetric_fpa, SolveOptions};

fn ones(n: usize) -> Covariates {
    Covariates::new(n, 1, vec![1.0; n]).unwrap()
}

#[test]
fn uniform_ipv_bids() {
    for (n, frozen) in [
        (2usize, [0.05, 0.25, 0.45]),
        (3, [0.1 * 2.0 / 3.0, 0.5 * 2.0 / 3.0, 0.9 * 2.0 / 3.0]),
    ] {
        let (p, _) = solve_symmetric_fpa(
            &examples::uniform_ipv(n),
            &ones(n),
            &SolveOptions::default(),
        )
        .unwrap();
        let s = p.slice(&ones(n)).unwrap();
        for (a, want) in [0.1, 0.5, 0.9].iter().zip(frozen) {
            assert!((s.bid(0, *a) - want).abs() < 1e-7, "n={n} a={a}");
        }
    }
}

#[test]
fn additive_common_value_bids() {
    // v(a, a) = 2 (0.5 + 0.5 a) = 1 + a with independent signals, so B(a) = 1 + a / 2.
    let m = examples::additive_symmetric(
        2,
        SlopeFunction::linear(0.5, 1.0),
        SlopeFunction::linear(0.5, 1.0),
        SignalCopula::independence(2),
    );
    let (p, _) = solve_symmetric_fpa(&m, &ones(2), &SolveOptions::default()).unwrap();
    let s = p.slice(&ones(2)).unwrap();
    for (a, want) in [(0.2, 1.1), (0.6, 1.3), (1.0, 1.5)] {
        assert!((s.bid(0, a) - want).abs() < 1e-7, "a={a}: {}", s.bid(0, a));
    }
}

#[test]
fn ipv_pseudo_values_are_the_signals() {
    let alphas = [0.05, 0.3, 0.7, 0.95];
    for n in [2usize, 3] {
        let v = pseudo_private_values(&examples::uniform_ipv(n), &alphas, &ones(n)).unwrap();
        for (a, got) in alphas.iter().zip(&v) {
            assert!((got - a).abs() < 1e-8, "n={n}: {got} vs {a}");
        }
    }
}

#[test]
fn three_bidder_additive_pseudo_values() {
    let m = examples::from_first_bidder(
        Combiner::additive(vec![1.0; 3]),
        vec![SlopeFunction::linear(0.5, 1.0); 3],
        SignalCopula::independence(3),
    )
    .unwrap();
    let v = pseudo_private_values(&m, &[0.2, 0.6], &ones(3)).unwrap();
    for (got, want) in v.iter().zip([1.75, 2.25]) {
        assert!((got - want).abs() < 1e-8, "{got} vs {want}");
    }
}
