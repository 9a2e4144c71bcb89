use biased_walk::exact::{
    ballot_counts, enumerate_oracle, log_mgf, propagate, propagate_full, return_probability,
    ExactBudget, ReflectedPropagator,
};
use biased_walk::ldp::log_psi;
use biased_walk::{LatticePoint, ModelParams, ReflectedState};
use proptest::prelude::*;

fn params(d: usize, lambda: f64) -> ModelParams {
    ModelParams::new(d, lambda).unwrap()
}

#[test]
fn no_mass_is_lost_over_long_horizons() {
    for (d, n) in [(1, 500), (2, 500)] {
        for lambda in [0.0, 0.3, 0.7] {
            let p = params(d, lambda);
            let mut prop =
                ReflectedPropagator::new(&p, &ReflectedState::origin(d), n, &ExactBudget::default())
                    .unwrap();
            let mut worst = 0.0f64;
            for _ in 0..n {
                prop.step();
                let mut total = 0.0;
                prop.for_each(|_, m| total += m);
                worst = worst.max((total - 1.0).abs());
            }
            assert!(worst <= 1e-10, "d={d} lambda={lambda}: {worst:e}");
        }
    }
}

#[test]
fn propagation_agrees_with_rational_enumeration() {
    let budget = ExactBudget::default();
    for d in 1..=2 {
        for lambda in [0.0, 0.3, 0.7] {
            let p = params(d, lambda);
            for start in [vec![0i64; d], vec![2; d]] {
                let n = if d == 1 { 10 } else { 6 };
                let exact = enumerate_oracle(&p, &LatticePoint(start.clone()), n, &budget)
                    .unwrap()
                    .reflect()
                    .to_f64();
                let reflected = LatticePoint(start).reflect();
                let law = propagate(&p, &reflected, n).unwrap();
                assert_eq!(exact.len(), law.len());
                for (k, m) in exact.iter() {
                    assert!((law.get(k) - m).abs() <= 1e-12, "d={d} lambda={lambda} k={k:?}");
                }
            }
        }
    }
}

#[test]
fn full_chain_reflects_onto_the_reflected_chain() {
    for lambda in [0.0, 0.4] {
        let p = params(3, lambda);
        let start = LatticePoint(vec![1, -2, 0]);
        let full = propagate_full(&p, &start, 9).unwrap().reflect();
        let law = propagate(&p, &start.reflect(), 9).unwrap();
        assert_eq!(full.len(), law.len());
        for (k, m) in law.iter() {
            assert!((full.get(k) - m).abs() <= 1e-14);
        }
    }
}

#[test]
fn ballot_bound_on_the_full_window() {
    for n in 1..=30 {
        for alpha in -10..=10 {
            for beta in -10..=10 {
                let c = ballot_counts(n, alpha, beta).unwrap();
                assert!(c.q <= c.p);
                assert!(c.satisfies_bound(), "n={n} alpha={alpha} beta={beta}");
                let reachable = alpha.abs_diff(beta) as usize <= n
                    && (n as i64 - (beta - alpha)) % 2 == 0;
                assert_eq!(c.p > 0, reachable);
            }
        }
    }
}

#[test]
fn scaled_log_mgf_approaches_log_psi() {
    let p = params(2, 0.5);
    for s in [[0.5, -1.0], [1.0, 1.0], [-2.0, 0.3]] {
        let target = log_psi(&p, &s);
        let mut last_gap = f64::INFINITY;
        for n in [100, 200, 400] {
            let gap = (log_mgf(&p, &ReflectedState::origin(2), n, &s).unwrap() / n as f64
                - target)
                .abs();
            assert!(gap <= (3.0 * (n as f64).ln() + 2.0) / n as f64, "s={s:?} n={n}");
            assert!(gap < last_gap);
            last_gap = gap;
        }
    }
}

#[test]
fn return_probabilities_decay_like_rho_squared() {
    for d in 1..=2 {
        let p = params(d, 0.5);
        let a = return_probability(&p, 100).unwrap().ln();
        let b = return_probability(&p, 200).unwrap().ln();
        let per_step = (b - a) / 200.0;
        assert!((per_step - p.rho().ln()).abs() < 0.02 / d as f64 + 0.01, "d={d}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reflected_laws_are_probability_measures(
        d in 1usize..=3,
        lambda in prop_oneof![Just(0.0), 0.0..0.99f64],
        start in prop::collection::vec(0u64..4, 3),
        n in 0usize..25,
    ) {
        let p = params(d, lambda);
        let law = propagate(&p, &ReflectedState(start[..d].to_vec()), n).unwrap();
        prop_assert!((law.total_mass() - 1.0).abs() <= 1e-12);
        for (k, m) in law.iter() {
            prop_assert!(m > 0.0);
            // parity of the graph distance is preserved
            let parity = (k.norm() + start[..d].iter().sum::<u64>() + n as u64) % 2;
            prop_assert_eq!(parity, 0);
        }
    }

    #[test]
    fn tilt_zero_is_zero(d in 1usize..=3, n in 0usize..50) {
        let p = params(d, 0.5);
        prop_assert_eq!(log_mgf(&p, &ReflectedState::origin(d), n, &vec![0.0; d]).unwrap(), 0.0);
    }
}
