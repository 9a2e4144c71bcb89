use biased_walk::exact::{ExactBudget, ReflectedPropagator};
use biased_walk::kernel::reflected_kernel;
use biased_walk::simulate::{
    boundary_visits, martingale_diagnostic, simulate_batch, trajectory, SimPlan,
};
use biased_walk::{Error, ModelParams, ReflectedState};

fn plan(d: usize, lambda: f64, steps: usize, paths: usize, seed: u64) -> SimPlan {
    let p = ModelParams::new(d, lambda).unwrap();
    SimPlan::new(p, ReflectedState::origin(d), steps, paths, seed).unwrap()
}

#[test]
fn thread_count_does_not_change_the_summary() {
    let plan = plan(3, 0.4, 300, 1000, 5);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_batch(&plan).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
}

#[test]
fn speed_within_three_standard_errors() {
    for d in 1..=3 {
        for lambda in [0.25, 0.5, 0.75] {
            let plan = plan(d, lambda, 2000, 400, 17);
            let s = simulate_batch(&plan).unwrap();
            let v = plan.params.speed_entry();
            // |X_n^i| / n has variance of order Sigma_ii / n
            let se = (plan.params.covariance()[0][0] / plan.steps as f64 / plan.paths as f64).sqrt();
            for (i, m) in s.mean_endpoint.iter().enumerate() {
                assert!((m - v).abs() <= 3.0 * se, "d={d} lambda={lambda} i={i}: {m} vs {v}");
            }
        }
    }
}

#[test]
fn martingale_increments_are_centred() {
    let plan = plan(2, 0.5, 1000, 500, 3);
    let diag = martingale_diagnostic(&plan).unwrap();
    for (m, var) in diag.mean.iter().zip(&diag.variance) {
        assert!(m.abs() <= diag.hoeffding_radius());
        assert!(*var > 0.0 && *var <= 4.0);
    }
}

#[test]
fn mean_boundary_visits_match_the_exact_law() {
    let (d, lambda, n, m) = (2, 0.5, 200, 4000);
    let p = ModelParams::new(d, lambda).unwrap();
    let origin = ReflectedState::origin(d);
    let mut prop = ReflectedPropagator::new(&p, &origin, n, &ExactBudget::default()).unwrap();
    let mut expected = 1.0;
    for _ in 0..n {
        prop.step();
        prop.for_each(|c, mass| {
            if c.contains(&0) {
                expected += mass;
            }
        });
    }
    let visits = boundary_visits(&plan(d, lambda, n, m, 9)).unwrap();
    let counts: Vec<f64> = visits.per_path.iter().map(|&c| c as f64).collect();
    let mean = counts.iter().sum::<f64>() / m as f64;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    let se = (var / m as f64).sqrt();
    assert!((mean - expected).abs() <= 4.0 * se, "{mean} vs {expected} (se {se})");
    assert_eq!(visits.histogram.values().sum::<u64>(), m as u64);
    assert!(visits.per_path.iter().all(|&c| c >= 1));
}

#[test]
fn every_simulated_step_is_possible() {
    for (d, lambda) in [(1, 0.3), (2, 0.0), (3, 0.9)] {
        let plan = plan(d, lambda, 2000, 1, 21);
        let path = trajectory(&plan).unwrap();
        assert_eq!(path.len(), 2001);
        for w in path.windows(2) {
            assert!(reflected_kernel(&plan.params, &w[0]).prob(&w[1]) > 0.0);
        }
    }
}

#[test]
fn trajectory_is_path_zero_of_the_batch() {
    let single = plan(2, 0.5, 400, 1, 77);
    let path = trajectory(&single).unwrap();
    let batch = simulate_batch(&plan(2, 0.5, 400, 300, 77)).unwrap();
    let visits = path.iter().filter(|s| s.on_boundary()).count() as u64;
    assert_eq!(batch.boundary_visit_counts[0], visits);
}

#[test]
fn one_dimension_without_backtracking_is_deterministic() {
    let s = simulate_batch(&plan(1, 0.0, 500, 10, 1)).unwrap();
    assert_eq!(s.mean_endpoint, vec![1.0]);
    assert!(s.boundary_visit_counts.iter().all(|&c| c == 1));
    assert_eq!(s.martingale_mean, vec![0.0]);
}

#[test]
fn memory_budget_is_enforced() {
    let plan = plan(2, 0.5, 10, 1000, 0).with_memory_budget(100);
    assert!(matches!(simulate_batch(&plan), Err(Error::Resource(_))));
}
