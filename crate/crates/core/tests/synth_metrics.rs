mod common;

use andor_core::dynamics::{default_sigma2_grid, log_grid, solve_optimal_weights, GroundTruthWeights};
use andor_core::metrics::*;
use andor_core::subsets::binomial;
use andor_core::synth::*;
use andor_core::{and_interactions, or_interactions, InteractionKind, InteractionVector, SubsetTable};
use common::*;
use proptest::prelude::*;

/// One unit AND effect at each order, on the nested sets {0}, {0,1}, ...
fn nested_chain(n: usize) -> GroundTruthWeights {
    GroundTruthWeights::new(
        SubsetTable::from_fn(n, |t| if t != 0 && t & (t + 1) == 0 { 1.0 } else { 0.0 }).unwrap(),
    )
}

#[test]
fn extraction_recovers_ground_truth_up_to_n10() {
    for n in [1, 4, 8, 10] {
        let spec = GroundTruthSpec::spread(n, 6, 0.1, 3.0, SignPolicy::Random, n as u64);
        let w = generate_ground_truth(&spec).unwrap();
        let y = converged_outputs(&w).unwrap();
        let i = and_interactions(y.values()).unwrap();
        for t in 1..1usize << n {
            assert!((i.effect(t) - w.values()[t]).abs() < 1e-10);
        }
    }
}

#[test]
fn spindle_initialization_follows_binomial_counts() {
    let n = 10;
    let mut mean = vec![0.0; n + 1];
    for seed in 0..100 {
        for (m, x) in mean.iter_mut().zip(order_mass(&spindle_initialization(n, seed).unwrap())) {
            *m += x / 100.0;
        }
    }
    // Every strictly ordered pair of binomial counts is ordered the same way.
    for a in 0..=n {
        for b in 0..=n {
            if binomial(n, a) < binomial(n, b) {
                assert!(mean[a] < mean[b], "orders {a} and {b}: {} vs {}", mean[a], mean[b]);
            }
        }
    }
    // The shape peaks in the middle.
    let peak = (0..=n).max_by(|&a, &b| mean[a].total_cmp(&mean[b])).unwrap();
    assert!((4..=6).contains(&peak));
}

#[test]
fn higher_orders_appear_as_noise_falls() {
    let w = nested_chain(10);
    let mut grid = default_sigma2_grid();
    grid.reverse();
    let orders: Vec<f64> = grid
        .iter()
        .map(|&s| {
            theo_distribution(&solve_optimal_weights(&w, s).unwrap())
                .unwrap()
                .mean_order()
                .unwrap()
        })
        .collect();
    assert!(orders.windows(2).all(|p| p[1] >= p[0]), "{orders:?}");
    assert!(orders.last().unwrap() > orders.first().unwrap());
}

#[test]
fn fit_recovers_grid_points() {
    let w = nested_chain(8);
    let grid = default_sigma2_grid();
    for &s in &grid {
        let real = theo_distribution(&solve_optimal_weights(&w, s).unwrap()).unwrap();
        let fit = fit_sigma(&real, &w, &grid).unwrap();
        assert_eq!(fit.distance, 0.0);
        // Distributions are flat at large σ², so ties may pick a smaller point
        // with the same profile.
        assert!(fit.sigma2_star <= s);
        let at = fit.curve.iter().find(|p| p.sigma2 == s).unwrap();
        assert_eq!(at.distance, 0.0);
    }
}

#[test]
fn fit_matches_an_exhaustive_rescan() {
    let spec = GroundTruthSpec::spread(7, 4, 0.5, 2.0, SignPolicy::Random, 2);
    let w = generate_ground_truth(&spec).unwrap();
    let real = theo_distribution(&solve_optimal_weights(&w, 0.37).unwrap()).unwrap();
    let grid = log_grid(1e-3, 1e2, 21);
    let fit = fit_sigma(&real, &w, &grid).unwrap();
    assert_eq!(fit, fit_sigma(&real, &w, &grid).unwrap());

    let mut best = (f64::INFINITY, f64::NAN);
    for &s in &grid {
        let d = distribution_distance(&real, &theo_distribution(&solve_optimal_weights(&w, s).unwrap()).unwrap()).unwrap();
        if d < best.0 {
            best = (d, s);
        }
    }
    assert_eq!(fit.sigma2_star, best.1);
    assert_eq!(fit.distance, best.0);
}

#[test]
fn off_grid_targets_land_on_a_bracket() {
    let w = nested_chain(10);
    let grid = default_sigma2_grid();
    for pair in grid.windows(2) {
        let mid = (pair[0] * pair[1]).sqrt();
        let real = theo_distribution(&solve_optimal_weights(&w, mid).unwrap()).unwrap();
        let fit = fit_sigma(&real, &w, &grid).unwrap();
        let lo_d = fit.curve.iter().find(|p| p.sigma2 == pair[0]).unwrap().distance;
        let hi_d = fit.curve.iter().find(|p| p.sigma2 == pair[1]).unwrap().distance;
        assert_eq!(fit.distance, lo_d.min(hi_d), "target {mid}");
    }
}

#[test]
fn real_distribution_combines_both_kinds() {
    let n = 4;
    let mut r = rng(6);
    let v = SubsetTable::new(n, random_vec(&mut r, 16, 2.0)).unwrap();
    let half = v.map(|x| 0.5 * x).unwrap();
    let both = vec![and_interactions(&half).unwrap(), or_interactions(&half).unwrap()];
    let and_only = vec![both[0].clone()];
    let d_both = order_distribution(std::slice::from_ref(&both), 0.0).unwrap();
    let d_and = order_distribution(&[and_only], 0.0).unwrap();
    let mass = |vs: &[InteractionVector]| -> f64 { vs.iter().map(|x| x.l1_norm()).sum() };
    assert!((d_both.z * n as f64 - mass(&both)).abs() < 1e-12);
    assert!(d_and.z < d_both.z);
}

fn vectors(n: usize) -> impl Strategy<Value = Vec<Vec<InteractionVector>>> {
    let one = prop::collection::vec(-5.0f64..5.0, 1 << n).prop_map(move |mut v| {
        v[0] = 0.0;
        InteractionVector::new(InteractionKind::And, SubsetTable::new(n, v).unwrap()).unwrap()
    });
    prop::collection::vec(prop::collection::vec(one, 1..3), 1..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nonempty_distributions_average_to_one(samples in vectors(5), tau in 0.0f64..3.0) {
        let d = order_distribution(&samples, tau).unwrap();
        prop_assert!(d.strength.iter().all(|&s| s >= 0.0));
        if d.empty {
            prop_assert!(d.strength.iter().all(|&s| s == 0.0));
        } else {
            let mean = d.strength.iter().sum::<f64>() / d.n as f64;
            prop_assert!((mean - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn distributions_ignore_common_scale(samples in vectors(4), tau in 0.0f64..3.0, c in 0.01f64..100.0) {
        let scaled: Vec<Vec<InteractionVector>> = samples
            .iter()
            .map(|s| {
                s.iter()
                    .map(|v| InteractionVector::new(v.kind(), v.effects().map(|x| c * x).unwrap()).unwrap())
                    .collect()
            })
            .collect();
        let a = order_distribution(&samples, tau).unwrap();
        let b = order_distribution(&scaled, c * tau).unwrap();
        // Effects sitting exactly on the threshold may flip under rounding.
        let on_edge = samples.iter().flatten().any(|v| {
            v.iter_nonempty().any(|(_, e)| ((e.abs() - tau) / tau.max(1e-300)).abs() < 1e-12)
        });
        if !on_edge {
            prop_assert!(max_abs_diff(&a.strength, &b.strength) < 1e-10);
        }
    }
}
