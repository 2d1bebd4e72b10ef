//! Exact-solver oracle checks: the CBS special case, scaling invariance of
//! the argmin, and the plain-text instance harness.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sparsetrack_core::market_data::DistanceMatrix;
use sparsetrack_core::selection::{build_problem, Selection, SelectionParams, SelectionProblem};
use sparsetrack_core::solver::{solve, solve_exact, SaConfig};

fn random_metric(k: usize, seed: u64) -> DistanceMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<(f64, f64)> = (0..k)
        .map(|_| (rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)))
        .collect();
    let d = DMatrix::from_fn(k, k, |i, j| {
        let (dx, dy) = (points[i].0 - points[j].0, points[i].1 - points[j].1);
        (dx * dx + dy * dy).sqrt()
    });
    DistanceMatrix {
        d,
        mc_rank_order: (0..k).map(|i| format!("A{i:03}")).collect(),
    }
}

/// Brute-force CBS: minimize `beta x'De - (alpha/2) x'Dx` over all
/// M-subsets of the top H, no forced block, using the direct double-sum
/// formula. Written independently of the solver.
fn cbs_brute_force(d: &DistanceMatrix, h: usize, m: usize, alpha: f64, beta: f64) -> (f64, Vec<usize>) {
    let k = d.dim();
    let row_sum = |i: usize| -> f64 { (0..k).map(|j| d.d[(i, j)]).sum() };
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut subset: Vec<usize> = (0..m).collect();
    loop {
        let linear: f64 = subset.iter().map(|&i| row_sum(i)).sum();
        let mut quad = 0.0;
        for &i in &subset {
            for &j in &subset {
                quad += d.d[(i, j)];
            }
        }
        let obj = beta * linear - 0.5 * alpha * quad;
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, subset.clone()));
        }
        // Next M-combination of 0..h in lexicographic order.
        let mut idx = m;
        loop {
            if idx == 0 {
                return best.unwrap();
            }
            idx -= 1;
            if subset[idx] != idx + h - m {
                subset[idx] += 1;
                for later in idx + 1..m {
                    subset[later] = subset[later - 1] + 1;
                }
                break;
            }
        }
    }
}

#[test]
fn n_zero_problem_coincides_with_cbs() {
    for seed in 0..8u64 {
        let d = random_metric(12, seed + 40);
        let params = SelectionParams { k: 12, h: 9, n: 0, m: 4, alpha: 0.25, beta: 1.0 / 9.0 };
        let problem = build_problem(&d, params).unwrap();

        // Objectives agree on random feasible selections.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let mut pool: Vec<usize> = (0..9).collect();
            for i in 0..4 {
                let j = rng.gen_range(i..pool.len());
                pool.swap(i, j);
            }
            let mut chosen = pool[..4].to_vec();
            chosen.sort_unstable();
            let sel = Selection::from_indices(&chosen, &params).unwrap();
            let row_sum = |i: usize| -> f64 { (0..12).map(|j| d.d[(i, j)]).sum() };
            let linear: f64 = chosen.iter().map(|&i| row_sum(i)).sum();
            let mut quad = 0.0;
            for &i in &chosen {
                for &j in &chosen {
                    quad += d.d[(i, j)];
                }
            }
            let cbs_obj = params.beta * linear - 0.5 * params.alpha * quad;
            let obj = problem.objective(&sel).unwrap();
            assert!((obj - cbs_obj).abs() < 1e-9);
        }

        // And the minimizers coincide.
        let exact = solve_exact(&problem).unwrap();
        let (cbs_obj, cbs_set) = cbs_brute_force(&d, 9, 4, params.alpha, params.beta);
        assert_eq!(exact.selection.selected_indices(), cbs_set);
        assert!((exact.objective - cbs_obj).abs() < 1e-9);
    }
}

#[test]
fn scaling_alpha_beta_preserves_the_argmin() {
    for seed in 0..6u64 {
        let d = random_metric(14, seed + 70);
        let base = SelectionParams { k: 14, h: 11, n: 1, m: 4, alpha: 0.25, beta: 0.09 };
        let reference = solve_exact(&build_problem(&d, base).unwrap()).unwrap();
        for c in [0.5, 2.0, 10.0] {
            let scaled = SelectionParams { alpha: base.alpha * c, beta: base.beta * c, ..base };
            let result = solve_exact(&build_problem(&d, scaled).unwrap()).unwrap();
            assert_eq!(
                result.selection.selected_indices(),
                reference.selection.selected_indices(),
                "seed {seed}, c = {c}"
            );
        }
    }
}

#[test]
fn instance_file_harness_round_trips_through_the_exact_solver() {
    let d = random_metric(10, 5);
    let params = SelectionParams { k: 10, h: 8, n: 2, m: 4, alpha: 0.2, beta: 0.11 };
    let problem = build_problem(&d, params).unwrap();
    let direct = solve_exact(&problem).unwrap();

    let text = problem.to_instance_string();
    let parsed = SelectionProblem::from_instance_str(&text).unwrap();
    let via_file = solve_exact(&parsed).unwrap();

    assert_eq!(direct.selection.selected_indices(), via_file.selection.selected_indices());
    assert!((direct.objective - via_file.objective).abs() < 1e-12);
}

#[test]
fn heuristic_stays_within_the_exact_bound() {
    let mut optimal = 0usize;
    for seed in 0..20u64 {
        let d = random_metric(16, seed + 900);
        let params = SelectionParams { k: 16, h: 10, n: 1, m: 4, alpha: 0.25, beta: 0.1 };
        let problem = build_problem(&d, params).unwrap();
        let exact = solve_exact(&problem).unwrap();
        let heur = solve(&problem, &SaConfig::tuned(&problem, seed)).unwrap();
        assert!(heur.objective >= exact.objective - 1e-9);
        if (heur.objective - exact.objective).abs() <= 1e-9 {
            optimal += 1;
        }
    }
    assert!(optimal >= 18, "heuristic matched the oracle on only {optimal}/20");
}
