//! Property tests for the metric, objective, union-truncation and the
//! statistical tests.

use nalgebra::DMatrix;
use proptest::prelude::*;

use sparsetrack_core::evaluation::{levene_test, wilcoxon_signed_rank};
use sparsetrack_core::market_data::{
    correlation_to_distance, estimate_correlation, DistanceMatrix, Frequency, ReturnPanel,
    WeightingScheme,
};
use sparsetrack_core::multi_stage::{union_and_truncate, SelectedSet};
use sparsetrack_core::selection::{build_problem, Selection, SelectionParams};

fn return_panel(rows: Vec<Vec<f64>>) -> ReturnPanel {
    let l = rows[0].len();
    ReturnPanel {
        periods: (0..rows.len())
            .map(|i| {
                chrono::NaiveDate::from_ymd_opt(2020, 1, 1)
                    .unwrap()
                    .checked_add_days(chrono::Days::new(i as u64))
                    .unwrap()
            })
            .collect(),
        asset_ids: (0..l).map(|i| format!("A{i:02}")).collect(),
        returns: rows,
        index_returns: vec![0.0; 0],
        frequency: Frequency::Daily,
    }
}

fn returns_strategy(assets: usize, periods: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(
        proptest::collection::vec(-0.2f64..0.2, assets),
        periods,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Distances from any estimated correlation matrix form a metric.
    #[test]
    fn estimated_distances_are_metric(
        rows in (3usize..8).prop_flat_map(|l| returns_strategy(l, 12)),
        lambda in 0.0f64..1.0,
        linear in any::<bool>(),
    ) {
        let panel = return_panel(rows);
        let weighting = if linear { WeightingScheme::Linear } else { WeightingScheme::Uniform };
        let corr = match estimate_correlation(&panel, 12, weighting, lambda) {
            Ok(c) => c,
            Err(_) => return Ok(()), // degenerate draw
        };
        prop_assert!(corr.validate().is_ok());
        let d = correlation_to_distance(&corr, &corr.asset_ids).unwrap();
        prop_assert!(d.validate().is_ok());
        prop_assert!(d.triangle_violation(1e-9).is_none());
        for i in 0..d.dim() {
            prop_assert_eq!(d.d[(i, i)], 0.0);
            for j in 0..i {
                prop_assert!((0.0..=2.0 + 1e-12).contains(&d.d[(i, j)]));
            }
        }
    }

    // Swap deltas agree with full objective recomputation.
    #[test]
    fn swap_delta_equals_recompute(
        rows in returns_strategy(8, 14),
        selected_bits in proptest::collection::vec(any::<bool>(), 6),
        out_pick in 0usize..6,
        in_pick in 0usize..6,
        alpha in 0.0f64..2.0,
        beta in 0.0f64..2.0,
    ) {
        let panel = return_panel(rows);
        let corr = match estimate_correlation(&panel, 14, WeightingScheme::Uniform, 0.1) {
            Ok(c) => c,
            Err(_) => return Ok(()),
        };
        let d = correlation_to_distance(&corr, &corr.asset_ids).unwrap();
        // K = 8, H = 7, N = 1: free positions 1..7.
        let mut chosen: Vec<usize> = vec![0];
        for (i, bit) in selected_bits.iter().enumerate() {
            if *bit {
                chosen.push(i + 1);
            }
        }
        let m = chosen.len();
        let params = SelectionParams { k: 8, h: 7, n: 1, m, alpha, beta };
        let problem = build_problem(&d, params).unwrap();
        let sel = Selection::from_indices(&chosen, &params).unwrap();

        let selected_free: Vec<usize> = chosen.iter().copied().filter(|&i| i >= 1).collect();
        let unselected_free: Vec<usize> = (1..7).filter(|i| !chosen.contains(i)).collect();
        if selected_free.is_empty() || unselected_free.is_empty() {
            return Ok(());
        }
        let out_idx = selected_free[out_pick % selected_free.len()];
        let in_idx = unselected_free[in_pick % unselected_free.len()];

        let delta = problem.objective_delta_swap(&sel, out_idx, in_idx).unwrap();
        let mut swapped: Vec<usize> = chosen.iter().copied().filter(|&i| i != out_idx).collect();
        swapped.push(in_idx);
        swapped.sort_unstable();
        let swapped_sel = Selection::from_indices(&swapped, &params).unwrap();
        let full = problem.objective(&swapped_sel).unwrap() - problem.objective(&sel).unwrap();
        prop_assert!((delta - full).abs() < 1e-9);
    }

    // Union-truncation caps the size, keeps the smallest indices, and is
    // order invariant.
    #[test]
    fn union_truncation_properties(
        a in proptest::collection::btree_set(0usize..40, 1..12),
        b in proptest::collection::btree_set(0usize..40, 1..12),
        m_star in 1usize..15,
    ) {
        let sa = SelectedSet::from_stage(a.iter().copied().collect(), 1);
        let sb = SelectedSet::from_stage(b.iter().copied().collect(), 2);
        let merged = union_and_truncate(&[sa.clone(), sb.clone()], m_star).unwrap();
        let union: std::collections::BTreeSet<usize> = a.union(&b).copied().collect();

        prop_assert_eq!(merged.len(), union.len().min(m_star));
        // Every kept index is in the union, and anything dropped is larger.
        for idx in &merged.indices {
            prop_assert!(union.contains(idx));
        }
        if let Some(&largest_kept) = merged.indices.last() {
            for idx in &union {
                if !merged.indices.contains(idx) {
                    prop_assert!(*idx > largest_kept);
                }
            }
        }
        let swapped = union_and_truncate(&[sb, sa], m_star).unwrap();
        prop_assert_eq!(&merged.indices, &swapped.indices);
        prop_assert_eq!(&merged.provenance, &swapped.provenance);
    }

    // Wilcoxon is invariant under permutation; negation mirrors W and keeps
    // the p-value.
    #[test]
    fn wilcoxon_symmetries(
        mut values in proptest::collection::vec(-5.0f64..5.0, 12..40),
        rotate in 0usize..10,
    ) {
        values.retain(|&v| v != 0.0);
        if values.len() < 10 {
            return Ok(());
        }
        let base = wilcoxon_signed_rank(&values).unwrap();
        let mut permuted = values.clone();
        let shift = rotate % permuted.len();
        permuted.rotate_left(shift);
        let perm = wilcoxon_signed_rank(&permuted).unwrap();
        prop_assert_eq!(base.statistic, perm.statistic);
        prop_assert_eq!(base.p_value, perm.p_value);

        let negated: Vec<f64> = values.iter().map(|v| -v).collect();
        let neg = wilcoxon_signed_rank(&negated).unwrap();
        let n = values.len() as f64;
        prop_assert!((base.statistic + neg.statistic - n * (n + 1.0) / 2.0).abs() < 1e-9);
        prop_assert!((base.p_value - neg.p_value).abs() < 1e-12);
    }

    // Levene is invariant under shifting one group and under common scaling.
    #[test]
    fn levene_symmetries(
        a in proptest::collection::vec(-3.0f64..3.0, 3..12),
        b in proptest::collection::vec(-3.0f64..3.0, 3..12),
        shift in -50.0f64..50.0,
        scale in 0.25f64..4.0,
    ) {
        let base = levene_test(&[a.clone(), b.clone()]).unwrap();
        let shifted: Vec<f64> = a.iter().map(|v| v + shift).collect();
        let sh = levene_test(&[shifted, b.clone()]).unwrap();
        prop_assert!((base.statistic - sh.statistic).abs() < 1e-7 * (1.0 + base.statistic.abs()));

        let sa: Vec<f64> = a.iter().map(|v| v * scale).collect();
        let sb: Vec<f64> = b.iter().map(|v| v * scale).collect();
        let sc = levene_test(&[sa, sb]).unwrap();
        prop_assert!((base.statistic - sc.statistic).abs() < 1e-7 * (1.0 + base.statistic.abs()));
    }
}

// Distance shrinks strictly as correlation grows, over the whole range.
#[test]
fn distance_monotone_in_correlation() {
    let mut previous = f64::INFINITY;
    for k in 0..=200 {
        let rho = -1.0 + 2.0 * k as f64 / 200.0;
        let corr = sparsetrack_core::market_data::CorrelationMatrix {
            rho: DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]),
            asset_ids: vec!["a".into(), "b".into()],
            estimator_meta: sparsetrack_core::market_data::EstimatorMeta {
                shrinkage_intensity: 0.0,
                weighting: WeightingScheme::Uniform,
                psd_repaired: false,
            },
        };
        let d = correlation_to_distance(&corr, &corr.asset_ids).unwrap().d[(0, 1)];
        assert!(d < previous);
        previous = d;
    }
}

// A distance CSV written and re-read describes the same matrix.
#[test]
fn distance_csv_is_stable() {
    let points = [0.1f64, 0.9, 0.4, 0.7, 0.2];
    let d = DMatrix::from_fn(5, 5, |i, j| (points[i] - points[j]).abs());
    let dm = DistanceMatrix {
        d,
        mc_rank_order: (0..5).map(|i| format!("A{i}")).collect(),
    };
    let text = dm.to_csv();
    let back = DistanceMatrix::from_csv(&text).unwrap();
    assert_eq!(back.d, dm.d);
    assert_eq!(back.to_csv(), text);
}
