//! The cardinality-constrained binary-quadratic asset-selection problem.
//!
//! Over the distance matrix `D` restricted to the top-K assets by market cap,
//! a selection `x` of exactly `M` assets minimizes
//!
//! ```text
//! beta * x' D e  -  (alpha / 2) * x' D x
//! ```
//!
//! where `e` is the all-ones vector. The linear term rewards centrality
//! (small total distance to the whole candidate universe), the quadratic term
//! rewards dissimilarity (selected assets far apart). Indices `0..N` are
//! forced in, indices `H..K` are excluded, and only `N..H` are decision
//! variables. `M = N` reduces to market-cap top-tier selection; `N = 0` is
//! the correlation balance selection (CBS) method.
//!
//! Indices here are 0-based storage positions; position 0 is MC rank 1 (the
//! largest asset). Reports speak in asset ids.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::market_data::DistanceMatrix;
use crate::multi_stage::StagePlan;

/// Problem-size and hyper parameters: universe K, liquidity cap H, forced
/// top-N, cardinality M, dissimilarity alpha, centrality beta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionParams {
    pub k: usize,
    pub h: usize,
    pub n: usize,
    pub m: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl SelectionParams {
    /// Enforce `0 <= N <= M <= H <= K` and nonnegative finite alpha, beta.
    pub fn validate(&self) -> Result<()> {
        if self.n > self.m {
            return Err(Error::Parameter(format!(
                "N <= M violated: N = {}, M = {}",
                self.n, self.m
            )));
        }
        if self.m > self.h {
            return Err(Error::Parameter(format!(
                "M <= H violated: M = {}, H = {}",
                self.m, self.h
            )));
        }
        if self.h > self.k {
            return Err(Error::Parameter(format!(
                "H <= K violated: H = {}, K = {}",
                self.h, self.k
            )));
        }
        if self.m == 0 {
            return Err(Error::Parameter("M must be at least 1".into()));
        }
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(Error::Parameter(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !self.beta.is_finite() || self.beta < 0.0 {
            return Err(Error::Parameter(format!("beta must be >= 0, got {}", self.beta)));
        }
        Ok(())
    }

    /// Decision-variable positions `N..H`.
    pub fn free_range(&self) -> std::ops::Range<usize> {
        self.n..self.h
    }
}

/// A selection problem: parameters, the top-K distance block and the
/// precomputed row sums of `D` (the vector `D e`).
#[derive(Debug, Clone)]
pub struct SelectionProblem {
    pub params: SelectionParams,
    pub d: DMatrix<f64>,
    pub row_sums: Vec<f64>,
    /// Asset ids for positions `0..K`, descending MC.
    pub asset_ids: Vec<String>,
}

/// A 0/1 assignment over the K candidate positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    x: Vec<bool>,
}

impl Selection {
    /// Build from the selected positions; validates against `params`.
    pub fn from_indices(indices: &[usize], params: &SelectionParams) -> Result<Selection> {
        let mut x = vec![false; params.k];
        for &i in indices {
            if i >= params.k {
                return Err(Error::Feasibility(format!(
                    "index {i} outside the candidate universe of size {}",
                    params.k
                )));
            }
            if x[i] {
                return Err(Error::Feasibility(format!("duplicate index {i}")));
            }
            x[i] = true;
        }
        let sel = Selection { x };
        sel.check_feasible(params)?;
        Ok(sel)
    }

    pub(crate) fn from_mask_unchecked(x: Vec<bool>) -> Selection {
        Selection { x }
    }

    /// Swap one selected position for an unselected one, keeping cardinality.
    pub(crate) fn flip_pair(&mut self, out_idx: usize, in_idx: usize) {
        self.x[out_idx] = false;
        self.x[in_idx] = true;
    }

    pub fn is_selected(&self, i: usize) -> bool {
        self.x[i]
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Selected positions in ascending order (the set script-K).
    pub fn selected_indices(&self) -> Vec<usize> {
        self.x
            .iter()
            .enumerate()
            .filter_map(|(i, &s)| s.then_some(i))
            .collect()
    }

    pub fn cardinality(&self) -> usize {
        self.x.iter().filter(|&&s| s).count()
    }

    /// Verify forced, excluded and cardinality constraints.
    pub fn check_feasible(&self, params: &SelectionParams) -> Result<()> {
        if self.x.len() != params.k {
            return Err(Error::Feasibility(format!(
                "selection length {} does not match K = {}",
                self.x.len(),
                params.k
            )));
        }
        for i in 0..params.n {
            if !self.x[i] {
                return Err(Error::Feasibility(format!(
                    "forced asset at position {i} (top {}) not selected",
                    params.n
                )));
            }
        }
        for i in params.h..params.k {
            if self.x[i] {
                return Err(Error::Feasibility(format!(
                    "excluded asset at position {i} (beyond top {}) selected",
                    params.h
                )));
            }
        }
        let card = self.cardinality();
        if card != params.m {
            return Err(Error::Feasibility(format!(
                "cardinality {card} does not equal M = {}",
                params.m
            )));
        }
        Ok(())
    }
}

/// Truncate a distance matrix to its top-K block and precompute row sums.
pub fn build_problem(d: &DistanceMatrix, params: SelectionParams) -> Result<SelectionProblem> {
    params.validate()?;
    if d.dim() < params.k {
        return Err(Error::Parameter(format!(
            "distance matrix has dimension {}, need at least K = {}",
            d.dim(),
            params.k
        )));
    }
    let k = params.k;
    let block = DMatrix::from_fn(k, k, |i, j| d.d[(i, j)]);
    let row_sums = (0..k)
        .map(|i| (0..k).map(|j| block[(i, j)]).sum())
        .collect();
    Ok(SelectionProblem {
        params,
        d: block,
        row_sums,
        asset_ids: d.mc_rank_order[..k].to_vec(),
    })
}

impl SelectionProblem {
    /// Evaluate `beta x' D e - (alpha / 2) x' D x` for a feasible selection.
    ///
    /// Accumulation runs in ascending index order so the value is bit
    /// reproducible for a given selection.
    pub fn objective(&self, sel: &Selection) -> Result<f64> {
        sel.check_feasible(&self.params)?;
        Ok(self.objective_unchecked(&sel.selected_indices()))
    }

    /// Objective over an ascending list of selected positions, no
    /// feasibility check.
    pub(crate) fn objective_unchecked(&self, selected: &[usize]) -> f64 {
        let mut linear = 0.0;
        for &i in selected {
            linear += self.row_sums[i];
        }
        let mut quad = 0.0;
        for &i in selected {
            for &j in selected {
                quad += self.d[(i, j)];
            }
        }
        self.params.beta * linear - 0.5 * self.params.alpha * quad
    }

    /// Objective change from deselecting `out_idx` and selecting `in_idx`,
    /// computed in O(M) from row interactions.
    pub fn objective_delta_swap(
        &self,
        sel: &Selection,
        out_idx: usize,
        in_idx: usize,
    ) -> Result<f64> {
        let free = self.params.free_range();
        if !free.contains(&out_idx) || !free.contains(&in_idx) {
            return Err(Error::Move(format!(
                "swap ({out_idx}, {in_idx}) leaves the free range {}..{}",
                free.start, free.end
            )));
        }
        if !sel.is_selected(out_idx) {
            return Err(Error::Move(format!("position {out_idx} is not selected")));
        }
        if sel.is_selected(in_idx) {
            return Err(Error::Move(format!("position {in_idx} is already selected")));
        }
        Ok(self.delta_swap_unchecked(sel, out_idx, in_idx))
    }

    pub(crate) fn delta_swap_unchecked(&self, sel: &Selection, out_idx: usize, in_idx: usize) -> f64 {
        // x' D x gains 2 * (sum_{j in S'} d[in][j]) - 2 * (sum_{j in S} d[out][j])
        // where S' = S \ {out}; the diagonal is zero.
        let mut out_sum = 0.0;
        let mut in_sum = 0.0;
        for j in 0..self.params.k {
            if sel.is_selected(j) {
                out_sum += self.d[(out_idx, j)];
                in_sum += self.d[(in_idx, j)];
            }
        }
        in_sum -= self.d[(in_idx, out_idx)];
        self.params.beta * (self.row_sums[in_idx] - self.row_sums[out_idx])
            - self.params.alpha * (in_sum - out_sum)
    }

    /// Swap delta in O(M) over an explicit member list: the forced prefix
    /// `0..N` plus `selected_free`, which must contain `out_idx`.
    pub(crate) fn delta_swap_over_members(
        &self,
        selected_free: &[usize],
        out_idx: usize,
        in_idx: usize,
    ) -> f64 {
        let mut out_sum = 0.0;
        let mut in_sum = 0.0;
        for j in 0..self.params.n {
            out_sum += self.d[(out_idx, j)];
            in_sum += self.d[(in_idx, j)];
        }
        for &j in selected_free {
            out_sum += self.d[(out_idx, j)];
            in_sum += self.d[(in_idx, j)];
        }
        in_sum -= self.d[(in_idx, out_idx)];
        self.params.beta * (self.row_sums[in_idx] - self.row_sums[out_idx])
            - self.params.alpha * (in_sum - out_sum)
    }

    /// Plain-text instance form: first line `K H N M alpha beta`, then K
    /// whitespace-separated rows of the distance matrix.
    pub fn to_instance_string(&self) -> String {
        let p = &self.params;
        let mut out = String::new();
        let _ = writeln!(out, "{} {} {} {} {} {}", p.k, p.h, p.n, p.m, p.alpha, p.beta);
        for i in 0..p.k {
            for j in 0..p.k {
                if j > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{}", self.d[(i, j)]);
            }
            out.push('\n');
        }
        out
    }

    /// Parse the instance form written by [`SelectionProblem::to_instance_string`].
    /// Asset ids are synthesized from the matrix position.
    pub fn from_instance_str(text: &str) -> Result<SelectionProblem> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse {
            line: 1,
            message: "empty instance".into(),
        })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected 'K H N M alpha beta', got {header:?}"),
            });
        }
        let parse_usize = |s: &str, what: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::Parse {
                line: 1,
                message: format!("cannot parse {what} from {s:?}"),
            })
        };
        let parse_f64 = |s: &str, what: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Parse {
                line: 1,
                message: format!("cannot parse {what} from {s:?}"),
            })
        };
        let params = SelectionParams {
            k: parse_usize(fields[0], "K")?,
            h: parse_usize(fields[1], "H")?,
            n: parse_usize(fields[2], "N")?,
            m: parse_usize(fields[3], "M")?,
            alpha: parse_f64(fields[4], "alpha")?,
            beta: parse_f64(fields[5], "beta")?,
        };
        params.validate()?;
        let k = params.k;
        let mut d = DMatrix::<f64>::zeros(k, k);
        let mut row = 0;
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            if row >= k {
                return Err(Error::Parse {
                    line: lineno + 2,
                    message: format!("more than {k} matrix rows"),
                });
            }
            let values: Vec<&str> = line.split_whitespace().collect();
            if values.len() != k {
                return Err(Error::Parse {
                    line: lineno + 2,
                    message: format!("expected {k} entries, got {}", values.len()),
                });
            }
            for (j, v) in values.iter().enumerate() {
                d[(row, j)] = v.parse().map_err(|_| Error::Parse {
                    line: lineno + 2,
                    message: format!("cannot parse distance {v:?}"),
                })?;
            }
            row += 1;
        }
        if row != k {
            return Err(Error::Parse {
                line: row + 2,
                message: format!("expected {k} matrix rows, found {row}"),
            });
        }
        let row_sums = (0..k).map(|i| (0..k).map(|j| d[(i, j)]).sum()).collect();
        Ok(SelectionProblem {
            params,
            d,
            row_sums,
            asset_ids: (0..k).map(|i| format!("rank{:04}", i + 1)).collect(),
        })
    }
}

/// The shipped hyper-parameter presets E1 through E6.
///
/// E1 is market-cap top-tier selection (N = M = 30). E2 through E4 are
/// single-stage with M = 30 and alpha = 1/M, beta = 1/H at N = 10, 5, 0
/// respectively (E4 is single-stage CBS). E5 and E6 are two-stage plans with
/// M(1) = M(2) = 20, M* = 30, alpha(1) = 1/M(1), alpha(2) = 2/M(2) and
/// beta = 1/H in both stages, at N = 0 and N = 5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    E1,
    E2,
    E3,
    E4,
    E5,
    E6,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::E1,
        Preset::E2,
        Preset::E3,
        Preset::E4,
        Preset::E5,
        Preset::E6,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::E1 => "E1",
            Preset::E2 => "E2",
            Preset::E3 => "E3",
            Preset::E4 => "E4",
            Preset::E5 => "E5",
            Preset::E6 => "E6",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Preset> {
        match s.trim().to_ascii_uppercase().as_str() {
            "E1" => Ok(Preset::E1),
            "E2" => Ok(Preset::E2),
            "E3" => Ok(Preset::E3),
            "E4" => Ok(Preset::E4),
            "E5" => Ok(Preset::E5),
            "E6" => Ok(Preset::E6),
            other => Err(Error::Config(format!(
                "unknown preset {other:?}, expected one of E1..E6"
            ))),
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Instantiate a preset over a universe of size `k` with liquidity cap `h`.
pub fn preset(name: Preset, k: usize, h: usize) -> Result<StagePlan> {
    let single = |n: usize, m: usize, alpha: f64, beta: f64| -> Result<StagePlan> {
        StagePlan::new(
            vec![SelectionParams { k, h, n, m, alpha, beta }],
            m,
        )
    };
    match name {
        // Alpha and beta are irrelevant at M = N; zero keeps the objective flat.
        Preset::E1 => single(30, 30, 0.0, 0.0),
        Preset::E2 => single(10, 30, 1.0 / 30.0, 1.0 / h as f64),
        Preset::E3 => single(5, 30, 1.0 / 30.0, 1.0 / h as f64),
        Preset::E4 => single(0, 30, 1.0 / 30.0, 1.0 / h as f64),
        Preset::E5 | Preset::E6 => {
            let n = if name == Preset::E5 { 0 } else { 5 };
            let beta = 1.0 / h as f64;
            StagePlan::new(
                vec![
                    SelectionParams { k, h, n, m: 20, alpha: 1.0 / 20.0, beta },
                    SelectionParams { k, h, n, m: 20, alpha: 2.0 / 20.0, beta },
                ],
                30,
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::DistanceMatrix;

    pub(crate) fn uniform_distance(k: usize, offdiag: f64) -> DistanceMatrix {
        let d = DMatrix::from_fn(k, k, |i, j| if i == j { 0.0 } else { offdiag });
        DistanceMatrix {
            d,
            mc_rank_order: (0..k).map(|i| format!("A{i:03}")).collect(),
        }
    }

    pub(crate) fn fixture_distance(values: &[&[f64]]) -> DistanceMatrix {
        let k = values.len();
        let d = DMatrix::from_fn(k, k, |i, j| values[i][j]);
        DistanceMatrix {
            d,
            mc_rank_order: (0..k).map(|i| format!("A{i:03}")).collect(),
        }
    }

    /// Symmetric 6x6 fixture with distinct entries.
    pub(crate) fn six_asset_fixture() -> DistanceMatrix {
        fixture_distance(&[
            &[0.0, 1.2, 0.7, 1.9, 0.3, 1.1],
            &[1.2, 0.0, 0.9, 0.4, 1.5, 0.8],
            &[0.7, 0.9, 0.0, 1.3, 0.6, 1.7],
            &[1.9, 0.4, 1.3, 0.0, 1.0, 0.5],
            &[0.3, 1.5, 0.6, 1.0, 0.0, 1.4],
            &[1.1, 0.8, 1.7, 0.5, 1.4, 0.0],
        ])
    }

    fn params(k: usize, h: usize, n: usize, m: usize, alpha: f64, beta: f64) -> SelectionParams {
        SelectionParams { k, h, n, m, alpha, beta }
    }

    #[test]
    fn uniform_universe_row_sums() {
        let d = uniform_distance(4, 2.0_f64.sqrt());
        let problem = build_problem(&d, params(4, 4, 0, 2, 1.0, 1.0)).unwrap();
        for rs in &problem.row_sums {
            assert!((rs - 3.0 * 2.0_f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_params_report_violated_inequality() {
        let d = uniform_distance(4, 1.0);
        let err = build_problem(&d, params(4, 4, 3, 2, 1.0, 1.0)).unwrap_err();
        assert!(err.to_string().contains("N <= M"), "{err}");
    }

    #[test]
    fn row_sums_match_hand_summation() {
        let d = fixture_distance(&[
            &[0.0, 0.5, 1.0, 1.5, 2.0],
            &[0.5, 0.0, 0.6, 1.1, 1.6],
            &[1.0, 0.6, 0.0, 0.7, 1.2],
            &[1.5, 1.1, 0.7, 0.0, 0.8],
            &[2.0, 1.6, 1.2, 0.8, 0.0],
        ]);
        let problem = build_problem(&d, params(5, 5, 0, 2, 1.0, 1.0)).unwrap();
        let expected = [5.0, 3.8, 3.5, 4.1, 5.6];
        for (rs, e) in problem.row_sums.iter().zip(expected) {
            assert!((rs - e).abs() < 1e-9);
        }
    }

    #[test]
    fn objective_linear_term_only() {
        let d = six_asset_fixture();
        let problem = build_problem(&d, params(6, 6, 0, 3, 0.0, 1.0)).unwrap();
        let sel = Selection::from_indices(&[0, 2, 5], &problem.params).unwrap();
        let expected = problem.row_sums[0] + problem.row_sums[2] + problem.row_sums[5];
        assert!((problem.objective(&sel).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn objective_quadratic_term_for_a_pair() {
        let d = six_asset_fixture();
        let problem = build_problem(&d, params(6, 6, 0, 2, 1.0, 0.0)).unwrap();
        let sel = Selection::from_indices(&[1, 4], &problem.params).unwrap();
        // Half of 2 * d[1][4] by symmetry.
        assert!((problem.objective(&sel).unwrap() - (-d.d[(1, 4)])).abs() < 1e-12);
    }

    #[test]
    fn objective_matches_double_sum_oracle() {
        let d = six_asset_fixture();
        let problem = build_problem(&d, params(6, 6, 0, 3, 1.0, 1.0)).unwrap();
        let sel = Selection::from_indices(&[0, 3, 4], &problem.params).unwrap();
        // Explicit double sum, coded independently.
        let idx = [0usize, 3, 4];
        let mut linear = 0.0;
        let mut quad = 0.0;
        for &i in &idx {
            for j in 0..6 {
                linear += d.d[(i, j)];
            }
            for &j in &idx {
                quad += d.d[(i, j)];
            }
        }
        let expected = 1.0 * linear - 0.5 * quad;
        assert!((problem.objective(&sel).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn infeasible_selection_is_rejected() {
        let d = six_asset_fixture();
        let problem = build_problem(&d, params(6, 4, 1, 2, 1.0, 1.0)).unwrap();
        // Wrong cardinality.
        assert!(Selection::from_indices(&[0], &problem.params).is_err());
        // Missing the forced asset.
        assert!(Selection::from_indices(&[1, 2], &problem.params).is_err());
        // Beyond the liquidity cap.
        assert!(Selection::from_indices(&[0, 5], &problem.params).is_err());
    }

    #[test]
    fn delta_swap_matches_full_recompute() {
        let d = six_asset_fixture();
        let problem = build_problem(&d, params(6, 6, 1, 3, 0.7, 0.4)).unwrap();
        let sel = Selection::from_indices(&[0, 1, 3], &problem.params).unwrap();
        for out_idx in [1usize, 3] {
            for in_idx in [2usize, 4, 5] {
                let delta = problem.objective_delta_swap(&sel, out_idx, in_idx).unwrap();
                let mut indices = vec![0usize];
                for &i in &[1usize, 3] {
                    if i != out_idx {
                        indices.push(i);
                    }
                }
                indices.push(in_idx);
                indices.sort_unstable();
                let swapped = Selection::from_indices(&indices, &problem.params).unwrap();
                let full = problem.objective(&swapped).unwrap() - problem.objective(&sel).unwrap();
                assert!(
                    (delta - full).abs() < 1e-9,
                    "swap ({out_idx}, {in_idx}): delta {delta} vs full {full}"
                );
            }
        }
    }

    #[test]
    fn swapping_between_identical_rows_is_neutral() {
        // Positions 1 and 2 have identical distance profiles.
        let d = fixture_distance(&[
            &[0.0, 1.0, 1.0, 0.5],
            &[1.0, 0.0, 0.2, 0.8],
            &[1.0, 0.2, 0.0, 0.8],
            &[0.5, 0.8, 0.8, 0.0],
        ]);
        let problem = build_problem(&d, params(4, 4, 0, 2, 1.3, 0.9)).unwrap();
        let sel = Selection::from_indices(&[1, 3], &problem.params).unwrap();
        let delta = problem.objective_delta_swap(&sel, 1, 2).unwrap();
        assert!(delta.abs() < 1e-12);
    }

    #[test]
    fn member_list_delta_equals_mask_delta() {
        let d = six_asset_fixture();
        let problem = build_problem(&d, params(6, 6, 1, 3, 0.7, 0.4)).unwrap();
        let sel = Selection::from_indices(&[0, 2, 4], &problem.params).unwrap();
        let selected_free = [4usize, 2]; // unsorted on purpose
        for (out_idx, in_idx) in [(2usize, 3usize), (4, 1), (2, 5)] {
            let by_mask = problem.delta_swap_unchecked(&sel, out_idx, in_idx);
            let by_list = problem.delta_swap_over_members(&selected_free, out_idx, in_idx);
            assert!((by_mask - by_list).abs() < 1e-12);
        }
    }

    #[test]
    fn forced_asset_cannot_move() {
        let d = six_asset_fixture();
        let problem = build_problem(&d, params(6, 5, 1, 2, 1.0, 1.0)).unwrap();
        let sel = Selection::from_indices(&[0, 2], &problem.params).unwrap();
        assert!(matches!(
            problem.objective_delta_swap(&sel, 0, 3),
            Err(Error::Move(_))
        ));
        // Excluded range is not a legal destination either.
        assert!(matches!(
            problem.objective_delta_swap(&sel, 2, 5),
            Err(Error::Move(_))
        ));
    }

    #[test]
    fn chained_deltas_agree_with_recomputation() {
        let d = six_asset_fixture();
        let problem = build_problem(&d, params(6, 6, 0, 3, 0.31, 0.17)).unwrap();
        let mut sel = Selection::from_indices(&[0, 1, 2], &problem.params).unwrap();
        let mut obj = problem.objective(&sel).unwrap();
        // Deterministic pseudo-random walk through legal swaps.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for step in 0..10_000 {
            let selected: Vec<usize> = sel.selected_indices();
            let unselected: Vec<usize> =
                (0..6).filter(|i| !sel.is_selected(*i)).collect();
            let out_idx = selected[(next() % selected.len() as u64) as usize];
            let in_idx = unselected[(next() % unselected.len() as u64) as usize];
            obj += problem.objective_delta_swap(&sel, out_idx, in_idx).unwrap();
            let mut indices: Vec<usize> = selected
                .into_iter()
                .filter(|&i| i != out_idx)
                .chain(std::iter::once(in_idx))
                .collect();
            indices.sort_unstable();
            sel = Selection::from_indices(&indices, &problem.params).unwrap();
            if step % 1000 == 0 {
                let full = problem.objective(&sel).unwrap();
                assert!((obj - full).abs() < 1e-6, "drift at step {step}");
            }
        }
        let full = problem.objective(&sel).unwrap();
        assert!((obj - full).abs() < 1e-6);
    }

    #[test]
    fn scaling_alpha_beta_scales_objective() {
        let d = six_asset_fixture();
        let base = build_problem(&d, params(6, 6, 0, 3, 0.4, 0.9)).unwrap();
        let scaled = build_problem(&d, params(6, 6, 0, 3, 0.4 * 7.0, 0.9 * 7.0)).unwrap();
        let sel = Selection::from_indices(&[1, 2, 5], &base.params).unwrap();
        let b = base.objective(&sel).unwrap();
        let s = scaled.objective(&sel).unwrap();
        assert!((s - 7.0 * b).abs() < 1e-9);
    }

    #[test]
    fn preset_e1_is_mc_top_tier() {
        let plan = preset(Preset::E1, 500, 150).unwrap();
        assert_eq!(plan.stages.len(), 1);
        assert_eq!(plan.stages[0].n, 30);
        assert_eq!(plan.stages[0].m, 30);
        assert_eq!(plan.m_star, 30);
    }

    #[test]
    fn preset_e5_two_stages_with_doubled_second_alpha() {
        let plan = preset(Preset::E5, 500, 150).unwrap();
        assert_eq!(plan.stages.len(), 2);
        assert_eq!(plan.stages[0].n, 0);
        assert_eq!(plan.stages[0].m, 20);
        assert_eq!(plan.stages[1].m, 20);
        assert_eq!(plan.m_star, 30);
        assert!((plan.stages[0].alpha - 1.0 / 20.0).abs() < 1e-15);
        assert!((plan.stages[1].alpha - 2.0 / 20.0).abs() < 1e-15);
    }

    #[test]
    fn preset_e6_beta_follows_h() {
        let plan = preset(Preset::E6, 500, 150).unwrap();
        assert_eq!(plan.stages[0].n, 5);
        for stage in &plan.stages {
            assert!((stage.beta - 1.0 / 150.0).abs() < 1e-15);
        }
    }

    #[test]
    fn preset_parsing() {
        assert_eq!("e4".parse::<Preset>().unwrap(), Preset::E4);
        assert!(matches!("E9".parse::<Preset>(), Err(Error::Config(_))));
    }

    #[test]
    fn instance_format_round_trip() {
        let d = six_asset_fixture();
        let problem = build_problem(&d, params(6, 5, 1, 3, 0.25, 0.125)).unwrap();
        let text = problem.to_instance_string();
        let back = SelectionProblem::from_instance_str(&text).unwrap();
        assert_eq!(back.params, problem.params);
        assert_eq!(back.d, problem.d);
        for (a, b) in back.row_sums.iter().zip(&problem.row_sums) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
