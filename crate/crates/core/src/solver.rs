//! Solvers for the selection problem: an exact enumeration oracle for small
//! instances, simulated annealing over cardinality-preserving swap moves, and
//! the deterministic pairwise swap descent used as post-processing.
//!
//! Every intermediate state is feasible: forced assets stay in, excluded
//! assets stay out, and each move exchanges one selected free asset for one
//! unselected free asset, preserving cardinality. Randomness comes from
//! ChaCha8 keyed by `rng_seed`, so identical inputs reproduce identical
//! results on any platform; restart `r` draws from ChaCha stream `r + 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::selection::{Selection, SelectionProblem};

/// Feasible-selection count above which exact enumeration refuses to run.
pub const EXACT_ENUMERATION_LIMIT: u128 = 10_000_000;

/// Pass cap for the swap descent.
pub const DEFAULT_MAX_PASSES: usize = 50;

/// Simulated-annealing schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct SaConfig {
    pub initial_temperature: f64,
    /// Temperature multiplier applied after each sweep, in (0, 1).
    pub cooling_ratio: f64,
    pub sweeps: usize,
    pub moves_per_sweep: usize,
    pub restarts: usize,
    pub rng_seed: u64,
}

impl SaConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.initial_temperature.is_finite() || self.initial_temperature <= 0.0 {
            return Err(Error::Parameter(format!(
                "initial temperature must be positive, got {}",
                self.initial_temperature
            )));
        }
        if !self.cooling_ratio.is_finite() || self.cooling_ratio <= 0.0 || self.cooling_ratio >= 1.0 {
            return Err(Error::Parameter(format!(
                "cooling ratio must lie in (0, 1), got {}",
                self.cooling_ratio
            )));
        }
        if self.sweeps == 0 || self.moves_per_sweep == 0 || self.restarts == 0 {
            return Err(Error::Parameter(
                "sweeps, moves per sweep and restarts must all be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Default schedule sized to the problem: the initial temperature is the
    /// mean |delta| over 100 random swaps from a random feasible start (1.0
    /// when every sampled delta is zero), cooling 0.97, 300 sweeps of
    /// `4 (H - N)` moves, 8 restarts.
    pub fn tuned(problem: &SelectionProblem, rng_seed: u64) -> SaConfig {
        let p = &problem.params;
        let free = p.h - p.n;
        let mut temperature = 1.0;
        if p.m > p.n && free > p.m - p.n {
            // Temperature probe uses ChaCha stream 0, reserved for tuning.
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream(0);
            let mut state = random_feasible(problem, &mut rng);
            let mut total = 0.0;
            let mut count = 0u32;
            for _ in 0..100 {
                if let Some((out_idx, in_idx)) = state.propose(&mut rng) {
                    let delta = problem.delta_swap_unchecked(&state.mask, out_idx, in_idx);
                    total += delta.abs();
                    count += 1;
                    state.apply(out_idx, in_idx);
                }
            }
            if count > 0 && total > 0.0 {
                temperature = total / f64::from(count);
            }
        }
        SaConfig {
            initial_temperature: temperature,
            cooling_ratio: 0.97,
            sweeps: 300,
            moves_per_sweep: (4 * free).max(1),
            restarts: 8,
            rng_seed,
        }
    }

    /// Small fixed schedule for unit tests.
    pub fn quick_test(rng_seed: u64) -> SaConfig {
        SaConfig {
            initial_temperature: 1.0,
            cooling_ratio: 0.95,
            sweeps: 80,
            moves_per_sweep: 64,
            restarts: 3,
            rng_seed,
        }
    }
}

/// Outcome of a solve: the selection, its objective, and the objective after
/// each phase.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub selection: Selection,
    pub objective: f64,
    pub stage_log: Vec<(String, f64)>,
    pub seed_used: u64,
}

/// One applied swap in the descent, for monotonicity audits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwapEvent {
    pub out_idx: usize,
    pub in_idx: usize,
    pub delta: f64,
    pub objective_after: f64,
}

/// Exact binomial coefficient, saturating at `u128::MAX` on overflow.
fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k.min(n));
    let mut c: u128 = 1;
    for i in 1..=k {
        c = match c.checked_mul((n - k + i) as u128) {
            Some(v) => v / i as u128,
            None => return u128::MAX,
        };
    }
    c
}

/// Enumerate every feasible selection and return the global minimizer.
///
/// Refuses instances with more than [`EXACT_ENUMERATION_LIMIT`] feasible
/// selections. Objective ties break toward the lexicographically smallest
/// index set, i.e. toward larger-MC assets.
pub fn solve_exact(problem: &SelectionProblem) -> Result<SolveResult> {
    let p = &problem.params;
    let combinations = binomial(p.h - p.n, p.m - p.n);
    if combinations > EXACT_ENUMERATION_LIMIT {
        return Err(Error::Capacity {
            combinations,
            limit: EXACT_ENUMERATION_LIMIT,
        });
    }

    let forced: Vec<usize> = (0..p.n).collect();
    let mut linear = 0.0;
    let mut quad = 0.0;
    for &i in &forced {
        linear += problem.row_sums[i];
        for &j in &forced {
            quad += problem.d[(i, j)];
        }
    }

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut members = forced.clone();
    // Depth-first over free picks in ascending order; the first optimum found
    // is the lexicographically smallest.
    fn descend(
        problem: &SelectionProblem,
        next_free: usize,
        remaining: usize,
        members: &mut Vec<usize>,
        linear: f64,
        quad: f64,
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        if remaining == 0 {
            let obj = problem.params.beta * linear - 0.5 * problem.params.alpha * quad;
            if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                *best = Some((obj, members.clone()));
            }
            return;
        }
        let h = problem.params.h;
        for v in next_free..h {
            if h - v < remaining {
                break;
            }
            let mut cross = 0.0;
            for &j in members.iter() {
                cross += problem.d[(v, j)];
            }
            members.push(v);
            descend(
                problem,
                v + 1,
                remaining - 1,
                members,
                linear + problem.row_sums[v],
                quad + 2.0 * cross,
                best,
            );
            members.pop();
        }
    }
    descend(
        problem,
        p.n,
        p.m - p.n,
        &mut members,
        linear,
        quad,
        &mut best,
    );

    let (_, indices) = best.expect("at least one feasible selection exists");
    let selection = Selection::from_indices(&indices, p)?;
    let objective = problem.objective(&selection)?;
    Ok(SolveResult {
        selection,
        objective,
        stage_log: vec![("exact".to_string(), objective)],
        seed_used: 0,
    })
}

/// Mutable annealing state: the selection mask plus index lists for O(1)
/// uniform sampling of swap endpoints.
struct SaState {
    mask: Selection,
    selected_free: Vec<usize>,
    unselected_free: Vec<usize>,
}

impl SaState {
    fn propose<R: Rng>(&self, rng: &mut R) -> Option<(usize, usize)> {
        if self.selected_free.is_empty() || self.unselected_free.is_empty() {
            return None;
        }
        let a = rng.gen_range(0..self.selected_free.len());
        let b = rng.gen_range(0..self.unselected_free.len());
        Some((self.selected_free[a], self.unselected_free[b]))
    }

    fn apply(&mut self, out_idx: usize, in_idx: usize) {
        let a = self
            .selected_free
            .iter()
            .position(|&v| v == out_idx)
            .expect("out index is selected");
        let b = self
            .unselected_free
            .iter()
            .position(|&v| v == in_idx)
            .expect("in index is unselected");
        self.selected_free[a] = in_idx;
        self.unselected_free[b] = out_idx;
        self.mask.flip_pair(out_idx, in_idx);
    }
}

/// Uniformly random feasible selection: forced assets in, `M - N` free
/// assets drawn without replacement.
fn random_feasible<R: Rng>(problem: &SelectionProblem, rng: &mut R) -> SaState {
    let p = &problem.params;
    let mut free: Vec<usize> = p.free_range().collect();
    // Partial Fisher-Yates: the first M - N entries become the selection.
    let picks = p.m - p.n;
    for i in 0..picks {
        let j = rng.gen_range(i..free.len());
        free.swap(i, j);
    }
    let mut selected_free = free[..picks].to_vec();
    let mut unselected_free = free[picks..].to_vec();
    selected_free.sort_unstable();
    unselected_free.sort_unstable();

    let mut mask = vec![false; p.k];
    for i in 0..p.n {
        mask[i] = true;
    }
    for &i in &selected_free {
        mask[i] = true;
    }
    SaState {
        mask: Selection::from_mask_unchecked(mask),
        selected_free,
        unselected_free,
    }
}

/// Simulated annealing over swap moves.
///
/// Each restart starts from a fresh uniformly random feasible selection and
/// proposes uniformly random swaps; a move is accepted when its delta is
/// non-positive, otherwise with probability `exp(-delta / T)`. The
/// temperature is multiplied by the cooling ratio after each sweep. The
/// best-ever selection across all restarts is returned, ties broken toward
/// the lexicographically smallest index set.
pub fn solve_sa(problem: &SelectionProblem, cfg: &SaConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let p = &problem.params;
    p.validate()?;

    if p.m == p.n {
        // The feasible set is the singleton of forced assets.
        let selection = Selection::from_indices(&(0..p.n).collect::<Vec<_>>(), p)?;
        let objective = problem.objective(&selection)?;
        return Ok(SolveResult {
            selection,
            objective,
            stage_log: vec![("sa".to_string(), objective)],
            seed_used: cfg.rng_seed,
        });
    }

    let mut best: Option<(f64, Vec<usize>)> = None;
    for restart in 0..cfg.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        rng.set_stream(restart as u64 + 1);

        let mut state = random_feasible(problem, &mut rng);
        let mut current = problem.objective_unchecked(&state.mask.selected_indices());
        let mut restart_best = state.mask.selected_indices();
        let mut restart_best_obj = current;

        let mut temperature = cfg.initial_temperature;
        for _ in 0..cfg.sweeps {
            for _ in 0..cfg.moves_per_sweep {
                let Some((out_idx, in_idx)) = state.propose(&mut rng) else {
                    break;
                };
                let delta = problem.delta_swap_over_members(&state.selected_free, out_idx, in_idx);
                let accept = delta <= 0.0 || rng.gen::<f64>() < (-delta / temperature).exp();
                if accept {
                    state.apply(out_idx, in_idx);
                    current += delta;
                    if current < restart_best_obj {
                        restart_best_obj = current;
                        restart_best = state.mask.selected_indices();
                    }
                }
            }
            temperature *= cfg.cooling_ratio;
        }

        // Recompute to shed incremental drift before comparing restarts.
        let exact_obj = problem.objective_unchecked(&restart_best);
        let candidate = (exact_obj, restart_best);
        let better = match &best {
            None => true,
            Some((b_obj, b_idx)) => {
                candidate.0 < *b_obj || (candidate.0 == *b_obj && candidate.1 < *b_idx)
            }
        };
        if better {
            best = Some(candidate);
        }
    }

    let (objective, indices) = best.expect("at least one restart ran");
    let selection = Selection::from_indices(&indices, p)?;
    Ok(SolveResult {
        selection,
        objective,
        stage_log: vec![("sa".to_string(), objective)],
        seed_used: cfg.rng_seed,
    })
}

/// Pairwise swap descent: scan ordered pairs (selected free, unselected
/// free) in ascending index order and apply a swap exactly when it strictly
/// decreases the objective; repeat passes until a pass applies no swap or
/// `max_passes` is reached. Returns the applied-swap trace.
pub fn post_process_swaps_traced(
    problem: &SelectionProblem,
    start: &Selection,
    max_passes: usize,
) -> Result<(SolveResult, Vec<SwapEvent>)> {
    start.check_feasible(&problem.params)?;
    let p = &problem.params;
    let mut mask = start.clone();
    let start_objective = problem.objective_unchecked(&mask.selected_indices());
    let mut objective = start_objective;
    let mut events = Vec::new();

    for _ in 0..max_passes {
        let mut applied_in_pass = false;
        for out_idx in p.free_range() {
            if !mask.is_selected(out_idx) {
                continue;
            }
            for in_idx in p.free_range() {
                if mask.is_selected(in_idx) {
                    continue;
                }
                let delta = problem.delta_swap_unchecked(&mask, out_idx, in_idx);
                if delta < 0.0 {
                    mask.flip_pair(out_idx, in_idx);
                    objective += delta;
                    events.push(SwapEvent {
                        out_idx,
                        in_idx,
                        delta,
                        objective_after: objective,
                    });
                    applied_in_pass = true;
                    break; // out_idx left the selection; move on.
                }
            }
        }
        if !applied_in_pass {
            break;
        }
    }

    let final_objective = problem.objective_unchecked(&mask.selected_indices());
    let result = SolveResult {
        selection: mask,
        objective: final_objective,
        stage_log: vec![
            ("start".to_string(), start_objective),
            ("swap_descent".to_string(), final_objective),
        ],
        seed_used: 0,
    };
    Ok((result, events))
}

/// [`post_process_swaps_traced`] with the default pass cap, trace discarded.
pub fn post_process_swaps(problem: &SelectionProblem, start: &Selection) -> Result<SolveResult> {
    post_process_swaps_traced(problem, start, DEFAULT_MAX_PASSES).map(|(r, _)| r)
}

/// Full solve: simulated annealing followed by the pairwise swap descent.
pub fn solve(problem: &SelectionProblem, cfg: &SaConfig) -> Result<SolveResult> {
    let sa = solve_sa(problem, cfg)?;
    let (post, _) = post_process_swaps_traced(problem, &sa.selection, DEFAULT_MAX_PASSES)?;
    Ok(SolveResult {
        selection: post.selection,
        objective: post.objective,
        stage_log: vec![
            ("sa".to_string(), sa.objective),
            ("swap_descent".to_string(), post.objective),
        ],
        seed_used: cfg.rng_seed,
    })
}
