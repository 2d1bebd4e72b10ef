//! Multi-stage selection: solve the selection problem once per stage with
//! its own (M, alpha, beta), union the stage sets and truncate the union to
//! the M* members with the largest market caps (smallest rank indices).

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::market_data::DistanceMatrix;
use crate::selection::{self, SelectionParams};
use crate::solver::{self, SaConfig};

/// An ordered list of stage parameters plus the final cardinality cap M*.
///
/// All stages share K, H and N; M, alpha and beta vary per stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StagePlan {
    pub stages: Vec<SelectionParams>,
    pub m_star: usize,
}

impl StagePlan {
    pub fn new(stages: Vec<SelectionParams>, m_star: usize) -> Result<StagePlan> {
        if stages.is_empty() {
            return Err(Error::Parameter("a stage plan needs at least one stage".into()));
        }
        if m_star == 0 {
            return Err(Error::Parameter("M* must be at least 1".into()));
        }
        for (i, stage) in stages.iter().enumerate() {
            stage.validate().map_err(|e| Error::Stage {
                stage: i + 1,
                cause: Box::new(e),
            })?;
        }
        let first = &stages[0];
        for (i, stage) in stages.iter().enumerate().skip(1) {
            if stage.k != first.k || stage.h != first.h || stage.n != first.n {
                return Err(Error::Stage {
                    stage: i + 1,
                    cause: Box::new(Error::Parameter(
                        "stages must share K, H and N".into(),
                    )),
                });
            }
        }
        Ok(StagePlan { stages, m_star })
    }

    pub fn k(&self) -> usize {
        self.stages[0].k
    }

    pub fn h(&self) -> usize {
        self.stages[0].h
    }

    pub fn n(&self) -> usize {
        self.stages[0].n
    }
}

/// A set of selected assets with, per asset, the stages that picked it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectedSet {
    /// MC-rank positions (0-based), strictly increasing.
    pub indices: Vec<usize>,
    /// 1-based stage numbers that selected each index, aligned with `indices`.
    pub provenance: Vec<Vec<usize>>,
}

impl SelectedSet {
    /// Wrap a single stage's result; `indices` must be strictly increasing.
    pub fn from_stage(indices: Vec<usize>, stage: usize) -> SelectedSet {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        let provenance = vec![vec![stage]; indices.len()];
        SelectedSet { indices, provenance }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.indices.binary_search(&idx).is_ok()
    }
}

/// Solve every stage independently with the shared solver. Stage `i`'s
/// result is the set of positions selected by the stage-`i` problem; stages
/// do not warm-start each other.
pub fn run_stages(
    plan: &StagePlan,
    d: &DistanceMatrix,
    cfg: &SaConfig,
) -> Result<Vec<SelectedSet>> {
    Ok(run_stages_detailed(plan, d, cfg)?
        .into_iter()
        .map(|(set, _)| set)
        .collect())
}

/// [`run_stages`] keeping each stage's full solve result.
pub fn run_stages_detailed(
    plan: &StagePlan,
    d: &DistanceMatrix,
    cfg: &SaConfig,
) -> Result<Vec<(SelectedSet, crate::solver::SolveResult)>> {
    plan.stages
        .iter()
        .enumerate()
        .map(|(i, stage)| run_one_stage_detailed(i, stage, d, cfg))
        .collect()
}

/// Same results as [`run_stages`], with stages solved on separate threads.
/// Stages share no state, so the outcome is identical to the sequential run.
pub fn run_stages_concurrent(
    plan: &StagePlan,
    d: &DistanceMatrix,
    cfg: &SaConfig,
) -> Result<Vec<SelectedSet>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = plan
            .stages
            .iter()
            .enumerate()
            .map(|(i, stage)| scope.spawn(move || run_one_stage(i, stage, d, cfg)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("stage thread panicked"))
            .collect()
    })
}

fn run_one_stage(
    stage_idx: usize,
    params: &SelectionParams,
    d: &DistanceMatrix,
    cfg: &SaConfig,
) -> Result<SelectedSet> {
    run_one_stage_detailed(stage_idx, params, d, cfg).map(|(set, _)| set)
}

fn run_one_stage_detailed(
    stage_idx: usize,
    params: &SelectionParams,
    d: &DistanceMatrix,
    cfg: &SaConfig,
) -> Result<(SelectedSet, solver::SolveResult)> {
    let wrap = |e: Error| Error::Stage {
        stage: stage_idx + 1,
        cause: Box::new(e),
    };
    let problem = selection::build_problem(d, *params).map_err(wrap)?;
    let result = solver::solve(&problem, cfg).map_err(wrap)?;
    let set = SelectedSet::from_stage(result.selection.selected_indices(), stage_idx + 1);
    Ok((set, result))
}

/// Union the stage sets and keep the members with the M* smallest rank
/// indices (the largest market caps). If the union has at most M* members it
/// is returned whole. Provenance is merged per index.
pub fn union_and_truncate(stage_sets: &[SelectedSet], m_star: usize) -> Result<SelectedSet> {
    if stage_sets.is_empty() {
        return Err(Error::Parameter("union of zero stage sets".into()));
    }
    let mut merged: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for set in stage_sets {
        for (idx, stages) in set.indices.iter().zip(&set.provenance) {
            merged.entry(*idx).or_default().extend(stages.iter().copied());
        }
    }
    let mut indices = Vec::new();
    let mut provenance = Vec::new();
    for (idx, mut stages) in merged {
        if indices.len() == m_star {
            break;
        }
        stages.sort_unstable();
        stages.dedup();
        indices.push(idx);
        provenance.push(stages);
    }
    Ok(SelectedSet { indices, provenance })
}
