//! Backtesting and the residual-based evaluation protocol.
//!
//! A tracking portfolio is rebalanced at calendar-quarter ends: correlations
//! are estimated from trailing weekly log returns, assets are selected, and
//! tracking weights are fit on a trailing daily window, then held until the
//! next rebalance. Daily portfolio returns are `sum_i w_i R_ti` with weights
//! constant within each holding period, so holding every asset at index
//! weight replicates an MC-weighted index exactly.
//!
//! Tracking quality is judged through cumulative returns
//! `C_t^p = prod_{n=t}^{t+p-1} (1 + R_n) - 1` and the residuals
//! `eps_t^p = Chat_t^p - C_t^p`. Per horizon, residual bias is examined with
//! the two-sided Wilcoxon signed-rank test (normal approximation with
//! continuity and tie corrections) and residual variance across portfolios
//! with the classic mean-centered Levene test, both at the 5% level.

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::market_data::{
    compute_log_returns, correlation_to_distance, estimate_correlation, Frequency, PricePanel,
    ReturnPanel, WeightingScheme,
};
use crate::multi_stage::{self, StagePlan};
use crate::selection;
use crate::solver::SaConfig;
use crate::weighting::{self, Portfolio};

/// Cumulative return over `horizon` periods starting at `start` (0-based):
/// `prod (1 + R_n) - 1`. At `horizon = 1` this is the period return itself.
pub fn cumulative_return(returns: &[f64], start: usize, horizon: usize) -> Result<f64> {
    if horizon == 0 {
        return Err(Error::Parameter("horizon must be at least 1".into()));
    }
    if start + horizon > returns.len() {
        return Err(Error::Range {
            what: "cumulative return window".into(),
            required: start + horizon,
            available: returns.len(),
        });
    }
    if horizon == 1 {
        // Exactly the period return, with no compounding round-off.
        return Ok(returns[start]);
    }
    let mut acc = 1.0;
    for r in &returns[start..start + horizon] {
        acc *= 1.0 + r;
    }
    Ok(acc - 1.0)
}

/// How the start times of the residual sample are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingRule {
    /// Starts spread evenly over the feasible range (overlapping windows).
    EvenlySpaced,
    /// The first `sample_size` feasible starts.
    Contiguous,
    /// Starts `0, p, 2p, ...` so windows do not overlap.
    NonOverlapping,
}

/// Residuals of cumulative returns at one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSeries {
    pub horizon: usize,
    /// `eps_t^p = Chat_t^p - C_t^p`, aligned with `sample_starts`.
    pub values: Vec<f64>,
    /// 0-based start offsets into the evaluation series.
    pub sample_starts: Vec<usize>,
}

/// Residuals over `sample_size` start times chosen per `sampling`.
pub fn residual_series(
    index_returns: &[f64],
    portfolio_returns: &[f64],
    horizon: usize,
    sample_size: usize,
    sampling: SamplingRule,
) -> Result<ResidualSeries> {
    if index_returns.len() != portfolio_returns.len() {
        return Err(Error::Validation(format!(
            "series length mismatch: index {} vs portfolio {}",
            index_returns.len(),
            portfolio_returns.len()
        )));
    }
    if sample_size == 0 {
        return Err(Error::Parameter("sample size must be at least 1".into()));
    }
    let len = index_returns.len();
    if len < horizon {
        return Err(Error::Range {
            what: "residual series".into(),
            required: horizon,
            available: len,
        });
    }
    let feasible = len - horizon + 1;
    let sample_starts: Vec<usize> = match sampling {
        SamplingRule::EvenlySpaced => {
            if sample_size > feasible {
                return Err(Error::Range {
                    what: "evenly spaced residual sample".into(),
                    required: horizon + sample_size - 1,
                    available: len,
                });
            }
            if sample_size == 1 {
                vec![0]
            } else {
                (0..sample_size)
                    .map(|k| k * (feasible - 1) / (sample_size - 1))
                    .collect()
            }
        }
        SamplingRule::Contiguous => {
            if sample_size > feasible {
                return Err(Error::Range {
                    what: "contiguous residual sample".into(),
                    required: horizon + sample_size - 1,
                    available: len,
                });
            }
            (0..sample_size).collect()
        }
        SamplingRule::NonOverlapping => {
            if sample_size * horizon > len {
                return Err(Error::Range {
                    what: "non-overlapping residual sample".into(),
                    required: sample_size * horizon,
                    available: len,
                });
            }
            (0..sample_size).map(|k| k * horizon).collect()
        }
    };

    let mut values = Vec::with_capacity(sample_starts.len());
    for &t in &sample_starts {
        let tracked = cumulative_return(portfolio_returns, t, horizon)?;
        let benchmark = cumulative_return(index_returns, t, horizon)?;
        values.push(tracked - benchmark);
    }
    Ok(ResidualSeries {
        horizon,
        values,
        sample_starts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestName {
    WilcoxonSignedRank,
    Levene,
}

impl std::fmt::Display for TestName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TestName::WilcoxonSignedRank => f.write_str("wilcoxon_signed_rank"),
            TestName::Levene => f.write_str("levene"),
        }
    }
}

/// Outcome of a hypothesis test at the 5% level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub test_name: TestName,
    pub statistic: f64,
    pub p_value: f64,
    pub rejected_at_5pct: bool,
}

impl TestResult {
    fn at_5pct(test_name: TestName, statistic: f64, p_value: f64) -> TestResult {
        TestResult {
            test_name,
            statistic,
            p_value,
            rejected_at_5pct: p_value < 0.05,
        }
    }
}

/// Two-sided Wilcoxon signed-rank test of zero median.
///
/// Exact zeros are dropped; absolute values are ranked with midranks for
/// ties; the statistic `W` is the rank sum over positive values. The p-value
/// uses the normal approximation with continuity correction and the tie
/// correction `sum (t^3 - t) / 48` on the variance.
pub fn wilcoxon_signed_rank(values: &[f64]) -> Result<TestResult> {
    let nonzero: Vec<f64> = values.iter().copied().filter(|&v| v != 0.0).collect();
    let n = nonzero.len();
    if n < 10 {
        return Err(Error::InsufficientSample {
            test: "Wilcoxon signed-rank".into(),
            required: 10,
            actual: n,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| nonzero[a].abs().total_cmp(&nonzero[b].abs()));

    let mut ranks = vec![0.0; n];
    let mut tie_correction = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && nonzero[order[j + 1]].abs() == nonzero[order[i]].abs() {
            j += 1;
        }
        // Positions i..=j share the midrank (1-based ranks).
        let midrank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = midrank;
        }
        let t = (j - i + 1) as f64;
        tie_correction += t * t * t - t;
        i = j + 1;
    }

    let w: f64 = nonzero
        .iter()
        .zip(&ranks)
        .filter(|(&v, _)| v > 0.0)
        .map(|(_, &r)| r)
        .sum();

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let variance = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_correction / 48.0;
    let p_value = if variance <= 0.0 {
        1.0
    } else {
        let d = w - mean;
        let z = if d == 0.0 {
            0.0
        } else {
            (d - 0.5 * d.signum()) / variance.sqrt()
        };
        (erfc(z.abs() / std::f64::consts::SQRT_2)).clamp(0.0, 1.0)
    };
    Ok(TestResult::at_5pct(TestName::WilcoxonSignedRank, w, p_value))
}

/// Classic (mean-centered) Levene test for equal variances across groups.
///
/// One-way ANOVA F statistic on absolute deviations from each group mean;
/// the p-value comes from the F distribution with `(k - 1, N - k)` degrees
/// of freedom via the regularized incomplete beta function. Groups with no
/// within- or between-group deviation spread return `F = 0, p = 1`.
pub fn levene_test(groups: &[Vec<f64>]) -> Result<TestResult> {
    if groups.len() < 2 {
        return Err(Error::InsufficientSample {
            test: "Levene".into(),
            required: 2,
            actual: groups.len(),
        });
    }
    for g in groups {
        if g.len() < 3 {
            return Err(Error::InsufficientSample {
                test: "Levene (per group)".into(),
                required: 3,
                actual: g.len(),
            });
        }
    }

    let k = groups.len();
    let total: usize = groups.iter().map(Vec::len).sum();
    let deviations: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            let m = mean(g);
            g.iter().map(|v| (v - m).abs()).collect()
        })
        .collect();

    let group_means: Vec<f64> = deviations.iter().map(|z| mean(z)).collect();
    let grand_mean = deviations.iter().flatten().sum::<f64>() / total as f64;

    let between: f64 = deviations
        .iter()
        .zip(&group_means)
        .map(|(z, gm)| z.len() as f64 * (gm - grand_mean).powi(2))
        .sum();
    let within: f64 = deviations
        .iter()
        .zip(&group_means)
        .map(|(z, gm)| z.iter().map(|v| (v - gm).powi(2)).sum::<f64>())
        .sum();

    let df1 = (k - 1) as f64;
    let df2 = (total - k) as f64;
    let (statistic, p_value) = if within <= 0.0 {
        if between <= 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY, 0.0)
        }
    } else {
        let f = (between / df1) / (within / df2);
        let p = beta_reg(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f)).clamp(0.0, 1.0);
        (f, p)
    };
    Ok(TestResult::at_5pct(TestName::Levene, statistic, p_value))
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance (n - 1 denominator); 0 for fewer than 2 values.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64
}

/// How the backtest picks assets at each rebalance.
#[derive(Debug, Clone)]
pub enum Selector {
    /// Solve the stage plan and union-truncate the stage sets.
    Plan(StagePlan),
    /// Uniformly random selection of `count` assets from the whole universe;
    /// the benchmark selection method.
    RandomUniform { count: usize },
    /// Hold every asset at index (market-cap) weight; zero tracking error on
    /// an MC-weighted index by construction.
    FullReplication,
}

/// Backtest settings. Defaults follow the evaluation protocol: five years of
/// weekly returns behind the correlation estimate, quarterly (3/6/9/12)
/// rebalances, horizons 1/10/50/100 with 200 evenly spaced samples, and
/// 250/500-day long horizons.
#[derive(Debug, Clone)]
pub struct BacktestConfig {
    pub lookback_weeks: usize,
    pub estimation_weighting: WeightingScheme,
    pub shrinkage_intensity: f64,
    /// Trailing daily returns behind each weight fit.
    pub weight_window: usize,
    pub horizons: Vec<usize>,
    pub long_horizons: Vec<usize>,
    pub sample_size: usize,
    pub sampling: SamplingRule,
    /// Months whose last business day triggers a rebalance.
    pub rebalance_months: Vec<u32>,
    /// Re-derive the SA temperature and moves per sweep for each rebalance's
    /// problem instead of using the passed values verbatim.
    pub auto_tune_sa: bool,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            lookback_weeks: 260,
            estimation_weighting: WeightingScheme::Linear,
            shrinkage_intensity: 0.1,
            weight_window: 250,
            horizons: vec![1, 10, 50, 100],
            long_horizons: vec![250, 500],
            sample_size: 200,
            sampling: SamplingRule::EvenlySpaced,
            rebalance_months: vec![3, 6, 9, 12],
            auto_tune_sa: true,
        }
    }
}

/// Holdings fixed at one rebalance.
#[derive(Debug, Clone)]
pub struct RebalanceRecord {
    pub date: NaiveDate,
    pub portfolio: Portfolio,
    /// 1-based stage numbers per holding (empty unless plan-selected).
    pub provenance: Vec<Vec<usize>>,
}

/// Per-horizon residual statistics.
#[derive(Debug, Clone)]
pub struct HorizonStats {
    pub horizon: usize,
    pub series: ResidualSeries,
    pub residual_mean: f64,
    pub residual_variance: f64,
    /// Absent when fewer than 10 nonzero residuals exist (degenerate
    /// replication).
    pub wilcoxon: Option<TestResult>,
}

/// Long-horizon summary over every feasible start.
#[derive(Debug, Clone)]
pub struct LongHorizonStats {
    pub horizon: usize,
    pub series: ResidualSeries,
    pub abs_mean: f64,
    pub abs_variance: f64,
}

/// Everything a backtest produces.
#[derive(Debug, Clone)]
pub struct BacktestReport {
    pub label: String,
    pub rebalances: Vec<RebalanceRecord>,
    /// End date of each evaluated return period.
    pub eval_dates: Vec<NaiveDate>,
    pub portfolio_returns: Vec<f64>,
    pub index_returns: Vec<f64>,
    pub horizon_stats: Vec<HorizonStats>,
    pub long_horizon_stats: Vec<LongHorizonStats>,
    /// `eps_1^p` for `p = 1 ..= eval length`.
    pub residual_curve: Vec<f64>,
    pub max_abs_residual: f64,
}

/// Daily simple returns of every asset and of the index; entry `t` covers
/// `dates[t] -> dates[t + 1]`.
pub fn daily_simple_returns(panel: &PricePanel) -> (Vec<Vec<f64>>, Vec<f64>) {
    let t = panel.num_dates();
    let l = panel.num_assets();
    let mut assets = Vec::with_capacity(t - 1);
    let mut index = Vec::with_capacity(t - 1);
    for row in 1..t {
        let mut out = Vec::with_capacity(l);
        for i in 0..l {
            out.push(panel.prices[row][i] / panel.prices[row - 1][i] - 1.0);
        }
        assets.push(out);
        index.push(panel.index_level[row] / panel.index_level[row - 1] - 1.0);
    }
    (assets, index)
}

/// Row indices of the last business day of each rebalance month.
pub fn quarter_end_rows(dates: &[NaiveDate], months: &[u32]) -> Vec<usize> {
    let mut rows = Vec::new();
    for (i, d) in dates.iter().enumerate() {
        if !months.contains(&d.month()) {
            continue;
        }
        let month_ends = match dates.get(i + 1) {
            Some(next) => (next.year(), next.month()) != (d.year(), d.month()),
            None => true,
        };
        if month_ends {
            rows.push(i);
        }
    }
    rows
}

/// Backtest a stage plan against the index.
pub fn run_backtest(
    plan: &StagePlan,
    label: &str,
    panel: &PricePanel,
    sa_cfg: &SaConfig,
    cfg: &BacktestConfig,
) -> Result<BacktestReport> {
    run_backtest_with(&Selector::Plan(plan.clone()), label, panel, sa_cfg, cfg)
}

/// Backtest with an explicit selection method (plan, random benchmark, or
/// full replication).
pub fn run_backtest_with(
    selector: &Selector,
    label: &str,
    panel: &PricePanel,
    sa_cfg: &SaConfig,
    cfg: &BacktestConfig,
) -> Result<BacktestReport> {
    if let Selector::Plan(plan) = selector {
        if panel.num_assets() < plan.k() {
            return Err(Error::Parameter(format!(
                "plan needs K = {} assets, panel has {}",
                plan.k(),
                panel.num_assets()
            )));
        }
    }
    let (asset_returns, index_returns) = daily_simple_returns(panel);
    let num_periods = asset_returns.len();
    let mc_ranking = panel.mc_ranking();

    // A rebalance row is eligible once the trailing weekly history covers the
    // correlation lookback and at least one return period follows it.
    let rebalance_rows: Vec<usize> = quarter_end_rows(&panel.dates, &cfg.rebalance_months)
        .into_iter()
        .filter(|&r| {
            r < num_periods && weekly_history_len(&panel.dates[..=r]) >= cfg.lookback_weeks
        })
        .collect();
    if rebalance_rows.is_empty() {
        return Err(Error::Range {
            what: format!(
                "weekly return periods before the first rebalance (lookback {} weeks)",
                cfg.lookback_weeks
            ),
            required: cfg.lookback_weeks,
            available: weekly_history_len(&panel.dates),
        });
    }

    let mut rebalances = Vec::with_capacity(rebalance_rows.len());
    let mut portfolio_returns = Vec::new();
    let mut eval_dates = Vec::new();
    let mut eval_index = Vec::new();

    for (ri, &row) in rebalance_rows.iter().enumerate() {
        let (portfolio, provenance) = select_and_weight(
            selector, ri, row, panel, &asset_returns, &index_returns, &mc_ranking, sa_cfg, cfg,
        )?;

        let hold_until = rebalance_rows.get(ri + 1).copied().unwrap_or(num_periods);
        let columns: Vec<usize> = portfolio
            .holdings
            .iter()
            .map(|(id, _)| {
                panel
                    .assets
                    .iter()
                    .position(|a| &a.id == id)
                    .expect("holding refers to a panel asset")
            })
            .collect();
        let weights = portfolio.weights();
        for t in row..hold_until {
            let r: f64 = columns
                .iter()
                .zip(&weights)
                .map(|(&c, w)| w * asset_returns[t][c])
                .sum();
            portfolio_returns.push(r);
            eval_index.push(index_returns[t]);
            eval_dates.push(panel.dates[t + 1]);
        }

        rebalances.push(RebalanceRecord {
            date: panel.dates[row],
            portfolio,
            provenance,
        });
    }

    compile_report(
        label,
        rebalances,
        eval_dates,
        portfolio_returns,
        eval_index,
        cfg,
    )
}

/// Number of weekly return periods the date range supports.
fn weekly_history_len(dates: &[NaiveDate]) -> usize {
    let mut weeks = 0usize;
    let mut last: Option<(i32, u32)> = None;
    for d in dates {
        let key = (d.iso_week().year(), d.iso_week().week());
        if last != Some(key) {
            weeks += 1;
            last = Some(key);
        }
    }
    weeks.saturating_sub(1)
}

#[allow(clippy::too_many_arguments)]
fn select_and_weight(
    selector: &Selector,
    rebalance_idx: usize,
    row: usize,
    panel: &PricePanel,
    asset_returns: &[Vec<f64>],
    index_returns: &[f64],
    mc_ranking: &[String],
    sa_cfg: &SaConfig,
    cfg: &BacktestConfig,
) -> Result<(Portfolio, Vec<Vec<usize>>)> {
    let as_of = panel.dates[row];
    match selector {
        Selector::FullReplication => {
            let weights = panel.mc_weights();
            let holdings = panel
                .assets
                .iter()
                .map(|a| a.id.clone())
                .zip(weights)
                .collect();
            Ok((Portfolio { holdings, as_of }, Vec::new()))
        }
        Selector::RandomUniform { count } => {
            let l = panel.num_assets();
            let count = (*count).min(l);
            let mut rng = ChaCha8Rng::seed_from_u64(sa_cfg.rng_seed);
            // Streams from 1 << 32 keep the benchmark draws apart from the
            // solver's restart streams.
            rng.set_stream((1u64 << 32) + rebalance_idx as u64);
            let mut pool: Vec<usize> = (0..l).collect();
            for i in 0..count {
                let j = rng.gen_range(i..pool.len());
                pool.swap(i, j);
            }
            let mut chosen = pool[..count].to_vec();
            chosen.sort_unstable();
            let ids: Vec<String> = chosen.iter().map(|&i| panel.assets[i].id.clone()).collect();
            let portfolio = fit_weights(&ids, row, panel, asset_returns, index_returns, cfg)?;
            Ok((portfolio, Vec::new()))
        }
        Selector::Plan(plan) => {
            let trailing = panel.truncated(row);
            let weekly = compute_log_returns(&trailing, Frequency::Weekly)?;
            let top_k = &mc_ranking[..plan.k()];
            let weekly_top = restrict_columns(&weekly, top_k);
            let corr = estimate_correlation(
                &weekly_top,
                cfg.lookback_weeks,
                cfg.estimation_weighting,
                cfg.shrinkage_intensity,
            )?;
            let distance = correlation_to_distance(&corr, top_k)?;

            let stage_cfg = if cfg.auto_tune_sa {
                let probe = selection::build_problem(&distance, plan.stages[0])?;
                let tuned = SaConfig::tuned(&probe, sa_cfg.rng_seed);
                SaConfig {
                    initial_temperature: tuned.initial_temperature,
                    moves_per_sweep: tuned.moves_per_sweep,
                    ..sa_cfg.clone()
                }
            } else {
                sa_cfg.clone()
            };
            let stage_sets = multi_stage::run_stages(plan, &distance, &stage_cfg)?;
            let selected = multi_stage::union_and_truncate(&stage_sets, plan.m_star)?;

            let ids: Vec<String> = selected
                .indices
                .iter()
                .map(|&i| distance.mc_rank_order[i].clone())
                .collect();
            let portfolio = fit_weights(&ids, row, panel, asset_returns, index_returns, cfg)?;
            Ok((portfolio, selected.provenance))
        }
    }
}

/// Restrict a return panel to the named columns, in the given order.
fn restrict_columns(panel: &ReturnPanel, ids: &[String]) -> ReturnPanel {
    let cols: Vec<usize> = ids
        .iter()
        .map(|id| {
            panel
                .asset_ids
                .iter()
                .position(|a| a == id)
                .expect("id present in panel")
        })
        .collect();
    ReturnPanel {
        periods: panel.periods.clone(),
        asset_ids: ids.to_vec(),
        returns: panel
            .returns
            .iter()
            .map(|row| cols.iter().map(|&c| row[c]).collect())
            .collect(),
        index_returns: panel.index_returns.clone(),
        frequency: panel.frequency,
    }
}

fn fit_weights(
    ids: &[String],
    row: usize,
    panel: &PricePanel,
    asset_returns: &[Vec<f64>],
    index_returns: &[f64],
    cfg: &BacktestConfig,
) -> Result<Portfolio> {
    let columns: Vec<usize> = ids
        .iter()
        .map(|id| {
            panel
                .assets
                .iter()
                .position(|a| &a.id == id)
                .expect("selected id is a panel asset")
        })
        .collect();
    // Window of returns ending at the rebalance date.
    let window_start = row.saturating_sub(cfg.weight_window);
    let rows = &asset_returns[window_start..row];
    let window: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| columns.iter().map(|&c| r[c]).collect())
        .collect();
    let index_window = &index_returns[window_start..row];
    weighting::optimize_weights(ids, &window, index_window, panel.dates[row])
}

fn compile_report(
    label: &str,
    rebalances: Vec<RebalanceRecord>,
    eval_dates: Vec<NaiveDate>,
    portfolio_returns: Vec<f64>,
    index_returns: Vec<f64>,
    cfg: &BacktestConfig,
) -> Result<BacktestReport> {
    let eval_len = portfolio_returns.len();
    if eval_len == 0 {
        return Err(Error::Range {
            what: "evaluation period".into(),
            required: 1,
            available: 0,
        });
    }

    let mut horizon_stats = Vec::new();
    for &p in &cfg.horizons {
        let series = residual_series(
            &index_returns,
            &portfolio_returns,
            p,
            cfg.sample_size,
            cfg.sampling,
        )?;
        let wilcoxon = match wilcoxon_signed_rank(&series.values) {
            Ok(result) => Some(result),
            Err(Error::InsufficientSample { .. }) => None,
            Err(e) => return Err(e),
        };
        horizon_stats.push(HorizonStats {
            horizon: p,
            residual_mean: mean(&series.values),
            residual_variance: sample_variance(&series.values),
            wilcoxon,
            series,
        });
    }

    let mut long_horizon_stats = Vec::new();
    for &p in &cfg.long_horizons {
        if p > eval_len {
            continue;
        }
        let feasible = eval_len - p + 1;
        let series = residual_series(
            &index_returns,
            &portfolio_returns,
            p,
            feasible,
            SamplingRule::Contiguous,
        )?;
        let abs_values: Vec<f64> = series.values.iter().map(|v| v.abs()).collect();
        long_horizon_stats.push(LongHorizonStats {
            horizon: p,
            abs_mean: mean(&abs_values),
            abs_variance: sample_variance(&abs_values),
            series,
        });
    }

    let mut residual_curve = Vec::with_capacity(eval_len);
    let mut tracked = 1.0;
    let mut benchmark = 1.0;
    for t in 0..eval_len {
        tracked *= 1.0 + portfolio_returns[t];
        benchmark *= 1.0 + index_returns[t];
        residual_curve.push(tracked - benchmark);
    }
    let max_abs_residual = residual_curve.iter().fold(0.0, |a: f64, &v| a.max(v.abs()));

    Ok(BacktestReport {
        label: label.to_string(),
        rebalances,
        eval_dates,
        portfolio_returns,
        index_returns,
        horizon_stats,
        long_horizon_stats,
        residual_curve,
        max_abs_residual,
    })
}

impl BacktestReport {
    pub fn horizon(&self, p: usize) -> Option<&HorizonStats> {
        self.horizon_stats.iter().find(|h| h.horizon == p)
    }
}

/// The cross-portfolio variance comparison: per horizon, the Levene test over
/// the residual samples of every report whose Wilcoxon test did not reject at
/// that horizon. Returns `None` when fewer than two reports qualify.
pub fn levene_across_reports(reports: &[&BacktestReport], horizon: usize) -> Result<Option<TestResult>> {
    let mut groups = Vec::new();
    for report in reports {
        if let Some(stats) = report.horizon(horizon) {
            if matches!(&stats.wilcoxon, Some(w) if !w.rejected_at_5pct) {
                groups.push(stats.series.values.clone());
            }
        }
    }
    if groups.len() < 2 {
        return Ok(None);
    }
    levene_test(&groups).map(Some)
}
