//! Output files: CSV tables, plaintext summaries and the run manifest.
//! Every file is written atomically (temp file, then rename) and floats use
//! the shortest round-trip form, so identical runs produce identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

use sparsetrack_core::evaluation::{BacktestReport, TestResult};
use sparsetrack_core::multi_stage::SelectedSet;
use sparsetrack_core::solver::SolveResult;

pub fn atomic_write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("cannot create {}", parent.display()))?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).with_context(|| format!("cannot write {}", tmp.display()))?;
    std::fs::rename(&tmp, path)
        .with_context(|| format!("cannot move {} into place", path.display()))?;
    Ok(())
}

/// Manifest with everything needed to reproduce the run byte for byte.
pub fn manifest(command: &str, config_text: &str, overrides: &[(String, String)], seed: u64) -> String {
    let mut hasher = Sha256::new();
    hasher.update(config_text.as_bytes());
    let digest = hasher.finalize();
    let mut out = String::new();
    let _ = writeln!(out, "command: {command}");
    let _ = writeln!(out, "version: {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "config_sha256: {digest:x}");
    let _ = writeln!(out, "seed: {seed}");
    for (key, value) in overrides {
        let _ = writeln!(out, "override.{key}: {value}");
    }
    out
}

pub fn selection_csv(selected: &SelectedSet, asset_ids: &[String]) -> String {
    let mut out = String::from("rank,asset_id,stages\n");
    for (idx, stages) in selected.indices.iter().zip(&selected.provenance) {
        let stage_list = stages
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join("+");
        let _ = writeln!(out, "{},{},{}", idx + 1, asset_ids[*idx], stage_list);
    }
    out
}

pub fn selection_summary(
    label: &str,
    selected: &SelectedSet,
    stage_results: &[(SelectedSet, SolveResult)],
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "selection: {label}");
    let _ = writeln!(out, "selected_assets: {}", selected.len());
    for (i, (set, result)) in stage_results.iter().enumerate() {
        let _ = writeln!(
            out,
            "stage {}: m={} objective={} seed={}",
            i + 1,
            set.len(),
            result.objective,
            result.seed_used
        );
        for (phase, objective) in &result.stage_log {
            let _ = writeln!(out, "  {phase}: {objective}");
        }
    }
    out
}

pub fn horizon_stats_csv(report: &BacktestReport) -> String {
    let mut out = String::from(
        "horizon,samples,residual_mean,residual_variance,wilcoxon_w,wilcoxon_p,wilcoxon_rejected_at_5pct\n",
    );
    for h in &report.horizon_stats {
        let (w, p, rej) = match &h.wilcoxon {
            Some(t) => (t.statistic.to_string(), t.p_value.to_string(), t.rejected_at_5pct.to_string()),
            None => ("".into(), "".into(), "".into()),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            h.horizon,
            h.series.values.len(),
            h.residual_mean,
            h.residual_variance,
            w,
            p,
            rej
        );
    }
    out
}

pub fn long_horizon_stats_csv(report: &BacktestReport) -> String {
    let mut out = String::from("horizon,samples,abs_residual_mean,abs_residual_variance\n");
    for lh in &report.long_horizon_stats {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            lh.horizon,
            lh.series.values.len(),
            lh.abs_mean,
            lh.abs_variance
        );
    }
    out
}

pub fn residual_curve_csv(report: &BacktestReport) -> String {
    let mut out = String::from("p,residual\n");
    for (i, v) in report.residual_curve.iter().enumerate() {
        let _ = writeln!(out, "{},{}", i + 1, v);
    }
    out
}

pub fn rebalances_csv(report: &BacktestReport) -> String {
    let mut out = String::from("date,asset_id,weight,stages\n");
    for reb in &report.rebalances {
        for (i, (id, weight)) in reb.portfolio.holdings.iter().enumerate() {
            let stages = reb
                .provenance
                .get(i)
                .map(|s| s.iter().map(usize::to_string).collect::<Vec<_>>().join("+"))
                .unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{}", reb.date.format("%Y-%m-%d"), id, weight, stages);
        }
    }
    out
}

pub fn returns_csv(report: &BacktestReport) -> String {
    let mut out = String::from("date,portfolio_return,index_return\n");
    for (i, date) in report.eval_dates.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{}",
            date.format("%Y-%m-%d"),
            report.portfolio_returns[i],
            report.index_returns[i]
        );
    }
    out
}

pub fn backtest_summary(report: &BacktestReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "portfolio: {}", report.label);
    let _ = writeln!(out, "rebalances: {}", report.rebalances.len());
    let _ = writeln!(out, "evaluation_days: {}", report.portfolio_returns.len());
    let _ = writeln!(out, "max_abs_residual_from_start: {}", report.max_abs_residual);
    for h in &report.horizon_stats {
        match &h.wilcoxon {
            Some(t) => {
                let verdict = if t.rejected_at_5pct { "rejected" } else { "not rejected" };
                let _ = writeln!(
                    out,
                    "p={}: mean={} variance={} wilcoxon W={} p-value={} ({verdict} at 5%)",
                    h.horizon, h.residual_mean, h.residual_variance, t.statistic, t.p_value
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    "p={}: mean={} variance={} wilcoxon not applicable (fewer than 10 nonzero residuals)",
                    h.horizon, h.residual_mean, h.residual_variance
                );
            }
        }
    }
    for lh in &report.long_horizon_stats {
        let _ = writeln!(
            out,
            "p={} (long horizon): |residual| mean={} variance={} over {} starts",
            lh.horizon,
            lh.abs_mean,
            lh.abs_variance,
            lh.series.values.len()
        );
    }
    out
}

pub fn levene_comparison_csv(rows: &[(usize, Vec<String>, Option<TestResult>)]) -> String {
    let mut out = String::from("horizon,portfolios,levene_f,levene_p,rejected_at_5pct\n");
    for (horizon, labels, result) in rows {
        match result {
            Some(t) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    horizon,
                    labels.join("+"),
                    t.statistic,
                    t.p_value,
                    t.rejected_at_5pct
                );
            }
            None => {
                let _ = writeln!(out, "{},{},,,", horizon, labels.join("+"));
            }
        }
    }
    out
}
