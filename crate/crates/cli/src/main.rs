//! Command-line front end: synthetic data generation, one-shot asset
//! selection, and index-tracking backtests driven by a TOML config.

mod config;
mod report;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use sparsetrack_core::evaluation::{self, BacktestReport};
use sparsetrack_core::market_data::{
    self, compute_log_returns, correlation_to_distance, estimate_correlation, Frequency,
    PricePanel,
};
use sparsetrack_core::multi_stage;
use sparsetrack_core::selection::build_problem;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "sparsetrack", version, about = "Sparse index-tracking portfolio toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic factor-model market (prices + market caps).
    Synth(CommonArgs),
    /// Select a tracking basket at the end of the configured price panel.
    Select(SelectArgs),
    /// Backtest the configured portfolios against the index.
    Backtest(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the configured RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override solver restarts.
    #[arg(long)]
    restarts: Option<usize>,
    /// Override solver sweeps per restart.
    #[arg(long)]
    sweeps: Option<usize>,
    /// Override the solver cooling ratio.
    #[arg(long)]
    cooling: Option<f64>,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Select with a preset (E1..E6) instead of the [selection] section.
    #[arg(long)]
    preset: Option<String>,
    /// Also write the correlation-distance matrix as CSV.
    #[arg(long)]
    emit_distance: bool,
}

fn main() {
    env_logger::init();
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Select(args) => cmd_select(args),
        Command::Backtest(args) => cmd_backtest(args),
    }
}

struct LoadedRun {
    config: RunConfig,
    config_text: String,
    overrides: Vec<(String, String)>,
    out_dir: PathBuf,
}

fn load_run(args: &CommonArgs) -> Result<LoadedRun> {
    let (mut config, config_text) = RunConfig::load(&args.config)?;
    let mut overrides = Vec::new();
    if let Some(seed) = args.seed {
        config.solver.seed = seed;
        overrides.push(("seed".to_string(), seed.to_string()));
    }
    if let Some(restarts) = args.restarts {
        config.solver.restarts = restarts;
        overrides.push(("restarts".to_string(), restarts.to_string()));
    }
    if let Some(sweeps) = args.sweeps {
        config.solver.sweeps = sweeps;
        overrides.push(("sweeps".to_string(), sweeps.to_string()));
    }
    if let Some(cooling) = args.cooling {
        config.solver.cooling = cooling;
        overrides.push(("cooling".to_string(), cooling.to_string()));
    }
    let out_dir = args.out.clone().unwrap_or_else(|| config.output.dir.clone());
    if args.out.is_some() {
        overrides.push(("out".to_string(), out_dir.display().to_string()));
    }
    Ok(LoadedRun {
        config,
        config_text,
        overrides,
        out_dir,
    })
}

fn load_panel(config: &RunConfig) -> Result<PricePanel> {
    let schema = config.data.schema();
    let prices = config.data.prices_path()?;
    let caps = config.data.market_caps_path()?;
    let (panel, load_report) = market_data::load_price_panel(prices, caps, &schema)
        .with_context(|| format!("cannot load price panel from {}", prices.display()))?;
    for dropped in &load_report.dropped_rows {
        log::warn!(
            "dropped row {} ({}): missing {}",
            dropped.line,
            dropped.date,
            dropped.missing.join(", ")
        );
    }
    Ok(panel)
}

fn cmd_synth(args: CommonArgs) -> Result<()> {
    let run = load_run(&args)?;
    let mut synth_cfg = run.config.synth_config()?;
    if let Some(seed) = args.seed {
        synth_cfg.seed = seed;
    }
    let panel = sparsetrack_core::synth::generate(&synth_cfg)?;
    let (prices_csv, mc_csv) = market_data::panel_to_csv(&panel, &run.config.data.schema());

    report::atomic_write(&run.out_dir.join("prices.csv"), &prices_csv)?;
    report::atomic_write(&run.out_dir.join("market_caps.csv"), &mc_csv)?;
    report::atomic_write(
        &run.out_dir.join("manifest.txt"),
        &report::manifest("synth", &run.config_text, &run.overrides, synth_cfg.seed),
    )?;
    println!(
        "wrote {} assets x {} days to {}",
        panel.num_assets(),
        panel.num_dates(),
        run.out_dir.display()
    );
    Ok(())
}

fn cmd_select(args: SelectArgs) -> Result<()> {
    let run = load_run(&args.common)?;
    let config = &run.config;
    let panel = load_panel(config)?;

    let plan = match &args.preset {
        Some(name) => config.preset_plan(name)?,
        None => config.stage_plan()?,
    };
    if panel.num_assets() < plan.k() {
        anyhow::bail!(
            "plan needs K = {} assets, panel has {}",
            plan.k(),
            panel.num_assets()
        );
    }

    let weekly = compute_log_returns(&panel, Frequency::Weekly)?;
    let ranking = panel.mc_ranking();
    let top_k = &ranking[..plan.k()];
    let weekly_top = restrict_return_columns(&weekly, top_k);
    let corr = estimate_correlation(
        &weekly_top,
        config.estimation.lookback_weeks,
        config.estimation.weighting_scheme()?,
        config.estimation.shrinkage,
    )?;
    let distance = correlation_to_distance(&corr, top_k)?;

    let sa_cfg = config.solver.resolve_for(&build_problem(&distance, plan.stages[0])?);
    let stage_results = multi_stage::run_stages_detailed(&plan, &distance, &sa_cfg)?;
    let stage_sets: Vec<_> = stage_results.iter().map(|(s, _)| s.clone()).collect();
    let selected = multi_stage::union_and_truncate(&stage_sets, plan.m_star)?;

    let label = args.preset.as_deref().unwrap_or("selection");
    report::atomic_write(
        &run.out_dir.join("selection.csv"),
        &report::selection_csv(&selected, &distance.mc_rank_order),
    )?;
    report::atomic_write(
        &run.out_dir.join("selection_summary.txt"),
        &report::selection_summary(label, &selected, &stage_results),
    )?;
    if args.emit_distance {
        report::atomic_write(&run.out_dir.join("distance_matrix.csv"), &distance.to_csv())?;
    }
    report::atomic_write(
        &run.out_dir.join("manifest.txt"),
        &report::manifest("select", &run.config_text, &run.overrides, sa_cfg.rng_seed),
    )?;
    println!(
        "selected {} assets into {}",
        selected.len(),
        run.out_dir.display()
    );
    Ok(())
}

fn restrict_return_columns(
    panel: &sparsetrack_core::market_data::ReturnPanel,
    ids: &[String],
) -> sparsetrack_core::market_data::ReturnPanel {
    let cols: Vec<usize> = ids
        .iter()
        .map(|id| {
            panel
                .asset_ids
                .iter()
                .position(|a| a == id)
                .expect("ranked id exists in the panel")
        })
        .collect();
    sparsetrack_core::market_data::ReturnPanel {
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

fn cmd_backtest(args: CommonArgs) -> Result<()> {
    let run = load_run(&args)?;
    let config = &run.config;
    let panel = load_panel(config)?;
    let plans = config.backtest_plans()?;
    let bt_cfg = config.backtest_config()?;
    let sa_cfg = config.solver.base_config();

    let mut reports: Vec<BacktestReport> = Vec::new();
    for (label, plan) in &plans {
        let report = evaluation::run_backtest(plan, label, &panel, &sa_cfg, &bt_cfg)
            .with_context(|| format!("{label}: backtest failed"))?;
        let dir = run.out_dir.join(label);
        report::atomic_write(&dir.join("summary.txt"), &report::backtest_summary(&report))?;
        report::atomic_write(&dir.join("horizon_stats.csv"), &report::horizon_stats_csv(&report))?;
        report::atomic_write(
            &dir.join("long_horizon_stats.csv"),
            &report::long_horizon_stats_csv(&report),
        )?;
        report::atomic_write(
            &dir.join("residual_curve.csv"),
            &report::residual_curve_csv(&report),
        )?;
        report::atomic_write(&dir.join("rebalances.csv"), &report::rebalances_csv(&report))?;
        report::atomic_write(&dir.join("returns.csv"), &report::returns_csv(&report))?;
        println!(
            "{label}: {} rebalances, {} evaluation days, max |residual| {}",
            report.rebalances.len(),
            report.portfolio_returns.len(),
            report.max_abs_residual
        );
        reports.push(report);
    }

    if reports.len() >= 2 {
        let refs: Vec<&BacktestReport> = reports.iter().collect();
        let mut rows = Vec::new();
        for &horizon in &bt_cfg.horizons {
            let labels: Vec<String> = reports
                .iter()
                .filter(|r| {
                    r.horizon(horizon)
                        .and_then(|h| h.wilcoxon.as_ref())
                        .is_some_and(|w| !w.rejected_at_5pct)
                })
                .map(|r| r.label.clone())
                .collect();
            let result = evaluation::levene_across_reports(&refs, horizon)?;
            rows.push((horizon, labels, result));
        }
        report::atomic_write(
            &run.out_dir.join("levene_comparison.csv"),
            &report::levene_comparison_csv(&rows),
        )?;
    }

    report::atomic_write(
        &run.out_dir.join("manifest.txt"),
        &report::manifest("backtest", &run.config_text, &run.overrides, sa_cfg.rng_seed),
    )?;
    Ok(())
}
