//! Run configuration: a TOML file with documented keys, resolved into the
//! core library's plan, solver and backtest settings. Stage parameters accept
//! the symbolic forms `"1/M"`, `"2/M"` and `"1/H"` next to plain numbers.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use sparsetrack_core::evaluation::{BacktestConfig, SamplingRule};
use sparsetrack_core::market_data::{CsvSchema, WeightingScheme};
use sparsetrack_core::multi_stage::StagePlan;
use sparsetrack_core::selection::{preset, Preset, SelectionParams, SelectionProblem};
use sparsetrack_core::solver::SaConfig;
use sparsetrack_core::synth::SynthConfig;

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub data: DataSection,
    pub universe: Option<UniverseSection>,
    pub selection: Option<SelectionSection>,
    #[serde(default)]
    pub estimation: EstimationSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub backtest: BacktestSection,
    pub synth: Option<SynthSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub prices: Option<PathBuf>,
    pub market_caps: Option<PathBuf>,
    #[serde(default = "default_date_column")]
    pub date_column: String,
    #[serde(default = "default_index_column")]
    pub index_column: String,
    #[serde(default = "default_mc_asset_column")]
    pub mc_asset_column: String,
    #[serde(default = "default_mc_cap_column")]
    pub mc_cap_column: String,
}

fn default_date_column() -> String {
    "date".into()
}
fn default_index_column() -> String {
    "index".into()
}
fn default_mc_asset_column() -> String {
    "asset".into()
}
fn default_mc_cap_column() -> String {
    "market_cap".into()
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            prices: None,
            market_caps: None,
            date_column: default_date_column(),
            index_column: default_index_column(),
            mc_asset_column: default_mc_asset_column(),
            mc_cap_column: default_mc_cap_column(),
        }
    }
}

impl DataSection {
    pub fn schema(&self) -> CsvSchema {
        CsvSchema {
            date_column: self.date_column.clone(),
            index_column: self.index_column.clone(),
            mc_asset_column: self.mc_asset_column.clone(),
            mc_cap_column: self.mc_cap_column.clone(),
        }
    }

    pub fn prices_path(&self) -> Result<&Path> {
        self.data_path(&self.prices, "data.prices")
    }

    pub fn market_caps_path(&self) -> Result<&Path> {
        self.data_path(&self.market_caps, "data.market_caps")
    }

    fn data_path<'a>(&self, path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        path.as_deref()
            .with_context(|| format!("config is missing the {key} path"))
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniverseSection {
    pub k: usize,
    pub h: usize,
    #[serde(default)]
    pub n: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionSection {
    pub preset: Option<String>,
    #[serde(default)]
    pub stages: Vec<StageSection>,
    pub m_star: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSection {
    pub m: usize,
    pub alpha: ParamValue,
    pub beta: ParamValue,
}

/// A numeric hyper parameter, or one of the symbolic forms resolved per
/// stage: `"1/M"`, `"2/M"`, `"1/H"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Symbolic(String),
}

impl ParamValue {
    pub fn resolve(&self, m: usize, h: usize) -> Result<f64> {
        match self {
            ParamValue::Number(v) => Ok(*v),
            ParamValue::Symbolic(s) => {
                let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
                match compact.to_ascii_uppercase().as_str() {
                    "1/M" => Ok(1.0 / m as f64),
                    "2/M" => Ok(2.0 / m as f64),
                    "1/H" => Ok(1.0 / h as f64),
                    other => bail!(
                        "unsupported symbolic parameter {other:?} (expected 1/M, 2/M or 1/H)"
                    ),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationSection {
    #[serde(default = "default_lookback")]
    pub lookback_weeks: usize,
    #[serde(default = "default_shrinkage")]
    pub shrinkage: f64,
    #[serde(default = "default_weighting")]
    pub weighting: String,
}

fn default_lookback() -> usize {
    260
}
fn default_shrinkage() -> f64 {
    0.1
}
fn default_weighting() -> String {
    "linear".into()
}

impl Default for EstimationSection {
    fn default() -> Self {
        Self {
            lookback_weeks: default_lookback(),
            shrinkage: default_shrinkage(),
            weighting: default_weighting(),
        }
    }
}

impl EstimationSection {
    pub fn weighting_scheme(&self) -> Result<WeightingScheme> {
        match self.weighting.to_ascii_lowercase().as_str() {
            "linear" => Ok(WeightingScheme::Linear),
            "uniform" => Ok(WeightingScheme::Uniform),
            other => bail!("unknown estimation weighting {other:?} (linear or uniform)"),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_sweeps")]
    pub sweeps: usize,
    #[serde(default = "default_cooling")]
    pub cooling: f64,
    /// Omitted or zero: sized as 4 (H - N) per problem.
    #[serde(default)]
    pub moves_per_sweep: usize,
    /// Omitted or zero: derived from 100 probe swaps per problem.
    #[serde(default)]
    pub initial_temperature: f64,
}

fn default_seed() -> u64 {
    42
}
fn default_restarts() -> usize {
    8
}
fn default_sweeps() -> usize {
    300
}
fn default_cooling() -> f64 {
    0.97
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            seed: default_seed(),
            restarts: default_restarts(),
            sweeps: default_sweeps(),
            cooling: default_cooling(),
            moves_per_sweep: 0,
            initial_temperature: 0.0,
        }
    }
}

impl SolverSection {
    pub fn auto_tuned(&self) -> bool {
        self.moves_per_sweep == 0 || self.initial_temperature == 0.0
    }

    /// Schedule with placeholders where auto-tuning applies; pair with
    /// `BacktestConfig::auto_tune_sa` or [`SolverSection::resolve_for`].
    pub fn base_config(&self) -> SaConfig {
        SaConfig {
            initial_temperature: if self.initial_temperature > 0.0 {
                self.initial_temperature
            } else {
                1.0
            },
            cooling_ratio: self.cooling,
            sweeps: self.sweeps,
            moves_per_sweep: self.moves_per_sweep.max(1),
            restarts: self.restarts,
            rng_seed: self.seed,
        }
    }

    /// Concrete schedule for one problem, auto-sizing omitted knobs.
    pub fn resolve_for(&self, problem: &SelectionProblem) -> SaConfig {
        let tuned = SaConfig::tuned(problem, self.seed);
        SaConfig {
            initial_temperature: if self.initial_temperature > 0.0 {
                self.initial_temperature
            } else {
                tuned.initial_temperature
            },
            cooling_ratio: self.cooling,
            sweeps: self.sweeps,
            moves_per_sweep: if self.moves_per_sweep > 0 {
                self.moves_per_sweep
            } else {
                tuned.moves_per_sweep
            },
            restarts: self.restarts,
            rng_seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BacktestSection {
    /// Preset names to backtest; empty means: use the [selection] section.
    #[serde(default)]
    pub presets: Vec<String>,
    #[serde(default = "default_horizons")]
    pub horizons: Vec<usize>,
    #[serde(default = "default_long_horizons")]
    pub long_horizons: Vec<usize>,
    #[serde(default = "default_sample_size")]
    pub sample_size: usize,
    #[serde(default = "default_sampling")]
    pub sampling: String,
    #[serde(default = "default_weight_window")]
    pub weight_window: usize,
    #[serde(default = "default_rebalance_months")]
    pub rebalance_months: Vec<u32>,
}

fn default_horizons() -> Vec<usize> {
    vec![1, 10, 50, 100]
}
fn default_long_horizons() -> Vec<usize> {
    vec![250, 500]
}
fn default_sample_size() -> usize {
    200
}
fn default_sampling() -> String {
    "evenly_spaced".into()
}
fn default_weight_window() -> usize {
    250
}
fn default_rebalance_months() -> Vec<u32> {
    vec![3, 6, 9, 12]
}

impl Default for BacktestSection {
    fn default() -> Self {
        Self {
            presets: Vec::new(),
            horizons: default_horizons(),
            long_horizons: default_long_horizons(),
            sample_size: default_sample_size(),
            sampling: default_sampling(),
            weight_window: default_weight_window(),
            rebalance_months: default_rebalance_months(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    #[serde(default = "default_synth_assets")]
    pub assets: usize,
    #[serde(default = "default_synth_days")]
    pub days: usize,
    #[serde(default = "default_synth_factors")]
    pub factors: usize,
    pub seed: Option<u64>,
    pub factor_vol: Option<f64>,
    pub idio_vol: Option<f64>,
    pub mc_exponent: Option<f64>,
    pub start_date: Option<String>,
}

fn default_synth_assets() -> usize {
    100
}
fn default_synth_days() -> usize {
    1500
}
fn default_synth_factors() -> usize {
    3
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_output_dir")]
    pub dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_output_dir(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<(RunConfig, String)> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let config: RunConfig = toml::from_str(&text)
            .with_context(|| format!("cannot parse config file {}", path.display()))?;
        Ok((config, text))
    }

    pub fn universe(&self) -> Result<UniverseSection> {
        self.universe
            .context("config is missing the [universe] section (k, h, n)")
    }

    /// The plan described by the [selection] section.
    pub fn stage_plan(&self) -> Result<StagePlan> {
        let universe = self.universe()?;
        let section = self
            .selection
            .as_ref()
            .context("config is missing the [selection] section")?;
        Self::plan_from_section(section, universe)
    }

    /// Plan for a named preset over the configured universe.
    pub fn preset_plan(&self, name: &str) -> Result<StagePlan> {
        let universe = self.universe()?;
        let preset_name: Preset = name.parse()?;
        Ok(preset(preset_name, universe.k, universe.h)?)
    }

    fn plan_from_section(section: &SelectionSection, universe: UniverseSection) -> Result<StagePlan> {
        match (&section.preset, section.stages.is_empty()) {
            (Some(name), true) => {
                let preset_name: Preset = name.parse()?;
                Ok(preset(preset_name, universe.k, universe.h)?)
            }
            (None, false) => {
                let stages = section
                    .stages
                    .iter()
                    .map(|s| {
                        Ok(SelectionParams {
                            k: universe.k,
                            h: universe.h,
                            n: universe.n,
                            m: s.m,
                            alpha: s.alpha.resolve(s.m, universe.h)?,
                            beta: s.beta.resolve(s.m, universe.h)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let m_star = section
                    .m_star
                    .context("selection.m_star is required with explicit stages")?;
                Ok(StagePlan::new(stages, m_star)?)
            }
            (Some(_), false) => bail!("configure either selection.preset or selection.stages, not both"),
            (None, true) => bail!("the [selection] section needs a preset or stages"),
        }
    }

    /// Labeled plans for a backtest run: the configured presets, or the
    /// [selection] section when no presets are listed.
    pub fn backtest_plans(&self) -> Result<Vec<(String, StagePlan)>> {
        if self.backtest.presets.is_empty() {
            let label = self
                .selection
                .as_ref()
                .and_then(|s| s.preset.clone())
                .unwrap_or_else(|| "custom".to_string());
            return Ok(vec![(label, self.stage_plan()?)]);
        }
        self.backtest
            .presets
            .iter()
            .map(|name| {
                let plan = self
                    .preset_plan(name)
                    .with_context(|| format!("preset {name}"))?;
                Ok((name.to_ascii_uppercase(), plan))
            })
            .collect()
    }

    pub fn backtest_config(&self) -> Result<BacktestConfig> {
        let sampling = match self.backtest.sampling.to_ascii_lowercase().as_str() {
            "evenly_spaced" => SamplingRule::EvenlySpaced,
            "contiguous" => SamplingRule::Contiguous,
            "non_overlapping" => SamplingRule::NonOverlapping,
            other => bail!("unknown sampling rule {other:?}"),
        };
        Ok(BacktestConfig {
            lookback_weeks: self.estimation.lookback_weeks,
            estimation_weighting: self.estimation.weighting_scheme()?,
            shrinkage_intensity: self.estimation.shrinkage,
            weight_window: self.backtest.weight_window,
            horizons: self.backtest.horizons.clone(),
            long_horizons: self.backtest.long_horizons.clone(),
            sample_size: self.backtest.sample_size,
            sampling,
            rebalance_months: self.backtest.rebalance_months.clone(),
            auto_tune_sa: self.solver.auto_tuned(),
        })
    }

    pub fn synth_config(&self) -> Result<SynthConfig> {
        let section = self
            .synth
            .as_ref()
            .context("config is missing the [synth] section")?;
        let mut cfg = SynthConfig {
            assets: section.assets,
            days: section.days,
            factors: section.factors,
            ..SynthConfig::default()
        };
        if let Some(seed) = section.seed {
            cfg.seed = seed;
        }
        if let Some(v) = section.factor_vol {
            cfg.factor_vol = v;
        }
        if let Some(v) = section.idio_vol {
            cfg.idio_vol = v;
        }
        if let Some(v) = section.mc_exponent {
            cfg.mc_exponent = v;
        }
        if let Some(s) = &section.start_date {
            cfg.start_date = chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d")
                .with_context(|| format!("cannot parse synth.start_date {s:?}"))?;
        }
        Ok(cfg)
    }
}
