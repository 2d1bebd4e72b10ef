//! Seeded factor-model market generator for experiments and acceptance runs.
//!
//! Each asset's daily simple return is `loadings . factor_returns + idio`,
//! market caps follow a power law in rank, and the index return is the
//! MC-weighted average of asset returns, chained into a level series. Prices
//! chain the asset returns. Everything is drawn from ChaCha8 keyed by the
//! seed, so a configuration reproduces its market bit for bit.

use chrono::{Datelike, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::market_data::{Asset, PricePanel};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub assets: usize,
    /// Business days in the panel.
    pub days: usize,
    pub factors: usize,
    pub seed: u64,
    /// Daily factor-return volatility.
    pub factor_vol: f64,
    /// Daily idiosyncratic volatility; zero gives a pure factor market.
    pub idio_vol: f64,
    /// Market caps decay as `rank^(-mc_exponent)`.
    pub mc_exponent: f64,
    pub start_date: NaiveDate,
    pub base_price: f64,
    pub base_market_cap: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            assets: 100,
            days: 1500,
            factors: 3,
            seed: 42,
            factor_vol: 0.012,
            idio_vol: 0.008,
            mc_exponent: 1.2,
            start_date: NaiveDate::from_ymd_opt(2015, 1, 5).expect("valid date"),
            base_price: 100.0,
            base_market_cap: 1.0e9,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.assets == 0 {
            return Err(Error::Validation("assets must be at least 1".into()));
        }
        if self.days < 2 {
            return Err(Error::Validation("days must be at least 2".into()));
        }
        if self.factors == 0 {
            return Err(Error::Validation("factors must be at least 1".into()));
        }
        for (name, v) in [
            ("factor_vol", self.factor_vol),
            ("idio_vol", self.idio_vol),
            ("base_price", self.base_price),
            ("base_market_cap", self.base_market_cap),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Validation(format!("{name} must be finite and nonnegative")));
            }
        }
        if self.base_price <= 0.0 || self.base_market_cap <= 0.0 {
            return Err(Error::Validation("base price and market cap must be positive".into()));
        }
        Ok(())
    }
}

/// Generate a synthetic price panel.
///
/// Asset ids `S0000, S0001, ...` follow descending market cap, so the id
/// order equals the MC rank order.
pub fn generate(cfg: &SynthConfig) -> Result<PricePanel> {
    cfg.validate()?;
    let l = cfg.assets;
    let f = cfg.factors;
    let t = cfg.days;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let standard = Normal::new(0.0, 1.0).expect("unit normal");

    // Loadings: every asset rides the first (market) factor positively.
    let mut loadings = vec![vec![0.0; f]; l];
    for row in loadings.iter_mut() {
        row[0] = rng.gen_range(0.5..1.5);
        for entry in row.iter_mut().skip(1) {
            *entry = rng.gen_range(-0.5..0.5);
        }
    }

    let market_caps: Vec<f64> = (0..l)
        .map(|i| cfg.base_market_cap * ((i + 1) as f64).powf(-cfg.mc_exponent))
        .collect();
    let total_cap: f64 = market_caps.iter().sum();
    let mc_weights: Vec<f64> = market_caps.iter().map(|c| c / total_cap).collect();

    let dates = business_days(cfg.start_date, t);

    let mut prices = Vec::with_capacity(t);
    let mut index_level = Vec::with_capacity(t);
    let mut price_row: Vec<f64> = (0..l)
        .map(|i| cfg.base_price * (1.0 + i as f64 / l as f64))
        .collect();
    let mut level = 1000.0;
    prices.push(price_row.clone());
    index_level.push(level);

    for _ in 1..t {
        let factor_returns: Vec<f64> =
            (0..f).map(|_| cfg.factor_vol * standard.sample(&mut rng)).collect();
        let mut index_return = 0.0;
        for i in 0..l {
            let systematic: f64 = loadings[i]
                .iter()
                .zip(&factor_returns)
                .map(|(a, b)| a * b)
                .sum();
            let r = (systematic + cfg.idio_vol * standard.sample(&mut rng)).max(-0.95);
            price_row[i] *= 1.0 + r;
            index_return += mc_weights[i] * r;
        }
        level *= 1.0 + index_return;
        prices.push(price_row.clone());
        index_level.push(level);
    }

    Ok(PricePanel {
        dates,
        assets: (0..l)
            .map(|i| Asset {
                id: format!("S{i:04}"),
                market_cap: market_caps[i],
            })
            .collect(),
        prices,
        index_level,
    })
}

/// `count` consecutive business days starting at (or after) `start`.
fn business_days(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(count);
    let mut d = start;
    while out.len() < count {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.succ_opt().expect("date range is sane");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{compute_log_returns, estimate_correlation, Frequency, WeightingScheme};

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig { assets: 20, days: 100, ..SynthConfig::default() };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.prices, b.prices);
        assert_eq!(a.index_level, b.index_level);
        assert_eq!(a.dates, b.dates);
    }

    #[test]
    fn different_seeds_differ() {
        let a = generate(&SynthConfig { assets: 5, days: 50, seed: 1, ..SynthConfig::default() }).unwrap();
        let b = generate(&SynthConfig { assets: 5, days: 50, seed: 2, ..SynthConfig::default() }).unwrap();
        assert_ne!(a.prices, b.prices);
    }

    #[test]
    fn single_factor_no_noise_is_perfectly_correlated() {
        let cfg = SynthConfig {
            assets: 6,
            days: 120,
            factors: 1,
            idio_vol: 0.0,
            seed: 7,
            ..SynthConfig::default()
        };
        let panel = generate(&cfg).unwrap();
        let returns = compute_log_returns(&panel, Frequency::Daily).unwrap();
        // Log returns of proportional simple returns are not exactly equal,
        // so correlations land near one rather than at one.
        let corr = estimate_correlation(&returns, 100, WeightingScheme::Uniform, 0.0).unwrap();
        for i in 0..6 {
            for j in 0..i {
                assert!(corr.rho[(i, j)] > 0.999, "rho[{i}][{j}] = {}", corr.rho[(i, j)]);
                let d = (2.0 * (1.0 - corr.rho[(i, j)])).sqrt();
                assert!(d < 0.05);
            }
        }
    }

    #[test]
    fn index_level_recomputes_from_weights_and_returns() {
        let cfg = SynthConfig { assets: 15, days: 200, seed: 3, ..SynthConfig::default() };
        let panel = generate(&cfg).unwrap();
        let weights = panel.mc_weights();
        let mut level = panel.index_level[0];
        for t in 1..panel.num_dates() {
            let mut r = 0.0;
            for i in 0..panel.num_assets() {
                r += weights[i] * (panel.prices[t][i] / panel.prices[t - 1][i] - 1.0);
            }
            level *= 1.0 + r;
            let relative = (level - panel.index_level[t]).abs() / panel.index_level[t];
            assert!(relative < 1e-10, "day {t}: relative gap {relative}");
        }
    }

    #[test]
    fn market_caps_strictly_decrease() {
        let panel = generate(&SynthConfig { assets: 30, days: 10, ..SynthConfig::default() }).unwrap();
        for w in panel.assets.windows(2) {
            assert!(w[0].market_cap > w[1].market_cap);
        }
        let ranking = panel.mc_ranking();
        let ids: Vec<String> = panel.assets.iter().map(|a| a.id.clone()).collect();
        assert_eq!(ranking, ids);
    }

    #[test]
    fn dates_skip_weekends() {
        let panel = generate(&SynthConfig { assets: 2, days: 30, ..SynthConfig::default() }).unwrap();
        for d in &panel.dates {
            assert!(!matches!(d.weekday(), Weekday::Sat | Weekday::Sun));
        }
        assert_eq!(panel.dates.len(), 30);
    }

    #[test]
    fn zero_dimensions_are_rejected() {
        assert!(generate(&SynthConfig { assets: 0, ..SynthConfig::default() }).is_err());
        assert!(generate(&SynthConfig { days: 1, ..SynthConfig::default() }).is_err());
        assert!(generate(&SynthConfig { factors: 0, ..SynthConfig::default() }).is_err());
    }
}
