//! Price data, log returns, weighted shrunk correlation and the
//! correlation-distance matrix `d_ij = sqrt(2 (1 - rho_ij))`.
//!
//! Asset indexing convention: everywhere downstream of [`DistanceMatrix`],
//! index 0 is the asset with the largest market capitalization and indices
//! follow descending MC order. Rank ties are broken by ascending asset id.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalue tolerance below which a correlation matrix counts as indefinite.
pub const PSD_TOLERANCE: f64 = 1e-8;

/// Weighted variance below this is treated as degenerate (constant column).
const ZERO_VARIANCE: f64 = 1e-30;

/// One index constituent: identifier plus market capitalization as of the
/// panel's reference date.
#[derive(Debug, Clone, PartialEq)]
pub struct Asset {
    pub id: String,
    pub market_cap: f64,
}

/// Aligned panel of daily close prices plus the index level series.
#[derive(Debug, Clone)]
pub struct PricePanel {
    /// Business days, strictly increasing.
    pub dates: Vec<NaiveDate>,
    /// Constituents in file column order.
    pub assets: Vec<Asset>,
    /// Row-major T x L close prices, all strictly positive.
    pub prices: Vec<Vec<f64>>,
    /// Index level per date, strictly positive.
    pub index_level: Vec<f64>,
}

/// Rows dropped while loading a panel, with the reason.
#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub dropped_rows: Vec<DroppedRow>,
}

#[derive(Debug, Clone)]
pub struct DroppedRow {
    /// 1-based line number in the source file (header is line 1).
    pub line: usize,
    pub date: String,
    /// Columns with a missing value on that row.
    pub missing: Vec<String>,
}

/// Column mapping for the price panel CSV and the market-cap sidecar CSV.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub date_column: String,
    pub index_column: String,
    pub mc_asset_column: String,
    pub mc_cap_column: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            date_column: "date".to_string(),
            index_column: "index".to_string(),
            mc_asset_column: "asset".to_string(),
            mc_cap_column: "market_cap".to_string(),
        }
    }
}

/// Return sampling frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frequency {
    Daily,
    /// Last business day of each ISO week.
    Weekly,
}

/// Panel of per-asset, per-period log returns plus the index return series.
#[derive(Debug, Clone)]
pub struct ReturnPanel {
    /// End date of each return period.
    pub periods: Vec<NaiveDate>,
    /// Asset ids, aligned with `returns` columns.
    pub asset_ids: Vec<String>,
    /// Row-major T' x L log returns.
    pub returns: Vec<Vec<f64>>,
    pub index_returns: Vec<f64>,
    pub frequency: Frequency,
}

/// Sample weighting for correlation estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightingScheme {
    /// Every period in the lookback window weighted equally.
    Uniform,
    /// Weight of the n-th oldest period proportional to n; the most recent
    /// period is heaviest.
    Linear,
}

/// How a correlation matrix was estimated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorMeta {
    pub shrinkage_intensity: f64,
    pub weighting: WeightingScheme,
    /// Whether eigenvalue clipping was needed to restore positive
    /// semidefiniteness after shrinkage.
    pub psd_repaired: bool,
}

/// Symmetric correlation matrix with unit diagonal, entries in [-1, 1].
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    pub rho: DMatrix<f64>,
    /// Asset ids aligned with the rows/columns of `rho`.
    pub asset_ids: Vec<String>,
    pub estimator_meta: EstimatorMeta,
}

/// Correlation-distance matrix with rows/columns in descending-MC order.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    /// Symmetric K x K matrix, zero diagonal, entries in [0, 2].
    pub d: DMatrix<f64>,
    /// Matrix index -> asset id, sorted by descending market cap.
    pub mc_rank_order: Vec<String>,
}

impl PricePanel {
    pub fn num_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn num_assets(&self) -> usize {
        self.assets.len()
    }

    /// Asset ids sorted by descending market cap, ties by ascending id.
    pub fn mc_ranking(&self) -> Vec<String> {
        let mut order: Vec<&Asset> = self.assets.iter().collect();
        order.sort_by(|a, b| {
            b.market_cap
                .total_cmp(&a.market_cap)
                .then_with(|| a.id.cmp(&b.id))
        });
        order.into_iter().map(|a| a.id.clone()).collect()
    }

    /// Index weights (market cap / total), aligned with `assets`.
    pub fn mc_weights(&self) -> Vec<f64> {
        let total: f64 = self.assets.iter().map(|a| a.market_cap).sum();
        self.assets.iter().map(|a| a.market_cap / total).collect()
    }

    /// Panel restricted to dates at positions `0..=last_row`.
    pub fn truncated(&self, last_row: usize) -> PricePanel {
        PricePanel {
            dates: self.dates[..=last_row].to_vec(),
            assets: self.assets.clone(),
            prices: self.prices[..=last_row].to_vec(),
            index_level: self.index_level[..=last_row].to_vec(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.dates.len() < 2 {
            return Err(Error::InsufficientData {
                what: "price panel rows".into(),
                required: 2,
                available: self.dates.len(),
            });
        }
        for w in self.dates.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Validation(format!(
                    "dates not strictly increasing at {}",
                    w[1]
                )));
            }
        }
        let mut seen = HashMap::new();
        for a in &self.assets {
            if seen.insert(a.id.clone(), ()).is_some() {
                return Err(Error::Validation(format!("duplicate asset id {}", a.id)));
            }
            if !a.market_cap.is_finite() || a.market_cap <= 0.0 {
                return Err(Error::Validation(format!(
                    "non-positive market cap for asset {}",
                    a.id
                )));
            }
        }
        for (t, row) in self.prices.iter().enumerate() {
            for (i, &p) in row.iter().enumerate() {
                if !p.is_finite() || p <= 0.0 {
                    return Err(Error::Validation(format!(
                        "non-positive price for asset {} on {}",
                        self.assets[i].id, self.dates[t]
                    )));
                }
            }
        }
        for (t, &lvl) in self.index_level.iter().enumerate() {
            if !lvl.is_finite() || lvl <= 0.0 {
                return Err(Error::Validation(format!(
                    "non-positive index level on {}",
                    self.dates[t]
                )));
            }
        }
        Ok(())
    }
}

/// Load a price panel from a CSV file plus a market-cap sidecar CSV.
///
/// The panel CSV needs a header row with one date column, one index-level
/// column and one price column per asset (names per `schema`). Rows with any
/// missing value are dropped and reported in the returned [`LoadReport`].
pub fn load_price_panel(
    prices_path: &Path,
    mc_path: &Path,
    schema: &CsvSchema,
) -> Result<(PricePanel, LoadReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(prices_path)?;
    let headers = reader.headers()?.clone();

    let mut date_col = None;
    let mut index_col = None;
    let mut asset_cols: Vec<(usize, String)> = Vec::new();
    for (i, name) in headers.iter().enumerate() {
        if name == schema.date_column {
            date_col = Some(i);
        } else if name == schema.index_column {
            index_col = Some(i);
        } else {
            asset_cols.push((i, name.to_string()));
        }
    }
    let date_col = date_col
        .ok_or_else(|| Error::Validation(format!("missing date column {}", schema.date_column)))?;
    let index_col = index_col.ok_or_else(|| {
        Error::Validation(format!("missing index column {}", schema.index_column))
    })?;
    if asset_cols.is_empty() {
        return Err(Error::Validation("no asset price columns".into()));
    }

    let market_caps = load_market_caps(mc_path, schema)?;

    let mut dates = Vec::new();
    let mut prices: Vec<Vec<f64>> = Vec::new();
    let mut index_level = Vec::new();
    let mut report = LoadReport::default();

    for record in reader.records() {
        let record = record?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(dates.len() + 2);
        let parse_field = |idx: usize, name: &str| -> Result<Option<f64>> {
            let raw = record.get(idx).unwrap_or("").trim();
            if raw.is_empty() {
                return Ok(None);
            }
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                line,
                message: format!("cannot parse {name} value {raw:?} as a number"),
            })?;
            if v.is_nan() {
                return Err(Error::Parse {
                    line,
                    message: format!("NaN {name} value"),
                });
            }
            Ok(Some(v))
        };

        let date_raw = record.get(date_col).unwrap_or("").trim();
        let date = NaiveDate::parse_from_str(date_raw, "%Y-%m-%d").map_err(|_| Error::Parse {
            line,
            message: format!("cannot parse date {date_raw:?} (expected YYYY-MM-DD)"),
        })?;

        let mut missing = Vec::new();
        let idx_val = parse_field(index_col, &schema.index_column)?;
        if idx_val.is_none() {
            missing.push(schema.index_column.clone());
        }
        let mut row = Vec::with_capacity(asset_cols.len());
        for (col, name) in &asset_cols {
            match parse_field(*col, name)? {
                Some(v) => row.push(v),
                None => missing.push(name.clone()),
            }
        }
        if !missing.is_empty() {
            report.dropped_rows.push(DroppedRow {
                line,
                date: date_raw.to_string(),
                missing,
            });
            continue;
        }
        dates.push(date);
        prices.push(row);
        index_level.push(idx_val.expect("checked above"));
    }

    let assets = asset_cols
        .iter()
        .map(|(_, id)| {
            let cap = market_caps.get(id).copied().ok_or_else(|| {
                Error::Validation(format!("no market cap entry for asset {id}"))
            })?;
            Ok(Asset {
                id: id.clone(),
                market_cap: cap,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let panel = PricePanel {
        dates,
        assets,
        prices,
        index_level,
    };
    panel.validate()?;
    Ok((panel, report))
}

fn load_market_caps(path: &Path, schema: &CsvSchema) -> Result<HashMap<String, f64>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Validation(format!("missing column {name} in market-cap file")))
    };
    let asset_col = find(&schema.mc_asset_column)?;
    let cap_col = find(&schema.mc_cap_column)?;

    let mut caps = HashMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let id = record.get(asset_col).unwrap_or("").trim().to_string();
        let raw = record.get(cap_col).unwrap_or("").trim();
        let cap: f64 = raw.parse().map_err(|_| Error::Parse {
            line,
            message: format!("cannot parse market cap {raw:?}"),
        })?;
        caps.insert(id, cap);
    }
    Ok(caps)
}

/// Compute periodic log returns from a price panel.
///
/// Weekly mode samples the last business day of each ISO week, then takes log
/// differences between consecutive samples; daily mode differences
/// consecutive rows. The index return series is computed identically from the
/// index level.
pub fn compute_log_returns(panel: &PricePanel, frequency: Frequency) -> Result<ReturnPanel> {
    let rows: Vec<usize> = match frequency {
        Frequency::Daily => (0..panel.num_dates()).collect(),
        Frequency::Weekly => last_of_iso_weeks(&panel.dates),
    };
    if rows.len() < 2 {
        return Err(Error::InsufficientData {
            what: match frequency {
                Frequency::Daily => "daily return periods".into(),
                Frequency::Weekly => "distinct ISO weeks".into(),
            },
            required: 2,
            available: rows.len(),
        });
    }

    let l = panel.num_assets();
    let mut periods = Vec::with_capacity(rows.len() - 1);
    let mut returns = Vec::with_capacity(rows.len() - 1);
    let mut index_returns = Vec::with_capacity(rows.len() - 1);
    for w in rows.windows(2) {
        let (a, b) = (w[0], w[1]);
        periods.push(panel.dates[b]);
        let mut row = Vec::with_capacity(l);
        for i in 0..l {
            row.push((panel.prices[b][i] / panel.prices[a][i]).ln());
        }
        returns.push(row);
        index_returns.push((panel.index_level[b] / panel.index_level[a]).ln());
    }

    Ok(ReturnPanel {
        periods,
        asset_ids: panel.assets.iter().map(|a| a.id.clone()).collect(),
        returns,
        index_returns,
        frequency,
    })
}

/// Indices of the last business day within each ISO week.
fn last_of_iso_weeks(dates: &[NaiveDate]) -> Vec<usize> {
    let mut out = Vec::new();
    for (i, d) in dates.iter().enumerate() {
        let key = (d.iso_week().year(), d.iso_week().week());
        match out.last() {
            Some(&last) => {
                let last_date: NaiveDate = dates[last];
                let last_key = (last_date.iso_week().year(), last_date.iso_week().week());
                if last_key == key {
                    *out.last_mut().expect("nonempty") = i;
                } else {
                    out.push(i);
                }
            }
            None => out.push(i),
        }
    }
    out
}

/// Estimate a weighted, shrunk correlation matrix from the trailing
/// `lookback` periods of a return panel.
///
/// The sample correlation uses weighted moments (mean and covariance) with
/// weights per `weighting`. Shrinkage moves the sample matrix toward the
/// constant-correlation target whose off-diagonal entries all equal the mean
/// off-diagonal sample correlation:
/// `rho = (1 - lambda) * rho_sample + lambda * rho_target`.
///
/// If eigenvalue clipping is needed to restore positive semidefiniteness, the
/// repaired matrix is diagonal-renormalized back to unit diagonal.
pub fn estimate_correlation(
    panel: &ReturnPanel,
    lookback: usize,
    weighting: WeightingScheme,
    shrinkage_intensity: f64,
) -> Result<CorrelationMatrix> {
    if lookback < 3 {
        return Err(Error::Parameter(format!(
            "lookback must be at least 3, got {lookback}"
        )));
    }
    if !(0.0..=1.0).contains(&shrinkage_intensity) {
        return Err(Error::Parameter(format!(
            "shrinkage intensity must lie in [0, 1], got {shrinkage_intensity}"
        )));
    }
    let t = panel.returns.len();
    if t < lookback {
        return Err(Error::InsufficientData {
            what: "return periods for correlation lookback".into(),
            required: lookback,
            available: t,
        });
    }
    let window = &panel.returns[t - lookback..];
    let l = panel.asset_ids.len();

    let weights = period_weights(lookback, weighting);

    // Weighted means.
    let mut means = vec![0.0; l];
    for (w, row) in weights.iter().zip(window) {
        for (m, &r) in means.iter_mut().zip(row) {
            *m += w * r;
        }
    }

    // Weighted covariance, lower triangle.
    let mut cov = DMatrix::<f64>::zeros(l, l);
    for (w, row) in weights.iter().zip(window) {
        for i in 0..l {
            let di = row[i] - means[i];
            for j in 0..=i {
                cov[(i, j)] += w * di * (row[j] - means[j]);
            }
        }
    }
    for i in 0..l {
        let var = cov[(i, i)];
        if !var.is_finite() || var <= ZERO_VARIANCE {
            return Err(Error::DegenerateAsset {
                asset: panel.asset_ids[i].clone(),
            });
        }
    }

    let mut rho = DMatrix::<f64>::identity(l, l);
    for i in 0..l {
        for j in 0..i {
            let r = (cov[(i, j)] / (cov[(i, i)] * cov[(j, j)]).sqrt()).clamp(-1.0, 1.0);
            rho[(i, j)] = r;
            rho[(j, i)] = r;
        }
    }

    // Constant-correlation shrinkage target.
    let lambda = shrinkage_intensity;
    if lambda > 0.0 && l > 1 {
        let mut sum = 0.0;
        for i in 0..l {
            for j in 0..i {
                sum += rho[(i, j)];
            }
        }
        let mean_offdiag = sum / (l * (l - 1) / 2) as f64;
        for i in 0..l {
            for j in 0..i {
                let r = ((1.0 - lambda) * rho[(i, j)] + lambda * mean_offdiag).clamp(-1.0, 1.0);
                rho[(i, j)] = r;
                rho[(j, i)] = r;
            }
        }
    }

    let psd_repaired = repair_psd_if_needed(&mut rho);

    Ok(CorrelationMatrix {
        rho,
        asset_ids: panel.asset_ids.clone(),
        estimator_meta: EstimatorMeta {
            shrinkage_intensity,
            weighting,
            psd_repaired,
        },
    })
}

/// Normalized period weights, oldest first.
fn period_weights(n: usize, weighting: WeightingScheme) -> Vec<f64> {
    match weighting {
        WeightingScheme::Uniform => vec![1.0 / n as f64; n],
        WeightingScheme::Linear => {
            let total = (n * (n + 1) / 2) as f64;
            (1..=n).map(|k| k as f64 / total).collect()
        }
    }
}

/// Clip negative eigenvalues to zero and renormalize to unit diagonal when
/// the smallest eigenvalue falls below `-PSD_TOLERANCE`. Returns whether a
/// repair happened.
fn repair_psd_if_needed(rho: &mut DMatrix<f64>) -> bool {
    let eigen = SymmetricEigen::new(rho.clone());
    let min_eig = eigen.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_eig >= -PSD_TOLERANCE {
        return false;
    }
    let clipped = DMatrix::from_diagonal(&eigen.eigenvalues.map(|e| e.max(0.0)));
    let repaired = &eigen.eigenvectors * clipped * eigen.eigenvectors.transpose();
    let l = rho.nrows();
    for i in 0..l {
        for j in 0..i {
            let denom = (repaired[(i, i)] * repaired[(j, j)]).sqrt();
            let r = if denom > 0.0 {
                (repaired[(i, j)] / denom).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            rho[(i, j)] = r;
            rho[(j, i)] = r;
        }
        rho[(i, i)] = 1.0;
    }
    true
}

/// Serialize a panel to the load format: a price CSV and a market-cap CSV.
/// Floats use the shortest round-trip form, so loading reproduces the panel
/// exactly.
pub fn panel_to_csv(panel: &PricePanel, schema: &CsvSchema) -> (String, String) {
    let mut prices = String::new();
    prices.push_str(&schema.date_column);
    prices.push(',');
    prices.push_str(&schema.index_column);
    for a in &panel.assets {
        prices.push(',');
        prices.push_str(&a.id);
    }
    prices.push('\n');
    for (t, date) in panel.dates.iter().enumerate() {
        let _ = write!(prices, "{},{}", date.format("%Y-%m-%d"), panel.index_level[t]);
        for v in &panel.prices[t] {
            let _ = write!(prices, ",{v}");
        }
        prices.push('\n');
    }

    let mut mc = String::new();
    let _ = writeln!(mc, "{},{}", schema.mc_asset_column, schema.mc_cap_column);
    for a in &panel.assets {
        let _ = writeln!(mc, "{},{}", a.id, a.market_cap);
    }
    (prices, mc)
}

impl CorrelationMatrix {
    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    /// Check symmetry, unit diagonal, range and positive semidefiniteness.
    pub fn validate(&self) -> Result<()> {
        let l = self.dim();
        if self.rho.ncols() != l || self.asset_ids.len() != l {
            return Err(Error::Validation("correlation matrix shape mismatch".into()));
        }
        for i in 0..l {
            if (self.rho[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::Validation(format!("diagonal entry {i} is not 1")));
            }
            for j in 0..i {
                let r = self.rho[(i, j)];
                if (r - self.rho[(j, i)]).abs() > 1e-12 {
                    return Err(Error::Validation(format!("asymmetry at ({i}, {j})")));
                }
                if !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&r) {
                    return Err(Error::Validation(format!(
                        "correlation {r} outside [-1, 1] at ({i}, {j})"
                    )));
                }
            }
        }
        let eigen = SymmetricEigen::new(self.rho.clone());
        let min_eig = eigen.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig < -PSD_TOLERANCE {
            return Err(Error::Validation(format!(
                "correlation matrix is not positive semidefinite (min eigenvalue {min_eig:e})"
            )));
        }
        Ok(())
    }
}

/// Convert a correlation matrix to the correlation-distance matrix, with
/// rows/columns reordered to descending-MC index order.
///
/// `mc_ranking` must be a permutation of the correlation matrix's asset ids,
/// largest market cap first.
pub fn correlation_to_distance(
    corr: &CorrelationMatrix,
    mc_ranking: &[String],
) -> Result<DistanceMatrix> {
    let l = corr.dim();
    if mc_ranking.len() != l {
        return Err(Error::Validation(format!(
            "MC ranking has {} ids, correlation matrix has {l}",
            mc_ranking.len()
        )));
    }
    let mut col_of: HashMap<&str, usize> = HashMap::with_capacity(l);
    for (i, id) in corr.asset_ids.iter().enumerate() {
        col_of.insert(id.as_str(), i);
    }
    let perm: Vec<usize> = mc_ranking
        .iter()
        .map(|id| {
            col_of.get(id.as_str()).copied().ok_or_else(|| {
                Error::Validation(format!("MC ranking id {id} not in correlation matrix"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    // A permutation hits every column exactly once.
    {
        let mut seen = vec![false; l];
        for &p in &perm {
            if seen[p] {
                return Err(Error::Validation("MC ranking is not a permutation".into()));
            }
            seen[p] = true;
        }
    }

    let mut d = DMatrix::<f64>::zeros(l, l);
    for i in 0..l {
        for j in 0..i {
            let rho = corr.rho[(perm[i], perm[j])];
            if !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&rho) {
                return Err(Error::Validation(format!(
                    "correlation {rho} outside [-1, 1]"
                )));
            }
            let dist = (2.0 * (1.0 - rho.clamp(-1.0, 1.0))).sqrt();
            d[(i, j)] = dist;
            d[(j, i)] = dist;
        }
    }

    Ok(DistanceMatrix {
        d,
        mc_rank_order: mc_ranking.to_vec(),
    })
}

impl DistanceMatrix {
    pub fn dim(&self) -> usize {
        self.d.nrows()
    }

    /// Basic metric checks: zero diagonal, symmetry, range [0, 2]; for small
    /// matrices also the triangle inequality.
    pub fn validate(&self) -> Result<()> {
        let k = self.dim();
        if self.d.ncols() != k || self.mc_rank_order.len() != k {
            return Err(Error::Validation("distance matrix shape mismatch".into()));
        }
        for i in 0..k {
            if self.d[(i, i)] != 0.0 {
                return Err(Error::Validation(format!("nonzero diagonal at {i}")));
            }
            for j in 0..i {
                let v = self.d[(i, j)];
                if (v - self.d[(j, i)]).abs() > 1e-12 {
                    return Err(Error::Validation(format!("asymmetry at ({i}, {j})")));
                }
                if !(0.0..=2.0 + 1e-12).contains(&v) {
                    return Err(Error::Validation(format!("distance {v} outside [0, 2]")));
                }
            }
        }
        if k <= 30 {
            if let Some((i, j, m)) = self.triangle_violation(1e-9) {
                return Err(Error::Validation(format!(
                    "triangle inequality violated for ({i}, {j}) via {m}"
                )));
            }
        }
        Ok(())
    }

    /// First triple violating `d[i][k] <= d[i][j] + d[j][k] + tol`, if any.
    pub fn triangle_violation(&self, tol: f64) -> Option<(usize, usize, usize)> {
        let k = self.dim();
        for i in 0..k {
            for j in 0..k {
                for m in 0..k {
                    if self.d[(i, m)] > self.d[(i, j)] + self.d[(j, m)] + tol {
                        return Some((i, m, j));
                    }
                }
            }
        }
        None
    }

    /// Serialize to CSV: header row/column of asset ids, full symmetric matrix.
    pub fn to_csv(&self) -> String {
        let k = self.dim();
        let mut out = String::new();
        out.push_str("asset");
        for id in &self.mc_rank_order {
            out.push(',');
            out.push_str(id);
        }
        out.push('\n');
        for i in 0..k {
            out.push_str(&self.mc_rank_order[i]);
            for j in 0..k {
                let _ = write!(out, ",{}", self.d[(i, j)]);
            }
            out.push('\n');
        }
        out
    }

    /// Parse the CSV form produced by [`DistanceMatrix::to_csv`].
    pub fn from_csv(text: &str) -> Result<DistanceMatrix> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::Parse {
            line: 1,
            message: "empty distance matrix file".into(),
        })?;
        let ids: Vec<String> = header.split(',').skip(1).map(str::to_string).collect();
        let k = ids.len();
        let mut d = DMatrix::<f64>::zeros(k, k);
        let mut row_count = 0;
        for (lineno, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let row_id = fields.next().unwrap_or("");
            if row_count >= k || row_id != ids[row_count] {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("unexpected row id {row_id:?}"),
                });
            }
            for j in 0..k {
                let raw = fields.next().ok_or_else(|| Error::Parse {
                    line: lineno + 1,
                    message: "missing matrix entry".into(),
                })?;
                d[(row_count, j)] = raw.trim().parse().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    message: format!("cannot parse distance {raw:?}"),
                })?;
            }
            row_count += 1;
        }
        if row_count != k {
            return Err(Error::Parse {
                line: row_count + 1,
                message: format!("expected {k} matrix rows, found {row_count}"),
            });
        }
        Ok(DistanceMatrix {
            d,
            mc_rank_order: ids,
        })
    }
}
