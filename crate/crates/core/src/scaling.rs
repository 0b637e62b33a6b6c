//! Power-law fits between densities, resolution scans and the scaling
//! window.
//!
//! The three relations fitted on every grid are
//!
//! ```text
//! T = A · P^α     (tweets vs population)
//! U = B · P^β     (users vs population)
//! T = C · U^γ     (tweets vs users)
//! ```
//!
//! each by unweighted least squares on `log10` values. If population density
//! alone drives activity the exponents satisfy `α = β·γ`;
//! [`consistency`] measures the discrepancy in units of its propagated
//! standard error.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{spherical_rect_area, LonLatRect, MultiPolygon};
use crate::grid::{grid_from_sources, DensityGrid, GridSpec};
use crate::ingest::{LocatedRecord, PopulationUnit};

/// Grid resolutions scanned when none are given.
pub const DEFAULT_SCAN: [usize; 13] = [8, 16, 24, 32, 40, 48, 56, 64, 72, 80, 96, 112, 128];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    /// α: tweet density against population density.
    #[serde(rename = "T_vs_P")]
    TweetsVsPopulation,
    /// β: user density against population density.
    #[serde(rename = "U_vs_P")]
    UsersVsPopulation,
    /// γ: tweet density against user density.
    #[serde(rename = "T_vs_U")]
    TweetsVsUsers,
    /// δ: 18–35 population density against population density.
    #[serde(rename = "Y_vs_P")]
    YouthVsPopulation,
}

impl Relation {
    pub fn label(self) -> &'static str {
        match self {
            Relation::TweetsVsPopulation => "T_vs_P",
            Relation::UsersVsPopulation => "U_vs_P",
            Relation::TweetsVsUsers => "T_vs_U",
            Relation::YouthVsPopulation => "Y_vs_P",
        }
    }
}

/// One fitted power law `y = 10^log10_prefactor · x^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub exponent: f64,
    pub exponent_stderr: f64,
    pub log10_prefactor: f64,
    pub prefactor_stderr: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

impl FitResult {
    pub fn prefactor(&self) -> f64 {
        10f64.powf(self.log10_prefactor)
    }
}

/// Neumaier-compensated sum.
fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Least squares of `ly` on `lx`, both already log-transformed.
///
/// Pairs are sorted before summation, so the result is bit-identical for
/// any ordering of the input.
pub fn fit_log_pairs(pairs: &[(f64, f64)]) -> Result<FitResult> {
    let n = pairs.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "power-law fit needs at least 3 points, got {n}"
        )));
    }
    if pairs.iter().any(|&(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::Domain("non-finite value in fit input".into()));
    }
    let mut pts = pairs.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let nf = n as f64;
    let mx = compensated_sum(pts.iter().map(|p| p.0)) / nf;
    let sxx = compensated_sum(pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)));
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("no variance in the independent variable".into()));
    }

    if pts.iter().all(|p| p.1 == pts[0].1) {
        // Flat data: exact zero slope, and R² = 1 by convention.
        return Ok(FitResult {
            exponent: 0.0,
            exponent_stderr: 0.0,
            log10_prefactor: pts[0].1,
            prefactor_stderr: 0.0,
            r_squared: 1.0,
            n_points: n,
        });
    }

    let my = compensated_sum(pts.iter().map(|p| p.1)) / nf;
    let sxy = compensated_sum(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)));
    let syy = compensated_sum(pts.iter().map(|p| (p.1 - my) * (p.1 - my)));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = compensated_sum(pts.iter().map(|p| {
        let r = p.1 - intercept - slope * p.0;
        r * r
    }));
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    let s2 = ss_res / (nf - 2.0);
    Ok(FitResult {
        exponent: slope,
        exponent_stderr: (s2 / sxx).sqrt(),
        log10_prefactor: intercept,
        prefactor_stderr: (s2 * (1.0 / nf + mx * mx / sxx)).sqrt(),
        r_squared,
        n_points: n,
    })
}

/// Fits `y = c · x^m` to strictly positive points.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "power-law fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(&(x, y)) = points.iter().find(|&&(x, y)| !(x > 0.0) || !(y > 0.0)) {
        return Err(Error::Domain(format!(
            "power-law fit needs positive values, got ({x}, {y})"
        )));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.log10(), y.log10())).collect();
    fit_log_pairs(&logs)
}

/// Count thresholds a cell must meet to enter a fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitThresholds {
    pub min_tweets: f64,
    pub min_population: f64,
}

impl Default for FitThresholds {
    fn default() -> Self {
        FitThresholds {
            min_tweets: 1.0,
            min_population: 1.0,
        }
    }
}

/// Densities of a cell selected for fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellSample {
    pub index: usize,
    pub tweets: f64,
    pub users: f64,
    pub population: f64,
    pub youth: Option<f64>,
}

/// Land cells whose tweet and population counts (not densities) reach the
/// thresholds.
pub fn select_cells(grid: &DensityGrid, th: &FitThresholds) -> Vec<CellSample> {
    (0..grid.spec.n_cells())
        .filter_map(|k| {
            let d = grid.densities(k)?;
            (grid.n_tweets[k] >= th.min_tweets && grid.n_population[k] >= th.min_population).then_some(CellSample {
                index: k,
                tweets: d.tweets,
                users: d.users,
                population: d.population,
                youth: d.youth,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFits {
    pub alpha: FitResult,
    pub beta: FitResult,
    pub gamma: FitResult,
}

impl ScalingFits {
    pub fn get(&self, r: Relation) -> Option<&FitResult> {
        match r {
            Relation::TweetsVsPopulation => Some(&self.alpha),
            Relation::UsersVsPopulation => Some(&self.beta),
            Relation::TweetsVsUsers => Some(&self.gamma),
            Relation::YouthVsPopulation => None,
        }
    }

    pub fn exponents(&self) -> [f64; 3] {
        [self.alpha.exponent, self.beta.exponent, self.gamma.exponent]
    }
}

/// Fits α, β and γ on one set of cells. Cells where any of `T`, `U`, `P`
/// is zero are left out of all three fits.
pub fn fit_samples(samples: &[CellSample]) -> Result<ScalingFits> {
    let usable: Vec<&CellSample> = samples
        .iter()
        .filter(|s| s.tweets > 0.0 && s.users > 0.0 && s.population > 0.0)
        .collect();
    let pairs = |f: fn(&CellSample) -> (f64, f64)| -> Vec<(f64, f64)> { usable.iter().map(|s| f(s)).collect() };
    Ok(ScalingFits {
        alpha: fit_power_law(&pairs(|s| (s.population, s.tweets)))?,
        beta: fit_power_law(&pairs(|s| (s.population, s.users)))?,
        gamma: fit_power_law(&pairs(|s| (s.users, s.tweets)))?,
    })
}

pub fn fit_all(grid: &DensityGrid, th: &FitThresholds) -> Result<ScalingFits> {
    fit_samples(&select_cells(grid, th))
}

/// Located records, census units and land: everything needed to rebuild a
/// grid at any resolution.
#[derive(Debug, Clone)]
pub struct AnalysisInput {
    pub study: LonLatRect,
    pub standard_parallel: f64,
    pub records: Vec<LocatedRecord>,
    pub units: Vec<PopulationUnit>,
    pub land: MultiPolygon,
}

impl AnalysisInput {
    pub fn grid(&self, side: usize) -> Result<DensityGrid> {
        let spec = GridSpec::new(self.study, side, self.standard_parallel)?;
        Ok(grid_from_sources(spec, &self.land, &self.records, &self.units))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanEntry {
    pub side: usize,
    pub fits: Option<ScalingFits>,
    /// Why the fit is absent.
    pub error: Option<String>,
    pub mean_cell_area_km2: f64,
    /// Area of a cell in the middle row of the grid.
    pub middle_cell_area_km2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    pub entries: Vec<ScanEntry>,
}

impl ScanResult {
    pub fn sides(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.side).collect()
    }
}

/// Area of the cell straddling (or just north of) the middle latitude.
pub fn middle_cell_area(study: &LonLatRect, side: usize) -> f64 {
    let spec = GridSpec {
        study: *study,
        side,
        standard_parallel: 0.0,
    };
    spherical_rect_area(&spec.cell_rect(0, side / 2))
}

/// Rebuilds the grid and refits at every resolution. Resolutions are
/// evaluated concurrently and reported in ascending order; a resolution
/// whose fit fails is kept with the error recorded.
pub fn scan_resolutions(input: &AnalysisInput, sides: &[usize], th: &FitThresholds) -> Result<ScanResult> {
    if sides.is_empty() {
        return Err(Error::Config("resolution list is empty".into()));
    }
    let mut sides = sides.to_vec();
    sides.sort_unstable();
    sides.dedup();
    let study_area = spherical_rect_area(&input.study);
    let entries = sides
        .par_iter()
        .map(|&side| {
            let fit = input.grid(side).and_then(|g| fit_all(&g, th));
            let (fits, error) = match fit {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            ScanEntry {
                side,
                fits,
                error,
                mean_cell_area_km2: study_area / (side * side) as f64,
                middle_cell_area_km2: middle_cell_area(&input.study, side),
            }
        })
        .collect();
    Ok(ScanResult { entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowMean {
    pub mean: f64,
    /// Standard error of the inverse-variance weighted mean.
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingWindow {
    #[serde(rename = "X_min")]
    pub x_min: usize,
    #[serde(rename = "X_max")]
    pub x_max: usize,
    pub n_resolutions: usize,
    pub alpha: WindowMean,
    pub beta: WindowMean,
    pub gamma: WindowMean,
}

/// Inverse-variance weighted mean. Entries with zero error dominate: if any
/// are present the mean is taken over them alone.
fn weighted_mean(values: &[(f64, f64)]) -> WindowMean {
    let exact: Vec<f64> = values.iter().filter(|v| v.1 == 0.0).map(|v| v.0).collect();
    if !exact.is_empty() {
        return WindowMean {
            mean: compensated_sum(exact.iter().copied()) / exact.len() as f64,
            stderr: 0.0,
        };
    }
    let w: f64 = compensated_sum(values.iter().map(|v| 1.0 / (v.1 * v.1)));
    let m = compensated_sum(values.iter().map(|v| v.0 / (v.1 * v.1))) / w;
    WindowMean {
        mean: m,
        stderr: (1.0 / w).sqrt(),
    }
}

/// Longest contiguous run of resolutions (at least `min_run` long) over
/// which every α, β and γ estimate lies within one standard error of the
/// run's weighted mean. Ties go to the run with the smaller pooled
/// variance of the means, then to the coarser run.
pub fn detect_window(scan: &ScanResult, min_run: usize) -> Option<ScalingWindow> {
    let entries = &scan.entries;
    let min_run = min_run.max(1);
    let mut best: Option<(usize, f64, ScalingWindow)> = None;
    for start in 0..entries.len() {
        for end in (start + min_run - 1)..entries.len() {
            let run = &entries[start..=end];
            let Some(fits): Option<Vec<&ScalingFits>> = run.iter().map(|e| e.fits.as_ref()).collect() else {
                break;
            };
            let mut means = [WindowMean { mean: 0.0, stderr: 0.0 }; 3];
            let mut ok = true;
            for (k, mean) in means.iter_mut().enumerate() {
                let vals: Vec<(f64, f64)> = fits
                    .iter()
                    .map(|f| {
                        let r = [&f.alpha, &f.beta, &f.gamma][k];
                        (r.exponent, r.exponent_stderr)
                    })
                    .collect();
                *mean = weighted_mean(&vals);
                let slack = 1e-12 * mean.mean.abs().max(1.0);
                if vals.iter().any(|&(e, s)| (e - mean.mean).abs() > s + slack) {
                    ok = false;
                    break;
                }
            }
            if !ok {
                continue;
            }
            let len = run.len();
            let pooled: f64 = means.iter().map(|m| m.stderr * m.stderr).sum();
            let better = match &best {
                None => true,
                Some((bl, bp, _)) => len > *bl || (len == *bl && pooled < *bp),
            };
            if better {
                best = Some((
                    len,
                    pooled,
                    ScalingWindow {
                        x_min: run[0].side,
                        x_max: run[len - 1].side,
                        n_resolutions: len,
                        alpha: means[0],
                        beta: means[1],
                        gamma: means[2],
                    },
                ));
            }
        }
    }
    best.map(|b| b.2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsistencyReport {
    /// `α − β·γ`.
    pub delta: f64,
    pub propagated_sigma: f64,
    /// `delta / propagated_sigma`; `None` when the discrepancy is non-zero
    /// but has no error to scale it by.
    pub z_score: Option<f64>,
    pub infinite_discrepancy: bool,
}

/// Discrepancies this small relative to α count as exact agreement.
const EXACT_AGREEMENT: f64 = 1e-9;

/// Checks `α = β·γ` with first-order error propagation, treating the three
/// fits as independent.
pub fn consistency(alpha: &FitResult, beta: &FitResult, gamma: &FitResult) -> ConsistencyReport {
    let (a, b, g) = (alpha.exponent, beta.exponent, gamma.exponent);
    let delta = a - b * g;
    let sigma =
        (alpha.exponent_stderr.powi(2) + g * g * beta.exponent_stderr.powi(2) + b * b * gamma.exponent_stderr.powi(2))
            .sqrt();
    let z = if delta.abs() <= EXACT_AGREEMENT * a.abs().max(1.0) {
        Some(0.0)
    } else if sigma > 0.0 {
        Some(delta / sigma)
    } else {
        None
    };
    ConsistencyReport {
        delta,
        propagated_sigma: sigma,
        z_score: z,
        infinite_discrepancy: z.is_none(),
    }
}

fn fit_row(relation: Relation, side: usize, f: &FitResult) -> [String; 8] {
    [
        relation.label().to_string(),
        side.to_string(),
        f.n_points.to_string(),
        f.exponent.to_string(),
        f.exponent_stderr.to_string(),
        f.log10_prefactor.to_string(),
        f.prefactor_stderr.to_string(),
        f.r_squared.to_string(),
    ]
}

pub const FITS_HEADER: [&str; 8] = [
    "relation",
    "X",
    "n_points",
    "exponent",
    "exponent_stderr",
    "log10_prefactor",
    "prefactor_stderr",
    "r_squared",
];

/// Writes `fits.csv`: one row per relation per resolution with a fit.
/// `extra` rows (such as a youth fit) follow the scan rows.
pub fn write_fits_csv<W: Write>(w: W, scan: &ScanResult, extra: &[(Relation, usize, FitResult)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(FITS_HEADER)?;
    for e in &scan.entries {
        if let Some(f) = &e.fits {
            out.write_record(fit_row(Relation::TweetsVsPopulation, e.side, &f.alpha))?;
            out.write_record(fit_row(Relation::UsersVsPopulation, e.side, &f.beta))?;
            out.write_record(fit_row(Relation::TweetsVsUsers, e.side, &f.gamma))?;
        }
    }
    for (rel, side, f) in extra {
        out.write_record(fit_row(*rel, *side, f))?;
    }
    out.flush().map_err(|e| Error::io("<fits csv>", e))?;
    Ok(())
}
