//! Deviations of measured densities from a fitted scaling trend.
//!
//! For tweets against users the absolute anomaly of a cell is
//! `T − C·U^γ` and the relative anomaly divides that difference by the
//! geometric mean of measured and predicted, so that a cell with 4 tweets
//! where 2 were expected is as anomalous as one with 40000 where 20000
//! were expected. The youth relation `Y = D·P^δ` is handled the same way.

use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geojson::rect_to_geometry;
use crate::grid::{DensityGrid, GridSpec};
use crate::scaling::{fit_power_law, select_cells, FitResult, FitThresholds};

/// `10^log10_prefactor · x^exponent`.
pub fn predict(fit: &FitResult, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("prediction needs a positive density, got {x}")));
    }
    Ok(10f64.powf(fit.log10_prefactor) * x.powf(fit.exponent))
}

pub fn anomaly_abs(measured: f64, predicted: f64) -> f64 {
    measured - predicted
}

/// `(measured − predicted) / sqrt(measured · predicted)`, undefined unless
/// both are positive.
pub fn anomaly_rel(measured: f64, predicted: f64) -> Option<f64> {
    (measured > 0.0 && predicted > 0.0).then(|| (measured - predicted) / (measured * predicted).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnomalyKind {
    /// Tweets against the users trend.
    #[serde(rename = "TU")]
    TweetsUsers,
    /// 18–35 population against the population trend.
    #[serde(rename = "YP")]
    YouthPopulation,
}

impl AnomalyKind {
    pub fn label(self) -> &'static str {
        match self {
            AnomalyKind::TweetsUsers => "TU",
            AnomalyKind::YouthPopulation => "YP",
        }
    }
}

/// Magnitudes beyond which exported anomalies are clamped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalyCaps {
    pub abs_cap: f64,
    pub rel_cap: f64,
}

impl Default for AnomalyCaps {
    fn default() -> Self {
        AnomalyCaps {
            abs_cap: 1000.0,
            rel_cap: 2.0,
        }
    }
}

/// Density floors (per km²) below which a cell is left off the map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalyMask {
    pub min_tweet_density: f64,
    pub min_population_density: f64,
}

impl Default for AnomalyMask {
    fn default() -> Self {
        AnomalyMask {
            min_tweet_density: 1.0,
            min_population_density: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnomalyCell {
    pub i: usize,
    pub j: usize,
    pub measured: Option<f64>,
    pub predicted: Option<f64>,
    pub a_abs: Option<f64>,
    pub a_rel: Option<f64>,
    pub masked: bool,
}

impl AnomalyCell {
    fn masked(i: usize, j: usize) -> Self {
        AnomalyCell {
            i,
            j,
            measured: None,
            predicted: None,
            a_abs: None,
            a_rel: None,
            masked: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnomalyGrid {
    pub spec: GridSpec,
    pub kind: AnomalyKind,
    pub fit: FitResult,
    pub caps: AnomalyCaps,
    pub mask: AnomalyMask,
    pub cells: Vec<AnomalyCell>,
}

fn clamp(v: f64, cap: f64) -> f64 {
    v.clamp(-cap, cap)
}

impl AnomalyGrid {
    pub fn unmasked(&self) -> impl Iterator<Item = &AnomalyCell> {
        self.cells.iter().filter(|c| !c.masked)
    }

    pub fn abs_capped(&self, c: &AnomalyCell) -> Option<f64> {
        c.a_abs.map(|v| clamp(v, self.caps.abs_cap))
    }

    pub fn rel_capped(&self, c: &AnomalyCell) -> Option<f64> {
        c.a_rel.map(|v| clamp(v, self.caps.rel_cap))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "i",
            "j",
            "min_lon",
            "min_lat",
            "max_lon",
            "max_lat",
            "measured",
            "predicted",
            "A_abs",
            "A_abs_capped",
            "A_rel",
            "A_rel_capped",
            "masked",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for c in &self.cells {
            let r = self.spec.cell_rect(c.i, c.j);
            out.write_record([
                c.i.to_string(),
                c.j.to_string(),
                r.min_lon.to_string(),
                r.min_lat.to_string(),
                r.max_lon.to_string(),
                r.max_lat.to_string(),
                opt(c.measured),
                opt(c.predicted),
                opt(c.a_abs),
                opt(self.abs_capped(c)),
                opt(c.a_rel),
                opt(self.rel_capped(c)),
                c.masked.to_string(),
            ])?;
        }
        out.flush().map_err(|e| Error::io("<anomaly csv>", e))?;
        Ok(())
    }

    /// One rectangle feature per unmasked cell.
    pub fn to_geojson(&self) -> Value {
        let features: Vec<Value> = self
            .unmasked()
            .map(|c| {
                json!({
                    "type": "Feature",
                    "geometry": rect_to_geometry(&self.spec.cell_rect(c.i, c.j)),
                    "properties": {
                        "i": c.i,
                        "j": c.j,
                        "measured": c.measured,
                        "predicted": c.predicted,
                        "A_abs": c.a_abs,
                        "A_abs_capped": self.abs_capped(c),
                        "A_rel": c.a_rel,
                        "A_rel_capped": self.rel_capped(c),
                        "masked": false,
                    }
                })
            })
            .collect();
        json!({
            "type": "FeatureCollection",
            "properties": {
                "kind": self.kind.label(),
                "abs_cap": self.caps.abs_cap,
                "rel_cap": self.caps.rel_cap,
                "mask": format!(
                    "T >= {} per km2 and P >= {} per km2",
                    self.mask.min_tweet_density, self.mask.min_population_density
                ),
                "exponent": self.fit.exponent,
                "log10_prefactor": self.fit.log10_prefactor,
            },
            "features": features,
        })
    }
}

/// Measured against predicted density on every cell of `grid`.
///
/// A cell is masked when it has no land, when its tweet or population
/// density is below the mask floors, or when the relative anomaly is
/// undefined there. Caps are stored and applied on export only.
pub fn anomaly_map(
    grid: &DensityGrid,
    fit: &FitResult,
    kind: AnomalyKind,
    caps: AnomalyCaps,
    mask: AnomalyMask,
) -> Result<AnomalyGrid> {
    if !grid.has_densities() {
        return Err(Error::Unavailable("grid densities have not been computed".into()));
    }
    if kind == AnomalyKind::YouthPopulation && !grid.has_youth() {
        return Err(Error::Unavailable(
            "the population input carries no 18-35 counts".into(),
        ));
    }
    let cells = (0..grid.spec.n_cells())
        .map(|k| {
            let (i, j) = grid.spec.coords(k);
            let Some(d) = grid.densities(k) else {
                return AnomalyCell::masked(i, j);
            };
            if d.tweets < mask.min_tweet_density || d.population < mask.min_population_density {
                return AnomalyCell::masked(i, j);
            }
            let (measured, x) = match kind {
                AnomalyKind::TweetsUsers => (d.tweets, d.users),
                AnomalyKind::YouthPopulation => (d.youth.unwrap_or(0.0), d.population),
            };
            let Ok(predicted) = predict(fit, x) else {
                return AnomalyCell::masked(i, j);
            };
            match anomaly_rel(measured, predicted) {
                Some(rel) => AnomalyCell {
                    i,
                    j,
                    measured: Some(measured),
                    predicted: Some(predicted),
                    a_abs: Some(anomaly_abs(measured, predicted)),
                    a_rel: Some(rel),
                    masked: false,
                },
                None => AnomalyCell::masked(i, j),
            }
        })
        .collect();
    Ok(AnomalyGrid {
        spec: grid.spec,
        kind,
        fit: *fit,
        caps,
        mask,
        cells,
    })
}

/// δ and D of `Y = D·P^δ` over the fit-selected cells with positive
/// youth density.
pub fn youth_fit(grid: &DensityGrid, th: &FitThresholds) -> Result<FitResult> {
    if !grid.has_youth() {
        return Err(Error::Unavailable(
            "the population input carries no 18-35 counts".into(),
        ));
    }
    let pts: Vec<(f64, f64)> = select_cells(grid, th)
        .into_iter()
        .filter_map(|s| Some((s.population, s.youth?)))
        .filter(|&(p, y)| p > 0.0 && y > 0.0)
        .collect();
    fit_power_law(&pts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyMeasure {
    Absolute,
    Relative,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnomalyCorrelation {
    pub measure: AnomalyMeasure,
    pub pearson_r: f64,
    pub n: usize,
    /// `(a, b)` anomaly pairs in cell order.
    #[serde(skip)]
    pub pairs: Vec<(f64, f64)>,
}

pub fn pearson(pairs: &[(f64, f64)]) -> Result<f64> {
    let n = pairs.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "correlation needs at least 3 pairs, got {n}"
        )));
    }
    let nf = n as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateFit("correlation of a constant series".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation of like-for-like raw anomalies over the cells
/// unmasked in both grids.
pub fn anomaly_correlation(a: &AnomalyGrid, b: &AnomalyGrid, measure: AnomalyMeasure) -> Result<AnomalyCorrelation> {
    if a.spec != b.spec {
        return Err(Error::Config(
            "anomaly grids are on different grid specifications".into(),
        ));
    }
    let pick = |c: &AnomalyCell| match measure {
        AnomalyMeasure::Absolute => c.a_abs,
        AnomalyMeasure::Relative => c.a_rel,
    };
    let pairs: Vec<(f64, f64)> = a
        .cells
        .iter()
        .zip(&b.cells)
        .filter(|(x, y)| !x.masked && !y.masked)
        .filter_map(|(x, y)| Some((pick(x)?, pick(y)?)))
        .collect();
    let r = pearson(&pairs)?;
    Ok(AnomalyCorrelation {
        measure,
        pearson_r: r,
        n: pairs.len(),
        pairs,
    })
}
