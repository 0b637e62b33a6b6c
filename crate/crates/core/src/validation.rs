//! Resampling checks on the fitted exponents: refits on randomly placed
//! sub-areas and on random subsets of grid cells, summarised by 68%
//! intervals.
//!
//! Replicate `k` draws from its own generator seeded with
//! [`mix_seed`]`(master_seed, k)`, and replicates are collected in index
//! order, so output does not depend on the number of worker threads.

use std::io::Write;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::LonLatRect;
use crate::grid::DensityGrid;
use crate::scaling::{fit_all, fit_samples, select_cells, AnalysisInput, CellSample, FitThresholds, ScalingFits};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMode {
    Subarea,
    Subset,
    SubsetNonadjacent,
}

impl std::str::FromStr for ResampleMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "subarea" => Ok(ResampleMode::Subarea),
            "subset" => Ok(ResampleMode::Subset),
            "subset_nonadjacent" => Ok(ResampleMode::SubsetNonadjacent),
            other => Err(format!(
                "unknown resample mode {other:?} (expected subarea, subset or subset_nonadjacent)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResampleConfig {
    pub mode: ResampleMode,
    pub replicates: usize,
    pub area_fraction: f64,
    pub subset_fraction: f64,
    pub master_seed: u64,
    /// Draws allowed per cell before a non-adjacent replicate is dropped.
    pub max_retries: usize,
}

impl Default for ResampleConfig {
    fn default() -> Self {
        ResampleConfig {
            mode: ResampleMode::Subarea,
            replicates: 1000,
            area_fraction: 0.25,
            subset_fraction: 0.05,
            master_seed: 0,
            max_retries: 1000,
        }
    }
}

impl ResampleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        let frac_ok = |f: f64| f > 0.0 && f <= 1.0;
        if !frac_ok(self.area_fraction) {
            return Err(Error::Config(format!(
                "area fraction {} not in (0, 1]",
                self.area_fraction
            )));
        }
        if !frac_ok(self.subset_fraction) {
            return Err(Error::Config(format!(
                "subset fraction {} not in (0, 1]",
                self.subset_fraction
            )));
        }
        if self.max_retries == 0 {
            return Err(Error::Config("max retries must be at least 1".into()));
        }
        Ok(())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `k`: SplitMix64 applied to
/// `master_seed ^ SplitMix64(k)`.
pub fn mix_seed(master_seed: u64, k: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(k))
}

pub fn replicate_rng(master_seed: u64, k: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(master_seed, k as u64))
}

/// Percentile `q` of sorted samples, interpolating linearly between order
/// statistics at zero-based rank `(n − 1)·q`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = (sorted.len() - 1) as f64 * q;
    let lo = rank.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let t = rank - lo as f64;
    if t == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + t * (sorted[hi] - sorted[lo])
    }
}

/// The 16th–84th percentile band.
pub fn ci68(samples: &[f64]) -> Result<[f64; 2]> {
    if samples.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "a 68% interval needs at least 10 samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite resampling sample".into()));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    Ok([percentile(&s, 0.16), percentile(&s, 0.84)])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResampleDistribution {
    pub mode: ResampleMode,
    pub config: ResampleConfig,
    /// Grid side of the full-data fit.
    pub side: usize,
    /// Grid side used inside each sub-area.
    pub sub_side: Option<usize>,
    /// Cells drawn per subset replicate.
    pub subset_size: Option<usize>,
    /// `[α, β, γ]` per replicate in index order; `None` where the refit
    /// failed.
    pub replicates: Vec<Option<[f64; 3]>>,
    pub reference: ScalingFits,
}

impl ResampleDistribution {
    pub fn dropped(&self) -> usize {
        self.replicates.iter().filter(|r| r.is_none()).count()
    }

    pub fn samples(&self, exponent: usize) -> Vec<f64> {
        self.replicates.iter().flatten().map(|r| r[exponent]).collect()
    }

    pub fn ci68(&self, exponent: usize) -> Result<[f64; 2]> {
        ci68(&self.samples(exponent))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["replicate", "alpha", "beta", "gamma"])?;
        for (k, r) in self.replicates.iter().enumerate() {
            match r {
                Some(e) => out.write_record([k.to_string(), e[0].to_string(), e[1].to_string(), e[2].to_string()])?,
                None => out.write_record([k.to_string(), String::new(), String::new(), String::new()])?,
            }
        }
        out.flush().map_err(|e| Error::io("<resample csv>", e))?;
        Ok(())
    }

    pub fn summary(&self) -> serde_json::Value {
        let names = ["alpha", "beta", "gamma"];
        let mut ci = serde_json::Map::new();
        for (k, name) in names.iter().enumerate() {
            let v = match self.ci68(k) {
                Ok(c) => serde_json::json!(c),
                Err(_) => serde_json::Value::Null,
            };
            ci.insert(name.to_string(), v);
        }
        serde_json::json!({
            "mode": self.mode,
            "params": {
                "replicates": self.config.replicates,
                "area_fraction": self.config.area_fraction,
                "subset_fraction": self.config.subset_fraction,
                "max_retries": self.config.max_retries,
                "X": self.side,
                "sub_X": self.sub_side,
                "subset_size": self.subset_size,
            },
            "seed": self.config.master_seed,
            "ci68": ci,
            "n_samples": self.replicates.len() - self.dropped(),
            "dropped": self.dropped(),
            "reference": self.reference,
        })
    }
}

/// Sub-grid side for a sub-area covering `area_fraction` of the study
/// area: `side · sqrt(area_fraction)`, rounded, at least 1.
pub fn sub_grid_side(side: usize, area_fraction: f64) -> usize {
    ((side as f64 * area_fraction.sqrt()).round() as usize).max(1)
}

/// A sub-rectangle with the study rectangle's aspect ratio, covering
/// `area_fraction` of its extent, placed uniformly at random inside it.
pub fn random_subrect<R: Rng>(study: &LonLatRect, area_fraction: f64, rng: &mut R) -> LonLatRect {
    if area_fraction >= 1.0 {
        return *study;
    }
    let s = area_fraction.sqrt();
    let (w, h) = (study.width() * s, study.height() * s);
    let min_lon = study.min_lon + rng.random::<f64>() * (study.width() - w);
    let min_lat = study.min_lat + rng.random::<f64>() * (study.height() - h);
    LonLatRect {
        min_lon,
        min_lat,
        max_lon: (min_lon + w).min(study.max_lon),
        max_lat: (min_lat + h).min(study.max_lat),
    }
}

/// Records located entirely inside `sub`, and the census units touching it,
/// ready for gridding on `sub`.
fn restrict(input: &AnalysisInput, sub: LonLatRect) -> AnalysisInput {
    let touches = |b: Option<LonLatRect>| b.is_some_and(|b| b.intersection(&sub).is_some());
    AnalysisInput {
        study: sub,
        standard_parallel: input.standard_parallel,
        records: input
            .records
            .iter()
            .filter(|r| sub.contains_rect(&r.location.envelope()))
            .cloned()
            .collect(),
        units: input
            .units
            .iter()
            .filter(|u| touches(u.geometry.bbox()))
            .cloned()
            .collect(),
        land: crate::geometry::MultiPolygon::new(
            input
                .land
                .polygons
                .iter()
                .filter(|p| p.outer.bbox().intersection(&sub).is_some())
                .cloned()
                .collect(),
        ),
    }
}

/// Refits at `sub_grid_side(side, area_fraction)` resolution inside
/// randomly placed sub-areas. Records and census units are re-gridded from
/// source for each replicate.
pub fn subarea_resample(
    input: &AnalysisInput,
    side: usize,
    cfg: &ResampleConfig,
    th: &FitThresholds,
) -> Result<ResampleDistribution> {
    cfg.validate()?;
    let reference = fit_all(&input.grid(side)?, th)?;
    let sub_side = sub_grid_side(side, cfg.area_fraction);
    let replicates = (0..cfg.replicates)
        .into_par_iter()
        .map(|k| {
            let mut rng = replicate_rng(cfg.master_seed, k);
            let sub = random_subrect(&input.study, cfg.area_fraction, &mut rng);
            let part = restrict(input, sub);
            let fits = part.grid(sub_side).and_then(|g| fit_all(&g, th)).ok()?;
            Some(fits.exponents())
        })
        .collect();
    Ok(ResampleDistribution {
        mode: ResampleMode::Subarea,
        config: *cfg,
        side,
        sub_side: Some(sub_side),
        subset_size: None,
        replicates,
        reference,
    })
}

fn chebyshev(a: (usize, usize), b: (usize, usize)) -> usize {
    a.0.abs_diff(b.0).max(a.1.abs_diff(b.1))
}

/// Draws `need` of `cells` so that no two chosen cells share an edge or a
/// corner. Each slot is filled by uniform draws among unchosen cells,
/// rejecting conflicts, with at most `max_retries` draws per slot. Returns
/// positions into `cells` in ascending order, or `None` if a slot could not
/// be filled.
pub fn sample_nonadjacent<R: Rng>(
    cells: &[(usize, usize)],
    need: usize,
    rng: &mut R,
    max_retries: usize,
) -> Option<Vec<usize>> {
    if need > cells.len() {
        return None;
    }
    let mut chosen: Vec<usize> = Vec::with_capacity(need);
    let mut taken = vec![false; cells.len()];
    for _ in 0..need {
        let mut placed = false;
        for _ in 0..max_retries {
            let c = rng.random_range(0..cells.len());
            if taken[c] || chosen.iter().any(|&o| chebyshev(cells[o], cells[c]) < 2) {
                continue;
            }
            taken[c] = true;
            chosen.push(c);
            placed = true;
            break;
        }
        if !placed {
            return None;
        }
    }
    chosen.sort_unstable();
    Some(chosen)
}

/// Populated cells entering the fits: those selected by the thresholds
/// with positive tweet, user and population density.
fn populated_cells(grid: &DensityGrid, th: &FitThresholds) -> Vec<CellSample> {
    select_cells(grid, th)
        .into_iter()
        .filter(|s| s.tweets > 0.0 && s.users > 0.0 && s.population > 0.0)
        .collect()
}

/// Refits on random subsets of `⌈subset_fraction · n⌉` of the `n`
/// populated cells, optionally with no two chosen cells adjacent.
pub fn subset_resample(grid: &DensityGrid, cfg: &ResampleConfig, th: &FitThresholds) -> Result<ResampleDistribution> {
    cfg.validate()?;
    let cells = populated_cells(grid, th);
    let reference = fit_samples(&cells)?;
    let need = (cfg.subset_fraction * cells.len() as f64).ceil() as usize;
    if need < 3 {
        return Err(Error::InsufficientData(format!(
            "subset of {need} cells out of {} is too small to fit",
            cells.len()
        )));
    }
    let coords: Vec<(usize, usize)> = cells.iter().map(|c| grid.spec.coords(c.index)).collect();
    let nonadjacent = cfg.mode == ResampleMode::SubsetNonadjacent;
    let replicates = (0..cfg.replicates)
        .into_par_iter()
        .map(|k| {
            let mut rng = replicate_rng(cfg.master_seed, k);
            let picks = if nonadjacent {
                sample_nonadjacent(&coords, need, &mut rng, cfg.max_retries)?
            } else {
                let mut v = index::sample(&mut rng, cells.len(), need).into_vec();
                v.sort_unstable();
                v
            };
            let subset: Vec<CellSample> = picks.iter().map(|&p| cells[p]).collect();
            fit_samples(&subset).ok().map(|f| f.exponents())
        })
        .collect();
    Ok(ResampleDistribution {
        mode: if nonadjacent {
            ResampleMode::SubsetNonadjacent
        } else {
            ResampleMode::Subset
        },
        config: *cfg,
        side: grid.spec.side,
        sub_side: None,
        subset_size: Some(need),
        replicates,
        reference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ci68_of_one_to_hundred() {
        let s: Vec<f64> = (1..=100).map(f64::from).collect();
        let [lo, hi] = ci68(&s).unwrap();
        assert!((lo - 16.84).abs() < 1e-9);
        assert!((hi - 84.16).abs() < 1e-9);
    }

    #[test]
    fn ci68_degenerate_and_symmetric() {
        assert_eq!(ci68(&[2.5; 12]).unwrap(), [2.5, 2.5]);
        let s: Vec<f64> = (-20..=20).map(|k| k as f64 * 0.37).collect();
        let [lo, hi] = ci68(&s).unwrap();
        assert!((lo + hi).abs() < 1e-12);
        assert!(matches!(ci68(&[1.0; 9]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn quarter_area_subgrid_side() {
        assert_eq!(sub_grid_side(80, 0.25), 40);
        assert_eq!(sub_grid_side(32, 1.0), 32);
    }

    #[test]
    fn subrect_keeps_shape_and_stays_inside() {
        let study = LonLatRect::new(-5.8, 49.9, -1.2, 52.2).unwrap();
        let mut rng = replicate_rng(7, 0);
        for _ in 0..200 {
            let r = random_subrect(&study, 0.25, &mut rng);
            assert!(study.contains_rect(&r));
            assert!((r.width() - 2.3).abs() < 1e-9);
            assert!((r.height() - 1.15).abs() < 1e-9);
        }
        assert_eq!(random_subrect(&study, 1.0, &mut rng), study);
    }

    #[test]
    fn seeds_differ_per_replicate() {
        let a: Vec<u64> = (0..100).map(|k| mix_seed(1, k)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(b.len(), a.len());
        assert_ne!(mix_seed(1, 0), mix_seed(2, 0));
    }

    #[test]
    fn nonadjacent_pairs_on_three_by_three() {
        let cells: Vec<(usize, usize)> = (0..3).flat_map(|j| (0..3).map(move |i| (i, j))).collect();
        let mut seen = std::collections::BTreeSet::new();
        let mut dropped = 0;
        for k in 0..2000 {
            let mut rng = replicate_rng(11, k);
            // Drawing the centre first leaves no room for a second cell.
            let Some(pick) = sample_nonadjacent(&cells, 2, &mut rng, 1000) else {
                dropped += 1;
                continue;
            };
            assert!(chebyshev(cells[pick[0]], cells[pick[1]]) >= 2);
            seen.insert((pick[0], pick[1]));
        }
        // Every pair at Chebyshev distance 2 on a 3×3 board shows up.
        let valid: Vec<(usize, usize)> = (0..9)
            .flat_map(|a| (a + 1..9).map(move |b| (a, b)))
            .filter(|&(a, b)| chebyshev(cells[a], cells[b]) >= 2)
            .collect();
        assert_eq!(seen.into_iter().collect::<Vec<_>>(), valid);
        assert!(dropped > 100 && dropped < 400, "{dropped}");
    }

    #[test]
    fn impossible_nonadjacent_request_is_dropped() {
        let cells: Vec<(usize, usize)> = (0..3).flat_map(|j| (0..3).map(move |i| (i, j))).collect();
        let mut rng = replicate_rng(3, 0);
        assert_eq!(sample_nonadjacent(&cells, 5, &mut rng, 50), None);
    }
}
