//! Synthetic corpora with known scaling exponents.
//!
//! On an `X_gen × X_gen` grid each cell draws a population density
//! `P ~ 10^Normal(μ, σ)`, then
//!
//! ```text
//! N_u = round(A · B · P^β · 10^ε_u)
//! N_t = round(A · C · (N_u / A)^γ · 10^ε_t)
//! ```
//!
//! with `ε ~ Normal(0, noise_dex)`. The tweets are shared among the cell's
//! users, every user posting at least once, and placed uniformly inside the
//! cell as geo-tagged points or, optionally, as small city bounding boxes.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geojson::multipolygon_to_geometry;
use crate::geometry::{spherical_rect_area, GeoPoint, LonLatRect, DEFAULT_STANDARD_PARALLEL};
use crate::grid::GridSpec;
use crate::ingest::{PlaceType, PopulationUnit, TweetRecord};
use crate::validation::mix_seed;

const POPULATION_STREAM: u64 = 0x5041_5053;
const ACTIVITY_STREAM: u64 = 0x4143_5456;
const SOURCE: &str = "synth";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub study: LonLatRect,
    pub standard_parallel: f64,
    pub x_gen: usize,
    pub beta_true: f64,
    pub gamma_true: f64,
    pub b_true: f64,
    pub c_true: f64,
    pub noise_dex: f64,
    pub pop_log10_mean: f64,
    pub pop_log10_sigma: f64,
    pub seed: u64,
    /// Share of records emitted as city boxes instead of geo-tagged points.
    pub emit_boxes_fraction: f64,
    /// Splits one user per cell across the cell and its eastern neighbour.
    pub commuters: bool,
    pub n_bots: usize,
    /// Share of the final corpus posted by each bot.
    pub bot_tweet_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            study: LonLatRect {
                min_lon: -5.8,
                min_lat: 49.9,
                max_lon: -1.2,
                max_lat: 52.2,
            },
            standard_parallel: DEFAULT_STANDARD_PARALLEL,
            x_gen: 40,
            beta_true: 1.2,
            gamma_true: 1.35,
            b_true: 0.002,
            c_true: 2.0,
            noise_dex: 0.1,
            pop_log10_mean: 1.5,
            pop_log10_sigma: 0.8,
            seed: 0,
            emit_boxes_fraction: 0.0,
            commuters: false,
            n_bots: 0,
            bot_tweet_fraction: 0.02,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.x_gen == 0 {
            return bad("x_gen must be at least 1".into());
        }
        if self.study.has_zero_area() {
            return bad("study rectangle must have positive extent".into());
        }
        for (name, v) in [
            ("beta_true", self.beta_true),
            ("gamma_true", self.gamma_true),
            ("b_true", self.b_true),
            ("c_true", self.c_true),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.noise_dex >= 0.0) || !(self.pop_log10_sigma >= 0.0) || !self.pop_log10_mean.is_finite() {
            return bad("noise and population spread must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.emit_boxes_fraction) {
            return bad(format!(
                "emit_boxes_fraction {} not in [0, 1]",
                self.emit_boxes_fraction
            ));
        }
        if self.n_bots > 0 {
            let share = self.n_bots as f64 * self.bot_tweet_fraction;
            if !(self.bot_tweet_fraction > 0.0) || share >= 1.0 {
                return bad(format!(
                    "{} bots at {} of the corpus each leave nothing for other users",
                    self.n_bots, self.bot_tweet_fraction
                ));
            }
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.study, self.x_gen, self.standard_parallel)
    }

    /// User prefactor `B` giving at least `min_users` expected users in
    /// the smallest cell at a population density `tail_sigmas` standard
    /// deviations below the mean, before noise.
    pub fn prefactor_for_min_users(&self, min_users: f64, tail_sigmas: f64) -> Result<f64> {
        let spec = self.grid_spec()?;
        let smallest =
            spherical_rect_area(&spec.cell_rect(0, self.x_gen - 1)).min(spherical_rect_area(&spec.cell_rect(0, 0)));
        let p_low = 10f64.powf(self.pop_log10_mean - tail_sigmas * self.pop_log10_sigma);
        Ok(min_users / (smallest * p_low.powf(self.beta_true)))
    }
}

/// Known values for one generation cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTruth {
    pub i: usize,
    pub j: usize,
    pub area_km2: f64,
    pub population: f64,
    pub population_18_35: f64,
    /// `population / area_km2`, after rounding the count.
    pub p_density: f64,
    /// Users generated in this cell.
    pub n_users: u64,
    /// Tweets generated by this cell's users.
    pub n_tweets: u64,
    /// Tweet count of each of this cell's users.
    pub user_tweets: Vec<u32>,
    /// Tweets located in this cell (differs from `n_tweets` only with
    /// commuters).
    pub tweet_mass: f64,
    /// User mass located in this cell, each user split by their share of
    /// tweets.
    pub user_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BotTruth {
    pub user_id: String,
    pub n_tweets: u64,
    pub location: GeoPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SynthConfig,
    pub cells: Vec<CellTruth>,
    pub bots: Vec<BotTruth>,
}

impl GroundTruth {
    pub fn total_population(&self) -> f64 {
        self.cells.iter().map(|c| c.population).sum()
    }

    /// Tweets by regular (non-bot) users.
    pub fn total_tweets(&self) -> u64 {
        self.cells.iter().map(|c| c.n_tweets).sum()
    }

    pub fn total_users(&self) -> u64 {
        self.cells.iter().map(|c| c.n_users).sum()
    }
}

pub fn user_id(i: usize, j: usize, k: usize) -> String {
    format!("u{i}_{j}_{k}")
}

fn normal(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("standard deviation validated as non-negative")
}

/// Youth share of a cell with population density `p`.
pub fn youth_share(p: f64) -> f64 {
    (0.2 + 0.05 * (1.0 + p).log10()).clamp(0.0, 0.6)
}

/// One census feature per generation cell, with its rectangle as polygon,
/// and the population part of the ground truth.
pub fn gen_population(cfg: &SynthConfig) -> Result<(Vec<PopulationUnit>, GroundTruth)> {
    cfg.validate()?;
    let spec = cfg.grid_spec()?;
    let dist = normal(cfg.pop_log10_sigma);
    let cells: Vec<(PopulationUnit, CellTruth)> = (0..spec.n_cells())
        .into_par_iter()
        .map(|k| {
            let (i, j) = spec.coords(k);
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed ^ POPULATION_STREAM, k as u64));
            let rect = spec.cell_rect(i, j);
            let area = spherical_rect_area(&rect);
            let p = 10f64.powf(cfg.pop_log10_mean + dist.sample(&mut rng));
            let population = (p * area).round();
            let youth = (youth_share(population / area) * population).round();
            let unit = PopulationUnit {
                unit_id: format!("S{i:03}_{j:03}"),
                geometry: rect.to_multipolygon().expect("grid cells have positive extent"),
                population,
                population_18_35: Some(youth),
            };
            let truth = CellTruth {
                i,
                j,
                area_km2: area,
                population,
                population_18_35: youth,
                p_density: population / area,
                n_users: 0,
                n_tweets: 0,
                user_tweets: Vec::new(),
                tweet_mass: 0.0,
                user_mass: 0.0,
            };
            (unit, truth)
        })
        .collect();
    let (units, truths) = cells.into_iter().unzip();
    Ok((
        units,
        GroundTruth {
            config: cfg.clone(),
            cells: truths,
            bots: Vec::new(),
        },
    ))
}

/// A position inside `rect`, away from its edges.
fn interior_point<R: Rng>(rect: &LonLatRect, rng: &mut R) -> GeoPoint {
    let u = 0.001 + 0.998 * rng.random::<f64>();
    let v = 0.001 + 0.998 * rng.random::<f64>();
    GeoPoint {
        lon: rect.min_lon + u * rect.width(),
        lat: rect.min_lat + v * rect.height(),
    }
}

/// A box of 5 to 25 percent of the cell extent per side, inside the cell.
fn interior_box<R: Rng>(rect: &LonLatRect, rng: &mut R) -> LonLatRect {
    let fw = rng.random_range(0.05..0.25);
    let fh = rng.random_range(0.05..0.25);
    let (w, h) = (fw * rect.width(), fh * rect.height());
    let x0 = 0.001 + (0.998 - fw) * rng.random::<f64>();
    let y0 = 0.001 + (0.998 - fh) * rng.random::<f64>();
    let min_lon = rect.min_lon + x0 * rect.width();
    let min_lat = rect.min_lat + y0 * rect.height();
    LonLatRect {
        min_lon,
        min_lat,
        max_lon: min_lon + w,
        max_lat: min_lat + h,
    }
}

struct CellActivity {
    user_tweets: Vec<u32>,
    /// `(user index, target cell, record)` in generation order.
    records: Vec<(usize, usize, TweetRecord)>,
}

fn gen_cell<R: Rng>(cfg: &SynthConfig, spec: &GridSpec, truth: &CellTruth, rng: &mut R) -> CellActivity {
    let noise = normal(cfg.noise_dex);
    let a = truth.area_km2;
    let mut n_u = (a * cfg.b_true * truth.p_density.powf(cfg.beta_true) * 10f64.powf(noise.sample(rng))).round();
    let mut n_t = if n_u > 0.0 {
        (a * cfg.c_true * (n_u / a).powf(cfg.gamma_true) * 10f64.powf(noise.sample(rng))).round()
    } else {
        0.0
    };
    if n_t < n_u {
        n_u = n_t;
    }
    if n_u == 0.0 {
        n_t = 0.0;
    }
    let (n_u, n_t) = (n_u as usize, n_t as usize);
    let mut user_tweets = vec![1u32; n_u];
    for _ in n_u..n_t {
        user_tweets[rng.random_range(0..n_u)] += 1;
    }

    let home = spec.index(truth.i, truth.j);
    let east = (truth.i + 1 < spec.side).then(|| spec.index(truth.i + 1, truth.j));
    let commuter = if cfg.commuters && east.is_some() {
        user_tweets.iter().position(|&n| n >= 2)
    } else {
        None
    };

    let mut records = Vec::with_capacity(n_t);
    for (u, &n) in user_tweets.iter().enumerate() {
        let away = if Some(u) == commuter { n as usize / 2 } else { 0 };
        for t in 0..n as usize {
            let target = if t < away { east.unwrap_or(home) } else { home };
            let (ti, tj) = spec.coords(target);
            let rect = spec.cell_rect(ti, tj);
            let boxed = cfg.emit_boxes_fraction > 0.0 && rng.random::<f64>() < cfg.emit_boxes_fraction;
            let (geo, place_type, place_box) = if boxed {
                (None, Some(PlaceType::City), Some(interior_box(&rect, rng)))
            } else {
                (Some(interior_point(&rect, rng)), None, None)
            };
            records.push((
                u,
                target,
                TweetRecord {
                    tweet_id: String::new(),
                    user_id: user_id(truth.i, truth.j, u),
                    geo,
                    place_type,
                    place_box,
                    source: SOURCE.into(),
                    in_reply_to_status_id: None,
                    in_reply_to_user_id: None,
                    quoted_status_id: None,
                },
            ));
        }
    }
    CellActivity { user_tweets, records }
}

/// Generates users and tweets for every cell of `truth` and completes it.
/// Tweet ids are sequential in cell order.
pub fn gen_activity(cfg: &SynthConfig, truth: &mut GroundTruth) -> Result<Vec<TweetRecord>> {
    cfg.validate()?;
    let spec = cfg.grid_spec()?;
    if truth.cells.len() != spec.n_cells() {
        return Err(Error::Config("ground truth does not match the generation grid".into()));
    }
    let activity: Vec<CellActivity> = truth
        .cells
        .par_iter()
        .enumerate()
        .map(|(k, c)| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed ^ ACTIVITY_STREAM, k as u64));
            gen_cell(cfg, &spec, c, &mut rng)
        })
        .collect();

    let mut tweet_mass = vec![0.0; spec.n_cells()];
    let mut user_mass = vec![0.0; spec.n_cells()];
    let mut out = Vec::with_capacity(activity.iter().map(|a| a.records.len()).sum());
    for (c, act) in truth.cells.iter_mut().zip(activity) {
        c.n_users = act.user_tweets.len() as u64;
        c.n_tweets = act.records.len() as u64;
        for (u, target, mut rec) in act.records {
            tweet_mass[target] += 1.0;
            user_mass[target] += 1.0 / act.user_tweets[u] as f64;
            rec.tweet_id = out.len().to_string();
            out.push(rec);
        }
        c.user_tweets = act.user_tweets;
    }
    for (k, c) in truth.cells.iter_mut().enumerate() {
        c.tweet_mass = tweet_mass[k];
        c.user_mass = user_mass[k];
    }
    Ok(out)
}

/// `n_bots` accounts posting from the centre of the study area, each
/// sized to hold `bot_tweet_fraction` of the corpus once all bots are
/// added to `regular_records` other records.
pub fn gen_bots(cfg: &SynthConfig, regular_records: usize, truth: &mut GroundTruth) -> Vec<TweetRecord> {
    if cfg.n_bots == 0 {
        return Vec::new();
    }
    let f = cfg.bot_tweet_fraction;
    let per_bot = (f * regular_records as f64 / (1.0 - cfg.n_bots as f64 * f)).ceil() as usize;
    let at = cfg.study.center();
    let mut out = Vec::with_capacity(per_bot * cfg.n_bots);
    for b in 0..cfg.n_bots {
        let uid = format!("bot{b}");
        for _ in 0..per_bot {
            out.push(TweetRecord {
                tweet_id: (regular_records + out.len()).to_string(),
                user_id: uid.clone(),
                geo: Some(at),
                place_type: None,
                place_box: None,
                source: SOURCE.into(),
                in_reply_to_status_id: None,
                in_reply_to_user_id: None,
                quoted_status_id: None,
            });
        }
        truth.bots.push(BotTruth {
            user_id: uid,
            n_tweets: per_bot as u64,
            location: at,
        });
    }
    out
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub tweets: Vec<TweetRecord>,
    pub units: Vec<PopulationUnit>,
    pub truth: GroundTruth,
}

/// Population, activity and bots in one pass.
pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    let (units, mut truth) = gen_population(cfg)?;
    let mut tweets = gen_activity(cfg, &mut truth)?;
    let bots = gen_bots(cfg, tweets.len(), &mut truth);
    tweets.extend(bots);
    Ok(SynthData { tweets, units, truth })
}

/// Census units as a GeoJSON FeatureCollection readable by the ingest
/// module.
pub fn population_geojson(units: &[PopulationUnit]) -> Value {
    let features: Vec<Value> = units
        .iter()
        .map(|u| {
            json!({
                "type": "Feature",
                "properties": {
                    "code": u.unit_id,
                    "population": u.population,
                    "population_18_35": u.population_18_35,
                },
                "geometry": multipolygon_to_geometry(&u.geometry),
            })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": features })
}

pub fn write_population<W: Write>(w: W, units: &[PopulationUnit]) -> Result<()> {
    serde_json::to_writer(w, &population_geojson(units))?;
    Ok(())
}

pub fn write_ground_truth<W: Write>(w: W, truth: &GroundTruth) -> Result<()> {
    serde_json::to_writer(w, truth)?;
    Ok(())
}
