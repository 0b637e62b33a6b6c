//! Command-line front end: settings resolution and the subcommands.
//!
//! Settings come from built-in defaults, then an optional flat
//! `key = value` file (`--config`), then command-line flags, later sources
//! winning. Every setting can also be given as `--set key=value`.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::anomaly::{
    anomaly_correlation, anomaly_map, youth_fit, AnomalyCaps, AnomalyGrid, AnomalyKind, AnomalyMask, AnomalyMeasure,
};
use crate::error::{Error, Result};
use crate::geometry::{LonLatRect, DEFAULT_STANDARD_PARALLEL};
use crate::ingest::TagSelection;
use crate::pipeline::{load, prepare, FilterSettings, Prepared};
use crate::scaling::{
    consistency, detect_window, fit_all, scan_resolutions, write_fits_csv, FitThresholds, Relation, ScanResult,
    DEFAULT_SCAN,
};
use crate::synth::{generate, write_ground_truth, write_population, SynthConfig};
use crate::validation::{subarea_resample, subset_resample, ResampleConfig, ResampleMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalySelection {
    Tu,
    Yp,
    Both,
}

impl FromStr for AnomalySelection {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tu" => Ok(AnomalySelection::Tu),
            "yp" => Ok(AnomalySelection::Yp),
            "both" => Ok(AnomalySelection::Both),
            other => Err(format!("unknown anomaly kind {other:?} (expected tu, yp or both)")),
        }
    }
}

/// Every setting a subcommand may consult.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub study: LonLatRect,
    pub standard_parallel: f64,
    pub x: usize,
    pub x_list: Vec<usize>,
    pub min_run: usize,
    pub filters: FilterSettings,
    pub thresholds: FitThresholds,
    pub caps: AnomalyCaps,
    pub mask: AnomalyMask,
    pub anomaly_kind: AnomalySelection,
    pub resample: ResampleConfig,
    pub synth: SynthConfig,
    pub seed: u64,
    pub threads: Option<usize>,
    pub tweets: Option<PathBuf>,
    pub population: Option<PathBuf>,
    pub land: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let synth = SynthConfig::default();
        RunConfig {
            study: synth.study,
            standard_parallel: DEFAULT_STANDARD_PARALLEL,
            x: 32,
            x_list: DEFAULT_SCAN.to_vec(),
            min_run: 3,
            filters: FilterSettings::default(),
            thresholds: FitThresholds::default(),
            caps: AnomalyCaps::default(),
            mask: AnomalyMask::default(),
            anomaly_kind: AnomalySelection::Tu,
            resample: ResampleConfig::default(),
            synth,
            seed: 0,
            threads: None,
            tweets: None,
            population: None,
            land: None,
            out: PathBuf::from("."),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::Config(format!("bad value {value:?} for {key}: {e}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!(
            "bad value {value:?} for {key}: expected true or false"
        ))),
    }
}

impl RunConfig {
    /// Sets one key. Unknown keys are configuration errors.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let k = key.as_str();
        let v = value.trim();
        match k {
            "study" => {
                let c: Vec<f64> = v.split(',').map(|s| parse(k, s)).collect::<Result<_>>()?;
                if c.len() != 4 {
                    return Err(Error::Config("study needs min_lon,min_lat,max_lon,max_lat".into()));
                }
                self.study = LonLatRect::new(c[0], c[1], c[2], c[3]).map_err(|e| Error::Config(e.to_string()))?;
            }
            "standard_parallel" => self.standard_parallel = parse(k, v)?,
            "x" => self.x = parse(k, v)?,
            "x_list" => self.x_list = parse_list(k, v)?,
            "min_run" => self.min_run = parse(k, v)?,
            "bot_threshold" => self.filters.bot_threshold = parse(k, v)?,
            "min_user_tweets" => self.filters.min_user_tweets = parse(k, v)?,
            "tag_kind" => self.filters.tag_kind = v.parse::<TagSelection>().map_err(Error::Config)?,
            "min_tweets" => self.thresholds.min_tweets = parse(k, v)?,
            "min_population" => self.thresholds.min_population = parse(k, v)?,
            "abs_cap" => self.caps.abs_cap = parse(k, v)?,
            "rel_cap" => self.caps.rel_cap = parse(k, v)?,
            "mask_min_tweet_density" => self.mask.min_tweet_density = parse(k, v)?,
            "mask_min_population_density" => self.mask.min_population_density = parse(k, v)?,
            "anomaly_kind" | "kind" => self.anomaly_kind = v.parse().map_err(Error::Config)?,
            "resample_mode" | "mode" => self.resample.mode = v.parse::<ResampleMode>().map_err(Error::Config)?,
            "replicates" => self.resample.replicates = parse(k, v)?,
            "area_fraction" => self.resample.area_fraction = parse(k, v)?,
            "subset_fraction" => self.resample.subset_fraction = parse(k, v)?,
            "max_retries" => self.resample.max_retries = parse(k, v)?,
            "seed" => self.seed = parse(k, v)?,
            "threads" => self.threads = Some(parse(k, v)?),
            "tweets" => self.tweets = Some(PathBuf::from(v)),
            "population" => self.population = Some(PathBuf::from(v)),
            "land" => self.land = Some(PathBuf::from(v)),
            "out" => self.out = PathBuf::from(v),
            "x_gen" => self.synth.x_gen = parse(k, v)?,
            "beta_true" => self.synth.beta_true = parse(k, v)?,
            "gamma_true" => self.synth.gamma_true = parse(k, v)?,
            "b_true" => self.synth.b_true = parse(k, v)?,
            "c_true" => self.synth.c_true = parse(k, v)?,
            "noise_dex" => self.synth.noise_dex = parse(k, v)?,
            "pop_log10_mean" => self.synth.pop_log10_mean = parse(k, v)?,
            "pop_log10_sigma" => self.synth.pop_log10_sigma = parse(k, v)?,
            "emit_boxes_fraction" => self.synth.emit_boxes_fraction = parse(k, v)?,
            "commuters" => self.synth.commuters = parse_bool(k, v)?,
            "n_bots" => self.synth.n_bots = parse(k, v)?,
            "bot_tweet_fraction" => self.synth.bot_tweet_fraction = parse(k, v)?,
            _ => return Err(Error::Config(format!("unknown setting {key:?}"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of a settings file. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn apply_file_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.apply(k, v)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    /// Copies shared settings into the nested configurations and checks
    /// everything that can be checked before reading any data.
    pub fn finish(&mut self) -> Result<()> {
        self.synth.study = self.study;
        self.synth.standard_parallel = self.standard_parallel;
        self.synth.seed = self.seed;
        self.resample.master_seed = self.seed;
        if self.x == 0 {
            return Err(Error::Config("x must be at least 1".into()));
        }
        if self.x_list.is_empty() || self.x_list.contains(&0) {
            return Err(Error::Config(
                "x_list must be a non-empty list of positive sides".into(),
            ));
        }
        if !(self.filters.bot_threshold > 0.0 && self.filters.bot_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "bot threshold {} not in (0, 1]",
                self.filters.bot_threshold
            )));
        }
        if !(self.thresholds.min_tweets >= 0.0 && self.thresholds.min_population >= 0.0) {
            return Err(Error::Config("fit thresholds must be non-negative".into()));
        }
        if !(self.caps.abs_cap > 0.0 && self.caps.rel_cap > 0.0) {
            return Err(Error::Config("anomaly caps must be positive".into()));
        }
        if self.min_run == 0 {
            return Err(Error::Config("min_run must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        self.resample.validate()?;
        self.synth.validate()
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "tweetscale",
    version,
    about = "Scaling of geolocated tweet activity against population density"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Tweet JSON lines file.
    #[arg(long, global = true)]
    tweets: Option<PathBuf>,
    /// Census GeoJSON FeatureCollection with `population` properties.
    #[arg(long, global = true)]
    population: Option<PathBuf>,
    /// Land GeoJSON; the whole study rectangle counts as land without it.
    #[arg(long, global = true)]
    land: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Grid side (cells per side).
    #[arg(long, global = true)]
    x: Option<String>,
    /// Comma-separated grid sides for `scan`.
    #[arg(long = "x-list", global = true)]
    x_list: Option<String>,
    /// geo, place or both.
    #[arg(long = "tag-kind", global = true)]
    tag_kind: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    threads: Option<String>,
    /// Settings file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Any setting as KEY=VALUE; may be repeated.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Location, bot and source statistics of a corpus.
    Stats,
    /// Grid accumulators and densities at one resolution.
    Grid,
    /// Scaling fits and the consistency check at one resolution.
    Fit,
    /// Fits over a list of resolutions and the scaling window.
    Scan,
    /// Anomaly maps against the fitted trends.
    Anomaly {
        /// tu, yp or both.
        #[arg(long)]
        kind: Option<String>,
    },
    /// Resampling intervals for the exponents.
    Validate {
        /// subarea, subset or subset_nonadjacent.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        replicates: Option<String>,
    },
    /// Synthetic tweets, population and ground truth.
    Synth,
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.apply_file_text(&text)?;
    }
    let path_str = |p: &Option<PathBuf>| p.as_ref().map(|p| p.to_string_lossy().into_owned());
    let mut flags: Vec<(&str, Option<String>)> = vec![
        ("tweets", path_str(&cli.tweets)),
        ("population", path_str(&cli.population)),
        ("land", path_str(&cli.land)),
        ("out", path_str(&cli.out)),
        ("x", cli.x.clone()),
        ("x_list", cli.x_list.clone()),
        ("tag_kind", cli.tag_kind.clone()),
        ("seed", cli.seed.clone()),
        ("threads", cli.threads.clone()),
    ];
    match &cli.command {
        Command::Anomaly { kind } => flags.push(("anomaly_kind", kind.clone())),
        Command::Validate { mode, replicates } => {
            flags.push(("resample_mode", mode.clone()));
            flags.push(("replicates", replicates.clone()));
        }
        _ => {}
    }
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.apply(k, &v)?;
        }
    }
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.apply(k, v)?;
    }
    cfg.finish()?;
    Ok(cfg)
}

fn output(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    File::create(&path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = output(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(dir.join(name), e))?;
    w.flush().map_err(|e| Error::io(dir.join(name), e))
}

fn prepared(cfg: &RunConfig) -> Result<Prepared> {
    let tweets = cfg
        .tweets
        .as_deref()
        .ok_or_else(|| Error::Config("--tweets is required".into()))?;
    let loaded = load(tweets, cfg.population.as_deref(), cfg.land.as_deref())?;
    if loaded.parse.skipped > 0 {
        eprintln!("skipped {} malformed tweet lines", loaded.parse.skipped);
    }
    for d in &loaded.population_diagnostics {
        eprintln!("population feature {} skipped: {}", d.feature_index, d.message);
    }
    prepare(
        &loaded.tweets,
        &loaded.parse,
        loaded.units,
        loaded.land,
        cfg.study,
        cfg.standard_parallel,
        &cfg.filters,
    )
}

fn require_population(cfg: &RunConfig) -> Result<()> {
    if cfg.population.is_none() {
        return Err(Error::Config("--population is required".into()));
    }
    Ok(())
}

fn cmd_stats(cfg: &RunConfig) -> Result<()> {
    let p = prepared(cfg)?;
    let ranked = p.stats.top_sources(usize::MAX);
    let mut w = csv::Writer::from_writer(output(&cfg.out, "sources.csv")?);
    w.write_record(["rank", "source", "count", "proportion"])?;
    for (k, s) in ranked.iter().enumerate() {
        w.write_record([
            (k + 1).to_string(),
            s.source.clone(),
            s.count.to_string(),
            s.proportion.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(cfg.out.join("sources.csv"), e))?;
    write_json(
        &cfg.out,
        "stats.json",
        &json!({ "stats": p.stats, "top_sources": ranked.iter().take(5).collect::<Vec<_>>() }),
    )?;
    println!(
        "{} records, {} located (geo {}, place {}), {} bot users removed",
        p.stats.total_records,
        p.stats.located_geo + p.stats.located_place,
        p.stats.located_geo,
        p.stats.located_place,
        p.stats.bot_users_removed.len()
    );
    Ok(())
}

fn cmd_grid(cfg: &RunConfig) -> Result<()> {
    require_population(cfg)?;
    let p = prepared(cfg)?;
    let grid = p.input.grid(cfg.x)?;
    let mut w = output(&cfg.out, "grid.csv")?;
    grid.write_csv(&mut w)?;
    w.flush().map_err(|e| Error::io(cfg.out.join("grid.csv"), e))?;
    println!("{}x{} grid, {} records", cfg.x, cfg.x, p.input.records.len());
    Ok(())
}

fn write_scan_outputs(cfg: &RunConfig, scan: &ScanResult) -> Result<()> {
    let mut w = output(&cfg.out, "fits.csv")?;
    write_fits_csv(&mut w, scan, &[])?;
    w.flush().map_err(|e| Error::io(cfg.out.join("fits.csv"), e))?;
    Ok(())
}

fn cmd_fit(cfg: &RunConfig) -> Result<()> {
    require_population(cfg)?;
    let p = prepared(cfg)?;
    let scan = scan_resolutions(&p.input, &[cfg.x], &cfg.thresholds)?;
    let entry = &scan.entries[0];
    let fits = match entry.fits {
        Some(f) => f,
        None => return Err(Error::InsufficientData(entry.error.clone().unwrap_or_default())),
    };
    let report = consistency(&fits.alpha, &fits.beta, &fits.gamma);
    write_scan_outputs(cfg, &scan)?;
    write_json(
        &cfg.out,
        "consistency.json",
        &json!({ "X": cfg.x, "fits": fits, "consistency": report }),
    )?;
    for (name, f) in [("alpha", &fits.alpha), ("beta", &fits.beta), ("gamma", &fits.gamma)] {
        println!(
            "{name} = {:.4} +/- {:.4}  (R2 {:.3}, n {})",
            f.exponent, f.exponent_stderr, f.r_squared, f.n_points
        );
    }
    match report.z_score {
        Some(z) => println!("alpha - beta*gamma = {:.4}, z = {:.2}", report.delta, z),
        None => println!("alpha - beta*gamma = {:.4} with zero propagated error", report.delta),
    }
    Ok(())
}

fn cmd_scan(cfg: &RunConfig) -> Result<()> {
    require_population(cfg)?;
    let p = prepared(cfg)?;
    let scan = scan_resolutions(&p.input, &cfg.x_list, &cfg.thresholds)?;
    if scan.entries.iter().all(|e| e.fits.is_none()) {
        let why = scan.entries[0].error.clone().unwrap_or_default();
        return Err(Error::InsufficientData(format!(
            "no resolution could be fitted ({why})"
        )));
    }
    let window = detect_window(&scan, cfg.min_run);
    write_scan_outputs(cfg, &scan)?;
    write_json(&cfg.out, "window.json", &window)?;

    let mut w = csv::Writer::from_writer(output(&cfg.out, "scan.csv")?);
    w.write_record([
        "X",
        "mean_cell_area_km2",
        "middle_cell_area_km2",
        "n_points",
        "r_squared_alpha",
        "r_squared_beta",
        "r_squared_gamma",
        "delta",
        "z_score",
        "error",
    ])?;
    for e in &scan.entries {
        let mut row = vec![
            e.side.to_string(),
            e.mean_cell_area_km2.to_string(),
            e.middle_cell_area_km2.to_string(),
        ];
        match &e.fits {
            Some(f) => {
                let c = consistency(&f.alpha, &f.beta, &f.gamma);
                row.extend([
                    f.alpha.n_points.to_string(),
                    f.alpha.r_squared.to_string(),
                    f.beta.r_squared.to_string(),
                    f.gamma.r_squared.to_string(),
                    c.delta.to_string(),
                    c.z_score.map(|z| z.to_string()).unwrap_or_default(),
                    String::new(),
                ]);
            }
            None => {
                row.extend(std::iter::repeat_n(String::new(), 6));
                row.push(e.error.clone().unwrap_or_default());
            }
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(cfg.out.join("scan.csv"), e))?;

    match window {
        Some(win) => println!(
            "scaling window X = {}..{}: alpha {:.4}, beta {:.4}, gamma {:.4}",
            win.x_min, win.x_max, win.alpha.mean, win.beta.mean, win.gamma.mean
        ),
        None => println!("no scaling window found"),
    }
    Ok(())
}

fn write_anomaly(dir: &Path, map: &AnomalyGrid) -> Result<()> {
    let mut w = output(dir, "anomaly.csv")?;
    map.write_csv(&mut w)?;
    w.flush().map_err(|e| Error::io(dir.join("anomaly.csv"), e))?;
    write_json(dir, "anomaly.geojson", &map.to_geojson())
}

fn cmd_anomaly(cfg: &RunConfig) -> Result<()> {
    require_population(cfg)?;
    let p = prepared(cfg)?;
    let grid = p.input.grid(cfg.x)?;
    let want_tu = cfg.anomaly_kind != AnomalySelection::Yp;
    let want_yp = cfg.anomaly_kind != AnomalySelection::Tu;
    let mut extra = Vec::new();
    let tu = if want_tu {
        let fits = fit_all(&grid, &cfg.thresholds)?;
        extra.push((Relation::TweetsVsUsers, cfg.x, fits.gamma));
        Some(anomaly_map(
            &grid,
            &fits.gamma,
            AnomalyKind::TweetsUsers,
            cfg.caps,
            cfg.mask,
        )?)
    } else {
        None
    };
    let yp = if want_yp {
        let fit = youth_fit(&grid, &cfg.thresholds)?;
        extra.push((Relation::YouthVsPopulation, cfg.x, fit));
        Some(anomaly_map(
            &grid,
            &fit,
            AnomalyKind::YouthPopulation,
            cfg.caps,
            cfg.mask,
        )?)
    } else {
        None
    };
    let correlation = match (&tu, &yp) {
        (Some(a), Some(b)) => Some(json!({
            "absolute": anomaly_correlation(a, b, AnomalyMeasure::Absolute)?,
            "relative": anomaly_correlation(a, b, AnomalyMeasure::Relative)?,
        })),
        _ => None,
    };

    let mut w = output(&cfg.out, "fits.csv")?;
    write_fits_csv(&mut w, &ScanResult { entries: Vec::new() }, &extra)?;
    w.flush().map_err(|e| Error::io(cfg.out.join("fits.csv"), e))?;
    match (&tu, &yp, &correlation) {
        (Some(a), Some(b), Some(c)) => {
            write_anomaly(&cfg.out.join("tu"), a)?;
            write_anomaly(&cfg.out.join("yp"), b)?;
            write_json(&cfg.out, "correlation.json", c)?;
            println!(
                "TU/YP anomaly correlation: absolute r = {:.3}, relative r = {:.3}",
                c["absolute"]["pearson_r"], c["relative"]["pearson_r"]
            );
        }
        (Some(m), None, _) | (None, Some(m), _) => {
            write_anomaly(&cfg.out, m)?;
            println!(
                "{} anomaly map: {} unmasked cells",
                m.kind.label(),
                m.unmasked().count()
            );
        }
        _ => unreachable!("at least one anomaly kind is always selected"),
    }
    Ok(())
}

fn cmd_validate(cfg: &RunConfig) -> Result<()> {
    require_population(cfg)?;
    let p = prepared(cfg)?;
    let dist = match cfg.resample.mode {
        ResampleMode::Subarea => subarea_resample(&p.input, cfg.x, &cfg.resample, &cfg.thresholds)?,
        ResampleMode::Subset | ResampleMode::SubsetNonadjacent => {
            subset_resample(&p.input.grid(cfg.x)?, &cfg.resample, &cfg.thresholds)?
        }
    };
    let mut w = output(&cfg.out, "resample.csv")?;
    dist.write_csv(&mut w)?;
    w.flush().map_err(|e| Error::io(cfg.out.join("resample.csv"), e))?;
    write_json(&cfg.out, "resample_summary.json", &dist.summary())?;
    for (k, name) in ["alpha", "beta", "gamma"].iter().enumerate() {
        match dist.ci68(k) {
            Ok([lo, hi]) => println!("{name}: 68% interval [{lo:.4}, {hi:.4}]"),
            Err(e) => println!("{name}: {e}"),
        }
    }
    println!("{} of {} replicates dropped", dist.dropped(), dist.replicates.len());
    Ok(())
}

fn cmd_synth(cfg: &RunConfig) -> Result<()> {
    let data = generate(&cfg.synth)?;
    let mut w = output(&cfg.out, "tweets.jsonl")?;
    crate::ingest::write_tweets(&mut w, &data.tweets).map_err(|e| Error::io(cfg.out.join("tweets.jsonl"), e))?;
    w.flush().map_err(|e| Error::io(cfg.out.join("tweets.jsonl"), e))?;
    let mut w = output(&cfg.out, "population.geojson")?;
    write_population(&mut w, &data.units)?;
    w.flush()
        .map_err(|e| Error::io(cfg.out.join("population.geojson"), e))?;
    let mut w = output(&cfg.out, "ground_truth.json")?;
    write_ground_truth(&mut w, &data.truth)?;
    w.flush().map_err(|e| Error::io(cfg.out.join("ground_truth.json"), e))?;
    println!(
        "{} tweets from {} users and {} bots over {} cells",
        data.tweets.len(),
        data.truth.total_users(),
        data.truth.bots.len(),
        data.truth.cells.len()
    );
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = resolve(cli)?;
    if let Some(n) = cfg.threads {
        // Only the first request in a process takes effect.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Stats => cmd_stats(&cfg),
        Command::Grid => cmd_grid(&cfg),
        Command::Fit => cmd_fit(&cfg),
        Command::Scan => cmd_scan(&cfg),
        Command::Anomaly { .. } => cmd_anomaly(&cfg),
        Command::Validate { .. } => cmd_validate(&cfg),
        Command::Synth => cmd_synth(&cfg),
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
