//! Regular X×X grids over the study rectangle and the fractional mass
//! accumulators behind tweet, user and population densities.
//!
//! Cells are indexed by `i` (west to east) and `j` (south to north).
//! Membership of a point is half-open, `[min, max)`, except along the
//! eastern and northern edges of the study rectangle, which are closed, so
//! every point inside the study area belongs to exactly one cell.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{spherical_rect_area, LonLatRect, MultiPolygon, PlaneBox, PlanePolygon};
use crate::ingest::{LocatedRecord, Location, PopulationUnit};

/// Land slivers below this size do not count as land.
const MIN_LAND_KM2: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub study: LonLatRect,
    /// Cells per side.
    pub side: usize,
    pub standard_parallel: f64,
}

impl GridSpec {
    pub fn new(study: LonLatRect, side: usize, standard_parallel: f64) -> Result<Self> {
        if side == 0 {
            return Err(Error::Config("grid side must be at least 1".into()));
        }
        if study.has_zero_area() {
            return Err(Error::Config("study rectangle must have positive extent".into()));
        }
        Ok(GridSpec {
            study,
            side,
            standard_parallel,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.side * self.side
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.side + i
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.side, idx / self.side)
    }

    pub fn lon_edge(&self, i: usize) -> f64 {
        if i >= self.side {
            return self.study.max_lon;
        }
        self.study.min_lon + self.study.width() * i as f64 / self.side as f64
    }

    pub fn lat_edge(&self, j: usize) -> f64 {
        if j >= self.side {
            return self.study.max_lat;
        }
        self.study.min_lat + self.study.height() * j as f64 / self.side as f64
    }

    pub fn cell_rect(&self, i: usize, j: usize) -> LonLatRect {
        LonLatRect {
            min_lon: self.lon_edge(i),
            min_lat: self.lat_edge(j),
            max_lon: self.lon_edge(i + 1),
            max_lat: self.lat_edge(j + 1),
        }
    }

    fn slot(&self, v: f64, lo: f64, span: f64, edge: impl Fn(usize) -> f64) -> usize {
        let last = self.side - 1;
        let mut k = (((v - lo) / span) * self.side as f64).floor().clamp(0.0, last as f64) as usize;
        // Settle rounding in the division against the exact edges.
        while k > 0 && v < edge(k) {
            k -= 1;
        }
        while k < last && v >= edge(k + 1) {
            k += 1;
        }
        k
    }

    fn lon_slot(&self, lon: f64) -> usize {
        self.slot(lon, self.study.min_lon, self.study.width(), |i| self.lon_edge(i))
    }

    fn lat_slot(&self, lat: f64) -> usize {
        self.slot(lat, self.study.min_lat, self.study.height(), |j| self.lat_edge(j))
    }

    /// The cell holding a point, or `None` outside the study rectangle.
    pub fn cell_of(&self, lon: f64, lat: f64) -> Option<(usize, usize)> {
        let s = &self.study;
        if lon < s.min_lon || lon > s.max_lon || lat < s.min_lat || lat > s.max_lat {
            return None;
        }
        Some((self.lon_slot(lon), self.lat_slot(lat)))
    }

    /// Inclusive index ranges of cells that can overlap `r`.
    fn overlapping(&self, r: &LonLatRect) -> Option<((usize, usize), (usize, usize))> {
        let r = r.intersection(&self.study)?;
        Some((
            (self.lon_slot(r.min_lon), self.lon_slot(r.max_lon)),
            (self.lat_slot(r.min_lat), self.lat_slot(r.max_lat)),
        ))
    }

    /// Share `f_jb` of a located record that falls in cell `(i, j)`.
    pub fn overlap_fraction(&self, loc: &Location, i: usize, j: usize) -> f64 {
        match loc {
            Location::Point(p) => match self.cell_of(p.lon, p.lat) {
                Some(c) if c == (i, j) => 1.0,
                _ => 0.0,
            },
            Location::Box(b) => box_overlap_fraction(b, &self.cell_rect(i, j)),
        }
    }

    /// Every cell receiving a non-zero share of `loc`, with that share.
    pub fn contributions(&self, loc: &Location, out: &mut Vec<(usize, f64)>) {
        out.clear();
        match loc {
            Location::Point(p) => {
                if let Some((i, j)) = self.cell_of(p.lon, p.lat) {
                    out.push((self.index(i, j), 1.0));
                }
            }
            Location::Box(b) => {
                let Some(((i0, i1), (j0, j1))) = self.overlapping(b) else {
                    return;
                };
                if i0 == i1 && j0 == j1 && self.cell_rect(i0, j0).contains_rect(b) {
                    out.push((self.index(i0, j0), 1.0));
                    return;
                }
                for j in j0..=j1 {
                    for i in i0..=i1 {
                        let f = box_overlap_fraction(b, &self.cell_rect(i, j));
                        if f > 0.0 {
                            out.push((self.index(i, j), f));
                        }
                    }
                }
            }
        }
    }
}

/// Area of `bx ∩ cell` over the area of `bx`. The box must have positive
/// area; a zero-area box is a point and has no area share.
pub fn box_overlap_fraction(bx: &LonLatRect, cell: &LonLatRect) -> f64 {
    debug_assert!(!bx.has_zero_area(), "zero-area boxes must be located as points");
    match bx.intersection(cell) {
        Some(inter) if !inter.has_zero_area() => {
            (spherical_rect_area(&inter) / spherical_rect_area(bx)).clamp(0.0, 1.0)
        }
        _ => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridCell {
    pub i: usize,
    pub j: usize,
    pub rect: LonLatRect,
    pub land_area: f64,
}

/// Per-km² densities of one land cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Densities {
    pub tweets: f64,
    pub users: f64,
    pub population: f64,
    pub youth: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Tweets,
    Users,
    Population,
    Youth,
}

impl Densities {
    pub fn get(&self, q: Quantity) -> Option<f64> {
        match q {
            Quantity::Tweets => Some(self.tweets),
            Quantity::Users => Some(self.users),
            Quantity::Population => Some(self.population),
            Quantity::Youth => self.youth,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridDiagnostic {
    pub i: usize,
    pub j: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct DensityGrid {
    pub spec: GridSpec,
    pub cells: Vec<GridCell>,
    /// Fractional tweet count per cell.
    pub n_tweets: Vec<f64>,
    /// Fractional user count per cell.
    pub n_users: Vec<f64>,
    pub n_population: Vec<f64>,
    pub n_youth: Option<Vec<f64>>,
    densities: Vec<Option<Densities>>,
}

impl DensityGrid {
    /// Grid with land areas from `land` and empty accumulators.
    ///
    /// The land geometry is clipped once per row strip and the strip pieces
    /// are clipped per cell, so the cost grows with `side × vertices`
    /// rather than `side² × vertices`.
    pub fn build(spec: GridSpec, land: &MultiPolygon) -> Self {
        let polys = PlanePolygon::from_multipolygon(land);
        let side = spec.side;
        let rows: Vec<Vec<f64>> = (0..side)
            .into_par_iter()
            .map(|j| {
                let (lat0, lat1) = (spec.lat_edge(j), spec.lat_edge(j + 1));
                let strip = PlaneBox::lat_strip(lat0, lat1);
                let pieces: Vec<PlanePolygon> = polys
                    .iter()
                    .filter(|p| p.bbox.max_lat >= lat0 && p.bbox.min_lat <= lat1)
                    .map(|p| p.clip(&strip))
                    .filter(|p| !p.is_empty())
                    .collect();
                (0..side)
                    .map(|i| {
                        let cell = spec.cell_rect(i, j);
                        let bx = PlaneBox::from_rect(&cell);
                        let a: f64 = pieces
                            .iter()
                            .filter(|p| p.bbox.max_lon >= cell.min_lon && p.bbox.min_lon <= cell.max_lon)
                            .map(|p| p.clip(&bx).area_km2())
                            .sum();
                        let a = a.min(spherical_rect_area(&cell));
                        if a < MIN_LAND_KM2 {
                            0.0
                        } else {
                            a
                        }
                    })
                    .collect()
            })
            .collect();

        let mut cells = Vec::with_capacity(spec.n_cells());
        for (j, row) in rows.into_iter().enumerate() {
            for (i, land_area) in row.into_iter().enumerate() {
                cells.push(GridCell {
                    i,
                    j,
                    rect: spec.cell_rect(i, j),
                    land_area,
                });
            }
        }
        let n = spec.n_cells();
        DensityGrid {
            spec,
            cells,
            n_tweets: vec![0.0; n],
            n_users: vec![0.0; n],
            n_population: vec![0.0; n],
            n_youth: None,
            densities: Vec::new(),
        }
    }

    /// Adds `f_jb` of every record to the tweet count of each cell `b`.
    pub fn accumulate_tweets(&mut self, records: &[LocatedRecord]) {
        let mut buf = Vec::new();
        for r in records {
            self.spec.contributions(&r.location, &mut buf);
            for &(idx, f) in &buf {
                self.n_tweets[idx] += f;
            }
        }
        self.densities.clear();
    }

    /// Adds `f_jb / N_t(i)` for every record `j` of user `i`, so each user
    /// contributes one unit of mass split over the cells they post from.
    pub fn accumulate_users(&mut self, groups: &[UserGroup<'_>]) {
        let mut buf = Vec::new();
        for g in groups {
            let weight = 1.0 / g.records.len() as f64;
            for r in &g.records {
                self.spec.contributions(&r.location, &mut buf);
                for &(idx, f) in &buf {
                    self.n_users[idx] += f * weight;
                }
            }
        }
        self.densities.clear();
    }

    /// Spreads each unit's population uniformly over its area and adds the
    /// part overlapping each cell. Youth counts follow the same rule and are
    /// kept only when every unit carries them.
    pub fn apportion_population(&mut self, units: &[PopulationUnit]) -> Vec<String> {
        let mut diags = Vec::new();
        let with_youth = !units.is_empty() && units.iter().all(|u| u.population_18_35.is_some());
        if with_youth {
            self.n_youth.get_or_insert_with(|| vec![0.0; self.spec.n_cells()]);
        }
        let spec = self.spec;
        let shares: Vec<Option<Vec<(usize, f64)>>> =
            units.par_iter().map(|u| unit_shares(&spec, &u.geometry)).collect();
        for (u, shares) in units.iter().zip(shares) {
            let Some(shares) = shares else {
                diags.push(format!("unit {} has zero area and was skipped", u.unit_id));
                continue;
            };
            for (idx, s) in shares {
                self.n_population[idx] += u.population * s;
                if let (Some(ny), Some(y)) = (self.n_youth.as_mut(), u.population_18_35) {
                    ny[idx] += y * s;
                }
            }
        }
        self.densities.clear();
        diags
    }

    /// Divides the accumulators by land area. Cells without land get no
    /// densities; any mass found on them is reported.
    pub fn compute_densities(&mut self) -> Vec<GridDiagnostic> {
        let mut diags = Vec::new();
        self.densities = self
            .cells
            .iter()
            .enumerate()
            .map(|(k, c)| {
                if c.land_area <= 0.0 {
                    let stray = self.n_tweets[k] + self.n_users[k] + self.n_population[k];
                    if stray > 0.0 {
                        diags.push(GridDiagnostic {
                            i: c.i,
                            j: c.j,
                            message: format!("mass {stray} on a cell without land"),
                        });
                    }
                    return None;
                }
                let a = c.land_area;
                Some(Densities {
                    tweets: self.n_tweets[k] / a,
                    users: self.n_users[k] / a,
                    population: self.n_population[k] / a,
                    youth: self.n_youth.as_ref().map(|y| y[k] / a),
                })
            })
            .collect();
        diags
    }

    /// Densities of cell `idx`; `None` without land or before
    /// [`compute_densities`](Self::compute_densities).
    pub fn densities(&self, idx: usize) -> Option<&Densities> {
        self.densities.get(idx).and_then(Option::as_ref)
    }

    pub fn has_densities(&self) -> bool {
        !self.densities.is_empty()
    }

    pub fn has_youth(&self) -> bool {
        self.n_youth.is_some()
    }

    /// Counts of land cells with a positive value of `q`, binned by
    /// `log10(value)` against `edges` (ascending; bins are `[e_k, e_k+1)`).
    pub fn density_histogram(&self, q: Quantity, edges: &[f64]) -> Result<Vec<usize>> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("histogram edges must be strictly increasing".into()));
        }
        let mut counts = vec![0; edges.len() - 1];
        for d in self.densities.iter().flatten() {
            let Some(v) = d.get(q).filter(|&v| v > 0.0) else {
                continue;
            };
            let lv = v.log10();
            let k = edges.partition_point(|&e| e <= lv);
            if k >= 1 && k < edges.len() {
                counts[k - 1] += 1;
            }
        }
        Ok(counts)
    }

    /// Writes the grid export: one row per cell with the accumulators and,
    /// where defined, the densities.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "i", "j", "min_lon", "min_lat", "max_lon", "max_lat", "A_km2", "N_t", "N_u", "N_p", "N_y", "T", "U", "P",
            "Y",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for (k, c) in self.cells.iter().enumerate() {
            let d = self.densities(k);
            out.write_record([
                c.i.to_string(),
                c.j.to_string(),
                c.rect.min_lon.to_string(),
                c.rect.min_lat.to_string(),
                c.rect.max_lon.to_string(),
                c.rect.max_lat.to_string(),
                c.land_area.to_string(),
                self.n_tweets[k].to_string(),
                self.n_users[k].to_string(),
                self.n_population[k].to_string(),
                opt(self.n_youth.as_ref().map(|y| y[k])),
                opt(d.map(|d| d.tweets)),
                opt(d.map(|d| d.users)),
                opt(d.map(|d| d.population)),
                opt(d.and_then(|d| d.youth)),
            ])?;
        }
        out.flush().map_err(|e| Error::io("<grid csv>", e))?;
        Ok(())
    }
}

/// Shares of a unit's area falling in each cell, or `None` for a unit
/// without area.
fn unit_shares(spec: &GridSpec, geom: &MultiPolygon) -> Option<Vec<(usize, f64)>> {
    let polys = PlanePolygon::from_multipolygon(geom);
    let total: f64 = polys.iter().map(PlanePolygon::area_km2).sum();
    if total <= 0.0 {
        return None;
    }
    let mut out = Vec::new();
    for p in &polys {
        let Some(((i0, i1), (j0, j1))) = spec.overlapping(&p.bbox) else {
            continue;
        };
        // Whole polygon inside one cell: skip clipping.
        if i0 == i1 && j0 == j1 && spec.cell_rect(i0, j0).contains_rect(&p.bbox) {
            out.push((spec.index(i0, j0), p.area_km2() / total));
            continue;
        }
        for j in j0..=j1 {
            let strip = p.clip(&PlaneBox::lat_strip(spec.lat_edge(j), spec.lat_edge(j + 1)));
            if strip.is_empty() {
                continue;
            }
            for i in i0..=i1 {
                let a = strip.clip(&PlaneBox::from_rect(&spec.cell_rect(i, j))).area_km2();
                if a > 0.0 {
                    out.push((spec.index(i, j), a / total));
                }
            }
        }
    }
    Some(out)
}

/// One user's located records.
#[derive(Debug, Clone)]
pub struct UserGroup<'a> {
    pub user_id: &'a str,
    pub records: Vec<&'a LocatedRecord>,
}

/// Groups records by user, in order of each user's first record.
pub fn group_users(records: &[LocatedRecord]) -> Vec<UserGroup<'_>> {
    let mut slot: HashMap<&str, usize> = HashMap::new();
    let mut groups: Vec<UserGroup<'_>> = Vec::new();
    for r in records {
        let k = *slot.entry(r.user_id.as_str()).or_insert_with(|| {
            groups.push(UserGroup {
                user_id: r.user_id.as_str(),
                records: Vec::new(),
            });
            groups.len() - 1
        });
        groups[k].records.push(r);
    }
    groups
}

/// Builds a grid and fills every accumulator from located records and
/// census units, then computes densities.
pub fn grid_from_sources(
    spec: GridSpec,
    land: &MultiPolygon,
    records: &[LocatedRecord],
    units: &[PopulationUnit],
) -> DensityGrid {
    let mut grid = DensityGrid::build(spec, land);
    grid.accumulate_tweets(records);
    grid.accumulate_users(&group_users(records));
    grid.apportion_population(units);
    grid.compute_densities();
    grid
}
