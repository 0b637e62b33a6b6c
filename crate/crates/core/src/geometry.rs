//! Equal-area projection, areas and rectangle clipping.
//!
//! Everything that is called an "area" elsewhere in the crate comes from
//! here. Areas are measured on a sphere of authalic radius through a
//! cylindrical equal-area projection,
//!
//! ```text
//! x = R · λ · cos φ₀
//! y = R · sin φ / cos φ₀
//! ```
//!
//! so an axis-aligned lon/lat rectangle maps to an axis-aligned plane
//! rectangle whose area `R² · Δλ · Δ(sin φ)` does not depend on the
//! standard parallel φ₀. Clipping is carried out in the `(lon, sin lat)`
//! plane, which is the projected plane up to a per-axis scale. Edges are
//! therefore straight in the same space the shoelace formula sums over,
//! and clipped pieces of a polygon add back up to the polygon's area.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radius of the sphere with the same surface area as the WGS84 ellipsoid.
pub const AUTHALIC_RADIUS_KM: f64 = 6371.0072;

/// Midpoint latitude of the default study rectangle.
pub const DEFAULT_STANDARD_PARALLEL: f64 = 51.05;

/// Clipped rings smaller than this are dropped.
const SLIVER_KM2: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lon: f64,
    pub lat: f64,
}

impl GeoPoint {
    pub fn new(lon: f64, lat: f64) -> Result<Self> {
        if !(-180.0..=180.0).contains(&lon) || !(-90.0..=90.0).contains(&lat) {
            return Err(Error::Data(format!(
                "coordinate ({lon}, {lat}) outside valid lon/lat range"
            )));
        }
        Ok(GeoPoint { lon, lat })
    }
}

/// Axis-aligned rectangle in degrees. Zero-extent rectangles are legal and
/// stand for a single point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LonLatRect {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl LonLatRect {
    pub fn new(min_lon: f64, min_lat: f64, max_lon: f64, max_lat: f64) -> Result<Self> {
        GeoPoint::new(min_lon, min_lat)?;
        GeoPoint::new(max_lon, max_lat)?;
        if min_lon > max_lon || min_lat > max_lat {
            return Err(Error::Data(format!(
                "rectangle bounds out of order: ({min_lon}, {min_lat}) .. ({max_lon}, {max_lat})"
            )));
        }
        Ok(LonLatRect {
            min_lon,
            min_lat,
            max_lon,
            max_lat,
        })
    }

    pub fn from_point(p: GeoPoint) -> Self {
        LonLatRect {
            min_lon: p.lon,
            min_lat: p.lat,
            max_lon: p.lon,
            max_lat: p.lat,
        }
    }

    /// Smallest rectangle containing every point, or `None` for no points.
    pub fn envelope<I: IntoIterator<Item = GeoPoint>>(points: I) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut r = LonLatRect::from_point(first);
        for p in it {
            r.min_lon = r.min_lon.min(p.lon);
            r.min_lat = r.min_lat.min(p.lat);
            r.max_lon = r.max_lon.max(p.lon);
            r.max_lat = r.max_lat.max(p.lat);
        }
        Some(r)
    }

    pub fn width(&self) -> f64 {
        self.max_lon - self.min_lon
    }

    pub fn height(&self) -> f64 {
        self.max_lat - self.min_lat
    }

    /// True when either side has zero length.
    pub fn has_zero_area(&self) -> bool {
        self.width() == 0.0 || self.height() == 0.0
    }

    pub fn center(&self) -> GeoPoint {
        GeoPoint {
            lon: 0.5 * (self.min_lon + self.max_lon),
            lat: 0.5 * (self.min_lat + self.max_lat),
        }
    }

    /// Closed containment.
    pub fn contains_point(&self, p: GeoPoint) -> bool {
        p.lon >= self.min_lon && p.lon <= self.max_lon && p.lat >= self.min_lat && p.lat <= self.max_lat
    }

    pub fn contains_rect(&self, other: &LonLatRect) -> bool {
        other.min_lon >= self.min_lon
            && other.max_lon <= self.max_lon
            && other.min_lat >= self.min_lat
            && other.max_lat <= self.max_lat
    }

    /// Overlap of two rectangles; `None` when they are disjoint. Rectangles
    /// that only touch along an edge give a zero-extent result.
    pub fn intersection(&self, other: &LonLatRect) -> Option<LonLatRect> {
        let r = LonLatRect {
            min_lon: self.min_lon.max(other.min_lon),
            min_lat: self.min_lat.max(other.min_lat),
            max_lon: self.max_lon.min(other.max_lon),
            max_lat: self.max_lat.min(other.max_lat),
        };
        (r.min_lon <= r.max_lon && r.min_lat <= r.max_lat).then_some(r)
    }

    pub fn area_km2(&self) -> f64 {
        spherical_rect_area(self)
    }

    pub fn to_ring(&self) -> Result<Ring> {
        Ring::new(vec![
            GeoPoint {
                lon: self.min_lon,
                lat: self.min_lat,
            },
            GeoPoint {
                lon: self.max_lon,
                lat: self.min_lat,
            },
            GeoPoint {
                lon: self.max_lon,
                lat: self.max_lat,
            },
            GeoPoint {
                lon: self.min_lon,
                lat: self.max_lat,
            },
        ])
    }

    pub fn to_multipolygon(&self) -> Result<MultiPolygon> {
        Ok(MultiPolygon {
            polygons: vec![PolygonWithHoles {
                outer: self.to_ring()?,
                holes: Vec::new(),
            }],
        })
    }
}

/// A point on the equal-area plane, in kilometres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedPoint {
    pub x: f64,
    pub y: f64,
}

pub fn project(p: GeoPoint, standard_parallel: f64) -> ProjectedPoint {
    let k = standard_parallel.to_radians().cos();
    ProjectedPoint {
        x: AUTHALIC_RADIUS_KM * p.lon.to_radians() * k,
        y: AUTHALIC_RADIUS_KM * p.lat.to_radians().sin() / k,
    }
}

pub fn unproject(p: ProjectedPoint, standard_parallel: f64) -> GeoPoint {
    let k = standard_parallel.to_radians().cos();
    GeoPoint {
        lon: (p.x / (AUTHALIC_RADIUS_KM * k)).to_degrees(),
        lat: (p.y * k / AUTHALIC_RADIUS_KM).clamp(-1.0, 1.0).asin().to_degrees(),
    }
}

/// Closed-form area of a lon/lat rectangle on the authalic sphere.
pub fn spherical_rect_area(r: &LonLatRect) -> f64 {
    let d_lambda = r.width().to_radians();
    let d_sin = r.max_lat.to_radians().sin() - r.min_lat.to_radians().sin();
    AUTHALIC_RADIUS_KM * AUTHALIC_RADIUS_KM * d_lambda * d_sin
}

/// A simple closed ring. The closing vertex is implicit: a trailing copy of
/// the first vertex is removed on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring {
    vertices: Vec<GeoPoint>,
}

impl Ring {
    pub fn new(mut vertices: Vec<GeoPoint>) -> Result<Self> {
        while vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        vertices.dedup();
        let mut distinct: Vec<(u64, u64)> = vertices.iter().map(|p| (p.lon.to_bits(), p.lat.to_bits())).collect();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() < 3 {
            return Err(Error::DegenerateGeometry(format!(
                "ring has {} distinct vertices, need at least 3",
                distinct.len()
            )));
        }
        Ok(Ring { vertices })
    }

    pub fn vertices(&self) -> &[GeoPoint] {
        &self.vertices
    }

    pub fn bbox(&self) -> LonLatRect {
        LonLatRect::envelope(self.vertices.iter().copied()).expect("ring is non-empty")
    }

    fn to_plane(&self) -> Vec<[f64; 2]> {
        self.vertices.iter().map(|p| to_plane(*p)).collect()
    }

    fn from_plane(points: &[[f64; 2]]) -> Option<Ring> {
        Ring::new(points.iter().map(|&q| from_plane(q)).collect()).ok()
    }
}

/// Absolute shoelace area of the projected ring.
pub fn ring_area(r: &Ring, standard_parallel: f64) -> f64 {
    let pts: Vec<ProjectedPoint> = r.vertices.iter().map(|&p| project(p, standard_parallel)).collect();
    let n = pts.len();
    let mut twice = 0.0;
    for k in 0..n {
        let a = pts[k];
        let b = pts[(k + 1) % n];
        twice += a.x * b.y - b.x * a.y;
    }
    0.5 * twice.abs()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolygonWithHoles {
    pub outer: Ring,
    pub holes: Vec<Ring>,
}

impl PolygonWithHoles {
    pub fn new(outer: Ring, holes: Vec<Ring>) -> Self {
        PolygonWithHoles { outer, holes }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MultiPolygon {
    pub polygons: Vec<PolygonWithHoles>,
}

impl MultiPolygon {
    pub fn new(polygons: Vec<PolygonWithHoles>) -> Self {
        MultiPolygon { polygons }
    }

    pub fn is_empty(&self) -> bool {
        self.polygons.is_empty()
    }

    pub fn bbox(&self) -> Option<LonLatRect> {
        LonLatRect::envelope(self.polygons.iter().flat_map(|p| p.outer.vertices.iter().copied()))
    }

    pub fn area(&self, standard_parallel: f64) -> Result<f64> {
        let mut total = 0.0;
        for p in &self.polygons {
            total += polygon_area(p, standard_parallel)?;
        }
        Ok(total)
    }
}

/// Outer area minus hole areas.
pub fn polygon_area(p: &PolygonWithHoles, standard_parallel: f64) -> Result<f64> {
    let outer = ring_area(&p.outer, standard_parallel);
    let holes: f64 = p.holes.iter().map(|h| ring_area(h, standard_parallel)).sum();
    settle_area(outer, holes)
}

pub fn multipolygon_area(m: &MultiPolygon, standard_parallel: f64) -> Result<f64> {
    m.area(standard_parallel)
}

fn settle_area(outer: f64, holes: f64) -> Result<f64> {
    let a = outer - holes;
    // Rounding noise when a hole coincides with its outer ring.
    let slack = 1e-9 * outer.max(1.0);
    if a < -slack {
        return Err(Error::InvariantViolation(format!(
            "holes ({holes} km²) exceed outer ring ({outer} km²)"
        )));
    }
    Ok(a.max(0.0))
}

/// Sutherland–Hodgman clip of a ring against a rectangle. `None` when
/// nothing of positive size remains.
pub fn clip_ring_to_rect(r: &Ring, rect: &LonLatRect) -> Option<Ring> {
    let clipped = clip_plane(&r.to_plane(), &PlaneBox::from_rect(rect));
    if clipped.len() < 3 {
        return None;
    }
    Ring::from_plane(&clipped)
}

/// Clips outers and holes independently; rings that vanish or fall below
/// the sliver threshold are dropped.
pub fn clip_multipolygon_to_rect(m: &MultiPolygon, rect: &LonLatRect) -> MultiPolygon {
    let bx = PlaneBox::from_rect(rect);
    let mut polygons = Vec::new();
    for p in &m.polygons {
        let outer = clip_plane(&p.outer.to_plane(), &bx);
        if plane_area_km2(&outer) < SLIVER_KM2 {
            continue;
        }
        let Some(outer) = Ring::from_plane(&outer) else {
            continue;
        };
        let holes = p
            .holes
            .iter()
            .filter_map(|h| {
                let c = clip_plane(&h.to_plane(), &bx);
                if plane_area_km2(&c) < SLIVER_KM2 {
                    None
                } else {
                    Ring::from_plane(&c)
                }
            })
            .collect();
        polygons.push(PolygonWithHoles { outer, holes });
    }
    MultiPolygon { polygons }
}

/// Area of the part of `m` inside `rect`.
pub fn intersection_area(m: &MultiPolygon, rect: &LonLatRect, standard_parallel: f64) -> Result<f64> {
    multipolygon_area(&clip_multipolygon_to_rect(m, rect), standard_parallel)
}

// ---------------------------------------------------------------------------
// Working representation on the (lon, sin lat) plane.
// ---------------------------------------------------------------------------

fn to_plane(p: GeoPoint) -> [f64; 2] {
    [p.lon, p.lat.to_radians().sin()]
}

fn from_plane(q: [f64; 2]) -> GeoPoint {
    GeoPoint {
        lon: q[0],
        lat: q[1].clamp(-1.0, 1.0).asin().to_degrees(),
    }
}

/// Shoelace on the `(lon°, sin lat)` plane, scaled to km².
pub(crate) fn plane_area_km2(ring: &[[f64; 2]]) -> f64 {
    let n = ring.len();
    if n < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for k in 0..n {
        let a = ring[k];
        let b = ring[(k + 1) % n];
        twice += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * twice.abs() * AUTHALIC_RADIUS_KM * AUTHALIC_RADIUS_KM * std::f64::consts::PI / 180.0
}

/// Clip box on the `(lon, sin lat)` plane. Infinite bounds are allowed, which
/// turns the box into a strip.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PlaneBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl PlaneBox {
    pub fn from_rect(r: &LonLatRect) -> Self {
        PlaneBox {
            x_min: r.min_lon,
            x_max: r.max_lon,
            y_min: r.min_lat.to_radians().sin(),
            y_max: r.max_lat.to_radians().sin(),
        }
    }

    pub fn lat_strip(min_lat: f64, max_lat: f64) -> Self {
        PlaneBox {
            x_min: f64::NEG_INFINITY,
            x_max: f64::INFINITY,
            y_min: min_lat.to_radians().sin(),
            y_max: max_lat.to_radians().sin(),
        }
    }
}

#[derive(Clone, Copy)]
enum Edge {
    Left(f64),
    Right(f64),
    Bottom(f64),
    Top(f64),
}

impl Edge {
    fn inside(self, p: [f64; 2]) -> bool {
        match self {
            Edge::Left(v) => p[0] >= v,
            Edge::Right(v) => p[0] <= v,
            Edge::Bottom(v) => p[1] >= v,
            Edge::Top(v) => p[1] <= v,
        }
    }

    fn cross(self, a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
        match self {
            Edge::Left(v) | Edge::Right(v) => {
                let t = (v - a[0]) / (b[0] - a[0]);
                [v, a[1] + t * (b[1] - a[1])]
            }
            Edge::Bottom(v) | Edge::Top(v) => {
                let t = (v - a[1]) / (b[1] - a[1]);
                [a[0] + t * (b[0] - a[0]), v]
            }
        }
    }
}

/// Sutherland–Hodgman against the finite sides of `bx`.
pub(crate) fn clip_plane(ring: &[[f64; 2]], bx: &PlaneBox) -> Vec<[f64; 2]> {
    let edges = [
        Edge::Left(bx.x_min),
        Edge::Right(bx.x_max),
        Edge::Bottom(bx.y_min),
        Edge::Top(bx.y_max),
    ];
    let mut current = ring.to_vec();
    for edge in edges {
        let bound = match edge {
            Edge::Left(v) | Edge::Right(v) | Edge::Bottom(v) | Edge::Top(v) => v,
        };
        if !bound.is_finite() {
            continue;
        }
        if current.is_empty() {
            break;
        }
        if current.iter().all(|&p| edge.inside(p)) {
            continue;
        }
        let mut out = Vec::with_capacity(current.len() + 4);
        let mut prev = *current.last().expect("non-empty");
        let mut prev_in = edge.inside(prev);
        for &p in &current {
            let p_in = edge.inside(p);
            if p_in != prev_in {
                out.push(edge.cross(prev, p));
            }
            if p_in {
                out.push(p);
            }
            prev = p;
            prev_in = p_in;
        }
        current = out;
    }
    current
}

/// A multipolygon converted once to the clipping plane, for repeated
/// clipping against many rectangles.
#[derive(Debug, Clone)]
pub(crate) struct PlanePolygon {
    pub outer: Vec<[f64; 2]>,
    pub holes: Vec<Vec<[f64; 2]>>,
    pub bbox: LonLatRect,
}

impl PlanePolygon {
    pub fn from_multipolygon(m: &MultiPolygon) -> Vec<PlanePolygon> {
        m.polygons
            .iter()
            .map(|p| PlanePolygon {
                outer: p.outer.to_plane(),
                holes: p.holes.iter().map(Ring::to_plane).collect(),
                bbox: p.outer.bbox(),
            })
            .collect()
    }

    pub fn clip(&self, bx: &PlaneBox) -> PlanePolygon {
        PlanePolygon {
            outer: clip_plane(&self.outer, bx),
            holes: self
                .holes
                .iter()
                .map(|h| clip_plane(h, bx))
                .filter(|h| h.len() >= 3)
                .collect(),
            bbox: self.bbox,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.outer.len() < 3
    }

    /// Outer minus holes with slivers dropped and tiny negatives clamped.
    pub fn area_km2(&self) -> f64 {
        let outer = plane_area_km2(&self.outer);
        if outer < SLIVER_KM2 {
            return 0.0;
        }
        let holes: f64 = self
            .holes
            .iter()
            .map(|h| plane_area_km2(h))
            .filter(|&a| a >= SLIVER_KM2)
            .sum();
        (outer - holes).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rect(a: f64, b: f64, c: f64, d: f64) -> LonLatRect {
        LonLatRect::new(a, b, c, d).unwrap()
    }

    fn square(lon: f64, lat: f64, side: f64) -> Ring {
        rect(lon, lat, lon + side, lat + side).to_ring().unwrap()
    }

    #[test]
    fn origin_projects_to_origin() {
        for phi0 in [0.0, 30.0, 51.05] {
            let p = project(GeoPoint { lon: 0.0, lat: 0.0 }, phi0);
            assert_eq!(p.x, 0.0);
            assert_eq!(p.y, 0.0);
        }
    }

    #[test]
    fn one_degree_east_on_equator() {
        let p = project(GeoPoint { lon: 1.0, lat: 0.0 }, 0.0);
        let expected = 6371.0072 * std::f64::consts::PI / 180.0;
        assert_relative_eq!(p.x, expected, max_relative = 1e-14);
        assert_relative_eq!(p.x, 111.1949, max_relative = 1e-4);
        assert_eq!(p.y, 0.0);
    }

    #[test]
    fn projection_round_trips() {
        let g = GeoPoint { lon: -3.4, lat: 50.7 };
        let back = unproject(project(g, 51.05), 51.05);
        assert_relative_eq!(back.lon, g.lon, epsilon = 1e-12);
        assert_relative_eq!(back.lat, g.lat, epsilon = 1e-12);
    }

    #[test]
    fn rect_area_closed_form() {
        assert_eq!(spherical_rect_area(&rect(1.0, 2.0, 1.0, 2.0)), 0.0);
        assert_eq!(spherical_rect_area(&rect(1.0, 2.0, 3.0, 2.0)), 0.0);
        let r2 = 6371.0072f64 * 6371.0072;
        let expected = r2 * 1f64.to_radians() * 1f64.to_radians().sin();
        let a = spherical_rect_area(&rect(0.0, 0.0, 1.0, 1.0));
        assert_relative_eq!(a, expected, max_relative = 1e-14);
        assert_relative_eq!(a, 12363.9, max_relative = 1e-4);
    }

    #[test]
    fn ring_area_matches_rect_area() {
        let r = rect(0.0, 0.0, 1.0, 1.0);
        let ring = r.to_ring().unwrap();
        for phi0 in [0.0, 20.0, 51.05] {
            assert_relative_eq!(ring_area(&ring, phi0), spherical_rect_area(&r), max_relative = 1e-9);
        }
    }

    #[test]
    fn degenerate_ring_rejected() {
        let pts = vec![
            GeoPoint { lon: 0.0, lat: 0.0 },
            GeoPoint { lon: 1.0, lat: 0.0 },
            GeoPoint { lon: 0.0, lat: 0.0 },
        ];
        assert!(matches!(Ring::new(pts), Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn closing_vertex_is_dropped() {
        let mut v = square(0.0, 0.0, 1.0).vertices().to_vec();
        v.push(v[0]);
        assert_eq!(Ring::new(v).unwrap().vertices().len(), 4);
    }

    #[test]
    fn polygon_equal_to_hole_has_zero_area() {
        let s = square(2.0, 3.0, 0.5);
        let p = PolygonWithHoles::new(s.clone(), vec![s]);
        assert_eq!(polygon_area(&p, 51.05).unwrap(), 0.0);
    }

    #[test]
    fn oversized_hole_is_an_invariant_violation() {
        let p = PolygonWithHoles::new(square(0.0, 0.0, 1.0), vec![square(-1.0, -1.0, 3.0)]);
        assert!(matches!(polygon_area(&p, 0.0), Err(Error::InvariantViolation(_))));
    }

    #[test]
    fn multipolygon_is_additive() {
        let one = MultiPolygon::new(vec![PolygonWithHoles::new(square(0.0, 0.0, 1.0), vec![])]);
        let two = MultiPolygon::new(vec![
            PolygonWithHoles::new(square(0.0, 0.0, 1.0), vec![]),
            PolygonWithHoles::new(square(5.0, 0.0, 1.0), vec![]),
        ]);
        assert_relative_eq!(
            two.area(0.0).unwrap(),
            2.0 * one.area(0.0).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn clip_inside_is_identity() {
        let ring = square(0.2, 0.2, 0.5);
        let out = clip_ring_to_rect(&ring, &rect(0.0, 0.0, 1.0, 1.0)).unwrap();
        let mut a: Vec<_> = out.vertices().iter().map(|p| (p.lon, (p.lat * 1e9).round())).collect();
        let mut b: Vec<_> = ring.vertices().iter().map(|p| (p.lon, (p.lat * 1e9).round())).collect();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn clip_outside_is_empty() {
        let ring = square(5.0, 5.0, 1.0);
        assert!(clip_ring_to_rect(&ring, &rect(0.0, 0.0, 1.0, 1.0)).is_none());
    }

    #[test]
    fn clip_straddling_square_halves_area() {
        let ring = square(0.0, 0.0, 1.0);
        let clip = rect(0.5, -1.0, 3.0, 3.0);
        let half = clip_ring_to_rect(&ring, &clip).unwrap();
        assert_relative_eq!(ring_area(&half, 0.0), 0.5 * ring_area(&ring, 0.0), max_relative = 1e-9);
    }

    #[test]
    fn clipped_holes_subtract() {
        let m = MultiPolygon::new(vec![PolygonWithHoles::new(
            square(0.0, 50.0, 2.0),
            vec![square(0.5, 50.5, 1.0)],
        )]);
        // Left half keeps half of the hole.
        let left = rect(0.0, 50.0, 1.0, 52.0);
        let a = intersection_area(&m, &left, 51.0).unwrap();
        let expected = spherical_rect_area(&left) - spherical_rect_area(&rect(0.5, 50.5, 1.0, 51.5));
        assert_relative_eq!(a, expected, max_relative = 1e-9);
    }

    #[test]
    fn concave_partition_conserves_area() {
        // An L-shaped polygon with a slanted edge, cut by a 3×3 grid.
        let ring = Ring::new(vec![
            GeoPoint { lon: 0.0, lat: 50.0 },
            GeoPoint { lon: 3.0, lat: 50.0 },
            GeoPoint { lon: 3.0, lat: 51.0 },
            GeoPoint { lon: 1.2, lat: 51.3 },
            GeoPoint { lon: 1.0, lat: 53.0 },
            GeoPoint { lon: 0.0, lat: 53.0 },
        ])
        .unwrap();
        let m = MultiPolygon::new(vec![PolygonWithHoles::new(ring, vec![])]);
        let total = m.area(51.0).unwrap();
        let mut sum = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let cell = rect(i as f64, 50.0 + j as f64, i as f64 + 1.0, 51.0 + j as f64);
                sum += intersection_area(&m, &cell, 51.0).unwrap();
            }
        }
        assert_relative_eq!(sum, total, max_relative = 1e-9);
    }

    #[test]
    fn rect_intersection_cases() {
        let a = rect(0.0, 0.0, 2.0, 2.0);
        assert_eq!(
            a.intersection(&rect(1.0, 1.0, 3.0, 3.0)),
            Some(rect(1.0, 1.0, 2.0, 2.0))
        );
        assert_eq!(a.intersection(&rect(5.0, 5.0, 6.0, 6.0)), None);
        assert!(a.intersection(&rect(2.0, 0.0, 3.0, 1.0)).unwrap().has_zero_area());
    }
}
