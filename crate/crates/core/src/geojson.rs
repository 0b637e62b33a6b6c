//! Minimal GeoJSON reading and writing for polygonal geometry.
//!
//! Only `Polygon` and `MultiPolygon` geometries are understood. Ring
//! orientation is ignored; the first ring of a polygon is its outer
//! boundary and any further rings are holes.

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geometry::{GeoPoint, LonLatRect, MultiPolygon, PolygonWithHoles, Ring};

fn position(v: &Value) -> Result<GeoPoint> {
    let arr = v
        .as_array()
        .filter(|a| a.len() >= 2)
        .ok_or_else(|| Error::Data("position must be an array of at least two numbers".into()))?;
    let lon = arr[0]
        .as_f64()
        .ok_or_else(|| Error::Data("non-numeric longitude".into()))?;
    let lat = arr[1]
        .as_f64()
        .ok_or_else(|| Error::Data("non-numeric latitude".into()))?;
    GeoPoint::new(lon, lat)
}

fn ring(v: &Value) -> Result<Ring> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Data("linear ring must be an array of positions".into()))?;
    Ring::new(arr.iter().map(position).collect::<Result<Vec<_>>>()?)
}

fn polygon(v: &Value) -> Result<PolygonWithHoles> {
    let rings = v
        .as_array()
        .filter(|a| !a.is_empty())
        .ok_or_else(|| Error::Data("polygon must have at least one ring".into()))?;
    let outer = ring(&rings[0])?;
    let holes = rings[1..].iter().map(ring).collect::<Result<Vec<_>>>()?;
    Ok(PolygonWithHoles::new(outer, holes))
}

/// Converts a GeoJSON geometry object into a [`MultiPolygon`].
pub fn geometry_to_multipolygon(geometry: &Value) -> Result<MultiPolygon> {
    let kind = geometry
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Data("geometry without a type".into()))?;
    let coords = geometry
        .get("coordinates")
        .ok_or_else(|| Error::Data("geometry without coordinates".into()))?;
    match kind {
        "Polygon" => Ok(MultiPolygon::new(vec![polygon(coords)?])),
        "MultiPolygon" => {
            let polys = coords
                .as_array()
                .ok_or_else(|| Error::Data("MultiPolygon coordinates must be an array".into()))?;
            Ok(MultiPolygon::new(
                polys.iter().map(polygon).collect::<Result<Vec<_>>>()?,
            ))
        }
        other => Err(Error::Data(format!("unsupported geometry type {other}"))),
    }
}

/// Collects every polygon in a FeatureCollection, Feature or bare geometry.
pub fn any_to_multipolygon(doc: &Value) -> Result<MultiPolygon> {
    match doc.get("type").and_then(Value::as_str) {
        Some("FeatureCollection") => {
            let features = doc
                .get("features")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Data("FeatureCollection without features".into()))?;
            let mut out = MultiPolygon::default();
            for f in features {
                out.polygons.extend(any_to_multipolygon(f)?.polygons);
            }
            Ok(out)
        }
        Some("Feature") => match doc.get("geometry") {
            Some(g) if !g.is_null() => geometry_to_multipolygon(g),
            _ => Ok(MultiPolygon::default()),
        },
        _ => geometry_to_multipolygon(doc),
    }
}

fn ring_coords(r: &Ring) -> Value {
    let mut pts: Vec<Value> = r.vertices().iter().map(|p| json!([p.lon, p.lat])).collect();
    pts.push(pts[0].clone());
    Value::Array(pts)
}

pub fn multipolygon_to_geometry(m: &MultiPolygon) -> Value {
    let polys: Vec<Value> = m
        .polygons
        .iter()
        .map(|p| {
            let mut rings = vec![ring_coords(&p.outer)];
            rings.extend(p.holes.iter().map(ring_coords));
            Value::Array(rings)
        })
        .collect();
    json!({ "type": "MultiPolygon", "coordinates": polys })
}

pub fn rect_to_geometry(r: &LonLatRect) -> Value {
    json!({
        "type": "Polygon",
        "coordinates": [[
            [r.min_lon, r.min_lat],
            [r.max_lon, r.min_lat],
            [r.max_lon, r.max_lat],
            [r.min_lon, r.max_lat],
            [r.min_lon, r.min_lat],
        ]]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polygon_with_hole() {
        let g = json!({
            "type": "Polygon",
            "coordinates": [
                [[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0], [0.0, 0.0]],
                [[0.5, 0.5], [1.0, 0.5], [1.0, 1.0], [0.5, 0.5]]
            ]
        });
        let m = geometry_to_multipolygon(&g).unwrap();
        assert_eq!(m.polygons.len(), 1);
        assert_eq!(m.polygons[0].holes.len(), 1);
        assert_eq!(m.polygons[0].outer.vertices().len(), 4);
    }

    #[test]
    fn rejects_points() {
        let g = json!({"type": "Point", "coordinates": [0.0, 0.0]});
        assert!(geometry_to_multipolygon(&g).is_err());
    }

    #[test]
    fn geometry_round_trip() {
        let r = LonLatRect::new(-3.0, 50.0, -2.0, 51.0).unwrap();
        let m = r.to_multipolygon().unwrap();
        let back = geometry_to_multipolygon(&multipolygon_to_geometry(&m)).unwrap();
        assert_eq!(back, m);
        let back = geometry_to_multipolygon(&rect_to_geometry(&r)).unwrap();
        assert_eq!(back, m);
    }
}
