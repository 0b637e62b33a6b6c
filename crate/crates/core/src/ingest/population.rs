use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geojson::{any_to_multipolygon, geometry_to_multipolygon};
use crate::geometry::MultiPolygon;

/// A census polygon with its resident count.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationUnit {
    pub unit_id: String,
    pub geometry: MultiPolygon,
    pub population: f64,
    /// Residents aged 18 to 35, when the input carries it.
    pub population_18_35: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopulationDiagnostic {
    pub feature_index: usize,
    pub unit_id: Option<String>,
    pub message: String,
}

fn non_negative(v: Option<&Value>, what: &str) -> std::result::Result<Option<f64>, String> {
    match v {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Number(n)) => match n.as_f64() {
            Some(x) if x >= 0.0 && x.is_finite() => Ok(Some(x)),
            _ => Err(format!("{what} must be a non-negative number")),
        },
        Some(_) => Err(format!("{what} is not numeric")),
    }
}

fn parse_feature(f: &Value, index: usize) -> std::result::Result<PopulationUnit, PopulationDiagnostic> {
    let props = f.get("properties").unwrap_or(&Value::Null);
    let unit_id = match props.get("code") {
        Some(Value::String(s)) => Some(s.clone()),
        Some(Value::Number(n)) => Some(n.to_string()),
        _ => None,
    };
    let fail = |message: String| PopulationDiagnostic {
        feature_index: index,
        unit_id: unit_id.clone(),
        message,
    };
    let population = non_negative(props.get("population"), "population")
        .map_err(&fail)?
        .ok_or_else(|| fail("missing population".into()))?;
    let youth = non_negative(props.get("population_18_35"), "population_18_35").map_err(&fail)?;
    if youth.is_some_and(|y| y > population) {
        return Err(fail("population_18_35 exceeds population".into()));
    }
    let geometry = match f.get("geometry") {
        Some(g) if !g.is_null() => geometry_to_multipolygon(g).map_err(|e| fail(e.to_string()))?,
        _ => return Err(fail("feature without geometry".into())),
    };
    Ok(PopulationUnit {
        unit_id: unit_id.clone().unwrap_or_else(|| format!("feature-{index}")),
        geometry,
        population,
        population_18_35: youth,
    })
}

/// Reads census units from a GeoJSON FeatureCollection. Each feature needs
/// a numeric `population` property and may carry `population_18_35` and a
/// `code`. Bad features are skipped and reported.
pub fn parse_population(doc: &Value) -> Result<(Vec<PopulationUnit>, Vec<PopulationDiagnostic>)> {
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(Error::Data(
            "population input must be a GeoJSON FeatureCollection".into(),
        ));
    }
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Data("FeatureCollection without features".into()))?;
    let mut units = Vec::with_capacity(features.len());
    let mut diags = Vec::new();
    for (i, f) in features.iter().enumerate() {
        match parse_feature(f, i) {
            Ok(u) => units.push(u),
            Err(d) => diags.push(d),
        }
    }
    Ok((units, diags))
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

pub fn read_population(path: &Path) -> Result<(Vec<PopulationUnit>, Vec<PopulationDiagnostic>)> {
    parse_population(&read_json(path)?)
}

/// Land geometry: every polygon in a FeatureCollection, Feature or bare
/// geometry.
pub fn read_land(path: &Path) -> Result<MultiPolygon> {
    any_to_multipolygon(&read_json(path)?)
}
