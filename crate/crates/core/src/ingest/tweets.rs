//! Newline-delimited tweet JSON.
//!
//! The field layout follows the public v1.1 tweet object. Only the fields
//! needed for locating a record and for the source/reply statistics are
//! read; everything else is ignored.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geometry::{GeoPoint, LonLatRect};

/// Granularity class of a place tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaceType {
    Poi,
    Neighborhood,
    City,
    Admin,
    Country,
    Other,
}

impl PlaceType {
    pub fn parse(s: &str) -> Self {
        match s {
            "poi" => PlaceType::Poi,
            "neighborhood" => PlaceType::Neighborhood,
            "city" => PlaceType::City,
            "admin" => PlaceType::Admin,
            "country" => PlaceType::Country,
            _ => PlaceType::Other,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PlaceType::Poi => "poi",
            PlaceType::Neighborhood => "neighborhood",
            PlaceType::City => "city",
            PlaceType::Admin => "admin",
            PlaceType::Country => "country",
            PlaceType::Other => "other",
        }
    }

    /// `admin` and `country` places are too coarse to place a tweet.
    pub fn is_precise(self) -> bool {
        !matches!(self, PlaceType::Admin | PlaceType::Country)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TweetRecord {
    pub tweet_id: String,
    pub user_id: String,
    pub geo: Option<GeoPoint>,
    pub place_type: Option<PlaceType>,
    pub place_box: Option<LonLatRect>,
    pub source: String,
    pub in_reply_to_status_id: Option<String>,
    pub in_reply_to_user_id: Option<String>,
    pub quoted_status_id: Option<String>,
}

impl TweetRecord {
    pub fn is_reply(&self) -> bool {
        non_empty(&self.in_reply_to_status_id) || non_empty(&self.in_reply_to_user_id)
    }

    pub fn is_quote(&self) -> bool {
        non_empty(&self.quoted_status_id)
    }

    /// Serializes the record back into the tweet JSON layout read by
    /// [`parse_tweet_line`].
    pub fn to_json(&self) -> Value {
        let mut obj = serde_json::Map::new();
        obj.insert("id_str".into(), Value::String(self.tweet_id.clone()));
        obj.insert("user".into(), serde_json::json!({ "id_str": self.user_id }));
        if let Some(p) = self.geo {
            obj.insert(
                "coordinates".into(),
                serde_json::json!({ "type": "Point", "coordinates": [p.lon, p.lat] }),
            );
        }
        if self.place_type.is_some() || self.place_box.is_some() {
            let mut place = serde_json::Map::new();
            if let Some(t) = self.place_type {
                place.insert("place_type".into(), Value::String(t.as_str().into()));
            }
            if let Some(b) = self.place_box {
                place.insert(
                    "bounding_box".into(),
                    serde_json::json!({
                        "type": "Polygon",
                        "coordinates": [[
                            [b.min_lon, b.min_lat],
                            [b.min_lon, b.max_lat],
                            [b.max_lon, b.max_lat],
                            [b.max_lon, b.min_lat]
                        ]]
                    }),
                );
            }
            obj.insert("place".into(), Value::Object(place));
        }
        obj.insert("source".into(), Value::String(self.source.clone()));
        for (key, val) in [
            ("in_reply_to_status_id_str", &self.in_reply_to_status_id),
            ("in_reply_to_user_id_str", &self.in_reply_to_user_id),
            ("quoted_status_id_str", &self.quoted_status_id),
        ] {
            if let Some(v) = val {
                obj.insert(key.into(), Value::String(v.clone()));
            }
        }
        Value::Object(obj)
    }
}

fn non_empty(s: &Option<String>) -> bool {
    s.as_deref().is_some_and(|v| !v.is_empty())
}

#[derive(Deserialize)]
struct RawTweet {
    id_str: Option<String>,
    id: Option<Value>,
    user: Option<RawUser>,
    coordinates: Option<RawCoordinates>,
    place: Option<RawPlace>,
    source: Option<String>,
    in_reply_to_status_id_str: Option<String>,
    in_reply_to_user_id_str: Option<String>,
    quoted_status_id_str: Option<String>,
    quoted_status: Option<RawQuoted>,
}

#[derive(Deserialize)]
struct RawUser {
    id_str: Option<String>,
    id: Option<Value>,
}

#[derive(Deserialize)]
struct RawCoordinates {
    coordinates: Option<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawPlace {
    place_type: Option<String>,
    bounding_box: Option<RawBox>,
}

#[derive(Deserialize)]
struct RawBox {
    coordinates: Option<Value>,
}

#[derive(Deserialize)]
struct RawQuoted {
    id_str: Option<String>,
}

fn id_string(s: Option<String>, n: Option<Value>) -> Option<String> {
    s.filter(|s| !s.is_empty()).or_else(|| match n {
        Some(Value::Number(n)) => Some(n.to_string()),
        Some(Value::String(s)) if !s.is_empty() => Some(s),
        _ => None,
    })
}

fn collect_positions(v: &Value, out: &mut Vec<GeoPoint>) -> Result<()> {
    match v {
        Value::Array(items) if items.first().is_some_and(Value::is_number) => {
            let lon = items[0].as_f64().unwrap_or(f64::NAN);
            let lat = items
                .get(1)
                .and_then(Value::as_f64)
                .ok_or_else(|| Error::Data("bounding box position without latitude".into()))?;
            out.push(GeoPoint::new(lon, lat)?);
            Ok(())
        }
        Value::Array(items) => items.iter().try_for_each(|i| collect_positions(i, out)),
        _ => Err(Error::Data("bounding box coordinates must be nested arrays".into())),
    }
}

/// Strips an HTML anchor such as `<a href="...">Instagram</a>` down to its
/// text. Plain strings pass through unchanged.
pub fn source_label(raw: &str) -> String {
    let s = raw.trim();
    if s.starts_with("<a") {
        if let (Some(open), Some(close)) = (s.find('>'), s.rfind("</a>")) {
            if open < close {
                return s[open + 1..close].trim().to_string();
            }
        }
    }
    s.to_string()
}

/// Parses one line of tweet JSON.
pub fn parse_tweet_line(line: &str) -> Result<TweetRecord> {
    let raw: RawTweet = serde_json::from_str(line)?;
    let tweet_id = id_string(raw.id_str, raw.id).ok_or_else(|| Error::Data("missing id_str".into()))?;
    let user = raw.user.ok_or_else(|| Error::Data("missing user".into()))?;
    let user_id = id_string(user.id_str, user.id).ok_or_else(|| Error::Data("missing user.id_str".into()))?;

    let geo = match raw.coordinates.and_then(|c| c.coordinates) {
        Some(c) if c.len() >= 2 => Some(GeoPoint::new(c[0], c[1])?),
        Some(_) => return Err(Error::Data("coordinates must be [lon, lat]".into())),
        None => None,
    };

    let (place_type, place_box) = match raw.place {
        Some(place) => {
            let kind = place.place_type.as_deref().map(PlaceType::parse);
            let bbox = match place.bounding_box.and_then(|b| b.coordinates) {
                Some(coords) => {
                    let mut pts = Vec::new();
                    collect_positions(&coords, &mut pts)?;
                    LonLatRect::envelope(pts)
                }
                None => None,
            };
            (kind, bbox)
        }
        None => (None, None),
    };

    let quoted_status_id = raw
        .quoted_status_id_str
        .filter(|s| !s.is_empty())
        .or_else(|| raw.quoted_status.and_then(|q| q.id_str));

    Ok(TweetRecord {
        tweet_id,
        user_id,
        geo,
        place_type,
        place_box,
        source: raw.source.as_deref().map(source_label).unwrap_or_default(),
        in_reply_to_status_id: raw.in_reply_to_status_id_str,
        in_reply_to_user_id: raw.in_reply_to_user_id_str,
        quoted_status_id,
    })
}

/// Records that could not be parsed. Bad lines never abort a read.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ParseDiagnostics {
    pub skipped: usize,
    /// The first few problems, as `(line number, message)`.
    pub examples: Vec<(usize, String)>,
}

const MAX_DIAGNOSTIC_EXAMPLES: usize = 20;
const CHUNK_LINES: usize = 1 << 16;

impl ParseDiagnostics {
    fn record(&mut self, line_no: usize, err: &Error) {
        self.skipped += 1;
        if self.examples.len() < MAX_DIAGNOSTIC_EXAMPLES {
            self.examples.push((line_no, err.to_string()));
        }
    }
}

/// Parses newline-delimited tweet JSON. Blank lines are ignored; malformed
/// lines are skipped and reported in the diagnostics. Chunks of lines are
/// parsed in parallel and reassembled in input order.
pub fn parse_tweets<R: BufRead>(reader: R) -> Result<(Vec<TweetRecord>, ParseDiagnostics)> {
    let mut records = Vec::new();
    let mut diag = ParseDiagnostics::default();
    let mut chunk: Vec<(usize, String)> = Vec::with_capacity(CHUNK_LINES);

    let flush = |chunk: &mut Vec<(usize, String)>, records: &mut Vec<TweetRecord>, diag: &mut ParseDiagnostics| {
        let parsed: Vec<(usize, Result<TweetRecord>)> =
            chunk.par_iter().map(|(n, l)| (*n, parse_tweet_line(l))).collect();
        for (n, r) in parsed {
            match r {
                Ok(t) => records.push(t),
                Err(e) => diag.record(n, &e),
            }
        }
        chunk.clear();
    };

    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<tweet stream>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        chunk.push((idx + 1, line));
        if chunk.len() == CHUNK_LINES {
            flush(&mut chunk, &mut records, &mut diag);
        }
    }
    flush(&mut chunk, &mut records, &mut diag);
    Ok((records, diag))
}

pub fn read_tweets(path: &Path) -> Result<(Vec<TweetRecord>, ParseDiagnostics)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_tweets(BufReader::with_capacity(1 << 20, file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn write_tweets<W: Write>(mut w: W, records: &[TweetRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, &r.to_json())?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
