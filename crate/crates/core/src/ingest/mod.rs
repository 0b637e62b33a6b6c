//! Reading tweets and census units, resolving tweet locations, and the
//! record filters applied before any gridding.

mod population;
mod stats;
mod tweets;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

pub use population::{parse_population, read_land, read_population, PopulationDiagnostic, PopulationUnit};
pub use stats::{reply_quote_stats, source_ranking, CorpusStats, ReplyQuoteStats, SourceShare};
pub use tweets::{
    parse_tweet_line, parse_tweets, read_tweets, source_label, write_tweets, ParseDiagnostics, PlaceType, TweetRecord,
};

use crate::geometry::{GeoPoint, LonLatRect};

/// Where a record sits: an exact point, or a place bounding box with
/// positive area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Location {
    Point(GeoPoint),
    Box(LonLatRect),
}

impl Location {
    /// A box with zero area is reduced to a point. For a zero-extent box
    /// the centre is its single coordinate.
    pub fn from_box(b: LonLatRect) -> Self {
        if b.has_zero_area() {
            Location::Point(b.center())
        } else {
            Location::Box(b)
        }
    }

    pub fn envelope(&self) -> LonLatRect {
        match *self {
            Location::Point(p) => LonLatRect::from_point(p),
            Location::Box(b) => b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagKind {
    Geo,
    Place,
}

/// Which located records an analysis keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagSelection {
    Geo,
    Place,
    Both,
}

impl TagSelection {
    pub fn accepts(self, kind: TagKind) -> bool {
        match self {
            TagSelection::Both => true,
            TagSelection::Geo => kind == TagKind::Geo,
            TagSelection::Place => kind == TagKind::Place,
        }
    }
}

impl std::str::FromStr for TagSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "geo" => Ok(TagSelection::Geo),
            "place" => Ok(TagSelection::Place),
            "both" => Ok(TagSelection::Both),
            other => Err(format!("unknown tag kind {other:?} (expected geo, place or both)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocatedRecord {
    pub tweet_id: String,
    pub user_id: String,
    pub location: Location,
    pub tag_kind: TagKind,
    pub source: String,
    pub is_reply: bool,
    pub is_quote: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    /// Only an `admin` or `country` place was available.
    InsufficientPrecision,
    /// The geo-tag or place box lies (partly) outside the study area.
    Outside,
    /// Neither a geo-tag nor a place box.
    Unlocatable,
}

/// Resolves a tweet to a location inside `study`.
///
/// A geo-tag inside the study area always wins. Otherwise a place box is
/// used if its type is precise enough and it lies entirely inside the
/// study area.
pub fn locate(t: &TweetRecord, study: &LonLatRect) -> Result<LocatedRecord, DiscardReason> {
    let located = |location, tag_kind| LocatedRecord {
        tweet_id: t.tweet_id.clone(),
        user_id: t.user_id.clone(),
        location,
        tag_kind,
        source: t.source.clone(),
        is_reply: t.is_reply(),
        is_quote: t.is_quote(),
    };

    if let Some(p) = t.geo {
        if study.contains_point(p) {
            return Ok(located(Location::Point(p), TagKind::Geo));
        }
    }
    if let Some(b) = t.place_box {
        if !t.place_type.unwrap_or(PlaceType::Other).is_precise() {
            return Err(DiscardReason::InsufficientPrecision);
        }
        if study.contains_rect(&b) {
            return Ok(located(Location::from_box(b), TagKind::Place));
        }
        return Err(DiscardReason::Outside);
    }
    if t.place_type.is_some_and(|k| !k.is_precise()) {
        return Err(DiscardReason::InsufficientPrecision);
    }
    if t.geo.is_some() {
        return Err(DiscardReason::Outside);
    }
    Err(DiscardReason::Unlocatable)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LocateCounts {
    pub total_records: usize,
    pub located_geo: usize,
    pub located_place: usize,
    pub discarded_admin_country: usize,
    pub discarded_outside: usize,
    pub unlocatable: usize,
}

/// Locates every record, returning the located ones in input order and the
/// partition counts.
pub fn locate_all(records: &[TweetRecord], study: &LonLatRect) -> (Vec<LocatedRecord>, LocateCounts) {
    let mut counts = LocateCounts {
        total_records: records.len(),
        ..Default::default()
    };
    let mut out = Vec::with_capacity(records.len());
    for t in records {
        match locate(t, study) {
            Ok(r) => {
                match r.tag_kind {
                    TagKind::Geo => counts.located_geo += 1,
                    TagKind::Place => counts.located_place += 1,
                }
                out.push(r);
            }
            Err(DiscardReason::InsufficientPrecision) => counts.discarded_admin_country += 1,
            Err(DiscardReason::Outside) => counts.discarded_outside += 1,
            Err(DiscardReason::Unlocatable) => counts.unlocatable += 1,
        }
    }
    (out, counts)
}

fn user_counts(records: &[LocatedRecord]) -> HashMap<&str, usize> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for r in records {
        *counts.entry(r.user_id.as_str()).or_default() += 1;
    }
    counts
}

/// Drops every user whose record count strictly exceeds
/// `threshold_fraction` of the total. The threshold is computed once on the
/// input total. Removed user ids are returned sorted.
pub fn filter_bots(records: Vec<LocatedRecord>, threshold_fraction: f64) -> (Vec<LocatedRecord>, Vec<String>) {
    let limit = threshold_fraction * records.len() as f64;
    let removed: BTreeSet<String> = user_counts(&records)
        .into_iter()
        .filter(|&(_, n)| n as f64 > limit)
        .map(|(u, _)| u.to_string())
        .collect();
    if removed.is_empty() {
        return (records, Vec::new());
    }
    let kept = records.into_iter().filter(|r| !removed.contains(&r.user_id)).collect();
    (kept, removed.into_iter().collect())
}

/// Keeps the records of users with at least `min_count` records.
pub fn filter_min_tweets(records: Vec<LocatedRecord>, min_count: usize) -> Vec<LocatedRecord> {
    if min_count <= 1 {
        return records;
    }
    let counts: HashMap<String, usize> = user_counts(&records)
        .into_iter()
        .map(|(u, n)| (u.to_string(), n))
        .collect();
    records
        .into_iter()
        .filter(|r| counts[&r.user_id] >= min_count)
        .collect()
}

pub fn select_tags(records: Vec<LocatedRecord>, selection: TagSelection) -> Vec<LocatedRecord> {
    if selection == TagSelection::Both {
        return records;
    }
    records.into_iter().filter(|r| selection.accepts(r.tag_kind)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn study() -> LonLatRect {
        LonLatRect::new(-5.8, 49.9, -1.2, 52.2).unwrap()
    }

    fn tweet(geo: Option<(f64, f64)>, place: Option<(&str, [f64; 4])>) -> TweetRecord {
        TweetRecord {
            tweet_id: "t".into(),
            user_id: "u".into(),
            geo: geo.map(|(lon, lat)| GeoPoint { lon, lat }),
            place_type: place.map(|(k, _)| PlaceType::parse(k)),
            place_box: place.map(|(_, b)| LonLatRect::new(b[0], b[1], b[2], b[3]).unwrap()),
            source: String::new(),
            in_reply_to_status_id: None,
            in_reply_to_user_id: None,
            quoted_status_id: None,
        }
    }

    fn located(user: &str) -> LocatedRecord {
        LocatedRecord {
            tweet_id: String::new(),
            user_id: user.into(),
            location: Location::Point(GeoPoint { lon: -3.0, lat: 51.0 }),
            tag_kind: TagKind::Place,
            source: String::new(),
            is_reply: false,
            is_quote: false,
        }
    }

    #[test]
    fn geo_takes_precedence_over_place() {
        let t = tweet(Some((-3.5, 51.0)), Some(("city", [-3.6, 50.9, -3.4, 51.1])));
        let r = locate(&t, &study()).unwrap();
        assert_eq!(r.tag_kind, TagKind::Geo);
        assert_eq!(r.location, Location::Point(GeoPoint { lon: -3.5, lat: 51.0 }));
    }

    #[test]
    fn admin_place_is_discarded() {
        let t = tweet(None, Some(("admin", [-3.6, 50.9, -3.4, 51.1])));
        assert_eq!(locate(&t, &study()), Err(DiscardReason::InsufficientPrecision));
        let t = tweet(None, Some(("country", [-3.6, 50.9, -3.4, 51.1])));
        assert_eq!(locate(&t, &study()), Err(DiscardReason::InsufficientPrecision));
    }

    #[test]
    fn place_half_outside_is_discarded() {
        let t = tweet(None, Some(("city", [-6.0, 50.9, -5.6, 51.1])));
        assert_eq!(locate(&t, &study()), Err(DiscardReason::Outside));
    }

    #[test]
    fn outside_geo_falls_back_to_place() {
        let t = tweet(Some((0.0, 0.0)), Some(("poi", [-3.6, 50.9, -3.4, 51.1])));
        assert_eq!(locate(&t, &study()).unwrap().tag_kind, TagKind::Place);
        let t = tweet(Some((0.0, 0.0)), None);
        assert_eq!(locate(&t, &study()), Err(DiscardReason::Outside));
        assert_eq!(locate(&tweet(None, None), &study()), Err(DiscardReason::Unlocatable));
    }

    #[test]
    fn zero_extent_place_becomes_point() {
        let t = tweet(None, Some(("poi", [-3.5, 51.0, -3.5, 51.0])));
        let r = locate(&t, &study()).unwrap();
        assert_eq!(r.tag_kind, TagKind::Place);
        assert_eq!(r.location, Location::Point(GeoPoint { lon: -3.5, lat: 51.0 }));
    }

    #[test]
    fn bot_threshold_is_strict() {
        let mut recs: Vec<_> = (0..989).map(|i| located(&format!("u{i}"))).collect();
        recs.extend((0..11).map(|_| located("bot")));
        let (kept, removed) = filter_bots(recs, 0.01);
        assert_eq!(kept.len(), 989);
        assert_eq!(removed, vec!["bot".to_string()]);

        let mut recs: Vec<_> = (0..990).map(|i| located(&format!("u{i}"))).collect();
        recs.extend((0..10).map(|_| located("busy")));
        let (kept, removed) = filter_bots(recs, 0.01);
        assert_eq!(kept.len(), 1000);
        assert!(removed.is_empty());
    }

    #[test]
    fn min_tweets_boundary() {
        let mut recs: Vec<_> = (0..10).map(|_| located("ten")).collect();
        recs.extend((0..9).map(|_| located("nine")));
        let kept = filter_min_tweets(recs.clone(), 10);
        assert_eq!(kept.len(), 10);
        assert!(kept.iter().all(|r| r.user_id == "ten"));
        assert_eq!(filter_min_tweets(recs.clone(), 1), recs);
    }
}
