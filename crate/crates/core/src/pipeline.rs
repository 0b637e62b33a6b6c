//! Loading inputs and applying the record filters in their fixed order:
//! locate, remove bots, select tag kind, drop users with too few records.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{LonLatRect, MultiPolygon};
use crate::ingest::{
    filter_bots, filter_min_tweets, locate_all, read_land, read_population, read_tweets, select_tags, CorpusStats,
    ParseDiagnostics, PopulationDiagnostic, PopulationUnit, TagSelection, TweetRecord,
};
use crate::scaling::AnalysisInput;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSettings {
    /// Users with more than this share of all located records are removed.
    pub bot_threshold: f64,
    pub min_user_tweets: usize,
    pub tag_kind: TagSelection,
}

impl Default for FilterSettings {
    fn default() -> Self {
        FilterSettings {
            bot_threshold: 0.01,
            min_user_tweets: 10,
            tag_kind: TagSelection::Place,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub input: AnalysisInput,
    /// Corpus statistics over the located records left after bot removal,
    /// before tag selection and the minimum-records filter.
    pub stats: CorpusStats,
}

/// Runs the record filters and bundles the result with the census and land
/// layers. Without `land`, the whole study rectangle counts as land.
pub fn prepare(
    tweets: &[TweetRecord],
    parse: &ParseDiagnostics,
    units: Vec<PopulationUnit>,
    land: Option<MultiPolygon>,
    study: LonLatRect,
    standard_parallel: f64,
    filters: &FilterSettings,
) -> Result<Prepared> {
    let (located, counts) = locate_all(tweets, &study);
    let before = located.len();
    let (kept, bots) = filter_bots(located, filters.bot_threshold);
    let stats = CorpusStats::new(parse, counts, bots, before - kept.len(), &kept);
    let records = filter_min_tweets(select_tags(kept, filters.tag_kind), filters.min_user_tweets);
    let land = match land {
        Some(l) => l,
        None => study.to_multipolygon()?,
    };
    Ok(Prepared {
        input: AnalysisInput {
            study,
            standard_parallel,
            records,
            units,
            land,
        },
        stats,
    })
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub tweets: Vec<TweetRecord>,
    pub parse: ParseDiagnostics,
    pub units: Vec<PopulationUnit>,
    pub population_diagnostics: Vec<PopulationDiagnostic>,
    pub land: Option<MultiPolygon>,
}

pub fn load(tweets: &Path, population: Option<&Path>, land: Option<&Path>) -> Result<Loaded> {
    let (tweets, parse) = read_tweets(tweets)?;
    let (units, population_diagnostics) = match population {
        Some(p) => read_population(p)?,
        None => (Vec::new(), Vec::new()),
    };
    let land = land.map(read_land).transpose()?;
    Ok(Loaded {
        tweets,
        parse,
        units,
        population_diagnostics,
        land,
    })
}
