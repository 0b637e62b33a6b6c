use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use super::{LocateCounts, LocatedRecord, ParseDiagnostics};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceShare {
    pub source: String,
    pub count: usize,
    pub proportion: f64,
}

/// Most common `source` strings, descending by count with ties broken by
/// the source string.
pub fn source_ranking(records: &[LocatedRecord], k: usize) -> Vec<SourceShare> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for r in records {
        *counts.entry(r.source.as_str()).or_default() += 1;
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let total = records.len() as f64;
    ranked
        .into_iter()
        .take(k)
        .map(|(source, count)| SourceShare {
            source: source.to_string(),
            count,
            proportion: count as f64 / total,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplyQuoteStats {
    pub replies: usize,
    pub quotes: usize,
    /// Share of records that are a reply, a quote or both. `None` for an
    /// empty corpus.
    pub combined_fraction: Option<f64>,
}

pub fn reply_quote_stats(records: &[LocatedRecord]) -> ReplyQuoteStats {
    let replies = records.iter().filter(|r| r.is_reply).count();
    let quotes = records.iter().filter(|r| r.is_quote).count();
    let either = records.iter().filter(|r| r.is_reply || r.is_quote).count();
    ReplyQuoteStats {
        replies,
        quotes,
        combined_fraction: (!records.is_empty()).then(|| either as f64 / records.len() as f64),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub skipped_malformed: usize,
    pub total_records: usize,
    pub located_geo: usize,
    pub located_place: usize,
    pub discarded_admin_country: usize,
    pub discarded_outside: usize,
    pub unlocatable: usize,
    pub bot_users_removed: Vec<String>,
    pub bot_records_removed: usize,
    /// Records the source and reply statistics were computed over.
    pub analysed_records: usize,
    pub per_source: BTreeMap<String, usize>,
    pub reply_count: usize,
    pub quote_count: usize,
    pub reply_quote_fraction: Option<f64>,
}

impl CorpusStats {
    pub fn new(
        diag: &ParseDiagnostics,
        counts: LocateCounts,
        bot_users_removed: Vec<String>,
        bot_records_removed: usize,
        analysed: &[LocatedRecord],
    ) -> Self {
        let mut per_source = BTreeMap::new();
        for r in analysed {
            *per_source.entry(r.source.clone()).or_default() += 1;
        }
        let rq = reply_quote_stats(analysed);
        CorpusStats {
            skipped_malformed: diag.skipped,
            total_records: counts.total_records,
            located_geo: counts.located_geo,
            located_place: counts.located_place,
            discarded_admin_country: counts.discarded_admin_country,
            discarded_outside: counts.discarded_outside,
            unlocatable: counts.unlocatable,
            bot_users_removed,
            bot_records_removed,
            analysed_records: analysed.len(),
            per_source,
            reply_count: rq.replies,
            quote_count: rq.quotes,
            reply_quote_fraction: rq.combined_fraction,
        }
    }

    /// The `k` most common sources, ranked as in [`source_ranking`].
    pub fn top_sources(&self, k: usize) -> Vec<SourceShare> {
        let mut ranked: Vec<(&String, &usize)> = self.per_source.iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
        let total = self.analysed_records as f64;
        ranked
            .into_iter()
            .take(k)
            .map(|(source, &count)| SourceShare {
                source: source.clone(),
                count,
                proportion: count as f64 / total,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GeoPoint;
    use crate::ingest::{Location, TagKind};

    fn rec(source: &str, reply: bool, quote: bool) -> LocatedRecord {
        LocatedRecord {
            tweet_id: String::new(),
            user_id: "u".into(),
            location: Location::Point(GeoPoint { lon: 0.0, lat: 0.0 }),
            tag_kind: TagKind::Geo,
            source: source.into(),
            is_reply: reply,
            is_quote: quote,
        }
    }

    #[test]
    fn ranking_of_two_sources() {
        let mut recs: Vec<_> = (0..6).map(|_| rec("A", false, false)).collect();
        recs.extend((0..4).map(|_| rec("B", false, false)));
        let r = source_ranking(&recs, 2);
        assert_eq!(
            r,
            vec![
                SourceShare {
                    source: "A".into(),
                    count: 6,
                    proportion: 0.6
                },
                SourceShare {
                    source: "B".into(),
                    count: 4,
                    proportion: 0.4
                },
            ]
        );
        assert_eq!(source_ranking(&recs, 10).len(), 2);
    }

    #[test]
    fn ranking_ties_are_lexicographic() {
        let recs = vec![
            rec("b", false, false),
            rec("a", false, false),
            rec("c", false, false),
            rec("c", false, false),
        ];
        let names: Vec<_> = source_ranking(&recs, 3).into_iter().map(|s| s.source).collect();
        assert_eq!(names, ["c", "a", "b"]);
    }

    #[test]
    fn reply_quote_fraction() {
        let mut recs: Vec<_> = (0..94).map(|_| rec("", false, false)).collect();
        recs.extend((0..5).map(|_| rec("", true, false)));
        recs.push(rec("", false, true));
        let s = reply_quote_stats(&recs);
        assert_eq!((s.replies, s.quotes), (5, 1));
        assert!((s.combined_fraction.unwrap() - 0.06).abs() < 1e-15);
    }

    #[test]
    fn both_reply_and_quote_counted_once_in_union() {
        let recs = vec![rec("", true, true), rec("", false, false)];
        let s = reply_quote_stats(&recs);
        assert_eq!((s.replies, s.quotes), (1, 1));
        assert_eq!(s.combined_fraction, Some(0.5));
    }

    #[test]
    fn empty_corpus_has_no_fraction() {
        let s = reply_quote_stats(&[]);
        assert_eq!(
            s,
            ReplyQuoteStats {
                replies: 0,
                quotes: 0,
                combined_fraction: None
            }
        );
        let plain = vec![rec("", false, false); 3];
        assert_eq!(reply_quote_stats(&plain).combined_fraction, Some(0.0));
    }
}
