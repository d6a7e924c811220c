//! Dataset export as JSON Lines.

use std::collections::BTreeSet;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::{Aggregator, LabelState};
use crate::content::ContentStore;
use crate::types::{Leaning, Origin, PlayerId, SentenceLabel, TopicId};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExportFilter {
    pub min_annotations: Option<u32>,
    pub topics: Option<Vec<TopicId>>,
    /// Votes from players whose skill is below this are dropped before labels are recomputed.
    pub min_skill: Option<f64>,
    /// Defaults to true.
    pub include_baseline: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiasedWord {
    pub index: usize,
    pub word: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub text: String,
    pub label: SentenceLabel,
    pub biased_words: Vec<BiasedWord>,
    pub topic: TopicId,
    pub article_url: String,
    pub outlet: String,
    pub outlet_leaning: Leaning,
    pub annotator_count: u32,
    pub label_support: Option<f64>,
    pub origin: Origin,
}

impl Aggregator {
    /// One record per established sentence that passes `filter`, ordered by sentence id.
    pub fn export_dataset(
        &self,
        content: &ContentStore,
        filter: &ExportFilter,
        skill: &dyn Fn(PlayerId) -> f64,
    ) -> Vec<DatasetRecord> {
        let include_baseline = filter.include_baseline.unwrap_or(true);
        let topics: Option<BTreeSet<&TopicId>> = filter.topics.as_ref().map(|t| t.iter().collect());

        content
            .sentences()
            .filter(|s| include_baseline || s.origin != Origin::Baseline)
            .filter(|s| topics.as_ref().is_none_or(|t| t.contains(&s.topic)))
            .filter_map(|s| {
                let state = match filter.min_skill {
                    Some(min) => self.rebuild_state(s, |a| skill(a.player_id) >= min),
                    None => self.state(s.id).cloned().unwrap_or_else(|| LabelState::new(s)),
                };
                if !state.is_established() {
                    return None;
                }
                if filter.min_annotations.is_some_and(|m| state.annotator_count < m) {
                    return None;
                }
                let tokens = state.resolved_biased_tokens.as_ref()?;
                Some(DatasetRecord {
                    text: s.text.clone(),
                    label: state.resolved_label?,
                    biased_words: tokens
                        .iter()
                        .filter_map(|&i| {
                            s.surface(i).map(|w| BiasedWord { index: i, word: w.to_owned() })
                        })
                        .collect(),
                    topic: s.topic.clone(),
                    article_url: s.article_url.clone(),
                    outlet: s.outlet.clone(),
                    outlet_leaning: s.outlet_leaning,
                    annotator_count: state.annotator_count,
                    label_support: state.label_support(),
                    origin: s.origin,
                })
            })
            .collect()
    }
}

/// Writes one JSON object per line.
pub fn write_jsonl<W: Write>(records: &[DatasetRecord], mut out: W) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::Annotation;
    use crate::content::{NewSentence, Topic};
    use crate::types::{Mode, Phase, SentenceId};
    use chrono::{DateTime, Utc};

    fn setup() -> (ContentStore, Aggregator, SentenceId) {
        let mut content = ContentStore::default();
        content.add_topic(Topic::new("Vaccine", "Vaccine")).unwrap();
        content.add_topic(Topic::new("Guns", "Guns")).unwrap();
        let id = content
            .ingest_sentence(NewSentence {
                text: "A reckless ban passed.".into(),
                topic: TopicId::new("Guns"),
                article_url: "u".into(),
                outlet: "o".into(),
                outlet_leaning: Leaning::Center,
            })
            .unwrap();
        let s = content.sentence(id).unwrap().clone();
        let mut agg = Aggregator::new();
        let labels = [
            SentenceLabel::Biased,
            SentenceLabel::Biased,
            SentenceLabel::NotBiased,
            SentenceLabel::Biased,
            SentenceLabel::Biased,
        ];
        for (p, l) in labels.into_iter().enumerate() {
            let marks = if p < 2 { [1].into_iter().collect() } else { BTreeSet::new() };
            agg.record_annotation(
                &s,
                true,
                Annotation {
                    player_id: PlayerId(p as u64),
                    sentence_id: id,
                    sentence_label: Some(l),
                    marked_tokens: marks,
                    mode: Mode::Publish,
                    phase: Phase::Direct,
                    timestamp: DateTime::<Utc>::UNIX_EPOCH,
                },
            )
            .unwrap();
        }
        (content, agg, id)
    }

    #[test]
    fn exports_established_record() {
        let (content, agg, _) = setup();
        let records = agg.export_dataset(&content, &ExportFilter::default(), &|_| 1.0);
        assert_eq!(records.len(), 1);
        let r = &records[0];
        assert_eq!(r.label, SentenceLabel::Biased);
        assert_eq!(r.label_support, Some(0.8));
        assert_eq!(r.biased_words, vec![BiasedWord { index: 1, word: "reckless".into() }]);

        let mut buf = Vec::new();
        write_jsonl(&records, &mut buf).unwrap();
        let line: serde_json::Value = serde_json::from_slice(&buf[..buf.len() - 1]).unwrap();
        let keys: Vec<_> = line.as_object().unwrap().keys().cloned().collect();
        let mut expected = vec![
            "text", "label", "biased_words", "topic", "article_url", "outlet",
            "outlet_leaning", "annotator_count", "label_support", "origin",
        ];
        expected.sort();
        assert_eq!(keys, expected);
        assert_eq!(line["biased_words"][0]["word"], "reckless");
    }

    #[test]
    fn topic_filter_can_be_empty() {
        let (content, agg, _) = setup();
        let filter = ExportFilter { topics: Some(vec![TopicId::new("Vaccine")]), ..Default::default() };
        assert!(agg.export_dataset(&content, &filter, &|_| 1.0).is_empty());
    }

    #[test]
    fn skill_filter_recomputes_labels() {
        let (content, agg, _) = setup();
        // dropping players 0 and 1 leaves three votes: below threshold
        let filter = ExportFilter { min_skill: Some(0.5), ..Default::default() };
        let skill = |p: PlayerId| if p.0 < 2 { 0.2 } else { 0.9 };
        assert!(agg.export_dataset(&content, &filter, &skill).is_empty());
        let filter = ExportFilter { min_skill: Some(0.1), ..Default::default() };
        assert_eq!(agg.export_dataset(&content, &filter, &skill).len(), 1);
    }
}
