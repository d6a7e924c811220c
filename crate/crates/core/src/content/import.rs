//! Baseline CSV import.

use std::collections::BTreeSet;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{normalize_text, ContentError, ContentStore, Sentence, Token, Topic};
use crate::types::{Leaning, Origin, SentenceId, SentenceLabel, TopicId};

pub const BASELINE_HEADER: [&str; 7] = [
    "text",
    "label",
    "biased_words",
    "outlet",
    "outlet_leaning",
    "topic",
    "article_url",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedRow {
    /// 1-based data row number (the header is row 0).
    pub row: usize,
    pub error: ContentError,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportReport {
    pub imported: usize,
    pub ids: Vec<SentenceId>,
    pub rejected: Vec<RejectedRow>,
    pub created_topics: Vec<TopicId>,
}

/// Finds every contiguous occurrence of `phrase`'s tokens in `tokens`.
fn resolve_phrase(tokens: &[Token], phrase: &[Token]) -> Vec<usize> {
    if phrase.is_empty() || phrase.len() > tokens.len() {
        return Vec::new();
    }
    let mut hits = Vec::new();
    for start in 0..=tokens.len() - phrase.len() {
        let window = &tokens[start..start + phrase.len()];
        if window.iter().zip(phrase).all(|(a, b)| a.surface == b.surface) {
            hits.extend(start..start + phrase.len());
        }
    }
    hits
}

impl ContentStore {
    /// Maps biased words or phrases onto token indices: every contiguous
    /// occurrence counts, stopwords inside a phrase are dropped.
    pub fn resolve_biased_words<'a>(
        &self,
        tokens: &[Token],
        entries: impl IntoIterator<Item = &'a str>,
    ) -> Result<BTreeSet<usize>, ContentError> {
        let mut biased = BTreeSet::new();
        for entry in entries.into_iter().map(str::trim).filter(|w| !w.is_empty()) {
            let phrase = self.tokenize(entry)?;
            let hits = resolve_phrase(tokens, &phrase);
            if hits.is_empty() {
                return Err(ContentError::UnresolvedWord(entry.to_owned()));
            }
            biased.extend(hits.into_iter().filter(|&i| !tokens[i].is_stopword));
        }
        Ok(biased)
    }

    /// Imports baseline rows. A header mismatch fails the whole file; bad rows are
    /// rejected individually and reported, the rest are stored.
    pub fn import_baseline<R: Read>(&mut self, reader: R) -> Result<ImportReport, ContentError> {
        let mut csv = csv::ReaderBuilder::new()
            .flexible(true)
            .has_headers(false)
            .from_reader(reader);
        let mut records = csv.records();
        let mut report = ImportReport::default();

        let header = match records.next() {
            None => return Ok(report),
            Some(h) => h.map_err(|e| ContentError::FormatError(e.to_string()))?,
        };
        let header: Vec<&str> = header.iter().map(|h| h.trim_start_matches('\u{feff}')).collect();
        if header != BASELINE_HEADER {
            return Err(ContentError::FormatError(format!(
                "expected header {}, found {}",
                BASELINE_HEADER.join(","),
                header.join(",")
            )));
        }

        for (i, record) in records.enumerate() {
            let row = i + 1;
            let result = record
                .map_err(|e| ContentError::FormatError(e.to_string()))
                .and_then(|r| self.import_row(&r, &mut report.created_topics));
            match result {
                Ok(id) => {
                    report.imported += 1;
                    report.ids.push(id);
                }
                Err(error) => report.rejected.push(RejectedRow { row, error }),
            }
        }
        Ok(report)
    }

    fn import_row(
        &mut self,
        record: &csv::StringRecord,
        created: &mut Vec<TopicId>,
    ) -> Result<SentenceId, ContentError> {
        if record.len() != BASELINE_HEADER.len() {
            return Err(ContentError::FormatError(format!(
                "expected {} columns, found {}",
                BASELINE_HEADER.len(),
                record.len()
            )));
        }
        let text = &record[0];
        let label: SentenceLabel = record[1].parse().map_err(ContentError::FormatError)?;
        let leaning: Leaning = record[4].parse().map_err(ContentError::FormatError)?;
        let topic = TopicId::new(&record[5]);
        if topic.as_str().is_empty() {
            return Err(ContentError::FormatError("empty topic".into()));
        }

        let tokens = self.tokenize(text)?;
        if let Some(&existing) = self.by_text.get(&normalize_text(text)) {
            return Err(ContentError::DuplicateText(existing));
        }
        let biased = self.resolve_biased_words(&tokens, record[2].split('|'))?;

        if !self.topics.contains_key(&topic) {
            self.topics.insert(topic.clone(), Topic::new(topic.as_str(), topic.as_str()));
            created.push(topic.clone());
        }
        Ok(self.insert_baseline(Sentence {
            id: SentenceId(0),
            text: text.to_owned(),
            tokens,
            topic,
            article_url: record[6].to_owned(),
            outlet: record[3].to_owned(),
            outlet_leaning: leaning,
            origin: Origin::Baseline,
            baseline_label: Some(label),
            baseline_biased_words: Some(biased),
        }))
    }
}
