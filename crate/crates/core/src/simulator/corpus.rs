//! Sentence pools for simulated studies: a synthetic generator and CSV I/O.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::content::{normalize_text, ContentError, BASELINE_HEADER};
use crate::types::{Leaning, Origin, SentenceLabel, TopicId};

/// Expert label for one sentence. Biased words are surface forms or phrases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gold {
    pub label: SentenceLabel,
    pub biased_words: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSentence {
    pub text: String,
    pub topic: TopicId,
    pub outlet: String,
    pub outlet_leaning: Leaning,
    pub article_url: String,
    pub origin: Origin,
    /// Required for baseline rows; optional for new rows.
    pub gold: Option<Gold>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pool {
    pub sentences: Vec<PoolSentence>,
}

const SUBJECTS: &[&str] = &[
    "The senator", "The governor", "Protesters", "The mayor", "Officials", "The committee",
    "Activists", "The administration", "Lawmakers", "The council", "Critics", "Supporters",
    "The campaign", "Researchers", "Police", "The agency",
];
const NEUTRAL_VERBS: &[&str] = &[
    "announced", "discussed", "proposed", "reviewed", "described", "presented", "examined",
    "outlined", "published", "debated",
];
const LOADED_VERBS: &[&str] = &["slammed", "rammed", "peddled", "touted", "trumpeted", "smuggled"];
const NEUTRAL_ADJECTIVES: &[&str] = &[
    "new", "annual", "revised", "updated", "regional", "federal", "draft", "local", "second",
];
const LOADED_ADJECTIVES: &[&str] = &[
    "reckless", "disastrous", "radical", "shameful", "outrageous", "corrupt", "absurd",
    "dangerous", "bizarre", "ridiculous", "pathetic", "sinister",
];
const OBJECTS: &[&str] = &[
    "plan", "bill", "policy", "report", "measure", "proposal", "budget", "reform", "ruling",
    "statement",
];
const PLACES: &[&str] = &[
    "Ohio", "Texas", "Berlin", "Chicago", "Denver", "Phoenix", "Boston", "Atlanta", "Seattle",
    "Miami", "Detroit", "Portland",
];
const TOPICS: &[&str] = &[
    "abortion", "blm", "climate-change", "gender", "gun-control", "immigration", "vaccines",
    "elections",
];
const OUTLETS: &[(&str, Leaning)] = &[
    ("Daily Ledger", Leaning::Left),
    ("Morning Post", Leaning::Center),
    ("Liberty Wire", Leaning::Right),
    ("Citizen Times", Leaning::Left),
    ("National Record", Leaning::Right),
];

fn pick<'a, R: Rng>(rng: &mut R, xs: &'a [&'a str]) -> &'a str {
    xs.choose(rng).expect("non-empty word list")
}

/// Builds one sentence and its biased words.
fn synthesize<R: Rng>(rng: &mut R, biased: bool) -> (String, Vec<String>) {
    let subject = pick(rng, SUBJECTS);
    let object = pick(rng, OBJECTS);
    let place = pick(rng, PLACES);
    if !biased {
        let verb = pick(rng, NEUTRAL_VERBS);
        let adj = pick(rng, NEUTRAL_ADJECTIVES);
        return (format!("{subject} {verb} the {adj} {object} in {place}."), Vec::new());
    }
    let (verb, loaded_verb) = match rng.random_range(0..4) {
        0 => (pick(rng, LOADED_VERBS), true),
        _ => (pick(rng, NEUTRAL_VERBS), false),
    };
    let (adj, loaded_adj) = match (loaded_verb, rng.random_range(0..3)) {
        (true, 0) => (pick(rng, NEUTRAL_ADJECTIVES), false),
        _ => (pick(rng, LOADED_ADJECTIVES), true),
    };
    let mut words = Vec::new();
    if loaded_verb {
        words.push(verb.to_owned());
    }
    if loaded_adj {
        words.push(adj.to_owned());
    }
    (format!("{subject} {verb} the {adj} {object} in {place}."), words)
}

impl Pool {
    /// A deterministic pool with `baseline` labeled sentences at a 2:1
    /// biased to not-biased ratio and `new` unlabeled-in-store sentences whose
    /// gold labels follow the same ratio.
    pub fn synthetic(baseline: usize, new: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = BTreeSet::new();
        let mut sentences = Vec::with_capacity(baseline + new);
        for (origin, n) in [(Origin::Baseline, baseline), (Origin::New, new)] {
            let biased_target = (2 * n + 1) / 3;
            for i in 0..n {
                let biased = i < biased_target;
                let (text, words) = loop {
                    let (text, words) = synthesize(&mut rng, biased);
                    if seen.insert(normalize_text(&text)) {
                        break (text, words);
                    }
                };
                let (outlet, leaning) = OUTLETS[rng.random_range(0..OUTLETS.len())];
                let slug = sentences.len() + 1;
                sentences.push(PoolSentence {
                    text,
                    topic: TopicId::new(pick(&mut rng, TOPICS)),
                    outlet: outlet.to_owned(),
                    outlet_leaning: leaning,
                    article_url: format!("https://news.example.org/articles/{slug}"),
                    origin,
                    gold: Some(Gold {
                        label: if biased { SentenceLabel::Biased } else { SentenceLabel::NotBiased },
                        biased_words: words,
                    }),
                });
            }
        }
        Self { sentences }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn count(&self, origin: Origin) -> usize {
        self.sentences.iter().filter(|s| s.origin == origin).count()
    }

    pub fn topics(&self) -> BTreeSet<TopicId> {
        self.sentences.iter().map(|s| s.topic.clone()).collect()
    }

    /// Baseline rows in the curator import format.
    pub fn baseline_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(BASELINE_HEADER).expect("in-memory write");
        for s in self.sentences.iter().filter(|s| s.origin == Origin::Baseline) {
            let gold = s.gold.as_ref().expect("baseline rows carry labels");
            w.write_record([
                s.text.as_str(),
                gold.label.as_str(),
                &gold.biased_words.join("|"),
                &s.outlet,
                s.outlet_leaning.as_str(),
                s.topic.as_str(),
                &s.article_url,
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }

    /// The import format plus a trailing `origin` column. Label columns are
    /// empty for new rows without gold.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = BASELINE_HEADER.to_vec();
        header.push("origin");
        w.write_record(&header)?;
        for s in &self.sentences {
            let (label, words) = match &s.gold {
                Some(g) => (g.label.as_str(), g.biased_words.join("|")),
                None => ("", String::new()),
            };
            w.write_record([
                s.text.as_str(),
                label,
                &words,
                &s.outlet,
                s.outlet_leaning.as_str(),
                s.topic.as_str(),
                &s.article_url,
                s.origin.as_str(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn from_csv<R: Read>(reader: R) -> Result<Self, ContentError> {
        let fmt = |e: csv::Error| ContentError::FormatError(e.to_string());
        let mut r = csv::Reader::from_reader(reader);
        let header: Vec<String> = r.headers().map_err(fmt)?.iter().map(str::to_owned).collect();
        let mut expected: Vec<&str> = BASELINE_HEADER.to_vec();
        expected.push("origin");
        if header != expected {
            return Err(ContentError::FormatError(format!("expected header {}", expected.join(","))));
        }
        let mut sentences = Vec::new();
        for (i, record) in r.records().enumerate() {
            let record = record.map_err(fmt)?;
            let row = |msg: String| ContentError::FormatError(format!("row {}: {msg}", i + 1));
            let origin: Origin = record[7].parse().map_err(row)?;
            let gold = match &record[1] {
                "" => None,
                label => Some(Gold {
                    label: label.parse().map_err(row)?,
                    biased_words: split_words(&record[2]),
                }),
            };
            if origin == Origin::Baseline && gold.is_none() {
                return Err(row("baseline rows need a label".into()));
            }
            sentences.push(PoolSentence {
                text: record[0].to_owned(),
                topic: TopicId::new(&record[5]),
                outlet: record[3].to_owned(),
                outlet_leaning: record[4].parse().map_err(row)?,
                article_url: record[6].to_owned(),
                origin,
                gold,
            });
        }
        Ok(Self { sentences })
    }

    /// Writes `text,label,biased_words` for every sentence with gold.
    pub fn write_gold_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["text", "label", "biased_words"])?;
        for s in &self.sentences {
            if let Some(g) = &s.gold {
                w.write_record([s.text.as_str(), g.label.as_str(), &g.biased_words.join("|")])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Replaces gold labels from a `text,label,biased_words` file, matching on
    /// normalized text. Returns how many sentences were updated.
    pub fn apply_gold<R: Read>(&mut self, reader: R) -> Result<usize, ContentError> {
        let fmt = |e: csv::Error| ContentError::FormatError(e.to_string());
        let mut r = csv::Reader::from_reader(reader);
        let header: Vec<String> = r.headers().map_err(fmt)?.iter().map(str::to_owned).collect();
        if header != ["text", "label", "biased_words"] {
            return Err(ContentError::FormatError("expected header text,label,biased_words".into()));
        }
        let mut gold = BTreeMap::new();
        for record in r.records() {
            let record = record.map_err(fmt)?;
            let label: SentenceLabel = record[1].parse().map_err(ContentError::FormatError)?;
            gold.insert(
                normalize_text(&record[0]),
                Gold { label, biased_words: split_words(&record[2]) },
            );
        }
        let mut updated = 0;
        for s in &mut self.sentences {
            if let Some(g) = gold.get(&normalize_text(&s.text)) {
                s.gold = Some(g.clone());
                updated += 1;
            }
        }
        Ok(updated)
    }
}

fn split_words(field: &str) -> Vec<String> {
    field.split('|').map(str::trim).filter(|w| !w.is_empty()).map(str::to_owned).collect()
}
