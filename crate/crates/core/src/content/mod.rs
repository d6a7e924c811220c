//! Sentence ingestion, tokenization, topics and round content selection.

mod import;
mod stopwords;
mod tokenize;

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Leaning, Origin, PlayerId, SentenceId, SentenceLabel, TopicId};

pub use import::{ImportReport, RejectedRow, BASELINE_HEADER};
pub use stopwords::{is_stopword, Stopwords, DEFAULT_STOPWORDS};
pub use tokenize::{tokenize, tokenize_with, Token};

/// Default number of sentences a player can draw per topic per day.
pub const DEFAULT_DAILY_QUOTA: u32 = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum ContentError {
    #[error("sentence text is empty")]
    EmptyText,
    #[error("unknown topic {0}")]
    UnknownTopic(TopicId),
    #[error("an identical sentence is already stored as {0}")]
    DuplicateText(SentenceId),
    #[error("malformed import: {0}")]
    FormatError(String),
    #[error("biased word {0:?} does not occur in the sentence")]
    UnresolvedWord(String),
    #[error("daily quota exhausted")]
    QuotaExhausted,
    #[error("only {available} unseen sentences available, {requested} requested")]
    InsufficientContent { requested: usize, available: usize },
    #[error("unknown sentence {0}")]
    UnknownSentence(SentenceId),
    #[error("invalid topic settings: {0}")]
    InvalidTopic(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    pub id: TopicId,
    pub name: String,
    pub unlocked_by_default: bool,
    pub price: u64,
    pub daily_quota: u32,
}

impl Topic {
    pub fn new(id: impl Into<String>, name: impl Into<String>) -> Self {
        Self {
            id: TopicId::new(id),
            name: name.into(),
            unlocked_by_default: false,
            price: 80,
            daily_quota: DEFAULT_DAILY_QUOTA,
        }
    }

    pub fn unlocked(mut self) -> Self {
        self.unlocked_by_default = true;
        self
    }

    pub fn with_price(mut self, price: u64) -> Self {
        self.price = price;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: SentenceId,
    pub text: String,
    pub tokens: Vec<Token>,
    pub topic: TopicId,
    pub article_url: String,
    pub outlet: String,
    pub outlet_leaning: Leaning,
    pub origin: Origin,
    pub baseline_label: Option<SentenceLabel>,
    pub baseline_biased_words: Option<BTreeSet<usize>>,
}

impl Sentence {
    pub fn is_stopword_index(&self, index: usize) -> bool {
        self.tokens.get(index).is_some_and(|t| t.is_stopword)
    }

    pub fn surface(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(|t| t.surface.as_str())
    }
}

/// Metadata for a newly added sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewSentence {
    pub text: String,
    pub topic: TopicId,
    pub article_url: String,
    pub outlet: String,
    pub outlet_leaning: Leaning,
}

/// Which pool a round draws from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Scope {
    /// Sentences of one shop topic.
    Topic(TopicId),
    /// The curator-refreshed daily feed.
    BreakingNews,
    /// The whole pool, optionally restricted to one origin. Used for study sessions.
    Study(Option<Origin>),
}

/// Collapses whitespace runs and trims; case is preserved.
pub fn normalize_text(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Biased:not-biased composition of a baseline pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Composition {
    pub biased: usize,
    pub not_biased: usize,
}

impl Composition {
    pub fn of<'a>(sentences: impl IntoIterator<Item = &'a Sentence>) -> Self {
        let mut c = Composition { biased: 0, not_biased: 0 };
        for s in sentences {
            match s.baseline_label {
                Some(SentenceLabel::Biased) => c.biased += 1,
                Some(SentenceLabel::NotBiased) => c.not_biased += 1,
                None => {}
            }
        }
        c
    }

    /// True when the biased count is within one sentence of two thirds of the pool.
    pub fn is_two_to_one(&self) -> bool {
        let total = (self.biased + self.not_biased) as f64;
        (self.biased as f64 - 2.0 * total / 3.0).abs() <= 1.0
    }
}

/// Per-player daily draw accounting.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct QuotaLedger {
    used: BTreeMap<(PlayerId, Scope), u32>,
    refills: BTreeMap<(PlayerId, Scope), u32>,
}

/// What [`ContentStore::select_sentences`] needs to know about the rest of the system.
pub struct SelectionContext<'a> {
    /// Sentences the player already annotated or was assessed on.
    pub seen: &'a BTreeSet<SentenceId>,
    /// Current collectable annotation count per sentence.
    pub annotation_count: &'a dyn Fn(SentenceId) -> u32,
    /// Extra mode-specific eligibility (e.g. Critique needs another player's annotation).
    pub eligible: &'a dyn Fn(&Sentence) -> bool,
}

#[derive(Debug, Clone)]
pub struct ContentStore {
    stopwords: Stopwords,
    topics: BTreeMap<TopicId, Topic>,
    sentences: BTreeMap<SentenceId, Sentence>,
    by_text: BTreeMap<String, SentenceId>,
    next_id: u64,
    quotas: QuotaLedger,
    breaking_news: Vec<SentenceId>,
    study_quota: u32,
}

impl Default for ContentStore {
    fn default() -> Self {
        Self::new(Stopwords::default())
    }
}

impl ContentStore {
    pub fn new(stopwords: Stopwords) -> Self {
        Self {
            stopwords,
            topics: BTreeMap::new(),
            sentences: BTreeMap::new(),
            by_text: BTreeMap::new(),
            next_id: 1,
            quotas: QuotaLedger::default(),
            breaking_news: Vec::new(),
            study_quota: 30,
        }
    }

    pub fn stopwords(&self) -> &Stopwords {
        &self.stopwords
    }

    pub fn set_study_quota(&mut self, quota: u32) {
        self.study_quota = quota;
    }

    pub fn add_topic(&mut self, topic: Topic) -> Result<(), ContentError> {
        if topic.daily_quota < 1 {
            return Err(ContentError::InvalidTopic("daily_quota must be at least 1".into()));
        }
        self.topics.insert(topic.id.clone(), topic);
        Ok(())
    }

    pub fn topic(&self, id: &TopicId) -> Option<&Topic> {
        self.topics.get(id)
    }

    pub fn topics(&self) -> impl Iterator<Item = &Topic> {
        self.topics.values()
    }

    pub fn sentence(&self, id: SentenceId) -> Option<&Sentence> {
        self.sentences.get(&id)
    }

    pub fn sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.sentences.values()
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn tokenize(&self, text: &str) -> Result<Vec<Token>, ContentError> {
        tokenize_with(text, &self.stopwords)
    }

    /// Adds a sentence of origin `new` under an existing topic.
    pub fn ingest_sentence(&mut self, new: NewSentence) -> Result<SentenceId, ContentError> {
        if !self.topics.contains_key(&new.topic) {
            return Err(ContentError::UnknownTopic(new.topic));
        }
        let tokens = self.tokenize(&new.text)?;
        let key = normalize_text(&new.text);
        if let Some(&existing) = self.by_text.get(&key) {
            return Err(ContentError::DuplicateText(existing));
        }
        let id = self.allocate();
        self.by_text.insert(key, id);
        self.sentences.insert(
            id,
            Sentence {
                id,
                text: new.text,
                tokens,
                topic: new.topic,
                article_url: new.article_url,
                outlet: new.outlet,
                outlet_leaning: new.outlet_leaning,
                origin: Origin::New,
                baseline_label: None,
                baseline_biased_words: None,
            },
        );
        Ok(id)
    }

    fn allocate(&mut self) -> SentenceId {
        let id = SentenceId(self.next_id);
        self.next_id += 1;
        id
    }

    fn insert_baseline(&mut self, sentence: Sentence) -> SentenceId {
        let id = self.allocate();
        self.by_text.insert(normalize_text(&sentence.text), id);
        self.sentences.insert(id, Sentence { id, ..sentence });
        id
    }

    pub fn composition(&self) -> Composition {
        Composition::of(self.sentences.values().filter(|s| s.origin == Origin::Baseline))
    }

    /// Replaces today's Breaking News feed.
    pub fn set_breaking_news(&mut self, ids: Vec<SentenceId>) -> Result<(), ContentError> {
        if let Some(missing) = ids.iter().find(|id| !self.sentences.contains_key(id)) {
            return Err(ContentError::UnknownSentence(*missing));
        }
        self.breaking_news = ids;
        Ok(())
    }

    pub fn breaking_news(&self) -> &[SentenceId] {
        &self.breaking_news
    }

    /// Clears all per-player daily usage and purchased refills.
    pub fn reset_quotas(&mut self) {
        self.quotas = QuotaLedger::default();
    }

    pub fn add_refill(&mut self, player: PlayerId, scope: Scope, amount: u32) {
        *self.quotas.refills.entry((player, scope)).or_default() += amount;
    }

    fn base_quota(&self, scope: &Scope) -> Result<u32, ContentError> {
        match scope {
            Scope::Topic(id) => self
                .topics
                .get(id)
                .map(|t| t.daily_quota)
                .ok_or_else(|| ContentError::UnknownTopic(id.clone())),
            Scope::BreakingNews => Ok(self.breaking_news.len() as u32),
            Scope::Study(_) => Ok(self.study_quota),
        }
    }

    /// Sentences the player can still draw today in `scope`.
    pub fn remaining_quota(&self, player: PlayerId, scope: &Scope) -> Result<u32, ContentError> {
        let key = (player, scope.clone());
        let limit = self.base_quota(scope)? + self.quotas.refills.get(&key).copied().unwrap_or(0);
        let used = self.quotas.used.get(&key).copied().unwrap_or(0);
        Ok(limit.saturating_sub(used))
    }

    /// Charges `n` draws against the player's quota in `scope`.
    pub fn charge(&mut self, player: PlayerId, scope: &Scope, n: u32) -> Result<(), ContentError> {
        if self.remaining_quota(player, scope)? < n {
            return Err(ContentError::QuotaExhausted);
        }
        *self.quotas.used.entry((player, scope.clone())).or_default() += n;
        Ok(())
    }

    /// Draws `n` unseen sentences, least-annotated first with random tie-breaks, and
    /// charges them against the player's daily quota. Nothing is charged on error.
    pub fn select_sentences<R: Rng>(
        &mut self,
        player: PlayerId,
        scope: &Scope,
        n: usize,
        ctx: &SelectionContext<'_>,
        rng: &mut R,
    ) -> Result<Vec<SentenceId>, ContentError> {
        assert!(n >= 1, "selection size must be positive");
        if (self.remaining_quota(player, scope)? as usize) < n {
            return Err(ContentError::QuotaExhausted);
        }

        let in_scope = |s: &&Sentence| match scope {
            Scope::Topic(t) => &s.topic == t,
            Scope::BreakingNews => self.breaking_news.contains(&s.id),
            Scope::Study(origin) => origin.is_none_or(|o| s.origin == o),
        };
        let mut candidates: Vec<(u32, u64, SentenceId)> = self
            .sentences
            .values()
            .filter(in_scope)
            .filter(|s| !ctx.seen.contains(&s.id))
            .filter(|s| (ctx.eligible)(s))
            .map(|s| ((ctx.annotation_count)(s.id), 0, s.id))
            .collect();
        if candidates.len() < n {
            return Err(ContentError::InsufficientContent {
                requested: n,
                available: candidates.len(),
            });
        }
        // random keys in id order keep the draw a pure function of the rng stream
        for c in candidates.iter_mut() {
            c.1 = rng.random();
        }
        candidates.sort_unstable();

        self.charge(player, scope, n as u32)?;
        Ok(candidates.into_iter().take(n).map(|(_, _, id)| id).collect())
    }
}
