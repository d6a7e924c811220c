//! Turning player annotations into sentence and word labels.
//!
//! A sentence is *established* when it comes from the baseline set, or when at
//! least [`SENTENCE_THRESHOLD`] players voted and the vote is not a draw. Word
//! labels use a piecewise rule: with fewer than [`WORD_POOL_CUTOFF`]
//! annotators a word is biased once two players marked it, otherwise once a
//! quarter of the annotators marked it.

mod export;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::content::Sentence;
use crate::types::{Mode, Origin, Phase, PlayerId, SentenceId, SentenceLabel};

pub use export::{write_jsonl, BiasedWord, DatasetRecord, ExportFilter};

/// Minimum number of sentence votes before a majority can establish a label.
pub const SENTENCE_THRESHOLD: u32 = 5;
/// Below this many annotators the absolute word rule applies.
pub const WORD_POOL_CUTOFF: u32 = 8;
/// Marks needed in small pools.
pub const WORD_MIN_MARKS: u32 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum AggregationError {
    #[error("player {0} already annotated sentence {1}")]
    DuplicateAnnotation(PlayerId, SentenceId),
    #[error("annotations are only collected after the tutorial")]
    TutorialIncomplete,
    #[error("unknown sentence {0}")]
    UnknownSentence(SentenceId),
    #[error("token index {0} is out of range")]
    InvalidToken(usize),
    #[error("token {0} is a stopword and cannot be marked")]
    StopwordMarked(usize),
    #[error("{0:?} annotations do not contribute to labels")]
    NonCollectable(Mode),
    #[error("mode {0:?} requires a sentence label")]
    MissingLabel(Mode),
}

/// Majority vote over binary sentence labels. `None` means pending: fewer than
/// five votes, or a draw.
pub fn compute_sentence_label(biased_votes: u32, not_biased_votes: u32) -> Option<SentenceLabel> {
    if biased_votes + not_biased_votes < SENTENCE_THRESHOLD || biased_votes == not_biased_votes {
        None
    } else if biased_votes > not_biased_votes {
        Some(SentenceLabel::Biased)
    } else {
        Some(SentenceLabel::NotBiased)
    }
}

/// Whether a word marked by `mark_count` of `annotator_count` players is biased.
pub fn compute_word_label(mark_count: u32, annotator_count: u32) -> bool {
    debug_assert!(mark_count <= annotator_count);
    if annotator_count < WORD_POOL_CUTOFF {
        mark_count >= WORD_MIN_MARKS
    } else {
        // mark_count / annotator_count >= 1/4, in integers
        4 * u64::from(mark_count) >= u64::from(annotator_count)
    }
}

/// One player's judgment on one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub player_id: PlayerId,
    pub sentence_id: SentenceId,
    /// Absent for Quick Words, which only marks words.
    pub sentence_label: Option<SentenceLabel>,
    pub marked_tokens: BTreeSet<usize>,
    pub mode: Mode,
    pub phase: Phase,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pending,
    Established,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackKind {
    Direct,
    Delayed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthSource {
    Baseline,
    Players,
}

/// The operative label a submission is scored against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truth {
    pub label: SentenceLabel,
    pub biased_tokens: BTreeSet<usize>,
    pub source: TruthSource,
}

/// Per-sentence aggregation state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelState {
    pub sentence_id: SentenceId,
    pub biased_votes: u32,
    pub not_biased_votes: u32,
    pub word_marks: BTreeMap<usize, u32>,
    /// Sentence voters; always `biased_votes + not_biased_votes`.
    pub annotator_count: u32,
    /// Annotations that judged words, including Quick Words taps without a swipe.
    pub word_annotator_count: u32,
    pub status: Status,
    pub resolved_label: Option<SentenceLabel>,
    pub resolved_biased_tokens: Option<BTreeSet<usize>>,
    /// Label of the most recent player majority, kept across a later draw.
    pub last_resolved_label: Option<SentenceLabel>,
    /// Set while further votes have turned an earlier majority into a draw.
    pub tie_flag: bool,
    pub ever_established: bool,
    pub version: u64,
}

impl LabelState {
    pub fn new(sentence: &Sentence) -> Self {
        let mut state = Self {
            sentence_id: sentence.id,
            biased_votes: 0,
            not_biased_votes: 0,
            word_marks: BTreeMap::new(),
            annotator_count: 0,
            word_annotator_count: 0,
            status: Status::Pending,
            resolved_label: None,
            resolved_biased_tokens: None,
            last_resolved_label: None,
            tie_flag: false,
            ever_established: false,
            version: 0,
        };
        state.recompute(sentence);
        state.ever_established = sentence.origin == Origin::Baseline;
        state
    }

    /// Label from player votes alone.
    pub fn player_label(&self) -> Option<SentenceLabel> {
        compute_sentence_label(self.biased_votes, self.not_biased_votes)
    }

    /// Word labels from player marks alone.
    pub fn player_biased_tokens(&self) -> BTreeSet<usize> {
        self.word_marks
            .iter()
            .filter(|&(_, &m)| compute_word_label(m, self.word_annotator_count))
            .map(|(&i, _)| i)
            .collect()
    }

    /// Share of sentence votes behind the resolved label.
    pub fn label_support(&self) -> Option<f64> {
        let label = self.resolved_label?;
        if self.annotator_count == 0 {
            return None;
        }
        let agreeing = match label {
            SentenceLabel::Biased => self.biased_votes,
            SentenceLabel::NotBiased => self.not_biased_votes,
        };
        Some(f64::from(agreeing) / f64::from(self.annotator_count))
    }

    pub fn is_established(&self) -> bool {
        self.status == Status::Established
    }

    fn apply(&mut self, sentence: &Sentence, a: &Annotation) {
        match a.sentence_label {
            Some(SentenceLabel::Biased) => self.biased_votes += 1,
            Some(SentenceLabel::NotBiased) => self.not_biased_votes += 1,
            None => {}
        }
        self.annotator_count = self.biased_votes + self.not_biased_votes;
        if a.mode.has_word_marks() {
            self.word_annotator_count += 1;
            for &i in &a.marked_tokens {
                *self.word_marks.entry(i).or_default() += 1;
            }
        }
        self.version += 1;
        self.recompute(sentence);
    }

    fn recompute(&mut self, sentence: &Sentence) {
        let player_label = self.player_label();
        let is_draw = self.annotator_count >= SENTENCE_THRESHOLD
            && self.biased_votes == self.not_biased_votes;
        if let Some(label) = player_label {
            self.status = Status::Established;
            self.resolved_label = Some(label);
            self.resolved_biased_tokens = Some(self.player_biased_tokens());
            self.last_resolved_label = Some(label);
            self.tie_flag = false;
            self.ever_established = true;
        } else if let (Some(label), Some(words)) =
            (sentence.baseline_label, sentence.baseline_biased_words.as_ref())
        {
            self.status = Status::Established;
            self.resolved_label = Some(label);
            self.resolved_biased_tokens = Some(words.clone());
            self.tie_flag = is_draw && self.last_resolved_label.is_some();
        } else {
            self.status = Status::Pending;
            self.resolved_label = None;
            self.resolved_biased_tokens = None;
            self.tie_flag = is_draw && self.last_resolved_label.is_some();
        }
    }
}

/// The operative truth for a sentence: the baseline label when one exists,
/// otherwise the player-established label.
pub fn ground_truth(sentence: &Sentence, state: Option<&LabelState>) -> Option<Truth> {
    if let (Some(label), Some(words)) =
        (sentence.baseline_label, sentence.baseline_biased_words.as_ref())
    {
        return Some(Truth { label, biased_tokens: words.clone(), source: TruthSource::Baseline });
    }
    let state = state?;
    Some(Truth {
        label: state.resolved_label?,
        biased_tokens: state.resolved_biased_tokens.clone()?,
        source: TruthSource::Players,
    })
}

/// Result of recording one annotation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recorded {
    pub state: LabelState,
    pub feedback: FeedbackKind,
    /// Truth at submission time; present iff feedback is direct.
    pub truth: Option<Truth>,
    /// This annotation moved the sentence from pending to established for the first time.
    pub newly_established: bool,
}

/// A queued annotation whose sentence now has a truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadyFeedback {
    pub annotation: Annotation,
    pub truth: Truth,
}

/// Incremental label store over the stream of collectable annotations.
#[derive(Debug, Clone, Default)]
pub struct Aggregator {
    states: BTreeMap<SentenceId, LabelState>,
    annotations: Vec<Annotation>,
    by_sentence: BTreeMap<SentenceId, Vec<usize>>,
    by_player: BTreeMap<PlayerId, BTreeMap<SentenceId, usize>>,
    delayed: BTreeMap<PlayerId, BTreeSet<SentenceId>>,
    established_count: u64,
}

impl Aggregator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Validates and counts an annotation, returning the updated state and whether
    /// the player gets direct or delayed feedback.
    pub fn record_annotation(
        &mut self,
        sentence: &Sentence,
        tutorial_complete: bool,
        annotation: Annotation,
    ) -> Result<Recorded, AggregationError> {
        if annotation.sentence_id != sentence.id {
            return Err(AggregationError::UnknownSentence(annotation.sentence_id));
        }
        if matches!(annotation.mode, Mode::Tutorial | Mode::Assessment)
            || annotation.phase == Phase::Tutorial
        {
            return Err(AggregationError::NonCollectable(annotation.mode));
        }
        if !tutorial_complete {
            return Err(AggregationError::TutorialIncomplete);
        }
        if annotation.mode.has_sentence_label() && annotation.sentence_label.is_none() {
            return Err(AggregationError::MissingLabel(annotation.mode));
        }
        if self.has_annotated(annotation.player_id, sentence.id) {
            return Err(AggregationError::DuplicateAnnotation(annotation.player_id, sentence.id));
        }
        self.validate_marks(sentence, &annotation.marked_tokens)?;

        let state = self
            .states
            .entry(sentence.id)
            .or_insert_with(|| LabelState::new(sentence));
        let truth = ground_truth(sentence, Some(state));
        let was_established = state.ever_established;
        state.apply(sentence, &annotation);
        let newly_established = !was_established && state.ever_established;
        if newly_established {
            self.established_count += 1;
        }
        let state = state.clone();

        let feedback = if truth.is_some() { FeedbackKind::Direct } else { FeedbackKind::Delayed };
        let mut annotation = annotation;
        annotation.phase = match feedback {
            FeedbackKind::Direct => Phase::Direct,
            FeedbackKind::Delayed => Phase::Delayed,
        };
        if feedback == FeedbackKind::Delayed {
            self.delayed.entry(annotation.player_id).or_default().insert(sentence.id);
        }
        let idx = self.annotations.len();
        self.by_sentence.entry(sentence.id).or_default().push(idx);
        self.by_player.entry(annotation.player_id).or_default().insert(sentence.id, idx);
        self.annotations.push(annotation);

        Ok(Recorded { state, feedback, truth, newly_established })
    }

    /// Checks marks against the sentence without recording anything.
    pub fn validate_marks(
        &self,
        sentence: &Sentence,
        marks: &BTreeSet<usize>,
    ) -> Result<(), AggregationError> {
        for &i in marks {
            match sentence.tokens.get(i) {
                None => return Err(AggregationError::InvalidToken(i)),
                Some(t) if t.is_stopword => return Err(AggregationError::StopwordMarked(i)),
                Some(_) => {}
            }
        }
        Ok(())
    }

    pub fn has_annotated(&self, player: PlayerId, sentence: SentenceId) -> bool {
        self.by_player.get(&player).is_some_and(|m| m.contains_key(&sentence))
    }

    pub fn state(&self, sentence: SentenceId) -> Option<&LabelState> {
        self.states.get(&sentence)
    }

    pub fn states(&self) -> impl Iterator<Item = &LabelState> {
        self.states.values()
    }

    /// Collectable annotations counted for `sentence` so far.
    pub fn annotation_count(&self, sentence: SentenceId) -> u32 {
        self.by_sentence.get(&sentence).map_or(0, |v| v.len() as u32)
    }

    pub fn annotations(&self) -> &[Annotation] {
        &self.annotations
    }

    pub fn annotations_for(&self, sentence: SentenceId) -> impl Iterator<Item = &Annotation> {
        self.by_sentence
            .get(&sentence)
            .into_iter()
            .flatten()
            .map(|&i| &self.annotations[i])
    }

    pub fn annotation_by(&self, player: PlayerId, sentence: SentenceId) -> Option<&Annotation> {
        let idx = *self.by_player.get(&player)?.get(&sentence)?;
        Some(&self.annotations[idx])
    }

    /// Sentences `player` has annotated.
    pub fn annotated_by(&self, player: PlayerId) -> BTreeSet<SentenceId> {
        self.by_player.get(&player).map(|m| m.keys().copied().collect()).unwrap_or_default()
    }

    /// Number of sentences that became established through player votes.
    pub fn established_count(&self) -> u64 {
        self.established_count
    }

    /// Queued delayed-feedback sentences for `player`, ready or not.
    pub fn queued(&self, player: PlayerId) -> BTreeSet<SentenceId> {
        self.delayed.get(&player).cloned().unwrap_or_default()
    }

    fn truth_for(&self, sentence: SentenceId) -> Option<Truth> {
        let state = self.states.get(&sentence)?;
        Some(Truth {
            label: state.resolved_label?,
            biased_tokens: state.resolved_biased_tokens.clone()?,
            source: TruthSource::Players,
        })
    }

    pub fn is_ready(&self, sentence: SentenceId) -> bool {
        self.states.get(&sentence).is_some_and(LabelState::is_established)
    }

    /// Removes and returns queued entries for `player` whose sentence is now
    /// established, or only `only` when given. Entries still pending stay queued.
    pub fn take_ready(
        &mut self,
        player: PlayerId,
        only: Option<SentenceId>,
    ) -> Vec<ReadyFeedback> {
        let Some(queue) = self.delayed.get(&player) else {
            return Vec::new();
        };
        let ready: Vec<SentenceId> = queue
            .iter()
            .copied()
            .filter(|s| only.is_none_or(|o| o == *s))
            .filter(|&s| self.is_ready(s))
            .collect();
        let mut out = Vec::with_capacity(ready.len());
        for s in ready {
            let truth = self.truth_for(s).expect("ready sentence has a truth");
            let annotation = self.annotation_by(player, s).expect("queued annotation").clone();
            out.push(ReadyFeedback { annotation, truth });
        }
        if let Some(queue) = self.delayed.get_mut(&player) {
            for r in &out {
                queue.remove(&r.annotation.sentence_id);
            }
            if queue.is_empty() {
                self.delayed.remove(&player);
            }
        }
        out
    }

    /// Rebuilds a sentence state from scratch using only the annotations accepted by `keep`.
    pub fn rebuild_state(
        &self,
        sentence: &Sentence,
        keep: impl Fn(&Annotation) -> bool,
    ) -> LabelState {
        let mut state = LabelState::new(sentence);
        for a in self.annotations_for(sentence.id).filter(|a| keep(a)) {
            state.apply(sentence, a);
        }
        state
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::content::{tokenize, Sentence};
    use crate::types::{Leaning, TopicId};

    fn sentence(id: u64, baseline: Option<SentenceLabel>) -> Sentence {
        Sentence {
            id: SentenceId(id),
            text: "Trump recently said in his characteristically bizarre syntax".into(),
            tokens: tokenize("Trump recently said in his characteristically bizarre syntax").unwrap(),
            topic: TopicId::new("Politics"),
            article_url: String::new(),
            outlet: "O".into(),
            outlet_leaning: Leaning::Left,
            origin: if baseline.is_some() { Origin::Baseline } else { Origin::New },
            baseline_label: baseline,
            baseline_biased_words: baseline.map(|_| [5, 6].into_iter().collect()),
        }
    }

    fn vote(player: u64, s: &Sentence, label: SentenceLabel, marks: &[usize]) -> Annotation {
        Annotation {
            player_id: PlayerId(player),
            sentence_id: s.id,
            sentence_label: Some(label),
            marked_tokens: marks.iter().copied().collect(),
            mode: Mode::Publish,
            phase: Phase::Direct,
            timestamp: DateTime::<Utc>::UNIX_EPOCH,
        }
    }

    use SentenceLabel::{Biased as B, NotBiased as N};

    #[test]
    fn sentence_label_examples() {
        assert_eq!(compute_sentence_label(3, 2), Some(B));
        assert_eq!(compute_sentence_label(2, 2), None);
        assert_eq!(compute_sentence_label(3, 3), None);
        assert_eq!(compute_sentence_label(1, 4), Some(N));
    }

    #[test]
    fn word_label_examples() {
        assert!(compute_word_label(2, 5));
        assert!(!compute_word_label(2, 12));
        assert!(compute_word_label(2, 8));
        assert!(!compute_word_label(1, 7));
    }

    #[test]
    fn fifth_vote_establishes_with_delayed_feedback() {
        let s = sentence(1, None);
        let mut agg = Aggregator::new();
        for (p, l) in [(1, B), (2, N), (3, B), (4, N)] {
            let r = agg.record_annotation(&s, true, vote(p, &s, l, &[])).unwrap();
            assert_eq!(r.feedback, FeedbackKind::Delayed);
            assert_eq!(r.state.status, Status::Pending);
        }
        let r = agg.record_annotation(&s, true, vote(5, &s, B, &[])).unwrap();
        assert_eq!(r.state.status, Status::Established);
        assert_eq!(r.state.resolved_label, Some(B));
        assert_eq!(r.feedback, FeedbackKind::Delayed);
        assert!(r.newly_established);

        // the sixth vote sees an established truth, and makes a draw
        let r = agg.record_annotation(&s, true, vote(6, &s, N, &[])).unwrap();
        assert_eq!(r.feedback, FeedbackKind::Direct);
        assert_eq!(r.state.status, Status::Pending);
        assert!(r.state.tie_flag);
        assert_eq!(r.state.last_resolved_label, Some(B));
        assert_eq!(agg.established_count(), 1);
    }

    #[test]
    fn baseline_votes_are_direct() {
        let s = sentence(1, Some(N));
        let mut agg = Aggregator::new();
        let r = agg.record_annotation(&s, true, vote(1, &s, B, &[5])).unwrap();
        assert_eq!(r.feedback, FeedbackKind::Direct);
        assert_eq!(r.truth.unwrap().label, N);
        assert_eq!(r.state.status, Status::Established);
        assert!(agg.queued(PlayerId(1)).is_empty());
    }

    #[test]
    fn guards() {
        let s = sentence(1, None);
        let mut agg = Aggregator::new();
        assert_eq!(
            agg.record_annotation(&s, false, vote(1, &s, B, &[])),
            Err(AggregationError::TutorialIncomplete)
        );
        agg.record_annotation(&s, true, vote(1, &s, B, &[])).unwrap();
        assert_eq!(
            agg.record_annotation(&s, true, vote(1, &s, N, &[])),
            Err(AggregationError::DuplicateAnnotation(PlayerId(1), s.id))
        );
        // "in" and "his" are stopwords
        assert_eq!(
            agg.record_annotation(&s, true, vote(2, &s, B, &[3])),
            Err(AggregationError::StopwordMarked(3))
        );
        assert_eq!(
            agg.record_annotation(&s, true, vote(2, &s, B, &[40])),
            Err(AggregationError::InvalidToken(40))
        );
        let mut tut = vote(3, &s, B, &[]);
        tut.mode = Mode::Assessment;
        assert_eq!(
            agg.record_annotation(&s, true, tut),
            Err(AggregationError::NonCollectable(Mode::Assessment))
        );
        assert_eq!(agg.annotation_count(s.id), 1);
    }

    #[test]
    fn delayed_queue_resolves_after_establishment() {
        let s = sentence(1, None);
        let mut agg = Aggregator::new();
        agg.record_annotation(&s, true, vote(1, &s, B, &[6])).unwrap();
        assert!(agg.take_ready(PlayerId(1), None).is_empty());
        assert_eq!(agg.queued(PlayerId(1)).len(), 1);
        for p in 2..=5 {
            agg.record_annotation(&s, true, vote(p, &s, B, &[6])).unwrap();
        }
        let ready = agg.take_ready(PlayerId(1), None);
        assert_eq!(ready.len(), 1);
        assert_eq!(ready[0].truth.label, B);
        assert!(ready[0].truth.biased_tokens.contains(&6));
        assert!(agg.take_ready(PlayerId(1), None).is_empty());
        assert!(agg.queued(PlayerId(1)).is_empty());
    }

    #[test]
    fn quickwords_marks_count_for_words_not_votes() {
        let s = sentence(1, None);
        let mut agg = Aggregator::new();
        let mut a = vote(1, &s, B, &[6]);
        a.sentence_label = None;
        a.mode = Mode::Quickwords;
        let r = agg.record_annotation(&s, true, a).unwrap();
        assert_eq!(r.state.annotator_count, 0);
        assert_eq!(r.state.word_annotator_count, 1);
        assert_eq!(r.state.word_marks.get(&6), Some(&1));
    }

    #[test]
    fn label_support_is_majority_share() {
        let s = sentence(1, None);
        let mut agg = Aggregator::new();
        for (p, l) in [(1, B), (2, B), (3, N), (4, B), (5, B)] {
            agg.record_annotation(&s, true, vote(p, &s, l, &[])).unwrap();
        }
        assert_eq!(agg.state(s.id).unwrap().label_support(), Some(0.8));
    }
}
