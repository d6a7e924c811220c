use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::scoring::{Countdown, SentenceVerdict, WordFeedback, WordVerdict};
use crate::aggregation::FeedbackKind;
use crate::content::Scope;
use crate::types::{Mode, PlayerId, RoundId, SentenceId, SentenceLabel};

/// What the player submitted for one sentence and what it earned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceOutcome {
    pub sentence_id: SentenceId,
    pub label: Option<SentenceLabel>,
    pub marks: BTreeSet<usize>,
    pub feedback_kind: FeedbackKind,
    pub feedback: WordFeedback,
    pub reward: u64,
    pub submitted_at: DateTime<Utc>,
}

/// Another player's annotation served in Critique.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShownAnnotation {
    pub author: PlayerId,
    pub label: SentenceLabel,
    pub marks: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub id: RoundId,
    pub player_id: PlayerId,
    pub mode: Mode,
    pub scope: Scope,
    pub sentence_ids: Vec<SentenceId>,
    pub cursor: usize,
    pub outcomes: Vec<Option<SentenceOutcome>>,
    pub reward_accumulated: u64,
    pub bonus_paid: bool,
    pub started_at: DateTime<Utc>,
    pub finished_at: Option<DateTime<Utc>>,
    /// Quick Words only.
    pub countdown: Option<Countdown>,
    /// Quick Words taps per sentence with the verdict shown at tap time.
    pub taps: BTreeMap<SentenceId, BTreeMap<usize, WordVerdict>>,
    /// Critique only: one shown annotation per sentence.
    pub shown: Vec<Option<ShownAnnotation>>,
    /// Co-Op only: the round whose sentence list this one mirrors.
    pub coop_partner: Option<RoundId>,
    pub coop_settled: bool,
}

impl Round {
    pub fn new(
        id: RoundId,
        player_id: PlayerId,
        mode: Mode,
        scope: Scope,
        sentence_ids: Vec<SentenceId>,
        started_at: DateTime<Utc>,
    ) -> Self {
        let n = sentence_ids.len();
        Self {
            id,
            player_id,
            mode,
            scope,
            sentence_ids,
            cursor: 0,
            outcomes: vec![None; n],
            reward_accumulated: 0,
            bonus_paid: false,
            started_at,
            finished_at: None,
            countdown: None,
            taps: BTreeMap::new(),
            shown: vec![None; n],
            coop_partner: None,
            coop_settled: false,
        }
    }

    pub fn len(&self) -> usize {
        self.sentence_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentence_ids.is_empty()
    }

    pub fn is_finished(&self) -> bool {
        self.finished_at.is_some()
    }

    pub fn current(&self) -> Option<SentenceId> {
        self.sentence_ids.get(self.cursor).copied()
    }

    pub fn is_breaking_news(&self) -> bool {
        self.scope == Scope::BreakingNews
    }

    /// Direct sentence hits so far.
    pub fn correct_count(&self) -> u32 {
        self.outcomes
            .iter()
            .flatten()
            .filter(|o| o.feedback.sentence_verdict == SentenceVerdict::Hit)
            .count() as u32
    }

    pub fn elapsed_ms(&self) -> Option<i64> {
        self.finished_at.map(|f| (f - self.started_at).num_milliseconds())
    }
}

/// End-of-round overview.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round_id: RoundId,
    pub mode: Mode,
    pub correct: u32,
    pub pending: u32,
    pub missed: u32,
    pub reward_total: u64,
    pub bonus: u64,
    /// Quick Words: every tapped word with its verdict.
    pub tapped: Vec<TappedWord>,
    pub coop_settlement: Option<CoopSettlement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TappedWord {
    pub sentence_id: SentenceId,
    pub index: usize,
    pub word: String,
    pub verdict: WordVerdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoopSettlement {
    pub rounds: (RoundId, RoundId),
    pub players: (PlayerId, PlayerId),
    pub rewards: (u64, u64),
}
