//! Commands, their responses, and the client-facing views they carry.

use std::collections::BTreeSet;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::aggregation::FeedbackKind;
use crate::content::{ImportReport, NewSentence, Scope, Token, Topic};
use crate::engine::{
    DemographicSurvey, PlayerView, Round, RoundSummary, SentenceVerdict, ShownAnnotation,
    WordFeedback, WordVerdict,
};
use crate::types::{Mode, PlayerId, RoundId, SentenceId, SentenceLabel, TopicId};

/// Every state change the platform accepts. Commands are logged verbatim and
/// replayed in order to rebuild state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Command {
    Register { survey: DemographicSurvey, token: String },
    AddTopic { topic: Topic },
    IngestSentence { sentence: NewSentence },
    ImportBaseline { csv: String },
    InjectBreakingNews { sentence_ids: Vec<SentenceId> },
    DailyRefresh { date: NaiveDate },
    StartRound { player: PlayerId, mode: Mode, scope: Scope },
    SubmitSentence {
        player: PlayerId,
        round: RoundId,
        sentence: SentenceId,
        label: Option<SentenceLabel>,
        #[serde(default)]
        marks: BTreeSet<usize>,
    },
    Tap { player: PlayerId, round: RoundId, sentence: SentenceId, token: usize },
    Critique { player: PlayerId, round: RoundId, sentence: SentenceId, decision: CritiqueDecision },
    FinishRound { player: PlayerId, round: RoundId },
    CollectFeedback { player: PlayerId, sentence: Option<SentenceId> },
    Purchase { player: PlayerId, item: PurchaseItem },
    TutorialSubmit { player: PlayerId, level: u32, answers: Vec<crate::engine::Answer> },
    StartAssessment { player: PlayerId },
    SubmitAssessment { player: PlayerId, answers: Vec<SentenceLabel> },
}

impl Command {
    /// The player a command acts for, if any.
    pub fn player(&self) -> Option<PlayerId> {
        match self {
            Command::StartRound { player, .. }
            | Command::SubmitSentence { player, .. }
            | Command::Tap { player, .. }
            | Command::Critique { player, .. }
            | Command::FinishRound { player, .. }
            | Command::CollectFeedback { player, .. }
            | Command::Purchase { player, .. }
            | Command::TutorialSubmit { player, .. }
            | Command::StartAssessment { player }
            | Command::SubmitAssessment { player, .. } => Some(*player),
            _ => None,
        }
    }
}

/// One logged command with its arrival time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub seq: u64,
    pub at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_id: Option<String>,
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum CritiqueDecision {
    Agree,
    Disagree {
        label: SentenceLabel,
        #[serde(default)]
        marks: BTreeSet<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "item", rename_all = "snake_case")]
pub enum PurchaseItem {
    Topic { topic: TopicId },
    QuotaRefill { topic: TopicId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionToken {
    pub token: String,
    pub player_id: PlayerId,
    pub issued_at: DateTime<Utc>,
    pub expiry: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceView {
    pub id: SentenceId,
    pub text: String,
    pub tokens: Vec<Token>,
    pub topic: TopicId,
    pub outlet: String,
}

/// A round as the client sees it: no truths, no other players' identities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundView {
    pub id: RoundId,
    pub mode: Mode,
    pub scope: Scope,
    pub sentences: Vec<SentenceView>,
    pub cursor: usize,
    pub timer_remaining: Option<i64>,
    /// Critique: the annotation to agree or disagree with, per sentence.
    pub shown: Vec<Option<ShownView>>,
    pub finished: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShownView {
    pub label: SentenceLabel,
    pub marks: BTreeSet<usize>,
}

impl From<&ShownAnnotation> for ShownView {
    fn from(s: &ShownAnnotation) -> Self {
        Self { label: s.label, marks: s.marks.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitResult {
    pub sentence_id: SentenceId,
    pub feedback_kind: FeedbackKind,
    pub feedback: WordFeedback,
    pub reward: u64,
    pub xp: u64,
    pub player: PlayerView,
    /// Present when this submission completed the round.
    pub summary: Option<RoundSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TapResult {
    pub sentence_id: SentenceId,
    pub token: usize,
    pub verdict: WordVerdict,
    pub timer_delta: i64,
    pub timer_remaining: i64,
    pub currency_delta: u64,
    /// Present when the tap ran the timer out.
    pub summary: Option<RoundSummary>,
}

/// A delayed verdict that resolved and was collected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedFeedback {
    pub sentence_id: SentenceId,
    pub mode: Mode,
    pub submitted_label: Option<SentenceLabel>,
    pub marks: BTreeSet<usize>,
    pub resolved_label: SentenceLabel,
    pub resolved_biased_tokens: BTreeSet<usize>,
    pub feedback: WordFeedback,
    pub hit: Option<bool>,
    pub reward: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaperStatus {
    /// Waiting for enough annotations.
    Pending,
    /// Resolved, reward not yet collected.
    Ready,
    /// Feedback delivered (directly or by collection).
    Resolved,
}

/// One played sentence in the player's archive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperEntry {
    pub sentence_id: SentenceId,
    pub text: String,
    pub mode: Mode,
    pub submitted_label: Option<SentenceLabel>,
    pub marks: BTreeSet<usize>,
    pub status: PaperStatus,
    pub new_feedback: bool,
    pub sentence_verdict: SentenceVerdict,
    pub reward: u64,
    pub played_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TutorialFeedback {
    pub feedback: Vec<WordFeedback>,
    pub correct: u32,
    pub next_level: Option<u32>,
    pub tutorial_complete: bool,
    pub unlocked: Vec<Mode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentView {
    pub sentences: Vec<SentenceView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentResult {
    pub hits: u32,
    pub total: u32,
    pub skill: f64,
    pub unlocked: Vec<Mode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefreshReport {
    pub date: NaiveDate,
    /// False when the day was already refreshed.
    pub applied: bool,
    pub breaking_news: Vec<SentenceId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupMission {
    pub goal: u64,
    pub progress: u64,
    pub completed: bool,
}

/// The outcome of a successful command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "body", rename_all = "snake_case")]
pub enum Response {
    Registered { session: SessionToken, player: PlayerView },
    TopicAdded { topic: TopicId },
    SentenceIngested { id: SentenceId },
    Imported(ImportReport),
    BreakingNews { sentence_ids: Vec<SentenceId> },
    Refreshed(RefreshReport),
    RoundStarted(RoundView),
    Submitted(SubmitResult),
    Tapped(TapResult),
    Finished(RoundSummary),
    Collected(Vec<ResolvedFeedback>),
    Purchased(PlayerView),
    Tutorial(TutorialFeedback),
    Assessment(AssessmentView),
    Assessed(AssessmentResult),
}

/// Internal accessor used by views that need the round without exposing it.
pub(crate) fn round_view(round: &Round, sentences: Vec<SentenceView>, now: DateTime<Utc>) -> RoundView {
    RoundView {
        id: round.id,
        mode: round.mode,
        scope: round.scope.clone(),
        sentences,
        cursor: round.cursor,
        timer_remaining: round.countdown.map(|c| c.remaining(now)),
        shown: round.shown.iter().map(|s| s.as_ref().map(ShownView::from)).collect(),
        finished: round.is_finished(),
    }
}
