//! The service core: one state machine driven by logged commands.
//!
//! Every state change enters through [`Platform::execute`], which appends the
//! command to the event log before applying it. Replaying the log into a fresh
//! platform rebuilds the same state, including cached responses for request ids.

mod command;
mod error;
mod log;
mod ops;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, NaiveDate, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aggregation::{Aggregator, DatasetRecord, ExportFilter, LabelState};
use crate::content::{ContentStore, Scope, Stopwords, Token};
use crate::engine::{EconomyConfig, Player, PlayerView, Round, Tutorial};
use crate::metrics::{MetricsReport, ReliabilityData};
use crate::types::{Mode, Origin, PlayerId, RoundId, SentenceId, SentenceLabel, TopicId};

pub use command::{
    AssessmentResult, AssessmentView, Command, CritiqueDecision, Envelope, GroupMission,
    PaperEntry, PaperStatus, PurchaseItem, RefreshReport, ResolvedFeedback, Response, RoundView,
    SentenceView, SessionToken, ShownView, SubmitResult, TapResult, TutorialFeedback,
};
pub use error::PlatformError;
pub use log::{Clock, EventLog, FileLog, ManualClock, MemoryLog, NullLog, SystemClock};

#[derive(Debug, Clone)]
pub struct PlatformConfig {
    pub economy: EconomyConfig,
    /// Seed for every random draw; each draw uses its own stream.
    pub seed: u64,
    /// Offset of the timezone that defines day boundaries.
    pub utc_offset_minutes: i32,
    /// Lets rounds draw from the whole pool instead of a topic.
    pub allow_study_scope: bool,
    pub stopwords: Stopwords,
    pub tutorial: Tutorial,
}

impl Default for PlatformConfig {
    fn default() -> Self {
        Self {
            economy: EconomyConfig::default(),
            seed: 0,
            utc_offset_minutes: 0,
            allow_study_scope: false,
            stopwords: Stopwords::default(),
            tutorial: Tutorial::shipped(),
        }
    }
}

/// Per-player record of a played sentence, backing the paper section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PaperRecord {
    round: RoundId,
    mode: Mode,
    label: Option<SentenceLabel>,
    marks: BTreeSet<usize>,
    verdict: crate::engine::SentenceVerdict,
    reward: u64,
    played_at: DateTime<Utc>,
}

#[derive(Debug, Clone)]
struct State {
    content: ContentStore,
    aggregator: Aggregator,
    players: BTreeMap<PlayerId, Player>,
    rounds: BTreeMap<RoundId, Round>,
    sessions: BTreeMap<String, SessionToken>,
    paper: BTreeMap<PlayerId, BTreeMap<SentenceId, PaperRecord>>,
    assessments: BTreeMap<PlayerId, Vec<SentenceId>>,
    coop_waiting: BTreeMap<Scope, Vec<RoundId>>,
    next_player: u64,
    next_round: u64,
    rng_counter: u64,
    today: Option<NaiveDate>,
    seq: u64,
    last_at: Option<DateTime<Utc>>,
    mission_start: u64,
    responses: BTreeMap<String, (Command, Result<Response, PlatformError>)>,
}

pub struct Platform {
    cfg: PlatformConfig,
    state: State,
    log: Box<dyn EventLog>,
    clock: Box<dyn Clock>,
}

/// State that must survive a restart bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub seq: u64,
    pub label_states: Vec<LabelState>,
    pub players: Vec<Player>,
    pub rounds: Vec<Round>,
    pub mission: GroupMission,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicView {
    pub id: TopicId,
    pub name: String,
    pub price: u64,
    pub unlocked: bool,
    pub remaining_quota: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TutorialSentenceView {
    pub text: String,
    pub tokens: Vec<Token>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TutorialLevelView {
    pub level: u32,
    pub objective: String,
    pub dialogue: Vec<String>,
    pub sentences: Vec<TutorialSentenceView>,
}

impl Platform {
    pub fn new(cfg: PlatformConfig, log: Box<dyn EventLog>, clock: Box<dyn Clock>) -> Self {
        let mut content = ContentStore::new(cfg.stopwords.clone());
        content.set_study_quota(cfg.economy.study_daily_quota);
        Self {
            state: State {
                content,
                aggregator: Aggregator::new(),
                players: BTreeMap::new(),
                rounds: BTreeMap::new(),
                sessions: BTreeMap::new(),
                paper: BTreeMap::new(),
                assessments: BTreeMap::new(),
                coop_waiting: BTreeMap::new(),
                next_player: 1,
                next_round: 1,
                rng_counter: 0,
                today: None,
                seq: 0,
                last_at: None,
                mission_start: 0,
                responses: BTreeMap::new(),
            },
            cfg,
            log,
            clock,
        }
    }

    /// A platform without persistence.
    pub fn in_memory(cfg: PlatformConfig, clock: Box<dyn Clock>) -> Self {
        Self::new(cfg, Box::new(NullLog), clock)
    }

    /// Rebuilds state from logged entries, then continues appending to `log`.
    pub fn replay(
        cfg: PlatformConfig,
        entries: impl IntoIterator<Item = Envelope>,
        log: Box<dyn EventLog>,
        clock: Box<dyn Clock>,
    ) -> Result<Self, PlatformError> {
        let mut platform = Self::new(cfg, log, clock);
        for entry in entries {
            if entry.seq != platform.state.seq + 1 {
                return Err(PlatformError::Storage(format!(
                    "log gap: expected entry {}, found {}",
                    platform.state.seq + 1,
                    entry.seq
                )));
            }
            // the original outcome, error or not, is reproduced and cached
            let _ = platform.apply(entry);
        }
        Ok(platform)
    }

    /// Opens a file-backed platform, replaying whatever the file already holds.
    pub fn open(
        cfg: PlatformConfig,
        path: impl AsRef<std::path::Path>,
        clock: Box<dyn Clock>,
    ) -> Result<Self, PlatformError> {
        let (log, entries) = FileLog::open(path).map_err(|e| PlatformError::Storage(e.to_string()))?;
        Self::replay(cfg, entries, Box::new(log), clock)
    }

    pub fn config(&self) -> &PlatformConfig {
        &self.cfg
    }

    /// Logs and applies one command. A repeated `request_id` returns the
    /// first outcome without touching state.
    pub fn execute(
        &mut self,
        request_id: Option<String>,
        command: Command,
    ) -> Result<Response, PlatformError> {
        if let Some(id) = &request_id {
            if let Some((previous, outcome)) = self.state.responses.get(id) {
                if previous != &command {
                    return Err(PlatformError::RequestIdReused(id.clone()));
                }
                return outcome.clone();
            }
        }
        let now = self.clock.now();
        let at = self.state.last_at.map_or(now, |last| last.max(now));
        let entry = Envelope { seq: self.state.seq + 1, at, request_id, command };
        self.log.append(&entry).map_err(|e| PlatformError::Storage(e.to_string()))?;
        self.apply(entry)
    }

    fn apply(&mut self, entry: Envelope) -> Result<Response, PlatformError> {
        self.state.seq = entry.seq;
        self.state.last_at = Some(entry.at);
        let outcome = self.dispatch(entry.at, &entry.command);
        if let Some(id) = entry.request_id {
            self.state.responses.insert(id, (entry.command, outcome.clone()));
        }
        outcome
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    fn local_date(&self, at: DateTime<Utc>) -> NaiveDate {
        (at + Duration::minutes(self.cfg.utc_offset_minutes.into())).date_naive()
    }

    fn rng(&mut self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(self.state.rng_counter);
        self.state.rng_counter += 1;
        rng
    }

    /// The command first executed under `request_id`, if any.
    pub fn command_for(&self, request_id: &str) -> Option<&Command> {
        self.state.responses.get(request_id).map(|(c, _)| c)
    }

    /// Resolves a session token to its player.
    pub fn authenticate(&self, token: &str, now: DateTime<Utc>) -> Result<PlayerId, PlatformError> {
        let session = self
            .state
            .sessions
            .get(token)
            .ok_or_else(|| PlatformError::Unauthorized("unknown token".into()))?;
        if now >= session.expiry {
            return Err(PlatformError::Unauthorized("token expired".into()));
        }
        Ok(session.player_id)
    }

    pub fn player(&self, id: PlayerId) -> Result<&Player, PlatformError> {
        self.state.players.get(&id).ok_or(PlatformError::UnknownPlayer(id))
    }

    pub fn players(&self) -> impl Iterator<Item = &Player> {
        self.state.players.values()
    }

    pub fn player_view(&self, id: PlayerId) -> Result<PlayerView, PlatformError> {
        Ok(PlayerView::of(self.player(id)?, &self.cfg.economy))
    }

    pub fn content(&self) -> &ContentStore {
        &self.state.content
    }

    pub fn aggregator(&self) -> &Aggregator {
        &self.state.aggregator
    }

    pub fn round(&self, id: RoundId) -> Option<&Round> {
        self.state.rounds.get(&id)
    }

    /// The round as its owner sees it.
    pub fn round_view(&self, player: PlayerId, id: RoundId) -> Result<RoundView, PlatformError> {
        let round = self.owned_round(player, id)?;
        Ok(command::round_view(round, self.sentence_views(&round.sentence_ids), self.now()))
    }

    pub fn topics(&self, player: PlayerId) -> Result<Vec<TopicView>, PlatformError> {
        let p = self.player(player)?;
        Ok(self
            .state
            .content
            .topics()
            .map(|t| TopicView {
                id: t.id.clone(),
                name: t.name.clone(),
                price: t.price,
                unlocked: t.unlocked_by_default || p.unlocked_topics.contains(&t.id),
                remaining_quota: self
                    .state
                    .content
                    .remaining_quota(player, &Scope::Topic(t.id.clone()))
                    .unwrap_or(0),
            })
            .collect())
    }

    /// The player's archive of played sentences. With `unresolved_only`, only
    /// entries whose delayed feedback has not been collected are listed.
    pub fn paper(&self, player: PlayerId, unresolved_only: bool) -> Result<Vec<PaperEntry>, PlatformError> {
        self.player(player)?;
        let queued = self.state.aggregator.queued(player);
        let Some(records) = self.state.paper.get(&player) else {
            return Ok(Vec::new());
        };
        Ok(records
            .iter()
            .filter_map(|(&sid, r)| {
                let status = if !queued.contains(&sid) {
                    PaperStatus::Resolved
                } else if self.state.aggregator.is_ready(sid) {
                    PaperStatus::Ready
                } else {
                    PaperStatus::Pending
                };
                if unresolved_only && status == PaperStatus::Resolved {
                    return None;
                }
                Some(PaperEntry {
                    sentence_id: sid,
                    text: self.state.content.sentence(sid).map(|s| s.text.clone()).unwrap_or_default(),
                    mode: r.mode,
                    submitted_label: r.label,
                    marks: r.marks.clone(),
                    status,
                    new_feedback: status == PaperStatus::Ready,
                    sentence_verdict: r.verdict,
                    reward: r.reward,
                    played_at: r.played_at,
                })
            })
            .collect())
    }

    /// A tutorial level without its answers.
    pub fn tutorial_level(&self, level: u32) -> Option<TutorialLevelView> {
        let l = self.cfg.tutorial.level(level)?;
        Some(TutorialLevelView {
            level,
            objective: l.objective.clone(),
            dialogue: l.dialogue.clone(),
            sentences: l
                .sentences
                .iter()
                .map(|s| TutorialSentenceView { text: s.text.clone(), tokens: s.tokens.clone() })
                .collect(),
        })
    }

    pub fn mission(&self) -> GroupMission {
        let goal = self.cfg.economy.group_mission_goal;
        let count = self.state.aggregator.established_count() - self.state.mission_start;
        GroupMission { goal, progress: count.min(goal), completed: count >= goal }
    }

    pub fn export_dataset(&self, filter: &ExportFilter) -> Vec<DatasetRecord> {
        let skill = |p: PlayerId| {
            self.state.players.get(&p).and_then(Player::skill).unwrap_or(0.0)
        };
        self.state.aggregator.export_dataset(&self.state.content, filter, &skill)
    }

    /// Agreement over sentence labels, optionally restricted to one origin.
    pub fn reliability_data(&self, origin: Option<Origin>) -> ReliabilityData {
        let content = &self.state.content;
        ReliabilityData::from_annotations(self.state.aggregator.annotations().iter().filter(|a| {
            origin.is_none_or(|o| content.sentence(a.sentence_id).is_some_and(|s| s.origin == o))
        }))
    }

    pub fn metrics_report(&self, origin: Option<Origin>, resamples: usize, seed: u64, level: f64) -> MetricsReport {
        MetricsReport::compute(&self.reliability_data(origin), resamples, seed, level)
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            seq: self.state.seq,
            label_states: self.state.aggregator.states().cloned().collect(),
            players: self.state.players.values().cloned().collect(),
            rounds: self.state.rounds.values().cloned().collect(),
            mission: self.mission(),
        }
    }

    fn owned_round(&self, player: PlayerId, id: RoundId) -> Result<&Round, PlatformError> {
        match self.state.rounds.get(&id) {
            Some(r) if r.player_id == player => Ok(r),
            _ => Err(crate::engine::EngineError::UnknownRound(id).into()),
        }
    }

    fn sentence_views(&self, ids: &[SentenceId]) -> Vec<SentenceView> {
        ids.iter()
            .filter_map(|id| self.state.content.sentence(*id))
            .map(|s| SentenceView {
                id: s.id,
                text: s.text.clone(),
                tokens: s.tokens.clone(),
                topic: s.topic.clone(),
                outlet: s.outlet.clone(),
            })
            .collect()
    }
}
