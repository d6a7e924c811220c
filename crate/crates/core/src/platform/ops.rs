//! Command handlers. Each handler validates before it mutates, so a failed
//! command leaves state untouched.

use std::collections::BTreeSet;

use chrono::{DateTime, NaiveDate, Utc};
use rand::seq::SliceRandom;
use rand::Rng;

use super::command::{
    round_view, AssessmentResult, AssessmentView, CritiqueDecision, PurchaseItem, RefreshReport,
    ResolvedFeedback, Response, SessionToken, SubmitResult, TapResult, TutorialFeedback,
};
use super::{Command, PaperRecord, Platform, PlatformError};
use crate::aggregation::{ground_truth, Annotation, FeedbackKind, Truth};
use crate::content::{ContentError, NewSentence, Scope, SelectionContext, Sentence, Topic};
use crate::engine::{
    coop_payoff, score_word_submission, CoopAnswers, CoopSettlement, Countdown, DemographicSurvey,
    EconomyConfig, EngineError, Player, PlayerView, Round, RoundSummary, SentenceOutcome,
    SentenceVerdict, ShownAnnotation, TappedWord, WordFeedback, WordVerdict,
};
use crate::types::{Mode, Phase, PlayerId, RoundId, SentenceId, SentenceLabel};

type Result<T> = std::result::Result<T, PlatformError>;

/// Currency a scored submission is worth before any multiplier.
fn base_reward(cfg: &EconomyConfig, mode: Mode, fb: &WordFeedback) -> u64 {
    let sentence = if fb.sentence_verdict == SentenceVerdict::Hit { cfg.sentence_reward } else { 0 };
    match mode {
        Mode::Context | Mode::Critique => sentence,
        Mode::Publish => sentence + fb.word_bonus,
        Mode::Quickwords => u64::from(fb.word_hits) * cfg.quickwords_word_reward,
        _ => 0,
    }
}

/// Feedback for one submission against `truth` (pending when absent).
fn feedback(
    cfg: &EconomyConfig,
    sentence: &Sentence,
    mode: Mode,
    label: Option<SentenceLabel>,
    marks: &BTreeSet<usize>,
    truth: Option<&Truth>,
) -> Result<WordFeedback> {
    if mode == Mode::Context {
        let verdict = match (label, truth) {
            (_, None) => SentenceVerdict::Pending,
            (Some(l), Some(t)) if l == t.label => SentenceVerdict::Hit,
            _ => SentenceVerdict::Miss,
        };
        return Ok(WordFeedback {
            tokens: vec![WordVerdict::Untouched; sentence.tokens.len()],
            sentence_verdict: verdict,
            combined_accuracy: match verdict {
                SentenceVerdict::Hit => Some(1.0),
                SentenceVerdict::Miss => Some(0.0),
                SentenceVerdict::Pending => None,
            },
            word_hits: 0,
            word_bonus: 0,
        });
    }
    let sentence_part = label.map(|l| (l, truth.map(|t| t.label)));
    Ok(score_word_submission(
        marks,
        truth.map(|t| &t.biased_tokens),
        &sentence.tokens,
        sentence_part,
        cfg,
    )?)
}

impl Platform {
    pub(super) fn dispatch(&mut self, at: DateTime<Utc>, command: &Command) -> Result<Response> {
        let date = self.local_date(at);
        if !matches!(command, Command::DailyRefresh { .. })
            && self.state.today.is_none_or(|today| date > today)
        {
            self.daily_refresh(date);
        }
        match command {
            Command::Register { survey, token } => self.register(at, survey, token),
            Command::AddTopic { topic } => self.add_topic(topic.clone()),
            Command::IngestSentence { sentence } => self.ingest(sentence.clone()),
            Command::ImportBaseline { csv } => {
                Ok(Response::Imported(self.state.content.import_baseline(csv.as_bytes())?))
            }
            Command::InjectBreakingNews { sentence_ids } => {
                self.state.content.set_breaking_news(sentence_ids.clone())?;
                Ok(Response::BreakingNews { sentence_ids: sentence_ids.clone() })
            }
            Command::DailyRefresh { date } => Ok(Response::Refreshed(self.daily_refresh(*date))),
            Command::StartRound { player, mode, scope } => self.start_round(at, *player, *mode, scope),
            Command::SubmitSentence { player, round, sentence, label, marks } => {
                self.submit_sentence(at, *player, *round, *sentence, *label, marks.clone())
            }
            Command::Tap { player, round, sentence, token } => {
                self.tap(at, *player, *round, *sentence, *token)
            }
            Command::Critique { player, round, sentence, decision } => {
                self.critique(at, *player, *round, *sentence, decision)
            }
            Command::FinishRound { player, round } => {
                let r = self.owned_round(*player, *round)?;
                if r.is_finished() {
                    return Err(EngineError::RoundFinished(*round).into());
                }
                Ok(Response::Finished(self.finish_round(at, *round)))
            }
            Command::CollectFeedback { player, sentence } => self.collect(*player, *sentence),
            Command::Purchase { player, item } => self.purchase(*player, item),
            Command::TutorialSubmit { player, level, answers } => {
                self.tutorial_submit(*player, *level, answers)
            }
            Command::StartAssessment { player } => self.start_assessment(*player),
            Command::SubmitAssessment { player, answers } => self.submit_assessment(*player, answers),
        }
    }

    fn player_mut(&mut self, id: PlayerId) -> Result<&mut Player> {
        self.state.players.get_mut(&id).ok_or(PlatformError::UnknownPlayer(id))
    }

    fn view(&self, id: PlayerId) -> PlayerView {
        PlayerView::of(&self.state.players[&id], &self.cfg.economy)
    }

    fn register(&mut self, at: DateTime<Utc>, survey: &DemographicSurvey, token: &str) -> Result<Response> {
        let demographics = survey.validate().map_err(PlatformError::ValidationFailed)?;
        if token.is_empty() || self.state.sessions.contains_key(token) {
            return Err(PlatformError::Unauthorized("token unavailable".into()));
        }
        let id = PlayerId(self.state.next_player);
        self.state.next_player += 1;
        self.state.players.insert(id, Player::new(id, demographics));
        let session = SessionToken {
            token: token.to_owned(),
            player_id: id,
            issued_at: at,
            expiry: at + chrono::Duration::days(self.cfg.economy.session_days),
        };
        self.state.sessions.insert(token.to_owned(), session.clone());
        Ok(Response::Registered { session, player: self.view(id) })
    }

    fn add_topic(&mut self, topic: Topic) -> Result<Response> {
        let id = topic.id.clone();
        self.state.content.add_topic(topic)?;
        Ok(Response::TopicAdded { topic: id })
    }

    fn ingest(&mut self, sentence: NewSentence) -> Result<Response> {
        Ok(Response::SentenceIngested { id: self.state.content.ingest_sentence(sentence)? })
    }

    /// Resets quotas, rebuilds the Breaking News feed and breaks stale streaks.
    /// Refreshing a day that was already refreshed does nothing.
    pub(super) fn daily_refresh(&mut self, date: NaiveDate) -> RefreshReport {
        if self.state.today.is_some_and(|today| date <= today) {
            return RefreshReport {
                date,
                applied: false,
                breaking_news: self.state.content.breaking_news().to_vec(),
            };
        }
        self.state.today = Some(date);
        self.state.content.reset_quotas();
        let yesterday = date.pred_opt();
        for p in self.state.players.values_mut() {
            if p.last_breaking_news_day.is_none_or(|d| Some(d) < yesterday) {
                p.streak_days = 0;
            }
        }

        // least-annotated sentences that still lack a label
        let mut rng = self.rng();
        let agg = &self.state.aggregator;
        let mut candidates: Vec<(u32, u64, SentenceId)> = self
            .state
            .content
            .sentences()
            .filter(|s| !agg.is_ready(s.id) && s.baseline_label.is_none())
            .map(|s| (agg.annotation_count(s.id), 0, s.id))
            .collect();
        for c in candidates.iter_mut() {
            c.1 = rng.random();
        }
        candidates.sort_unstable();
        let feed: Vec<SentenceId> = candidates
            .into_iter()
            .take(self.cfg.economy.breaking_news_size)
            .map(|c| c.2)
            .collect();
        self.state.content.set_breaking_news(feed.clone()).expect("feed ids exist");
        RefreshReport { date, applied: true, breaking_news: feed }
    }

    fn topic_unlocked(&self, player: &Player, scope: &Scope) -> Result<()> {
        if let Scope::Topic(t) = scope {
            let topic = self
                .state
                .content
                .topic(t)
                .ok_or_else(|| ContentError::UnknownTopic(t.clone()))?;
            if !topic.unlocked_by_default && !player.unlocked_topics.contains(t) {
                return Err(EngineError::TopicLocked(t.clone()).into());
            }
        }
        Ok(())
    }

    fn start_round(&mut self, at: DateTime<Utc>, player: PlayerId, mode: Mode, scope: &Scope) -> Result<Response> {
        let p = self.player(player)?;
        if !mode.is_playable() || !p.unlocked_modes.contains(&mode) {
            return Err(EngineError::ModeLocked(mode).into());
        }
        if let Some(active) = p.active_round {
            let r = &self.state.rounds[&active];
            let expired = r.countdown.is_some_and(|c| c.expired(at));
            if !expired {
                return Err(EngineError::RoundActive(active).into());
            }
            self.finish_round(at, active);
        }
        let p = self.player(player)?;
        match scope {
            Scope::Topic(_) => self.topic_unlocked(p, scope)?,
            Scope::BreakingNews if mode != Mode::Publish => {
                return Err(EngineError::WrongMode(mode).into())
            }
            Scope::BreakingNews => {}
            Scope::Study(_) if !self.cfg.allow_study_scope => {
                return Err(PlatformError::Unauthorized("study sessions are disabled".into()))
            }
            Scope::Study(_) => {}
        }

        let mut seen = self.state.aggregator.annotated_by(player);
        seen.extend(p.assessed_sentences.iter().copied());
        let size = match scope {
            Scope::BreakingNews => {
                let unseen = self
                    .state
                    .content
                    .breaking_news()
                    .iter()
                    .filter(|s| !seen.contains(s))
                    .count();
                unseen.min(self.cfg.economy.breaking_news_size)
            }
            _ => self.cfg.economy.round_size,
        };
        if size == 0 {
            return Err(ContentError::InsufficientContent {
                requested: self.cfg.economy.breaking_news_size,
                available: 0,
            }
            .into());
        }

        let partner = if mode == Mode::Coop { self.find_coop_partner(player, scope, &seen) } else { None };
        let mut rng = self.rng();
        let sentence_ids = match partner {
            Some(other) => {
                let ids = self.state.rounds[&other].sentence_ids.clone();
                self.state.content.charge(player, scope, ids.len() as u32)?;
                ids
            }
            None => {
                let agg = &self.state.aggregator;
                let count = |s: SentenceId| agg.annotation_count(s);
                let critiquable = |s: &Sentence| {
                    mode != Mode::Critique
                        || agg.annotations_for(s.id).any(|a| a.player_id != player && a.sentence_label.is_some())
                };
                let ctx = SelectionContext { seen: &seen, annotation_count: &count, eligible: &critiquable };
                self.state.content.select_sentences(player, scope, size, &ctx, &mut rng)?
            }
        };

        let id = RoundId(self.state.next_round);
        self.state.next_round += 1;
        let mut round = Round::new(id, player, mode, scope.clone(), sentence_ids, at);
        match mode {
            Mode::Quickwords => round.countdown = Some(Countdown::start(at, &self.cfg.economy)),
            Mode::Critique => {
                round.shown = round
                    .sentence_ids
                    .iter()
                    .map(|&s| {
                        let options: Vec<&Annotation> = self
                            .state
                            .aggregator
                            .annotations_for(s)
                            .filter(|a| a.player_id != player && a.sentence_label.is_some())
                            .collect();
                        let a = options[rng.random_range(0..options.len())];
                        Some(ShownAnnotation {
                            author: a.player_id,
                            label: a.sentence_label.expect("filtered"),
                            marks: a.marked_tokens.clone(),
                        })
                    })
                    .collect();
            }
            Mode::Coop => match partner {
                Some(other) => {
                    round.coop_partner = Some(other);
                    self.state.rounds.get_mut(&other).expect("partner round").coop_partner = Some(id);
                    if let Some(q) = self.state.coop_waiting.get_mut(scope) {
                        q.retain(|r| *r != other);
                    }
                }
                None => self.state.coop_waiting.entry(scope.clone()).or_default().push(id),
            },
            _ => {}
        }
        let view = round_view(&round, self.sentence_views(&round.sentence_ids), at);
        self.state.rounds.insert(id, round);
        self.player_mut(player)?.active_round = Some(id);
        Ok(Response::RoundStarted(view))
    }

    fn find_coop_partner(&self, player: PlayerId, scope: &Scope, seen: &BTreeSet<SentenceId>) -> Option<RoundId> {
        let waiting = self.state.coop_waiting.get(scope)?;
        let quota = self.state.content.remaining_quota(player, scope).ok()?;
        waiting.iter().copied().find(|id| {
            let r = &self.state.rounds[id];
            r.player_id != player
                && r.coop_partner.is_none()
                && r.sentence_ids.len() as u32 <= quota
                && r.sentence_ids.iter().all(|s| !seen.contains(s))
        })
    }

    /// Index of `sentence` in an open round, checked against the cursor.
    fn position(&self, round: &Round, sentence: SentenceId, at: DateTime<Utc>) -> Result<usize> {
        if round.is_finished() {
            return Err(EngineError::RoundFinished(round.id).into());
        }
        if round.countdown.is_some_and(|c| c.expired(at)) {
            return Err(EngineError::TimeExpired.into());
        }
        match round.sentence_ids.iter().position(|s| *s == sentence) {
            Some(i) if round.outcomes[i].is_some() => Err(EngineError::AlreadyScored(sentence).into()),
            Some(i) if i == round.cursor => Ok(i),
            _ => Err(EngineError::OutOfOrder(sentence).into()),
        }
    }

    fn submit_sentence(
        &mut self,
        at: DateTime<Utc>,
        player: PlayerId,
        round_id: RoundId,
        sentence: SentenceId,
        label: Option<SentenceLabel>,
        marks: BTreeSet<usize>,
    ) -> Result<Response> {
        let round = self.owned_round(player, round_id)?;
        if round.mode == Mode::Critique {
            return Err(EngineError::WrongMode(round.mode).into());
        }
        let idx = self.position(round, sentence, at)?;
        let result = if round.mode == Mode::Quickwords {
            self.close_quickwords_sentence(at, round_id, idx)?
        } else {
            self.record(at, round_id, idx, label, marks)?
        };
        Ok(Response::Submitted(self.after_submit(at, round_id, result)))
    }

    fn after_submit(&mut self, at: DateTime<Utc>, round_id: RoundId, mut result: SubmitResult) -> SubmitResult {
        let round = &self.state.rounds[&round_id];
        if round.cursor >= round.len() {
            result.summary = Some(self.finish_round(at, round_id));
        }
        result.player = self.view(self.state.rounds[&round_id].player_id);
        result
    }

    /// Records the player's judgment for the sentence at `idx`, scores it and
    /// pays any direct reward. Advances the cursor.
    fn record(
        &mut self,
        at: DateTime<Utc>,
        round_id: RoundId,
        idx: usize,
        label: Option<SentenceLabel>,
        marks: BTreeSet<usize>,
    ) -> Result<SubmitResult> {
        let round = &self.state.rounds[&round_id];
        let (player, mode, sid, breaking) = (round.player_id, round.mode, round.sentence_ids[idx], round.is_breaking_news());
        let sentence = self
            .state
            .content
            .sentence(sid)
            .cloned()
            .ok_or(ContentError::UnknownSentence(sid))?;
        let marks = if mode.has_word_marks() { marks } else { BTreeSet::new() };
        let label = if mode.has_sentence_label() { label } else { None };
        let tutorial_complete = self.player(player)?.tutorial_complete;
        // score first so malformed marks are rejected before anything is stored
        let truth_now = ground_truth(&sentence, self.state.aggregator.state(sid));
        feedback(&self.cfg.economy, &sentence, mode, label, &marks, truth_now.as_ref())?;

        let recorded = self.state.aggregator.record_annotation(
            &sentence,
            tutorial_complete,
            Annotation {
                player_id: player,
                sentence_id: sid,
                sentence_label: label,
                marked_tokens: marks.clone(),
                mode,
                phase: Phase::Direct,
                timestamp: at,
            },
        )?;
        let cfg = &self.cfg.economy;
        let fb = feedback(cfg, &sentence, mode, label, &marks, recorded.truth.as_ref())?;
        let direct = recorded.feedback == FeedbackKind::Direct;
        let hit = fb.sentence_verdict == SentenceVerdict::Hit;
        let (reward, xp) = if direct && mode != Mode::Quickwords {
            let multiplier = if breaking { cfg.breaking_news_multiplier } else { 1 };
            (base_reward(cfg, mode, &fb) * multiplier, if hit { cfg.xp_per_hit } else { 0 })
        } else {
            (0, 0)
        };

        let p = self.state.players.get_mut(&player).expect("round owner exists");
        if direct && mode.has_sentence_label() {
            p.record_verdict(hit);
        }
        p.earn(reward, xp);
        p.refresh_unlocks(cfg);

        self.state.paper.entry(player).or_default().insert(
            sid,
            PaperRecord {
                round: round_id,
                mode,
                label,
                marks: marks.clone(),
                verdict: fb.sentence_verdict,
                reward,
                played_at: at,
            },
        );
        let round = self.state.rounds.get_mut(&round_id).expect("round exists");
        round.outcomes[idx] = Some(SentenceOutcome {
            sentence_id: sid,
            label,
            marks,
            feedback_kind: recorded.feedback,
            feedback: fb.clone(),
            reward,
            submitted_at: at,
        });
        round.reward_accumulated += reward;
        round.cursor = idx + 1;
        Ok(SubmitResult {
            sentence_id: sid,
            feedback_kind: recorded.feedback,
            feedback: fb,
            reward,
            xp,
            player: self.view(player),
            summary: None,
        })
    }

    /// Ends work on the current Quick Words sentence, storing its taps as one annotation.
    fn close_quickwords_sentence(&mut self, at: DateTime<Utc>, round_id: RoundId, idx: usize) -> Result<SubmitResult> {
        let round = &self.state.rounds[&round_id];
        let sid = round.sentence_ids[idx];
        let taps: BTreeSet<usize> = round.taps.get(&sid).map(|t| t.keys().copied().collect()).unwrap_or_default();
        if !taps.is_empty() {
            return self.record(at, round_id, idx, None, taps);
        }
        // nothing tapped: skip without recording a judgment
        let player = round.player_id;
        let n = self.state.content.sentence(sid).map_or(0, |s| s.tokens.len());
        let fb = WordFeedback {
            tokens: vec![WordVerdict::Untouched; n],
            sentence_verdict: SentenceVerdict::Pending,
            combined_accuracy: None,
            word_hits: 0,
            word_bonus: 0,
        };
        let round = self.state.rounds.get_mut(&round_id).expect("round exists");
        round.cursor = idx + 1;
        Ok(SubmitResult {
            sentence_id: sid,
            feedback_kind: FeedbackKind::Direct,
            feedback: fb,
            reward: 0,
            xp: 0,
            player: self.view(player),
            summary: None,
        })
    }

    fn tap(&mut self, at: DateTime<Utc>, player: PlayerId, round_id: RoundId, sid: SentenceId, token: usize) -> Result<Response> {
        let round = self.owned_round(player, round_id)?;
        if round.mode != Mode::Quickwords {
            return Err(EngineError::WrongMode(round.mode).into());
        }
        self.position(round, sid, at)?;
        let sentence = self.state.content.sentence(sid).ok_or(ContentError::UnknownSentence(sid))?;
        match sentence.tokens.get(token) {
            None => return Err(EngineError::InvalidToken(token).into()),
            Some(t) if t.is_stopword => return Err(EngineError::StopwordMarked(token).into()),
            Some(_) => {}
        }
        if round.taps.get(&sid).is_some_and(|t| t.contains_key(&token)) {
            return Err(EngineError::AlreadyTapped(token).into());
        }
        let verdict = match ground_truth(sentence, self.state.aggregator.state(sid)) {
            Some(t) if t.biased_tokens.contains(&token) => WordVerdict::Hit,
            Some(_) => WordVerdict::Wrong,
            None => WordVerdict::Pending,
        };
        let cfg = &self.cfg.economy;
        let (delta, currency) = match verdict {
            WordVerdict::Hit => (cfg.quickwords_hit_seconds, cfg.quickwords_word_reward),
            WordVerdict::Wrong => (-cfg.quickwords_penalty_seconds, 0),
            _ => (0, 0),
        };

        let round = self.state.rounds.get_mut(&round_id).expect("round exists");
        let countdown = round.countdown.as_mut().expect("quick words round has a timer");
        let timer_delta = countdown.adjust(at, delta);
        let timer_remaining = countdown.remaining(at);
        let expired = countdown.expired(at);
        round.taps.entry(sid).or_default().insert(token, verdict);
        round.reward_accumulated += currency;
        self.player_mut(player)?.earn(currency, 0);
        let summary = expired.then(|| self.finish_round(at, round_id));
        Ok(Response::Tapped(TapResult {
            sentence_id: sid,
            token,
            verdict,
            timer_delta,
            timer_remaining,
            currency_delta: currency,
            summary,
        }))
    }

    fn critique(
        &mut self,
        at: DateTime<Utc>,
        player: PlayerId,
        round_id: RoundId,
        sid: SentenceId,
        decision: &CritiqueDecision,
    ) -> Result<Response> {
        let round = self.owned_round(player, round_id)?;
        if round.mode != Mode::Critique {
            return Err(EngineError::WrongMode(round.mode).into());
        }
        let idx = self.position(round, sid, at)?;
        let shown = round.shown[idx]
            .as_ref()
            .ok_or_else(|| EngineError::MissingContent(format!("no annotation shown for {sid}")))?;
        if shown.author == player {
            return Err(EngineError::SelfCritique.into());
        }
        let (label, marks) = match decision {
            CritiqueDecision::Agree => (shown.label, shown.marks.clone()),
            CritiqueDecision::Disagree { label, marks } => (*label, marks.clone()),
        };
        let result = self.record(at, round_id, idx, Some(label), marks)?;
        Ok(Response::Submitted(self.after_submit(at, round_id, result)))
    }

    /// Closes a round: stores pending Quick Words taps, pays the round bonus,
    /// updates the Breaking News streak and settles Co-Op pairs.
    pub(super) fn finish_round(&mut self, at: DateTime<Utc>, round_id: RoundId) -> RoundSummary {
        let round = &self.state.rounds[&round_id];
        if round.mode == Mode::Quickwords && round.cursor < round.len() {
            let idx = round.cursor;
            let sid = round.sentence_ids[idx];
            if round.taps.get(&sid).is_some_and(|t| !t.is_empty()) {
                // the sentence is at the cursor and unscored, so this cannot fail
                let _ = self.record(at, round_id, idx, None, round.taps[&sid].keys().copied().collect());
            }
        }
        let cfg = self.cfg.economy.clone();
        let today = self.local_date(at);
        let round = self.state.rounds.get_mut(&round_id).expect("round exists");
        let player = round.player_id;
        let multiplier = if round.is_breaking_news() { cfg.breaking_news_multiplier } else { 1 };
        let correct = round.correct_count();
        let bonus = if matches!(round.mode, Mode::Context | Mode::Publish)
            && correct >= cfg.round_bonus_threshold
            && !round.bonus_paid
        {
            round.bonus_paid = true;
            cfg.round_bonus * multiplier
        } else {
            0
        };
        round.reward_accumulated += bonus;
        round.finished_at = Some(at);
        let completed_feed = round.is_breaking_news() && round.outcomes.iter().all(Option::is_some);
        let partner = round.coop_partner;

        let p = self.state.players.get_mut(&player).expect("round owner exists");
        p.earn(bonus, 0);
        if p.active_round == Some(round_id) {
            p.active_round = None;
        }
        if completed_feed {
            p.streak_days = match p.last_breaking_news_day {
                Some(d) if d == today => p.streak_days.max(1),
                Some(d) if d.succ_opt() == Some(today) => p.streak_days + 1,
                _ => 1,
            };
            p.last_breaking_news_day = Some(today);
        }
        p.refresh_unlocks(&cfg);

        let coop_settlement = partner.and_then(|other| {
            let o = &self.state.rounds[&other];
            (o.is_finished() && !o.coop_settled).then(|| self.coop_settle(other, round_id).ok()).flatten()
        });
        self.summary(round_id, bonus, coop_settlement)
    }

    fn summary(&self, round_id: RoundId, bonus: u64, coop_settlement: Option<CoopSettlement>) -> RoundSummary {
        let round = &self.state.rounds[&round_id];
        let verdicts = round.outcomes.iter().flatten().map(|o| o.feedback.sentence_verdict);
        let count = |v: SentenceVerdict| verdicts.clone().filter(|x| *x == v).count() as u32;
        let tapped = round
            .taps
            .iter()
            .flat_map(|(sid, taps)| {
                let sentence = self.state.content.sentence(*sid);
                taps.iter().map(move |(&index, &verdict)| TappedWord {
                    sentence_id: *sid,
                    index,
                    word: sentence.and_then(|s| s.surface(index)).unwrap_or_default().to_owned(),
                    verdict,
                })
            })
            .collect();
        RoundSummary {
            round_id,
            mode: round.mode,
            correct: count(SentenceVerdict::Hit),
            pending: if round.mode == Mode::Quickwords { 0 } else { count(SentenceVerdict::Pending) },
            missed: count(SentenceVerdict::Miss),
            reward_total: round.reward_accumulated,
            bonus,
            tapped,
            coop_settlement,
        }
    }

    /// What settling two finished Co-Op rounds would pay, without paying it.
    pub fn coop_quote(&self, a: RoundId, b: RoundId) -> Result<CoopSettlement> {
        let (ra, rb) = match (self.state.rounds.get(&a), self.state.rounds.get(&b)) {
            (Some(ra), Some(rb)) => (ra, rb),
            (None, _) => return Err(EngineError::UnknownRound(a).into()),
            (_, None) => return Err(EngineError::UnknownRound(b).into()),
        };
        if ra.sentence_ids != rb.sentence_ids || ra.mode != Mode::Coop || rb.mode != Mode::Coop {
            return Err(EngineError::SentenceSetMismatch.into());
        }
        for r in [ra, rb] {
            if !r.is_finished() {
                return Err(EngineError::RoundActive(r.id).into());
            }
            if r.coop_settled {
                return Err(EngineError::RoundFinished(r.id).into());
            }
        }
        // only sentences both players answered can match
        let (mut xa, mut xb, mut positions) = (Vec::new(), Vec::new(), Vec::new());
        for (k, (oa, ob)) in ra.outcomes.iter().zip(&rb.outcomes).enumerate() {
            if let (Some(oa), Some(ob)) = (oa, ob) {
                let (Some(la), Some(lb)) = (oa.label, ob.label) else { continue };
                xa.push((la, oa.marks.clone()));
                xb.push((lb, ob.marks.clone()));
                positions.push(ra.sentence_ids[k]);
            }
        }
        let content = &self.state.content;
        let is_stopword = |k: usize, i: usize| {
            content.sentence(positions[k]).is_some_and(|s| s.is_stopword_index(i))
        };
        let rewards = coop_payoff(
            &CoopAnswers { answers: xa, elapsed_ms: ra.elapsed_ms().unwrap_or(i64::MAX) },
            &CoopAnswers { answers: xb, elapsed_ms: rb.elapsed_ms().unwrap_or(i64::MAX) },
            &is_stopword,
            &self.cfg.economy,
        );
        Ok(CoopSettlement { rounds: (a, b), players: (ra.player_id, rb.player_id), rewards })
    }

    /// Pays both players of a finished Co-Op pair.
    fn coop_settle(&mut self, a: RoundId, b: RoundId) -> Result<CoopSettlement> {
        let settlement = self.coop_quote(a, b)?;
        let (pa, pb) = settlement.players;
        let (pay_a, pay_b) = settlement.rewards;
        for (round, pay) in [(a, pay_a), (b, pay_b)] {
            let r = self.state.rounds.get_mut(&round).expect("checked above");
            r.coop_settled = true;
            r.reward_accumulated += pay;
        }
        self.player_mut(pa)?.earn(pay_a, 0);
        self.player_mut(pb)?.earn(pay_b, 0);
        Ok(settlement)
    }

    /// Drains resolved delayed feedback and pays the boosted reward once per sentence.
    fn collect(&mut self, player: PlayerId, only: Option<SentenceId>) -> Result<Response> {
        self.player(player)?;
        let ready = self.state.aggregator.take_ready(player, only);
        let cfg = self.cfg.economy.clone();
        let mut out = Vec::with_capacity(ready.len());
        for r in ready {
            let a = r.annotation;
            let sentence = self.state.content.sentence(a.sentence_id).expect("annotated sentence exists").clone();
            let fb = feedback(&cfg, &sentence, a.mode, a.sentence_label, &a.marked_tokens, Some(&r.truth))?;
            let hit = a.sentence_label.map(|l| l == r.truth.label);
            let p = self.state.players.get_mut(&player).expect("checked above");
            let reward = if p.delayed_paid.insert(a.sentence_id) {
                let reward = base_reward(&cfg, a.mode, &fb) * cfg.delayed_multiplier;
                let xp = if hit == Some(true) { cfg.xp_per_hit } else { 0 };
                if let Some(h) = hit {
                    p.record_verdict(h);
                }
                p.earn(reward, xp);
                reward
            } else {
                0
            };
            p.refresh_unlocks(&cfg);
            if let Some(rec) = self.state.paper.get_mut(&player).and_then(|m| m.get_mut(&a.sentence_id)) {
                rec.verdict = fb.sentence_verdict;
                rec.reward += reward;
            }
            out.push(ResolvedFeedback {
                sentence_id: a.sentence_id,
                mode: a.mode,
                submitted_label: a.sentence_label,
                marks: a.marked_tokens,
                resolved_label: r.truth.label,
                resolved_biased_tokens: r.truth.biased_tokens,
                feedback: fb,
                hit,
                reward,
            });
        }
        Ok(Response::Collected(out))
    }

    fn purchase(&mut self, player: PlayerId, item: &PurchaseItem) -> Result<Response> {
        let p = self.player(player)?;
        let (topic_id, price) = match item {
            PurchaseItem::Topic { topic } | PurchaseItem::QuotaRefill { topic } => {
                let t = self
                    .state
                    .content
                    .topic(topic)
                    .ok_or_else(|| ContentError::UnknownTopic(topic.clone()))?;
                let owned = t.unlocked_by_default || p.unlocked_topics.contains(topic);
                match item {
                    PurchaseItem::Topic { .. } if owned => return Err(EngineError::AlreadyOwned.into()),
                    PurchaseItem::Topic { .. } => (topic.clone(), t.price),
                    _ if !owned => return Err(EngineError::TopicLocked(topic.clone()).into()),
                    _ => (topic.clone(), self.cfg.economy.quota_refill_price),
                }
            }
        };
        if p.currency < price {
            return Err(EngineError::InsufficientFunds { needed: price, available: p.currency }.into());
        }
        let amount = self.cfg.economy.quota_refill_amount;
        let p = self.player_mut(player)?;
        p.currency -= price;
        match item {
            PurchaseItem::Topic { .. } => {
                p.unlocked_topics.insert(topic_id);
            }
            PurchaseItem::QuotaRefill { .. } => {
                self.state.content.add_refill(player, Scope::Topic(topic_id), amount);
            }
        }
        Ok(Response::Purchased(self.view(player)))
    }

    fn tutorial_submit(&mut self, player: PlayerId, level: u32, answers: &[crate::engine::Answer]) -> Result<Response> {
        let p = self.player(player)?;
        if p.tutorial_complete {
            return Err(EngineError::WrongLevelContent("the tutorial is already complete".into()).into());
        }
        if level != p.tutorial_level {
            return Err(EngineError::WrongLevelContent(format!("expected level {}", p.tutorial_level)).into());
        }
        let tl = self
            .cfg
            .tutorial
            .level(level)
            .ok_or_else(|| EngineError::WrongLevelContent(format!("no level {level}")))?;
        if answers.len() != tl.sentences.len() {
            return Err(EngineError::WrongLevelContent(format!(
                "expected {} answers, got {}",
                tl.sentences.len(),
                answers.len()
            ))
            .into());
        }
        let feedback = tl
            .sentences
            .iter()
            .zip(answers)
            .map(|(s, a)| {
                score_word_submission(&a.marks, Some(&s.biased_tokens), &s.tokens, Some((a.label, Some(s.label))), &self.cfg.economy)
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let correct = feedback.iter().filter(|f| f.sentence_verdict == SentenceVerdict::Hit).count() as u32;
        let last = self.cfg.tutorial.level_count();
        let cfg = self.cfg.economy.clone();
        let p = self.player_mut(player)?;
        p.tutorial_level += 1;
        p.tutorial_complete = level >= last;
        let unlocked = p.refresh_unlocks(&cfg);
        Ok(Response::Tutorial(TutorialFeedback {
            feedback,
            correct,
            next_level: (level < last).then_some(level + 1),
            tutorial_complete: level >= last,
            unlocked,
        }))
    }

    fn start_assessment(&mut self, player: PlayerId) -> Result<Response> {
        let p = self.player(player)?;
        if !p.tutorial_complete {
            return Err(EngineError::TutorialIncomplete.into());
        }
        if p.assessed {
            return Err(EngineError::AlreadyAssessed.into());
        }
        if let Some(ids) = self.state.assessments.get(&player) {
            return Ok(Response::Assessment(AssessmentView { sentences: self.sentence_views(ids) }));
        }
        let needed = self.cfg.economy.assessment_size;
        let seen = self.state.aggregator.annotated_by(player);
        let agg = &self.state.aggregator;
        let mut candidates: Vec<SentenceId> = self
            .state
            .content
            .sentences()
            .filter(|s| !seen.contains(&s.id) && ground_truth(s, agg.state(s.id)).is_some())
            .map(|s| s.id)
            .collect();
        if candidates.len() < needed {
            return Err(EngineError::InsufficientGroundTruth { needed, available: candidates.len() }.into());
        }
        let mut rng = self.rng();
        candidates.shuffle(&mut rng);
        candidates.truncate(needed);
        let view = AssessmentView { sentences: self.sentence_views(&candidates) };
        self.state.assessments.insert(player, candidates);
        Ok(Response::Assessment(view))
    }

    fn submit_assessment(&mut self, player: PlayerId, answers: &[SentenceLabel]) -> Result<Response> {
        let p = self.player(player)?;
        if !p.tutorial_complete {
            return Err(EngineError::TutorialIncomplete.into());
        }
        let ids = self.state.assessments.get(&player).ok_or(EngineError::AssessmentNotStarted)?;
        if answers.len() != ids.len() {
            return Err(EngineError::WrongLevelContent(format!(
                "expected {} answers, got {}",
                ids.len(),
                answers.len()
            ))
            .into());
        }
        let (mut hits, mut total) = (0u32, 0u32);
        for (id, answer) in ids.iter().zip(answers) {
            let sentence = self.state.content.sentence(*id).expect("assessment sentence exists");
            if let Some(t) = ground_truth(sentence, self.state.aggregator.state(*id)) {
                total += 1;
                hits += u32::from(t.label == *answer);
            }
        }
        let ids = self.state.assessments.remove(&player).expect("checked above");
        let cfg = self.cfg.economy.clone();
        let p = self.player_mut(player)?;
        p.skill_hits += hits;
        p.skill_total += total;
        p.assessed = true;
        p.assessed_sentences.extend(ids);
        let unlocked = p.refresh_unlocks(&cfg);
        Ok(Response::Assessed(AssessmentResult {
            hits,
            total,
            skill: if total == 0 { 0.0 } else { f64::from(hits) / f64::from(total) },
            unlocked,
        }))
    }
}
