//! Random operation sequences checked against the economy invariants.

use std::collections::{BTreeMap, BTreeSet};

use chrono::Duration;
use super::Harness;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slant_core::content::{Scope, Topic};
use slant_core::engine::{Answer, EconomyConfig, Player, RoundSummary, SentenceVerdict};
use slant_core::platform::{Command, CritiqueDecision, PurchaseItem, Response};
use slant_core::types::{Mode, PlayerId, SentenceLabel, TopicId};

pub const OPS: usize = 10_000;

fn label(rng: &mut ChaCha8Rng) -> SentenceLabel {
    if rng.random_bool(0.5) { SentenceLabel::Biased } else { SentenceLabel::NotBiased }
}

fn setup(economy: EconomyConfig) -> Harness {
    let mut h = Harness::with_economy(economy);
    h.topic("A", true);
    h.topic("B", true);
    h.ok(Command::AddTopic { topic: Topic::new("C", "C").with_price(80) });
    h.baseline("A", 150);
    h.fresh("B", 150);
    h.baseline("C", 60);
    h
}

struct Driver {
    h: Harness,
    rng: ChaCha8Rng,
    players: Vec<PlayerId>,
}

impl Driver {
    fn random_command(&mut self) -> Command {
        let rng = &mut self.rng;
        if self.players.len() < 8 && (self.players.is_empty() || rng.random_bool(0.01)) {
            return Command::Register { survey: super::survey(), token: format!("t{}", self.players.len()) };
        }
        let p = *self.players.choose(rng).unwrap();
        let player = self.h.platform.player(p).unwrap().clone();
        let tutorial = &self.h.platform.config().tutorial;

        match rng.random_range(0..100) {
            0..3 => {
                let topic = TopicId::new(["A", "B", "C"].choose(rng).unwrap().to_string());
                let item = if rng.random_bool(0.5) {
                    PurchaseItem::Topic { topic }
                } else {
                    PurchaseItem::QuotaRefill { topic }
                };
                return Command::Purchase { player: p, item };
            }
            3..8 => return Command::CollectFeedback { player: p, sentence: None },
            _ => {}
        }

        if !player.tutorial_complete {
            let level = tutorial.level(player.tutorial_level).unwrap();
            let answers = level
                .sentences
                .iter()
                .map(|s| Answer {
                    label: if rng.random_bool(0.7) { s.label } else { label(rng) },
                    marks: s.biased_tokens.clone(),
                })
                .collect();
            return Command::TutorialSubmit { player: p, level: player.tutorial_level, answers };
        }
        if !player.assessed && rng.random_bool(0.2) {
            return Command::StartAssessment { player: p };
        }
        if !player.assessed && rng.random_bool(0.5) {
            let answers = (0..20).map(|_| label(rng)).collect();
            return Command::SubmitAssessment { player: p, answers };
        }

        let Some(rid) = player.active_round else {
            let mode = *Mode::PLAYABLE.choose(rng).unwrap();
            let scope = match rng.random_range(0..4) {
                0 => Scope::BreakingNews,
                k => Scope::Topic(TopicId::new(["A", "B", "C"][k - 1])),
            };
            return Command::StartRound { player: p, mode, scope };
        };
        let round = self.h.platform.round(rid).unwrap().clone();
        if rng.random_bool(0.03) {
            return Command::FinishRound { player: p, round: rid };
        }
        let Some(sid) = round.current() else {
            return Command::FinishRound { player: p, round: rid };
        };
        let sentence = self.h.platform.content().sentence(sid).unwrap();
        let words: Vec<usize> = sentence.tokens.iter().filter(|t| !t.is_stopword).map(|t| t.index).collect();
        let marks: BTreeSet<usize> = words.iter().copied().filter(|_| rng.random_bool(0.3)).collect();
        match round.mode {
            Mode::Quickwords if rng.random_bool(0.7) => {
                Command::Tap { player: p, round: rid, sentence: sid, token: *words.choose(rng).unwrap() }
            }
            Mode::Critique => {
                let decision = if rng.random_bool(0.5) {
                    CritiqueDecision::Agree
                } else {
                    CritiqueDecision::Disagree { label: label(rng), marks }
                };
                Command::Critique { player: p, round: rid, sentence: sid, decision }
            }
            _ => Command::SubmitSentence { player: p, round: rid, sentence: sid, label: Some(label(rng)), marks },
        }
    }
}

fn unlock_order_holds(p: &Player) {
    let m = &p.unlocked_modes;
    let needs = [
        (Mode::Publish, Mode::Context),
        (Mode::Context, Mode::Publish),
        (Mode::Quickwords, Mode::Publish),
        (Mode::Coop, Mode::Quickwords),
        (Mode::Critique, Mode::Coop),
    ];
    for (mode, prerequisite) in needs {
        assert!(!m.contains(&mode) || m.contains(&prerequisite), "{mode:?} without {prerequisite:?}: {m:?}");
    }
}

#[derive(Default)]
pub struct Tally {
    delayed_paid: BTreeSet<(PlayerId, slant_core::types::SentenceId)>,
    bonus_rounds: BTreeSet<slant_core::types::RoundId>,
    pub context_hits: usize,
    pub bonuses: usize,
    pub collected: usize,
    pub purchases: usize,
}

fn check_summary(s: &RoundSummary, cfg: &EconomyConfig, breaking: bool, tally: &mut Tally) {
    let multiplier = if breaking { cfg.breaking_news_multiplier } else { 1 };
    if matches!(s.mode, Mode::Context | Mode::Publish) {
        let expected = if s.correct >= cfg.round_bonus_threshold { cfg.round_bonus * multiplier } else { 0 };
        assert_eq!(s.bonus, expected, "{s:?}");
    } else {
        assert_eq!(s.bonus, 0);
    }
    if s.bonus > 0 {
        assert!(tally.bonus_rounds.insert(s.round_id), "second bonus for {:?}", s.round_id);
        tally.bonuses += 1;
    }
}

/// Plays `OPS` random commands and panics on the first broken invariant.
pub fn run(seed: u64, economy: EconomyConfig) -> Tally {
    let cfg = economy.clone();
    let mut d = Driver { h: setup(economy), rng: ChaCha8Rng::seed_from_u64(seed), players: Vec::new() };
    let mut tally = Tally::default();

    for _ in 0..OPS {
        if d.rng.random_bool(0.05) {
            let secs = if d.rng.random_bool(0.1) { 86_400 } else { d.rng.random_range(1..600) };
            d.h.clock.advance(Duration::seconds(secs));
        }
        let command = d.random_command();
        let before: BTreeMap<PlayerId, Player> = d.h.platform.players().map(|p| (p.id, p.clone())).collect();
        let breaking_before: BTreeMap<_, _> = before
            .values()
            .filter_map(|p| p.active_round)
            .map(|r| (r, d.h.platform.round(r).unwrap().is_breaking_news()))
            .collect();
        let outcome = d.h.run(command.clone());

        if let Ok(Response::Registered { player, .. }) = &outcome {
            d.players.push(player.id);
        }
        for p in d.h.platform.players() {
            unlock_order_holds(p);
            assert!(p.skill_hits <= p.skill_total);
            let Some(old) = before.get(&p.id) else { continue };
            assert!(p.xp >= old.xp, "xp fell on {command:?}");
            assert!(old.unlocked_modes.is_subset(&p.unlocked_modes), "mode re-locked on {command:?}");
            if p.currency < old.currency {
                assert!(matches!(command, Command::Purchase { .. }) && outcome.is_ok(), "currency fell on {command:?}");
            }
        }

        match &outcome {
            Ok(Response::Submitted(r)) => {
                let round_id = match &command {
                    Command::SubmitSentence { round, .. } | Command::Critique { round, .. } => *round,
                    _ => unreachable!(),
                };
                let round = d.h.platform.round(round_id).unwrap();
                let breaking = round.is_breaking_news();
                let player = round.player_id;
                if round.mode == Mode::Context && !breaking {
                    let expected = match r.feedback.sentence_verdict {
                        SentenceVerdict::Hit => {
                            tally.context_hits += 1;
                            10
                        }
                        _ => 0,
                    };
                    assert_eq!(r.reward, expected);
                    let bonus = r.summary.as_ref().map_or(0, |s| s.bonus);
                    assert_eq!(d.h.currency(player) - before[&player].currency, r.reward + bonus);
                }
                if let Some(s) = &r.summary {
                    check_summary(s, &cfg, breaking, &mut tally);
                }
            }
            Ok(Response::Finished(s)) => check_summary(s, &cfg, breaking_before[&s.round_id], &mut tally),
            Ok(Response::Tapped(t)) => {
                if let Some(s) = &t.summary {
                    check_summary(s, &cfg, false, &mut tally);
                }
            }
            Ok(Response::Collected(items)) => {
                let Command::CollectFeedback { player, .. } = command else { unreachable!() };
                for f in items {
                    let first = tally.delayed_paid.insert((player, f.sentence_id));
                    let hit = f.feedback.sentence_verdict == SentenceVerdict::Hit;
                    let base = match f.mode {
                        Mode::Context | Mode::Critique => if hit { cfg.sentence_reward } else { 0 },
                        Mode::Publish => (if hit { cfg.sentence_reward } else { 0 }) + f.feedback.word_bonus,
                        Mode::Quickwords => u64::from(f.feedback.word_hits) * cfg.quickwords_word_reward,
                        _ => 0,
                    };
                    assert!(first, "delayed feedback for {:?} delivered twice", f.sentence_id);
                    assert_eq!(f.reward, cfg.delayed_multiplier * base, "{f:?}");
                    tally.collected += 1;
                }
            }
            Ok(Response::Purchased(_)) => tally.purchases += 1,
            _ => {}
        }
    }
    tally
}

