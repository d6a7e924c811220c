#![allow(dead_code)]

pub mod alpha;
pub mod durability;
pub mod economy;

use std::collections::BTreeSet;

use chrono::{DateTime, Duration, TimeZone, Utc};
use slant_core::content::{NewSentence, Topic};
use slant_core::engine::{Answer, DemographicSurvey, EconomyConfig};
use slant_core::platform::{
    Command, ManualClock, MemoryLog, Platform, PlatformConfig, PlatformError, Response, RoundView,
    SubmitResult,
};
use slant_core::types::{Leaning, Mode, PlayerId, SentenceId, SentenceLabel, TopicId};

pub fn epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 5, 6, 10, 0, 0).unwrap()
}

pub fn survey() -> DemographicSurvey {
    DemographicSurvey {
        gender: "Woman".into(),
        age: 34,
        education: "Bachelor's degree".into(),
        english: "Proficient".into(),
        leaning: -2,
        news_frequency: "Every day".into(),
        outlets: vec!["The Daily Record".into()],
    }
}

pub struct Harness {
    pub platform: Platform,
    pub clock: ManualClock,
    pub log: MemoryLog,
    tokens: usize,
}

impl Harness {
    pub fn new() -> Self {
        Self::with_config(PlatformConfig::default())
    }

    pub fn with_economy(economy: EconomyConfig) -> Self {
        Self::with_config(PlatformConfig { economy, ..PlatformConfig::default() })
    }

    pub fn with_config(cfg: PlatformConfig) -> Self {
        let clock = ManualClock::new(epoch());
        let log = MemoryLog::new();
        let platform = Platform::new(cfg, Box::new(log.clone()), Box::new(clock.clone()));
        Self { platform, clock, log, tokens: 0 }
    }

    /// Executes one command a second after the previous one.
    pub fn run(&mut self, command: Command) -> Result<Response, PlatformError> {
        self.clock.advance(Duration::seconds(1));
        self.platform.execute(None, command)
    }

    pub fn ok(&mut self, command: Command) -> Response {
        let debug = format!("{command:?}");
        self.run(command).unwrap_or_else(|e| panic!("{debug} failed: {e}"))
    }

    pub fn register(&mut self) -> PlayerId {
        self.tokens += 1;
        let token = format!("token-{}", self.tokens);
        match self.ok(Command::Register { survey: survey(), token }) {
            Response::Registered { player, .. } => player.id,
            other => panic!("unexpected {other:?}"),
        }
    }

    /// Answers every tutorial level with the curated labels.
    pub fn finish_tutorial(&mut self, player: PlayerId) {
        let tutorial = self.platform.config().tutorial.clone();
        for (l, level) in tutorial.levels.iter().enumerate() {
            let answers = level
                .sentences
                .iter()
                .map(|s| Answer { label: s.label, marks: s.biased_tokens.clone() })
                .collect();
            self.ok(Command::TutorialSubmit { player, level: l as u32 + 1, answers });
        }
    }

    pub fn player_ready(&mut self) -> PlayerId {
        let p = self.register();
        self.finish_tutorial(p);
        p
    }

    pub fn topic(&mut self, id: &str, unlocked: bool) {
        let mut topic = Topic::new(id, id);
        if unlocked {
            topic = topic.unlocked();
        }
        self.ok(Command::AddTopic { topic });
    }

    /// `n` baseline sentences in `topic`; every even one is biased with one loaded word.
    pub fn baseline(&mut self, topic: &str, n: usize) -> Vec<SentenceId> {
        let mut csv = String::from("text,label,biased_words,outlet,outlet_leaning,topic,article_url\n");
        for i in 0..n {
            if i % 2 == 0 {
                csv.push_str(&format!(
                    "Report {topic} {i} describes a reckless plan.,biased,reckless,Herald,left,{topic},https://example.org/{topic}/{i}\n"
                ));
            } else {
                csv.push_str(&format!(
                    "Report {topic} {i} describes a budget plan.,not_biased,,Herald,right,{topic},https://example.org/{topic}/{i}\n"
                ));
            }
        }
        match self.ok(Command::ImportBaseline { csv }) {
            Response::Imported(r) => {
                assert!(r.rejected.is_empty(), "{:?}", r.rejected);
                r.ids
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    pub fn fresh(&mut self, topic: &str, n: usize) -> Vec<SentenceId> {
        (0..n)
            .map(|i| {
                let sentence = NewSentence {
                    text: format!("Story {topic} {i} covers a sweeping overhaul."),
                    topic: TopicId::new(topic),
                    article_url: format!("https://example.org/new/{topic}/{i}"),
                    outlet: "Gazette".into(),
                    outlet_leaning: Leaning::Center,
                };
                match self.ok(Command::IngestSentence { sentence }) {
                    Response::SentenceIngested { id } => id,
                    other => panic!("unexpected {other:?}"),
                }
            })
            .collect()
    }

    pub fn start(&mut self, player: PlayerId, mode: Mode, topic: &str) -> RoundView {
        let scope = slant_core::content::Scope::Topic(TopicId::new(topic));
        match self.ok(Command::StartRound { player, mode, scope }) {
            Response::RoundStarted(r) => r,
            other => panic!("unexpected {other:?}"),
        }
    }

    pub fn truth(&self, id: SentenceId) -> Option<SentenceLabel> {
        self.platform.content().sentence(id).and_then(|s| s.baseline_label)
    }

    pub fn truth_words(&self, id: SentenceId) -> BTreeSet<usize> {
        let s = self.platform.content().sentence(id).unwrap();
        s.baseline_biased_words.clone().unwrap_or_default()
    }

    pub fn submit(
        &mut self,
        player: PlayerId,
        round: &RoundView,
        sentence: SentenceId,
        label: SentenceLabel,
        marks: BTreeSet<usize>,
    ) -> SubmitResult {
        let command = Command::SubmitSentence { player, round: round.id, sentence, label: Some(label), marks };
        match self.ok(command) {
            Response::Submitted(r) => r,
            other => panic!("unexpected {other:?}"),
        }
    }

    /// Plays a whole round, answering correctly for the first `correct` sentences.
    pub fn play_round(&mut self, player: PlayerId, round: &RoundView, correct: usize) -> Vec<SubmitResult> {
        let ids: Vec<SentenceId> = round.sentences.iter().map(|s| s.id).collect();
        ids.iter()
            .enumerate()
            .map(|(k, &id)| {
                let truth = self.truth(id).unwrap_or(SentenceLabel::Biased);
                let label = if k < correct { truth } else { flip(truth) };
                self.submit(player, round, id, label, BTreeSet::new())
            })
            .collect()
    }

    pub fn currency(&self, player: PlayerId) -> u64 {
        self.platform.player(player).unwrap().currency
    }
}

pub fn flip(l: SentenceLabel) -> SentenceLabel {
    match l {
        SentenceLabel::Biased => SentenceLabel::NotBiased,
        SentenceLabel::NotBiased => SentenceLabel::Biased,
    }
}

/// The error code a failed command reports.
pub fn code(r: Result<Response, PlatformError>) -> String {
    match r {
        Ok(resp) => panic!("expected an error, got {resp:?}"),
        Err(e) => e.code().to_owned(),
    }
}
