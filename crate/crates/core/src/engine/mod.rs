//! Game rules: modes, feedback scoring, rewards and progression.

mod economy;
mod player;
mod round;
mod scoring;
mod tutorial;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Mode, PlayerId, RoundId, SentenceId, TopicId};

pub use economy::EconomyConfig;
pub use player::{
    DemographicProfile, DemographicSurvey, Education, EnglishLevel, FieldError, Gender,
    NewsFrequency, Player, PlayerView, LEANING_MAX, LEANING_MIN,
};
pub use round::{CoopSettlement, Round, RoundSummary, SentenceOutcome, ShownAnnotation, TappedWord};
pub use scoring::{
    coop_payoff, score_word_submission, sentence_verdict, CoopAnswers, Countdown, SentenceVerdict,
    WordFeedback, WordVerdict,
};
pub use tutorial::{Answer, Tutorial, TutorialLevel, TutorialSentence, DEFAULT_TUTORIAL_JSON};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum EngineError {
    #[error("mode {0:?} is locked")]
    ModeLocked(Mode),
    #[error("topic {0} is locked")]
    TopicLocked(TopicId),
    #[error("sentence {0} is not the current sentence of the round")]
    OutOfOrder(SentenceId),
    #[error("sentence {0} was already scored")]
    AlreadyScored(SentenceId),
    #[error("token {0} is a stopword and cannot be marked")]
    StopwordMarked(usize),
    #[error("token index {0} is out of range")]
    InvalidToken(usize),
    #[error("the round timer has run out")]
    TimeExpired,
    #[error("token {0} was already tapped")]
    AlreadyTapped(usize),
    #[error("players cannot critique their own annotation")]
    SelfCritique,
    #[error("no annotation by player {0} on this sentence")]
    UnknownAnnotation(PlayerId),
    #[error("co-op rounds cover different sentences")]
    SentenceSetMismatch,
    #[error("submission does not match tutorial level content: {0}")]
    WrongLevelContent(String),
    #[error("the tutorial is not complete")]
    TutorialIncomplete,
    #[error("needs {needed} currency, has {available}")]
    InsufficientFunds { needed: u64, available: u64 },
    #[error("already owned")]
    AlreadyOwned,
    #[error("unknown round {0}")]
    UnknownRound(RoundId),
    #[error("round {0} is still active")]
    RoundActive(RoundId),
    #[error("round {0} is finished")]
    RoundFinished(RoundId),
    #[error("round is a {0:?} round")]
    WrongMode(Mode),
    #[error("no assessment in progress")]
    AssessmentNotStarted,
    #[error("assessment already completed")]
    AlreadyAssessed,
    #[error("only {available} sentences with a ground truth, {needed} needed")]
    InsufficientGroundTruth { needed: usize, available: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing content: {0}")]
    MissingContent(String),
}
