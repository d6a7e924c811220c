//! Identifiers and small value types shared across modules.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

macro_rules! numeric_id {
    ($name:ident, $prefix:literal) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

numeric_id!(PlayerId, "p");
numeric_id!(SentenceId, "s");
numeric_id!(RoundId, "r");

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TopicId(pub String);

impl TopicId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TopicId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Binary sentence-level judgment. A right swipe is `Biased`, a left swipe `NotBiased`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SentenceLabel {
    Biased,
    NotBiased,
}

impl SentenceLabel {
    /// Rating code used by agreement statistics (1 = biased).
    pub fn code(self) -> u8 {
        match self {
            SentenceLabel::Biased => 1,
            SentenceLabel::NotBiased => 0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SentenceLabel::Biased => "biased",
            SentenceLabel::NotBiased => "not_biased",
        }
    }
}

impl FromStr for SentenceLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "biased" => Ok(SentenceLabel::Biased),
            "not_biased" => Ok(SentenceLabel::NotBiased),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// Political leaning of a news outlet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Leaning {
    Left,
    Center,
    Right,
}

impl Leaning {
    pub fn as_str(self) -> &'static str {
        match self {
            Leaning::Left => "left",
            Leaning::Center => "center",
            Leaning::Right => "right",
        }
    }
}

impl FromStr for Leaning {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "left" => Ok(Leaning::Left),
            "center" => Ok(Leaning::Center),
            "right" => Ok(Leaning::Right),
            other => Err(format!("unknown outlet leaning {other:?}")),
        }
    }
}

/// Where a sentence came from: the expert-labelled baseline set, or newly added content.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Baseline,
    New,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Baseline => "baseline",
            Origin::New => "new",
        }
    }
}

impl FromStr for Origin {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Origin::Baseline),
            "new" => Ok(Origin::New),
            other => Err(format!("unknown origin {other:?}")),
        }
    }
}

/// Where an annotation was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Context,
    Publish,
    Quickwords,
    Coop,
    Critique,
    Tutorial,
    Assessment,
}

impl Mode {
    /// The five modes a player can start rounds in.
    pub const PLAYABLE: [Mode; 5] = [
        Mode::Context,
        Mode::Publish,
        Mode::Quickwords,
        Mode::Coop,
        Mode::Critique,
    ];

    pub fn is_playable(self) -> bool {
        Self::PLAYABLE.contains(&self)
    }

    /// Whether the mode asks for a sentence-level swipe.
    pub fn has_sentence_label(self) -> bool {
        !matches!(self, Mode::Quickwords)
    }

    /// Whether the mode lets the player mark words.
    pub fn has_word_marks(self) -> bool {
        !matches!(self, Mode::Context)
    }
}

/// Feedback phase of an annotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Tutorial,
    Direct,
    Delayed,
}
