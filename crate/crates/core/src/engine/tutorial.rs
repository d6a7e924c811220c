//! Tutorial levels loaded from a versioned JSON document.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::content::{tokenize_with, Stopwords, Token};
use crate::types::SentenceLabel;

/// The tutorial shipped with the crate.
pub const DEFAULT_TUTORIAL_JSON: &str = include_str!("../../data/tutorial.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct RawTutorial {
    #[serde(default)]
    version: u32,
    levels: Vec<RawLevel>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct RawLevel {
    objective: String,
    dialogue: Vec<String>,
    sentences: Vec<RawSentence>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct RawSentence {
    text: String,
    label: SentenceLabel,
    #[serde(default)]
    biased_words: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TutorialSentence {
    pub text: String,
    pub tokens: Vec<Token>,
    pub label: SentenceLabel,
    pub biased_tokens: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TutorialLevel {
    pub objective: String,
    pub dialogue: Vec<String>,
    pub sentences: Vec<TutorialSentence>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tutorial {
    pub version: u32,
    pub levels: Vec<TutorialLevel>,
}

impl Tutorial {
    /// Parses and resolves biased words to token indices. Every listed word must
    /// occur in its sentence and must not be a stopword.
    pub fn from_json(json: &str, stopwords: &Stopwords) -> Result<Self, EngineError> {
        let raw: RawTutorial =
            serde_json::from_str(json).map_err(|e| EngineError::MissingContent(e.to_string()))?;
        if raw.levels.is_empty() {
            return Err(EngineError::MissingContent("tutorial has no levels".into()));
        }
        let mut levels = Vec::with_capacity(raw.levels.len());
        for (n, level) in raw.levels.into_iter().enumerate() {
            if level.sentences.is_empty() {
                return Err(EngineError::MissingContent(format!("level {} has no sentences", n + 1)));
            }
            let mut sentences = Vec::with_capacity(level.sentences.len());
            for s in level.sentences {
                let tokens = tokenize_with(&s.text, stopwords)
                    .map_err(|e| EngineError::MissingContent(e.to_string()))?;
                let mut biased_tokens = BTreeSet::new();
                for word in &s.biased_words {
                    let t = tokens.iter().find(|t| &t.surface == word).ok_or_else(|| {
                        EngineError::MissingContent(format!("{word:?} not found in {:?}", s.text))
                    })?;
                    if t.is_stopword {
                        return Err(EngineError::MissingContent(format!("{word:?} is a stopword")));
                    }
                    biased_tokens.insert(t.index);
                }
                sentences.push(TutorialSentence { text: s.text, tokens, label: s.label, biased_tokens });
            }
            levels.push(TutorialLevel { objective: level.objective, dialogue: level.dialogue, sentences });
        }
        Ok(Self { version: raw.version, levels })
    }

    pub fn shipped() -> Self {
        Self::from_json(DEFAULT_TUTORIAL_JSON, &Stopwords::default()).expect("shipped tutorial is valid")
    }

    /// 1-based level lookup.
    pub fn level(&self, level: u32) -> Option<&TutorialLevel> {
        self.levels.get(level.checked_sub(1)? as usize)
    }

    pub fn level_count(&self) -> u32 {
        self.levels.len() as u32
    }
}

/// A player's answer to one tutorial or assessment sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub label: SentenceLabel,
    #[serde(default)]
    pub marks: BTreeSet<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_tutorial_has_four_levels_of_ten() {
        let t = Tutorial::shipped();
        assert_eq!(t.level_count(), 4);
        for level in &t.levels {
            assert_eq!(level.sentences.len(), 10);
            assert!(!level.dialogue.is_empty());
            for s in &level.sentences {
                assert_eq!(s.biased_tokens.is_empty(), s.label == SentenceLabel::NotBiased, "{}", s.text);
            }
        }
        assert!(t.level(0).is_none());
        assert!(t.level(5).is_none());
    }

    #[test]
    fn rejects_unresolvable_words() {
        let json = r#"{"levels":[{"objective":"o","dialogue":[],"sentences":[{"text":"A calm day.","label":"biased","biased_words":["stormy"]}]}]}"#;
        assert!(matches!(
            Tutorial::from_json(json, &Stopwords::default()),
            Err(EngineError::MissingContent(_))
        ));
        assert!(Tutorial::from_json("{}", &Stopwords::default()).is_err());
    }
}
