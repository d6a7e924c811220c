//! Feedback verdicts and reward arithmetic. Everything here is pure.

use std::collections::BTreeSet;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::{EconomyConfig, EngineError};
use crate::content::Token;
use crate::types::SentenceLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WordVerdict {
    Hit,
    Wrong,
    Missed,
    /// A stopword between two biased words; shown as correct, never scored.
    StopwordAdjacentOk,
    Pending,
    Untouched,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SentenceVerdict {
    Hit,
    Miss,
    Pending,
}

/// Per-token and sentence-level feedback for one submission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordFeedback {
    pub tokens: Vec<WordVerdict>,
    pub sentence_verdict: SentenceVerdict,
    /// Correct decisions over all decisions; `None` while pending.
    pub combined_accuracy: Option<f64>,
    pub word_hits: u32,
    pub word_bonus: u64,
}

fn check_marks(marks: &BTreeSet<usize>, tokens: &[Token]) -> Result<(), EngineError> {
    for &i in marks {
        match tokens.get(i) {
            None => return Err(EngineError::InvalidToken(i)),
            Some(t) if t.is_stopword => return Err(EngineError::StopwordMarked(i)),
            Some(_) => {}
        }
    }
    Ok(())
}

/// Scores word marks against the biased-word truth.
///
/// `sentence` carries the submitted and true sentence labels when the mode
/// has a sentence decision; Quick Words passes `None`. With `truth = None`
/// the feedback is pending: marked tokens show as pending and nothing is scored.
pub fn score_word_submission(
    marks: &BTreeSet<usize>,
    truth: Option<&BTreeSet<usize>>,
    tokens: &[Token],
    sentence: Option<(SentenceLabel, Option<SentenceLabel>)>,
    cfg: &EconomyConfig,
) -> Result<WordFeedback, EngineError> {
    check_marks(marks, tokens)?;
    let Some(truth) = truth else {
        return Ok(WordFeedback {
            tokens: (0..tokens.len())
                .map(|i| if marks.contains(&i) { WordVerdict::Pending } else { WordVerdict::Untouched })
                .collect(),
            sentence_verdict: SentenceVerdict::Pending,
            combined_accuracy: None,
            word_hits: 0,
            word_bonus: 0,
        });
    };

    let in_truth = |i: usize| truth.contains(&i);
    let verdicts: Vec<WordVerdict> = tokens
        .iter()
        .map(|t| {
            let i = t.index;
            match (marks.contains(&i), in_truth(i)) {
                (true, true) => WordVerdict::Hit,
                (true, false) => WordVerdict::Wrong,
                (false, true) => WordVerdict::Missed,
                (false, false)
                    if t.is_stopword && i > 0 && in_truth(i - 1) && in_truth(i + 1) =>
                {
                    WordVerdict::StopwordAdjacentOk
                }
                (false, false) => WordVerdict::Untouched,
            }
        })
        .collect();

    let hits = verdicts.iter().filter(|v| **v == WordVerdict::Hit).count() as u32;
    let wrong = verdicts.iter().filter(|v| **v == WordVerdict::Wrong).count() as u32;
    // stopwords cannot be marked, so only non-stopword truth tokens are scorable
    let scorable_truth = truth
        .iter()
        .filter(|&&i| tokens.get(i).is_some_and(|t| !t.is_stopword))
        .count() as u32;

    let (sentence_verdict, sentence_correct, sentence_decisions) = match sentence {
        Some((given, Some(true_label))) => {
            let hit = given == true_label;
            (if hit { SentenceVerdict::Hit } else { SentenceVerdict::Miss }, u32::from(hit), 1)
        }
        Some((_, None)) => (SentenceVerdict::Pending, 0, 1),
        None => (SentenceVerdict::Pending, 0, 0),
    };
    let decisions = sentence_decisions + scorable_truth + wrong;
    let combined_accuracy = if decisions == 0 {
        1.0
    } else {
        f64::from(sentence_correct + hits) / f64::from(decisions)
    };

    Ok(WordFeedback {
        tokens: verdicts,
        sentence_verdict,
        combined_accuracy: Some(combined_accuracy),
        word_hits: hits,
        word_bonus: u64::from(hits) * cfg.word_hit_bonus,
    })
}

/// Sentence-only verdict for the Context mode.
pub fn sentence_verdict(given: SentenceLabel, truth: Option<SentenceLabel>) -> SentenceVerdict {
    match truth {
        None => SentenceVerdict::Pending,
        Some(t) if t == given => SentenceVerdict::Hit,
        Some(_) => SentenceVerdict::Miss,
    }
}

/// Quick Words countdown, authoritative on the server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Countdown {
    pub deadline: DateTime<Utc>,
}

impl Countdown {
    pub fn start(now: DateTime<Utc>, cfg: &EconomyConfig) -> Self {
        Self { deadline: now + Duration::seconds(cfg.quickwords_initial_seconds) }
    }

    /// Whole seconds left, never negative.
    pub fn remaining(&self, now: DateTime<Utc>) -> i64 {
        (self.deadline - now).num_seconds().max(0)
    }

    pub fn expired(&self, now: DateTime<Utc>) -> bool {
        now >= self.deadline
    }

    /// Adds (or with a negative delta removes) time; the countdown never goes below `now`.
    pub fn adjust(&mut self, now: DateTime<Utc>, delta_seconds: i64) -> i64 {
        let before = self.remaining(now);
        self.deadline = (self.deadline + Duration::seconds(delta_seconds)).max(now);
        self.remaining(now) - before
    }
}

/// One player's Co-Op answers in sentence order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoopAnswers {
    pub answers: Vec<(SentenceLabel, BTreeSet<usize>)>,
    pub elapsed_ms: i64,
}

/// Per-player Co-Op payouts: a match reward for each sentence where both
/// players agree on the label and marked words, plus a speed bonus for the
/// strictly faster player. Stopword indices are ignored when comparing marks.
pub fn coop_payoff(
    a: &CoopAnswers,
    b: &CoopAnswers,
    is_stopword: &dyn Fn(usize, usize) -> bool,
    cfg: &EconomyConfig,
) -> (u64, u64) {
    let strip = |sentence: usize, marks: &BTreeSet<usize>| -> BTreeSet<usize> {
        marks.iter().copied().filter(|&i| !is_stopword(sentence, i)).collect()
    };
    let matches = a
        .answers
        .iter()
        .zip(&b.answers)
        .enumerate()
        .filter(|(k, ((la, ma), (lb, mb)))| la == lb && strip(*k, ma) == strip(*k, mb))
        .count() as u64;
    let shared = matches * cfg.coop_match_reward;
    let (bonus_a, bonus_b) = match a.elapsed_ms.cmp(&b.elapsed_ms) {
        std::cmp::Ordering::Less => (cfg.coop_speed_bonus, 0),
        std::cmp::Ordering::Greater => (0, cfg.coop_speed_bonus),
        std::cmp::Ordering::Equal => (0, 0),
    };
    (shared + bonus_a, shared + bonus_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::content::tokenize;

    const FIG: &str = "We have on beautiful law, Trump recently said in his characteristically bizarre syntax and diction, repeating the word beautiful.";

    fn idx(tokens: &[Token], word: &str) -> usize {
        tokens.iter().find(|t| t.surface == word).unwrap().index
    }

    #[test]
    fn hit_wrong_missed() {
        let tokens = tokenize(FIG).unwrap();
        let truth: BTreeSet<_> = [idx(&tokens, "bizarre"), idx(&tokens, "characteristically")].into();
        let marks: BTreeSet<_> = [idx(&tokens, "bizarre"), idx(&tokens, "recently")].into();
        let cfg = EconomyConfig::default();
        let fb = score_word_submission(
            &marks,
            Some(&truth),
            &tokens,
            Some((SentenceLabel::NotBiased, Some(SentenceLabel::Biased))),
            &cfg,
        )
        .unwrap();
        assert_eq!(fb.tokens[idx(&tokens, "bizarre")], WordVerdict::Hit);
        assert_eq!(fb.tokens[idx(&tokens, "recently")], WordVerdict::Wrong);
        assert_eq!(fb.tokens[idx(&tokens, "characteristically")], WordVerdict::Missed);
        assert_eq!(fb.sentence_verdict, SentenceVerdict::Miss);
        assert_eq!(fb.word_bonus, 2);
        // (0 + 1) / (1 + 2 + 1)
        assert_eq!(fb.combined_accuracy, Some(0.25));
    }

    #[test]
    fn perfect_and_empty_submissions() {
        let tokens = tokenize(FIG).unwrap();
        let cfg = EconomyConfig::default();
        let correct = Some((SentenceLabel::NotBiased, Some(SentenceLabel::NotBiased)));
        let empty = BTreeSet::new();
        let fb = score_word_submission(&empty, Some(&empty), &tokens, correct, &cfg).unwrap();
        assert_eq!(fb.combined_accuracy, Some(1.0));

        let truth: BTreeSet<_> = [idx(&tokens, "bizarre"), idx(&tokens, "characteristically")].into();
        let correct = Some((SentenceLabel::Biased, Some(SentenceLabel::Biased)));
        let fb = score_word_submission(&truth, Some(&truth), &tokens, correct, &cfg).unwrap();
        assert_eq!(fb.combined_accuracy, Some(1.0));
        assert_eq!(fb.word_bonus, 4);
    }

    #[test]
    fn stopword_between_biased_words() {
        let tokens = tokenize("They appear smart and capable today").unwrap();
        let truth: BTreeSet<_> = [1, 2, 4].into();
        let fb = score_word_submission(&BTreeSet::new(), Some(&truth), &tokens, None, &EconomyConfig::default())
            .unwrap();
        assert_eq!(fb.tokens[3], WordVerdict::StopwordAdjacentOk);
        assert_eq!(fb.tokens[0], WordVerdict::Untouched);
        // 0 correct of 3 truth words; the stopword is not a decision
        assert_eq!(fb.combined_accuracy, Some(0.0));
    }

    #[test]
    fn pending_without_truth_and_stopword_guard() {
        let tokens = tokenize(FIG).unwrap();
        let cfg = EconomyConfig::default();
        let marks: BTreeSet<_> = [idx(&tokens, "bizarre")].into();
        let fb = score_word_submission(&marks, None, &tokens, None, &cfg).unwrap();
        assert_eq!(fb.tokens[idx(&tokens, "bizarre")], WordVerdict::Pending);
        assert_eq!(fb.combined_accuracy, None);
        let the: BTreeSet<_> = [idx(&tokens, "the")].into();
        assert!(matches!(
            score_word_submission(&the, None, &tokens, None, &cfg),
            Err(EngineError::StopwordMarked(_))
        ));
    }

    #[test]
    fn countdown_floors_at_zero() {
        let cfg = EconomyConfig::default();
        let t0 = DateTime::<Utc>::UNIX_EPOCH;
        let mut c = Countdown::start(t0, &cfg);
        assert_eq!(c.remaining(t0), 60);
        assert_eq!(c.adjust(t0, 10), 10);
        assert_eq!(c.remaining(t0), 70);
        let late = t0 + Duration::seconds(67);
        assert_eq!(c.adjust(late, -5), -3);
        assert_eq!(c.remaining(late), 0);
        assert!(c.expired(late));
    }

    #[test]
    fn coop_payoff_table() {
        // oracle: enumerate the 10-sentence payoff table with the stated rule
        let cfg = EconomyConfig::default();
        let no_stop = |_: usize, _: usize| false;
        let answers: Vec<_> = (0..10)
            .map(|k| (if k % 2 == 0 { SentenceLabel::Biased } else { SentenceLabel::NotBiased }, BTreeSet::from([k])))
            .collect();
        let a = CoopAnswers { answers: answers.clone(), elapsed_ms: 50_000 };
        let b = CoopAnswers { answers, elapsed_ms: 70_000 };
        assert_eq!(coop_payoff(&a, &b, &no_stop, &cfg), (120, 100));

        for agree in 0..=10usize {
            let b_answers: Vec<_> = a
                .answers
                .iter()
                .enumerate()
                .map(|(k, (l, m))| if k < agree { (*l, m.clone()) } else { (*l, BTreeSet::from([99])) })
                .collect();
            let b = CoopAnswers { answers: b_answers, elapsed_ms: 70_000 };
            let shared = 10 * agree as u64;
            assert_eq!(coop_payoff(&a, &b, &no_stop, &cfg), (shared + 20, shared));
        }
    }

    #[test]
    fn coop_marks_compare_modulo_stopwords() {
        let cfg = EconomyConfig::default();
        let stop = |_: usize, i: usize| i == 3;
        let a = CoopAnswers { answers: vec![(SentenceLabel::Biased, BTreeSet::from([1, 3]))], elapsed_ms: 1 };
        let b = CoopAnswers { answers: vec![(SentenceLabel::Biased, BTreeSet::from([1]))], elapsed_ms: 1 };
        assert_eq!(coop_payoff(&a, &b, &stop, &cfg), (10, 10));
    }
}
