//! Reward magnitudes and progression thresholds.

use serde::{Deserialize, Serialize};

use super::EngineError;

/// Every tunable number of the game economy. Loaded from a flat `key = value`
/// file; unknown keys are rejected, missing keys take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EconomyConfig {
    /// Currency for a sentence verdict that matches the truth.
    pub sentence_reward: u64,
    pub xp_per_hit: u64,
    pub round_bonus: u64,
    /// Correct sentence verdicts in one round needed for the round bonus.
    pub round_bonus_threshold: u32,
    pub word_hit_bonus: u64,
    pub quickwords_initial_seconds: i64,
    pub quickwords_hit_seconds: i64,
    pub quickwords_penalty_seconds: i64,
    pub quickwords_word_reward: u64,
    /// Factor applied to rewards granted through delayed feedback.
    pub delayed_multiplier: u64,
    pub breaking_news_multiplier: u64,
    /// Level n starts at `level_step_xp * n * (n - 1) / 2` XP.
    pub level_step_xp: u64,
    pub topic_price: u64,
    pub quota_refill_price: u64,
    pub quota_refill_amount: u32,
    pub daily_quota: u32,
    pub round_size: usize,
    pub assessment_size: usize,
    pub coop_match_reward: u64,
    pub coop_speed_bonus: u64,
    pub coop_unlock_level: u32,
    pub critique_unlock_level: u32,
    pub study_daily_quota: u32,
    pub breaking_news_size: usize,
    pub group_mission_goal: u64,
    pub session_days: i64,
}

impl Default for EconomyConfig {
    fn default() -> Self {
        Self {
            sentence_reward: 10,
            xp_per_hit: 10,
            round_bonus: 30,
            round_bonus_threshold: 7,
            word_hit_bonus: 2,
            quickwords_initial_seconds: 60,
            quickwords_hit_seconds: 10,
            quickwords_penalty_seconds: 5,
            quickwords_word_reward: 5,
            delayed_multiplier: 2,
            breaking_news_multiplier: 2,
            level_step_xp: 100,
            topic_price: 80,
            quota_refill_price: 20,
            quota_refill_amount: 10,
            daily_quota: 10,
            round_size: 10,
            assessment_size: 20,
            coop_match_reward: 10,
            coop_speed_bonus: 20,
            coop_unlock_level: 3,
            critique_unlock_level: 5,
            study_daily_quota: 30,
            breaking_news_size: 10,
            group_mission_goal: 500,
            session_days: 30,
        }
    }
}

impl EconomyConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, EngineError> {
        let cfg: Self = toml::from_str(s).map_err(|e| EngineError::Config(e.message().to_owned()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    fn validate(&self) -> Result<(), EngineError> {
        let checks = [
            (self.round_size >= 1, "round_size must be at least 1"),
            (self.assessment_size >= 1, "assessment_size must be at least 1"),
            (self.level_step_xp >= 1, "level_step_xp must be at least 1"),
            (self.daily_quota >= 1, "daily_quota must be at least 1"),
            (self.quickwords_initial_seconds > 0, "quickwords_initial_seconds must be positive"),
            (self.quickwords_penalty_seconds >= 0, "quickwords_penalty_seconds must be non-negative"),
            (self.quickwords_hit_seconds >= 0, "quickwords_hit_seconds must be non-negative"),
            (
                self.critique_unlock_level >= self.coop_unlock_level,
                "critique must unlock no earlier than co-op",
            ),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(EngineError::Config((*msg).to_owned())),
            None => Ok(()),
        }
    }

    /// Largest n with `xp >= step * n * (n - 1) / 2`.
    pub fn level_for_xp(&self, xp: u64) -> u32 {
        let mut n: u64 = 1;
        while self.level_step_xp.saturating_mul((n + 1) * n) / 2 <= xp {
            n += 1;
        }
        n as u32
    }
}
