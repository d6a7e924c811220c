//! Player profile, demographics and progression state.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::EconomyConfig;
use crate::types::{Mode, PlayerId, RoundId, SentenceId, TopicId};

/// A survey answer that failed validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub reason: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

macro_rules! survey_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $label:literal $(| $alias:literal)*),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            /// The answer exactly as offered in the survey.
            pub fn label(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($label $(| $alias)* => Ok($name::$variant),)+
                    other => Err(format!("{other:?} is not one of the offered options")),
                }
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.label())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

survey_enum!(Gender {
    Woman => "Woman",
    Man => "Man",
    Diverse => "Diverse",
    Undisclosed => "Prefer not to say",
});

survey_enum!(Education {
    EighthGrade => "8th grade",
    SomeHighSchool => "Some high school",
    HighSchoolGraduate => "High school graduate",
    Vocational => "Vocational or technical school",
    SomeCollege => "Some college",
    Associate => "Associate degree",
    Bachelor => "Bachelor\u{2019}s degree" | "Bachelor's degree",
    GraduateWork => "Graduate work",
    PhD => "Ph.D.",
    Undisclosed => "I prefer not to say",
});

survey_enum!(EnglishLevel {
    Proficient => "Proficient",
    Independent => "Independent",
    Basic => "Basic",
});

survey_enum!(NewsFrequency {
    Never => "Never",
    VeryRarely => "Very rarely",
    MonthlySeveral => "Several times per month",
    WeeklySeveral => "Several times per week",
    Daily => "Every day",
    DailySeveral => "Several times per day",
});

pub const LEANING_MIN: i8 = -10;
pub const LEANING_MAX: i8 = 10;

/// Validated survey answers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemographicProfile {
    pub gender: Gender,
    pub age: u8,
    pub education: Education,
    pub english: EnglishLevel,
    /// -10 (very liberal) to 10 (very conservative).
    pub leaning: i8,
    pub news_frequency: NewsFrequency,
    pub outlets: Vec<String>,
}

impl DemographicProfile {
    /// Leaning shifted onto a 0..=20 scale for reporting.
    pub fn leaning_reporting_scale(&self) -> u8 {
        (self.leaning - LEANING_MIN) as u8
    }
}

/// Survey answers as submitted by a client, before validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemographicSurvey {
    pub gender: String,
    pub age: i64,
    pub education: String,
    pub english: String,
    pub leaning: i64,
    pub news_frequency: String,
    #[serde(default)]
    pub outlets: Vec<String>,
}

impl DemographicSurvey {
    pub fn validate(&self) -> Result<DemographicProfile, FieldError> {
        fn field<T: FromStr<Err = String>>(name: &str, value: &str) -> Result<T, FieldError> {
            value.parse().map_err(|reason| FieldError { field: name.into(), reason })
        }
        let range = |name: &str, v: i64, lo: i64, hi: i64| {
            if (lo..=hi).contains(&v) {
                Ok(v)
            } else {
                Err(FieldError { field: name.into(), reason: format!("{v} is outside {lo}..={hi}") })
            }
        };
        Ok(DemographicProfile {
            gender: field("gender", &self.gender)?,
            age: range("age", self.age, 1, 120)? as u8,
            education: field("education", &self.education)?,
            english: field("english", &self.english)?,
            leaning: range("leaning", self.leaning, LEANING_MIN.into(), LEANING_MAX.into())? as i8,
            news_frequency: field("news_frequency", &self.news_frequency)?,
            outlets: self
                .outlets
                .iter()
                .map(|o| o.trim().to_owned())
                .filter(|o| !o.is_empty())
                .collect(),
        })
    }
}

impl From<&DemographicProfile> for DemographicSurvey {
    fn from(p: &DemographicProfile) -> Self {
        Self {
            gender: p.gender.label().into(),
            age: p.age.into(),
            education: p.education.label().into(),
            english: p.english.label().into(),
            leaning: p.leaning.into(),
            news_frequency: p.news_frequency.label().into(),
            outlets: p.outlets.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Player {
    pub id: PlayerId,
    pub demographics: DemographicProfile,
    pub currency: u64,
    pub xp: u64,
    pub skill_hits: u32,
    pub skill_total: u32,
    /// Next tutorial level to play (1-based).
    pub tutorial_level: u32,
    pub tutorial_complete: bool,
    pub assessed: bool,
    pub unlocked_modes: BTreeSet<Mode>,
    pub unlocked_topics: BTreeSet<TopicId>,
    pub streak_days: u32,
    pub last_breaking_news_day: Option<NaiveDate>,
    /// Sentences whose delayed reward has been paid.
    pub delayed_paid: BTreeSet<SentenceId>,
    /// Sentences served in the assessment; never drawn again for this player.
    pub assessed_sentences: BTreeSet<SentenceId>,
    pub active_round: Option<RoundId>,
}

impl Player {
    pub fn new(id: PlayerId, demographics: DemographicProfile) -> Self {
        Self {
            id,
            demographics,
            currency: 0,
            xp: 0,
            skill_hits: 0,
            skill_total: 0,
            tutorial_level: 1,
            tutorial_complete: false,
            assessed: false,
            unlocked_modes: BTreeSet::new(),
            unlocked_topics: BTreeSet::new(),
            streak_days: 0,
            last_breaking_news_day: None,
            delayed_paid: BTreeSet::new(),
            assessed_sentences: BTreeSet::new(),
            active_round: None,
        }
    }

    pub fn level(&self, cfg: &EconomyConfig) -> u32 {
        cfg.level_for_xp(self.xp)
    }

    pub fn skill(&self) -> Option<f64> {
        (self.skill_total > 0).then(|| f64::from(self.skill_hits) / f64::from(self.skill_total))
    }

    pub fn record_verdict(&mut self, hit: bool) {
        self.skill_total += 1;
        if hit {
            self.skill_hits += 1;
        }
    }

    pub fn earn(&mut self, currency: u64, xp: u64) {
        self.currency += currency;
        self.xp += xp;
    }

    /// Applies level- and assessment-based unlocks in their fixed order:
    /// context/publish, then quick words, then co-op, then critique.
    /// Returns the modes newly unlocked.
    pub fn refresh_unlocks(&mut self, cfg: &EconomyConfig) -> Vec<Mode> {
        let level = self.level(cfg);
        let mut gained = Vec::new();
        let mut unlock = |mode: Mode, modes: &mut BTreeSet<Mode>| {
            if modes.insert(mode) {
                gained.push(mode);
            }
        };
        if self.tutorial_complete {
            unlock(Mode::Context, &mut self.unlocked_modes);
            unlock(Mode::Publish, &mut self.unlocked_modes);
            if self.assessed {
                unlock(Mode::Quickwords, &mut self.unlocked_modes);
                if level >= cfg.coop_unlock_level {
                    unlock(Mode::Coop, &mut self.unlocked_modes);
                }
                if level >= cfg.critique_unlock_level
                    && self.unlocked_modes.contains(&Mode::Coop)
                {
                    unlock(Mode::Critique, &mut self.unlocked_modes);
                }
            }
        }
        gained
    }
}

/// Public view of a player: everything except demographics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerView {
    pub id: PlayerId,
    pub currency: u64,
    pub xp: u64,
    pub level: u32,
    pub skill: Option<f64>,
    pub tutorial_level: u32,
    pub tutorial_complete: bool,
    pub assessed: bool,
    pub unlocked_modes: BTreeSet<Mode>,
    pub unlocked_topics: BTreeSet<TopicId>,
    pub streak_days: u32,
    /// Growth stage of the tutorial plant; never decreases.
    pub plant_stage: u32,
}

impl PlayerView {
    pub fn of(p: &Player, cfg: &EconomyConfig) -> Self {
        let level = p.level(cfg);
        Self {
            id: p.id,
            currency: p.currency,
            xp: p.xp,
            level,
            skill: p.skill(),
            tutorial_level: p.tutorial_level,
            tutorial_complete: p.tutorial_complete,
            assessed: p.assessed,
            unlocked_modes: p.unlocked_modes.clone(),
            unlocked_topics: p.unlocked_topics.clone(),
            streak_days: p.streak_days,
            plant_stage: (p.tutorial_level - 1) + level,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn survey() -> DemographicSurvey {
        DemographicSurvey {
            gender: "Woman".into(),
            age: 34,
            education: "Bachelor's degree".into(),
            english: "Proficient".into(),
            leaning: -3,
            news_frequency: "Every day".into(),
            outlets: vec!["Reuters".into(), "  ".into()],
        }
    }

    #[test]
    fn valid_survey() {
        let p = survey().validate().unwrap();
        assert_eq!(p.education, Education::Bachelor);
        assert_eq!(p.outlets, vec!["Reuters"]);
        assert_eq!(p.leaning_reporting_scale(), 7);
    }

    #[test]
    fn rejects_out_of_range_and_unknown_options() {
        let mut s = survey();
        s.leaning = 15;
        assert_eq!(s.validate().unwrap_err().field, "leaning");
        let mut s = survey();
        s.education = "MBA".into();
        assert_eq!(s.validate().unwrap_err().field, "education");
        let mut s = survey();
        s.gender = "woman".into();
        assert_eq!(s.validate().unwrap_err().field, "gender");
    }

    #[test]
    fn option_lists_match_the_survey() {
        assert_eq!(Gender::ALL.len(), 4);
        assert_eq!(Education::ALL.len(), 10);
        assert_eq!(EnglishLevel::ALL.len(), 3);
        assert_eq!(NewsFrequency::ALL.len(), 6);
        for e in Education::ALL {
            assert_eq!(e.label().parse::<Education>(), Ok(*e));
        }
    }

    #[test]
    fn unlock_order_is_monotone() {
        let cfg = EconomyConfig::default();
        let mut p = Player::new(PlayerId(1), survey().validate().unwrap());
        p.xp = 5000;
        assert!(p.refresh_unlocks(&cfg).is_empty());
        p.tutorial_complete = true;
        assert_eq!(p.refresh_unlocks(&cfg), vec![Mode::Context, Mode::Publish]);
        p.assessed = true;
        assert_eq!(p.refresh_unlocks(&cfg), vec![Mode::Quickwords, Mode::Coop, Mode::Critique]);
    }
}
