//! Synthetic players replaying a crowdsourcing study against the platform.
//!
//! The simulator only issues [`Command`]s, the same way the HTTP service
//! does, so every platform invariant is exercised end to end.

mod corpus;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::content::{Scope, Token, Topic};
use crate::engine::{
    Answer, DemographicSurvey, EconomyConfig, Education, EnglishLevel, Gender, NewsFrequency,
};
use crate::metrics::{
    agreement_breakdown, classification_metrics, AgreementBreakdown, BootstrapResult,
    ClassificationMetrics, ConfusionMatrix, MetricsReport,
};
use crate::platform::{
    Command, EventLog, ManualClock, MemoryLog, Platform, PlatformConfig, PlatformError, Response,
};
use crate::types::{Mode, Origin, PlayerId, SentenceId, SentenceLabel};

pub use corpus::{Gold, Pool, PoolSentence};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("{capacity} draws cannot give {required} annotations (5 per sentence)")]
    InfeasibleConfig { capacity: usize, required: usize },
    #[error("invalid annotator model: {0}")]
    InvalidModel(String),
    #[error("population has {found} models for {expected} players")]
    PopulationSize { expected: usize, found: usize },
    #[error("no gold label for {0:?}")]
    MissingGold(String),
    #[error("stopped after {executed} commands")]
    Interrupted { executed: usize },
    #[error(transparent)]
    Platform(#[from] PlatformError),
}

/// A synthetic annotator. Every decision is a Bernoulli draw from a stream
/// keyed by the sentence, so behavior depends only on (model, seed, sentence).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorModel {
    pub accuracy_sentence: f64,
    pub word_hit_rate: f64,
    pub false_mark_rate: f64,
    pub seed: u64,
}

impl AnnotatorModel {
    pub fn new(
        accuracy_sentence: f64,
        word_hit_rate: f64,
        false_mark_rate: f64,
        seed: u64,
    ) -> Result<Self, SimulationError> {
        for (name, p) in [
            ("accuracy_sentence", accuracy_sentence),
            ("word_hit_rate", word_hit_rate),
            ("false_mark_rate", false_mark_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimulationError::InvalidModel(format!("{name} = {p} is not a probability")));
            }
        }
        Ok(Self { accuracy_sentence, word_hit_rate, false_mark_rate, seed })
    }

    /// Word rates derived from the sentence accuracy.
    pub fn with_accuracy(accuracy: f64, seed: u64) -> Result<Self, SimulationError> {
        Self::new(accuracy, accuracy, (1.0 - accuracy) / 5.0, seed)
    }

    /// Labels a sentence and marks its words. Words are only marked when the
    /// sentence is judged biased; stopwords are never marked.
    pub fn annotate(
        &self,
        key: u64,
        tokens: &[Token],
        gold_label: SentenceLabel,
        gold_words: &BTreeSet<usize>,
    ) -> (SentenceLabel, BTreeSet<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(key);
        // one uniform per decision keeps outcomes monotone in the rates
        let correct = rng.random::<f64>() < self.accuracy_sentence;
        let label = match (correct, gold_label) {
            (true, l) => l,
            (false, SentenceLabel::Biased) => SentenceLabel::NotBiased,
            (false, SentenceLabel::NotBiased) => SentenceLabel::Biased,
        };
        let mut marks = BTreeSet::new();
        for t in tokens {
            let u = rng.random::<f64>();
            let rate = if gold_words.contains(&t.index) { self.word_hit_rate } else { self.false_mark_rate };
            if label == SentenceLabel::Biased && !t.is_stopword && u < rate {
                marks.insert(t.index);
            }
        }
        (label, marks)
    }
}

/// A population where every player has the same accuracy.
pub fn uniform_population(players: usize, accuracy: f64, seed: u64) -> Result<Vec<AnnotatorModel>, SimulationError> {
    (0..players)
        .map(|i| AnnotatorModel::with_accuracy(accuracy, model_seed(seed, i)))
        .collect()
}

/// Accuracies spread evenly over `[low, high]`.
pub fn spread_population(
    players: usize,
    low: f64,
    high: f64,
    seed: u64,
) -> Result<Vec<AnnotatorModel>, SimulationError> {
    (0..players)
        .map(|i| {
            let t = if players > 1 { i as f64 / (players - 1) as f64 } else { 0.5 };
            AnnotatorModel::with_accuracy(low + t * (high - low), model_seed(seed, i))
        })
        .collect()
}

/// The mixed population used when none is given: accuracies 0.7 to 1.0, mean 0.85.
pub fn default_population(players: usize, seed: u64) -> Result<Vec<AnnotatorModel>, SimulationError> {
    spread_population(players, 0.7, 1.0, seed)
}

fn model_seed(seed: u64, player: usize) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(player as u64 + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub players: usize,
    pub rounds_per_player: usize,
    pub sentences_per_round: usize,
    /// Leading rounds drawn from the baseline pool; the rest draw new sentences.
    pub direct_rounds: usize,
    pub seed: u64,
    pub bootstrap_resamples: usize,
    pub level: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            players: 100,
            rounds_per_player: 3,
            sentences_per_round: 10,
            direct_rounds: 2,
            seed: 0,
            bootstrap_resamples: 1000,
            level: 0.95,
        }
    }
}

impl StudyConfig {
    pub fn draws(&self) -> usize {
        self.players * self.rounds_per_player * self.sentences_per_round
    }

    pub fn check(&self, pool_size: usize) -> Result<(), SimulationError> {
        let required = 5 * pool_size;
        if self.draws() < required {
            return Err(SimulationError::InfeasibleConfig { capacity: self.draws(), required });
        }
        Ok(())
    }

    pub fn platform_config(&self) -> PlatformConfig {
        PlatformConfig {
            economy: EconomyConfig {
                round_size: self.sentences_per_round,
                study_daily_quota: (self.rounds_per_player * self.sentences_per_round) as u32,
                ..EconomyConfig::default()
            },
            seed: self.seed,
            allow_study_scope: true,
            ..PlatformConfig::default()
        }
    }
}

/// Logical start time of every simulated study.
pub fn study_epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 3, 4, 9, 0, 0).single().expect("valid date")
}

const TUTORIAL_KEY_BASE: u64 = 1 << 48;

/// Drives one study. Holds the logical clock and the gold labels.
pub struct Simulation {
    config: StudyConfig,
    pool: Pool,
    population: Vec<AnnotatorModel>,
    clock: ManualClock,
    budget: Option<usize>,
    executed: usize,
    gold: BTreeMap<SentenceId, (SentenceLabel, BTreeSet<usize>)>,
}

impl Simulation {
    pub fn new(config: StudyConfig, pool: Pool, population: Vec<AnnotatorModel>) -> Result<Self, SimulationError> {
        config.check(pool.len())?;
        if population.len() != config.players {
            return Err(SimulationError::PopulationSize { expected: config.players, found: population.len() });
        }
        if let Some(s) = pool.sentences.iter().find(|s| s.gold.is_none()) {
            return Err(SimulationError::MissingGold(s.text.clone()));
        }
        Ok(Self {
            config,
            pool,
            population,
            clock: ManualClock::new(study_epoch()),
            budget: None,
            executed: 0,
            gold: BTreeMap::new(),
        })
    }

    /// Stops the run with [`SimulationError::Interrupted`] after `n` commands.
    pub fn with_budget(mut self, n: usize) -> Self {
        self.budget = Some(n);
        self
    }

    pub fn config(&self) -> &StudyConfig {
        &self.config
    }

    /// A fresh platform on this simulation's clock, logging to `log`.
    pub fn platform(&self, log: Box<dyn EventLog>) -> Platform {
        Platform::new(self.config.platform_config(), log, Box::new(self.clock.clone()))
    }

    fn exec(&mut self, platform: &mut Platform, command: Command) -> Result<Response, SimulationError> {
        if self.budget.is_some_and(|b| self.executed >= b) {
            return Err(SimulationError::Interrupted { executed: self.executed });
        }
        self.executed += 1;
        self.clock.advance(Duration::seconds(1));
        Ok(platform.execute(None, command)?)
    }

    /// Runs the whole study on `platform`.
    pub fn run(&mut self, platform: &mut Platform) -> Result<(), SimulationError> {
        self.load_pool(platform)?;
        let mut players = Vec::with_capacity(self.config.players);
        for i in 0..self.config.players {
            players.push(self.play(platform, i)?);
        }
        for p in players {
            self.exec(platform, Command::CollectFeedback { player: p, sentence: None })?;
        }
        Ok(())
    }

    fn load_pool(&mut self, platform: &mut Platform) -> Result<(), SimulationError> {
        for topic in self.pool.topics() {
            let t = Topic::new(topic.as_str(), topic.as_str()).unlocked();
            self.exec(platform, Command::AddTopic { topic: t })?;
        }
        let Response::Imported(report) =
            self.exec(platform, Command::ImportBaseline { csv: self.pool.baseline_csv() })?
        else {
            unreachable!("import answers with a report")
        };
        if let Some(r) = report.rejected.first() {
            return Err(PlatformError::Content(r.error.clone()).into());
        }
        let mut ids = report.ids.into_iter();
        for s in self.pool.sentences.clone() {
            let id = match s.origin {
                Origin::Baseline => ids.next().expect("one id per imported row"),
                Origin::New => {
                    let sentence = crate::content::NewSentence {
                        text: s.text.clone(),
                        topic: s.topic.clone(),
                        article_url: s.article_url.clone(),
                        outlet: s.outlet.clone(),
                        outlet_leaning: s.outlet_leaning,
                    };
                    match self.exec(platform, Command::IngestSentence { sentence })? {
                        Response::SentenceIngested { id } => id,
                        _ => unreachable!("ingest answers with an id"),
                    }
                }
            };
            let gold = s.gold.expect("checked in new");
            let sentence = platform.content().sentence(id).expect("just stored");
            let words = platform
                .content()
                .resolve_biased_words(&sentence.tokens, gold.biased_words.iter().map(String::as_str))
                .map_err(PlatformError::from)?;
            self.gold.insert(id, (gold.label, words));
        }
        Ok(())
    }

    fn survey(&self, i: usize) -> DemographicSurvey {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(i as u64 + (1 << 40));
        let pick = |rng: &mut ChaCha8Rng, n: usize| rng.random_range(0..n);
        DemographicSurvey {
            gender: Gender::ALL[pick(&mut rng, Gender::ALL.len())].label().into(),
            age: rng.random_range(18..70),
            education: Education::ALL[pick(&mut rng, Education::ALL.len())].label().into(),
            english: EnglishLevel::ALL[pick(&mut rng, EnglishLevel::ALL.len())].label().into(),
            leaning: rng.random_range(-10..=10),
            news_frequency: NewsFrequency::ALL[pick(&mut rng, NewsFrequency::ALL.len())].label().into(),
            outlets: Vec::new(),
        }
    }

    fn play(&mut self, platform: &mut Platform, i: usize) -> Result<PlayerId, SimulationError> {
        let model = self.population[i];
        let token = format!("sim-{}-{i}", self.config.seed);
        let Response::Registered { player, .. } =
            self.exec(platform, Command::Register { survey: self.survey(i), token })?
        else {
            unreachable!("register answers with a session")
        };
        let player = player.id;

        let tutorial = platform.config().tutorial.clone();
        for (l, level) in tutorial.levels.iter().enumerate() {
            let answers = level
                .sentences
                .iter()
                .enumerate()
                .map(|(j, s)| {
                    let key = TUTORIAL_KEY_BASE + (l as u64) * 1000 + j as u64;
                    let (label, marks) = model.annotate(key, &s.tokens, s.label, &s.biased_tokens);
                    Answer { label, marks }
                })
                .collect();
            self.exec(platform, Command::TutorialSubmit { player, level: l as u32 + 1, answers })?;
        }

        for r in 0..self.config.rounds_per_player {
            let origin = if r < self.config.direct_rounds { Origin::Baseline } else { Origin::New };
            let command = Command::StartRound { player, mode: Mode::Publish, scope: Scope::Study(Some(origin)) };
            let Response::RoundStarted(round) = self.exec(platform, command)? else {
                unreachable!("start answers with a round")
            };
            for s in &round.sentences {
                let (gold_label, gold_words) = &self.gold[&s.id];
                let (label, marks) = model.annotate(s.id.0, &s.tokens, *gold_label, gold_words);
                self.exec(
                    platform,
                    Command::SubmitSentence { player, round: round.id, sentence: s.id, label: Some(label), marks },
                )?;
            }
        }
        Ok(player)
    }

    pub fn gold(&self) -> &BTreeMap<SentenceId, (SentenceLabel, BTreeSet<usize>)> {
        &self.gold
    }

    pub fn report(&self, platform: &Platform) -> (StudyReport, Option<BootstrapResult>) {
        StudyReport::compute(platform, &self.gold, &self.config)
    }
}

/// Outcome of a finished study.
pub struct Study {
    pub platform: Platform,
    pub report: StudyReport,
    pub histogram: Option<BootstrapResult>,
    pub gold: BTreeMap<SentenceId, (SentenceLabel, BTreeSet<usize>)>,
}

/// Runs a complete study in memory.
pub fn run_study(config: StudyConfig, pool: Pool, population: Vec<AnnotatorModel>) -> Result<Study, SimulationError> {
    let mut sim = Simulation::new(config, pool, population)?;
    let mut platform = sim.platform(Box::new(MemoryLog::new()));
    sim.run(&mut platform)?;
    let (report, histogram) = sim.report(&platform);
    Ok(Study { platform, report, histogram, gold: sim.gold })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldComparison {
    pub confusion: ConfusionMatrix,
    pub metrics: ClassificationMetrics,
    /// Gold first, dataset second.
    pub agreement_baseline: Option<AgreementBreakdown>,
    pub agreement_new: Option<AgreementBreakdown>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EconomyTotals {
    pub currency: u64,
    pub xp: u64,
    pub skill_hits: u64,
    pub skill_total: u64,
    pub delayed_rewards_paid: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub players: usize,
    pub annotations: usize,
    pub sentences: usize,
    pub established: usize,
    /// Established once, currently tied.
    pub tied: usize,
    pub min_annotations: u32,
    pub max_annotations: u32,
    pub annotation_counts: BTreeMap<SentenceId, u32>,
    pub alpha: MetricsReport,
    pub alpha_baseline: MetricsReport,
    pub alpha_new: MetricsReport,
    pub gold: Option<GoldComparison>,
    pub economy: EconomyTotals,
}

impl StudyReport {
    /// Summarizes a platform's store. `gold` may be empty.
    pub fn compute(
        platform: &Platform,
        gold: &BTreeMap<SentenceId, (SentenceLabel, BTreeSet<usize>)>,
        config: &StudyConfig,
    ) -> (Self, Option<BootstrapResult>) {
        let agg = platform.aggregator();
        let content = platform.content();
        let annotation_counts: BTreeMap<SentenceId, u32> =
            content.sentences().map(|s| (s.id, agg.annotation_count(s.id))).collect();
        // player votes only; baseline sentences start out established on their expert label
        let player_labels: BTreeMap<SentenceId, (SentenceLabel, Origin)> = content
            .sentences()
            .filter_map(|s| Some((s.id, (agg.state(s.id)?.player_label()?, s.origin))))
            .collect();
        // five binary votes cannot tie, so reaching five means the label was established once
        let established = content
            .sentences()
            .filter(|s| agg.state(s.id).is_some_and(|st| st.annotator_count >= 5))
            .count();
        let tied = established.saturating_sub(player_labels.len());

        let (b, seed, level) = (config.bootstrap_resamples, config.seed, config.level);
        let (alpha, histogram) = MetricsReport::compute_with_bootstrap(&platform.reliability_data(None), b, seed, level);
        let alpha_baseline = MetricsReport::compute(&platform.reliability_data(Some(Origin::Baseline)), b, seed, level);
        let alpha_new = MetricsReport::compute(&platform.reliability_data(Some(Origin::New)), b, seed, level);

        let gold = (!gold.is_empty()).then(|| {
            let dataset = &player_labels;
            let pairs = |origin: Option<Origin>| {
                let mut g = BTreeMap::new();
                let mut d = BTreeMap::new();
                for (id, (label, o)) in dataset {
                    if origin.is_none_or(|x| x == *o) {
                        if let Some((gl, _)) = gold.get(id) {
                            g.insert(*id, *gl);
                            d.insert(*id, *label);
                        }
                    }
                }
                (g, d)
            };
            let (g, d) = pairs(None);
            let confusion = ConfusionMatrix::from_labels(&g, &d);
            let breakdown = |o| {
                let (g, d) = pairs(Some(o));
                agreement_breakdown(&g, &d).ok()
            };
            GoldComparison {
                confusion,
                metrics: classification_metrics(&confusion),
                agreement_baseline: breakdown(Origin::Baseline),
                agreement_new: breakdown(Origin::New),
            }
        });

        let mut economy = EconomyTotals::default();
        for p in platform.players() {
            economy.currency += p.currency;
            economy.xp += p.xp;
            economy.skill_hits += u64::from(p.skill_hits);
            economy.skill_total += u64::from(p.skill_total);
            economy.delayed_rewards_paid += p.delayed_paid.len() as u64;
        }

        let report = StudyReport {
            players: platform.players().count(),
            annotations: agg.annotations().len(),
            sentences: content.len(),
            established,
            tied,
            min_annotations: annotation_counts.values().copied().min().unwrap_or(0),
            max_annotations: annotation_counts.values().copied().max().unwrap_or(0),
            annotation_counts,
            alpha,
            alpha_baseline,
            alpha_new,
            gold,
            economy,
        };
        (report, histogram)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::content::tokenize;

    #[test]
    fn annotator_is_a_function_of_seed_and_sentence() {
        let tokens = tokenize("Critics slammed the reckless plan in Ohio.").unwrap();
        let gold: BTreeSet<_> = [1, 3].into();
        let m = AnnotatorModel::with_accuracy(0.7, 3).unwrap();
        let a = m.annotate(42, &tokens, SentenceLabel::Biased, &gold);
        assert_eq!(a, m.annotate(42, &tokens, SentenceLabel::Biased, &gold));
        let perfect = AnnotatorModel::new(1.0, 1.0, 0.0, 9).unwrap();
        assert_eq!(perfect.annotate(1, &tokens, SentenceLabel::Biased, &gold), (SentenceLabel::Biased, gold.clone()));
        assert_eq!(
            perfect.annotate(1, &tokens, SentenceLabel::NotBiased, &BTreeSet::new()),
            (SentenceLabel::NotBiased, BTreeSet::new())
        );
        assert!(AnnotatorModel::new(1.2, 0.0, 0.0, 0).is_err());
    }

    #[test]
    fn infeasible_config_is_rejected() {
        let config = StudyConfig { players: 10, ..StudyConfig::default() };
        let pool = Pool::synthetic(370, 150, 0);
        let population = uniform_population(10, 0.9, 0).unwrap();
        assert_eq!(
            Simulation::new(config, pool, population).err(),
            Some(SimulationError::InfeasibleConfig { capacity: 300, required: 2600 })
        );
    }
}
