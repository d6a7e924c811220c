//! The offline commands behind `slant simulate` and `slant export`.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use slant_core::aggregation::{write_jsonl, ExportFilter};
use slant_core::engine::EconomyConfig;
use slant_core::metrics::{DEFAULT_LEVEL, DEFAULT_RESAMPLES};
use slant_core::platform::{Platform, PlatformConfig, SystemClock};
use slant_core::simulator::{default_population, run_study, uniform_population, Pool, StudyConfig, StudyReport};

#[derive(Debug, Clone, clap::Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 100)]
    pub players: usize,
    /// Rounds each player plays.
    #[arg(long, default_value_t = 3)]
    pub rounds: usize,
    #[arg(long, default_value_t = 10)]
    pub per_round: usize,
    /// Leading rounds drawn from the baseline pool.
    #[arg(long, default_value_t = 2)]
    pub direct_rounds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// One accuracy for every player; omitted, accuracies spread over 0.7..1.0.
    #[arg(long)]
    pub accuracy: Option<f64>,
    /// Pool CSV; omitted, a synthetic 370 + 150 pool is generated.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    /// Gold labels (`text,label,biased_words`) replacing those in the pool.
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
    pub bootstrap: usize,
}

/// Runs a study and writes `dataset.jsonl`, `report.json` and `alpha_histogram.csv` into `out`.
pub fn simulate(args: &SimulateArgs) -> Result<StudyReport> {
    let mut pool = match &args.pool {
        Some(path) => Pool::from_csv(File::open(path).with_context(|| format!("opening {}", path.display()))?)?,
        None => Pool::synthetic(370, 150, args.seed),
    };
    if let Some(path) = &args.gold {
        let updated = pool.apply_gold(File::open(path).with_context(|| format!("opening {}", path.display()))?)?;
        if updated == 0 {
            bail!("no pool sentence matched {}", path.display());
        }
    }
    let config = StudyConfig {
        players: args.players,
        rounds_per_player: args.rounds,
        sentences_per_round: args.per_round,
        direct_rounds: args.direct_rounds.min(args.rounds),
        seed: args.seed,
        bootstrap_resamples: args.bootstrap,
        level: DEFAULT_LEVEL,
    };
    let population = match args.accuracy {
        Some(a) => uniform_population(args.players, a, args.seed)?,
        None => default_population(args.players, args.seed)?,
    };
    let study = run_study(config, pool, population)?;

    fs::create_dir_all(&args.out)?;
    let records = study.platform.export_dataset(&ExportFilter::default());
    write_jsonl(&records, BufWriter::new(File::create(args.out.join("dataset.jsonl"))?))?;
    fs::write(args.out.join("report.json"), serde_json::to_string_pretty(&study.report)? + "\n")?;
    let histogram = BufWriter::new(File::create(args.out.join("alpha_histogram.csv"))?);
    match &study.histogram {
        Some(h) => h.write_histogram_csv(histogram)?,
        None => {
            use std::io::Write;
            let mut w = histogram;
            writeln!(w, "resample_index,alpha")?;
        }
    }
    Ok(study.report)
}

#[derive(Debug, Clone, clap::Args)]
pub struct PlatformArgs {
    /// Event log; created when missing.
    #[arg(long, default_value = "slant-events.jsonl")]
    pub log: PathBuf,
    /// Flat TOML file overriding economy parameters.
    #[arg(long)]
    pub economy: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Minutes east of UTC for the day boundary.
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub utc_offset_minutes: i32,
}

impl PlatformArgs {
    pub fn config(&self) -> Result<PlatformConfig> {
        let economy = match &self.economy {
            Some(path) => EconomyConfig::from_toml_str(&fs::read_to_string(path)?)?,
            None => EconomyConfig::default(),
        };
        Ok(PlatformConfig { economy, seed: self.seed, utc_offset_minutes: self.utc_offset_minutes, ..PlatformConfig::default() })
    }

    pub fn open(&self) -> Result<Platform> {
        Platform::open(self.config()?, &self.log, Box::new(SystemClock))
            .with_context(|| format!("replaying {}", self.log.display()))
    }
}

#[derive(Debug, Clone, clap::Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub platform: PlatformArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
    pub bootstrap: usize,
    #[arg(long)]
    pub min_annotations: Option<u32>,
}

/// Replays a log and writes `dataset.jsonl` and `metrics.json`. Returns the record count.
pub fn export(args: &ExportArgs) -> Result<usize> {
    if !args.platform.log.exists() {
        bail!("no event log at {}", args.platform.log.display());
    }
    let platform = args.platform.open()?;
    write_export(&platform, &args.out, args.bootstrap, args.min_annotations)
}

pub fn write_export(platform: &Platform, out: &Path, resamples: usize, min_annotations: Option<u32>) -> Result<usize> {
    fs::create_dir_all(out)?;
    let records = platform.export_dataset(&ExportFilter { min_annotations, ..ExportFilter::default() });
    write_jsonl(&records, BufWriter::new(File::create(out.join("dataset.jsonl"))?))?;
    let report = platform.metrics_report(None, resamples, 0, DEFAULT_LEVEL);
    fs::write(out.join("metrics.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    Ok(records.len())
}
