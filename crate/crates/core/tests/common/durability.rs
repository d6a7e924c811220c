use slant_core::platform::{FileLog, ManualClock, Platform, Snapshot};
use slant_core::simulator::{default_population, study_epoch, Pool, Simulation, SimulationError, StudyConfig};

pub fn config() -> StudyConfig {
    StudyConfig { seed: 11, bootstrap_resamples: 0, ..StudyConfig::default() }
}

pub fn simulation() -> Simulation {
    Simulation::new(config(), Pool::synthetic(370, 150, 11), default_population(100, 11).unwrap()).unwrap()
}

/// Runs until `budget` commands have executed, then drops the platform.
pub fn killed_run(path: &std::path::Path, budget: usize) -> Snapshot {
    let mut sim = simulation().with_budget(budget);
    let (log, entries) = FileLog::open(path).unwrap();
    assert!(entries.is_empty());
    let mut platform = sim.platform(Box::new(log));
    let err = sim.run(&mut platform).unwrap_err();
    assert_eq!(err, SimulationError::Interrupted { executed: budget });
    platform.snapshot()
}

pub fn reopen(path: &std::path::Path) -> Platform {
    let clock = ManualClock::new(study_epoch());
    Platform::open(config().platform_config(), path, Box::new(clock)).unwrap()
}

