mod common;

use std::fs::OpenOptions;
use std::io::Write;

use common::durability::{config, killed_run, reopen, simulation};
use slant_core::platform::{ManualClock, MemoryLog, Platform};
use slant_core::simulator::study_epoch;

#[test]
fn restart_replays_into_identical_state() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.jsonl");
    let before = killed_run(&path, 2500);
    let after = reopen(&path).snapshot();
    assert_eq!(before.seq, 2500);
    assert_eq!(after, before);
    assert!(after.label_states.iter().any(|s| s.annotator_count > 0));
    assert!(after.players.iter().any(|p| p.currency > 0));
}

#[test]
fn torn_final_line_is_dropped() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.jsonl");
    let before = killed_run(&path, 1800);
    // a crash in the middle of an append leaves half a line behind
    let mut f = OpenOptions::new().append(true).open(&path).unwrap();
    f.write_all(br#"{"seq":1801,"at":"2024-03-04T09:30:00Z","command":{"type":"fin"#).unwrap();
    drop(f);
    let after = reopen(&path).snapshot();
    assert_eq!(after, before);
}

#[test]
fn replay_matches_an_uninterrupted_memory_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.jsonl");
    let from_disk = killed_run(&path, 1200);

    let mut sim = simulation().with_budget(1200);
    let log = MemoryLog::new();
    let mut platform = sim.platform(Box::new(log.clone()));
    let _ = sim.run(&mut platform);
    assert_eq!(platform.snapshot(), from_disk);

    let clock = ManualClock::new(study_epoch());
    let replayed =
        Platform::replay(config().platform_config(), log.entries(), Box::new(MemoryLog::new()), Box::new(clock)).unwrap();
    assert_eq!(replayed.snapshot(), from_disk);
}

#[test]
fn restarted_platform_keeps_accepting_commands() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.jsonl");
    killed_run(&path, 900);
    let mut platform = reopen(&path);
    let player = platform.players().next().unwrap().id;
    platform
        .execute(None, slant_core::platform::Command::CollectFeedback { player, sentence: None })
        .unwrap();
    let seq = platform.snapshot().seq;
    assert_eq!(seq, 901);
    assert_eq!(reopen(&path).snapshot(), platform.snapshot());
}
