use std::fs;
use std::process::Command as Process;

use slant_core::aggregation::DatasetRecord;
use slant_core::platform::{Command, FileLog, ManualClock, Platform};
use slant_core::simulator::{Pool, StudyReport};
use slant_server::cli::{export, simulate, ExportArgs, PlatformArgs, SimulateArgs};

fn args(out: &std::path::Path) -> SimulateArgs {
    SimulateArgs {
        players: 100,
        rounds: 3,
        per_round: 10,
        direct_rounds: 2,
        seed: 4,
        accuracy: Some(1.0),
        pool: None,
        gold: None,
        out: out.to_owned(),
        bootstrap: 40,
    }
}

fn lines(path: &std::path::Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(str::to_owned).collect()
}

#[test]
fn simulate_writes_the_three_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let report = simulate(&args(dir.path())).unwrap();
    assert_eq!(report.annotations, 3000);

    let records: Vec<DatasetRecord> =
        lines(&dir.path().join("dataset.jsonl")).iter().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 520);
    let on_disk: StudyReport = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(on_disk, report);
    let histogram = lines(&dir.path().join("alpha_histogram.csv"));
    assert_eq!(histogram[0], "resample_index,alpha");
    assert_eq!(histogram.len(), 41);
}

#[test]
fn pool_and_gold_files_are_read() {
    let dir = tempfile::tempdir().unwrap();
    let pool = Pool::synthetic(370, 150, 8);
    let mut csv = Vec::new();
    pool.write_csv(&mut csv).unwrap();
    fs::write(dir.path().join("pool.csv"), csv).unwrap();
    let mut gold = Vec::new();
    pool.write_gold_csv(&mut gold).unwrap();
    fs::write(dir.path().join("gold.csv"), gold).unwrap();

    let out = dir.path().join("out");
    let a = SimulateArgs {
        pool: Some(dir.path().join("pool.csv")),
        gold: Some(dir.path().join("gold.csv")),
        bootstrap: 0,
        ..args(&out)
    };
    let report = simulate(&a).unwrap();
    assert_eq!(report.sentences, 520);
    assert_eq!(report.gold.unwrap().metrics.accuracy, Some(1.0));

    fs::write(dir.path().join("gold.csv"), "text,label,biased_words\nNot in the pool.,biased,\n").unwrap();
    assert!(simulate(&a).is_err());
}

#[test]
fn infeasible_studies_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let err = simulate(&SimulateArgs { players: 5, ..args(dir.path()) }).unwrap_err();
    assert!(err.to_string().contains("cannot give 2600 annotations"), "{err}");
}

#[test]
fn export_replays_a_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("events.jsonl");
    let platform_args = PlatformArgs { log: log.clone(), economy: None, seed: 0, utc_offset_minutes: 0 };
    {
        let (file, _) = FileLog::open(&log).unwrap();
        let clock = ManualClock::new(chrono::Utc::now());
        let mut p = Platform::new(platform_args.config().unwrap(), Box::new(file), Box::new(clock));
        let csv = "text,label,biased_words,outlet,outlet_leaning,topic,article_url\n\
                   A reckless plan.,biased,reckless,Herald,left,econ,https://example.org/1\n\
                   A budget plan.,not_biased,,Herald,right,econ,https://example.org/2\n";
        p.execute(None, Command::ImportBaseline { csv: csv.into() }).unwrap();
    }
    let out = dir.path().join("export");
    let n = export(&ExportArgs { platform: platform_args.clone(), out: out.clone(), bootstrap: 10, min_annotations: None }).unwrap();
    assert_eq!(n, 2);
    assert_eq!(lines(&out.join("dataset.jsonl")).len(), 2);
    let metrics: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["flags"], serde_json::json!(["NoPairableValues"]));

    let missing = PlatformArgs { log: dir.path().join("absent.jsonl"), ..platform_args };
    assert!(export(&ExportArgs { platform: missing, out, bootstrap: 0, min_annotations: None }).is_err());
}

#[test]
fn binary_runs_a_small_study() {
    let dir = tempfile::tempdir().unwrap();
    let status = Process::new(env!("CARGO_BIN_EXE_slant"))
        .args(["simulate", "--seed", "2", "--accuracy", "0.9", "--bootstrap", "10", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    assert!(String::from_utf8_lossy(&status.stdout).contains("3000 annotations on 520 sentences"));
    assert!(dir.path().join("dataset.jsonl").exists());
}
