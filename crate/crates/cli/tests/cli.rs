use std::path::Path;
use std::process::{Command, Output};

use socnav_cli::config::ScenarioKind;
use socnav_cli::{Overrides, RunConfig};
use socnav_core::harness::{EpisodeTrace, METRICS_COLUMNS};
use socnav_core::ConstraintMode;

fn socnav(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_socnav"))
        .args(args)
        .env_remove("SOCNAV_DATASET")
        .env_remove("SOCNAV_MODEL")
        .env_remove("SOCNAV_OUTPUT")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn repo_file(rel: &str) -> String {
    format!("{}/../../{rel}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn example_config_parses_to_defaults() {
    let text = std::fs::read_to_string(repo_file("configs/example.toml")).unwrap();
    let c = RunConfig::from_toml(&text).unwrap();
    assert_eq!(c, RunConfig::default());
    c.validate().unwrap();
}

#[test]
fn plan_header_echo_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = socnav(&[
        "plan",
        "--scenario",
        "empty",
        "--mode",
        "chance",
        "--delta",
        "0.2",
        "--constant-velocity",
        "--out",
        out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    let mut lines = stdout.lines();
    assert_eq!(lines.next().unwrap(), METRICS_COLUMNS.join(","));
    assert!(lines.next().unwrap().contains(",true,"));

    let trace = EpisodeTrace::read(&dir.path().join("trace_empty_chance_s0.jsonl")).unwrap();
    let echoed: RunConfig = serde_json::from_value(trace.header.echo.clone()).unwrap();
    let mut expected = RunConfig::default();
    let overrides = Overrides {
        scenario: Some("empty".into()),
        mode: Some("chance".into()),
        delta: Some(0.2),
        constant_velocity: true,
        out: Some(dir.path().to_path_buf()),
        ..Overrides::default()
    };
    expected.apply(|_| None, &overrides).unwrap();
    assert_eq!(echoed, expected);
    assert_eq!(echoed.planner.mode, ConstraintMode::Chance { delta: 0.2 });
    assert_eq!(trace.header.planner.mode, echoed.planner.mode);
    assert_eq!(trace.header.prediction, "constant_velocity");
}

#[test]
fn hard_and_chance_traces_differ() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for mode in ["hard", "chance"] {
        let o = socnav(&[
            "plan",
            "--mode",
            mode,
            "--seed",
            "1",
            "--constant-velocity",
            "--out",
            out,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let read = |mode: &str| {
        EpisodeTrace::read(&dir.path().join(format!("trace_head_on_{mode}_s1.jsonl"))).unwrap()
    };
    let (hard, chance) = (read("hard"), read("chance"));
    let controls = |t: &EpisodeTrace| t.records.iter().map(|r| r.control).collect::<Vec<_>>();
    assert_ne!(controls(&hard), controls(&chance));
}

#[test]
fn unknown_mode_lists_valid_modes() {
    let o = socnav(&["plan", "--mode", "soft", "--constant-velocity"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(
        err.contains("soft") && err.contains("hard, chance, cbf"),
        "{err}"
    );
}

#[test]
fn missing_dataset_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere.txt");
    let o = Command::new(env!("CARGO_BIN_EXE_socnav"))
        .args(["train", "--out", dir.path().to_str().unwrap()])
        .env("SOCNAV_DATASET", &missing)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains(missing.to_str().unwrap()),
        "{}",
        stderr(&o)
    );
}

#[test]
fn missing_model_is_named_unless_constant_velocity() {
    let dir = tempfile::tempdir().unwrap();
    let o = socnav(&[
        "plan",
        "--scenario",
        "empty",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("model not found"), "{}", stderr(&o));
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn train_writes_model_and_full_log() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = repo_file("data/synthetic_tracks.txt");
    let model = dir.path().join("m/model.json");
    let config = write_config(
        dir.path(),
        &format!(
            "[paths]\ndataset = {dataset:?}\nmodel = {model:?}\noutput = {out:?}\n\
             [predictor]\nmembers = 2\nepochs = 3\nhidden = 8\nwindow_stride = 8\n",
            out = dir.path()
        ),
    );
    let o = socnav(&["train", "--config", &config]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(model.is_file());
    let log = std::fs::read_to_string(dir.path().join("training_log.csv")).unwrap();
    let rows: Vec<&str> = log.lines().collect();
    assert_eq!(rows[0], "member,epoch,nll");
    assert_eq!(rows.len() - 1, 2 * 3);

    let o = socnav(&["plan", "--config", &config, "--scenario", "empty"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let trace = EpisodeTrace::read(&dir.path().join("trace_empty_cbf_s0.jsonl")).unwrap();
    assert_eq!(trace.header.prediction, "ensemble");
    assert!(trace.header.model_hash.is_some());
}

#[test]
fn bench_writes_sorted_rows_with_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "constant_velocity = true\n[scenario]\nname = \"empty\"\nmax_sim_time = 4.0\n\
         [bench]\nseeds = [1, 0]\nmodes = [\"hard\", \"cbf\", \"chance\"]\n",
    );
    let out = dir.path().to_str().unwrap();
    let o = socnav(&["bench", "--config", &config, "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut reader = csv::Reader::from_path(dir.path().join("bench.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 6 + 3);
    let summary: Vec<(String, String, String)> = rows
        .iter()
        .map(|r| (r[0].to_owned(), r[2].to_owned(), r[4].to_owned()))
        .collect();
    let expect =
        |row: &str, mode: &str, seed: &str| (row.to_owned(), mode.to_owned(), seed.to_owned());
    assert_eq!(
        summary,
        [
            expect("episode", "hard", "0"),
            expect("episode", "hard", "1"),
            expect("aggregate", "hard", "n=2"),
            expect("episode", "cbf", "0"),
            expect("episode", "cbf", "1"),
            expect("aggregate", "cbf", "n=2"),
            expect("episode", "chance", "0"),
            expect("episode", "chance", "1"),
            expect("aggregate", "chance", "n=2"),
        ]
    );
    assert!(rows[2][5].contains('±'));
    assert!(rows.iter().all(|r| r[11].is_empty()));
}

#[test]
fn config_validation_rejects_bad_values() {
    let mut c = RunConfig::default();
    c.bench.modes.push("fuzzy".into());
    assert!(c.validate().is_err());
    let mut c = RunConfig::default();
    c.scenario.name = "mall".into();
    assert!(c.validate().is_err());
    c.scenario.kind = ScenarioKind::Dataset;
    assert!(c.validate().is_ok());
}
