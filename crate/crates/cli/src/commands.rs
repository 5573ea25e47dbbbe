use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use rayon::prelude::*;
use socnav_core::harness::{
    canonical_scenario, load_tracks, run_episode, spawn_scenario, EpisodeOptions, Forecaster,
    MetricsReport, Scenario, SpawnConfig, METRICS_COLUMNS,
};
use socnav_core::predictor::{
    load_model, model_hash, save_model, train_ensemble, windows_from_track,
};
use socnav_core::Ensemble;

use crate::config::{require_file, RunConfig, ScenarioKind};

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

/// Trains the ensemble on the dataset, writes the model and
/// `training_log.csv` (one row per member and epoch).
pub fn train(config: &RunConfig) -> Result<()> {
    let paths = &config.paths;
    require_file(&paths.dataset, "dataset")?;
    let loaded = load_tracks(&paths.dataset)?;
    for w in &loaded.warnings {
        log::warn!("{}: {w}", paths.dataset.display());
    }
    let samples: Vec<_> = loaded
        .tracks
        .iter()
        .flat_map(|t| windows_from_track(&t.positions, config.predictor.window_stride))
        .collect();
    log::info!(
        "{} tracks, {} training windows",
        loaded.tracks.len(),
        samples.len()
    );
    let (ensemble, records) = train_ensemble(&samples, &config.predictor.train)?;

    if let Some(dir) = paths.model.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    save_model(&ensemble, &paths.model)?;
    create_dir(&paths.output)?;
    let log_path = paths.output.join("training_log.csv");
    let mut w = csv::Writer::from_path(&log_path)
        .with_context(|| format!("cannot write {}", log_path.display()))?;
    w.write_record(["member", "epoch", "nll"])?;
    for r in &records {
        w.write_record([r.member.to_string(), r.epoch.to_string(), r.nll.to_string()])?;
    }
    w.flush()?;

    let meta = &ensemble.metadata;
    for (i, (a, b)) in meta.initial_nll.iter().zip(&meta.final_nll).enumerate() {
        println!("member {i}: nll {a:.4} -> {b:.4}");
    }
    println!("model: {}", paths.model.display());
    println!("log: {}", log_path.display());
    Ok(())
}

fn build_scenario(config: &RunConfig, seed: u64) -> Result<Scenario> {
    let s = &config.scenario;
    match s.kind {
        ScenarioKind::Synthetic => {
            let mut scenario = canonical_scenario(&s.name, seed)?;
            scenario.max_sim_time = s.max_sim_time;
            Ok(scenario)
        }
        ScenarioKind::Dataset => {
            require_file(&config.paths.dataset, "dataset")?;
            let tracks = load_tracks(&config.paths.dataset)?.tracks;
            let spawn = SpawnConfig {
                count: s.pedestrians,
                start: s.start,
                goal: s.goal,
                max_sim_time: s.max_sim_time,
            };
            Ok(spawn_scenario(
                &tracks,
                &spawn,
                seed,
                &config.planner.geometry,
            )?)
        }
    }
}

fn load_ensemble(config: &RunConfig) -> Result<Option<(Ensemble, String)>> {
    if config.constant_velocity {
        return Ok(None);
    }
    require_file(&config.paths.model, "model")?;
    let ensemble = load_model(&config.paths.model)?;
    let hash = model_hash(&ensemble)?;
    Ok(Some((ensemble, hash)))
}

fn forecaster(model: &Option<(Ensemble, String)>) -> Forecaster<'_> {
    match model {
        Some((e, _)) => Forecaster::Ensemble(e),
        None => Forecaster::ConstantVelocity,
    }
}

/// Runs one episode, writes its trace and prints the metrics as CSV.
pub fn plan(config: &RunConfig) -> Result<()> {
    let model = load_ensemble(config)?;
    let seed = config.scenario.seed;
    let scenario = build_scenario(config, seed)?;
    let options = EpisodeOptions {
        deterministic: config.deterministic,
        model_hash: model.as_ref().map(|m| m.1.clone()),
        echo: serde_json::to_value(config)?,
    };
    let (trace, metrics) = run_episode(&scenario, forecaster(&model), &config.planner, &options)?;

    create_dir(&config.paths.output)?;
    let name = format!(
        "trace_{}_{}_s{seed}.jsonl",
        scenario.name,
        config.planner.mode.name()
    );
    let path = config.paths.output.join(name);
    trace.write(&path)?;
    let mut w = csv::Writer::from_writer(std::io::stdout());
    w.write_record(METRICS_COLUMNS)?;
    w.write_record(metrics.csv_fields())?;
    w.flush()?;
    eprintln!("trace: {}", path.display());
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Cell {
    deterministic: bool,
    horizon: usize,
    mode_rank: usize,
    mode: String,
    seed: u64,
}

impl Cell {
    fn prediction(&self, constant_velocity: bool) -> &'static str {
        match (self.deterministic, constant_velocity) {
            (true, _) => "deterministic",
            (false, true) => "constant_velocity",
            (false, false) => "stochastic",
        }
    }
}

/// `mean±std` (population std) of the values, empty when there are none.
fn mean_std(values: &[f64]) -> String {
    if values.is_empty() {
        return String::new();
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    format!("{mean:.4}±{:.4}", var.sqrt())
}

fn aggregate(results: &[&std::result::Result<MetricsReport, String>]) -> [String; 6] {
    let ok: Vec<&MetricsReport> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let pick = |f: fn(&MetricsReport) -> Option<f64>| -> Vec<f64> {
        ok.iter().filter_map(|m| f(m)).collect()
    };
    let successes = ok.iter().filter(|m| m.success).count();
    [
        mean_std(&pick(|m| Some(m.trajectory_length))),
        mean_std(&pick(|m| Some(m.total_time))),
        mean_std(&pick(|m| m.min_distance)),
        mean_std(&pick(|m| Some(m.avg_compute_ms))),
        format!("{successes}/{}", results.len()),
        String::new(),
    ]
}

/// Runs every (prediction, horizon, mode, seed) cell in parallel and writes
/// `bench.csv`: episode rows in sorted order, each group followed by one
/// `mean±std` aggregate row. Returns the number of cells that failed to
/// produce metrics.
pub fn bench(config: &RunConfig) -> Result<usize> {
    let model = load_ensemble(config)?;
    let b = &config.bench;
    let mut cells = Vec::new();
    for &deterministic in &b.deterministic {
        for &horizon in &b.horizons {
            for (mode_rank, mode) in b.modes.iter().enumerate() {
                for &seed in &b.seeds {
                    cells.push(Cell {
                        deterministic,
                        horizon,
                        mode_rank,
                        mode: mode.clone(),
                        seed,
                    });
                }
            }
        }
    }
    cells.sort();
    cells.dedup();
    let echo = serde_json::to_value(config)?;

    let run_cell = |cell: &Cell| -> Result<MetricsReport> {
        let mut planner = config.planner.clone();
        planner.horizon = cell.horizon;
        planner.mode = config.bench_mode(&cell.mode)?;
        let scenario = build_scenario(config, cell.seed)?;
        let options = EpisodeOptions {
            deterministic: cell.deterministic,
            model_hash: model.as_ref().map(|m| m.1.clone()),
            echo: echo.clone(),
        };
        let (_, metrics) = run_episode(&scenario, forecaster(&model), &planner, &options)?;
        Ok(metrics)
    };
    let results: Vec<std::result::Result<MetricsReport, String>> = cells
        .par_iter()
        .map(|c| run_cell(c).map_err(|e| format!("{e:#}")))
        .collect();

    create_dir(&config.paths.output)?;
    let path = config.paths.output.join("bench.csv");
    let mut w = csv::Writer::from_path(&path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    let mut header = vec!["row", "prediction", "mode", "horizon", "seed"];
    header.extend(METRICS_COLUMNS);
    header.push("error");
    w.write_record(&header)?;

    let mut groups: BTreeMap<(bool, usize, usize), Vec<usize>> = BTreeMap::new();
    for (i, c) in cells.iter().enumerate() {
        groups
            .entry((c.deterministic, c.horizon, c.mode_rank))
            .or_default()
            .push(i);
    }
    let mut failures = 0;
    for members in groups.values() {
        let first = &cells[members[0]];
        let key = |row: &str, seed: String| -> Vec<String> {
            vec![
                row.into(),
                first.prediction(config.constant_velocity).into(),
                first.mode.clone(),
                first.horizon.to_string(),
                seed,
            ]
        };
        for &i in members {
            let mut rec = key("episode", cells[i].seed.to_string());
            match &results[i] {
                Ok(m) => {
                    rec.extend(m.csv_fields());
                    rec.push(String::new());
                }
                Err(e) => {
                    failures += 1;
                    log::error!("{} seed {}: {e}", cells[i].mode, cells[i].seed);
                    rec.extend(std::iter::repeat_n(String::new(), METRICS_COLUMNS.len()));
                    rec.push(e.clone());
                }
            }
            w.write_record(&rec)?;
        }
        let group: Vec<_> = members.iter().map(|&i| &results[i]).collect();
        let mut rec = key("aggregate", format!("n={}", members.len()));
        rec.extend(aggregate(&group));
        rec.push(String::new());
        w.write_record(&rec)?;
    }
    w.flush()?;
    println!("{}", path.display());
    Ok(failures)
}
