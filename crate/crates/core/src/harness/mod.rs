//! Closed-loop replay: pedestrians follow recorded (or synthetic) tracks,
//! the robot runs predict → plan → step every 0.4 s, and the episode is
//! scored from its trace.

mod episode;
mod metrics;
mod scenario;
mod trace;
mod tracks;

pub use episode::{
    constant_velocity_forecast, run_episode, EpisodeOptions, Forecaster, COLD_START_VARIANCE,
};
pub use metrics::{compute_metrics, FailureReason, MetricsReport, METRICS_COLUMNS};
pub use scenario::{
    canonical_scenario, empty, spawn_scenario, synthetic_training_tracks, Scenario, SpawnConfig,
    CANONICAL_SCENARIOS, DEFAULT_MAX_SIM_TIME,
};
pub use trace::{
    EpisodeTrace, PedPosition, SolveSummary, StepRecord, Termination, TraceHeader, TraceOutcome,
    TRACE_FORMAT,
};
pub use tracks::{
    format_tracks, load_tracks, parse_tracks, LoadedTracks, PedTrack, MIN_USABLE_SAMPLES,
};
