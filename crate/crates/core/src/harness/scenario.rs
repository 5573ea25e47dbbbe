use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::tracks::PedTrack;
use crate::constraints::SafetyGeometry;
use crate::dynamics::RobotState;
use crate::predictor::{HISTORY_LEN, SAMPLE_DT};
use crate::{Error, Result};

/// Default episode cap, seconds.
pub const DEFAULT_MAX_SIM_TIME: f64 = 30.0;

/// A replay episode: pedestrian tracks on the replay clock plus the robot's
/// start, goal and time budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub tracks: Vec<PedTrack>,
    pub start: RobotState,
    pub goal: [f64; 2],
    pub max_sim_time: f64,
    pub seed: u64,
    /// Replay step at which the robot starts; earlier samples serve as
    /// pedestrian history.
    pub start_step: usize,
    /// Walls `[y_min, y_max]` bounding the robot, if any.
    pub corridor: Option<[f64; 2]>,
}

impl Scenario {
    /// Maximum number of control steps.
    pub fn max_steps(&self) -> usize {
        (self.max_sim_time / SAMPLE_DT - 1e-9).ceil().max(0.0) as usize
    }

    /// True pedestrian positions at replay step `step`.
    pub fn pedestrians_at(&self, step: usize) -> Vec<(i64, [f64; 2])> {
        self.tracks
            .iter()
            .filter_map(|t| t.position_at(step).map(|p| (t.ped_id, p)))
            .collect()
    }

    pub fn validate(&self, geometry: &SafetyGeometry) -> Result<()> {
        if !(self.goal.iter().all(|g| g.is_finite()) && self.start.is_finite()) {
            return Err(Error::InvalidInput(
                "scenario start and goal must be finite".into(),
            ));
        }
        if self.max_sim_time.is_nan() || self.max_sim_time <= 0.0 {
            return Err(Error::InvalidInput("max_sim_time must be positive".into()));
        }
        let contact = geometry.contact_distance();
        for (id, p) in self.pedestrians_at(self.start_step) {
            let d = (p[0] - self.start.p_x).hypot(p[1] - self.start.p_y);
            if d < contact {
                return Err(Error::InvalidInput(format!(
                    "robot starts in collision with pedestrian {id} ({d:.3} m)"
                )));
            }
        }
        Ok(())
    }
}

/// Parameters of a dataset-driven scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpawnConfig {
    pub count: usize,
    pub start: [f64; 3],
    pub goal: [f64; 2],
    pub max_sim_time: f64,
}

impl Default for SpawnConfig {
    fn default() -> Self {
        Self {
            count: 20,
            start: [0.0, 0.0, 0.0],
            goal: [10.0, 0.0],
            max_sim_time: DEFAULT_MAX_SIM_TIME,
        }
    }
}

/// Draws `config.count` usable tracks under `seed` and shifts each to a
/// random entry step so that it lies within the episode. Shifts are redrawn
/// (up to 64 times) if the robot would start in collision.
pub fn spawn_scenario(
    tracks: &[PedTrack],
    config: &SpawnConfig,
    seed: u64,
    geometry: &SafetyGeometry,
) -> Result<Scenario> {
    let usable: Vec<&PedTrack> = tracks.iter().filter(|t| t.is_usable()).collect();
    if usable.len() < config.count {
        return Err(Error::InsufficientTracks {
            requested: config.count,
            available: usable.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = sample(&mut rng, usable.len(), config.count).into_vec();
    chosen.sort_unstable();
    let [x, y, phi] = config.start;
    let mut scenario = Scenario {
        name: "dataset".into(),
        tracks: Vec::new(),
        start: RobotState::at(x, y, phi),
        goal: config.goal,
        max_sim_time: config.max_sim_time,
        seed,
        start_step: 0,
        corridor: None,
    };
    let total = scenario.max_steps() + 1;
    let mut last_err = None;
    for _ in 0..64 {
        scenario.tracks = chosen
            .iter()
            .map(|&i| {
                let t = usable[i];
                let len = t.positions.len().min(total);
                let start_step = rng.random_range(0..=total - len);
                PedTrack::new(t.ped_id, start_step, t.positions[..len].to_vec())
            })
            .collect();
        match scenario.validate(geometry) {
            Ok(()) => return Ok(scenario),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

/// Names accepted by [`canonical_scenario`].
pub const CANONICAL_SCENARIOS: [&str; 3] = ["head_on", "corridor", "crossing20"];

/// Built-in synthetic scenarios. Pedestrians are present from replay step 0
/// and the robot starts once a full history is available.
pub fn canonical_scenario(name: &str, seed: u64) -> Result<Scenario> {
    match name {
        "head_on" => Ok(head_on(seed)),
        "corridor" => Ok(corridor(seed)),
        "crossing20" => Ok(crossing(seed, 20)),
        "empty" => Ok(empty([5.0, 0.0])),
        other => Err(Error::InvalidInput(format!(
            "unknown scenario `{other}` (expected one of: {}, empty)",
            CANONICAL_SCENARIOS.join(", ")
        ))),
    }
}

fn base(name: &str, seed: u64, goal: [f64; 2]) -> Scenario {
    Scenario {
        name: name.into(),
        tracks: Vec::new(),
        start: RobotState::default(),
        goal,
        max_sim_time: DEFAULT_MAX_SIM_TIME,
        seed,
        start_step: HISTORY_LEN - 1,
        corridor: None,
    }
}

/// No pedestrians; robot at the origin facing +x.
pub fn empty(goal: [f64; 2]) -> Scenario {
    let mut s = base("empty", 0, goal);
    s.start_step = 0;
    s
}

/// Straight walk from `from` with velocity `vel` for `steps` samples, plus
/// a lateral sinusoid of the given amplitude/period and white jitter.
#[allow(clippy::too_many_arguments)]
fn walk(
    id: i64,
    from: [f64; 2],
    vel: [f64; 2],
    steps: usize,
    weave: f64,
    period: f64,
    phase: f64,
    jitter: f64,
    rng: &mut ChaCha8Rng,
) -> PedTrack {
    let speed = vel[0].hypot(vel[1]).max(1e-12);
    let normal = [-vel[1] / speed, vel[0] / speed];
    let noise = Normal::new(0.0, jitter.max(0.0)).expect("valid std");
    let positions = (0..steps)
        .map(|k| {
            let t = k as f64 * SAMPLE_DT;
            let lateral = weave * (2.0 * std::f64::consts::PI * t / period + phase).sin();
            let (nx, ny) = if jitter > 0.0 {
                (noise.sample(rng), noise.sample(rng))
            } else {
                (0.0, 0.0)
            };
            [
                from[0] + vel[0] * t + normal[0] * lateral + nx,
                from[1] + vel[1] * t + normal[1] * lateral + ny,
            ]
        })
        .collect();
    PedTrack::new(id, 0, positions)
}

/// Walk whose heading and speed drift as random walks: `turn` rad and
/// `accel` m/s of standard deviation per sample, speed kept in 0.2..2.0.
#[allow(clippy::too_many_arguments)]
fn wander(
    id: i64,
    from: [f64; 2],
    heading: f64,
    speed: f64,
    steps: usize,
    turn: f64,
    accel: f64,
    jitter: f64,
    rng: &mut ChaCha8Rng,
) -> PedTrack {
    let turn_noise = Normal::new(0.0, turn).expect("valid std");
    let accel_noise = Normal::new(0.0, accel).expect("valid std");
    let noise = Normal::new(0.0, jitter).expect("valid std");
    let (mut heading, mut speed, mut p) = (heading, speed, from);
    let mut positions = Vec::with_capacity(steps);
    for _ in 0..steps {
        positions.push([p[0] + noise.sample(rng), p[1] + noise.sample(rng)]);
        heading += turn_noise.sample(rng);
        speed = (speed + accel_noise.sample(rng)).clamp(0.2, 2.0);
        p[0] += speed * heading.cos() * SAMPLE_DT;
        p[1] += speed * heading.sin() * SAMPLE_DT;
    }
    PedTrack::new(id, 0, positions)
}

fn head_on(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = base("head_on", seed, [8.0, 0.0]);
    s.corridor = Some([-2.0, 2.0]);
    let x0 = 14.0 + rng.random_range(-0.5..0.5);
    let y0 = rng.random_range(-0.15..0.15);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    s.tracks.push(walk(
        1,
        [x0, y0],
        [-1.2, 0.0],
        60,
        0.05,
        4.0,
        phase,
        0.01,
        &mut rng,
    ));
    s
}

fn corridor(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = base("corridor", seed, [10.0, 0.0]);
    s.corridor = Some([-1.5, 1.5]);
    let mut tracks = Vec::new();
    // Both walk toward the robot, one ahead of the other on opposite sides.
    for (id, (x0, y0)) in [(1, (7.0, 0.55)), (2, (11.5, -0.55))] {
        let speed = 0.8 + rng.random_range(-0.1..0.1);
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let lead = speed * (HISTORY_LEN - 1) as f64 * SAMPLE_DT;
        tracks.push(walk(
            id,
            [x0 + lead + rng.random_range(-0.3..0.3), y0],
            [-speed, 0.0],
            60,
            0.2,
            3.2,
            phase,
            0.01,
            &mut rng,
        ));
    }
    s.tracks = tracks;
    s
}

fn crossing(seed: u64, count: usize) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = base("crossing20", seed, [14.0, 0.0]);
    let mut tracks = Vec::with_capacity(count);
    for i in 0..count {
        let down = i % 2 == 0;
        let speed = rng.random_range(0.8..1.3);
        let x = rng.random_range(2.0..13.0);
        let entry = rng.random_range(0..30);
        let y_edge = 7.0 + rng.random_range(0.0..1.0);
        let (y0, vy) = if down {
            (y_edge, -speed)
        } else {
            (-y_edge, speed)
        };
        let vx = rng.random_range(-0.2..0.2);
        let steps = (2.0 * y_edge / (speed * SAMPLE_DT)).ceil() as usize;
        let heading = vy.atan2(vx);
        let mut t = wander(
            i as i64 + 1,
            [x, y0],
            heading,
            speed,
            steps,
            0.06,
            0.04,
            0.01,
            &mut rng,
        );
        t.start_step = entry;
        tracks.push(t);
    }
    s.tracks = tracks;
    s
}

/// Diverse synthetic walks for training the predictor: half are straight
/// lines with lateral weave, half drift in heading and speed.
pub fn synthetic_training_tracks(seed: u64, count: usize) -> Vec<PedTrack> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut frame = 0;
    for i in 0..count {
        let heading = rng.random_range(0.0..std::f64::consts::TAU);
        let speed = rng.random_range(0.3..1.5);
        let weave = if rng.random_bool(0.5) {
            rng.random_range(0.0..0.3)
        } else {
            0.0
        };
        let period = rng.random_range(2.5..5.0);
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let steps = rng.random_range(24..48);
        let from = [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)];
        let mut t = if rng.random_bool(0.5) {
            wander(
                i as i64 + 1,
                from,
                heading,
                speed,
                steps,
                0.05,
                0.03,
                0.02,
                &mut rng,
            )
        } else {
            walk(
                i as i64 + 1,
                from,
                [speed * heading.cos(), speed * heading.sin()],
                steps,
                weave,
                period,
                phase,
                0.02,
                &mut rng,
            )
        };
        t.start_step = frame;
        frame += rng.random_range(0..4);
        out.push(t);
    }
    out
}
