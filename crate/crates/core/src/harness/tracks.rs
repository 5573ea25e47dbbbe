use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Minimum samples for a track to ever be forecast by the network.
pub const MIN_USABLE_SAMPLES: usize = crate::predictor::HISTORY_LEN + 1;

/// One pedestrian's recorded positions at consecutive 0.4 s steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PedTrack {
    pub ped_id: i64,
    /// Simulation step of `positions[0]`.
    pub start_step: usize,
    pub positions: Vec<[f64; 2]>,
}

impl PedTrack {
    pub fn new(ped_id: i64, start_step: usize, positions: Vec<[f64; 2]>) -> Self {
        Self {
            ped_id,
            start_step,
            positions,
        }
    }

    /// One past the last step at which the pedestrian is present.
    pub fn end_step(&self) -> usize {
        self.start_step + self.positions.len()
    }

    pub fn is_active(&self, step: usize) -> bool {
        step >= self.start_step && step < self.end_step()
    }

    pub fn position_at(&self, step: usize) -> Option<[f64; 2]> {
        self.is_active(step)
            .then(|| self.positions[step - self.start_step])
    }

    /// Positions observed up to and including `step`.
    pub fn observed_until(&self, step: usize) -> &[[f64; 2]] {
        if step < self.start_step {
            return &[];
        }
        let end = (step - self.start_step + 1).min(self.positions.len());
        &self.positions[..end]
    }

    pub fn is_usable(&self) -> bool {
        self.positions.len() >= MIN_USABLE_SAMPLES
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadedTracks {
    pub tracks: Vec<PedTrack>,
    /// Normalisations applied while loading (reordering, gap filling).
    pub warnings: Vec<String>,
}

/// Reads a whitespace-separated `frame_id ped_id x y` file.
pub fn load_tracks(path: &Path) -> Result<LoadedTracks> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_tracks(&text).map_err(|(line, message)| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    })
}

/// Parses track rows. Rows are grouped by pedestrian in order of first
/// appearance, sorted by frame, and missing frames are filled by linear
/// interpolation. Frame ids are mapped to steps using the most common
/// positive frame increment in the file.
pub fn parse_tracks(text: &str) -> std::result::Result<LoadedTracks, (usize, String)> {
    let mut order: Vec<i64> = Vec::new();
    let mut rows: BTreeMap<i64, Vec<(f64, [f64; 2], usize)>> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err((
                line_no,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        }
        let num = |i: usize, name: &str| -> std::result::Result<f64, (usize, String)> {
            let v: f64 = fields[i]
                .parse()
                .map_err(|_| (line_no, format!("{name} `{}` is not a number", fields[i])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err((line_no, format!("{name} is not finite")))
            }
        };
        let frame = num(0, "frame_id")?;
        let id = num(1, "ped_id")?;
        if id.fract() != 0.0 {
            return Err((line_no, format!("ped_id `{}` is not an integer", fields[1])));
        }
        let id = id as i64;
        let p = [num(2, "x")?, num(3, "y")?];
        let entry = rows.entry(id).or_insert_with(|| {
            order.push(id);
            Vec::new()
        });
        entry.push((frame, p, line_no));
    }

    let mut warnings = Vec::new();
    for (id, r) in rows.iter_mut() {
        if r.windows(2).any(|w| w[1].0 < w[0].0) {
            warnings.push(format!("pedestrian {id}: frames out of order, sorted"));
            r.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        if let Some(w) = r.windows(2).find(|w| w[1].0 == w[0].0) {
            return Err((
                w[1].2,
                format!("pedestrian {id}: duplicate frame {}", w[1].0),
            ));
        }
    }

    let frame_step = modal_increment(rows.values());
    let base = rows
        .values()
        .filter_map(|r| r.first().map(|f| f.0))
        .fold(f64::INFINITY, f64::min);

    let mut tracks = Vec::with_capacity(order.len());
    for id in order {
        let r = &rows[&id];
        let to_step = |frame: f64, line: usize| -> std::result::Result<usize, (usize, String)> {
            let s = (frame - base) / frame_step;
            if (s - s.round()).abs() > 1e-6 {
                return Err((
                    line,
                    format!("frame {frame} is not a multiple of the frame step {frame_step}"),
                ));
            }
            Ok(s.round() as usize)
        };
        let start = to_step(r[0].0, r[0].2)?;
        let mut positions = vec![r[0].1];
        let mut prev_step = start;
        for &(frame, p, line) in &r[1..] {
            let s = to_step(frame, line)?;
            let gap = s - prev_step;
            if gap > 1 {
                warnings.push(format!(
                    "pedestrian {id}: {} missing frame(s) before frame {frame} interpolated",
                    gap - 1
                ));
                let last = *positions.last().expect("non-empty");
                for g in 1..gap {
                    let t = g as f64 / gap as f64;
                    positions.push([
                        last[0] + t * (p[0] - last[0]),
                        last[1] + t * (p[1] - last[1]),
                    ]);
                }
            }
            positions.push(p);
            prev_step = s;
        }
        tracks.push(PedTrack::new(id, start, positions));
    }
    Ok(LoadedTracks { tracks, warnings })
}

fn modal_increment<'a>(rows: impl Iterator<Item = &'a Vec<(f64, [f64; 2], usize)>>) -> f64 {
    let mut counts: BTreeMap<u64, (usize, f64)> = BTreeMap::new();
    for r in rows {
        for w in r.windows(2) {
            let d = w[1].0 - w[0].0;
            if d > 0.0 {
                let e = counts.entry(d.to_bits()).or_insert((0, d));
                e.0 += 1;
            }
        }
    }
    counts
        .values()
        .max_by(|a, b| a.0.cmp(&b.0).then(b.1.total_cmp(&a.1)))
        .map(|&(_, d)| d)
        .unwrap_or(1.0)
}

/// Writes tracks in the `frame_id ped_id x y` format, one frame per step.
pub fn format_tracks(tracks: &[PedTrack]) -> String {
    let mut rows: Vec<(usize, i64, [f64; 2])> = tracks
        .iter()
        .flat_map(|t| {
            t.positions
                .iter()
                .enumerate()
                .map(move |(k, p)| (t.start_step + k, t.ped_id, *p))
        })
        .collect();
    rows.sort_by_key(|r| (r.0, r.1));
    let mut out = String::new();
    for (frame, id, p) in rows {
        out.push_str(&format!("{frame} {id} {} {}\n", p[0], p[1]));
    }
    out
}
