use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::grid::{GridCell, OccupancyGrid};
use super::maneuver::{label_maneuver, LabelConfig, ManeuverLabel};
use super::tracks::Track;
use crate::error::{Error, Result};

pub const TARGET_HZ: u32 = 5;
pub const DEFAULT_HISTORY: usize = 15;
pub const DEFAULT_FUTURE: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub source_hz: u32,
    pub target_hz: u32,
    pub history: usize,
    pub future: usize,
}

impl WindowConfig {
    pub fn new(source_hz: u32) -> Self {
        Self {
            source_hz,
            target_hz: TARGET_HZ,
            history: DEFAULT_HISTORY,
            future: DEFAULT_FUTURE,
        }
    }

    /// Source frames between consecutive downsampled points.
    pub fn stride(&self) -> Result<i64> {
        if self.target_hz == 0 || self.source_hz == 0 || !self.source_hz.is_multiple_of(self.target_hz) {
            return Err(Error::Config(format!(
                "source rate {} Hz is not a multiple of {} Hz",
                self.source_hz, self.target_hz
            )));
        }
        if self.history == 0 || self.future == 0 {
            return Err(Error::Config("history and future lengths must be positive".into()));
        }
        Ok((self.source_hz / self.target_hz) as i64)
    }
}

/// A neighbor in the target's occupancy grid with its normalized history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub agent_id: i64,
    pub cell: GridCell,
    pub history: Vec<[f64; 2]>,
}

/// One training/evaluation instance, coordinates relative to `frame_origin`
/// (the target's last observed position).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SceneWindow {
    pub agent_id: i64,
    /// Source frame of every history then future step.
    pub frames: Vec<i64>,
    pub frame_origin: [f64; 2],
    pub target_history: Vec<[f64; 2]>,
    pub target_future: Vec<[f64; 2]>,
    pub target_lanes: Vec<i64>,
    pub target_speeds: Vec<f64>,
    pub neighbors: Vec<Neighbor>,
    pub grid: OccupancyGrid,
    pub maneuver: Option<ManeuverLabel>,
}

impl SceneWindow {
    pub fn history_len(&self) -> usize {
        self.target_history.len()
    }

    pub fn future_len(&self) -> usize {
        self.target_future.len()
    }

    pub fn last_history_frame(&self) -> i64 {
        self.frames[self.history_len() - 1]
    }

    /// Maneuver label, defaulting to (KEEP, MAINTAIN) for unlabeled windows.
    pub fn label(&self) -> ManeuverLabel {
        self.maneuver.unwrap_or(ManeuverLabel::KEEP_MAINTAIN)
    }
}

/// Splits a track into downsampled runs. Only frames on the global
/// `frame % stride == 0` lattice are kept so all agents share sample times.
fn downsampled_runs(track: &Track, stride: i64) -> Vec<Vec<usize>> {
    let mut runs: Vec<Vec<usize>> = Vec::new();
    let mut last: Option<i64> = None;
    for (i, p) in track.points.iter().enumerate() {
        if p.frame.rem_euclid(stride) != 0 {
            continue;
        }
        match (last, runs.last_mut()) {
            (Some(f), Some(run)) if p.frame - f == stride => run.push(i),
            _ => runs.push(vec![i]),
        }
        last = Some(p.frame);
    }
    runs
}

/// Speed at each selected index: the recorded value, or a finite-difference
/// estimate over the downsampled run.
fn run_speeds(track: &Track, run: &[usize], target_hz: u32) -> Vec<f64> {
    let pos = |i: usize| (track.points[run[i]].x, track.points[run[i]].y);
    (0..run.len())
        .map(|k| {
            if let Some(s) = track.points[run[k]].speed {
                return s;
            }
            if run.len() < 2 {
                return 0.0;
            }
            let (a, b) = if k == 0 { (0, 1) } else { (k - 1, k) };
            let (xa, ya) = pos(a);
            let (xb, yb) = pos(b);
            ((xb - xa).powi(2) + (yb - ya).powi(2)).sqrt() * target_hz as f64
        })
        .collect()
}

/// Cuts sliding windows (stride 1 at the target rate) from every track.
/// Neighbors and labels are filled by [`assign_neighbor_grid`] and
/// [`label_maneuver`].
pub fn build_windows(tracks: &[Track], cfg: &WindowConfig) -> Result<Vec<SceneWindow>> {
    let stride = cfg.stride()?;
    let span = cfg.history + cfg.future;
    let mut out = Vec::new();
    for track in tracks {
        for run in downsampled_runs(track, stride) {
            if run.len() < span {
                continue;
            }
            let speeds = run_speeds(track, &run, cfg.target_hz);
            for start in 0..=run.len() - span {
                let idx = &run[start..start + span];
                let origin_pt = &track.points[idx[cfg.history - 1]];
                let origin = [origin_pt.x, origin_pt.y];
                let rel = |i: usize| {
                    let p = &track.points[i];
                    [p.x - origin[0], p.y - origin[1]]
                };
                out.push(SceneWindow {
                    agent_id: track.agent_id,
                    frames: idx.iter().map(|&i| track.points[i].frame).collect(),
                    frame_origin: origin,
                    target_history: idx[..cfg.history].iter().map(|&i| rel(i)).collect(),
                    target_future: idx[cfg.history..].iter().map(|&i| rel(i)).collect(),
                    target_lanes: idx.iter().map(|&i| track.points[i].lane_id).collect(),
                    target_speeds: speeds[start..start + span].to_vec(),
                    neighbors: Vec::new(),
                    grid: OccupancyGrid::default(),
                    maneuver: None,
                });
            }
        }
    }
    Ok(out)
}

/// Lookup of which agents are present at each frame.
#[derive(Debug)]
pub struct TrackIndex<'a> {
    tracks: HashMap<i64, &'a Track>,
    at_frame: BTreeMap<i64, Vec<i64>>,
}

impl<'a> TrackIndex<'a> {
    pub fn new(tracks: &'a [Track]) -> Self {
        let mut at_frame: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
        for t in tracks {
            for p in &t.points {
                at_frame.entry(p.frame).or_default().push(t.agent_id);
            }
        }
        Self {
            tracks: tracks.iter().map(|t| (t.agent_id, t)).collect(),
            at_frame,
        }
    }

    pub fn track(&self, agent: i64) -> Option<&'a Track> {
        self.tracks.get(&agent).copied()
    }

    pub fn agents_at(&self, frame: i64) -> &[i64] {
        self.at_frame.get(&frame).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Places every agent present at the target's last history frame into the
/// 13×5 grid. Agents outside ±90 ft / ±2 lanes, on the target's own cell, or
/// lacking a full history at the window's frames are dropped. When two agents
/// share a cell the one with the smaller |Δy| wins (then the smaller id).
pub fn assign_neighbor_grid(window: &SceneWindow, index: &TrackIndex<'_>) -> (OccupancyGrid, Vec<Neighbor>) {
    let th = window.history_len();
    let frame = window.last_history_frame();
    let target_lane = window.target_lanes[th - 1];
    let origin = window.frame_origin;

    let mut best: BTreeMap<GridCell, (f64, i64)> = BTreeMap::new();
    for &agent in index.agents_at(frame) {
        if agent == window.agent_id {
            continue;
        }
        let Some(p) = index.track(agent).and_then(|t| t.at(frame)) else { continue };
        let dy = p.y - origin[1];
        let Some(cell) = GridCell::locate(dy, p.lane_id - target_lane) else { continue };
        if cell == GridCell::CENTER {
            continue;
        }
        let key = (dy.abs(), agent);
        match best.get(&cell) {
            Some(existing) if (existing.0, existing.1) <= key => {}
            _ => {
                best.insert(cell, key);
            }
        }
    }

    let mut grid = OccupancyGrid::default();
    let mut neighbors = Vec::new();
    for (cell, (_, agent)) in best {
        let track = index.track(agent).expect("indexed agent");
        let history: Option<Vec<[f64; 2]>> = window.frames[..th]
            .iter()
            .map(|&f| track.at(f).map(|p| [p.x - origin[0], p.y - origin[1]]))
            .collect();
        if let Some(history) = history {
            grid.set(cell, Some(agent));
            neighbors.push(Neighbor {
                agent_id: agent,
                cell,
                history,
            });
        }
    }
    (grid, neighbors)
}

/// Builds windows, assigns neighbors and labels every window.
pub fn prepare_windows(tracks: &[Track], cfg: &WindowConfig, labels: &LabelConfig) -> Result<Vec<SceneWindow>> {
    let mut windows = build_windows(tracks, cfg)?;
    let index = TrackIndex::new(tracks);
    for w in &mut windows {
        let (grid, neighbors) = assign_neighbor_grid(w, &index);
        w.grid = grid;
        w.neighbors = neighbors;
        w.maneuver = Some(label_maneuver(w, labels));
    }
    Ok(windows)
}
