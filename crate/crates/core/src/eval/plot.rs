use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::grid::GRID_COLS;
use crate::data::SceneWindow;
use crate::error::{Error, Result};
use crate::traj::Point;

/// Lane width assumed when drawing lane boundaries (meters).
pub const PLOT_LANE_WIDTH: f64 = 3.7;

/// Geometry of one case plot in scene-relative meters (`[lateral,
/// longitudinal]`, target's last observed position at the origin).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    /// Lateral positions of lane boundaries.
    pub lane_boundaries: Vec<f64>,
    pub neighbor_histories: Vec<Vec<Point<f64>>>,
    pub target_history: Vec<Point<f64>>,
    pub truth: Vec<Point<f64>>,
    pub predictions: Vec<Vec<Point<f64>>>,
}

pub fn plot_data(window: &SceneWindow, predictions: &[Vec<Point<f64>>]) -> PlotData {
    let half = (GRID_COLS / 2) as f64;
    let lane_boundaries = (0..=GRID_COLS)
        .map(|j| (j as f64 - half - 0.5) * PLOT_LANE_WIDTH)
        .collect();
    PlotData {
        lane_boundaries,
        neighbor_histories: window.neighbors.iter().map(|n| n.history.clone()).collect(),
        target_history: window.target_history.clone(),
        truth: window.target_future.clone(),
        predictions: predictions.to_vec(),
    }
}

struct Frame {
    min_lon: f64,
    max_lat: f64,
    scale: f64,
    width: f64,
    height: f64,
}

const MARGIN: f64 = 20.0;

impl Frame {
    fn new(d: &PlotData) -> Self {
        let all = d
            .neighbor_histories
            .iter()
            .chain(d.predictions.iter())
            .flatten()
            .chain(d.target_history.iter())
            .chain(d.truth.iter());
        let (mut lo, mut hi) = (0.0f64, 0.0f64);
        for p in all {
            lo = lo.min(p[1]);
            hi = hi.max(p[1]);
        }
        let min_lat = d.lane_boundaries.iter().copied().fold(f64::INFINITY, f64::min);
        let max_lat = d.lane_boundaries.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let scale = 6.0;
        Self {
            min_lon: lo - 5.0,
            max_lat,
            scale,
            width: (hi - lo + 10.0) * scale + 2.0 * MARGIN,
            height: (max_lat - min_lat) * scale + 2.0 * MARGIN,
        }
    }

    fn x(&self, lon: f64) -> f64 {
        MARGIN + (lon - self.min_lon) * self.scale
    }

    fn y(&self, lat: f64) -> f64 {
        MARGIN + (self.max_lat - lat) * self.scale
    }

    fn polyline(&self, s: &mut String, pts: &[Point<f64>], style: &str) {
        if pts.is_empty() {
            return;
        }
        let coords: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", self.x(p[1]), self.y(p[0]))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" {style} points="{}"/>"#, coords.join(" "));
    }
}

/// SVG rendering of the plot geometry. Road runs left to right.
pub fn render_svg(d: &PlotData) -> String {
    let f = Frame::new(d);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.2} {:.2}">"#,
        f.width, f.height, f.width, f.height
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, &b) in d.lane_boundaries.iter().enumerate() {
        let dash = if i == 0 || i + 1 == d.lane_boundaries.len() { "" } else { r#" stroke-dasharray="8 6""# };
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray"{dash}/>"#,
            MARGIN,
            f.y(b),
            f.width - MARGIN,
            f.y(b)
        );
    }
    for h in &d.neighbor_histories {
        f.polyline(&mut s, h, r#"stroke="steelblue" stroke-width="2""#);
    }
    for p in &d.predictions {
        f.polyline(&mut s, p, r#"stroke="orange" stroke-width="1" stroke-opacity="0.6""#);
    }
    f.polyline(&mut s, &d.target_history, r#"stroke="black" stroke-width="2.5""#);
    f.polyline(&mut s, &d.truth, r#"stroke="green" stroke-width="2.5" stroke-dasharray="4 3""#);
    s.push_str("</svg>\n");
    s
}

/// Writes the case plot of `window` with its predicted futures as SVG.
pub fn emit_case_plot(window: &SceneWindow, predictions: &[Vec<Point<f64>>], path: impl AsRef<Path>) -> Result<PlotData> {
    let path = path.as_ref();
    let data = plot_data(window, predictions);
    std::fs::write(path, render_svg(&data)).map_err(|e| Error::io(path, e))?;
    Ok(data)
}
