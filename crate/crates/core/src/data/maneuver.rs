use serde::{Deserialize, Serialize};

use super::windows::SceneWindow;

pub const NUM_MODES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Lateral {
    Left,
    Keep,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Longitudinal {
    Brake,
    Maintain,
}

impl Lateral {
    pub const ALL: [Lateral; 3] = [Lateral::Left, Lateral::Keep, Lateral::Right];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl Longitudinal {
    pub const ALL: [Longitudinal; 2] = [Longitudinal::Brake, Longitudinal::Maintain];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// One of the six joint lateral × longitudinal maneuver modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ManeuverLabel {
    pub lateral: Lateral,
    pub longitudinal: Longitudinal,
}

impl ManeuverLabel {
    pub const KEEP_MAINTAIN: ManeuverLabel = ManeuverLabel {
        lateral: Lateral::Keep,
        longitudinal: Longitudinal::Maintain,
    };

    pub fn new(lateral: Lateral, longitudinal: Longitudinal) -> Self {
        Self { lateral, longitudinal }
    }

    /// `2 · lateral + longitudinal`, in `0..6`.
    pub fn mode_index(self) -> usize {
        2 * self.lateral.index() + self.longitudinal.index()
    }

    pub fn from_mode_index(i: usize) -> Option<Self> {
        (i < NUM_MODES).then(|| Self::new(Lateral::ALL[i / 2], Longitudinal::ALL[i % 2]))
    }
}

/// Parameters of the maneuver labelling rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelConfig {
    /// BRAKE when mean future speed falls below this fraction of the current speed.
    pub brake_ratio: f64,
    /// Lane ids grow to the right (smaller id = left lane).
    pub smaller_lane_is_left: bool,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self {
            brake_ratio: 0.8,
            smaller_lane_is_left: true,
        }
    }
}

/// Labels a window from its target lane ids and speeds.
///
/// Lateral: direction of the first lane change inside the future horizon.
/// Longitudinal: BRAKE iff mean future speed < `brake_ratio` × speed at the
/// last history step; a zero current speed is MAINTAIN.
pub fn label_maneuver(window: &SceneWindow, cfg: &LabelConfig) -> ManeuverLabel {
    let th = window.target_history.len();
    let lanes = &window.target_lanes;
    let current_lane = lanes[th - 1];
    let lateral = match lanes[th..].iter().find(|&&l| l != current_lane) {
        None => Lateral::Keep,
        Some(&l) => {
            if (l < current_lane) == cfg.smaller_lane_is_left {
                Lateral::Left
            } else {
                Lateral::Right
            }
        }
    };

    let speeds = &window.target_speeds;
    let current = speeds[th - 1];
    let future = &speeds[th..];
    let longitudinal = if current <= 0.0 || future.is_empty() {
        Longitudinal::Maintain
    } else {
        let mean = future.iter().sum::<f64>() / future.len() as f64;
        if mean < cfg.brake_ratio * current {
            Longitudinal::Brake
        } else {
            Longitudinal::Maintain
        }
    };
    ManeuverLabel { lateral, longitudinal }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(lanes: Vec<i64>, speeds: Vec<f64>, th: usize) -> SceneWindow {
        let n = lanes.len();
        SceneWindow {
            target_history: vec![[0.0, 0.0]; th],
            target_future: vec![[0.0, 0.0]; n - th],
            target_lanes: lanes,
            target_speeds: speeds,
            ..SceneWindow::default()
        }
    }

    #[test]
    fn mode_index_layout() {
        for i in 0..NUM_MODES {
            let m = ManeuverLabel::from_mode_index(i).unwrap();
            assert_eq!(m.mode_index(), i);
            assert_eq!(i, 2 * m.lateral.index() + m.longitudinal.index());
        }
        assert!(ManeuverLabel::from_mode_index(6).is_none());
    }

    #[test]
    fn steady_driving_is_keep_maintain() {
        let w = window(vec![2; 40], vec![10.0; 40], 15);
        assert_eq!(label_maneuver(&w, &LabelConfig::default()), ManeuverLabel::KEEP_MAINTAIN);
    }

    #[test]
    fn lane_decrease_is_left() {
        let mut lanes = vec![2; 40];
        for l in lanes.iter_mut().skip(15 + 9) {
            *l = 1;
        }
        let w = window(lanes.clone(), vec![10.0; 40], 15);
        assert_eq!(label_maneuver(&w, &LabelConfig::default()).lateral, Lateral::Left);
        let flipped = LabelConfig {
            smaller_lane_is_left: false,
            ..LabelConfig::default()
        };
        assert_eq!(label_maneuver(&w, &flipped).lateral, Lateral::Right);
    }

    #[test]
    fn slowing_to_seventy_percent_is_brake() {
        let mut speeds = vec![10.0; 15];
        speeds.extend(vec![7.0; 25]);
        let w = window(vec![1; 40], speeds, 15);
        assert_eq!(label_maneuver(&w, &LabelConfig::default()).longitudinal, Longitudinal::Brake);
    }

    #[test]
    fn standing_still_is_maintain() {
        let w = window(vec![1; 40], vec![0.0; 40], 15);
        assert_eq!(label_maneuver(&w, &LabelConfig::default()).longitudinal, Longitudinal::Maintain);
    }
}
