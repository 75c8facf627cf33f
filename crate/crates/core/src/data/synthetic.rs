//! Seeded generator of small highway scenes with known maneuvers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::tracks::{Track, TrackPoint};
use crate::autograd::sigmoid;
use crate::error::{Error, Result};

/// Relative frequency of each generated behaviour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManeuverMix {
    pub straight: f64,
    pub lane_change: f64,
    pub brake: f64,
}

impl ManeuverMix {
    pub const STRAIGHT_ONLY: ManeuverMix = ManeuverMix {
        straight: 1.0,
        lane_change: 0.0,
        brake: 0.0,
    };
}

impl Default for ManeuverMix {
    fn default() -> Self {
        Self {
            straight: 0.6,
            lane_change: 0.25,
            brake: 0.15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Behaviour {
    Straight,
    LaneChange { direction: i64 },
    Brake,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub lanes: i64,
    pub lane_width: f64,
    pub agents: usize,
    pub duration_s: f64,
    pub hz: u32,
    pub mix: ManeuverMix,
    /// Standard deviation of the additive position noise (meters).
    pub noise_sigma: f64,
    pub seed: u64,
    pub speed_range: (f64, f64),
    /// Initial longitudinal positions are spread uniformly over this length.
    pub road_span: f64,
    pub lane_change_duration_s: f64,
    pub decel_range: (f64, f64),
    /// Braking stops at this fraction of the initial speed.
    pub min_speed_fraction: f64,
    /// Maneuvers start at a time drawn from this range (seconds).
    pub onset_range_s: (f64, f64),
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            lanes: 3,
            lane_width: 3.7,
            agents: 40,
            duration_s: 12.0,
            hz: 10,
            mix: ManeuverMix::default(),
            noise_sigma: 0.05,
            seed: 0,
            speed_range: (10.0, 16.0),
            road_span: 250.0,
            lane_change_duration_s: 4.0,
            decel_range: (1.5, 2.5),
            min_speed_fraction: 0.5,
            onset_range_s: (0.5, 2.0),
        }
    }
}

impl SyntheticConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.duration_s > 0.0) {
            return bad("duration must be positive");
        }
        if self.lanes < 1 || self.hz == 0 {
            return bad("need at least one lane and a positive rate");
        }
        let m = self.mix;
        if m.straight < 0.0 || m.lane_change < 0.0 || m.brake < 0.0 || m.straight + m.lane_change + m.brake <= 0.0 {
            return bad("maneuver mix must be non-negative with a positive total");
        }
        if self.speed_range.0 > self.speed_range.1
            || self.decel_range.0 > self.decel_range.1
            || self.onset_range_s.0 > self.onset_range_s.1
            || self.noise_sigma < 0.0
            || self.lane_change_duration_s <= 0.0
        {
            return bad("invalid range in synthetic config");
        }
        Ok(())
    }

    fn lane_center(&self, lane: i64) -> f64 {
        (lane as f64 - 0.5) * self.lane_width
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Generates one track per agent.
///
/// Straight agents keep lane and speed, lane changers follow a logistic
/// lateral profile into an adjacent lane, brakers decelerate linearly down to
/// a floor speed. Lane ids grow to the right, matching the lateral axis.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Vec<Track>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise_sigma.max(0.0)).expect("valid sigma");
    let steps = (cfg.duration_s * cfg.hz as f64).round() as i64;
    let dt = 1.0 / cfg.hz as f64;
    let total = cfg.mix.straight + cfg.mix.lane_change + cfg.mix.brake;

    let mut tracks = Vec::with_capacity(cfg.agents);
    for a in 0..cfg.agents {
        let agent_id = a as i64 + 1;
        let lane0 = rng.gen_range(1..=cfg.lanes);
        let y0 = uniform(&mut rng, (0.0, cfg.road_span));
        let v0 = uniform(&mut rng, cfg.speed_range);
        let onset = uniform(&mut rng, cfg.onset_range_s);
        let decel = uniform(&mut rng, cfg.decel_range);
        let u = rng.gen_range(0.0..total);
        let behaviour = if u < cfg.mix.straight {
            Behaviour::Straight
        } else if u < cfg.mix.straight + cfg.mix.lane_change {
            let dir = match (lane0 > 1, lane0 < cfg.lanes) {
                (true, true) => {
                    if rng.gen_bool(0.5) {
                        -1
                    } else {
                        1
                    }
                }
                (true, false) => -1,
                (false, true) => 1,
                (false, false) => 0,
            };
            if dir == 0 {
                Behaviour::Straight
            } else {
                Behaviour::LaneChange { direction: dir }
            }
        } else {
            Behaviour::Brake
        };

        let v_floor = v0 * cfg.min_speed_fraction;
        let brake_len = if decel > 0.0 { (v0 - v_floor) / decel } else { 0.0 };
        let mut points = Vec::with_capacity(steps as usize);
        for k in 0..steps {
            let t = k as f64 * dt;
            let (dx, y, speed, lane) = match behaviour {
                Behaviour::Straight => (0.0, y0 + v0 * t, v0, lane0),
                Behaviour::LaneChange { direction } => {
                    let mid = onset + cfg.lane_change_duration_s / 2.0;
                    let frac = sigmoid((t - mid) / (cfg.lane_change_duration_s / 10.0));
                    let lane = if frac >= 0.5 { lane0 + direction } else { lane0 };
                    (direction as f64 * cfg.lane_width * frac, y0 + v0 * t, v0, lane)
                }
                Behaviour::Brake => {
                    let tb = (t - onset).clamp(0.0, brake_len);
                    let coast = (t - onset - brake_len).max(0.0);
                    let before = t.min(onset);
                    let y = y0 + v0 * before + v0 * tb - 0.5 * decel * tb * tb + v_floor * coast;
                    let speed = if t <= onset { v0 } else { (v0 - decel * tb).max(v_floor) };
                    (0.0, y, speed, lane0)
                }
            };
            points.push(TrackPoint {
                agent_id,
                frame: k,
                x: cfg.lane_center(lane0) + dx + noise.sample(&mut rng),
                y: y + noise.sample(&mut rng),
                lane_id: lane,
                speed: Some(speed),
            });
        }
        tracks.push(Track { agent_id, points });
    }
    Ok(tracks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::maneuver::{LabelConfig, Lateral, ManeuverLabel};
    use crate::data::windows::{prepare_windows, WindowConfig};

    #[test]
    fn straight_mix_labels_keep_maintain() {
        let cfg = SyntheticConfig {
            mix: ManeuverMix::STRAIGHT_ONLY,
            agents: 10,
            ..SyntheticConfig::default()
        };
        let tracks = generate_synthetic(&cfg).unwrap();
        let windows = prepare_windows(&tracks, &WindowConfig::new(cfg.hz), &LabelConfig::default()).unwrap();
        assert!(!windows.is_empty());
        assert!(windows.iter().all(|w| w.label() == ManeuverLabel::KEEP_MAINTAIN));
    }

    #[test]
    fn single_lane_changer_has_one_direction() {
        let cfg = SyntheticConfig {
            mix: ManeuverMix {
                straight: 0.0,
                lane_change: 1.0,
                brake: 0.0,
            },
            agents: 1,
            seed: 4,
            onset_range_s: (5.0, 5.0),
            ..SyntheticConfig::default()
        };
        let tracks = generate_synthetic(&cfg).unwrap();
        let lanes: Vec<i64> = tracks[0].points.iter().map(|p| p.lane_id).collect();
        let changes = lanes.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(changes, 1);
        let windows = prepare_windows(&tracks, &WindowConfig::new(cfg.hz), &LabelConfig::default()).unwrap();
        let lateral: Vec<Lateral> = windows
            .iter()
            .map(|w| w.label().lateral)
            .filter(|l| *l != Lateral::Keep)
            .collect();
        assert!(!lateral.is_empty());
        assert!(lateral.iter().all(|l| *l == lateral[0]));
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = SyntheticConfig::default();
        assert_eq!(generate_synthetic(&cfg).unwrap(), generate_synthetic(&cfg).unwrap());
    }

    #[test]
    fn non_positive_duration_is_rejected() {
        let cfg = SyntheticConfig {
            duration_s: 0.0,
            ..SyntheticConfig::default()
        };
        assert!(matches!(generate_synthetic(&cfg), Err(Error::Config(_))));
    }
}
