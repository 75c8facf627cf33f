use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FEET_TO_METERS: f64 = 0.3048;

/// One observation of one agent. Coordinates are meters once ingested.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub agent_id: i64,
    pub frame: i64,
    /// Lateral position.
    pub x: f64,
    /// Longitudinal position.
    pub y: f64,
    pub lane_id: i64,
    pub speed: Option<f64>,
}

/// All observations of a single agent, sorted by frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub agent_id: i64,
    pub points: Vec<TrackPoint>,
}

impl Track {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the point recorded at `frame`, if any.
    pub fn find(&self, frame: i64) -> Option<usize> {
        self.points.binary_search_by_key(&frame, |p| p.frame).ok()
    }

    pub fn at(&self, frame: i64) -> Option<&TrackPoint> {
        self.find(frame).map(|i| &self.points[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthUnit {
    Feet,
    Meters,
}

impl LengthUnit {
    pub fn to_meters(self) -> f64 {
        match self {
            LengthUnit::Feet => FEET_TO_METERS,
            LengthUnit::Meters => 1.0,
        }
    }
}

impl std::str::FromStr for LengthUnit {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "feet" | "ft" => Ok(LengthUnit::Feet),
            "meters" | "m" => Ok(LengthUnit::Meters),
            other => Err(Error::Config(format!("unknown unit {other:?}"))),
        }
    }
}

const REQUIRED: [&str; 5] = ["agent_id", "frame", "x", "y", "lane_id"];

/// Reads a track CSV (`agent_id,frame,x,y,lane_id[,speed]`, header required),
/// converting lengths to meters and grouping rows per agent.
pub fn ingest_tracks(path: impl AsRef<Path>, unit: LengthUnit) -> Result<Vec<Track>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_tracks(file, unit)
}

pub fn read_tracks<R: std::io::Read>(reader: R, unit: LengthUnit) -> Result<Vec<Track>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(Error::Parse { line: 1, message: e.to_string() }),
    };
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    let mut cols = [0usize; 5];
    for (slot, name) in cols.iter_mut().zip(REQUIRED) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse { line: 1, message: format!("missing column {name}") })?;
    }
    let speed_col = headers.iter().position(|h| h == "speed");
    let scale = unit.to_meters();

    let mut by_agent: BTreeMap<i64, Vec<TrackPoint>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize| -> Result<&str> {
            record.get(i).ok_or_else(|| Error::Parse { line, message: format!("missing field {i}") })
        };
        let int = |i: usize, name: &str| -> Result<i64> {
            field(i)?
                .parse::<i64>()
                .map_err(|e| Error::Parse { line, message: format!("{name}: {e}") })
        };
        let float = |i: usize, name: &str| -> Result<f64> {
            let v = field(i)?
                .parse::<f64>()
                .map_err(|e| Error::Parse { line, message: format!("{name}: {e}") })?;
            if !v.is_finite() {
                return Err(Error::Parse { line, message: format!("{name} is not finite") });
            }
            Ok(v)
        };
        let lane_id = int(cols[4], "lane_id")?;
        if lane_id < 1 {
            return Err(Error::Parse { line, message: format!("lane_id {lane_id} < 1") });
        }
        let speed = match speed_col {
            Some(c) if !field(c)?.is_empty() => Some(float(c, "speed")? * scale),
            _ => None,
        };
        let p = TrackPoint {
            agent_id: int(cols[0], "agent_id")?,
            frame: int(cols[1], "frame")?,
            x: float(cols[2], "x")? * scale,
            y: float(cols[3], "y")? * scale,
            lane_id,
            speed,
        };
        by_agent.entry(p.agent_id).or_default().push(p);
    }

    by_agent
        .into_iter()
        .map(|(agent_id, mut points)| {
            points.sort_by_key(|p| p.frame);
            if points.windows(2).any(|w| w[0].frame >= w[1].frame) {
                return Err(Error::Validation(format!(
                    "agent {agent_id} has non-monotone (repeated) frames"
                )));
            }
            Ok(Track { agent_id, points })
        })
        .collect()
}

/// Writes tracks in the same CSV schema, lengths in meters.
pub fn write_tracks(path: impl AsRef<Path>, tracks: &[Track]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_tracks_to(file, tracks).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn write_tracks_to<W: std::io::Write>(writer: W, tracks: &[Track]) -> Result<()> {
    let with_speed = tracks.iter().flat_map(|t| &t.points).any(|p| p.speed.is_some());
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::io("<csv>", std::io::Error::other(e));
    let mut header = REQUIRED.to_vec();
    if with_speed {
        header.push("speed");
    }
    w.write_record(&header).map_err(csv_err)?;
    for p in tracks.iter().flat_map(|t| &t.points) {
        let mut row = vec![
            p.agent_id.to_string(),
            p.frame.to_string(),
            p.x.to_string(),
            p.y.to_string(),
            p.lane_id.to_string(),
        ];
        if with_speed {
            row.push(p.speed.map(|s| s.to_string()).unwrap_or_default());
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str, unit: LengthUnit) -> Result<Vec<Track>> {
        read_tracks(text.as_bytes(), unit)
    }

    #[test]
    fn feet_are_converted_to_meters() {
        let tracks = parse("agent_id,frame,x,y,lane_id\n1,1,90,0,2\n", LengthUnit::Feet).unwrap();
        assert!((tracks[0].points[0].x - 27.432).abs() < 1e-12);
    }

    #[test]
    fn empty_file_gives_no_tracks() {
        assert!(parse("", LengthUnit::Meters).unwrap().is_empty());
        assert!(parse("agent_id,frame,x,y,lane_id\n", LengthUnit::Meters).unwrap().is_empty());
    }

    #[test]
    fn three_rows_make_one_track() {
        let text = "agent_id,frame,x,y,lane_id\n7,3,0,2,1\n7,1,0,0,1\n7,2,0,1,1\n";
        let tracks = parse(text, LengthUnit::Meters).unwrap();
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].len(), 3);
        let frames: Vec<i64> = tracks[0].points.iter().map(|p| p.frame).collect();
        assert_eq!(frames, vec![1, 2, 3]);
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = "agent_id,frame,x,y,lane_id\n1,1,0,0,1\n1,2,zero,0,1\n";
        match parse(text, LengthUnit::Meters) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn repeated_frame_names_the_agent() {
        let text = "agent_id,frame,x,y,lane_id\n42,1,0,0,1\n42,1,0,1,1\n";
        match parse(text, LengthUnit::Meters) {
            Err(Error::Validation(msg)) => assert!(msg.contains("42")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lane_zero_is_rejected() {
        assert!(parse("agent_id,frame,x,y,lane_id\n1,1,0,0,0\n", LengthUnit::Meters).is_err());
    }

    fn arb_tracks() -> impl Strategy<Value = Vec<Track>> {
        prop::collection::btree_map(
            0i64..50,
            prop::collection::vec(
                (-1e4f64..1e4, -1e4f64..1e4, 1i64..8, prop::option::of(0f64..60.0)),
                1..12,
            ),
            0..5,
        )
        .prop_map(|agents| {
            agents
                .into_iter()
                .map(|(agent_id, pts)| {
                    let all_speed = pts.iter().all(|p| p.3.is_some());
                    Track {
                        agent_id,
                        points: pts
                            .into_iter()
                            .enumerate()
                            .map(|(i, (x, y, lane_id, speed))| TrackPoint {
                                agent_id,
                                frame: 2 * i as i64 + 1,
                                x,
                                y,
                                lane_id,
                                speed: if all_speed { speed } else { None },
                            })
                            .collect(),
                    }
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn write_then_ingest_round_trips(tracks in arb_tracks()) {
            let mut buf = Vec::new();
            write_tracks_to(&mut buf, &tracks).unwrap();
            let back = read_tracks(buf.as_slice(), LengthUnit::Meters).unwrap();
            prop_assert_eq!(back, tracks);
        }
    }
}
