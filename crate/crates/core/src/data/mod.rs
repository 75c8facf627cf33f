//! Track ingestion, scene windows, the neighbor occupancy grid, maneuver
//! labels, dataset splitting and synthetic scene generation.

pub mod cache;
pub mod grid;
pub mod maneuver;
pub mod split;
pub mod synthetic;
pub mod tracks;
pub mod windows;

pub use cache::{CacheKey, WindowCache};
pub use grid::{GridCell, OccupancyGrid};
pub use maneuver::{label_maneuver, LabelConfig, Lateral, Longitudinal, ManeuverLabel, NUM_MODES};
pub use split::{split_dataset, Split};
pub use synthetic::{generate_synthetic, ManeuverMix, SyntheticConfig};
pub use tracks::{ingest_tracks, write_tracks, LengthUnit, Track, TrackPoint};
pub use windows::{assign_neighbor_grid, build_windows, prepare_windows, Neighbor, SceneWindow, TrackIndex, WindowConfig};
