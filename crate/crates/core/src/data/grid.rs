use serde::{Deserialize, Serialize};

use super::tracks::FEET_TO_METERS;

pub const GRID_ROWS: usize = 13;
pub const GRID_COLS: usize = 5;
pub const GRID_CELLS: usize = GRID_ROWS * GRID_COLS;
pub const CENTER_ROW: usize = 6;
pub const CENTER_COL: usize = 2;
/// Row-major index of the target's own cell.
pub const CENTER_CELL: usize = CENTER_ROW * GRID_COLS + CENTER_COL;
/// Longitudinal extent of one grid row (15 ft).
pub const ROW_SPACING_M: f64 = 15.0 * FEET_TO_METERS;
/// Neighbors further than this (90 ft) ahead or behind are ignored.
pub const MAX_LONGITUDINAL_M: f64 = 90.0 * FEET_TO_METERS;
pub const MAX_LANE_OFFSET: i64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridCell {
    pub row: usize,
    pub col: usize,
}

impl GridCell {
    pub const CENTER: GridCell = GridCell {
        row: CENTER_ROW,
        col: CENTER_COL,
    };

    pub fn index(self) -> usize {
        self.row * GRID_COLS + self.col
    }

    pub fn from_index(i: usize) -> Self {
        Self {
            row: i / GRID_COLS,
            col: i % GRID_COLS,
        }
    }

    /// Cell of an agent `dy` meters ahead of the target and `lane_offset`
    /// lanes to its right. `None` when outside the grid.
    pub fn locate(dy: f64, lane_offset: i64) -> Option<Self> {
        if !dy.is_finite() || dy.abs() > MAX_LONGITUDINAL_M || lane_offset.abs() > MAX_LANE_OFFSET {
            return None;
        }
        let row = (dy / ROW_SPACING_M).round() as i64 + CENTER_ROW as i64;
        let col = lane_offset + CENTER_COL as i64;
        if !(0..GRID_ROWS as i64).contains(&row) {
            return None;
        }
        Some(Self {
            row: row as usize,
            col: col as usize,
        })
    }
}

/// 13×5 occupancy layout centred on the target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    /// Row-major occupant agent id per cell.
    occupants: Vec<Option<i64>>,
}

impl Default for OccupancyGrid {
    fn default() -> Self {
        Self {
            occupants: vec![None; GRID_CELLS],
        }
    }
}

impl OccupancyGrid {
    pub fn occupant(&self, cell: GridCell) -> Option<i64> {
        self.occupants[cell.index()]
    }

    pub(crate) fn set(&mut self, cell: GridCell, agent: Option<i64>) {
        self.occupants[cell.index()] = agent;
    }

    pub fn is_occupied(&self, cell: GridCell) -> bool {
        self.occupants[cell.index()].is_some()
    }

    /// Occupancy mask, `mask[row][col]`.
    pub fn mask(&self) -> [[bool; GRID_COLS]; GRID_ROWS] {
        let mut m = [[false; GRID_COLS]; GRID_ROWS];
        for (i, o) in self.occupants.iter().enumerate() {
            m[i / GRID_COLS][i % GRID_COLS] = o.is_some();
        }
        m
    }

    pub fn occupied_cells(&self) -> impl Iterator<Item = GridCell> + '_ {
        self.occupants
            .iter()
            .enumerate()
            .filter(|(_, o)| o.is_some())
            .map(|(i, _)| GridCell::from_index(i))
    }

    pub fn count(&self) -> usize {
        self.occupants.iter().filter(|o| o.is_some()).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_constants() {
        assert!((ROW_SPACING_M - 4.572).abs() < 1e-12);
        assert!((MAX_LONGITUDINAL_M - 6.0 * ROW_SPACING_M).abs() < 1e-12);
        assert_eq!(CENTER_CELL, 32);
    }

    #[test]
    fn thirty_feet_ahead_one_lane_left() {
        let cell = GridCell::locate(30.0 * FEET_TO_METERS, -1).unwrap();
        assert_eq!(cell, GridCell { row: 8, col: 1 });
    }

    #[test]
    fn beyond_ninety_feet_is_outside() {
        assert!(GridCell::locate(100.0 * FEET_TO_METERS, 0).is_none());
        assert!(GridCell::locate(-100.0 * FEET_TO_METERS, 0).is_none());
        assert!(GridCell::locate(0.0, 3).is_none());
        assert_eq!(GridCell::locate(MAX_LONGITUDINAL_M, 2), Some(GridCell { row: 12, col: 4 }));
        assert_eq!(GridCell::locate(-MAX_LONGITUDINAL_M, -2), Some(GridCell { row: 0, col: 0 }));
    }

    #[test]
    fn mask_tracks_occupants() {
        let mut g = OccupancyGrid::default();
        g.set(GridCell { row: 3, col: 4 }, Some(9));
        let m = g.mask();
        assert!(m[3][4]);
        assert_eq!(m.iter().flatten().filter(|b| **b).count(), 1);
        assert_eq!(g.count(), 1);
    }
}
