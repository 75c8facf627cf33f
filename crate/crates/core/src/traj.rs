//! Small helpers on trajectories stored as `[x, y]` point lists.

use ndarray::Array2;

use crate::scalar::Scalar;

pub type Point<T> = [T; 2];
pub type Trajectory<T> = Vec<Point<T>>;

/// Number of trailing steps used to estimate the current velocity.
pub const VELOCITY_WINDOW: usize = 4;

/// Constant-velocity extrapolation of a history whose last point is the
/// origin: `future[t] = (t + 1) · v`, with `v` the mean displacement per step
/// over the last [`VELOCITY_WINDOW`] steps.
pub fn constant_velocity<T: Scalar>(history: &[Point<T>], future: usize) -> Trajectory<T> {
    let n = history.len();
    let k = VELOCITY_WINDOW.min(n.saturating_sub(1));
    let v = if k == 0 {
        [T::zero(), T::zero()]
    } else {
        let kk = T::lit(k as f64);
        [
            (history[n - 1][0] - history[n - 1 - k][0]) / kk,
            (history[n - 1][1] - history[n - 1 - k][1]) / kk,
        ]
    };
    (1..=future)
        .map(|t| {
            let t = T::lit(t as f64);
            [v[0] * t, v[1] * t]
        })
        .collect()
}

/// `n × 2` matrix of points.
pub fn to_matrix<T: Scalar>(points: &[Point<T>]) -> Array2<T> {
    Array2::from_shape_fn((points.len(), 2), |(i, j)| points[i][j])
}

pub fn from_matrix<T: Scalar>(m: &Array2<T>) -> Trajectory<T> {
    m.rows().into_iter().map(|r| [r[0], r[1]]).collect()
}

/// Flattens to `[x_1 … x_T, y_1 … y_T]`.
pub fn flatten_planar<T: Scalar>(points: &[Point<T>]) -> Vec<T> {
    points.iter().map(|p| p[0]).chain(points.iter().map(|p| p[1])).collect()
}

pub fn unflatten_planar<T: Scalar>(flat: &[T]) -> Trajectory<T> {
    let n = flat.len() / 2;
    (0..n).map(|i| [flat[i], flat[n + i]]).collect()
}

pub fn convert<A: Scalar, B: Scalar>(points: &[Point<A>]) -> Trajectory<B> {
    points.iter().map(|p| [B::lit(p[0].as_f64()), B::lit(p[1].as_f64())]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_velocity_extends_motion() {
        let hist: Vec<[f64; 2]> = (0..15).map(|i| [0.0, (i as f64 - 14.0) * 2.0]).collect();
        let cv = constant_velocity(&hist, 3);
        assert_eq!(cv, vec![[0.0, 2.0], [0.0, 4.0], [0.0, 6.0]]);
        assert_eq!(constant_velocity(&[[0.0f64, 0.0]], 2), vec![[0.0, 0.0]; 2]);
    }

    #[test]
    fn planar_layout_round_trips() {
        let pts = vec![[1.0f64, 2.0], [3.0, 4.0]];
        assert_eq!(flatten_planar(&pts), vec![1.0, 3.0, 2.0, 4.0]);
        assert_eq!(unflatten_planar(&flatten_planar(&pts)), pts);
    }
}
