//! Finite state and report grids.
//!
//! The continuous state space is truncated to a symmetric uniform grid
//! containing 0 exactly. Grid points are generated as `index * step` over a
//! signed integer index range, so symmetry about 0 is exact in floating
//! point, not merely approximate.

use serde::{Deserialize, Serialize};

use crate::error::ValidationError;

/// Relative spacing tolerance for accepting a point list as uniform.
pub const SPACING_REL_TOL: f64 = 1e-12;

/// A uniform, symmetric grid of real points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    points: Vec<f64>,
    step: f64,
}

impl Grid {
    /// Builds a grid symmetric about 0 spanning `[-half_extent, half_extent]`.
    ///
    /// `half_extent` must be an integer multiple of `step`; points are
    /// `k * step` for `k` in `-n..=n`.
    pub fn symmetric(half_extent: f64, step: f64) -> Result<Self, ValidationError> {
        if !(step > 0.0) || !step.is_finite() || !half_extent.is_finite() || half_extent <= 0.0 {
            return Err(ValidationError::BadGrid(format!(
                "need finite half_extent > 0 and step > 0, got half_extent={half_extent}, step={step}"
            )));
        }
        let n = (half_extent / step).round() as i64;
        if n < 1 || ((n as f64) * step - half_extent).abs() > step * 1e-9 {
            return Err(ValidationError::BadGrid(format!(
                "half_extent {half_extent} is not an integer multiple of step {step}"
            )));
        }
        let points = (-n..=n).map(|k| k as f64 * step).collect();
        Ok(Self { points, step })
    }

    /// Validates an explicit point list: strictly increasing, uniform
    /// spacing, contains 0, symmetric about 0.
    pub fn from_points(points: Vec<f64>) -> Result<Self, ValidationError> {
        if points.len() < 3 {
            return Err(ValidationError::BadGrid(
                "grid needs at least 3 points".into(),
            ));
        }
        let step = points[1] - points[0];
        if !(step > 0.0) {
            return Err(ValidationError::BadGrid("grid not increasing".into()));
        }
        for w in points.windows(2) {
            let d = w[1] - w[0];
            if d <= 0.0 || ((d - step).abs() > SPACING_REL_TOL * step.max(1.0)) {
                return Err(ValidationError::BadGrid(format!(
                    "non-uniform spacing: {d} vs {step}"
                )));
            }
        }
        let grid = Self { points, step };
        if grid.index_of(0.0).is_none() {
            return Err(ValidationError::BadGrid("grid does not contain 0".into()));
        }
        for &p in &grid.points {
            if grid.index_of(-p).is_none() {
                return Err(ValidationError::BadGrid(format!(
                    "grid not symmetric about 0: missing {}",
                    -p
                )));
            }
        }
        Ok(grid)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.points[0]
    }

    pub fn max(&self) -> f64 {
        *self.points.last().unwrap()
    }

    /// Index of the grid point equal to `x` (within spacing tolerance), if any.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let idx = ((x - self.points[0]) / self.step).round();
        if idx < 0.0 || idx >= self.points.len() as f64 {
            return None;
        }
        let i = idx as usize;
        if (self.points[i] - x).abs() <= SPACING_REL_TOL * self.step.max(1.0) {
            Some(i)
        } else {
            None
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.index_of(x).is_some()
    }

    pub fn point(&self, i: usize) -> f64 {
        self.points[i]
    }
}

/// Grid of realizable states θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateGrid(pub Grid);

/// Grid of deliverable reports r; must cover the state range and every
/// reach value (the latter is checked after reach computation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportGrid(pub Grid);

impl StateGrid {
    pub fn grid(&self) -> &Grid {
        &self.0
    }
}

impl ReportGrid {
    pub fn grid(&self) -> &Grid {
        &self.0
    }

    /// The report grid must extend at least as far as the state grid and use
    /// the same step.
    pub fn validate_against(&self, states: &StateGrid) -> Result<(), ValidationError> {
        let (r, s) = (self.grid(), states.grid());
        if (r.step() - s.step()).abs() > SPACING_REL_TOL * s.step() {
            return Err(ValidationError::BadGrid(format!(
                "report step {} differs from state step {}",
                r.step(),
                s.step()
            )));
        }
        if r.min() > s.min() || r.max() < s.max() {
            return Err(ValidationError::BadGrid(
                "report grid does not cover the state grid".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_grid_contains_zero_exactly() {
        let g = Grid::symmetric(2.0, 0.02).unwrap();
        assert_eq!(g.len(), 201);
        assert_eq!(g.point(100), 0.0);
        assert_eq!(g.min(), -2.0);
        assert_eq!(g.max(), 2.0);
    }

    #[test]
    fn symmetry_is_exact() {
        let g = Grid::symmetric(4.0, 0.02).unwrap();
        for i in 0..g.len() {
            let j = g.index_of(-g.point(i)).expect("mirror point present");
            assert_eq!(g.point(j), -g.point(i));
        }
    }

    #[test]
    fn index_lookup_roundtrips() {
        let g = Grid::symmetric(2.0, 0.02).unwrap();
        for i in 0..g.len() {
            assert_eq!(g.index_of(g.point(i)), Some(i));
        }
        assert_eq!(g.index_of(0.011), None);
        assert_eq!(g.index_of(2.02), None);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Grid::symmetric(2.0, -0.1).is_err());
        assert!(Grid::symmetric(2.01, 0.02).is_err());
        assert!(Grid::from_points(vec![0.0, 1.0]).is_err());
        assert!(Grid::from_points(vec![-1.0, 0.0, 1.0, 2.5]).is_err());
        // not symmetric
        assert!(Grid::from_points(vec![-1.0, 0.0, 1.0, 2.0]).is_err());
        // no zero
        assert!(Grid::from_points(vec![0.5, 1.5, 2.5]).is_err());
    }

    #[test]
    fn report_grid_must_cover_states() {
        let s = StateGrid(Grid::symmetric(2.0, 0.02).unwrap());
        let r_ok = ReportGrid(Grid::symmetric(4.0, 0.02).unwrap());
        let r_narrow = ReportGrid(Grid::symmetric(1.0, 0.02).unwrap());
        assert!(r_ok.validate_against(&s).is_ok());
        assert!(r_narrow.validate_against(&s).is_err());
    }
}
