use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform time grid `t_k = k * dt`, `k = 0..=steps`, `dt = t_end / steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_end: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, steps: usize) -> Result<Self> {
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::param(
                "t_end",
                format!("must be finite and > 0, got {t_end}"),
            ));
        }
        if steps == 0 {
            return Err(Error::param("steps", "must be >= 1"));
        }
        Ok(Self { t_end, steps })
    }

    /// Grid with (approximately) the requested step; the step is adjusted so
    /// that `t_end` is hit exactly.
    pub fn with_step(t_end: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::param("dt", format!("must be > 0, got {dt}")));
        }
        Self::new(t_end, (t_end / dt).round().max(1.0) as usize)
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of nodes, `steps + 1`.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.steps as f64
    }

    pub fn t(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t_end
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.t(k)).collect()
    }

    /// The grid with every step split in two.
    pub fn refined(&self) -> Self {
        Self {
            t_end: self.t_end,
            steps: self.steps * 2,
        }
    }

    /// Index of the node closest to `t`.
    pub fn index_of(&self, t: f64) -> usize {
        ((t / self.dt()).round().max(0.0) as usize).min(self.steps)
    }

    pub fn ensure_same(&self, other: &TimeGrid, what: &str) -> Result<()> {
        if self.steps != other.steps || (self.t_end - other.t_end).abs() > 1e-12 * self.t_end {
            return Err(Error::GridMismatch(format!(
                "{what}: ({}, {}) vs ({}, {})",
                self.t_end, self.steps, other.t_end, other.steps
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_hit_endpoints() {
        let g = TimeGrid::new(2.0, 3).unwrap();
        let n = g.nodes();
        assert_eq!(n.len(), 4);
        assert_eq!(n[0], 0.0);
        assert_eq!(n[3], 2.0);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeGrid::new(0.0, 3).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
        assert!(TimeGrid::new(f64::NAN, 3).is_err());
    }

    #[test]
    fn with_step_rounds() {
        let g = TimeGrid::with_step(2.0, 1e-3).unwrap();
        assert_eq!(g.steps(), 2000);
        assert_eq!(g.refined().steps(), 4000);
        assert_eq!(g.index_of(0.5), 500);
    }
}
