use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Learning-rate constants `c = 2^x` for `x = x_min, x_min + step, …, x_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub step: f64,
}

impl Default for CGrid {
    fn default() -> Self {
        Self {
            x_min: 0.0,
            x_max: 6.0,
            step: 0.1,
        }
    }
}

impl CGrid {
    pub fn new(x_min: f64, x_max: f64, step: f64) -> Result<Self> {
        let g = Self { x_min, x_max, step };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::Config(format!(
                "grid step must be positive, got {}",
                self.step
            )));
        }
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.x_max >= self.x_min) {
            return Err(Error::Config(format!(
                "grid needs x_min <= x_max, got {} and {}",
                self.x_min, self.x_max
            )));
        }
        Ok(())
    }

    /// Exponent of point `k`. When `1/step` is an integer the exponent is
    /// computed as a ratio of integers, so `x = 2.0` gives `c = 4` exactly.
    pub fn x(&self, k: usize) -> f64 {
        let denom = (1.0 / self.step).round();
        if denom >= 1.0 && (denom * self.step - 1.0).abs() < 1e-12 {
            let start = (self.x_min * denom).round();
            if (start / denom - self.x_min).abs() < 1e-12 {
                return (start + k as f64) / denom;
            }
        }
        self.x_min + k as f64 * self.step
    }

    pub fn c(&self, k: usize) -> f64 {
        self.x(k).exp2()
    }

    pub fn len(&self) -> usize {
        ((self.x_max - self.x_min) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.x(k)).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.c(k)).collect()
    }

    /// Grid truncated to points with `c <= c_max`.
    pub fn capped(&self, c_max: f64) -> Self {
        let n = (0..self.len())
            .take_while(|&k| self.c(k) <= c_max)
            .count()
            .max(1);
        Self {
            x_max: self.x(n - 1),
            ..*self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid() {
        let g = CGrid::default();
        assert_eq!(g.len(), 61);
        assert_eq!(g.c(0), 1.0);
        assert_eq!(g.c(10), 2.0);
        assert_eq!(g.c(20), 4.0);
        assert_eq!(g.c(60), 64.0);
        let xs = g.xs();
        for pair in xs.windows(2) {
            assert!((pair[1] - pair[0] - 0.1).abs() < 1e-12);
        }
        let cs = g.values();
        assert!(cs.windows(2).all(|p| p[1] > p[0]));
    }

    #[test]
    fn negative_start_and_cap() {
        let g = CGrid::new(-1.0, 4.0, 0.1).unwrap().capped(3.5);
        assert_eq!(g.c(0), 0.5);
        assert!(g.values().last().unwrap() <= &3.5);
        assert_eq!(g.len(), 29);
    }

    #[test]
    fn invalid_grids() {
        assert!(CGrid::new(0.0, 1.0, 0.0).is_err());
        assert!(CGrid::new(2.0, 1.0, 0.1).is_err());
    }
}
