use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Uniform grid `start..=stop` with `count` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl GridSpec {
    pub const fn new(start: f64, stop: f64, count: usize) -> Self {
        GridSpec { start, stop, count }
    }

    /// Default detuning grid for reconstruction: 161 points over ±8 linewidths.
    pub const fn default_detuning() -> Self {
        GridSpec::new(-8.0, 8.0, 161)
    }

    pub fn validate(&self, min_count: usize) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(Error::InvalidParameter("grid bounds must be finite".into()));
        }
        if self.count < min_count {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least {min_count} points, got {}",
                self.count
            )));
        }
        Ok(())
    }

    pub fn points<T: Real>(&self) -> Vec<T> {
        linspace(T::lit(self.start), T::lit(self.stop), self.count)
    }
}

pub fn linspace<T: Real>(start: T, stop: T, count: usize) -> Vec<T> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / T::from_usize(count - 1).unwrap();
            (0..count).map(|i| start + step * T::from_usize(i).unwrap()).collect()
        }
    }
}
