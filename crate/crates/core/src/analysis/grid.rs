use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// Strictly increasing detection thresholds inside (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ThresholdGrid {
    values: Vec<f64>,
}

impl ThresholdGrid {
    pub fn new(values: Vec<f64>) -> Result<Self, AnalysisError> {
        if values.is_empty() {
            return Err(AnalysisError::InvalidGrid("grid is empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
            return Err(AnalysisError::InvalidGrid(format!("{v} is outside (0, 1)")));
        }
        if let Some(w) = values.windows(2).find(|w| w[0] >= w[1]) {
            return Err(AnalysisError::InvalidGrid(format!(
                "values must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(ThresholdGrid { values })
    }

    /// `points` thresholds evenly spaced in log10 between `start` and `stop`.
    pub fn log_spaced(start: f64, stop: f64, points: usize) -> Result<Self, AnalysisError> {
        if start.is_nan() || stop.is_nan() || start <= 0.0 || stop <= 0.0 {
            return Err(AnalysisError::InvalidGrid(
                "log-spaced grid needs positive bounds".into(),
            ));
        }
        let (lo, hi) = (start.log10(), stop.log10());
        Self::spaced(start, stop, points, |f| 10f64.powf(lo + f * (hi - lo)))
    }

    /// `points` thresholds evenly spaced between `start` and `stop`.
    pub fn linear(start: f64, stop: f64, points: usize) -> Result<Self, AnalysisError> {
        Self::spaced(start, stop, points, |f| start + f * (stop - start))
    }

    fn spaced(
        start: f64,
        stop: f64,
        points: usize,
        at: impl Fn(f64) -> f64,
    ) -> Result<Self, AnalysisError> {
        let values = match points {
            0 => Vec::new(),
            1 => vec![start],
            _ => (0..points)
                .map(|i| match i {
                    0 => start,
                    _ if i == points - 1 => stop,
                    _ => at(i as f64 / (points - 1) as f64),
                })
                .collect(),
        };
        Self::new(values)
    }

    /// 31 log-spaced thresholds over [1e-4, 1e-1].
    pub fn default_sweep() -> Self {
        Self::log_spaced(1e-4, 1e-1, 31).expect("default sweep grid is valid")
    }

    /// `steps` uniform thresholds `0.1 * i / steps` for `i = 1..=steps`.
    pub fn uniform_to_tenth(steps: usize) -> Result<Self, AnalysisError> {
        Self::new((1..=steps).map(|i| 0.1 * i as f64 / steps as f64).collect())
    }

    /// 1000 uniform steps in (0, 0.1], used by the group comparison.
    pub fn default_comparison() -> Self {
        Self::uniform_to_tenth(1000).expect("default comparison grid is valid")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl TryFrom<Vec<f64>> for ThresholdGrid {
    type Error = AnalysisError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        ThresholdGrid::new(values)
    }
}

impl From<ThresholdGrid> for Vec<f64> {
    fn from(g: ThresholdGrid) -> Self {
        g.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_sweep_covers_range() {
        let g = ThresholdGrid::default_sweep();
        assert_eq!(g.len(), 31);
        assert_eq!(g.values()[0], 1e-4);
        assert_eq!(g.values()[30], 1e-1);
        assert!((g.values()[10] - 1e-3).abs() < 1e-15);
        assert!((g.values()[20] - 1e-2).abs() < 1e-14);
    }

    #[test]
    fn default_comparison_is_uniform_to_a_tenth() {
        let g = ThresholdGrid::default_comparison();
        assert_eq!(g.len(), 1000);
        assert!((g.values()[0] - 1e-4).abs() < 1e-18);
        assert_eq!(g.values()[999], 0.1);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(ThresholdGrid::new(vec![]).is_err());
        assert!(ThresholdGrid::new(vec![0.0, 0.1]).is_err());
        assert!(ThresholdGrid::new(vec![0.1, 1.0]).is_err());
        assert!(ThresholdGrid::new(vec![0.1, 0.1]).is_err());
        assert!(ThresholdGrid::new(vec![0.2, 0.1]).is_err());
        assert!(ThresholdGrid::new(vec![f64::NAN]).is_err());
        assert!(ThresholdGrid::log_spaced(0.0, 0.1, 3).is_err());
        assert!(ThresholdGrid::linear(0.5, 1.5, 3).is_err());
        assert!(ThresholdGrid::linear(0.1, 0.2, 0).is_err());
    }

    #[test]
    fn serde_validates() {
        let g: ThresholdGrid = serde_json::from_str("[0.01, 0.05]").unwrap();
        assert_eq!(g.values(), &[0.01, 0.05]);
        assert!(serde_json::from_str::<ThresholdGrid>("[0.05, 0.01]").is_err());
    }
}
