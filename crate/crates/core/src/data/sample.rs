use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::quantile_sorted;

/// Sorted iid observations with declared support bounds (possibly infinite).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    values: Vec<f64>,
    support_lo: f64,
    support_hi: f64,
}

impl Sample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::with_support(values, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn with_support(mut values: Vec<f64>, lo: f64, hi: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Argument(format!("sample needs at least 2 values, got {}", values.len())));
        }
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::Argument(format!("bad support [{lo}, {hi}]")));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite observation {v}")));
        }
        if let Some(v) = values.iter().find(|&&v| v < lo || v > hi) {
            return Err(Error::Domain(format!("observation {v} outside support [{lo}, {hi}]")));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values, support_lo: lo, support_hi: hi })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn support(&self) -> (f64, f64) {
        (self.support_lo, self.support_hi)
    }

    pub fn has_compact_support(&self) -> bool {
        self.support_lo.is_finite() && self.support_hi.is_finite()
    }

    /// Same values, new declared support.
    pub fn restricted(&self, lo: f64, hi: f64) -> Result<Self> {
        Self::with_support(self.values.clone(), lo, hi)
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.n() as f64
    }

    /// Standard deviation with the n − 1 denominator.
    pub fn sd(&self) -> f64 {
        let m = self.mean();
        let ss: f64 = self.values.iter().map(|x| (x - m) * (x - m)).sum();
        (ss / (self.n() - 1) as f64).sqrt()
    }

    /// Interquartile range from type-7 quantiles.
    pub fn iqr(&self) -> f64 {
        quantile_sorted(&self.values, 0.75) - quantile_sorted(&self.values, 0.25)
    }

    pub fn quantile(&self, p: f64) -> f64 {
        quantile_sorted(&self.values, p.clamp(0.0, 1.0))
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        let mut lo = self.support_lo * c;
        let mut hi = self.support_hi * c;
        if c < 0.0 {
            std::mem::swap(&mut lo, &mut hi);
        }
        Self::with_support(self.values.iter().map(|v| v * c).collect(), lo, hi)
    }

    /// Values with ties broken by a perturbation of 1e-12·range (kept sorted).
    pub fn distinct_values(&self) -> Vec<f64> {
        let eps = 1e-12 * (self.max() - self.min()).max(f64::MIN_POSITIVE);
        let mut out = self.values.clone();
        for i in 1..out.len() {
            if out[i] <= out[i - 1] {
                out[i] = out[i - 1] + eps;
            }
        }
        out
    }

    /// Number of distinct values.
    pub fn distinct_count(&self) -> usize {
        1 + self.values.windows(2).filter(|w| w[1] > w[0]).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_sorts_and_validates() {
        let s = Sample::new(vec![3.0, 1.0, 2.0]).unwrap();
        assert_eq!(s.values(), &[1.0, 2.0, 3.0]);
        assert!(Sample::new(vec![1.0]).is_err());
        assert!(Sample::with_support(vec![0.5, 2.0], 0.0, 1.0).is_err());
        assert!(Sample::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn summary_statistics() {
        let s = Sample::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.mean(), 2.5);
        assert!((s.sd() - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(s.iqr(), 1.5);
    }

    #[test]
    fn ties_are_broken() {
        let s = Sample::new(vec![1.0, 1.0, 1.0, 2.0]).unwrap();
        let d = s.distinct_values();
        assert!(d.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s.distinct_count(), 2);
    }
}
