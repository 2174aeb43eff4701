use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use super::RngStream;
use super::Sample;
use crate::error::{Error, Result};
use crate::util::{brent_root, normal_pdf, std_normal_cdf, std_normal_quantile};

/// Half-width, in standard deviations, of the clipped Gaussian domain.
pub const GAUSSIAN_CLIP: f64 = 37.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "model")]
pub enum DensityModel {
    Gaussian { mean: f64, sd: f64 },
    /// `weight` N(mean, sd) + (1 − weight) Exp(scale), truncated.
    NormalExponentialMixture { weight: f64, mean: f64, sd: f64, scale: f64 },
    /// `weight` N(mean1, sd1) + (1 − weight) N(mean2, sd2), truncated.
    NormalNormalMixture { weight: f64, mean1: f64, sd1: f64, mean2: f64, sd2: f64 },
    Exponential { scale: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl DensityModel {
    fn raw_pdf(&self, x: f64) -> f64 {
        match *self {
            DensityModel::Gaussian { mean, sd } => normal_pdf(x, mean, sd),
            DensityModel::NormalExponentialMixture { weight, mean, sd, scale } => {
                let e = if x >= 0.0 { (-x / scale).exp() / scale } else { 0.0 };
                weight * normal_pdf(x, mean, sd) + (1.0 - weight) * e
            }
            DensityModel::NormalNormalMixture { weight, mean1, sd1, mean2, sd2 } => {
                weight * normal_pdf(x, mean1, sd1) + (1.0 - weight) * normal_pdf(x, mean2, sd2)
            }
            DensityModel::Exponential { scale } => {
                if x >= 0.0 {
                    (-x / scale).exp() / scale
                } else {
                    0.0
                }
            }
            DensityModel::Uniform { lo, hi } => {
                if (lo..=hi).contains(&x) {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
        }
    }

    fn raw_cdf(&self, x: f64) -> f64 {
        let exp_cdf = |x: f64, scale: f64| if x > 0.0 { -(-x / scale).exp_m1() } else { 0.0 };
        match *self {
            DensityModel::Gaussian { mean, sd } => std_normal_cdf((x - mean) / sd),
            DensityModel::NormalExponentialMixture { weight, mean, sd, scale } => {
                weight * std_normal_cdf((x - mean) / sd) + (1.0 - weight) * exp_cdf(x, scale)
            }
            DensityModel::NormalNormalMixture { weight, mean1, sd1, mean2, sd2 } => {
                weight * std_normal_cdf((x - mean1) / sd1) + (1.0 - weight) * std_normal_cdf((x - mean2) / sd2)
            }
            DensityModel::Exponential { scale } => exp_cdf(x, scale),
            DensityModel::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
        }
    }

    fn raw_quantile(&self, p: f64) -> Result<f64> {
        match *self {
            DensityModel::Gaussian { mean, sd } => Ok(mean + sd * std_normal_quantile(p)),
            DensityModel::Exponential { scale } => Ok(-scale * (-p).ln_1p()),
            DensityModel::Uniform { lo, hi } => Ok(lo + p * (hi - lo)),
            _ => {
                let (mut lo, mut hi) = self.rough_range();
                while self.raw_cdf(lo) > p {
                    lo -= hi - lo;
                }
                while self.raw_cdf(hi) < p {
                    hi += hi - lo;
                }
                brent_root(|x| self.raw_cdf(x) - p, lo, hi, 1e-15)
            }
        }
    }

    fn rough_range(&self) -> (f64, f64) {
        match *self {
            DensityModel::Gaussian { mean, sd } => (mean - 10.0 * sd, mean + 10.0 * sd),
            DensityModel::NormalExponentialMixture { mean, sd, scale, .. } => {
                ((mean - 10.0 * sd).min(0.0), (mean + 10.0 * sd).max(40.0 * scale))
            }
            DensityModel::NormalNormalMixture { mean1, sd1, mean2, sd2, .. } => {
                ((mean1 - 10.0 * sd1).min(mean2 - 10.0 * sd2), (mean1 + 10.0 * sd1).max(mean2 + 10.0 * sd2))
            }
            DensityModel::Exponential { scale } => (0.0, 40.0 * scale),
            DensityModel::Uniform { lo, hi } => (lo, hi),
        }
    }

    fn draw_raw<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            DensityModel::Gaussian { mean, sd } => Normal::new(mean, sd).expect("validated").sample(rng),
            DensityModel::NormalExponentialMixture { weight, mean, sd, scale } => {
                if rng.random::<f64>() < weight {
                    Normal::new(mean, sd).expect("validated").sample(rng)
                } else {
                    Exp::new(1.0 / scale).expect("validated").sample(rng)
                }
            }
            DensityModel::NormalNormalMixture { weight, mean1, sd1, mean2, sd2 } => {
                if rng.random::<f64>() < weight {
                    Normal::new(mean1, sd1).expect("validated").sample(rng)
                } else {
                    Normal::new(mean2, sd2).expect("validated").sample(rng)
                }
            }
            DensityModel::Exponential { scale } => Exp::new(1.0 / scale).expect("validated").sample(rng),
            DensityModel::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }

    fn validate(&self) -> Result<()> {
        let pos = |v: f64, name: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Argument(format!("{name} must be positive and finite, got {v}")))
            }
        };
        let unit = |w: f64| {
            if (0.0..=1.0).contains(&w) {
                Ok(())
            } else {
                Err(Error::Argument(format!("mixture weight {w} outside [0, 1]")))
            }
        };
        match *self {
            DensityModel::Gaussian { mean, sd } => {
                pos(sd, "sd")?;
                if !mean.is_finite() {
                    return Err(Error::Argument("mean must be finite".into()));
                }
            }
            DensityModel::NormalExponentialMixture { weight, sd, scale, .. } => {
                unit(weight)?;
                pos(sd, "sd")?;
                pos(scale, "scale")?;
            }
            DensityModel::NormalNormalMixture { weight, sd1, sd2, .. } => {
                unit(weight)?;
                pos(sd1, "sd1")?;
                pos(sd2, "sd2")?;
            }
            DensityModel::Exponential { scale } => pos(scale, "scale")?,
            DensityModel::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::Argument(format!("bad uniform support [{lo}, {hi}]")));
                }
            }
        }
        Ok(())
    }
}

/// A model density restricted (and renormalized) to `[support_lo, support_hi]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleDensity {
    model: DensityModel,
    support_lo: f64,
    support_hi: f64,
    cdf_lo: f64,
    mass: f64,
}

impl OracleDensity {
    /// Truncate `model` to `[lo, hi]`; infinite bounds mean no truncation on that side.
    pub fn truncated(model: DensityModel, lo: f64, hi: f64) -> Result<Self> {
        model.validate()?;
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::Argument(format!("bad support [{lo}, {hi}]")));
        }
        let cdf_lo = if lo.is_finite() { model.raw_cdf(lo) } else { 0.0 };
        let cdf_hi = if hi.is_finite() { model.raw_cdf(hi) } else { 1.0 };
        let mass = cdf_hi - cdf_lo;
        if mass <= 0.0 {
            return Err(Error::Argument("truncation interval carries no mass".into()));
        }
        Ok(Self { model, support_lo: lo, support_hi: hi, cdf_lo, mass })
    }

    pub fn gaussian(mean: f64, sd: f64) -> Result<Self> {
        Self::truncated(DensityModel::Gaussian { mean, sd }, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn standard_normal() -> Self {
        Self::gaussian(0.0, 1.0).expect("valid")
    }

    pub fn exponential(scale: f64) -> Result<Self> {
        Self::truncated(DensityModel::Exponential { scale }, 0.0, f64::INFINITY)
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::truncated(DensityModel::Uniform { lo, hi }, lo, hi)
    }

    /// Normal–exponential mixture on `[0, q(upper_p)]` of the untruncated mixture.
    pub fn normal_exponential_mixture(weight: f64, mean: f64, sd: f64, scale: f64, upper_p: f64) -> Result<Self> {
        let model = DensityModel::NormalExponentialMixture { weight, mean, sd, scale };
        model.validate()?;
        let hi = model.raw_quantile(upper_p)?;
        Self::truncated(model, 0.0, hi)
    }

    /// Normal–normal mixture on `[q(lo_p), q(hi_p)]` of the untruncated mixture.
    pub fn normal_normal_mixture(
        weight: f64,
        (mean1, sd1): (f64, f64),
        (mean2, sd2): (f64, f64),
        lo_p: f64,
        hi_p: f64,
    ) -> Result<Self> {
        let model = DensityModel::NormalNormalMixture { weight, mean1, sd1, mean2, sd2 };
        model.validate()?;
        Self::truncated(model, model.raw_quantile(lo_p)?, model.raw_quantile(hi_p)?)
    }

    /// 0.2·N(0.4, 0.07²) + 0.8·Exp(mean 0.4) on [0, q(0.99)].
    pub fn skewed_mixture() -> Self {
        Self::normal_exponential_mixture(0.2, 0.4, 0.07, 0.4, 0.99).expect("valid")
    }

    /// ½·N(−1.5, 0.5²) + ½·N(1.5, 0.5²) on [q(0.005), q(0.995)].
    pub fn bimodal_mixture() -> Self {
        Self::normal_normal_mixture(0.5, (-1.5, 0.5), (1.5, 0.5), 0.005, 0.995).expect("valid")
    }

    pub fn model(&self) -> &DensityModel {
        &self.model
    }

    pub fn support(&self) -> (f64, f64) {
        (self.support_lo, self.support_hi)
    }

    pub fn is_compact(&self) -> bool {
        self.support_lo.is_finite() && self.support_hi.is_finite()
    }

    pub fn parameters(&self) -> Vec<f64> {
        match self.model {
            DensityModel::Gaussian { mean, sd } => vec![mean, sd],
            DensityModel::NormalExponentialMixture { weight, mean, sd, scale } => vec![weight, mean, sd, scale],
            DensityModel::NormalNormalMixture { weight, mean1, sd1, mean2, sd2 } => {
                vec![weight, mean1, sd1, mean2, sd2]
            }
            DensityModel::Exponential { scale } => vec![scale],
            DensityModel::Uniform { lo, hi } => vec![lo, hi],
        }
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::Domain(format!("density evaluated at non-finite {x}")));
        }
        Ok(self.pdf_unchecked(x))
    }

    #[inline]
    pub(crate) fn pdf_unchecked(&self, x: f64) -> f64 {
        if x < self.support_lo || x > self.support_hi {
            0.0
        } else {
            self.model.raw_pdf(x) / self.mass
        }
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        if x.is_nan() {
            return Err(Error::Domain("cdf evaluated at NaN".into()));
        }
        Ok(self.cdf_unchecked(x))
    }

    pub(crate) fn cdf_unchecked(&self, x: f64) -> f64 {
        if x <= self.support_lo {
            0.0
        } else if x >= self.support_hi {
            1.0
        } else {
            ((self.model.raw_cdf(x) - self.cdf_lo) / self.mass).clamp(0.0, 1.0)
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
        }
        if p == 0.0 {
            return Ok(self.support_lo);
        }
        if p == 1.0 {
            return Ok(self.support_hi);
        }
        self.model.raw_quantile(self.cdf_lo + p * self.mass)
    }

    pub fn mean(&self) -> f64 {
        let (lo, hi) = self.reference_domain(0);
        let q = super::QuadSpec::default()
            .rule(lo, hi, self.resolution(), 0, &[])
            .expect("valid domain");
        q.integrate(|x| x * self.pdf_unchecked(x))
    }

    /// Smallest feature width of the density, used to size quadrature panels.
    pub fn resolution(&self) -> f64 {
        match self.model {
            DensityModel::Gaussian { sd, .. } => sd,
            DensityModel::NormalExponentialMixture { sd, scale, .. } => sd.min(scale),
            DensityModel::NormalNormalMixture { sd1, sd2, .. } => sd1.min(sd2),
            DensityModel::Exponential { scale } => scale,
            DensityModel::Uniform { lo, hi } => hi - lo,
        }
    }

    /// Finite integration domain: the support when compact, otherwise a
    /// clipped range. Gaussian tails are kept out to where the pdf underflows,
    /// since ratios like μ₂/μ₁ decay much more slowly than f itself.
    pub fn reference_domain(&self, degree: usize) -> (f64, f64) {
        let c = GAUSSIAN_CLIP.max(2.0 * ((degree + 1) as f64).sqrt() + 8.0);
        let lo = if self.support_lo.is_finite() {
            self.support_lo
        } else {
            match self.model {
                DensityModel::Gaussian { mean, sd } => mean - c * sd,
                _ => self.model.rough_range().0,
            }
        };
        let hi = if self.support_hi.is_finite() {
            self.support_hi
        } else {
            match self.model {
                DensityModel::Gaussian { mean, sd } => mean + c * sd,
                DensityModel::Exponential { scale } => scale * (40.0 + 4.0 * degree as f64),
                _ => self.model.rough_range().1,
            }
        };
        (lo, hi)
    }

    /// Points where the pdf or its derivative jumps (finite support ends).
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = vec![];
        if let DensityModel::NormalExponentialMixture { .. } = self.model {
            b.push(0.0);
        }
        b.extend([self.support_lo, self.support_hi].into_iter().filter(|v| v.is_finite()));
        b
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        loop {
            let x = self.model.draw_raw(rng);
            if x >= self.support_lo && x <= self.support_hi {
                return x;
            }
        }
    }

    pub fn sample_from(&self, n: usize, stream: &RngStream) -> Result<Sample> {
        if n < 2 {
            return Err(Error::Argument(format!("sample size must be >= 2, got {n}")));
        }
        let mut rng = stream.rng();
        let values: Vec<f64> = (0..n).map(|_| self.draw(&mut rng)).collect();
        Sample::with_support(values, self.support_lo, self.support_hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::QuadratureRule;

    fn all() -> Vec<OracleDensity> {
        vec![
            OracleDensity::standard_normal(),
            OracleDensity::gaussian(2.0, 3.0).unwrap(),
            OracleDensity::skewed_mixture(),
            OracleDensity::bimodal_mixture(),
            OracleDensity::exponential(0.7).unwrap(),
            OracleDensity::uniform(0.0, 1.0).unwrap(),
        ]
    }

    #[test]
    fn point_values() {
        let n = OracleDensity::standard_normal();
        assert!((n.pdf(0.0).unwrap() - 0.398_942_3).abs() < 1e-7);
        assert_eq!(n.cdf(0.0).unwrap(), 0.5);
        let u = OracleDensity::uniform(0.0, 1.0).unwrap();
        assert_eq!(u.pdf(0.5).unwrap(), 1.0);
        assert!((u.quantile(0.25).unwrap() - 0.25).abs() < 1e-15);
        assert!(n.pdf(f64::NAN).is_err());
        assert!(n.quantile(1.5).is_err());
    }

    #[test]
    fn normalized_under_reference_quadrature() {
        for d in all() {
            let (lo, hi) = d.reference_domain(0);
            let mut edges: Vec<f64> = (0..=2000).map(|i| lo + (hi - lo) * i as f64 / 2000.0).collect();
            edges.extend(d.breakpoints());
            edges.sort_by(f64::total_cmp);
            edges.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
            let q = QuadratureRule::from_edges(&edges, 16).unwrap();
            let total = q.integrate(|x| d.pdf_unchecked(x));
            assert!((total - 1.0).abs() < 1e-8, "{:?}: {total}", d.model());
        }
    }

    #[test]
    fn cdf_endpoints_and_inverse() {
        for d in all() {
            let (lo, hi) = d.support();
            assert_eq!(d.cdf(lo).unwrap(), 0.0);
            assert_eq!(d.cdf(hi).unwrap(), 1.0);
            for i in 1..=100 {
                let p = i as f64 / 101.0;
                let x = d.quantile(p).unwrap();
                let back = d.quantile(d.cdf(x).unwrap()).unwrap();
                assert!((back - x).abs() < 1e-8, "{:?} at {x}", d.model());
                assert!((d.cdf(x).unwrap() - p).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn skewed_truncation_is_untruncated_quantile() {
        let d = OracleDensity::skewed_mixture();
        let m = *d.model();
        let hi = d.support().1;
        assert!((m.raw_cdf(hi) - 0.99).abs() < 1e-12);
        assert_eq!(d.support().0, 0.0);
        let b = OracleDensity::bimodal_mixture();
        let (lo, hi) = b.support();
        assert!((lo + hi).abs() < 1e-9);
        assert!((b.model().raw_cdf(hi) - 0.995).abs() < 1e-12);
    }

    #[test]
    fn samples_are_reproducible_and_in_support() {
        let d = OracleDensity::skewed_mixture();
        let s1 = d.sample_from(500, &RngStream::new(7, 3)).unwrap();
        let s2 = d.sample_from(500, &RngStream::new(7, 3)).unwrap();
        let s3 = d.sample_from(500, &RngStream::new(7, 4)).unwrap();
        assert_eq!(s1.values(), s2.values());
        assert_ne!(s1.values(), s3.values());
        let (lo, hi) = d.support();
        assert!(s1.values().iter().all(|&x| x >= lo && x <= hi));
        assert!(d.sample_from(1, &RngStream::new(1, 0)).is_err());
    }
}
