//! Bandwidth selection: reference rules, cross-validation, the AMKLD rule,
//! AIC with the empirical EDoF as penalty, and KL-oracle calibration.

use serde::{Deserialize, Serialize};

use crate::amkld::amkld_rule_ratio;
use crate::data::{DensityModel, Grid, OracleDensity, QuadSpec, RngStream, Sample};
use crate::edof::{kde_at_data, nu_hat_plugin, nu_oracle_direct};
use crate::error::{Error, Result};
use crate::kernels::{kde_eval, Kernel, KernelFamily};
use crate::smoothing::SmoothingProblem;
use crate::util::{brent_min, mean_sd, par_map, parabola_vertex, INV_SQRT_2PI};

pub use crate::util::weighted_poly_fit;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    Silverman,
    Scott,
    Ucv,
    Bcv,
    RegLikCv,
    Amkld,
    Aic,
    KlOracle,
}

impl std::str::FromStr for Rule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "silverman" => Ok(Self::Silverman),
            "scott" => Ok(Self::Scott),
            "ucv" => Ok(Self::Ucv),
            "bcv" => Ok(Self::Bcv),
            "reglik" | "reg-lik-cv" => Ok(Self::RegLikCv),
            "amkld" => Ok(Self::Amkld),
            "aic" => Ok(Self::Aic),
            "kl-oracle" => Ok(Self::KlOracle),
            _ => Err(Error::Argument(format!("unknown bandwidth rule {s:?}"))),
        }
    }
}

impl std::fmt::Display for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::Silverman => "silverman",
            Self::Scott => "scott",
            Self::Ucv => "ucv",
            Self::Bcv => "bcv",
            Self::RegLikCv => "reg-lik-cv",
            Self::Amkld => "amkld",
            Self::Aic => "aic",
            Self::KlOracle => "kl-oracle",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CurvePoint {
    pub h: f64,
    pub criterion: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loglik: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BandwidthResult {
    pub rule: Rule,
    pub h: f64,
    /// The optimum sits on the edge of the searched grid.
    pub boundary: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub penalty: Option<f64>,
    pub curve: Vec<CurvePoint>,
}

impl BandwidthResult {
    fn closed(rule: Rule, h: f64) -> Self {
        Self { rule, h, boundary: false, penalty: None, curve: Vec::new() }
    }
}

fn dispersion(s: &Sample) -> Result<f64> {
    if s.n() < 2 {
        return Err(Error::Argument("need at least two observations".into()));
    }
    let sd = s.sd();
    let iqr = s.iqr() / 1.34;
    let a = if iqr > 0.0 { sd.min(iqr) } else { sd };
    if !(a > 0.0) {
        return Err(Error::DegenerateSample);
    }
    Ok(a)
}

/// (Silverman, Scott) = (0.9, 1.06) · min(sd, IQR/1.34) · n^{−1/5}.
pub fn reference_rules(s: &Sample) -> Result<(f64, f64)> {
    let a = dispersion(s)? * (s.n() as f64).powf(-0.2);
    Ok((0.9 * a, 1.06 * a))
}

/// (1/3)^{1/12} σ̂ n^{−1/6}.
pub fn amkld_rule(s: &Sample) -> Result<BandwidthResult> {
    if s.n() < 2 {
        return Err(Error::Argument("need at least two observations".into()));
    }
    let sd = s.sd();
    if !(sd > 0.0) {
        return Err(Error::DegenerateSample);
    }
    Ok(BandwidthResult::closed(Rule::Amkld, amkld_rule_ratio(s.n()) * sd))
}

/// 61 log-spaced points over [h_silverman/4, 4 h_scott].
pub fn default_grid(s: &Sample) -> Result<Grid> {
    let (silv, scott) = reference_rules(s)?;
    Grid::logspace(silv / 4.0, 4.0 * scott, 61)
}

/// Squared pairwise differences (i < j) of a sample.
pub struct PairwiseDiffs {
    d2: Vec<f64>,
    n: usize,
}

impl PairwiseDiffs {
    pub fn new(s: &Sample) -> Self {
        let v = s.values();
        let mut d2 = Vec::with_capacity(v.len() * (v.len() - 1) / 2);
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                d2.push((v[i] - v[j]).powi(2));
            }
        }
        Self { d2, n: v.len() }
    }

    /// Least-squares cross-validation score for the Gaussian kernel.
    pub fn ucv(&self, h: f64) -> f64 {
        let n = self.n as f64;
        let h2 = h * h;
        let sum: f64 = self.d2.iter().map(|&d| (-d / (4.0 * h2)).exp() - 8f64.sqrt() * (-d / (2.0 * h2)).exp()).sum();
        let rp = std::f64::consts::PI.sqrt();
        1.0 / (2.0 * n * h * rp) + sum / (n * n * h * rp)
    }

    /// Biased cross-validation score for the Gaussian kernel.
    pub fn bcv(&self, h: f64) -> f64 {
        let n = self.n as f64;
        let h2 = h * h;
        let sum: f64 = self
            .d2
            .iter()
            .map(|&d| {
                let u = d / h2;
                (-u / 4.0).exp() * (u * u - 12.0 * u + 12.0)
            })
            .sum();
        let rp = std::f64::consts::PI.sqrt();
        1.0 / (2.0 * n * h * rp) + sum / (64.0 * n * n * h * rp)
    }
}

/// Σ_i log max(f̂_{−i}(x_i), α K(x_i,x_i)/n) for the Gaussian kernel.
pub fn reglik_criterion(s: &Sample, h: f64, alpha: f64) -> f64 {
    let v = s.values();
    let n = v.len() as f64;
    let k = Kernel::Gaussian { h };
    let floor = alpha * INV_SQRT_2PI / h / n;
    let terms = par_map(v.len(), |i| {
        let loo = (kde_eval(&k, s, v[i]) * n - INV_SQRT_2PI / h) / (n - 1.0);
        loo.max(floor).ln()
    });
    terms.iter().sum()
}

/// Grid minimum of `f`, refined by Brent's method between the neighbouring grid points.
fn grid_then_brent<F: Fn(f64) -> f64 + Sync + Send>(rule: Rule, grid: &Grid, f: F) -> BandwidthResult {
    let hs = grid.nodes();
    let vals = par_map(hs.len(), |i| f(hs[i]));
    let curve: Vec<CurvePoint> =
        hs.iter().zip(&vals).map(|(&h, &c)| CurvePoint { h, criterion: c, nu_hat: None, loglik: None }).collect();
    let i = argmin(&vals);
    let boundary = i == 0 || i == hs.len() - 1;
    let h = if boundary {
        hs[i]
    } else {
        brent_min(|lh: f64| f(lh.exp()), hs[i - 1].ln(), hs[i + 1].ln(), 1e-10).0.exp()
    };
    BandwidthResult { rule, h, boundary, penalty: None, curve }
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] || v[best].is_nan() {
            best = i;
        }
    }
    best
}

pub fn ucv_rule(s: &Sample, grid: &Grid) -> BandwidthResult {
    let p = PairwiseDiffs::new(s);
    grid_then_brent(Rule::Ucv, grid, |h| p.ucv(h))
}

pub fn bcv_rule(s: &Sample, grid: &Grid) -> BandwidthResult {
    let p = PairwiseDiffs::new(s);
    grid_then_brent(Rule::Bcv, grid, |h| p.bcv(h))
}

pub const REGLIK_ALPHA: f64 = 0.5;

pub fn reglik_rule(s: &Sample, grid: &Grid, alpha: f64) -> BandwidthResult {
    grid_then_brent(Rule::RegLikCv, grid, |h| -reglik_criterion(s, h, alpha))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CvRules {
    pub ucv: BandwidthResult,
    pub bcv: BandwidthResult,
    pub reg_lik_cv: BandwidthResult,
}

pub fn cv_rules(s: &Sample, grid: &Grid) -> Result<CvRules> {
    let (silv, scott) = reference_rules(s)?;
    let (lo, hi) = grid.bounds();
    if lo > silv / 4.0 * (1.0 + 1e-9) || hi < 4.0 * scott * (1.0 - 1e-9) {
        return Err(Error::Argument(format!("grid [{lo}, {hi}] must span [{}, {}]", silv / 4.0, 4.0 * scott)));
    }
    Ok(CvRules { ucv: ucv_rule(s, grid), bcv: bcv_rule(s, grid), reg_lik_cv: reglik_rule(s, grid, REGLIK_ALPHA) })
}

/// ν̂(h) and ℓ(h) = Σ log f̂(x_i|h) on a bandwidth grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AicCurve {
    pub h: Vec<f64>,
    pub nu_hat: Vec<f64>,
    pub loglik: Vec<f64>,
}

pub fn kernel_for(family: KernelFamily, h: f64, s: &Sample) -> Result<Kernel> {
    Kernel::with_family(family, h, s.support())
}

pub fn log_likelihood(k: &Kernel, s: &Sample) -> Result<f64> {
    Ok(kde_at_data(k, s)?.iter().map(|f| f.ln()).sum())
}

pub fn aic_curve(s: &Sample, family: KernelFamily, grid: &Grid, spec: &QuadSpec) -> Result<AicCurve> {
    let hs = grid.nodes().to_vec();
    let rows: Vec<Result<(f64, f64)>> = par_map(hs.len(), |i| {
        let k = kernel_for(family, hs[i], s)?;
        Ok((nu_hat_plugin(&k, s, spec)?, log_likelihood(&k, s)?))
    });
    let mut nu_hat = Vec::with_capacity(hs.len());
    let mut loglik = Vec::with_capacity(hs.len());
    for r in rows {
        let (a, b) = r?;
        nu_hat.push(a);
        loglik.push(b);
    }
    Ok(AicCurve { h: hs, nu_hat, loglik })
}

impl AicCurve {
    /// AIC(h) = p ν̂(h) − ℓ(h), minimized on the grid with a parabola through
    /// the discrete minimum and its neighbours (in log h).
    pub fn select(&self, p: f64) -> BandwidthResult {
        let aic: Vec<f64> = self.nu_hat.iter().zip(&self.loglik).map(|(nu, l)| p * nu - l).collect();
        let i = argmin(&aic);
        let last = aic.len() - 1;
        let boundary = i == 0 || i == last;
        let h = if boundary {
            self.h[i]
        } else {
            let lh = |j: usize| self.h[j].ln();
            parabola_vertex(lh(i - 1), aic[i - 1], lh(i), aic[i], lh(i + 1), aic[i + 1]).exp()
        };
        let curve = (0..aic.len())
            .map(|j| CurvePoint { h: self.h[j], criterion: aic[j], nu_hat: Some(self.nu_hat[j]), loglik: Some(self.loglik[j]) })
            .collect();
        BandwidthResult { rule: Rule::Aic, h, boundary, penalty: Some(p), curve }
    }
}

pub fn aic_select(s: &Sample, family: KernelFamily, p: f64, grid: &Grid, spec: &QuadSpec) -> Result<BandwidthResult> {
    if !(p >= 0.0) {
        return Err(Error::Argument(format!("penalty must be nonnegative, got {p}")));
    }
    Ok(aic_curve(s, family, grid, spec)?.select(p))
}

/// h*(p) for each penalty, sharing one AIC curve.
pub fn aic_path(s: &Sample, family: KernelFamily, penalties: &[f64], grid: &Grid, spec: &QuadSpec) -> Result<Vec<(f64, f64)>> {
    let c = aic_curve(s, family, grid, spec)?;
    Ok(penalties.iter().map(|&p| (p, c.select(p).h)).collect())
}

#[derive(Clone, Debug)]
pub struct SelectOptions {
    pub family: KernelFamily,
    pub penalty: f64,
    pub grid: Option<Grid>,
    pub alpha: f64,
    pub spec: QuadSpec,
}

impl Default for SelectOptions {
    fn default() -> Self {
        Self { family: KernelFamily::Gaussian, penalty: 1.0, grid: None, alpha: REGLIK_ALPHA, spec: QuadSpec::default() }
    }
}

/// Run one sample-based rule.
pub fn select(s: &Sample, rule: Rule, opts: &SelectOptions) -> Result<BandwidthResult> {
    let grid = || opts.grid.clone().map_or_else(|| default_grid(s), Ok);
    let gaussian_only = |r: Rule| {
        if opts.family != KernelFamily::Gaussian {
            Err(Error::Argument(format!("{r} is defined for the gaussian kernel only")))
        } else {
            Ok(())
        }
    };
    match rule {
        Rule::Silverman => Ok(BandwidthResult::closed(rule, reference_rules(s)?.0)),
        Rule::Scott => Ok(BandwidthResult::closed(rule, reference_rules(s)?.1)),
        Rule::Amkld => amkld_rule(s),
        Rule::Ucv => {
            gaussian_only(rule)?;
            Ok(ucv_rule(s, &grid()?))
        }
        Rule::Bcv => {
            gaussian_only(rule)?;
            Ok(bcv_rule(s, &grid()?))
        }
        Rule::RegLikCv => {
            gaussian_only(rule)?;
            Ok(reglik_rule(s, &grid()?, opts.alpha))
        }
        Rule::Aic => aic_select(s, opts.family, opts.penalty, &grid()?, &opts.spec),
        Rule::KlOracle => Err(Error::Argument("kl-oracle needs an oracle density, not a sample".into())),
    }
}

/// Integration range for KL against an oracle: the support, or where f > ~1e-16 f_max.
fn kl_domain(d: &OracleDensity) -> (f64, f64) {
    if let DensityModel::Gaussian { mean, sd } = *d.model() {
        if !d.is_compact() {
            return (mean - 8.5 * sd, mean + 8.5 * sd);
        }
    }
    let (lo, hi) = d.support();
    let lo = if lo.is_finite() { lo } else { d.quantile(1e-16).unwrap_or(lo) };
    let hi = if hi.is_finite() { hi } else { d.quantile(1.0 - 1e-15).unwrap_or(hi) };
    (lo, hi)
}

/// KL(f ‖ f̂) = ∫ f log(f/f̂) by quadrature; infinite if f̂ vanishes where f does not.
pub fn kl_divergence(d: &OracleDensity, k: &Kernel, s: &Sample, spec: &QuadSpec) -> Result<f64> {
    let (lo, hi) = kl_domain(d);
    let mut breaks = d.breakpoints();
    breaks.extend(k.breakpoints());
    let q = spec.rule(lo, hi, d.resolution().min(k.resolution()), 0, &breaks)?;
    let terms = par_map(q.len(), |j| {
        let y = q.nodes()[j];
        let f = d.pdf_unchecked(y);
        if f <= 0.0 {
            return 0.0;
        }
        let g = kde_eval(k, s, y);
        let log_g = if g > 0.0 {
            g.ln()
        } else if let Kernel::Gaussian { h } = *k {
            // f̂ underflows far out; its nearest datum dominates
            let v = s.values();
            let i = v.partition_point(|&x| x < y);
            let dist = [i.checked_sub(1), (i < v.len()).then_some(i)]
                .into_iter()
                .flatten()
                .map(|i| (v[i] - y).abs())
                .fold(f64::INFINITY, f64::min);
            -0.5 * (dist / h).powi(2) - (h * (s.n() as f64) / INV_SQRT_2PI).ln()
        } else {
            return f64::INFINITY;
        };
        q.weights()[j] * f * (f.ln() - log_g)
    });
    Ok(terms.iter().sum::<f64>().max(0.0))
}

/// Bandwidth minimizing KL(f ‖ f̂) for one sample.
pub fn kl_optimal_bandwidth(d: &OracleDensity, family: KernelFamily, s: &Sample, spec: &QuadSpec) -> Result<f64> {
    let (silv, scott) = reference_rules(s)?;
    let grid = Grid::logspace(silv / 8.0, 2.0 * scott, 13)?;
    let kl = |h: f64| {
        kernel_for(family, h, s).and_then(|k| kl_divergence(d, &k, s, spec)).unwrap_or(f64::INFINITY)
    };
    let vals: Vec<f64> = grid.nodes().iter().map(|&h| kl(h)).collect();
    let i = argmin(&vals).clamp(1, vals.len() - 2);
    let hs = grid.nodes();
    Ok(brent_min(|lh: f64| kl(lh.exp()), hs[i - 1].ln(), hs[i + 1].ln(), 1e-6).0.exp())
}

/// Exact MISE of the KDE at sample size n:
/// (1/n)(∫μ₂ − ∫μ₁²) + ∫(μ₁ − f)².
pub fn mise_exact(k: &Kernel, d: &OracleDensity, n: usize, spec: &QuadSpec) -> Result<f64> {
    let p = SmoothingProblem::oracle(k, d, 0, spec)?;
    let f = p.f_at_y().expect("oracle problem");
    let mut var = 0.0;
    let mut bias = 0.0;
    for (((&m1, &m2), &fy), &w) in p.mu1.iter().zip(&p.mu2).zip(&f).zip(p.y_weights()) {
        var += w * (m2 - m1 * m1);
        bias += w * (m1 - fy).powi(2);
    }
    Ok(var / n as f64 + bias)
}

/// Bandwidth minimizing the exact MISE.
pub fn mise_optimal_bandwidth(d: &OracleDensity, family: KernelFamily, n: usize, spec: &QuadSpec) -> Result<f64> {
    let iqr = d.quantile(0.75)? - d.quantile(0.25)?;
    let h0 = 0.79 * iqr * (n as f64).powf(-0.2);
    let grid = Grid::logspace(h0 / 30.0, 3.0 * h0, 17)?;
    let mise = |h: f64| {
        Kernel::with_family(family, h, d.support()).and_then(|k| mise_exact(&k, d, n, spec)).unwrap_or(f64::INFINITY)
    };
    let vals = par_map(grid.len(), |i| mise(grid.nodes()[i]));
    let i = argmin(&vals);
    if i == 0 || i == vals.len() - 1 {
        return Err(Error::Numerical(format!("MISE minimum at the edge of [{}, {}]", grid.bounds().0, grid.bounds().1)));
    }
    let hs = grid.nodes();
    Ok(brent_min(|lh: f64| mise(lh.exp()), hs[i - 1].ln(), hs[i + 1].ln(), 1e-8).0.exp())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KlOracle {
    pub h: f64,
    pub sd: f64,
    pub per_replicate: Vec<f64>,
}

/// Mean over replicates of the KL-minimizing bandwidth.
pub fn kl_oracle_bandwidth(
    d: &OracleDensity,
    family: KernelFamily,
    n: usize,
    replicates: usize,
    stream: &RngStream,
    spec: &QuadSpec,
) -> Result<KlOracle> {
    if replicates == 0 {
        return Err(Error::Argument("need at least one replicate".into()));
    }
    let hs: Vec<Result<f64>> = par_map(replicates, |r| {
        let s = d.sample_from(n, &stream.child(r as u64))?;
        kl_optimal_bandwidth(d, family, &s, spec)
    });
    let hs = hs.into_iter().collect::<Result<Vec<f64>>>()?;
    let (h, sd) = mean_sd(&hs);
    Ok(KlOracle { h, sd, per_replicate: hs })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PenaltyCalibration {
    pub h_star: f64,
    pub p: f64,
    /// ∂ℓ/∂h at h*, averaged over replicates.
    pub dl: f64,
    /// ∂ν/∂h at h*.
    pub dnu: f64,
}

/// p = ℓ′(h*)/ν′(h*) at the KL-oracle bandwidth, so that h* is stationary for p ν − ℓ.
pub fn calibrate_penalty(
    d: &OracleDensity,
    family: KernelFamily,
    n: usize,
    replicates: usize,
    stream: &RngStream,
    spec: &QuadSpec,
) -> Result<PenaltyCalibration> {
    let kl = kl_oracle_bandwidth(d, family, n, replicates, stream, spec)?;
    let h = kl.h;
    let step = 1e-3 * h;
    let dls: Vec<Result<f64>> = par_map(replicates, |r| {
        let s = d.sample_from(n, &stream.child(r as u64))?;
        let up = log_likelihood(&kernel_for(family, h + step, &s)?, &s)?;
        let down = log_likelihood(&kernel_for(family, h - step, &s)?, &s)?;
        Ok((up - down) / (2.0 * step))
    });
    let dls = dls.into_iter().collect::<Result<Vec<f64>>>()?;
    let dl = mean_sd(&dls).0;
    let dnu = match (family, d.model()) {
        (KernelFamily::Gaussian, DensityModel::Gaussian { sd, .. }) if !d.is_compact() => -2.0 * sd * sd / h.powi(3),
        _ => {
            let k = |hh: f64| Kernel::with_family(family, hh, d.support());
            (nu_oracle_direct(&k(h + step)?, d, spec)? - nu_oracle_direct(&k(h - step)?, d, spec)?) / (2.0 * step)
        }
    };
    if dnu.abs() < 1e-10 {
        return Err(Error::Numerical(format!("ν′(h*) = {dnu:.3e} is too small to calibrate against")));
    }
    Ok(PenaltyCalibration { h_star: h, p: dl / dnu, dl, dnu })
}

/// Cubic through the origin h ≈ a x + b x² + c x³ with x = n^{−1/5}, weighted by 1/h.
pub fn kl_cubic_fit(ns: &[usize], hs: &[f64]) -> Result<[f64; 3]> {
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).powf(-0.2)).collect();
    let w: Vec<f64> = hs.iter().map(|h| 1.0 / h).collect();
    let c = weighted_poly_fit(&xs, hs, &w, 3, false)?;
    Ok([c[1], c[2], c[3]])
}
