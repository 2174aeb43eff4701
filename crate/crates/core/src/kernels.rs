//! Generalized bivariate kernels, smoothed densities and KDEs.

use serde::{Deserialize, Serialize};

use crate::data::{OracleDensity, QuadSpec, QuadratureRule, Sample};
use crate::error::{Error, Result};
use crate::util::{par_map, std_normal_cdf, std_normal_pdf, INV_SQRT_2PI};

/// Kernel values beyond this many bandwidths from the diagonal are treated as zero.
pub const REACH: f64 = 12.0;
const SERIES_CUTOFF: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    Gaussian,
    Histogram,
    Diffusion,
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" | "gaussian-convolution" => Ok(Self::Gaussian),
            "histogram" => Ok(Self::Histogram),
            "diffusion" | "diffusion-neumann" => Ok(Self::Diffusion),
            _ => Err(Error::Argument(format!("unknown kernel family {s:?}"))),
        }
    }
}

impl std::fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Gaussian => "gaussian",
            Self::Histogram => "histogram",
            Self::Diffusion => "diffusion",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family")]
pub enum Kernel {
    /// φ((y − x)/h)/h on the real line.
    Gaussian { h: f64 },
    /// Σ_j 1{x∈B_j} 1{y∈B_j} / h_j with bins `[edges[j], edges[j+1])`.
    Histogram { edges: Vec<f64> },
    /// Neumann heat kernel on `[lo, hi]` at diffusion time h².
    Diffusion { h: f64, lo: f64, hi: f64 },
}

fn check_h(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(Error::Argument(format!("bandwidth must be positive and finite, got {h}")))
    }
}

impl Kernel {
    pub fn gaussian(h: f64) -> Result<Self> {
        check_h(h)?;
        Ok(Kernel::Gaussian { h })
    }

    pub fn histogram(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Argument("histogram edges must be finite and strictly increasing".into()));
        }
        Ok(Kernel::Histogram { edges })
    }

    pub fn equal_bins(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 || !(lo < hi) {
            return Err(Error::Argument("need at least one bin on a proper interval".into()));
        }
        Self::histogram((0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect())
    }

    pub fn diffusion(h: f64, lo: f64, hi: f64) -> Result<Self> {
        check_h(h)?;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Argument(format!("diffusion kernel needs a finite interval, got [{lo}, {hi}]")));
        }
        Ok(Kernel::Diffusion { h, lo, hi })
    }

    /// Build a bandwidth kernel of `family`; diffusion needs a compact `support`.
    pub fn with_family(family: KernelFamily, h: f64, support: (f64, f64)) -> Result<Self> {
        match family {
            KernelFamily::Gaussian => Self::gaussian(h),
            KernelFamily::Diffusion => Self::diffusion(h, support.0, support.1),
            KernelFamily::Histogram => Err(Error::Argument("histogram kernels are given by bin edges".into())),
        }
    }

    pub fn family(&self) -> KernelFamily {
        match self {
            Kernel::Gaussian { .. } => KernelFamily::Gaussian,
            Kernel::Histogram { .. } => KernelFamily::Histogram,
            Kernel::Diffusion { .. } => KernelFamily::Diffusion,
        }
    }

    pub fn bandwidth(&self) -> Option<f64> {
        match *self {
            Kernel::Gaussian { h } | Kernel::Diffusion { h, .. } => Some(h),
            Kernel::Histogram { .. } => None,
        }
    }

    /// Same family and support, new bandwidth.
    pub fn with_bandwidth(&self, h: f64) -> Result<Self> {
        match *self {
            Kernel::Gaussian { .. } => Self::gaussian(h),
            Kernel::Diffusion { lo, hi, .. } => Self::diffusion(h, lo, hi),
            Kernel::Histogram { .. } => Err(Error::Argument("histogram kernel has no bandwidth".into())),
        }
    }

    /// The compact domain of compact families.
    pub fn domain(&self) -> Option<(f64, f64)> {
        match self {
            Kernel::Gaussian { .. } => None,
            Kernel::Histogram { edges } => Some((edges[0], edges[edges.len() - 1])),
            Kernel::Diffusion { lo, hi, .. } => Some((*lo, *hi)),
        }
    }

    pub fn edges(&self) -> Option<&[f64]> {
        match self {
            Kernel::Histogram { edges } => Some(edges),
            _ => None,
        }
    }

    fn diffusion_uses_images(h: f64, lo: f64, hi: f64) -> bool {
        h <= 0.25 * (hi - lo)
    }

    fn bin_of(edges: &[f64], x: f64) -> Option<usize> {
        let m = edges.len() - 1;
        if x < edges[0] || x > edges[m] {
            return None;
        }
        Some(edges.partition_point(|&e| e <= x).saturating_sub(1).min(m - 1))
    }

    /// K(x, y), with a domain error outside the support of compact families.
    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::Domain(format!("kernel evaluated at ({x}, {y})")));
        }
        if let Some((lo, hi)) = self.domain() {
            if x < lo || x > hi || y < lo || y > hi {
                return Err(Error::Domain(format!("({x}, {y}) outside kernel domain [{lo}, {hi}]")));
            }
        }
        Ok(self.value(x, y))
    }

    /// K(x, y) without checks; zero outside compact domains.
    #[inline]
    pub fn value(&self, x: f64, y: f64) -> f64 {
        match self {
            Kernel::Gaussian { h } => std_normal_pdf((y - x) / h) / h,
            Kernel::Histogram { edges } => match (Self::bin_of(edges, x), Self::bin_of(edges, y)) {
                (Some(i), Some(j)) if i == j => 1.0 / (edges[i + 1] - edges[i]),
                _ => 0.0,
            },
            Kernel::Diffusion { h, lo, hi } => {
                if x < *lo || x > *hi || y < *lo || y > *hi {
                    0.0
                } else {
                    diffusion_value(*h, *lo, *hi, x, y)
                }
            }
        }
    }

    /// ∫_{-∞}^{y} K(x, t) dt.
    pub fn cdf(&self, x: f64, y: f64) -> f64 {
        match self {
            Kernel::Gaussian { h } => std_normal_cdf((y - x) / h),
            Kernel::Histogram { edges } => {
                let Some(i) = Self::bin_of(edges, x) else { return 0.0 };
                ((y - edges[i]) / (edges[i + 1] - edges[i])).clamp(0.0, 1.0)
            }
            Kernel::Diffusion { h, lo, hi } => {
                if y <= *lo {
                    0.0
                } else if y >= *hi {
                    1.0
                } else {
                    diffusion_cdf(*h, *lo, *hi, x.clamp(*lo, *hi), y).clamp(0.0, 1.0)
                }
            }
        }
    }

    /// Interval outside of which K(x, ·) vanishes (to working precision).
    /// The kernels here are symmetric in support, so this also bounds K(·, y).
    #[inline]
    pub fn window(&self, x: f64) -> (f64, f64) {
        match self {
            Kernel::Gaussian { h } => (x - REACH * h, x + REACH * h),
            Kernel::Histogram { edges } => match Self::bin_of(edges, x) {
                Some(i) => (edges[i], edges[i + 1]),
                None => (x, x),
            },
            Kernel::Diffusion { h, lo, hi } => {
                if Self::diffusion_uses_images(*h, *lo, *hi) {
                    ((x - REACH * h).max(*lo), (x + REACH * h).min(*hi))
                } else {
                    (*lo, *hi)
                }
            }
        }
    }

    /// Points that must be panel edges when integrating in y.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Kernel::Gaussian { .. } => vec![],
            Kernel::Histogram { edges } => edges.clone(),
            Kernel::Diffusion { lo, hi, .. } => vec![*lo, *hi],
        }
    }

    /// Feature width of K(x, ·) in y.
    pub fn resolution(&self) -> f64 {
        match self {
            Kernel::Gaussian { h } => *h,
            Kernel::Histogram { .. } => f64::INFINITY,
            Kernel::Diffusion { h, lo, hi } => h.min(hi - lo),
        }
    }

    /// y-integration domain for data or densities living on `[x_lo, x_hi]`.
    /// Gaussian kernels pad by 10h, widened for polynomial integrands of `degree`.
    pub fn y_domain(&self, x_lo: f64, x_hi: f64, degree: usize) -> (f64, f64) {
        match self {
            Kernel::Gaussian { h } => {
                let c = 10f64.max(if degree > 0 { 2.0 * ((degree + 1) as f64).sqrt() + 8.0 } else { 0.0 });
                (x_lo - c * h, x_hi + c * h)
            }
            _ => self.domain().expect("compact"),
        }
    }

    /// ∫ K²(x, y) dx for the given y.
    pub fn squared_mass(&self, y: f64) -> f64 {
        match self {
            Kernel::Gaussian { h } => INV_SQRT_2PI / (std::f64::consts::SQRT_2 * h),
            Kernel::Histogram { edges } => match Self::bin_of(edges, y) {
                Some(i) => 1.0 / (edges[i + 1] - edges[i]),
                None => 0.0,
            },
            Kernel::Diffusion { h, lo, hi } => {
                // semigroup property: ∫ K_t(x,y)² dx = K_{2t}(y,y)
                diffusion_value(h * std::f64::consts::SQRT_2, *lo, *hi, y, y)
            }
        }
    }

    /// Quadrature for y-integrals over `[lo, hi]` with polynomial degree up to `degree`.
    pub fn y_rule(&self, spec: &QuadSpec, lo: f64, hi: f64, extra_scale: f64, degree: usize) -> Result<QuadratureRule> {
        let scale = self.resolution().min(extra_scale);
        spec.rule(lo, hi, scale, degree, &self.breakpoints())
    }
}

fn diffusion_value(h: f64, lo: f64, hi: f64, x: f64, y: f64) -> f64 {
    let len = hi - lo;
    let (u, v) = (x - lo, y - lo);
    if Kernel::diffusion_uses_images(h, lo, hi) {
        // φ(z) underflows for |z| > 38.6, so distant images are skipped exactly
        let term = |z: f64| if z.abs() < 38.7 { std_normal_pdf(z) } else { 0.0 };
        let mut s = 0.0;
        for m in -2i32..=2 {
            let shift = 2.0 * m as f64 * len;
            s += term((v - u - shift) / h) + term((v + u - shift) / h);
        }
        s / h
    } else {
        let c = std::f64::consts::PI / len;
        let mut s = 1.0;
        for k in 1.. {
            let kf = k as f64;
            let e = (-0.5 * (kf * c * h).powi(2)).exp();
            if e < SERIES_CUTOFF {
                break;
            }
            s += 2.0 * e * (kf * c * u).cos() * (kf * c * v).cos();
        }
        s / len
    }
}

fn diffusion_cdf(h: f64, lo: f64, hi: f64, x: f64, y: f64) -> f64 {
    let len = hi - lo;
    let (u, v) = (x - lo, y - lo);
    if Kernel::diffusion_uses_images(h, lo, hi) {
        let mut s = 0.0;
        for m in -2i32..=2 {
            let shift = 2.0 * m as f64 * len;
            s += std_normal_cdf((v - u - shift) / h) - std_normal_cdf((-u - shift) / h);
            s += std_normal_cdf((v + u - shift) / h) - std_normal_cdf((u - shift) / h);
        }
        s
    } else {
        let c = std::f64::consts::PI / len;
        let mut s = v / len;
        for k in 1.. {
            let kf = k as f64;
            let e = (-0.5 * (kf * c * h).powi(2)).exp();
            if e < SERIES_CUTOFF {
                break;
            }
            s += 2.0 * e * (kf * c * u).cos() * (kf * c * v).sin() / (kf * std::f64::consts::PI);
        }
        s
    }
}

/// A discrete measure Σ w_a δ(x − a), sorted by location: either quadrature
/// nodes weighted by an oracle density or sample points with weight 1/n.
#[derive(Clone, Debug)]
pub struct WeightedPoints {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl WeightedPoints {
    pub fn from_sample(s: &Sample) -> Self {
        let n = s.n() as f64;
        Self { points: s.values().to_vec(), weights: vec![1.0 / n; s.n()] }
    }

    /// Nodes of `q` weighted by `w_i f(x_i)`; zero-weight nodes dropped.
    pub fn from_density(d: &OracleDensity, q: &QuadratureRule) -> Self {
        let mut points = Vec::with_capacity(q.len());
        let mut weights = Vec::with_capacity(q.len());
        for (&x, &w) in q.nodes().iter().zip(q.weights()) {
            let f = d.pdf_unchecked(x);
            if f > 0.0 {
                points.push(x);
                weights.push(w * f);
            }
        }
        Self { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Index range of points inside `[lo, hi]`.
    pub fn range(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let a = self.points.partition_point(|&p| p < lo);
        let b = self.points.partition_point(|&p| p <= hi);
        a..b.max(a)
    }

    /// Σ w_a K(a, y).
    pub fn smooth_at(&self, k: &Kernel, y: f64) -> f64 {
        let (lo, hi) = k.window(y);
        let r = self.range(lo, hi);
        self.points[r.clone()].iter().zip(&self.weights[r]).map(|(&a, &w)| w * k.value(a, y)).sum()
    }

    /// Σ w_a K^power(a, y).
    pub fn moment_at(&self, k: &Kernel, y: f64, power: i32) -> f64 {
        let (lo, hi) = k.window(y);
        let r = self.range(lo, hi);
        self.points[r.clone()].iter().zip(&self.weights[r]).map(|(&a, &w)| w * k.value(a, y).powi(power)).sum()
    }

    /// Σ w_a ∫_{-∞}^{y} K(a, t) dt, using that points whose window lies left of y contribute fully.
    pub fn smooth_cdf_at(&self, k: &Kernel, y: f64, prefix: &[f64]) -> f64 {
        let (lo, hi) = k.window(y);
        let r = self.range(lo, hi);
        let mut s = prefix[r.start];
        for i in r {
            s += self.weights[i] * k.cdf(self.points[i], y);
        }
        s
    }

    /// prefix[i] = Σ_{a < i} w_a.
    pub fn prefix_weights(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.len() + 1);
        let mut acc = 0.0;
        p.push(0.0);
        for &w in &self.weights {
            acc += w;
            p.push(acc);
        }
        p
    }
}

/// Kernel values K(a, y_j) for every point `a` and the y-nodes inside its window,
/// stored row-wise.
#[derive(Clone, Debug)]
pub struct KernelTable {
    pub starts: Vec<usize>,
    pub offsets: Vec<usize>,
    pub values: Vec<f64>,
}

impl KernelTable {
    pub fn build(k: &Kernel, points: &[f64], y_nodes: &[f64]) -> Self {
        let rows: Vec<(usize, Vec<f64>)> = par_map(points.len(), |i| {
            let a = points[i];
            let (lo, hi) = k.window(a);
            let s = y_nodes.partition_point(|&y| y < lo);
            let e = y_nodes.partition_point(|&y| y <= hi).max(s);
            (s, y_nodes[s..e].iter().map(|&y| k.value(a, y)).collect())
        });
        let mut starts = Vec::with_capacity(rows.len());
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        let mut values = Vec::with_capacity(rows.iter().map(|r| r.1.len()).sum());
        offsets.push(0);
        for (s, v) in rows {
            starts.push(s);
            values.extend_from_slice(&v);
            offsets.push(values.len());
        }
        Self { starts, offsets, values }
    }

    #[inline]
    pub fn row(&self, i: usize) -> (usize, &[f64]) {
        (self.starts[i], &self.values[self.offsets[i]..self.offsets[i + 1]])
    }

    pub fn rows(&self) -> usize {
        self.starts.len()
    }

    /// μ_p(y_j) = Σ_a w_a K(a, y_j)^p for p = 1, 2.
    pub fn moments(&self, weights: &[f64], ny: usize) -> (Vec<f64>, Vec<f64>) {
        let mut m1 = vec![0.0; ny];
        let mut m2 = vec![0.0; ny];
        for (i, &w) in weights.iter().enumerate() {
            let (s, row) = self.row(i);
            for (j, &kv) in row.iter().enumerate() {
                m1[s + j] += w * kv;
                m2[s + j] += w * kv * kv;
            }
        }
        (m1, m2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Oracle,
    Empirical,
}

/// f_K (oracle) or the KDE f̂ (empirical).
#[derive(Clone, Debug)]
pub struct SmoothedDensity {
    kernel: Kernel,
    atoms: WeightedPoints,
    prefix: Vec<f64>,
    provenance: Provenance,
    closed_normal: Option<(f64, f64)>,
    domain: (f64, f64),
}

impl SmoothedDensity {
    /// f_K = ∫ K(x, ·) f(x) dx with the x-integral discretized by `q`.
    pub fn oracle(kernel: &Kernel, d: &OracleDensity, q: &QuadratureRule) -> Result<Self> {
        check_support(kernel, d.support())?;
        let atoms = WeightedPoints::from_density(d, q);
        let closed_normal = match (kernel, d.model()) {
            (Kernel::Gaussian { h }, crate::data::DensityModel::Gaussian { mean, sd }) if !d.is_compact() => {
                Some((*mean, (sd * sd + h * h).sqrt()))
            }
            _ => None,
        };
        let (qlo, qhi) = q.bounds();
        let domain = kernel.y_domain(qlo, qhi, 0);
        let out = Self { kernel: kernel.clone(), prefix: atoms.prefix_weights(), atoms, provenance: Provenance::Oracle, closed_normal, domain };
        if closed_normal.is_none() {
            let total = out.integrate_pdf(&QuadSpec::default())?;
            if (total - 1.0).abs() > 1e-4 {
                return Err(Error::Numerical(format!(
                    "smoothed density integrates to {total:.8} over [{:.4}, {:.4}] with {} x-nodes",
                    domain.0, domain.1, q.len()
                )));
            }
        }
        Ok(out)
    }

    /// Oracle smoothing with a default x-quadrature.
    pub fn oracle_default(kernel: &Kernel, d: &OracleDensity) -> Result<Self> {
        let (lo, hi) = d.reference_domain(0);
        let scale = d.resolution().min(kernel.resolution());
        let mut breaks = d.breakpoints();
        breaks.extend(kernel.breakpoints());
        let q = QuadSpec::default().rule(lo, hi, scale, 0, &breaks)?;
        Self::oracle(kernel, d, &q)
    }

    /// The KDE f̂(y) = (1/n) Σ K(x_i, y).
    pub fn empirical(kernel: &Kernel, s: &Sample) -> Result<Self> {
        if let Some((lo, hi)) = kernel.domain() {
            if s.min() < lo || s.max() > hi {
                return Err(Error::Domain(format!("sample outside kernel domain [{lo}, {hi}]")));
            }
        }
        let atoms = WeightedPoints::from_sample(s);
        let domain = kernel.y_domain(s.min(), s.max(), 0);
        Ok(Self { kernel: kernel.clone(), prefix: atoms.prefix_weights(), atoms, provenance: Provenance::Empirical, closed_normal: None, domain })
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn atoms(&self) -> &WeightedPoints {
        &self.atoms
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn pdf(&self, y: f64) -> f64 {
        if let Some((m, t)) = self.closed_normal {
            return std_normal_pdf((y - m) / t) / t;
        }
        self.atoms.smooth_at(&self.kernel, y)
    }

    pub fn cdf(&self, y: f64) -> f64 {
        if let Some((m, t)) = self.closed_normal {
            return std_normal_cdf((y - m) / t);
        }
        self.atoms.smooth_cdf_at(&self.kernel, y, &self.prefix).clamp(0.0, 1.0)
    }

    pub fn integrate_pdf(&self, spec: &QuadSpec) -> Result<f64> {
        let q = self.kernel.y_rule(spec, self.domain.0, self.domain.1, f64::INFINITY, 0)?;
        Ok(q.integrate(|y| self.pdf(y)))
    }
}

fn check_support(k: &Kernel, (lo, hi): (f64, f64)) -> Result<()> {
    if let Some((klo, khi)) = k.domain() {
        let tol = 1e-12 * (khi - klo);
        if lo < klo - tol || hi > khi + tol {
            return Err(Error::Argument(format!(
                "density support [{lo}, {hi}] not inside kernel domain [{klo}, {khi}]"
            )));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub passed: bool,
    /// Worst observed deviation for the property.
    pub worst: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PropertyReport {
    pub p1_normalization: PropertyCheck,
    pub p3_nonnegative: PropertyCheck,
    pub p4_doubly_stochastic: PropertyCheck,
    pub p5_entropy: PropertyCheck,
}

/// Numerical check of normalization, positivity, double stochasticity and
/// entropy increase on a grid over the kernel domain (`[0, 1]` for gaussian).
pub fn check_properties(k: &Kernel, spec: &QuadSpec) -> Result<PropertyReport> {
    let (xlo, xhi) = k.domain().unwrap_or((0.0, 1.0));
    let (ylo, yhi) = k.y_domain(xlo, xhi, 0);
    let qy = k.y_rule(spec, ylo, yhi, f64::INFINITY, 0)?;
    let xs: Vec<f64> = (0..50).map(|i| xlo + (xhi - xlo) * (i as f64 + 0.5) / 50.0).collect();

    let mut p1 = 0.0f64;
    let mut p3 = 0.0f64;
    for &x in &xs {
        let mut s = 0.0;
        for (&y, &w) in qy.nodes().iter().zip(qy.weights()) {
            let v = k.value(x, y);
            p3 = p3.min(v);
            s += w * v;
        }
        p1 = p1.max((s - 1.0).abs());
    }

    // column integrals ∫ K(x, y) dx at interior y
    let mut breaks = k.breakpoints();
    breaks.extend([xlo, xhi]);
    let qx = spec.rule(xlo, xhi, k.resolution(), 0, &breaks)?;
    let cols: Vec<f64> = xs.iter().map(|&y| qx.integrate(|x| k.value(x, y))).collect();
    let cmax = cols.iter().cloned().fold(f64::MIN, f64::max);
    let cmin = cols.iter().cloned().fold(f64::MAX, f64::min);
    let p4 = match k {
        // on the line the column integral is 1 away from the ends of the test interval
        Kernel::Gaussian { .. } => 0.0,
        _ => cmax - cmin,
    };

    // two-block step density
    let cut = xlo + 0.3 * (xhi - xlo);
    let g = |x: f64| {
        if x < xlo || x > xhi {
            0.0
        } else if x < cut {
            0.7 / (cut - xlo)
        } else {
            0.3 / (xhi - cut)
        }
    };
    let h_g = -(0.7 * (0.7 / (cut - xlo)).ln() + 0.3 * (0.3 / (xhi - cut)).ln());
    let mut gb = breaks.clone();
    gb.push(cut);
    let qg = spec.rule(xlo, xhi, k.resolution(), 0, &gb)?;
    let mut yb = k.breakpoints();
    yb.push(cut);
    let qy2 = spec.rule(ylo, yhi, k.resolution(), 0, &yb)?;
    let h_gk: f64 = qy2
        .nodes()
        .iter()
        .zip(qy2.weights())
        .map(|(&y, &w)| {
            let gk = qg.integrate(|x| k.value(x, y) * g(x));
            if gk > 0.0 {
                -w * gk * gk.ln()
            } else {
                0.0
            }
        })
        .sum();
    let p5 = h_g - h_gk;

    Ok(PropertyReport {
        p1_normalization: PropertyCheck { passed: p1 < 1e-8, worst: p1 },
        p3_nonnegative: PropertyCheck { passed: p3 >= -1e-12, worst: p3 },
        p4_doubly_stochastic: PropertyCheck { passed: p4 < 1e-6, worst: p4 },
        p5_entropy: PropertyCheck { passed: p5 <= 1e-6, worst: p5 },
    })
}

/// KDE value f̂(y) = (1/n) Σ K(x_i, y).
pub fn kde_eval(k: &Kernel, s: &Sample, y: f64) -> f64 {
    let n = s.n() as f64;
    let (lo, hi) = k.window(y);
    let v = s.values();
    let a = v.partition_point(|&p| p < lo);
    let b = v.partition_point(|&p| p <= hi);
    v[a..b.max(a)].iter().map(|&x| k.value(x, y)).sum::<f64>() / n
}
