//! Asymptotic mean Kullback–Leibler divergence: all-Gaussian closed forms and
//! the general B + V + BV decomposition.

use serde::{Deserialize, Serialize};

use crate::data::{DensityModel, OracleDensity, QuadSpec};
use crate::error::{Error, Result};
use crate::kernels::{Kernel, KernelFamily};
use crate::sensitivity::{build_sensitivity, y_side_values, Basis, Variant};
use crate::smoothing::{SmoothingProblem, TINY};
use crate::util::{brent_min, brent_root};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AmkldBreakdown {
    /// Bias term.
    pub b: f64,
    /// Variance term ν/(2n).
    pub v: f64,
    /// Bias-variance interaction −tr(S̃S̃ᵀE)/(2n).
    pub bv: f64,
    pub total: f64,
    /// h/σ in the all-Gaussian case.
    pub r: Option<f64>,
    pub n: usize,
    /// ½∫β²/f, the quadratic approximation of `b` (None when it diverges).
    pub quadratic_bias: Option<f64>,
    /// Last diagonal of S̃S̃ᵀ at the truncation degree.
    pub tail: Option<f64>,
    pub degree: Option<usize>,
}

impl AmkldBreakdown {
    fn new(b: f64, v: f64, bv: f64, n: usize) -> Self {
        Self { b, v, bv, total: b + v + bv, r: None, n, quadratic_bias: None, tail: None, degree: None }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Argument(format!("{name} must be positive and finite, got {v}")))
    }
}

/// ν_G(h) = σ²/h².
pub fn nu_gaussian(sigma: f64, h: f64) -> Result<f64> {
    positive("sigma", sigma)?;
    positive("h", h)?;
    Ok((sigma / h).powi(2))
}

/// s_jj = (1 + h²/σ²)^{−j/2}.
pub fn gaussian_sensitivity_diag(j: usize, sigma: f64, h: f64) -> Result<f64> {
    positive("sigma", sigma)?;
    positive("h", h)?;
    Ok((1.0 + (h / sigma).powi(2)).powf(-(j as f64) / 2.0))
}

/// Closed-form AMKLD for a Gaussian kernel on a Gaussian density, r = h/σ.
pub fn amkld_gaussian(r: f64, n: usize) -> Result<AmkldBreakdown> {
    positive("r", r)?;
    if n == 0 {
        return Err(Error::Argument("n must be at least 1".into()));
    }
    let r2 = r * r;
    let nf = n as f64;
    let b = 0.5 * ((1.0 + r2).ln() - r2 / (1.0 + r2));
    let v = 1.0 / (2.0 * nf * r2);
    let bv = v * ((1.0 + r2).powi(2) / ((2.0 + r2).powi(2) - 1.0).sqrt() - 1.0) - 1.0 / (2.0 * nf);
    let mut out = AmkldBreakdown::new(b, v, bv, n);
    out.r = Some(r);
    Ok(out)
}

/// n r⁶ (3 + r²) √(3 + 4r² + r⁴) − 3(1 + r²)³, divided by 3(1 + r²)³.
pub fn optimal_r_residual(r: f64, n: usize) -> f64 {
    let r2 = r * r;
    let rhs = 3.0 * (1.0 + r2).powi(3);
    (n as f64 * r2.powi(3) * (3.0 + r2) * (3.0 + 4.0 * r2 + r2 * r2).sqrt() - rhs) / rhs
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct OptimalR {
    pub r_star: f64,
    /// Relative residual of the stationarity equation at `r_star`.
    pub residual: f64,
    /// (1/3)^{1/12} n^{−1/6}.
    pub h_rule_ratio: f64,
}

/// (1/3)^{1/12} n^{−1/6}, the normal-scale AMKLD bandwidth in units of σ.
pub fn amkld_rule_ratio(n: usize) -> f64 {
    (1.0f64 / 3.0).powf(1.0 / 12.0) * (n as f64).powf(-1.0 / 6.0)
}

/// (4/3)^{1/5} n^{−1/5}, the normal-scale AMISE bandwidth in units of σ.
pub fn amise_rule_ratio(n: usize) -> f64 {
    (4.0f64 / 3.0).powf(0.2) * (n as f64).powf(-0.2)
}

/// Stationary point of the all-Gaussian AMKLD in r.
pub fn amkld_optimal_r(n: usize) -> Result<OptimalR> {
    if n == 0 {
        return Err(Error::Argument("n must be at least 1".into()));
    }
    let (lo, hi) = (1e-3, 10.0);
    let f = |r: f64| optimal_r_residual(r, n);
    if !(f(lo) < 0.0 && f(hi) > 0.0) {
        return Err(Error::Numerical(format!("stationarity equation not bracketed on [{lo}, {hi}] for n={n}")));
    }
    let r_star = brent_root(f, lo, hi, 1e-15)?;
    Ok(OptimalR { r_star, residual: f(r_star), h_rule_ratio: amkld_rule_ratio(n) })
}

/// Numeric argmin of the closed-form total, for cross-checking the root.
pub fn amkld_gaussian_argmin(n: usize) -> Result<f64> {
    let guess = amkld_optimal_r(n)?.r_star;
    let (x, _) = brent_min(|lr: f64| amkld_gaussian(lr.exp(), n).map(|a| a.total).unwrap_or(f64::INFINITY), (guess / 4.0).ln(), (guess * 4.0).ln(), 1e-12);
    Ok(x.exp())
}

/// B + V + BV for a general kernel and oracle density.
///
/// B is the exact KL(f ‖ f_K) by quadrature; its quadratic approximation
/// ½∫β²/f is reported alongside when finite. The y basis must be orthonormal
/// under f_K (Ops, LegendreCdf, or a matching explicit table).
pub fn amkld_general(
    k: &Kernel,
    d: &OracleDensity,
    y_basis: &Basis,
    x_basis: &Basis,
    degree: usize,
    n: usize,
    spec: &QuadSpec,
) -> Result<AmkldBreakdown> {
    if n == 0 {
        return Err(Error::Argument("n must be at least 1".into()));
    }
    if k.family() == KernelFamily::Gaussian && d.is_compact() {
        return Err(Error::Argument("f_K and f must share support; use a compact-domain kernel".into()));
    }
    let p = SmoothingProblem::oracle(k, d, degree, spec)?;
    let f = p.f_at_y().expect("oracle problem");
    let wy = p.y_weights();

    let mut b = 0.0;
    let mut quad = 0.0;
    let mut lost = 0.0;
    for ((&fy, &m1), &w) in f.iter().zip(&p.mu1).zip(wy) {
        if fy <= 0.0 {
            continue;
        }
        if m1 <= TINY {
            lost += w * fy;
            continue;
        }
        b += w * fy * (fy / m1).ln();
        quad += w * (m1 - fy).powi(2) / fy;
    }
    if lost > 1e-10 {
        return Err(Error::Numerical(format!("f carries mass {lost:.3e} where f_K underflows")));
    }

    let s = build_sensitivity(&p, y_basis, x_basis, Variant::QP, degree)?;
    let dd = s.degree();
    let (q, dq) = y_side_values(&p, y_basis, dd)?;
    let d1 = dq + 1;
    // ε_jl = ∫ (f_K − f) Q_j Q_l dy for j, l = 1..D
    let mut eps = vec![vec![0.0; dd]; dd];
    for (i, (&w, (&m1, &fy))) in wy.iter().zip(p.mu1.iter().zip(&f)).enumerate() {
        let beta = w * (m1 - fy);
        if beta == 0.0 {
            continue;
        }
        let row = &q[i * d1..i * d1 + d1];
        for j in 1..=dd {
            let bj = beta * row[j];
            for l in j..=dd {
                eps[j - 1][l - 1] += bj * row[l];
            }
        }
    }
    let gram = s.gram();
    let mut tr = 0.0;
    for j in 0..dd {
        for l in 0..dd {
            let e = if l >= j { eps[j][l] } else { eps[l][j] };
            tr += gram[j][l] * e;
        }
    }
    let diag = s.diagonal_profile();
    let nu: f64 = diag.iter().sum();
    let nf = n as f64;
    let mut out = AmkldBreakdown::new(b, nu / (2.0 * nf), -tr / (2.0 * nf), n);
    out.quadratic_bias = quad.is_finite().then_some(0.5 * quad);
    out.tail = diag.last().copied();
    out.degree = Some(dd);
    if let (DensityModel::Gaussian { sd, .. }, Some(h)) = (d.model(), k.bandwidth()) {
        if k.family() == KernelFamily::Gaussian {
            out.r = Some(h / sd);
        }
    }
    Ok(out)
}
