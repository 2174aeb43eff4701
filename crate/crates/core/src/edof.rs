//! EDoF measures: oracle ν, plug-in ν̂, the competing ν̂₁/ν̂₂/ν̂₃, oracle ν₃,
//! and the influence-function variance of θ̂ = 1 + ν̂.

use serde::{Deserialize, Serialize};

use crate::data::{OracleDensity, QuadSpec, Sample};
use crate::error::{Error, Result};
use crate::kernels::{Kernel, WeightedPoints};
use crate::smoothing::{SmoothingProblem, TINY};
use crate::util::par_map;

/// ν = ∫∫ K²(x,y)/f_K(y) f(x) dy dx − 1 by nested quadrature.
pub fn nu_oracle_direct(k: &Kernel, d: &OracleDensity, spec: &QuadSpec) -> Result<f64> {
    SmoothingProblem::oracle(k, d, 0, spec)?.nu()
}

/// ν̂ = (1/n) Σ ∫ K²(x_i,y)/f̂(y) dy − 1.
pub fn nu_hat_plugin(k: &Kernel, s: &Sample, spec: &QuadSpec) -> Result<f64> {
    SmoothingProblem::empirical(k, s, 0, spec)?.nu()
}

/// f̂ at each (sorted) datum, with an error naming the first datum where it vanishes.
pub fn kde_at_data(k: &Kernel, s: &Sample) -> Result<Vec<f64>> {
    let atoms = WeightedPoints::from_sample(s);
    let v = par_map(s.n(), |i| atoms.smooth_at(k, s.values()[i]));
    if let Some(i) = v.iter().position(|&f| !(f > 0.0)) {
        return Err(Error::Numerical(format!("KDE vanishes at datum x[{i}] = {}", s.values()[i])));
    }
    Ok(v)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Competitors {
    pub nu1: f64,
    /// Left form: (1/n) Σ ∫K²(x, x_i) dx / f̂(x_i) − 1.
    pub nu2: f64,
    pub nu3: f64,
}

/// ∫ K²(x, y) dx by quadrature over the kernel's x-window around y.
fn squared_mass_quadrature(k: &Kernel, y: f64, spec: &QuadSpec) -> Result<f64> {
    let (lo, hi) = k.window(y);
    if !(lo < hi) {
        return Ok(0.0);
    }
    let scale = k.resolution();
    let mut breaks = k.breakpoints();
    breaks.push(y);
    let q = QuadSpec { min_panels: 8, ..spec.clone() }.rule(lo, hi, scale, 0, &breaks)?;
    Ok(q.integrate(|x| k.value(x, y).powi(2)))
}

pub fn nu_competitors(k: &Kernel, s: &Sample, spec: &QuadSpec) -> Result<Competitors> {
    let n = s.n() as f64;
    let f = kde_at_data(k, s)?;
    let xs = s.values();
    let ratio: f64 = xs.iter().zip(&f).map(|(&x, &fx)| k.value(x, x) / fx).sum();
    let sq: Vec<Result<f64>> = par_map(xs.len(), |i| squared_mass_quadrature(k, xs[i], spec));
    let mut nu2 = 0.0;
    for (r, fx) in sq.into_iter().zip(&f) {
        nu2 += r? / fx;
    }
    Ok(Competitors {
        nu1: ratio / (n - 1.0) + (1.0 - n / (n - 1.0)),
        nu2: nu2 / n - 1.0,
        nu3: ratio / n,
    })
}

/// Oracle ν₃ = E K(X,X)/f_K(X).
pub fn nu3_oracle(k: &Kernel, d: &OracleDensity, spec: &QuadSpec) -> Result<f64> {
    let p = SmoothingProblem::oracle(k, d, 0, spec)?;
    let a = &p.atoms;
    let terms = par_map(a.len(), |i| {
        let x = a.points[i];
        let m = a.smooth_at(k, x);
        if m > 0.0 {
            a.weights[i] * k.value(x, x) / m
        } else {
            0.0
        }
    });
    Ok(terms.iter().sum())
}

/// Moment functions μ_j(y) = E K^j(X,y) and μ_jk(w,z) = E K^j(X,w) K^k(X,z)
/// under the measure of a smoothing problem (oracle or empirical).
#[derive(Clone, Debug)]
pub struct MomentKernels {
    pub kernel: Kernel,
    pub atoms: WeightedPoints,
}

impl MomentKernels {
    pub fn new(p: &SmoothingProblem) -> Self {
        Self { kernel: p.kernel.clone(), atoms: p.atoms.clone() }
    }

    pub fn mu(&self, j: i32, y: f64) -> f64 {
        self.atoms.moment_at(&self.kernel, y, j)
    }

    pub fn mu_pair(&self, j: i32, k: i32, w: f64, z: f64) -> f64 {
        let (a, b) = self.kernel.window(w);
        let (c, d) = self.kernel.window(z);
        let r = self.atoms.range(a.max(c), b.min(d));
        r.map(|i| {
            let x = self.atoms.points[i];
            self.atoms.weights[i] * self.kernel.value(x, w).powi(j) * self.kernel.value(x, z).powi(k)
        })
        .sum()
    }
}

/// L₄(x; y) = K²(x,y)/μ₁(y) − μ₂(y)/μ₁(y)² · K(x,y).
pub fn influence_l4(mk: &MomentKernels, x: f64, y: f64) -> Result<f64> {
    let m1 = mk.mu(1, y);
    if !(m1 > 0.0) {
        return Err(Error::Numerical(format!("μ₁({y}) is zero")));
    }
    let m2 = mk.mu(2, y);
    let kv = mk.kernel.value(x, y);
    Ok(kv * kv / m1 - m2 / (m1 * m1) * kv)
}

/// L₄(x) = ∫ L₄(x; y) dy at every atom of the problem.
pub fn influence_at_atoms(p: &SmoothingProblem) -> Vec<f64> {
    let wy = p.y_weights();
    par_map(p.atoms.len(), |i| {
        let (s, row) = p.table.row(i);
        row.iter()
            .enumerate()
            .map(|(off, &kv)| {
                let j = s + off;
                let m1 = p.mu1[j];
                if m1 > TINY {
                    wy[j] * (kv * kv / m1 - p.mu2[j] / (m1 * m1) * kv)
                } else {
                    0.0
                }
            })
            .sum()
    })
}

/// ω² = E L₄(X)².
pub fn omega2_influence(p: &SmoothingProblem) -> f64 {
    influence_at_atoms(p).iter().zip(&p.atoms.weights).map(|(l, w)| w * l * l).sum()
}

/// ω² = ∫∫ γ(w,z)/(μ₁(w)μ₁(z)) dw dz by double quadrature of the four-term γ.
pub fn omega2_asymptotic(p: &SmoothingProblem) -> Result<f64> {
    let ys = p.y_nodes();
    let wy = p.y_weights();
    let a = &p.atoms;
    let k = &p.kernel;
    let ratio: Vec<f64> = p.mu1.iter().zip(&p.mu2).map(|(&m1, &m2)| if m1 > TINY { m2 / m1 } else { 0.0 }).collect();
    let rows = par_map(ys.len(), |jw| {
        let m1w = p.mu1[jw];
        if !(m1w > TINY) {
            return 0.0;
        }
        let w = ys[jw];
        let (wlo, whi) = k.window(w);
        // z only interacts with w through atoms inside both windows
        let zlo = ys.partition_point(|&z| z < k.window(wlo).0);
        let zhi = ys.partition_point(|&z| z <= k.window(whi).1);
        let r_atoms = a.range(wlo, whi);
        let kw: Vec<f64> = r_atoms.clone().map(|i| k.value(a.points[i], w)).collect();
        let mut acc = 0.0;
        for jz in zlo..zhi {
            let m1z = p.mu1[jz];
            if !(m1z > TINY) {
                continue;
            }
            let z = ys[jz];
            // γ = μ22 − r_w μ12 − r_z μ21 + r_w r_z μ11, accumulated atom by atom as
            // E[(K_w² − r_w K_w)(K_z² − r_z K_z)] to avoid cancellation in the tails
            let mut gamma = 0.0;
            for (t, i) in r_atoms.clone().enumerate() {
                let kz = k.value(a.points[i], z);
                if kz == 0.0 {
                    continue;
                }
                let kwv = kw[t];
                gamma += a.weights[i] * (kwv * kwv - ratio[jw] * kwv) * (kz * kz - ratio[jz] * kz);
            }
            acc += wy[jz] * gamma / m1z;
        }
        wy[jw] * acc / m1w
    });
    let total: f64 = rows.iter().sum();
    if total < -1e-8 {
        return Err(Error::Numerical(format!("asymptotic variance came out negative ({total:.3e})")));
    }
    Ok(total.max(0.0))
}

/// Half-width in standard deviations of the x-domain used for ω² with Gaussian
/// oracles. Per-atom cancellation in L₄ is amplified by 1/f(x), so the far
/// tails where f ~ 1e-300 only add rounding noise.
pub const OMEGA_CLIP: f64 = 12.0;

/// Oracle discretization suitable for ω².
pub fn omega2_problem(k: &Kernel, d: &OracleDensity, spec: &QuadSpec) -> Result<SmoothingProblem> {
    let dom = match d.model() {
        crate::data::DensityModel::Gaussian { mean, sd } if !d.is_compact() => {
            (mean - OMEGA_CLIP * sd, mean + OMEGA_CLIP * sd)
        }
        _ => d.reference_domain(0),
    };
    SmoothingProblem::oracle_on(k, d, dom, 0, spec)
}

/// ω²_h for an oracle density, via E L₄(X)².
pub fn omega2_oracle(k: &Kernel, d: &OracleDensity, spec: &QuadSpec) -> Result<f64> {
    Ok(omega2_influence(&omega2_problem(k, d, spec)?))
}

/// Plug-in ω̂² = (1/n) Σ L̂₄(x_i)² from the empirical measure.
pub fn omega2_plugin(k: &Kernel, s: &Sample, spec: &QuadSpec) -> Result<f64> {
    Ok(omega2_influence(&SmoothingProblem::empirical(k, s, 0, spec)?))
}

/// t₃(F) = ∫ log μ₁ dF.
pub fn t3(p: &SmoothingProblem) -> f64 {
    let a = &p.atoms;
    (0..a.len()).map(|i| a.weights[i] * a.smooth_at(&p.kernel, a.points[i]).ln()).sum::<f64>() / a.total()
}

/// L₃(x) = log μ₁(x) − t₃(F).
pub fn l3(p: &SmoothingProblem, x: f64) -> f64 {
    p.mu1_at(x).ln() - t3(p)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EdofReport {
    pub nu_oracle: Option<f64>,
    pub nu_hat: f64,
    pub nu1_hat: f64,
    pub nu2_hat: f64,
    pub nu3_hat: f64,
    pub omega2: Option<f64>,
    pub theta_hat: f64,
    pub kernel: String,
    pub h: Option<f64>,
    pub n: usize,
    pub degree: Option<usize>,
}

/// Every empirical measure for `(s, k)`, plus oracle ν and ω² when `oracle` is given.
pub fn edof_report(k: &Kernel, s: &Sample, oracle: Option<&OracleDensity>, spec: &QuadSpec) -> Result<EdofReport> {
    let nu_hat = nu_hat_plugin(k, s, spec)?;
    let c = nu_competitors(k, s, spec)?;
    let (nu_oracle, omega2) = match oracle {
        Some(d) => {
            (Some(nu_oracle_direct(k, d, spec)?), Some(omega2_oracle(k, d, spec)?))
        }
        None => (None, None),
    };
    Ok(EdofReport {
        nu_oracle,
        nu_hat,
        nu1_hat: c.nu1,
        nu2_hat: c.nu2,
        nu3_hat: c.nu3,
        omega2,
        theta_hat: 1.0 + nu_hat,
        kernel: k.family().to_string(),
        h: k.bandwidth(),
        n: s.n(),
        degree: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::RngStream;
    use crate::util::std_normal_pdf;

    #[test]
    fn all_gaussian_oracles() {
        let d = OracleDensity::standard_normal();
        let spec = QuadSpec::default();
        let k = Kernel::gaussian(0.5).unwrap();
        assert!((nu_oracle_direct(&k, &d, &spec).unwrap() - 4.0).abs() < 1e-6);
        assert!((nu3_oracle(&k, &d, &spec).unwrap() - 5.0).abs() < 1e-6);
    }

    #[test]
    fn l4_is_mean_zero_and_matches_formula() {
        let d = OracleDensity::standard_normal();
        let k = Kernel::gaussian(1.0).unwrap();
        let p = SmoothingProblem::oracle(&k, &d, 0, &QuadSpec::default()).unwrap();
        let mk = MomentKernels::new(&p);
        for y in [-1.0, 0.0, 2.5] {
            let mean: f64 = (0..mk.atoms.len())
                .map(|i| mk.atoms.weights[i] * influence_l4(&mk, mk.atoms.points[i], y).unwrap())
                .sum();
            assert!(mean.abs() < 1e-8);
        }
        // closed forms at x = y = 0 with σ = h = 1: μ₁ = φ(0; √2), μ₂ = φ(0; √(3/2))/(2√π)
        let m1 = std_normal_pdf(0.0) / 2f64.sqrt();
        let m2 = std_normal_pdf(0.0) / 1.5f64.sqrt() / (2.0 * std::f64::consts::PI.sqrt());
        let kv = std_normal_pdf(0.0);
        let want = kv * kv / m1 - m2 / (m1 * m1) * kv;
        assert!((influence_l4(&mk, 0.0, 0.0).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn constant_kernel_has_zero_variance() {
        let d = OracleDensity::uniform(0.0, 1.0).unwrap();
        let k = Kernel::diffusion(30.0, 0.0, 1.0).unwrap();
        let p = SmoothingProblem::oracle(&k, &d, 0, &QuadSpec::default()).unwrap();
        assert!(omega2_influence(&p) < 1e-20);
        assert!(omega2_asymptotic(&p).unwrap() < 1e-20);
        let mk = MomentKernels::new(&p);
        assert!(influence_l4(&mk, 0.3, 0.8).unwrap().abs() < 1e-12);
    }

    #[test]
    fn omega2_routes_agree() {
        let spec = QuadSpec::default();
        let d = OracleDensity::standard_normal();
        let p = omega2_problem(&Kernel::gaussian(2.0).unwrap(), &d, &spec).unwrap();
        let (a, b) = (omega2_influence(&p), omega2_asymptotic(&p).unwrap());
        assert!((a - b).abs() < 1e-8 * a.max(1.0), "{a} {b}");
        assert!((a - 0.168_41).abs() < 1e-4, "{a}");

        let d = OracleDensity::bimodal_mixture();
        let (lo, hi) = d.support();
        let p = omega2_problem(&Kernel::diffusion(0.2, lo, hi).unwrap(), &d, &spec).unwrap();
        let (a, b) = (omega2_influence(&p), omega2_asymptotic(&p).unwrap());
        assert!((a - b).abs() < 1e-8 * a.max(1.0), "{a} {b}");
    }

    #[test]
    fn competitors_relations() {
        let d = OracleDensity::standard_normal();
        let s = d.sample_from(2000, &RngStream::new(5, 0)).unwrap();
        let k = Kernel::gaussian(0.3).unwrap();
        let c = nu_competitors(&k, &s, &QuadSpec::default()).unwrap();
        assert!((c.nu1 - c.nu3).abs() < 5.0 / 2000.0 * c.nu3);
        // ∫K²(x, x_i)dx is 1/(2h√π) for the gaussian kernel
        let direct: f64 = kde_at_data(&k, &s).unwrap().iter().map(|f| 1.0 / (2.0 * 0.3 * std::f64::consts::PI.sqrt()) / f).sum::<f64>() / 2000.0 - 1.0;
        assert!((c.nu2 - direct).abs() < 1e-9 * direct);
    }

    #[test]
    fn histogram_exact_identities() {
        let s = Sample::with_support(vec![0.1, 0.2, 0.9], 0.0, 1.0).unwrap();
        let k = Kernel::equal_bins(0.0, 1.0, 2).unwrap();
        let spec = QuadSpec::default();
        assert!((nu_hat_plugin(&k, &s, &spec).unwrap() - 1.0).abs() < 1e-12);
        assert!((nu_competitors(&k, &s, &spec).unwrap().nu3 - 2.0).abs() < 1e-12);
    }
}
