//! Shared discretization of a (kernel, density-or-sample) pair.
//!
//! Oracle problems place the x-measure on quadrature nodes weighted by f(x)·w;
//! empirical problems place it on the sample with weights 1/n. Everything
//! downstream (f_K, ν, sensitivity matrices, influence functions) is written
//! once against this measure.

use crate::data::{OracleDensity, QuadSpec, QuadratureRule, Sample};
use crate::error::{Error, Result};
use crate::kernels::{Kernel, KernelTable, Provenance, WeightedPoints};
use crate::util::par_map;

const FLOOR: f64 = 1e-12;
/// Below this μ₁ is in the subnormal danger zone and the node is dropped.
pub const TINY: f64 = 1e-250;

#[derive(Clone, Debug)]
pub struct SmoothingProblem {
    pub kernel: Kernel,
    pub provenance: Provenance,
    /// The x-measure.
    pub atoms: WeightedPoints,
    /// F(x) at the atoms: exact cdf (oracle) or mid-ranks (i − ½)/n (empirical).
    pub x_cdf: Vec<f64>,
    pub y_rule: QuadratureRule,
    pub table: KernelTable,
    /// μ₁(y) = f_K(y) (or f̂(y)) at the y nodes.
    pub mu1: Vec<f64>,
    /// μ₂(y) = E K²(X, y) at the y nodes.
    pub mu2: Vec<f64>,
    pub density: Option<OracleDensity>,
    pub n: Option<usize>,
}

impl SmoothingProblem {
    /// Oracle discretization sized for polynomial integrands up to `degree`.
    pub fn oracle(kernel: &Kernel, d: &OracleDensity, degree: usize, spec: &QuadSpec) -> Result<Self> {
        Self::oracle_on(kernel, d, d.reference_domain(degree), degree, spec)
    }

    /// Oracle discretization with the x-measure restricted to `x_domain`.
    pub fn oracle_on(kernel: &Kernel, d: &OracleDensity, x_domain: (f64, f64), degree: usize, spec: &QuadSpec) -> Result<Self> {
        if let Some((klo, khi)) = kernel.domain() {
            let (lo, hi) = d.support();
            let tol = 1e-12 * (khi - klo);
            if lo < klo - tol || hi > khi + tol {
                return Err(Error::Argument(format!(
                    "density support [{lo}, {hi}] not inside kernel domain [{klo}, {khi}]"
                )));
            }
        }
        let (xlo, xhi) = x_domain;
        let scale = d.resolution().min(kernel.resolution());
        let mut breaks = d.breakpoints();
        breaks.extend(kernel.breakpoints());
        let qx = spec.rule(xlo, xhi, scale, degree, &breaks)?;
        let atoms = WeightedPoints::from_density(d, &qx);
        let x_cdf = atoms.points.iter().map(|&x| d.cdf_unchecked(x)).collect();
        let (ylo, yhi) = kernel.y_domain(xlo, xhi, degree);
        let y_rule = kernel.y_rule(spec, ylo, yhi, d.resolution().max(kernel.resolution()), degree)?;
        Ok(Self::assemble(kernel, Provenance::Oracle, atoms, x_cdf, y_rule, Some(d.clone()), None))
    }

    /// Empirical discretization of the KDE of `s`.
    pub fn empirical(kernel: &Kernel, s: &Sample, degree: usize, spec: &QuadSpec) -> Result<Self> {
        if let Some((lo, hi)) = kernel.domain() {
            if s.min() < lo || s.max() > hi {
                return Err(Error::Domain(format!("sample outside kernel domain [{lo}, {hi}]")));
            }
        }
        let n = s.n();
        let mut atoms = WeightedPoints::from_sample(s);
        atoms.points = s.distinct_values();
        if let Some((lo, hi)) = kernel.domain() {
            atoms.points.iter_mut().for_each(|p| *p = p.clamp(lo, hi));
        }
        let ranks = crate::util::average_ranks(s.values());
        let x_cdf = ranks.iter().map(|r| (r - 0.5) / n as f64).collect();
        let (ylo, yhi) = kernel.y_domain(s.min(), s.max(), degree);
        let y_rule = kernel.y_rule(spec, ylo, yhi, f64::INFINITY, degree)?;
        Ok(Self::assemble(kernel, Provenance::Empirical, atoms, x_cdf, y_rule, None, Some(n)))
    }

    fn assemble(
        kernel: &Kernel,
        provenance: Provenance,
        atoms: WeightedPoints,
        x_cdf: Vec<f64>,
        y_rule: QuadratureRule,
        density: Option<OracleDensity>,
        n: Option<usize>,
    ) -> Self {
        let table = KernelTable::build(kernel, &atoms.points, y_rule.nodes());
        let (mu1, mu2) = table.moments(&atoms.weights, y_rule.len());
        Self { kernel: kernel.clone(), provenance, atoms, x_cdf, y_rule, table, mu1, mu2, density, n }
    }

    pub fn y_nodes(&self) -> &[f64] {
        self.y_rule.nodes()
    }

    pub fn y_weights(&self) -> &[f64] {
        self.y_rule.weights()
    }

    pub fn floor(&self) -> f64 {
        FLOOR * self.mu1.iter().cloned().fold(0.0, f64::max)
    }

    /// ∫ μ₂/μ₁ dy − 1, i.e. ν (oracle) or ν̂ (empirical).
    ///
    /// For the KDE, nodes where f̂ falls below 1e-12·max f̂ are an error if
    /// they carry more than 1e-6 of the integral. Oracle moments are sums of
    /// positive terms and stay accurate far into the tails, so only μ₁ = 0 with
    /// μ₂ > 0 is rejected there.
    pub fn nu(&self) -> Result<f64> {
        let floor = match self.provenance {
            Provenance::Empirical => self.floor(),
            Provenance::Oracle => 0.0,
        };
        if self.mu1.iter().zip(&self.mu2).any(|(&m1, &m2)| m1 <= 0.0 && m2 > TINY) {
            return Err(Error::Numerical("smoothed density underflows where the kernel is positive".into()));
        }
        let mut total = 0.0;
        let mut below = 0.0;
        for ((&m1, &m2), &w) in self.mu1.iter().zip(&self.mu2).zip(self.y_weights()) {
            if m1 > TINY {
                let r = w * m2 / m1;
                total += r;
                if m1 < floor {
                    below += r;
                }
            }
        }
        if below > 1e-6 * total {
            return Err(Error::Numerical(format!(
                "density below floor carries {:.3e} of the EDoF integral",
                below / total
            )));
        }
        Ok(total - 1.0)
    }

    /// ∫ μ₁ dy (should be 1).
    pub fn mass(&self) -> f64 {
        self.mu1.iter().zip(self.y_weights()).map(|(m, w)| m * w).sum()
    }

    /// F_K at the y nodes.
    pub fn fk_cdf(&self) -> Vec<f64> {
        let prefix = self.atoms.prefix_weights();
        let total = prefix[prefix.len() - 1];
        par_map(self.y_rule.len(), |j| {
            (self.atoms.smooth_cdf_at(&self.kernel, self.y_nodes()[j], &prefix) / total).clamp(0.0, 1.0)
        })
    }

    /// Oracle density (or zero) at the y nodes.
    pub fn f_at_y(&self) -> Option<Vec<f64>> {
        self.density.as_ref().map(|d| self.y_nodes().iter().map(|&y| d.pdf_unchecked(y)).collect())
    }

    /// μ₁ at an arbitrary point.
    pub fn mu1_at(&self, y: f64) -> f64 {
        self.atoms.smooth_at(&self.kernel, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_gaussian_nu() {
        let d = OracleDensity::standard_normal();
        for h in [0.5, 1.0, 2.0] {
            let p = SmoothingProblem::oracle(&Kernel::gaussian(h).unwrap(), &d, 0, &QuadSpec::default()).unwrap();
            assert!((p.mass() - 1.0).abs() < 1e-9);
            let nu = p.nu().unwrap();
            assert!((nu - 1.0 / (h * h)).abs() < 1e-7, "h={h}: {nu}");
        }
    }

    #[test]
    fn histogram_nu_is_bins_minus_one() {
        let d = OracleDensity::skewed_mixture();
        let (lo, hi) = d.support();
        let k = Kernel::histogram(vec![lo, 0.1, 0.35, 0.41, 0.9, hi]).unwrap();
        let p = SmoothingProblem::oracle(&k, &d, 0, &QuadSpec::default()).unwrap();
        assert!((p.nu().unwrap() - 4.0).abs() < 1e-8);
    }
}
