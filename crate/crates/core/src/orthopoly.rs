//! Orthonormal polynomial sequences via three-term recurrences.

use serde::{Deserialize, Serialize};

use crate::data::{QuadratureRule, Sample};
use crate::error::{Error, Result};

pub const MAX_CLASSICAL_DEGREE: usize = 400;
const BREAKDOWN: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    HermiteNormalized,
    LegendreShifted,
    /// Built from a discrete (sample) measure.
    Discrete,
    /// Built from a continuous weight under a quadrature rule.
    Continuous,
}

/// Orthonormal polynomials P_0..P_D defined by
/// `√β_{k+1} P_{k+1} = (x − α_k) P_k − √β_k P_{k−1}`, `P_0 = 1/√β_0`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecurrenceTable {
    alphas: Vec<f64>,
    betas: Vec<f64>,
    kind: BasisKind,
    /// Degree at which a breakdown truncated the table, if any.
    pub truncated_at: Option<usize>,
    /// Largest |⟨P_j, P_k⟩ − δ_jk| under the construction measure (0 for closed forms).
    pub max_defect: f64,
    /// Same defect with the polynomials evaluated by forward recurrence at the atoms.
    pub recurrence_defect: f64,
    #[serde(skip)]
    atoms: Option<AtomValues>,
}

/// P_k at the atoms of the construction measure, taken from the orthogonalized
/// Lanczos vectors. Forward recurrence loses accuracy at atoms sitting in
/// low-density gaps of the measure; these values do not.
#[derive(Clone, Debug)]
pub struct AtomValues {
    pub points: Vec<f64>,
    /// Row-major, `[i * (D+1) + k]`.
    pub values: Vec<f64>,
    pub degree: usize,
}

impl RecurrenceTable {
    pub fn from_coefficients(alphas: Vec<f64>, betas: Vec<f64>, kind: BasisKind) -> Result<Self> {
        if betas.is_empty() || alphas.len() + 1 < betas.len() {
            return Err(Error::Argument("need alphas for every degree below the top".into()));
        }
        if betas.iter().any(|&b| !(b > 0.0)) {
            return Err(Error::Argument("recurrence betas must be positive".into()));
        }
        Ok(Self { alphas, betas, kind, truncated_at: None, max_defect: 0.0, recurrence_defect: 0.0, atoms: None })
    }

    /// Hermite polynomials orthonormal under N(mean, sigma²).
    pub fn hermite(mean: f64, sigma: f64, degree: usize) -> Result<Self> {
        if degree > MAX_CLASSICAL_DEGREE {
            return Err(Error::DegreeCap { requested: degree, cap: MAX_CLASSICAL_DEGREE });
        }
        if !(sigma > 0.0) {
            return Err(Error::Argument(format!("sigma must be positive, got {sigma}")));
        }
        let betas = (0..=degree).map(|k| if k == 0 { 1.0 } else { k as f64 * sigma * sigma }).collect();
        Self::from_coefficients(vec![mean; degree + 1], betas, BasisKind::HermiteNormalized)
    }

    /// Legendre polynomials orthonormal on [0, 1] with unit weight.
    pub fn shifted_legendre(degree: usize) -> Result<Self> {
        if degree > MAX_CLASSICAL_DEGREE {
            return Err(Error::DegreeCap { requested: degree, cap: MAX_CLASSICAL_DEGREE });
        }
        let betas = (0..=degree)
            .map(|k| {
                let k = k as f64;
                if k == 0.0 {
                    1.0
                } else {
                    k * k / (4.0 * (4.0 * k * k - 1.0))
                }
            })
            .collect();
        Self::from_coefficients(vec![0.5; degree + 1], betas, BasisKind::LegendreShifted)
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn max_degree(&self) -> usize {
        self.betas.len() - 1
    }

    pub fn atom_values(&self) -> Option<&AtomValues> {
        self.atoms.as_ref()
    }

    /// Values table `[i * (D+1) + k]` at `xs`: stored atom values when `xs`
    /// are the construction atoms, forward recurrence otherwise.
    pub fn values_at(&self, xs: &[f64], degree: usize) -> Vec<f64> {
        if let Some(a) = &self.atoms {
            if a.points.len() == xs.len() && degree <= a.degree && a.points.iter().zip(xs).all(|(p, x)| p == x) {
                let d1 = degree + 1;
                let mut out = vec![0.0; xs.len() * d1];
                for i in 0..xs.len() {
                    out[i * d1..(i + 1) * d1].copy_from_slice(&a.values[i * (a.degree + 1)..i * (a.degree + 1) + d1]);
                }
                return out;
            }
        }
        self.table(xs, degree)
    }

    /// P_0(x), …, P_D(x) into `out` (length D + 1).
    #[inline]
    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        let d = out.len() - 1;
        debug_assert!(d <= self.max_degree());
        let mut prev = 0.0;
        let mut cur = 1.0 / self.betas[0].sqrt();
        out[0] = cur;
        let mut sb = 0.0;
        for k in 0..d {
            let sb1 = self.betas[k + 1].sqrt();
            let next = ((x - self.alphas[k]) * cur - sb * prev) / sb1;
            prev = cur;
            cur = next;
            sb = sb1;
            out[k + 1] = cur;
        }
    }

    pub fn eval_all(&self, x: f64, degree: usize) -> Vec<f64> {
        let mut out = vec![0.0; degree.min(self.max_degree()) + 1];
        self.eval_into(x, &mut out);
        out
    }

    pub fn eval(&self, k: usize, x: f64) -> Result<f64> {
        if k > self.max_degree() {
            return Err(Error::DegreeCap { requested: k, cap: self.max_degree() });
        }
        Ok(self.eval_all(x, k)[k])
    }

    /// Values table `[i * (D+1) + k] = P_k(x_i)`.
    pub fn table(&self, xs: &[f64], degree: usize) -> Vec<f64> {
        let d1 = degree + 1;
        let mut out = vec![0.0; xs.len() * d1];
        for (i, &x) in xs.iter().enumerate() {
            self.eval_into(x, &mut out[i * d1..(i + 1) * d1]);
        }
        out
    }

    /// Gram matrix defect |⟨P_j, P_k⟩ − δ_jk| under the measure (points, weights).
    pub fn defect_matrix(&self, points: &[f64], weights: &[f64], degree: usize) -> Vec<Vec<f64>> {
        let d1 = degree + 1;
        let t = self.values_at(points, degree);
        let mut g = vec![vec![0.0; d1]; d1];
        for (i, &w) in weights.iter().enumerate() {
            let row = &t[i * d1..(i + 1) * d1];
            for j in 0..d1 {
                let wj = w * row[j];
                for k in 0..=j {
                    g[j][k] += wj * row[k];
                }
            }
        }
        for j in 0..d1 {
            for k in 0..=j {
                let v = (g[j][k] - if j == k { 1.0 } else { 0.0 }).abs();
                g[j][k] = v;
                g[k][j] = v;
            }
        }
        g
    }

    /// Table restricted to degrees ≤ `degree`.
    pub fn truncate(&self, degree: usize) -> Self {
        let d = degree.min(self.max_degree());
        let mut t = self.clone();
        t.betas.truncate(d + 1);
        t.alphas.truncate((d + 1).max(1));
        if let Some(a) = &self.atoms {
            let old = a.degree + 1;
            let values = (0..a.points.len()).flat_map(|i| a.values[i * old..i * old + d + 1].to_vec()).collect();
            t.atoms = Some(AtomValues { points: a.points.clone(), values, degree: d });
        }
        t
    }
}

/// Lanczos (discretized Stieltjes) recurrence for Σ w_i δ(x − x_i) with full
/// reorthogonalization of each new vector against all previous ones.
/// Returns the coefficients and the breakdown degree, if any.
fn stieltjes(points: &[f64], weights: &[f64], degree: usize) -> (Vec<f64>, Vec<f64>, Option<usize>, Vec<Vec<f64>>) {
    let n = points.len();
    let beta0: f64 = weights.iter().sum();
    let mut alphas = Vec::with_capacity(degree + 1);
    let mut betas = vec![beta0];
    let mut basis: Vec<Vec<f64>> = vec![vec![1.0 / beta0.sqrt(); n]];
    let mut truncated = None;
    let dot = |a: &[f64], b: &[f64]| -> f64 { (0..n).map(|i| weights[i] * a[i] * b[i]).sum() };
    for k in 0..=degree {
        let cur = &basis[k];
        let a: f64 = (0..n).map(|i| weights[i] * points[i] * cur[i] * cur[i]).sum();
        if k == degree {
            alphas.push(a);
            break;
        }
        let sb = if k == 0 { 0.0 } else { betas[k].sqrt() };
        let mut next: Vec<f64> = (0..n)
            .map(|i| (points[i] - a) * cur[i] - if k == 0 { 0.0 } else { sb * basis[k - 1][i] })
            .collect();
        let mut shift = 0.0;
        for _pass in 0..2 {
            for (j, v) in basis.iter().enumerate() {
                let c = dot(&next, v);
                if j == k {
                    shift += c;
                }
                for i in 0..n {
                    next[i] -= c * v[i];
                }
            }
        }
        alphas.push(a + shift);
        let b = dot(&next, &next);
        if !(b > BREAKDOWN * beta0) {
            truncated = Some(k);
            break;
        }
        betas.push(b);
        let sb1 = b.sqrt();
        next.iter_mut().for_each(|v| *v /= sb1);
        basis.push(next);
    }
    (alphas, betas, truncated, basis)
}

/// Orthonormal polynomials for the empirical measure (1/n) Σ δ(x − x_i).
pub fn build_recurrence_discrete(s: &Sample, max_degree: usize) -> Result<RecurrenceTable> {
    let cap = s.n() / 2;
    if max_degree > cap {
        return Err(Error::DegreeCap { requested: max_degree, cap });
    }
    let points = s.distinct_values();
    let weights = vec![1.0 / s.n() as f64; s.n()];
    build_from_measure(&points, &weights, max_degree, BasisKind::Discrete, 1e-8)
}

/// Orthonormal polynomials for the weight `w(x)` sampled at the nodes of `q`.
pub fn build_recurrence_continuous(weight_at_nodes: &[f64], q: &QuadratureRule, max_degree: usize) -> Result<RecurrenceTable> {
    if weight_at_nodes.len() != q.len() {
        return Err(Error::Argument("weight values must match quadrature nodes".into()));
    }
    let (points, weights): (Vec<f64>, Vec<f64>) = q
        .nodes()
        .iter()
        .zip(q.weights())
        .zip(weight_at_nodes)
        .filter(|(_, &f)| f > 0.0)
        .map(|((&x, &w), &f)| (x, w * f))
        .unzip();
    build_from_measure(&points, &weights, max_degree, BasisKind::Continuous, 1e-6)
}

fn build_from_measure(points: &[f64], weights: &[f64], max_degree: usize, kind: BasisKind, tol: f64) -> Result<RecurrenceTable> {
    if points.len() < 2 {
        return Err(Error::Argument("measure needs at least two atoms".into()));
    }
    let (alphas, betas, truncated_at, basis) = stieltjes(points, weights, max_degree);
    let d = betas.len() - 1;
    let n = points.len();
    let mut values = vec![0.0; n * (d + 1)];
    for (k, v) in basis.iter().enumerate().take(d + 1) {
        for i in 0..n {
            values[i * (d + 1) + k] = v[i];
        }
    }
    let mut table = RecurrenceTable {
        alphas,
        betas,
        kind,
        truncated_at,
        max_defect: 0.0,
        recurrence_defect: 0.0,
        atoms: Some(AtomValues { points: points.to_vec(), values, degree: d }),
    };
    table.max_defect = gram_defect(&table.values_at(points, d), weights, d);
    if table.max_defect > tol {
        return Err(Error::Instability { degree: d, defect: table.max_defect });
    }
    table.recurrence_defect = gram_defect(&table.table(points, d), weights, d);
    Ok(table)
}

fn gram_defect(values: &[f64], weights: &[f64], degree: usize) -> f64 {
    let d1 = degree + 1;
    let mut g = vec![0.0; d1 * d1];
    for (i, &w) in weights.iter().enumerate() {
        let row = &values[i * d1..(i + 1) * d1];
        for j in 0..d1 {
            let wj = w * row[j];
            for k in 0..=j {
                g[j * d1 + k] += wj * row[k];
            }
        }
    }
    let mut worst = 0.0f64;
    for j in 0..d1 {
        for k in 0..=j {
            worst = worst.max((g[j * d1 + k] - if j == k { 1.0 } else { 0.0 }).abs());
        }
    }
    worst
}

/// Build from a measure given as (points, weights) directly.
pub fn build_recurrence_weighted(points: &[f64], weights: &[f64], max_degree: usize) -> Result<RecurrenceTable> {
    build_from_measure(points, weights, max_degree, BasisKind::Continuous, 1e-6)
}

/// Hn_k(x, σ): Hermite polynomial orthonormal under N(0, σ²).
pub fn hermite_normalized(k: usize, x: f64, sigma: f64) -> Result<f64> {
    RecurrenceTable::hermite(0.0, sigma, k)?.eval(k, x)
}

/// L_k(z): Legendre polynomial orthonormal on [0, 1].
pub fn legendre_shifted(k: usize, z: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::Domain(format!("shifted Legendre argument {z} outside [0, 1]")));
    }
    RecurrenceTable::shifted_legendre(k)?.eval(k, z)
}

/// c_j = (1/n) Σ P_j(x_i), j = 0..=degree.
pub fn expansion_coefficients(basis: &RecurrenceTable, s: &Sample, degree: usize) -> Vec<f64> {
    let d = degree.min(basis.max_degree());
    let mut c = vec![0.0; d + 1];
    let mut buf = vec![0.0; d + 1];
    for &x in s.values() {
        basis.eval_into(x, &mut buf);
        for (cj, b) in c.iter_mut().zip(&buf) {
            *cj += b;
        }
    }
    let n = s.n() as f64;
    c.iter_mut().for_each(|v| *v /= n);
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{OracleDensity, RngStream};
    use crate::util::normal_pdf;

    fn raw_hermite(k: usize, z: f64) -> f64 {
        match k {
            0 => 1.0,
            1 => 2.0 * z,
            2 => 4.0 * z * z - 2.0,
            3 => 8.0 * z.powi(3) - 12.0 * z,
            4 => 16.0 * z.powi(4) - 48.0 * z * z + 12.0,
            5 => 32.0 * z.powi(5) - 160.0 * z.powi(3) + 120.0 * z,
            _ => unreachable!(),
        }
    }

    #[test]
    fn hermite_matches_explicit_low_degrees() {
        let fact = [1.0, 1.0, 2.0, 6.0, 24.0, 120.0];
        for sigma in [0.5, 1.0, 2.3] {
            for k in 0..=5 {
                for x in [-1.7, 0.0, 0.4, 3.1] {
                    let z = x / (std::f64::consts::SQRT_2 * sigma);
                    let want = raw_hermite(k, z) / (2f64.powf(k as f64 / 2.0) * f64::sqrt(fact[k]));
                    let got = hermite_normalized(k, x, sigma).unwrap();
                    assert!((got - want).abs() < 1e-12 * (1.0 + want.abs()), "k={k} x={x}");
                }
            }
        }
        assert_eq!(hermite_normalized(1, 0.7, 1.0).unwrap(), 0.7);
        assert!(hermite_normalized(401, 0.0, 1.0).is_err());
    }

    #[test]
    fn hermite_orthonormal_under_quadrature() {
        let q = QuadratureRule::composite_gauss_legendre(-40.0, 40.0, 200, 10).unwrap();
        let v = q.integrate(|x| hermite_normalized(5, x, 2.0).unwrap().powi(2) * normal_pdf(x, 0.0, 2.0));
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn legendre_values() {
        assert_eq!(legendre_shifted(0, 0.3).unwrap(), 1.0);
        for z in [0.0, 0.25, 0.9] {
            assert!((legendre_shifted(1, z).unwrap() - 3f64.sqrt() * (2.0 * z - 1.0)).abs() < 1e-14);
        }
        let q = QuadratureRule::new(0.0, 1.0, 10, crate::data::Scheme::GaussLegendre).unwrap();
        assert!(q.integrate(|z| legendre_shifted(3, z).unwrap() * legendre_shifted(4, z).unwrap()).abs() < 1e-12);
        assert!(legendre_shifted(2, 1.2).is_err());
    }

    #[test]
    fn two_point_measure() {
        let s = Sample::new(vec![-1.0, 1.0]).unwrap();
        let t = build_recurrence_discrete(&s, 1).unwrap();
        assert!(t.alphas()[0].abs() < 1e-15);
        assert!((t.betas()[1] - 1.0).abs() < 1e-15);
        assert!((t.eval(1, 0.3).unwrap() - 0.3).abs() < 1e-15);
        assert!(build_recurrence_discrete(&s, 2).is_err());
    }

    #[test]
    fn discrete_high_degree_is_orthonormal() {
        let d = OracleDensity::bimodal_mixture();
        let s = d.sample_from(2000, &RngStream::new(11, 0)).unwrap();
        let t = build_recurrence_discrete(&s, 150).unwrap();
        assert_eq!(t.max_degree(), 150);
        assert!(t.max_defect < 1e-8, "defect {}", t.max_defect);
        let c = expansion_coefficients(&t, &s, 3);
        assert!((c[0] - 1.0).abs() < 1e-12 && c[1].abs() < 1e-12);
    }

    #[test]
    fn continuous_recovers_classical() {
        let tau = 1.3;
        let q = QuadratureRule::composite_gauss_legendre(-30.0, 30.0, 200, 8).unwrap();
        let w: Vec<f64> = q.nodes().iter().map(|&x| normal_pdf(x, 0.0, tau)).collect();
        let t = build_recurrence_continuous(&w, &q, 30).unwrap();
        for k in 1..=30 {
            assert!(t.alphas()[k - 1].abs() < 1e-9);
            assert!((t.betas()[k] / (k as f64 * tau * tau) - 1.0).abs() < 1e-9);
        }
        let u = QuadratureRule::new(0.0, 1.0, 24, crate::data::Scheme::GaussLegendre).unwrap();
        let t = build_recurrence_continuous(&vec![1.0; u.len()], &u, 20).unwrap();
        let l = RecurrenceTable::shifted_legendre(20).unwrap();
        for k in 1..=20 {
            assert!((t.betas()[k] - l.betas()[k]).abs() < 1e-12);
            assert!((t.alphas()[k - 1] - 0.5).abs() < 1e-12);
        }
    }
}
