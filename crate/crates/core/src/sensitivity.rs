//! Kernel sensitivity matrices s_jk = ∫∫ K(x,y) Q_j(y) P_k(x) f(x) dy dx.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Provenance;
use crate::orthopoly::{build_recurrence_discrete, build_recurrence_weighted, RecurrenceTable};
use crate::smoothing::SmoothingProblem;
use crate::util::par_map;

/// Which polynomial families sit on the y and x sides.
///
/// `Q`/`P` are orthonormal under f_K and f; `L` is the shifted Legendre basis
/// composed with the corresponding cdf (F_K on the y side, F on the x side).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    QP,
    LQ,
    QL,
    LL,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::QP, Variant::LQ, Variant::QL, Variant::LL];
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "QP" => Ok(Self::QP),
            "LQ" => Ok(Self::LQ),
            "QL" => Ok(Self::QL),
            "LL" => Ok(Self::LL),
            _ => Err(Error::Argument(format!("unknown sensitivity variant {s:?}"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

/// A basis choice for one side of the matrix.
#[derive(Clone, Debug)]
pub enum Basis {
    /// Orthonormal under the side's own measure (f or f̂ for x, f_K or f̂ for y).
    Ops,
    /// Shifted Legendre of the side's cdf.
    LegendreCdf,
    /// An explicit recurrence, e.g. normalized Hermite.
    Table(RecurrenceTable),
}

impl Basis {
    fn for_variant(v: Variant) -> (Basis, Basis) {
        match v {
            Variant::QP => (Basis::Ops, Basis::Ops),
            Variant::LQ => (Basis::LegendreCdf, Basis::Ops),
            Variant::QL => (Basis::Ops, Basis::LegendreCdf),
            Variant::LL => (Basis::LegendreCdf, Basis::LegendreCdf),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SensitivityMatrix {
    /// Row-major (D+1)×(D+1), rows indexed by the y-basis degree j.
    entries: Vec<f64>,
    degree: usize,
    pub variant: Variant,
    pub provenance: Provenance,
    /// max over k of |s_0k − δ_0k| and |s_k0 − δ_k0|.
    pub first_row_defect: f64,
    /// Degree requested before basis caps applied.
    pub requested_degree: usize,
}

impl SensitivityMatrix {
    pub fn degree(&self) -> usize {
        self.degree
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.entries[j * (self.degree + 1) + k]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Rows 0..=D as vectors.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.degree + 1).map(|r| r.to_vec()).collect()
    }

    /// ν_D' = Σ_{j,k=1..D'} s_jk².
    pub fn nu_partial(&self, d: usize) -> f64 {
        let d = d.min(self.degree);
        (1..=d).map(|j| (1..=d).map(|k| self.get(j, k).powi(2)).sum::<f64>()).sum()
    }

    /// diag(S̃ S̃ᵀ)_j = Σ_{k=1..D} s_jk², j = 1..D.
    pub fn diagonal_profile(&self) -> Vec<f64> {
        (1..=self.degree).map(|j| (1..=self.degree).map(|k| self.get(j, k).powi(2)).sum()).collect()
    }

    /// (S̃ S̃ᵀ)_{jl} for j, l = 1..D.
    pub fn gram(&self) -> Vec<Vec<f64>> {
        let d = self.degree;
        (1..=d)
            .map(|j| (1..=d).map(|l| (1..=d).map(|k| self.get(j, k) * self.get(l, k)).sum()).collect())
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TraceEdof {
    pub nu: f64,
    pub degree: usize,
    /// Last diagonal of S̃ S̃ᵀ, the size of the next term in the series.
    pub tail: f64,
}

/// ν_D = tr(S̃ S̃ᵀ) with the last-diagonal tail indicator.
pub fn edof_from_trace(s: &SensitivityMatrix) -> TraceEdof {
    let diag = s.diagonal_profile();
    TraceEdof { nu: diag.iter().sum(), degree: s.degree, tail: diag.last().copied().unwrap_or(0.0) }
}

pub fn diagonal_profile(s: &SensitivityMatrix) -> Vec<f64> {
    s.diagonal_profile()
}

/// Per-side basis values: `[i * (D+1) + k]`, with the usable degree.
struct SideValues {
    values: Vec<f64>,
    degree: usize,
}

fn legendre_values(z: &[f64], degree: usize) -> Result<SideValues> {
    let t = RecurrenceTable::shifted_legendre(degree)?;
    let zc: Vec<f64> = z.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Ok(SideValues { values: t.table(&zc, degree), degree })
}

fn x_values(p: &SmoothingProblem, basis: &Basis, degree: usize) -> Result<SideValues> {
    let pts = &p.atoms.points;
    match basis {
        Basis::LegendreCdf => match p.provenance {
            Provenance::Oracle => legendre_values(&p.x_cdf, degree),
            Provenance::Empirical => {
                // discrete analogue of L_k(F(x)): polynomials in the mid-rank
                // z_i = (i − ½)/n orthonormal under the empirical measure
                let n = p.atoms.len();
                let t = build_recurrence_weighted(&p.x_cdf, &p.atoms.weights, degree.min(n / 2))?;
                let d = degree.min(t.max_degree());
                Ok(SideValues { values: t.values_at(&p.x_cdf, d), degree: d })
            }
        },
        Basis::Table(t) => {
            let d = degree.min(t.max_degree());
            Ok(SideValues { values: t.values_at(pts, d), degree: d })
        }
        Basis::Ops => {
            let t = match p.provenance {
                Provenance::Empirical => {
                    let n = p.n.unwrap_or(pts.len());
                    let s = crate::data::Sample::new(pts.clone())?;
                    build_recurrence_discrete(&s, degree.min(n / 2))?
                }
                Provenance::Oracle => build_recurrence_weighted(pts, &p.atoms.weights, degree)?,
            };
            let d = degree.min(t.max_degree());
            Ok(SideValues { values: t.values_at(pts, d), degree: d })
        }
    }
}

fn y_values(p: &SmoothingProblem, basis: &Basis, degree: usize) -> Result<SideValues> {
    let ys = p.y_nodes();
    match basis {
        Basis::LegendreCdf => legendre_values(&p.fk_cdf(), degree),
        Basis::Table(t) => {
            let d = degree.min(t.max_degree());
            Ok(SideValues { values: t.values_at(ys, d), degree: d })
        }
        Basis::Ops => {
            // Q_j is only needed where f_K > 0; elsewhere every K(x, y) vanishes.
            let idx: Vec<usize> = (0..ys.len()).filter(|&j| p.mu1[j] > 0.0).collect();
            let pts: Vec<f64> = idx.iter().map(|&j| ys[j]).collect();
            let w: Vec<f64> = idx.iter().map(|&j| p.y_weights()[j] * p.mu1[j]).collect();
            let t = build_recurrence_weighted(&pts, &w, degree)?;
            let d = degree.min(t.max_degree());
            let sub = t.values_at(&pts, d);
            let mut values = vec![0.0; ys.len() * (d + 1)];
            for (r, &j) in idx.iter().enumerate() {
                values[j * (d + 1)..(j + 1) * (d + 1)].copy_from_slice(&sub[r * (d + 1)..(r + 1) * (d + 1)]);
            }
            Ok(SideValues { values, degree: d })
        }
    }
}

/// y-side basis values at the y nodes, row-major `[node * (D+1) + j]`, with the usable D.
pub(crate) fn y_side_values(p: &SmoothingProblem, basis: &Basis, degree: usize) -> Result<(Vec<f64>, usize)> {
    let v = y_values(p, basis, degree)?;
    Ok((v.values, v.degree))
}

/// Assemble the sensitivity matrix with explicit bases on each side.
/// `variant` only tags the result.
pub fn build_sensitivity(
    p: &SmoothingProblem,
    y_basis: &Basis,
    x_basis: &Basis,
    variant: Variant,
    degree: usize,
) -> Result<SensitivityMatrix> {
    let yv = y_values(p, y_basis, degree)?;
    let xv = x_values(p, x_basis, degree)?;
    let d = yv.degree.min(xv.degree);
    let (dy1, dx1, d1) = (yv.degree + 1, xv.degree + 1, d + 1);
    let wy = p.y_weights();

    // inner y-integral per atom, then the weighted outer product with P_k(x)
    let chunk = 256;
    let nchunks = p.atoms.len().div_ceil(chunk);
    let partial: Vec<Vec<f64>> = par_map(nchunks, |c| {
        let mut acc = vec![0.0; d1 * d1];
        let mut g = vec![0.0; d1];
        for i in c * chunk..((c + 1) * chunk).min(p.atoms.len()) {
            g.iter_mut().for_each(|v| *v = 0.0);
            let (start, row) = p.table.row(i);
            for (off, &kv) in row.iter().enumerate() {
                let j = start + off;
                let f = wy[j] * kv;
                let q = &yv.values[j * dy1..j * dy1 + d1];
                for (gj, qj) in g.iter_mut().zip(q) {
                    *gj += f * qj;
                }
            }
            let w = p.atoms.weights[i];
            let px = &xv.values[i * dx1..i * dx1 + d1];
            for j in 0..d1 {
                let gj = w * g[j];
                let r = &mut acc[j * d1..(j + 1) * d1];
                for (rk, pk) in r.iter_mut().zip(px) {
                    *rk += gj * pk;
                }
            }
        }
        acc
    });
    let mut entries = vec![0.0; d1 * d1];
    for part in partial {
        for (e, v) in entries.iter_mut().zip(part) {
            *e += v;
        }
    }
    let mut defect = 0.0f64;
    for k in 0..d1 {
        let delta = if k == 0 { 1.0 } else { 0.0 };
        defect = defect.max((entries[k] - delta).abs()).max((entries[k * d1] - delta).abs());
    }
    if defect > 1e-4 {
        return Err(Error::Numerical(format!(
            "sensitivity variant {variant} at D={d}: first row/column deviates from e0 by {defect:.3e}"
        )));
    }
    Ok(SensitivityMatrix {
        entries,
        degree: d,
        variant,
        provenance: p.provenance,
        first_row_defect: defect,
        requested_degree: degree,
    })
}

/// Sensitivity matrix of one of the four standard variants.
pub fn build_variant(p: &SmoothingProblem, variant: Variant, degree: usize) -> Result<SensitivityMatrix> {
    let (yb, xb) = Basis::for_variant(variant);
    build_sensitivity(p, &yb, &xb, variant, degree)
}
