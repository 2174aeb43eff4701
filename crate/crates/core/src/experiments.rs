//! Desk-scale replication harness. Each study returns typed results and can
//! render them as CSV files plus a JSON manifest.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::amkld::amkld_rule_ratio;
use crate::bandwidth::{
    aic_curve, calibrate_penalty, cv_rules, default_grid, mise_optimal_bandwidth, reference_rules,
};
use crate::data::io::{faithful_waiting, CsvTable};
use crate::data::{Grid, OracleDensity, QuadSpec, RngStream, Sample};
use crate::edof::{nu_competitors, nu_hat_plugin, nu_oracle_direct};
use crate::error::{Error, Result};
use crate::kernels::{kde_eval, Kernel, KernelFamily};
use crate::orthopoly::RecurrenceTable;
use crate::sensitivity::{build_variant, Variant};
use crate::smoothing::SmoothingProblem;
use crate::util::{mean_sd, par_map, pearson, quantile_sorted, spearman, std_normal_pdf, std_normal_quantile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Table1,
}

impl std::str::FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fig1" => Ok(Self::Fig1),
            "fig2" => Ok(Self::Fig2),
            "fig3" => Ok(Self::Fig3),
            "fig4" => Ok(Self::Fig4),
            "table1" => Ok(Self::Table1),
            _ => Err(Error::Argument(format!("unknown experiment {s:?}"))),
        }
    }
}

impl std::fmt::Display for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        f.write_str(&s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Desk,
    Paper,
}

impl std::str::FromStr for Scale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Self::Desk),
            "paper" => Ok(Self::Paper),
            _ => Err(Error::Argument(format!("scale must be desk or paper, got {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub experiment: Experiment,
    pub seed: u64,
    pub scale: Scale,
    /// Overrides the replicate count of the main Monte Carlo loop.
    pub replicates: Option<usize>,
    /// Overrides the sample-size grid (fig2, fig4).
    pub n_values: Option<Vec<usize>>,
    #[serde(skip)]
    pub quad: QuadSpec,
}

impl ExperimentSpec {
    pub fn new(experiment: Experiment, seed: u64) -> Self {
        Self { experiment, seed, scale: Scale::Desk, replicates: None, n_values: None, quad: QuadSpec::default() }
    }

    fn stream(&self, id: u64) -> RngStream {
        RngStream::new(self.seed, id)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == Some(0) {
            return Err(Error::Argument("replicate count must be at least 1".into()));
        }
        if let Some(ns) = &self.n_values {
            if ns.is_empty() || ns.iter().any(|&n| n < 2) {
                return Err(Error::Argument("sample sizes must be at least 2".into()));
            }
        }
        Ok(())
    }
}

/// CSV files plus a manifest describing them.
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub files: Vec<(String, CsvTable)>,
    pub manifest: serde_json::Value,
}

impl ExperimentOutput {
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, t) in &self.files {
            t.write(&dir.join(name))?;
        }
        let mut m = serde_json::to_string_pretty(&self.manifest).map_err(|e| Error::Argument(e.to_string()))?;
        m.push('\n');
        std::fs::write(dir.join("manifest.json"), m)?;
        Ok(())
    }

    pub fn file(&self, name: &str) -> Option<&CsvTable> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }
}

fn manifest(spec: &ExperimentSpec, files: serde_json::Value, summary: serde_json::Value) -> serde_json::Value {
    json!({
        "schema": 1,
        "experiment": spec.experiment,
        "seed": spec.seed,
        "scale": spec.scale,
        "files": files,
        "summary": summary,
    })
}

/// A named study density with the kernel family used on it.
#[derive(Clone, Debug)]
pub struct Study {
    pub name: &'static str,
    pub density: OracleDensity,
    pub family: KernelFamily,
}

pub fn mixture_studies() -> Vec<Study> {
    vec![
        Study { name: "normal-exponential", density: OracleDensity::skewed_mixture(), family: KernelFamily::Diffusion },
        Study { name: "normal-normal", density: OracleDensity::bimodal_mixture(), family: KernelFamily::Diffusion },
    ]
}

pub fn normal_study() -> Study {
    Study { name: "normal", density: OracleDensity::standard_normal(), family: KernelFamily::Gaussian }
}

impl Study {
    pub fn kernel(&self, h: f64) -> Result<Kernel> {
        Kernel::with_family(self.family, h, self.density.support())
    }
}

// ---------------------------------------------------------------- fig 1

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EdofCurve {
    pub study: String,
    pub n: usize,
    pub h_mise: f64,
    pub h: Vec<f64>,
    pub nu: Vec<f64>,
    pub nu_hat: Vec<f64>,
    pub nu3_hat: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiagonalSeries {
    pub study: String,
    pub h: f64,
    pub max_degree: usize,
    /// Degree actually reached (OPS construction may stop early).
    pub degree: usize,
    pub diagonal: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Fig1 {
    pub curves: Vec<EdofCurve>,
    pub diagonals: Vec<DiagonalSeries>,
}

pub const FIG1_N: usize = 2000;
pub const FIG1_POINTS: usize = 20;
/// (h, max degree) for the sensitivity-diagonal panels, per mixture.
pub const FIG1_DIAGONAL: [(f64, usize); 2] = [(0.8, 50), (0.048, 150)];

pub fn run_fig1(spec: &ExperimentSpec) -> Result<Fig1> {
    spec.validate()?;
    let mut curves = Vec::new();
    let mut diagonals = Vec::new();
    for (idx, (st, &(hd, dmax))) in mixture_studies().iter().zip(FIG1_DIAGONAL.iter()).enumerate() {
        let s = st.density.sample_from(FIG1_N, &spec.stream(100 + idx as u64))?;
        let h_mise = mise_optimal_bandwidth(&st.density, st.family, FIG1_N, &spec.quad)?;
        let grid = Grid::logspace(h_mise / 4.0, h_mise * 4.0, FIG1_POINTS)?;
        let rows: Vec<Result<(f64, f64, f64)>> = par_map(grid.len(), |i| {
            let k = st.kernel(grid.nodes()[i])?;
            let nu = nu_oracle_direct(&k, &st.density, &spec.quad)?;
            let nu_hat = nu_hat_plugin(&k, &s, &spec.quad)?;
            let c = nu_competitors(&k, &s, &spec.quad)?;
            Ok((nu, nu_hat, c.nu3))
        });
        let mut curve = EdofCurve {
            study: st.name.into(),
            n: FIG1_N,
            h_mise,
            h: grid.nodes().to_vec(),
            nu: vec![],
            nu_hat: vec![],
            nu3_hat: vec![],
        };
        for r in rows {
            let (a, b, c) = r?;
            curve.nu.push(a);
            curve.nu_hat.push(b);
            curve.nu3_hat.push(c);
        }
        curves.push(curve);

        let p = SmoothingProblem::empirical(&st.kernel(hd)?, &s, dmax, &spec.quad)?;
        let m = build_variant(&p, Variant::QP, dmax)?;
        diagonals.push(DiagonalSeries {
            study: st.name.into(),
            h: hd,
            max_degree: dmax,
            degree: m.degree(),
            diagonal: m.diagonal_profile(),
        });
    }
    Ok(Fig1 { curves, diagonals })
}

/// Residual sd of the least-squares line y ≈ a + b x, relative to sd(y).
pub fn affine_residual(x: &[f64], y: &[f64]) -> f64 {
    let r = pearson(x, y);
    (1.0 - r * r).max(0.0).sqrt()
}

impl Fig1 {
    pub fn output(&self, spec: &ExperimentSpec) -> ExperimentOutput {
        let mut upper = CsvTable::new(&["study", "h", "nu", "nu_hat", "nu3_hat"]);
        for c in &self.curves {
            for i in 0..c.h.len() {
                upper.push_labeled(&c.study, &[c.h[i], c.nu[i], c.nu_hat[i], c.nu3_hat[i]]);
            }
        }
        let mut lower = CsvTable::new(&["study", "h", "dimension", "diagonal"]);
        for d in &self.diagonals {
            for (j, v) in d.diagonal.iter().enumerate() {
                lower.push_labeled(&d.study, &[d.h, (j + 1) as f64, *v]);
            }
        }
        let summary = json!({
            "n": FIG1_N,
            "h_mise": self.curves.iter().map(|c| json!({"study": c.study, "h": c.h_mise})).collect::<Vec<_>>(),
            "nu3_affine_residual": self.curves.iter()
                .map(|c| json!({"study": c.study, "value": affine_residual(&c.nu_hat, &c.nu3_hat)})).collect::<Vec<_>>(),
            "degree_reached": self.diagonals.iter()
                .map(|d| json!({"study": d.study, "max": d.max_degree, "reached": d.degree})).collect::<Vec<_>>(),
        });
        let files = json!([
            {"name": "fig1_edof.csv", "x": "h", "y": ["nu", "nu_hat", "nu3_hat"], "xscale": "log", "yscale": "log",
             "description": "oracle and empirical EDoF against bandwidth, one sample per study"},
            {"name": "fig1_diagonal.csv", "x": "dimension", "y": ["diagonal"], "yscale": "log",
             "description": "diagonal of S S^T for the empirical sensitivity matrix"},
        ]);
        ExperimentOutput {
            files: vec![("fig1_edof.csv".into(), upper), ("fig1_diagonal.csv".into(), lower)],
            manifest: manifest(spec, files, summary),
        }
    }
}

// ---------------------------------------------------------------- fig 2

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BiasVariancePoint {
    pub study: String,
    pub n: usize,
    pub h: f64,
    pub nu: f64,
    pub mean_nu_hat: f64,
    pub bias: f64,
    /// Standard error of mean(ν̂).
    pub se: f64,
    pub variance: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PenaltyPoint {
    pub study: String,
    pub n: usize,
    pub h_star: f64,
    pub p: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Fig2 {
    pub replicates: usize,
    pub calibration_replicates: usize,
    pub bias_variance: Vec<BiasVariancePoint>,
    pub penalties: Vec<PenaltyPoint>,
}

pub const FIG2_DESK_N: [usize; 5] = [200, 500, 1000, 2000, 5000];
pub const FIG2_PAPER_N: [usize; 6] = [200, 500, 1000, 2000, 5000, 10000];

pub fn run_fig2(spec: &ExperimentSpec) -> Result<Fig2> {
    spec.validate()?;
    let ns = spec.n_values.clone().unwrap_or_else(|| match spec.scale {
        Scale::Desk => FIG2_DESK_N.to_vec(),
        Scale::Paper => FIG2_PAPER_N.to_vec(),
    });
    let reps = spec.replicates.unwrap_or(match spec.scale {
        Scale::Desk => 200,
        Scale::Paper => 1000,
    });
    let cal_reps = match spec.scale {
        Scale::Desk => 50,
        Scale::Paper => 200,
    };
    let mut bias_variance = Vec::new();
    for (si, st) in mixture_studies().iter().enumerate() {
        for (ni, &n) in ns.iter().enumerate() {
            let h = mise_optimal_bandwidth(&st.density, st.family, n, &spec.quad)?;
            let k = st.kernel(h)?;
            let nu = nu_oracle_direct(&k, &st.density, &spec.quad)?;
            let stream = spec.stream(200 + 10 * si as u64 + ni as u64);
            let draws: Vec<Result<f64>> = par_map(reps, |r| {
                let s = st.density.sample_from(n, &stream.child(r as u64))?;
                nu_hat_plugin(&k, &s, &spec.quad)
            });
            let draws = draws.into_iter().collect::<Result<Vec<f64>>>()?;
            let (m, sd) = mean_sd(&draws);
            bias_variance.push(BiasVariancePoint {
                study: st.name.into(),
                n,
                h,
                nu,
                mean_nu_hat: m,
                bias: m - nu,
                se: sd / (reps as f64).sqrt(),
                variance: sd * sd,
            });
        }
    }
    let mut penalties = Vec::new();
    let mut studies = mixture_studies();
    studies.push(normal_study());
    for (si, st) in studies.iter().enumerate() {
        for (ni, &n) in ns.iter().enumerate() {
            let stream = spec.stream(300 + 10 * si as u64 + ni as u64);
            let c = calibrate_penalty(&st.density, st.family, n, cal_reps, &stream, &spec.quad)?;
            penalties.push(PenaltyPoint { study: st.name.into(), n, h_star: c.h_star, p: c.p });
        }
    }
    Ok(Fig2 { replicates: reps, calibration_replicates: cal_reps, bias_variance, penalties })
}

impl Fig2 {
    /// Spearman ρ of (n, bias²) and (n, variance) for one study.
    pub fn trends(&self, study: &str) -> (f64, f64) {
        let pts: Vec<&BiasVariancePoint> = self.bias_variance.iter().filter(|p| p.study == study).collect();
        let n: Vec<f64> = pts.iter().map(|p| p.n as f64).collect();
        let b2: Vec<f64> = pts.iter().map(|p| p.bias * p.bias).collect();
        let v: Vec<f64> = pts.iter().map(|p| p.variance).collect();
        (spearman(&n, &b2), spearman(&n, &v))
    }

    pub fn output(&self, spec: &ExperimentSpec) -> ExperimentOutput {
        let mut bv = CsvTable::new(&["study", "n", "h", "nu", "mean_nu_hat", "bias", "se", "bias2", "variance"]);
        for p in &self.bias_variance {
            bv.push_labeled(&p.study, &[p.n as f64, p.h, p.nu, p.mean_nu_hat, p.bias, p.se, p.bias * p.bias, p.variance]);
        }
        let mut pen = CsvTable::new(&["study", "n", "h_star", "p"]);
        for p in &self.penalties {
            pen.push_labeled(&p.study, &[p.n as f64, p.h_star, p.p]);
        }
        let trends: Vec<_> = mixture_studies()
            .iter()
            .map(|st| {
                let (b, v) = self.trends(st.name);
                json!({"study": st.name, "spearman_bias2": b, "spearman_variance": v})
            })
            .collect();
        let summary = json!({
            "replicates": self.replicates,
            "calibration_replicates": self.calibration_replicates,
            "n_grid_note": "sample sizes are a desk-scale choice between 200 and the paper's 10000",
            "trends": trends,
        });
        let files = json!([
            {"name": "fig2_bias_variance.csv", "x": "n", "y": ["bias2", "variance"], "xscale": "log", "yscale": "log",
             "description": "squared bias and variance of the empirical EDoF at the MISE-optimal bandwidth"},
            {"name": "fig2_penalty.csv", "x": "n", "y": ["p"], "xscale": "log",
             "description": "AIC penalty making the KL-optimal bandwidth stationary"},
        ]);
        ExperimentOutput {
            files: vec![("fig2_bias_variance.csv".into(), bv), ("fig2_penalty.csv".into(), pen)],
            manifest: manifest(spec, files, summary),
        }
    }
}

// ---------------------------------------------------------------- table 1

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Table1Row {
    pub method: String,
    pub r_name: String,
    pub h: f64,
    pub nu_hat: f64,
    pub nu3_hat: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Table1 {
    pub rows: Vec<Table1Row>,
}

pub fn run_table1_on(s: &Sample, quad: &QuadSpec) -> Result<Table1> {
    let grid = default_grid(s)?;
    let cv = cv_rules(s, &grid)?;
    let (silv, scott) = reference_rules(s)?;
    let amkld = amkld_rule_ratio(s.n()) * s.sd();
    let rules = [
        ("regularized likelihood CV (alpha=0.5)", "-", cv.reg_lik_cv.h),
        ("biased CV", "bcv", cv.bcv.h),
        ("unbiased CV", "ucv", cv.ucv.h),
        ("Silverman", "nrd0", silv),
        ("Scott", "nrd", scott),
        ("AMKLD", "-", amkld),
    ];
    let rows: Vec<Result<Table1Row>> = par_map(rules.len(), |i| {
        let (m, r, h) = rules[i];
        let k = Kernel::gaussian(h)?;
        Ok(Table1Row {
            method: m.into(),
            r_name: r.into(),
            h,
            nu_hat: nu_hat_plugin(&k, s, quad)?,
            nu3_hat: nu_competitors(&k, s, quad)?.nu3,
        })
    });
    Ok(Table1 { rows: rows.into_iter().collect::<Result<Vec<_>>>()? })
}

pub fn run_table1(spec: &ExperimentSpec) -> Result<Table1> {
    run_table1_on(&faithful_waiting(), &spec.quad)
}

impl Table1 {
    pub fn row(&self, r_name_or_method: &str) -> Option<&Table1Row> {
        self.rows.iter().find(|r| r.r_name == r_name_or_method || r.method == r_name_or_method)
    }

    pub fn output(&self, spec: &ExperimentSpec) -> ExperimentOutput {
        let mut t = CsvTable::new(&["method", "r_name", "h", "nu_hat", "nu3_hat"]);
        for r in &self.rows {
            t.rows.push(vec![
                r.method.clone(),
                r.r_name.clone(),
                r.h.to_string(),
                r.nu_hat.to_string(),
                r.nu3_hat.to_string(),
            ]);
        }
        let files = json!([{"name": "table1.csv", "description": "Old Faithful bandwidths with empirical EDoFs (gaussian kernel)"}]);
        ExperimentOutput { files: vec![("table1.csv".into(), t)], manifest: manifest(spec, files, json!({"n": 272})) }
    }
}

// ---------------------------------------------------------------- fig 3

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Fig3 {
    pub table: Table1,
    pub h: Vec<f64>,
    pub nu_hat: Vec<f64>,
    pub nu3_hat: Vec<f64>,
    pub penalties: Vec<f64>,
    pub h_star: Vec<f64>,
    pub h_star_boundary: Vec<bool>,
    /// R² of the affine fit of ν̂ on ν̂₃ over the Table 1 bandwidth range.
    pub affine_r2: f64,
}

pub fn run_fig3(spec: &ExperimentSpec) -> Result<Fig3> {
    let s = faithful_waiting();
    let table = run_table1_on(&s, &spec.quad)?;
    let grid = default_grid(&s)?;
    let curve = aic_curve(&s, KernelFamily::Gaussian, &grid, &spec.quad)?;
    let nu3: Vec<Result<f64>> = par_map(grid.len(), |i| {
        Ok(nu_competitors(&Kernel::gaussian(grid.nodes()[i])?, &s, &spec.quad)?.nu3)
    });
    let nu3_hat = nu3.into_iter().collect::<Result<Vec<f64>>>()?;
    let penalties: Vec<f64> = (0..=55).map(|i| 0.25 + 0.05 * i as f64).collect();
    let sel: Vec<_> = penalties.iter().map(|&p| curve.select(p)).collect();
    let (hlo, hhi) = table.rows.iter().fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(r.h), b.max(r.h)));
    let idx: Vec<usize> = (0..grid.len()).filter(|&i| grid.nodes()[i] >= hlo && grid.nodes()[i] <= hhi).collect();
    let x: Vec<f64> = idx.iter().map(|&i| nu3_hat[i]).collect();
    let y: Vec<f64> = idx.iter().map(|&i| curve.nu_hat[i]).collect();
    let affine_r2 = pearson(&x, &y).powi(2);
    Ok(Fig3 {
        table,
        h: curve.h.clone(),
        nu_hat: curve.nu_hat.clone(),
        nu3_hat,
        penalties,
        h_star: sel.iter().map(|r| r.h).collect(),
        h_star_boundary: sel.iter().map(|r| r.boundary).collect(),
        affine_r2,
    })
}

impl Fig3 {
    /// h*(p) at the penalty closest to `p`.
    pub fn h_star_at(&self, p: f64) -> f64 {
        let i = (0..self.penalties.len())
            .min_by(|&a, &b| (self.penalties[a] - p).abs().total_cmp(&(self.penalties[b] - p).abs()))
            .unwrap_or(0);
        self.h_star[i]
    }

    pub fn output(&self, spec: &ExperimentSpec) -> ExperimentOutput {
        let s = faithful_waiting();
        let (lo, hi) = (s.min() - 10.0, s.max() + 10.0);
        let ys: Vec<f64> = (0..=400).map(|i| lo + (hi - lo) * i as f64 / 400.0).collect();
        let mut header = vec!["y".to_string()];
        header.extend(self.table.rows.iter().map(|r| format!("h={}", r.h)));
        let mut kde = CsvTable::new(&header);
        let kernels: Vec<Kernel> = self.table.rows.iter().map(|r| Kernel::Gaussian { h: r.h }).collect();
        for &y in &ys {
            let mut row = vec![y];
            row.extend(kernels.iter().map(|k| kde_eval(k, &s, y)));
            kde.push_nums(&row);
        }
        let mut edof = CsvTable::new(&["h", "nu_hat", "nu3_hat"]);
        for i in 0..self.h.len() {
            edof.push_nums(&[self.h[i], self.nu_hat[i], self.nu3_hat[i]]);
        }
        let mut path = CsvTable::new(&["p", "h_star", "boundary"]);
        for i in 0..self.penalties.len() {
            path.push_nums(&[self.penalties[i], self.h_star[i], f64::from(u8::from(self.h_star_boundary[i]))]);
        }
        let mut rug = CsvTable::new(&["x"]);
        for &v in s.values() {
            rug.push_nums(&[v]);
        }
        let files = json!([
            {"name": "fig3_kde.csv", "x": "y", "description": "KDEs at the Table 1 bandwidths"},
            {"name": "fig3_rug.csv", "description": "the data"},
            {"name": "fig3_edof.csv", "x": "h", "y": ["nu_hat", "nu3_hat"],
             "description": "panel 2 against h; panel 3 plots nu_hat against nu3_hat"},
            {"name": "fig3_aic_path.csv", "x": "p", "y": ["h_star"], "description": "AIC-optimal bandwidth against penalty"},
        ]);
        let summary = json!({"affine_r2": self.affine_r2, "h_star_p1.5": self.h_star_at(1.5)});
        ExperimentOutput {
            files: vec![
                ("fig3_kde.csv".into(), kde),
                ("fig3_rug.csv".into(), rug),
                ("fig3_edof.csv".into(), edof),
                ("fig3_aic_path.csv".into(), path),
            ],
            manifest: manifest(spec, files, summary),
        }
    }
}

// ---------------------------------------------------------------- fig 4

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiagnosticSeries {
    /// (x, Hn_50(x)² φ(x)).
    pub integrand: Vec<(f64, f64)>,
    /// S_5 and S_50 draws at n = 1000.
    pub s5: Vec<f64>,
    pub s50: Vec<f64>,
    /// (n, j, w_j).
    pub w: Vec<(usize, usize, f64)>,
    /// Θ_jk (j, k ≤ 5) averaged over replicates at n = 10⁵, with standard errors.
    pub theta_mean: Vec<Vec<f64>>,
    pub theta_se: Vec<Vec<f64>>,
    pub theta_n: usize,
    pub replicates: usize,
}

pub const FIG4_MAX_J: usize = 100;
pub const FIG4_THETA_N: usize = 100_000;

/// S_j = √n c_j with c_j = (1/n) Σ Hn_j(x_i) for j = 1..=jmax, one standard normal sample.
fn s_statistics(t: &RecurrenceTable, n: usize, jmax: usize, stream: &RngStream) -> Result<Vec<f64>> {
    let d = OracleDensity::standard_normal();
    let s = d.sample_from(n, stream)?;
    let mut c = vec![0.0; jmax + 1];
    let mut buf = vec![0.0; jmax + 1];
    for &x in s.values() {
        t.eval_into(x, &mut buf);
        for (a, b) in c.iter_mut().zip(&buf) {
            *a += b;
        }
    }
    let rn = (n as f64).sqrt();
    Ok(c[1..].iter().map(|v| v / rn).collect())
}

pub fn run_fig4(spec: &ExperimentSpec) -> Result<DiagnosticSeries> {
    spec.validate()?;
    let reps = spec.replicates.unwrap_or(2000);
    let ns = spec.n_values.clone().unwrap_or_else(|| vec![10, 100, 1000]);
    let t = RecurrenceTable::hermite(0.0, 1.0, FIG4_MAX_J)?;

    let integrand = (0..=800)
        .map(|i| {
            let x = -20.0 + 40.0 * i as f64 / 800.0;
            let v = t.eval_all(x, 50)[50];
            (x, v * v * std_normal_pdf(x))
        })
        .collect();

    let mut w = Vec::new();
    let (mut s5, mut s50) = (Vec::new(), Vec::new());
    let iqr_normal = std_normal_quantile(0.75) - std_normal_quantile(0.25);
    for (ni, &n) in ns.iter().enumerate() {
        let stream = spec.stream(400 + ni as u64);
        let draws: Vec<Result<Vec<f64>>> = par_map(reps, |r| s_statistics(&t, n, FIG4_MAX_J, &stream.child(r as u64)));
        let draws = draws.into_iter().collect::<Result<Vec<_>>>()?;
        for j in 1..=FIG4_MAX_J {
            let mut col: Vec<f64> = draws.iter().map(|d| d[j - 1]).collect();
            col.sort_by(f64::total_cmp);
            let iqr = quantile_sorted(&col, 0.75) - quantile_sorted(&col, 0.25);
            w.push((n, j, iqr / iqr_normal));
        }
        if n == 1000 {
            s5 = draws.iter().map(|d| d[4]).collect();
            s50 = draws.iter().map(|d| d[49]).collect();
        }
    }

    let theta_reps = match spec.scale {
        Scale::Desk => 200,
        Scale::Paper => 1000,
    };
    let t5 = t.truncate(5);
    let stream = spec.stream(450);
    let thetas: Vec<Result<Vec<f64>>> = par_map(theta_reps, |r| {
        let s = OracleDensity::standard_normal().sample_from(FIG4_THETA_N, &stream.child(r as u64))?;
        let mut th = vec![0.0; 36];
        let mut buf = vec![0.0; 6];
        for &x in s.values() {
            t5.eval_into(x, &mut buf);
            for j in 0..6 {
                for k in 0..6 {
                    th[j * 6 + k] += buf[j] * buf[k];
                }
            }
        }
        Ok(th.iter().map(|v| v / FIG4_THETA_N as f64).collect())
    });
    let thetas = thetas.into_iter().collect::<Result<Vec<_>>>()?;
    let mut theta_mean = vec![vec![0.0; 6]; 6];
    let mut theta_se = vec![vec![0.0; 6]; 6];
    for j in 0..6 {
        for k in 0..6 {
            let col: Vec<f64> = thetas.iter().map(|t| t[j * 6 + k]).collect();
            let (m, sd) = mean_sd(&col);
            theta_mean[j][k] = m;
            theta_se[j][k] = sd / (col.len() as f64).sqrt();
        }
    }
    Ok(DiagnosticSeries { integrand, s5, s50, w, theta_mean, theta_se, theta_n: FIG4_THETA_N, replicates: reps })
}

impl DiagnosticSeries {
    /// Least-squares slope of log w_j on log j over `[jlo, jhi]` at sample size n.
    pub fn w_slope(&self, n: usize, jlo: usize, jhi: usize) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .w
            .iter()
            .filter(|&&(nn, j, _)| nn == n && j >= jlo && j <= jhi)
            .map(|&(_, j, w)| ((j as f64).ln(), w.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
        let (mx, my) = (mx / pts.len() as f64, my / pts.len() as f64);
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    }

    pub fn output(&self, spec: &ExperimentSpec) -> ExperimentOutput {
        let mut integ = CsvTable::new(&["x", "integrand"]);
        for &(x, v) in &self.integrand {
            integ.push_nums(&[x, v]);
        }
        let mut s = CsvTable::new(&["replicate", "s5", "s50"]);
        for i in 0..self.s5.len() {
            s.push_nums(&[i as f64, self.s5[i], self.s50[i]]);
        }
        let mut w = CsvTable::new(&["n", "j", "w"]);
        for &(n, j, v) in &self.w {
            w.push_nums(&[n as f64, j as f64, v]);
        }
        let mut th = CsvTable::new(&["j", "k", "mean", "se"]);
        for j in 0..6 {
            for k in 0..6 {
                th.push_nums(&[j as f64, k as f64, self.theta_mean[j][k], self.theta_se[j][k]]);
            }
        }
        let (m5, sd5) = mean_sd(&self.s5);
        let (m50, sd50) = mean_sd(&self.s50);
        let summary = json!({
            "replicates": self.replicates,
            "w_slope_n1000_j20_100": self.w_slope(1000, 20, 100),
            "theta55_mean": self.theta_mean[5][5],
            "theta55_se": self.theta_se[5][5],
            "theta_n": self.theta_n,
            "s5_mean_sd": [m5, sd5],
            "s50_mean_sd": [m50, sd50],
        });
        let files = json!([
            {"name": "fig4_integrand.csv", "x": "x", "y": ["integrand"], "description": "Hn_50(x)^2 phi(x)"},
            {"name": "fig4_s.csv", "description": "sampling draws of S_5 and S_50 at n=1000"},
            {"name": "fig4_w.csv", "x": "j", "y": ["w"], "xscale": "log", "yscale": "log",
             "description": "IQR of S_j relative to the standard normal, per n"},
            {"name": "fig4_theta.csv", "description": "Monte Carlo mean of the sample orthogonality matrix"},
        ]);
        ExperimentOutput {
            files: vec![
                ("fig4_integrand.csv".into(), integ),
                ("fig4_s.csv".into(), s),
                ("fig4_w.csv".into(), w),
                ("fig4_theta.csv".into(), th),
            ],
            manifest: manifest(spec, files, summary),
        }
    }
}

// ---------------------------------------------------------------- CLT study

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CltSummary {
    pub theta: f64,
    pub omega2: f64,
    /// sd(√n(θ̂ − θ)) / ω.
    pub sd_ratio: f64,
    /// mean(√n(θ̂ − θ)) / ω.
    pub standardized_mean: f64,
    pub replicates: usize,
}

/// Monte Carlo check of √n(θ̂ − θ) → N(0, ω²) with θ = 1 + ν.
pub fn clt_study(
    k: &Kernel,
    d: &OracleDensity,
    n: usize,
    replicates: usize,
    stream: &RngStream,
    quad: &QuadSpec,
) -> Result<CltSummary> {
    let theta = 1.0 + nu_oracle_direct(k, d, quad)?;
    let omega2 = crate::edof::omega2_oracle(k, d, quad)?;
    let z: Vec<Result<f64>> = par_map(replicates, |r| {
        let s = d.sample_from(n, &stream.child(r as u64))?;
        Ok((n as f64).sqrt() * (1.0 + nu_hat_plugin(k, &s, quad)? - theta))
    });
    let z = z.into_iter().collect::<Result<Vec<f64>>>()?;
    let (m, sd) = mean_sd(&z);
    let omega = omega2.sqrt();
    Ok(CltSummary { theta, omega2, sd_ratio: sd / omega, standardized_mean: m / omega, replicates })
}

/// Run one experiment and write its files into `dir`.
pub fn replicate(spec: &ExperimentSpec, dir: &Path) -> Result<ExperimentOutput> {
    let out = match spec.experiment {
        Experiment::Fig1 => run_fig1(spec)?.output(spec),
        Experiment::Fig2 => run_fig2(spec)?.output(spec),
        Experiment::Fig3 => run_fig3(spec)?.output(spec),
        Experiment::Fig4 => run_fig4(spec)?.output(spec),
        Experiment::Table1 => run_table1(spec)?.output(spec),
    };
    out.write_to(dir)?;
    Ok(out)
}
