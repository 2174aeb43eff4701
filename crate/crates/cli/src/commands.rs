use std::path::Path;

use kde_edof::bandwidth::{self, BandwidthResult, Rule, SelectOptions};
use kde_edof::data::io::{load_sample, CsvTable};
use kde_edof::edof::{nu_competitors, nu_hat_plugin, omega2_plugin};
use kde_edof::experiments::{self, ExperimentSpec};
use kde_edof::kernels::SmoothedDensity;
use kde_edof::orthopoly::{build_recurrence_continuous, build_recurrence_discrete, RecurrenceTable};
use kde_edof::sensitivity::{build_variant, edof_from_trace};
use kde_edof::smoothing::SmoothingProblem;
use kde_edof::{amkld, Error, Grid, Kernel, KernelFamily, OracleDensity, QuadSpec, Sample};
use serde_json::{json, Value};

use crate::{
    AmkldArgs, BandwidthArgs, Command, EdofArgs, FitArgs, KernelArgs, OpsDiagArgs, ReplicateArgs, SensmatArgs,
    SmoothingArgs, SourceArgs,
};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::Run(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) => f.write_str(m),
            Self::Run(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::Run(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Everything a command produces, written only after the command succeeded.
#[derive(Default)]
struct Output {
    files: Vec<(String, String)>,
    stdout: String,
}

impl Output {
    fn json(v: Value) -> Self {
        Self { files: Vec::new(), stdout: pretty(&v) }
    }

    fn file(mut self, path: Option<&String>, body: String) -> Self {
        if let Some(p) = path {
            self.files.push((p.clone(), body));
        }
        self
    }

    fn emit(self) -> Result<()> {
        for (path, body) in &self.files {
            std::fs::write(path, body).map_err(|e| CliError::Run(Error::Io(e)))?;
        }
        print!("{}", self.stdout);
        Ok(())
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

pub fn run(cmd: &Command) -> Result<()> {
    let out = match cmd {
        Command::Fit(a) => fit(a)?,
        Command::Edof(a) => edof(a)?,
        Command::Bandwidth(a) => bandwidth_cmd(a)?,
        Command::Sensmat(a) => sensmat(a)?,
        Command::Amkld(a) => amkld_cmd(a)?,
        Command::OpsDiag(a) => ops_diag(a)?,
        Command::Replicate(a) => return replicate(a),
    };
    out.emit()
}

fn load(path: &str) -> Result<Sample> {
    match load_sample(path) {
        Ok(s) => Ok(s),
        Err(Error::Io(e)) => Err(CliError::Usage(format!("cannot read input {path:?}: {e}"))),
        Err(Error::Argument(m)) => Err(CliError::Usage(m)),
        Err(e) => Err(e.into()),
    }
}

fn oracle(name: &str) -> Result<OracleDensity> {
    match name {
        "normal" => Ok(OracleDensity::standard_normal()),
        "skewed" => Ok(OracleDensity::skewed_mixture()),
        "bimodal" => Ok(OracleDensity::bimodal_mixture()),
        _ => Err(CliError::Usage(format!("unknown oracle {name:?}; expected normal, skewed or bimodal"))),
    }
}

fn parse_pair(s: &str) -> Result<(f64, f64)> {
    let bad = || CliError::Usage(format!("expected lo:hi, got {s:?}"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let lo: f64 = a.trim().parse().map_err(|_| bad())?;
    let hi: f64 = b.trim().parse().map_err(|_| bad())?;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn parse_grid(g: Option<&String>) -> Result<Option<Grid>> {
    g.map(|g| Grid::parse(g, true).map_err(|e| CliError::Usage(e.to_string()))).transpose()
}

/// Support for compact kernels: `--support`, else the sample range or the oracle support.
fn compact_support(ka: &KernelArgs, fallback: (f64, f64)) -> Result<(f64, f64)> {
    let (lo, hi) = match &ka.support {
        Some(s) => parse_pair(s)?,
        None => fallback,
    };
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(CliError::Usage(format!("{} kernel needs a compact --support", ka.kernel)));
    }
    Ok((lo, hi))
}

/// The sample with its declared support matching the kernel domain.
fn sample_for(ka: &KernelArgs, s: Sample) -> Result<Sample> {
    if ka.kernel == KernelFamily::Gaussian {
        return Ok(s);
    }
    let (lo, hi) = compact_support(ka, (s.min(), s.max()))?;
    Ok(s.restricted(lo, hi)?)
}

fn kernel(ka: &KernelArgs, h: Option<f64>, support: (f64, f64)) -> Result<Kernel> {
    match ka.kernel {
        KernelFamily::Histogram => {
            let (lo, hi) = compact_support(ka, support)?;
            let bins = match (ka.bins, h) {
                (Some(b), _) => b,
                (None, Some(h)) if h > 0.0 => ((hi - lo) / h).ceil().max(1.0) as usize,
                _ => return Err(CliError::Usage("histogram kernel needs --bins or --bandwidth".into())),
            };
            Ok(Kernel::equal_bins(lo, hi, bins)?)
        }
        family => {
            let h = h.ok_or_else(|| CliError::Usage("a bandwidth is required".into()))?;
            let support = if family == KernelFamily::Diffusion { compact_support(ka, support)? } else { support };
            Ok(Kernel::with_family(family, h, support)?)
        }
    }
}

/// Kernel for a sample, from a fixed bandwidth or a rule (Silverman by default).
fn sample_kernel(ka: &KernelArgs, sm: &SmoothingArgs, s: &Sample) -> Result<(Kernel, Option<BandwidthResult>)> {
    if ka.kernel == KernelFamily::Histogram || sm.bandwidth.is_some() {
        return Ok((kernel(ka, sm.bandwidth, s.support())?, None));
    }
    let opts = SelectOptions { family: ka.kernel, penalty: sm.penalty, grid: parse_grid(sm.grid.as_ref())?, ..Default::default() };
    let r = bandwidth::select(s, sm.rule.unwrap_or(Rule::Silverman), &opts)?;
    Ok((kernel(ka, Some(r.h), s.support())?, Some(r)))
}

fn fit(a: &FitArgs) -> Result<Output> {
    if a.points < 2 {
        return Err(CliError::Usage("--points must be at least 2".into()));
    }
    let s = sample_for(&a.kernel, load(&a.input)?)?;
    let (k, sel) = sample_kernel(&a.kernel, &a.smoothing, &s)?;
    let spec = QuadSpec::default();
    let fk = SmoothedDensity::empirical(&k, &s)?;
    let integral = fk.integrate_pdf(&spec)?;
    let (lo, hi) = k.domain().unwrap_or_else(|| {
        let h = k.bandwidth().unwrap_or(1.0);
        (s.min() - 4.0 * h, s.max() + 4.0 * h)
    });
    let mut t = CsvTable::new(&["y", "density"]);
    for y in Grid::linspace(lo, hi, a.points)?.nodes() {
        t.push_nums(&[*y, fk.pdf(*y)]);
    }
    let v = json!({
        "schema": 1,
        "kernel": k.family().to_string(),
        "h": k.bandwidth(),
        "rule": sel.as_ref().map(|r| r.rule.to_string()),
        "boundary": sel.as_ref().map(|r| r.boundary),
        "n": s.n(),
        "integral": integral,
        "grid": [lo, hi, a.points],
    });
    Ok(Output::json(v).file(a.grid_out.as_ref(), t.to_csv()))
}

fn edof(a: &EdofArgs) -> Result<Output> {
    let s = sample_for(&a.kernel, load(&a.input)?)?;
    let (k, sel) = sample_kernel(&a.kernel, &a.smoothing, &s)?;
    let spec = QuadSpec::default();
    let nu_hat = nu_hat_plugin(&k, &s, &spec)?;
    let c = nu_competitors(&k, &s, &spec)?;
    let omega2 = omega2_plugin(&k, &s, &spec).ok().filter(|w| w.is_finite());
    Ok(Output::json(json!({
        "schema": 1,
        "kernel": k.family().to_string(),
        "h": k.bandwidth(),
        "rule": sel.map(|r| r.rule.to_string()),
        "n": s.n(),
        "nu_hat": nu_hat,
        "nu1": c.nu1,
        "nu2": c.nu2,
        "nu3": c.nu3,
        "theta_hat": 1.0 + nu_hat,
        "omega2": omega2,
    })))
}

fn bandwidth_cmd(a: &BandwidthArgs) -> Result<Output> {
    if a.rule == Rule::KlOracle {
        return Err(CliError::Usage("kl-oracle needs an oracle density; use `replicate fig2`".into()));
    }
    if a.kernel.kernel == KernelFamily::Histogram {
        return Err(CliError::Usage("bandwidth rules apply to gaussian and diffusion kernels".into()));
    }
    let s = sample_for(&a.kernel, load(&a.input)?)?;
    let opts = SelectOptions { family: a.kernel.kernel, penalty: a.penalty, grid: parse_grid(a.grid.as_ref())?, ..Default::default() };
    let r = bandwidth::select(&s, a.rule, &opts)?;
    let aic = r.rule == Rule::Aic;
    let mut t = CsvTable::new(if aic { &["h", "criterion", "nu_hat", "loglik"][..] } else { &["h", "criterion"][..] });
    for p in &r.curve {
        match (aic, p.nu_hat, p.loglik) {
            (true, Some(nu), Some(l)) => t.push_nums(&[p.h, p.criterion, nu, l]),
            _ => t.push_nums(&[p.h, p.criterion]),
        }
    }
    let v = json!({
        "schema": 1,
        "rule": r.rule.to_string(),
        "h": r.h,
        "boundary": r.boundary,
        "penalty": r.penalty,
        "kernel": a.kernel.kernel.to_string(),
        "n": s.n(),
        "curve_points": r.curve.len(),
    });
    Ok(Output::json(v).file(a.curve_out.as_ref(), t.to_csv()))
}

fn source_problem(src: &SourceArgs, ka: &KernelArgs, h: f64, degree: usize, spec: &QuadSpec) -> Result<(SmoothingProblem, Kernel)> {
    match (&src.input, &src.oracle) {
        (Some(path), _) => {
            let s = sample_for(ka, load(path)?)?;
            let k = kernel(ka, Some(h), s.support())?;
            Ok((SmoothingProblem::empirical(&k, &s, degree, spec)?, k))
        }
        (None, Some(name)) => {
            let d = oracle(name)?;
            let k = kernel(ka, Some(h), d.support())?;
            Ok((SmoothingProblem::oracle(&k, &d, degree, spec)?, k))
        }
        (None, None) => Err(CliError::Usage("give --input or --oracle".into())),
    }
}

fn sensmat(a: &SensmatArgs) -> Result<Output> {
    let spec = QuadSpec::default();
    let (p, k) = source_problem(&a.source, &a.kernel, a.bandwidth, a.max_degree, &spec)?;
    let m = build_variant(&p, a.variant, a.max_degree)?;
    let tr = edof_from_trace(&m);
    let d = m.degree();

    let mut header = vec!["j".to_string()];
    header.extend((0..=d).map(|k| format!("s{k}")));
    let mut mt = CsvTable::new(&header);
    for (j, row) in m.rows().into_iter().enumerate() {
        let mut r = vec![j as f64];
        r.extend(row);
        mt.push_nums(&r);
    }
    let mut dt = CsvTable::new(&["j", "diag", "cumulative"]);
    let mut cum = 0.0;
    for (j, v) in m.diagonal_profile().into_iter().enumerate() {
        cum += v;
        dt.push_nums(&[(j + 1) as f64, v, cum]);
    }
    let v = json!({
        "schema": 1,
        "variant": m.variant.to_string(),
        "kernel": k.family().to_string(),
        "h": k.bandwidth(),
        "degree": d,
        "requested_degree": m.requested_degree,
        "nu": tr.nu,
        "tail": tr.tail,
        "first_row_defect": m.first_row_defect,
        "source": a.source.input.clone().or(a.source.oracle.clone()),
    });
    Ok(Output::json(v).file(a.out.as_ref(), mt.to_csv()).file(a.diag_out.as_ref(), dt.to_csv()))
}

fn amkld_cmd(a: &AmkldArgs) -> Result<Output> {
    let (sigma, n) = match (&a.input, a.sigma) {
        (Some(path), _) => {
            let s = load(path)?;
            (s.sd(), a.n.unwrap_or(s.n()))
        }
        (None, Some(sigma)) => {
            let n = a.n.ok_or_else(|| CliError::Usage("--n is required with --sigma".into()))?;
            (sigma, n)
        }
        (None, None) => return Err(CliError::Usage("give --sigma or --input".into())),
    };
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(CliError::Run(Error::Domain(format!("sigma must be positive, got {sigma}"))));
    }
    let opt = amkld::amkld_optimal_r(n)?;
    let at_opt = amkld::amkld_gaussian(opt.r_star, n)?;
    let at_h = a.bandwidth.map(|h| amkld::amkld_gaussian(h / sigma, n)).transpose()?;
    Ok(Output::json(json!({
        "schema": 1,
        "n": n,
        "sigma": sigma,
        "r_star": opt.r_star,
        "residual": opt.residual,
        "h_star": opt.r_star * sigma,
        "h_rule": opt.h_rule_ratio * sigma,
        "at_optimum": at_opt,
        "at_bandwidth": at_h,
    })))
}

fn ops_diag(a: &OpsDiagArgs) -> Result<Output> {
    let (t, points, weights): (RecurrenceTable, Vec<f64>, Vec<f64>) = match (&a.source.input, &a.source.oracle) {
        (Some(path), _) => {
            let s = load(path)?;
            let t = build_recurrence_discrete(&s, a.max_degree)?;
            let w = vec![1.0 / s.n() as f64; s.n()];
            (t, s.values().to_vec(), w)
        }
        (None, Some(name)) => {
            let d = oracle(name)?;
            let (lo, hi) = d.reference_domain(a.max_degree);
            let q = QuadSpec::default().rule(lo, hi, d.resolution(), a.max_degree, &d.breakpoints())?;
            let f = q.nodes().iter().map(|&x| d.pdf(x)).collect::<kde_edof::Result<Vec<f64>>>()?;
            let t = build_recurrence_continuous(&f, &q, a.max_degree)?;
            let w = q.weights().iter().zip(&f).map(|(w, f)| w * f).collect();
            (t, q.nodes().to_vec(), w)
        }
        (None, None) => return Err(CliError::Usage("give --input or --oracle".into())),
    };
    let d = t.max_degree();
    let defect = t.defect_matrix(&points, &weights, d);
    let mut rt = CsvTable::new(&["k", "alpha", "beta", "defect"]);
    for k in 0..=d {
        let row_max = defect[k].iter().copied().fold(0.0, f64::max);
        let alpha = t.alphas().get(k).copied().unwrap_or(f64::NAN);
        let beta = t.betas().get(k).copied().unwrap_or(f64::NAN);
        rt.push_nums(&[k as f64, alpha, beta, row_max]);
    }
    let mut header = vec!["k".to_string()];
    header.extend((0..=d).map(|l| format!("d{l}")));
    let mut dm = CsvTable::new(&header);
    for (k, row) in defect.iter().enumerate() {
        let mut r = vec![k as f64];
        r.extend(row);
        dm.push_nums(&r);
    }
    let out = match &a.out {
        Some(_) => {
            let max = defect.iter().flatten().copied().fold(0.0, f64::max);
            Output::json(json!({ "schema": 1, "max_degree": d, "requested_degree": a.max_degree, "max_defect": max }))
                .file(a.out.as_ref(), rt.to_csv())
        }
        None => Output { files: Vec::new(), stdout: rt.to_csv() },
    };
    Ok(out.file(a.defect_out.as_ref(), dm.to_csv()))
}

fn replicate(a: &ReplicateArgs) -> Result<()> {
    let spec = ExperimentSpec {
        experiment: a.experiment,
        seed: a.seed,
        scale: a.scale,
        replicates: a.replicates,
        n_values: a.n_values.clone(),
        quad: QuadSpec::default(),
    };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let out = experiments::replicate(&spec, Path::new(&a.out))?;
    print!("{}", pretty(&out.manifest));
    Ok(())
}
