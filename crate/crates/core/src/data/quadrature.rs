use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    GaussLegendre,
    CompositeTrapezoid,
}

/// Nodes and positive weights approximating `∫_lo^hi g(x) dx` by `Σ w_i g(x_i)`.
///
/// Composite rules keep their nodes sorted ascending, which the windowed kernel
/// tables rely on.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    order: usize,
    scheme: Scheme,
    lo: f64,
    hi: f64,
}

impl QuadratureRule {
    /// Single-panel rule with `order` nodes.
    pub fn new(lo: f64, hi: f64, order: usize, scheme: Scheme) -> Result<Self> {
        check_interval(lo, hi)?;
        if order < 2 {
            return Err(Error::Argument(format!("quadrature order must be >= 2, got {order}")));
        }
        match scheme {
            Scheme::GaussLegendre => Self::composite_gauss_legendre(lo, hi, 1, order),
            Scheme::CompositeTrapezoid => {
                let step = (hi - lo) / (order - 1) as f64;
                let nodes: Vec<f64> = (0..order).map(|i| lo + step * i as f64).collect();
                let mut weights = vec![step; order];
                weights[0] *= 0.5;
                weights[order - 1] *= 0.5;
                Ok(Self { nodes, weights, order, scheme, lo, hi })
            }
        }
    }

    pub fn composite_gauss_legendre(lo: f64, hi: f64, panels: usize, order: usize) -> Result<Self> {
        let edges: Vec<f64> = (0..=panels.max(1))
            .map(|i| lo + (hi - lo) * i as f64 / panels.max(1) as f64)
            .collect();
        Self::from_edges(&edges, order)
    }

    /// Gauss–Legendre panels between consecutive `edges` (strictly increasing).
    pub fn from_edges(edges: &[f64], order: usize) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::Argument("need at least two panel edges".into()));
        }
        if order < 1 {
            return Err(Error::Argument("quadrature order must be positive".into()));
        }
        for w in edges.windows(2) {
            check_interval(w[0], w[1])?;
        }
        let (ref_nodes, ref_weights) = gauss_legendre_reference(order);
        let mut nodes = Vec::with_capacity(order * (edges.len() - 1));
        let mut weights = Vec::with_capacity(nodes.capacity());
        for w in edges.windows(2) {
            let half = 0.5 * (w[1] - w[0]);
            let mid = 0.5 * (w[1] + w[0]);
            for (t, wt) in ref_nodes.iter().zip(&ref_weights) {
                nodes.push(mid + half * t);
                weights.push(half * wt);
            }
        }
        Ok(Self {
            nodes,
            weights,
            order,
            scheme: Scheme::GaussLegendre,
            lo: edges[0],
            hi: edges[edges.len() - 1],
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

fn check_interval(lo: f64, hi: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
        return Err(Error::Argument(format!("degenerate interval [{lo}, {hi}]")));
    }
    Ok(())
}

/// Gauss–Legendre nodes/weights on [-1, 1] by Newton iteration on the Legendre recurrence.
pub(crate) fn gauss_legendre_reference(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Panel sizing policy for composite Gauss–Legendre rules.
///
/// Panels are at most `scale / panels_per_scale` wide, never fewer than
/// `min_panels` (and `2·degree` when polynomials of that degree are integrated),
/// and every breakpoint becomes a panel edge.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuadSpec {
    pub order: usize,
    pub min_panels: usize,
    pub panels_per_scale: f64,
    pub max_panels: usize,
}

impl Default for QuadSpec {
    fn default() -> Self {
        // 64 panels x order 8 = 512 nodes on compact supports.
        Self { order: 8, min_panels: 64, panels_per_scale: 2.0, max_panels: 40_000 }
    }
}

impl QuadSpec {
    pub fn rule(&self, lo: f64, hi: f64, scale: f64, degree: usize, breaks: &[f64]) -> Result<QuadratureRule> {
        check_interval(lo, hi)?;
        let width = hi - lo;
        let mut panels = self.min_panels.max(2 * degree);
        if scale.is_finite() && scale > 0.0 {
            panels = panels.max((width / scale * self.panels_per_scale).ceil() as usize);
        }
        panels = panels.min(self.max_panels).max(1);

        let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&b| b > lo && b < hi).collect();
        cuts.push(lo);
        cuts.push(hi);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * width);

        let mut edges = vec![lo];
        for seg in cuts.windows(2) {
            let len = seg[1] - seg[0];
            let k = ((len / width) * panels as f64).round().max(1.0) as usize;
            for i in 1..=k {
                edges.push(seg[0] + len * i as f64 / k as f64);
            }
        }
        let last = edges.len() - 1;
        edges[last] = hi;
        QuadratureRule::from_edges(&edges, self.order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_rule_is_polynomially_exact() {
        let q = QuadratureRule::new(0.0, 1.0, 8, Scheme::GaussLegendre).unwrap();
        assert!((q.integrate(|x| x * x) - 1.0 / 3.0).abs() < 1e-14);
        assert!((q.integrate(|_| 1.0) - 1.0).abs() < 1e-14);
        for k in 0..=15 {
            let exact = 1.0 / (k as f64 + 1.0);
            assert_relative_eq!(q.integrate(|x| x.powi(k)), exact, max_relative = 1e-12);
        }
    }

    #[test]
    fn normal_density_over_wide_interval() {
        let q = QuadratureRule::new(-8.0, 8.0, 64, Scheme::GaussLegendre).unwrap();
        let total = q.integrate(|x| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt());
        // erf(8/sqrt 2) differs from 1 by ~1.2e-15
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn weights_sum_to_interval_length() {
        let q = QuadratureRule::composite_gauss_legendre(-3.0, 5.5, 37, 8).unwrap();
        assert_relative_eq!(q.weights().iter().sum::<f64>(), 8.5, max_relative = 1e-12);
        let t = QuadratureRule::new(1.0, 2.0, 101, Scheme::CompositeTrapezoid).unwrap();
        assert_relative_eq!(t.weights().iter().sum::<f64>(), 1.0, max_relative = 1e-12);
        assert!(q.nodes().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn degenerate_interval_is_rejected() {
        assert!(QuadratureRule::new(1.0, 1.0, 8, Scheme::GaussLegendre).is_err());
        assert!(QuadratureRule::new(0.0, 1.0, 1, Scheme::GaussLegendre).is_err());
    }

    #[test]
    fn spec_respects_breakpoints() {
        let spec = QuadSpec::default();
        let q = spec.rule(0.0, 1.0, f64::INFINITY, 0, &[0.3, 0.35]).unwrap();
        // a step function is integrated exactly when its jumps are panel edges
        let v = q.integrate(|x| if x < 0.3 { 1.0 } else if x < 0.35 { 7.0 } else { 2.0 });
        assert!((v - (0.3 + 0.35 + 1.3)).abs() < 1e-13);
    }
}
