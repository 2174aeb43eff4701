use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    nodes: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl Grid {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Argument("empty grid".into()));
        }
        if nodes.iter().any(|v| !v.is_finite()) || nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Argument("grid nodes must be finite and strictly increasing".into()));
        }
        let (lo, hi) = (nodes[0], nodes[nodes.len() - 1]);
        Ok(Self { nodes, lo, hi })
    }

    pub fn linspace(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count < 2 || !(lo < hi) {
            return Err(Error::Argument(format!("bad grid {lo}:{hi}:{count}")));
        }
        Self::new((0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect())
    }

    pub fn logspace(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(lo > 0.0) {
            return Err(Error::Argument(format!("log grid needs positive bounds, got {lo}")));
        }
        let g = Self::linspace(lo.ln(), hi.ln(), count)?;
        let mut nodes: Vec<f64> = g.nodes.iter().map(|v| v.exp()).collect();
        nodes[0] = lo;
        *nodes.last_mut().unwrap() = hi;
        Self::new(nodes)
    }

    /// Parse `lo:hi:count` (log-spaced when `log`).
    pub fn parse(spec: &str, log: bool) -> Result<Self> {
        let parts: Vec<&str> = spec.split(':').collect();
        let bad = || Error::Argument(format!("grid spec must be lo:hi:count, got {spec:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if log {
            Self::logspace(lo, hi, count)
        } else {
            Self::linspace(lo, hi, count)
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
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
}
