use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// Increasing time nodes in `(0, horizon]`. Node `0` is implicit.
///
/// Deserializes from `{"nodes": [...]}` or `{"n": 16, "horizon": 1.0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr")]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(untagged, deny_unknown_fields)]
enum GridRepr {
    Nodes {
        nodes: Vec<f64>,
    },
    Uniform {
        n: usize,
        #[serde(default = "unit")]
        horizon: f64,
    },
}

fn unit() -> f64 {
    1.0
}

impl TryFrom<GridRepr> for TimeGrid {
    type Error = crate::error::Error;

    fn try_from(r: GridRepr) -> Result<Self> {
        match r {
            GridRepr::Nodes { nodes } => Self::from_nodes(nodes),
            GridRepr::Uniform { n, horizon } => Self::uniform_horizon(n, horizon),
        }
    }
}

impl TimeGrid {
    /// Nodes `k T / n` for `k = 1..=n`.
    pub fn uniform_horizon(n: usize, horizon: f64) -> Result<Self> {
        ensure(n >= 2, || format!("grid needs at least 2 nodes, got {n}"))?;
        ensure(horizon > 0.0 && horizon.is_finite(), || format!("horizon must be positive, got {horizon}"))?;
        let nodes = (1..=n).map(|k| horizon * k as f64 / n as f64).collect();
        Ok(Self { nodes })
    }

    /// Uniform grid on `(0, 1]`.
    pub fn uniform(n: usize) -> Result<Self> {
        Self::uniform_horizon(n, 1.0)
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        ensure(nodes.len() >= 2, || format!("grid needs at least 2 nodes, got {}", nodes.len()))?;
        ensure(nodes[0] > 0.0, || "first node must be positive".into())?;
        ensure(nodes.iter().all(|t| t.is_finite()), || "non-finite node".into())?;
        ensure(nodes.windows(2).all(|w| w[1] > w[0]), || "nodes must be strictly increasing".into())?;
        Ok(Self { nodes })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn first(&self) -> f64 {
        self.nodes[0]
    }

    pub fn last(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Node `k` with the convention `t_0 = 0`.
    pub fn t(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.nodes[k - 1]
        }
    }

    /// Panel widths `t_k - t_{k-1}` for `k = 1..=n`, with `t_0 = 0`.
    pub fn panel_widths(&self) -> Vec<f64> {
        (1..=self.len()).map(|k| self.t(k) - self.t(k - 1)).collect()
    }

    /// Trapezoid weights over the nodes themselves; they sum to `last - first`.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.len();
        let x = &self.nodes;
        (0..n)
            .map(|k| {
                let left = if k > 0 { x[k] - x[k - 1] } else { 0.0 };
                let right = if k + 1 < n { x[k + 1] - x[k] } else { 0.0 };
                0.5 * (left + right)
            })
            .collect()
    }

    /// Trapezoid weights on `[0, t_m]` over nodes `0..=m` (node 0 included).
    pub fn weights_from_origin(&self, m: usize) -> Vec<f64> {
        (0..=m)
            .map(|k| {
                let left = if k > 0 { self.t(k) - self.t(k - 1) } else { 0.0 };
                let right = if k < m { self.t(k + 1) - self.t(k) } else { 0.0 };
                0.5 * (left + right)
            })
            .collect()
    }

    /// Index (1-based) of the node closest to `t`.
    pub fn nearest_node(&self, t: f64) -> usize {
        let mut best = 0;
        for (i, x) in self.nodes.iter().enumerate() {
            if (x - t).abs() < (self.nodes[best] - t).abs() {
                best = i;
            }
        }
        best + 1
    }
}
