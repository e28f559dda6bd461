//! Node families on the reference interval `[0, 1]`.
//!
//! A [`NodeFamily`] bundles the interpolation nodes with their barycentric
//! weights and the differentiation matrix of the interpolant through them.
//! Collocation uses the Gauss-type families with `m` nodes (interpolants of
//! degree `m - 1`); the representation of the unknown uses Lobatto-type
//! families that contain both endpoints.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Kind of node distribution on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    /// Roots of the degree-`m` Legendre polynomial.
    GaussLegendre,
    /// Chebyshev points of the first kind (roots of `T_m`).
    ChebyshevGauss,
    /// Chebyshev extreme points, `m + 1` of them including both endpoints.
    ChebyshevLobatto,
    /// Uniformly spaced points including both endpoints (midpoint for `m = 1`).
    Equidistant,
}

impl NodeKind {
    pub const ALL: [NodeKind; 4] = [
        NodeKind::GaussLegendre,
        NodeKind::ChebyshevGauss,
        NodeKind::ChebyshevLobatto,
        NodeKind::Equidistant,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            NodeKind::GaussLegendre => "gauss_legendre",
            NodeKind::ChebyshevGauss => "chebyshev_gauss",
            NodeKind::ChebyshevLobatto => "chebyshev_lobatto",
            NodeKind::Equidistant => "equidistant",
        }
    }

    /// Whether the family always contains both endpoints `0` and `1`.
    pub fn includes_endpoints(&self) -> bool {
        matches!(self, NodeKind::ChebyshevLobatto | NodeKind::Equidistant)
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NodeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NodeKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown node kind `{s}`")))
    }
}

/// Interpolation nodes on `[0, 1]` with barycentric weights and the
/// differentiation matrix of the interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFamily {
    kind: NodeKind,
    m: usize,
    nodes: Vec<f64>,
    bary_weights: Vec<f64>,
    /// Row-major, `len() x len()`.
    diff_matrix: Vec<f64>,
}

/// Builds the node family of the given kind.
///
/// `m` is the collocation count for the Gauss families and for
/// [`NodeKind::Equidistant`]; for [`NodeKind::ChebyshevLobatto`] it is the
/// polynomial degree, so the family holds `m + 1` nodes.
pub fn make_nodes(kind: NodeKind, m: usize) -> Result<NodeFamily> {
    if m == 0 {
        return Err(Error::InvalidArgument(
            "node family needs m >= 1".to_string(),
        ));
    }
    let nodes = match kind {
        NodeKind::GaussLegendre => legendre_roots(m)
            .into_iter()
            .map(|x| 0.5 * (x + 1.0))
            .collect(),
        NodeKind::ChebyshevGauss => (1..=m)
            .map(|j| 0.5 * (1.0 - ((2 * j - 1) as f64 * PI / (2 * m) as f64).cos()))
            .collect(),
        NodeKind::ChebyshevLobatto => (0..=m)
            .map(|j| {
                if j == 0 {
                    0.0
                } else if j == m {
                    1.0
                } else {
                    0.5 * (1.0 - (j as f64 * PI / m as f64).cos())
                }
            })
            .collect(),
        NodeKind::Equidistant => {
            if m == 1 {
                vec![0.5]
            } else {
                (0..m).map(|j| j as f64 / (m - 1) as f64).collect()
            }
        }
    };
    let nodes = symmetrize(nodes);
    let bary_weights = barycentric_weights(&nodes);
    let diff_matrix = differentiation_matrix(&nodes, &bary_weights);
    Ok(NodeFamily {
        kind,
        m,
        nodes,
        bary_weights,
        diff_matrix,
    })
}

/// Node family used for the representation values of a degree-`degree`
/// piecewise polynomial: `degree + 1` nodes including both endpoints.
pub fn representation_nodes(kind: NodeKind, degree: usize) -> Result<NodeFamily> {
    match kind {
        NodeKind::ChebyshevLobatto => make_nodes(kind, degree),
        NodeKind::Equidistant => make_nodes(kind, degree + 1),
        other => Err(Error::InvalidArgument(format!(
            "{other} nodes do not contain the interval endpoints"
        ))),
    }
}

impl NodeFamily {
    pub fn kind(&self) -> NodeKind {
        self.kind
    }

    /// The `m` the family was built with (see [`make_nodes`]).
    pub fn m(&self) -> usize {
        self.m
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

    pub fn bary_weights(&self) -> &[f64] {
        &self.bary_weights
    }

    pub fn diff_entry(&self, i: usize, j: usize) -> f64 {
        self.diff_matrix[i * self.len() + j]
    }

    /// Row `i` of the differentiation matrix.
    pub fn diff_row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.diff_matrix[i * n..(i + 1) * n]
    }

    /// Applies the differentiation matrix to nodal values.
    pub fn differentiate(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.len());
        (0..self.len())
            .map(|i| dot(self.diff_row(i), values))
            .collect()
    }

    /// Lagrange basis values `l_j(x)` at `x`, written into `out`.
    ///
    /// Exact unit vector when `x` coincides with a node.
    pub fn basis_into(&self, x: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.len());
        if let Some(k) = self.nodes.iter().position(|&t| t == x) {
            out.iter_mut().for_each(|v| *v = 0.0);
            out[k] = 1.0;
            return;
        }
        let mut denom = 0.0;
        for ((o, &t), &w) in out.iter_mut().zip(&self.nodes).zip(&self.bary_weights) {
            *o = w / (x - t);
            denom += *o;
        }
        out.iter_mut().for_each(|v| *v /= denom);
    }

    pub fn basis(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.basis_into(x, &mut out);
        out
    }

    /// Derivatives `l_j'(x)` of the Lagrange basis at `x`.
    pub fn basis_deriv_into(&self, x: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.len());
        if let Some(k) = self.nodes.iter().position(|&t| t == x) {
            for (j, o) in out.iter_mut().enumerate() {
                *o = self.diff_entry(k, j);
            }
            return;
        }
        // The derivative of an interpolant is itself interpolated exactly by
        // its nodal derivatives, so l_j'(x) = sum_i l_i(x) D_ij. Unlike the
        // closed form this does not cancel near a node.
        let mut l = vec![0.0; self.len()];
        self.basis_into(x, &mut l);
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, li) in l.iter().enumerate() {
            for (o, d) in out.iter_mut().zip(self.diff_row(i)) {
                *o += li * d;
            }
        }
    }

    /// Evaluates the interpolant of `values` at `x` (barycentric form).
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        let mut num = 0.0;
        let mut den = 0.0;
        for ((&t, &w), &v) in self.nodes.iter().zip(&self.bary_weights).zip(values) {
            if t == x {
                return v;
            }
            let c = w / (x - t);
            num += c * v;
            den += c;
        }
        num / den
    }
}

/// Gauss-Legendre quadrature weights on `[0, 1]` for a Gauss-Legendre family.
pub fn gauss_weights(family: &NodeFamily) -> Result<Vec<f64>> {
    if family.kind != NodeKind::GaussLegendre {
        return Err(Error::InvalidArgument(format!(
            "quadrature weights need gauss_legendre nodes, got {}",
            family.kind
        )));
    }
    let m = family.m;
    Ok(family
        .nodes
        .iter()
        .map(|&t| {
            let x = 2.0 * t - 1.0;
            let (_, dp) = legendre_with_derivative(m, x);
            // 2 / ((1 - x^2) P'(x)^2) on [-1, 1], halved for [0, 1].
            1.0 / ((1.0 - x * x) * dp * dp)
        })
        .collect())
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_rule(m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let family = make_nodes(NodeKind::GaussLegendre, m)?;
    let weights = gauss_weights(&family)?;
    Ok((family.nodes, weights))
}

/// Lebesgue constant of the family, estimated as the maximum of
/// `sum_j |l_j(t)|` over `samples` uniformly spaced points of `[0, 1]`.
pub fn lebesgue_constant(family: &NodeFamily, samples: usize) -> Result<f64> {
    if samples < 10 * family.len().max(1) || samples < 2 {
        return Err(Error::InvalidArgument(format!(
            "lebesgue_constant needs at least {} samples, got {samples}",
            10 * family.len()
        )));
    }
    let mut basis = vec![0.0; family.len()];
    let mut max = 0.0_f64;
    for k in 0..samples {
        let t = k as f64 / (samples - 1) as f64;
        family.basis_into(t, &mut basis);
        let s: f64 = basis.iter().map(|v| v.abs()).sum();
        max = max.max(s);
    }
    Ok(max)
}

/// Value and derivative of the Legendre polynomial `P_n` at `x` by the
/// three-term recurrence.
pub(crate) fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    let nf = n as f64;
    let dp = nf * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// Roots of `P_m` on `[-1, 1]` in increasing order, by Newton iteration
/// from Chebyshev-type initial guesses.
fn legendre_roots(m: usize) -> Vec<f64> {
    let mut roots = vec![0.0; m];
    let half = m.div_ceil(2);
    for i in 0..half {
        // Tricomi-style guess for the i-th largest root.
        let mut x = ((i as f64 + 0.75) * PI / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(m, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        roots[m - 1 - i] = x;
        roots[i] = -x;
    }
    if m % 2 == 1 {
        roots[m / 2] = 0.0;
    }
    roots
}

/// Enforces exact mirror symmetry `t_j + t_{n-1-j} = 1`.
fn symmetrize(mut nodes: Vec<f64>) -> Vec<f64> {
    let n = nodes.len();
    for j in 0..n / 2 {
        let lo = nodes[j];
        nodes[n - 1 - j] = 1.0 - lo;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.5;
    }
    nodes
}

fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    // Scale by the interval length factor 4 (capacity of [0,1]) to keep the
    // products away from underflow, then normalise by the largest entry.
    let mut w: Vec<f64> = (0..n)
        .map(|j| {
            let prod: f64 = (0..n)
                .filter(|&k| k != j)
                .map(|k| 4.0 * (nodes[j] - nodes[k]))
                .product();
            1.0 / prod
        })
        .collect();
    let scale = w.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    w.iter_mut().for_each(|v| *v /= scale);
    w
}

fn differentiation_matrix(nodes: &[f64], w: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let v = (w[j] / w[i]) / (nodes[i] - nodes[j]);
                d[i * n + j] = v;
                diag -= v;
            }
        }
        d[i * n + i] = diag;
    }
    d
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn reproduces_low_degree_polynomials(
            m in 1usize..30,
            kind_idx in 0usize..4,
            coeffs in proptest::collection::vec(-1.0f64..1.0, 30),
            seed in 0u64..1000,
        ) {
            use rand::{Rng, SeedableRng};
            let kind = NodeKind::ALL[kind_idx];
            // equidistant interpolation is too ill-conditioned beyond this
            let m = if kind == NodeKind::Equidistant { m.min(16) } else { m };
            let f = make_nodes(kind, m).unwrap();
            let deg = f.len() - 1;
            let poly = |x: f64| coeffs[..=deg].iter().rev().fold(0.0, |acc, c| acc * x + c);
            let vals: Vec<f64> = f.nodes().iter().map(|&t| poly(t)).collect();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..200 {
                let x: f64 = rng.gen();
                let err = (f.interpolate(&vals, x) - poly(x)).abs();
                prop_assert!(err <= 1e-11, "m={} kind={} err={}", m, kind, err);
            }
        }
    }
}
