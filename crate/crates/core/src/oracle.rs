//! Fixed-point check of a discrete state.
//!
//! For `x = (v, v0, mu)` the operator `Phi_m` projects `t -> G(v_t, mu)` onto
//! piecewise polynomials of degree `m - 1` through the collocation nodes
//! (call it `w`) and integrates it back:
//!
//! ```text
//! Phi_m(x) = ( t -> v0 + int_0^t w - t int_0^1 w,   v0 + int_0^1 w,   mu + R_aff[v, mu] )
//! ```
//!
//! A state solves the collocation system exactly when it is a fixed point of
//! `Phi_m`. This path shares only the right-hand side and the node
//! construction with the solver: no differentiation matrix and no residual
//! assembly are involved.

use serde::{Deserialize, Serialize};

use crate::collocation::{AffineConstraints, DiscreteState};
use crate::error::Result;
use crate::piecewise::{try_project, Piecewise, PiecewiseProjection};
use crate::problem::{DdeProblem, RescaledRhs};

/// Number of uniformly spaced points the profile defect is measured on.
pub const DEFECT_GRID: usize = 2001;

/// Distances between a state and its image under `Phi_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointDefect {
    /// `sup_t |v(t) - Phi_m(x)_1(t)|` over the grid.
    pub sup_defect_v: f64,
    /// `|int_0^1 w|`, the defect of the boundary-value component.
    pub defect_v0: f64,
    /// Max-norm of `R_aff[v, mu]`.
    pub defect_mu: f64,
}

impl FixedPointDefect {
    pub fn max(&self) -> f64 {
        self.sup_defect_v.max(self.defect_v0).max(self.defect_mu)
    }
}

/// `w = P_m G(v_., mu)` on the state's mesh and collocation nodes.
pub fn projected_rhs(state: &DiscreteState, problem: &DdeProblem) -> Result<PiecewiseProjection> {
    let rhs = RescaledRhs::new(problem, &state.poly, &state.mu)?;
    try_project(|t| rhs.eval_at(t), state.mesh(), state.degree(), state.collocation)
}

pub fn phi_m_defect(state: &DiscreteState, problem: &DdeProblem, cons: &AffineConstraints) -> Result<FixedPointDefect> {
    phi_m_defect_on_grid(state, problem, cons, DEFECT_GRID)
}

pub fn phi_m_defect_on_grid(
    state: &DiscreteState,
    problem: &DdeProblem,
    cons: &AffineConstraints,
    grid: usize,
) -> Result<FixedPointDefect> {
    let w = projected_rhs(state, problem)?;
    let mesh = state.mesh();
    let breaks = mesh.breaks();
    let dim = state.dim();

    // Integrals over whole intervals, accumulated left to right.
    let mut prefix = vec![vec![0.0; dim]];
    for i in 0..mesh.intervals() {
        let piece = w.integrate(breaks[i], breaks[i + 1])?;
        let last = prefix.last().unwrap();
        prefix.push(last.iter().zip(&piece).map(|(a, b)| a + b).collect());
    }
    let total = prefix.last().unwrap().clone();
    let v0 = state.boundary_value().to_vec();

    let mut sup = 0.0_f64;
    let mut v = vec![0.0; dim];
    for k in 0..grid {
        let t = k as f64 / (grid - 1) as f64;
        let (i, s) = if k == grid - 1 {
            (mesh.intervals() - 1, 1.0)
        } else {
            mesh.locate(t)
        };
        let partial = w.integrate(breaks[i], s)?;
        state.poly.eval_into(t, &mut v);
        for c in 0..dim {
            let phi = v0[c] + prefix[i][c] + partial[c] - s * total[c];
            sup = sup.max((v[c] - phi).abs());
        }
    }
    let defect_v0 = total.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    let defect_mu = cons
        .values(state)
        .iter()
        .fold(0.0_f64, |a, x| a.max(x.abs()));
    Ok(FixedPointDefect {
        sup_defect_v: sup,
        defect_v0,
        defect_mu,
    })
}
