//! The collocation system: unknown layout, affine side conditions, residual,
//! finite-difference Jacobian and a damped Newton solver.
//!
//! With `L` mesh intervals, degree `m` and `n_y` components the unknown is the
//! flat vector of `n_y * m * L` representation values followed by
//! `mu = (T, p)`. The residual has the same length: the equation
//! `y'(t_ij) - T G(y(t_ij + ./T), p)` at each of the `m * L` collocation
//! points, then one row per affine constraint.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nodes::{make_nodes, NodeFamily, NodeKind};
use crate::piecewise::{check_version, Mesh, PeriodicPiecewisePoly, Piecewise, PolyDocument};
use crate::problem::{DdeProblem, RescaledRhs};
use crate::FORMAT_VERSION;

/// Discrete unknown `(y^m, mu)` together with the collocation node kind the
/// equation is enforced at.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteState {
    pub poly: PeriodicPiecewisePoly,
    /// `(T, p)`.
    pub mu: Vec<f64>,
    pub collocation: NodeKind,
}

impl DiscreteState {
    pub fn new(poly: PeriodicPiecewisePoly, mu: Vec<f64>, collocation: NodeKind) -> Self {
        DiscreteState {
            poly,
            mu,
            collocation,
        }
    }

    pub fn period(&self) -> f64 {
        self.mu[0]
    }

    pub fn params(&self) -> &[f64] {
        &self.mu[1..]
    }

    pub fn mesh(&self) -> &Mesh {
        self.poly.mesh()
    }

    pub fn degree(&self) -> usize {
        self.poly.degree()
    }

    pub fn dim(&self) -> usize {
        self.poly.dim()
    }

    /// Number of collocation equations, `n_y * m * L`.
    pub fn n_profile(&self) -> usize {
        self.poly.values().len()
    }

    pub fn len(&self) -> usize {
        self.n_profile() + self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `y^{0,m} = y(0)`, the shared wrap value.
    pub fn boundary_value(&self) -> &[f64] {
        self.poly.node_value(0, 0)
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.len());
        x.extend_from_slice(self.poly.values());
        x.extend_from_slice(&self.mu);
        x
    }

    /// State of the same shape with the flat vector `x`.
    pub fn unflatten(&self, x: &[f64]) -> Result<Self> {
        if x.len() != self.len() {
            return Err(Error::InvalidArgument(format!(
                "flat vector has length {}, expected {}",
                x.len(),
                self.len()
            )));
        }
        let mut next = self.clone();
        let n = self.n_profile();
        next.poly.values_mut().copy_from_slice(&x[..n]);
        next.mu.copy_from_slice(&x[n..]);
        Ok(next)
    }

    /// Interpolates the profile onto another discretization, keeping `mu`.
    pub fn resample(&self, mesh: Mesh, degree: usize) -> Result<Self> {
        Ok(DiscreteState {
            poly: self.poly.resample(mesh, degree, self.poly.rep_kind())?,
            mu: self.mu.clone(),
            collocation: self.collocation,
        })
    }

    /// Whether every unknown is finite.
    pub fn is_finite(&self) -> bool {
        self.poly.values().iter().chain(&self.mu).all(|v| v.is_finite())
    }
}

/// JSON form of a [`DiscreteState`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionDocument {
    pub format_version: u32,
    pub problem: String,
    pub collocation: NodeKind,
    /// `(T, p)`.
    pub mu: Vec<f64>,
    pub poly: PolyDocument,
}

impl DiscreteState {
    pub fn to_document(&self, problem: &str) -> SolutionDocument {
        SolutionDocument {
            format_version: FORMAT_VERSION,
            problem: problem.to_string(),
            collocation: self.collocation,
            mu: self.mu.clone(),
            poly: self.poly.to_document(),
        }
    }

    pub fn from_document(doc: &SolutionDocument) -> Result<Self> {
        check_version(doc.format_version)?;
        if doc.mu.is_empty() {
            return Err(Error::InvalidArgument("solution has no period".into()));
        }
        Ok(DiscreteState {
            poly: PeriodicPiecewisePoly::from_document(&doc.poly)?,
            mu: doc.mu.clone(),
            collocation: doc.collocation,
        })
    }
}

/// One term `coef * y_component(time)` of an affine constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointTerm {
    pub time: f64,
    pub component: usize,
    pub coef: f64,
}

/// `sum coef * y_k(t*) + sum mu_coefs[l] * mu[l] + offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineRow {
    pub point_terms: Vec<PointTerm>,
    pub mu_coefs: Vec<f64>,
    pub offset: f64,
}

impl AffineRow {
    pub fn value(&self, state: &DiscreteState) -> f64 {
        let mut v = self.offset;
        for term in &self.point_terms {
            v += term.coef * state.poly.eval(term.time)[term.component];
        }
        for (c, mu) in self.mu_coefs.iter().zip(&state.mu) {
            v += c * mu;
        }
        v
    }

    /// Gradient with respect to the flat unknown.
    pub fn gradient(&self, state: &DiscreteState) -> Vec<f64> {
        let mut g = vec![0.0; state.len()];
        let dim = state.dim();
        for term in &self.point_terms {
            let (i, w) = state.poly.stencil(term.time);
            for (j, wj) in w.iter().enumerate() {
                g[state.poly.node_slot(i, j) * dim + term.component] += term.coef * wj;
            }
        }
        let n = state.n_profile();
        for (l, c) in self.mu_coefs.iter().enumerate() {
            g[n + l] += c;
        }
        g
    }
}

/// The `n_mu` affine side conditions `R_aff[y, mu] = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineConstraints {
    pub rows: Vec<AffineRow>,
}

impl AffineConstraints {
    /// Phase anchor `y_component(0) = anchor` and one pin `p_l = target_l`
    /// per parameter.
    pub fn phase_and_pins(component: usize, anchor: f64, targets: &[f64]) -> Self {
        let n_mu = 1 + targets.len();
        let mut rows = vec![AffineRow {
            point_terms: vec![PointTerm {
                time: 0.0,
                component,
                coef: 1.0,
            }],
            mu_coefs: vec![0.0; n_mu],
            offset: -anchor,
        }];
        for (l, &target) in targets.iter().enumerate() {
            let mut mu_coefs = vec![0.0; n_mu];
            mu_coefs[1 + l] = 1.0;
            rows.push(AffineRow {
                point_terms: Vec::new(),
                mu_coefs,
                offset: -target,
            });
        }
        AffineConstraints { rows }
    }

    /// Default conditions for `state`: phase anchor at the problem's
    /// equilibrium (or at the state's own `y(0)` when there is none) and
    /// parameters pinned to `targets`.
    pub fn default_for(problem: &DdeProblem, state: &DiscreteState, targets: &[f64]) -> Self {
        let anchor = problem
            .equilibrium()
            .map(|e| e[0])
            .unwrap_or_else(|| state.boundary_value()[0]);
        Self::phase_and_pins(0, anchor, targets)
    }

    /// Moves the parameter pins to new targets.
    pub fn retarget(&mut self, targets: &[f64]) {
        for (row, &t) in self.rows.iter_mut().skip(1).zip(targets) {
            row.offset = -t;
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn values(&self, state: &DiscreteState) -> Vec<f64> {
        self.rows.iter().map(|r| r.value(state)).collect()
    }
}

/// Newton solver controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonSettings {
    /// Max-norm of the flat residual accepted as converged.
    pub tol_residual: f64,
    /// Steps smaller than this (relative to `1 + |x|`) end the iteration.
    pub tol_step: f64,
    pub max_iter: usize,
    /// Smallest damping factor tried before a step is taken regardless.
    pub min_damping: f64,
    /// Relative finite-difference step, scaled by `max(1, |x_j|)`.
    pub fd_step: f64,
    /// Extra Newton steps after convergence, kept while each at least halves
    /// the residual.
    pub refine_steps: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            tol_residual: 1e-10,
            tol_step: 1e-12,
            max_iter: 25,
            min_damping: 1.0 / 64.0,
            fd_step: f64::EPSILON.sqrt(),
            refine_steps: 3,
        }
    }
}

impl NewtonSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tol_residual", self.tol_residual),
            ("tol_step", self.tol_step),
            ("min_damping", self.min_damping),
            ("fd_step", self.fd_step),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be positive".into()));
        }
        if self.min_damping > 1.0 {
            return Err(Error::InvalidArgument("min_damping must be <= 1".into()));
        }
        Ok(())
    }
}

/// Precomputed pieces of the collocation equations for one discretization.
struct CollocationRows<'a> {
    problem: &'a DdeProblem,
    cons: &'a AffineConstraints,
    family: NodeFamily,
    /// `deriv[j][k]`: derivative of representation basis `k` at collocation
    /// node `j` on the reference interval.
    deriv: Vec<Vec<f64>>,
}

impl<'a> CollocationRows<'a> {
    fn new(state: &DiscreteState, problem: &'a DdeProblem, cons: &'a AffineConstraints) -> Result<Self> {
        if state.dim() != problem.dim() {
            return Err(Error::InvalidArgument(format!(
                "state has {} components, {} expects {}",
                state.dim(),
                problem.name(),
                problem.dim()
            )));
        }
        if state.mu.len() != problem.n_mu() {
            return Err(Error::InvalidArgument(format!(
                "state has {} entries in (T, p), {} expects {}",
                state.mu.len(),
                problem.name(),
                problem.n_mu()
            )));
        }
        if cons.len() != problem.n_mu() {
            return Err(Error::InvalidArgument(format!(
                "{} affine constraints given, the system needs {}",
                cons.len(),
                problem.n_mu()
            )));
        }
        if cons.rows.iter().any(|r| r.mu_coefs.len() != problem.n_mu()) {
            return Err(Error::InvalidArgument(
                "constraint rows must have one mu coefficient per (T, p) entry".into(),
            ));
        }
        let family = make_nodes(state.collocation, state.degree())?;
        let rep = state.poly.rep_family();
        let deriv = family
            .nodes()
            .iter()
            .map(|&x| {
                let mut w = vec![0.0; rep.len()];
                rep.basis_deriv_into(x, &mut w);
                w
            })
            .collect();
        Ok(CollocationRows {
            problem,
            cons,
            family,
            deriv,
        })
    }

    /// The `n_y * m * L` equation rows.
    fn fde_rows(&self, state: &DiscreteState) -> Result<Vec<f64>> {
        let rhs = RescaledRhs::new(self.problem, &state.poly, &state.mu)?;
        let mesh = state.mesh();
        let dim = state.dim();
        let mut out = Vec::with_capacity(state.n_profile());
        for i in 0..mesh.intervals() {
            let h = mesh.width(i);
            for (j, &x) in self.family.nodes().iter().enumerate() {
                let g = rhs.eval_at(mesh.to_global(i, x))?;
                for (k, gk) in g.iter().enumerate() {
                    let mut d = 0.0;
                    for (l, w) in self.deriv[j].iter().enumerate() {
                        d += w * state.poly.node_value(i, l)[k];
                    }
                    out.push(d / h - gk);
                }
                debug_assert_eq!(g.len(), dim);
            }
        }
        Ok(out)
    }

    fn residual(&self, state: &DiscreteState) -> Result<Vec<f64>> {
        let mut r = self.fde_rows(state)?;
        r.extend(self.cons.values(state));
        Ok(r)
    }

    fn jacobian(&self, state: &DiscreteState, settings: &NewtonSettings) -> Result<DMatrix<f64>> {
        let n = state.len();
        let n_rows = state.n_profile();
        let base = self.fde_rows(state)?;
        let x = state.flatten();
        let columns: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let h = settings.fd_step * x[j].abs().max(1.0);
                let mut xp = x.clone();
                xp[j] += h;
                let h = xp[j] - x[j];
                let rows = self.fde_rows(&state.unflatten(&xp)?)?;
                Ok(rows.iter().zip(&base).map(|(a, b)| (a - b) / h).collect())
            })
            .collect::<Result<_>>()?;
        let mut jac = DMatrix::zeros(n, n);
        for (j, col) in columns.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                jac[(i, j)] = *v;
            }
        }
        for (r, row) in self.cons.rows.iter().enumerate() {
            for (j, g) in row.gradient(state).into_iter().enumerate() {
                jac[(n_rows + r, j)] = g;
            }
        }
        Ok(jac)
    }
}

/// Residual of the collocation system at `state`.
pub fn assemble_residual(state: &DiscreteState, problem: &DdeProblem, cons: &AffineConstraints) -> Result<Vec<f64>> {
    CollocationRows::new(state, problem, cons)?.residual(state)
}

/// Jacobian of the collocation system: forward differences for the equation
/// rows, exact coefficients for the affine rows.
pub fn assemble_jacobian(
    state: &DiscreteState,
    problem: &DdeProblem,
    cons: &AffineConstraints,
    settings: &NewtonSettings,
) -> Result<DMatrix<f64>> {
    CollocationRows::new(state, problem, cons)?.jacobian(state, settings)
}

/// Result of [`newton_solve`].
#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub state: DiscreteState,
    pub iterations: usize,
    /// Max-norm of the residual before the first step and after each step.
    pub residual_history: Vec<f64>,
}

impl NewtonOutcome {
    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().unwrap()
    }
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |a, x| if x.is_nan() { f64::NAN } else { a.max(x.abs()) })
}

/// Solves `J dx = -r` by LU with partial pivoting.
fn newton_direction(jac: DMatrix<f64>, r: &[f64]) -> Result<Vec<f64>> {
    let scale = jac.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let lu = jac.lu();
    let u = lu.u();
    for k in 0..u.nrows() {
        let pivot = u[(k, k)].abs();
        if !(pivot > 1e-14 * scale) {
            return Err(Error::SingularJacobian { column: k, pivot });
        }
    }
    let rhs = DVector::from_iterator(r.len(), r.iter().map(|v| -v));
    let dx = lu
        .solve(&rhs)
        .ok_or(Error::SingularJacobian { column: 0, pivot: 0.0 })?;
    Ok(dx.iter().copied().collect())
}

/// Damped Newton iteration on the collocation system.
///
/// A full step is tried first; the damping factor is halved while the
/// residual max-norm does not decrease, down to `min_damping`, whose step is
/// then taken as is. Trial points with a non-positive period or a failing
/// evaluation are treated like an increase.
pub fn newton_solve(
    init: &DiscreteState,
    problem: &DdeProblem,
    cons: &AffineConstraints,
    settings: &NewtonSettings,
) -> Result<NewtonOutcome> {
    settings.validate()?;
    if !init.is_finite() {
        return Err(Error::InvalidArgument("initial state is not finite".into()));
    }
    if !(init.period() > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "initial period must be positive, got {}",
            init.period()
        )));
    }
    let sys = CollocationRows::new(init, problem, cons)?;
    let mut state = init.clone();
    let mut r = sys.residual(&state)?;
    let mut norm = max_norm(&r);
    if !norm.is_finite() {
        return Err(Error::NonFiniteResidual);
    }
    let mut history = vec![norm];
    let mut iterations = 0;
    let mut converged = norm <= settings.tol_residual;
    let mut refine_left = settings.refine_steps;

    // residuals this close to roundoff are not worth refining
    let floor = |s: &DiscreteState| 64.0 * f64::EPSILON * (1.0 + max_norm(&s.flatten()));
    while !converged || (refine_left > 0 && norm > floor(&state)) {
        if iterations >= settings.max_iter {
            if converged {
                break;
            }
            return Err(Error::MaxIterExceeded {
                iterations,
                residual: norm,
            });
        }
        let jac = sys.jacobian(&state, settings)?;
        let dx = match newton_direction(jac, &r) {
            Ok(dx) => dx,
            Err(e) if converged => {
                log::debug!("refinement stopped: {e}");
                break;
            }
            Err(e) => return Err(e),
        };
        let x = state.flatten();
        let mut lambda = 1.0;
        let (next, next_r, next_norm) = loop {
            let xt: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + lambda * d).collect();
            let trial = state.unflatten(&xt)?;
            let last_try = lambda <= settings.min_damping;
            let eval = if trial.period() > 0.0 {
                sys.residual(&trial)
            } else {
                Err(Error::InvalidArgument("non-positive period".into()))
            };
            match eval {
                Ok(rt) => {
                    let nt = max_norm(&rt);
                    if nt.is_finite() && (nt < norm || last_try) {
                        break (trial, rt, nt);
                    }
                    if last_try {
                        return Err(Error::NonFiniteResidual);
                    }
                }
                Err(e) if last_try => return Err(e),
                Err(_) => {}
            }
            lambda *= 0.5;
        };
        if converged && next_norm > 0.5 * norm {
            // refinement no longer helps
            break;
        }
        iterations += 1;
        let step = lambda * max_norm(&dx);
        log::debug!("newton it {iterations}: |r| = {next_norm:e}, damping {lambda}, |dx| = {step:e}");
        state = next;
        r = next_r;
        norm = next_norm;
        history.push(norm);
        if converged {
            refine_left -= 1;
            continue;
        }
        if norm <= settings.tol_residual {
            converged = true;
            continue;
        }
        if step <= settings.tol_step * (1.0 + max_norm(&x)) {
            return Err(Error::MaxIterExceeded {
                iterations,
                residual: norm,
            });
        }
    }
    Ok(NewtonOutcome {
        state,
        iterations,
        residual_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::mackey_glass;

    fn equilibrium_state(l: usize, m: usize, period: f64, tau: f64) -> DiscreteState {
        let poly = PeriodicPiecewisePoly::constant(Mesh::uniform(l).unwrap(), m, NodeKind::ChebyshevLobatto, &[1.0])
            .unwrap();
        DiscreteState::new(poly, vec![period, tau], NodeKind::GaussLegendre)
    }

    #[test]
    fn flatten_round_trip() {
        let s = equilibrium_state(3, 4, 1.5, 0.8);
        let mut x = s.flatten();
        x[5] = 0.123456789;
        x[12] = 2.0;
        let t = s.unflatten(&x).unwrap();
        assert_eq!(t.flatten(), x);
        assert_eq!(t.period(), 2.0);
        assert!(s.unflatten(&x[1..]).is_err());
    }

    #[test]
    fn square_system() {
        let mg = mackey_glass();
        for (l, m) in [(1, 2), (3, 5), (11, 4), (2, 9)] {
            let s = equilibrium_state(l, m, 1.6, 0.5);
            let cons = AffineConstraints::phase_and_pins(0, 1.0, &[0.5]);
            assert_eq!(assemble_residual(&s, &mg, &cons).unwrap().len(), s.len());
            assert_eq!(s.len(), m * l + 2);
        }
    }

    #[test]
    fn equilibrium_has_zero_residual() {
        let mg = mackey_glass();
        let s = equilibrium_state(4, 6, 2.0, 0.7);
        let cons = AffineConstraints::phase_and_pins(0, 1.0, &[0.7]);
        let r = assemble_residual(&s, &mg, &cons).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-13), "{r:?}");
    }

    #[test]
    fn mismatched_constraints_rejected() {
        let mg = mackey_glass();
        let s = equilibrium_state(2, 3, 2.0, 0.7);
        let cons = AffineConstraints::phase_and_pins(0, 1.0, &[]);
        assert!(matches!(assemble_residual(&s, &mg, &cons), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn affine_rows_match_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let s = equilibrium_state(3, 5, 2.0, 0.7);
        let row = AffineRow {
            point_terms: vec![
                PointTerm { time: 0.0, component: 0, coef: 1.0 },
                PointTerm { time: 0.41, component: 0, coef: -2.5 },
            ],
            mu_coefs: vec![0.3, 1.0],
            offset: 0.2,
        };
        let g = row.gradient(&s);
        let x = s.flatten();
        for j in 0..x.len() {
            let mut xp = x.clone();
            xp[j] += 1e-6;
            let fd = (row.value(&s.unflatten(&xp).unwrap()) - row.value(&s)) / 1e-6;
            assert!((fd - g[j]).abs() < 1e-8, "column {j}: {fd} vs {}", g[j]);
        }
        // affinity: R(x + a) + R(x + b) = R(x) + R(x + a + b)
        let a: Vec<f64> = (0..x.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..x.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let at = |d: &[&[f64]]| {
            let xs: Vec<f64> = (0..x.len()).map(|i| x[i] + d.iter().map(|v| v[i]).sum::<f64>()).collect();
            row.value(&s.unflatten(&xs).unwrap())
        };
        let lhs = at(&[&a]) + at(&[&b]);
        let rhs = at(&[]) + at(&[&a, &b]);
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn uniform_shift_direction_at_equilibrium() {
        let mg = mackey_glass();
        let period = 1.7;
        let s = equilibrium_state(3, 4, period, 0.6);
        let cons = AffineConstraints::phase_and_pins(0, 1.0, &[0.6]);
        let jac = assemble_jacobian(&s, &mg, &cons, &NewtonSettings::default()).unwrap();
        let n = s.n_profile();
        let shift = DVector::from_iterator(s.len(), (0..s.len()).map(|j| if j < n { 1.0 } else { 0.0 }));
        let jv = &jac * shift;
        // d/dc of T (a c + b c / (1 + c^10)) at c = 1, with a sign flip
        // because the row is y' - T G.
        let h = 1e-7;
        let g = |c: f64| period * (-c + 2.0 * c / (1.0 + c.powi(10)));
        let oracle = -(g(1.0 + h) - g(1.0 - h)) / (2.0 * h);
        assert!((oracle - 5.0 * period).abs() < 1e-6);
        for i in 0..n {
            assert!((jv[i] - 5.0 * period).abs() < 1e-5, "row {i}: {}", jv[i]);
        }
    }

    #[test]
    fn settings_validation() {
        assert!(NewtonSettings::default().validate().is_ok());
        let bad = NewtonSettings {
            tol_residual: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = NewtonSettings {
            max_iter: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn negative_period_rejected() {
        let mg = mackey_glass();
        let s = equilibrium_state(2, 3, -1.0, 0.7);
        let cons = AffineConstraints::phase_and_pins(0, 1.0, &[0.7]);
        assert!(matches!(
            newton_solve(&s, &mg, &cons, &NewtonSettings::default()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn converged_state_is_a_fixed_point() {
        let mg = mackey_glass();
        let s = equilibrium_state(2, 3, 1.0, 0.7);
        let cons = AffineConstraints::phase_and_pins(0, 1.0, &[0.7]);
        let out = newton_solve(&s, &mg, &cons, &NewtonSettings::default()).unwrap();
        assert_eq!(out.iterations, 0, "{:?}", out.residual_history);
        assert_eq!(out.state, s);
    }
}
