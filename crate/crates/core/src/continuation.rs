//! Starting guesses near a Hopf bifurcation and natural-parameter
//! continuation of periodic orbits.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::analysis::{residual_err, DEFAULT_ERR_GRID};
use crate::collocation::{newton_solve, AffineConstraints, DiscreteState, NewtonSettings, SolutionDocument};
use crate::error::{Error, Result};
use crate::nodes::NodeKind;
use crate::oracle::phi_m_defect;
use crate::piecewise::{check_version, Mesh, PeriodicPiecewisePoly};
use crate::problem::{DdeProblem, MACKEY_GLASS_A, MACKEY_GLASS_B, MACKEY_GLASS_C};

/// Parameter offset from the Hopf point at which the first orbit is sought.
pub const DEFAULT_HOPF_OFFSET: f64 = 1e-3;
/// Amplitude of the sinusoidal starting guess.
pub const DEFAULT_HOPF_AMPLITUDE: f64 = 0.01;
/// How many times a failing continuation step is halved before giving up.
pub const MAX_STEP_HALVINGS: usize = 6;
/// Orbits with a smaller peak-to-peak size count as the equilibrium.
pub const COLLAPSE_AMPLITUDE: f64 = 1e-8;

/// Hopf point of a scalar delay equation linearized at an equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopfData {
    pub tau_hopf: f64,
    /// Angular frequency of the emerging oscillation (unscaled time).
    pub omega: f64,
    pub equilibrium: Vec<f64>,
}

impl HopfData {
    /// Period `2 pi / omega` of the emerging orbit.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }
}

/// Smallest positive delay `tau` and frequency `omega > 0` with
/// `i omega = alpha + beta exp(-i omega tau)`, the purely imaginary root of
/// the characteristic equation of `y'(t) = alpha y(t) + beta y(t - tau)`.
///
/// `omega = sqrt(beta^2 - alpha^2)` follows from taking moduli; `tau` is
/// found by bisection on the real part over the half-period where the
/// imaginary part has the right sign.
pub fn scalar_hopf(alpha: f64, beta: f64) -> Result<(f64, f64)> {
    if !(beta.abs() > alpha.abs()) {
        return Err(Error::NoHopf { alpha, beta });
    }
    let omega = (beta * beta - alpha * alpha).sqrt();
    // Need cos(omega tau) = -alpha / beta and sin(omega tau) = -omega / beta.
    // On (0, pi) the sine is positive (beta < 0); on (pi, 2 pi) negative.
    let (mut lo, mut hi) = if beta < 0.0 { (0.0, PI) } else { (PI, 2.0 * PI) };
    let real = |s: f64| alpha + beta * s.cos();
    let f_lo = real(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (real(mid) > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 {
            break;
        }
    }
    let phase = 0.5 * (lo + hi);
    Ok((omega, phase / omega))
}

/// Hopf point of the Mackey-Glass equation at the equilibrium `y = 1`.
pub fn mackey_glass_hopf() -> Result<HopfData> {
    // h(x) = x / (1 + x^c), h'(1) = (2 - c) / 4
    let slope = (2.0 - MACKEY_GLASS_C) / 4.0;
    let (omega, tau_hopf) = scalar_hopf(MACKEY_GLASS_A, MACKEY_GLASS_B * slope)?;
    Ok(HopfData {
        tau_hopf,
        omega,
        equilibrium: vec![1.0],
    })
}

/// Hopf point of `y'(t) = -y(t - tau - y(t) - y(t)^2)` at `y = 0`, where
/// the linearization is `y'(t) = -y(t - tau)`.
pub fn sd_quadratic_hopf() -> Result<HopfData> {
    let (omega, tau_hopf) = scalar_hopf(0.0, -1.0)?;
    Ok(HopfData {
        tau_hopf,
        omega,
        equilibrium: vec![0.0],
    })
}

/// Sinusoidal perturbation `ybar + amplitude sin(2 pi t)` of the equilibrium
/// with period `2 pi / omega` and parameter `tau_hopf + DEFAULT_HOPF_OFFSET`.
///
/// Zero amplitude gives the equilibrium itself.
pub fn hopf_initial_guess(h: &HopfData, amplitude: f64, mesh: Mesh, m: usize) -> Result<DiscreteState> {
    hopf_initial_guess_at(h, amplitude, mesh, m, h.tau_hopf + DEFAULT_HOPF_OFFSET)
}

/// [`hopf_initial_guess`] with an explicit parameter value.
pub fn hopf_initial_guess_at(h: &HopfData, amplitude: f64, mesh: Mesh, m: usize, parameter: f64) -> Result<DiscreteState> {
    if !(amplitude >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "amplitude must be non-negative, got {amplitude}"
        )));
    }
    let eq = h.equilibrium.clone();
    let poly = PeriodicPiecewisePoly::from_fn(mesh, m, eq.len(), NodeKind::ChebyshevLobatto, |t| {
        let s = amplitude * (2.0 * PI * t).sin();
        eq.iter().map(|e| e + s).collect()
    })?;
    Ok(DiscreteState::new(
        poly,
        vec![h.period(), parameter],
        NodeKind::GaussLegendre,
    ))
}

/// One converged point on a branch.
#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub parameter: f64,
    pub state: DiscreteState,
    /// `max y - min y` of the first component over a 2001-point grid.
    pub amplitude: f64,
    pub period: f64,
    pub residual_err: f64,
    pub newton_iters: usize,
    pub phi_defect: f64,
}

/// Peak-to-peak size of the first component.
pub fn amplitude(state: &DiscreteState) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..2001 {
        let y = state.poly.eval_scalar(k as f64 / 2000.0);
        lo = lo.min(y);
        hi = hi.max(y);
    }
    hi - lo
}

fn branch_point(state: DiscreteState, problem: &DdeProblem, cons: &AffineConstraints, iters: usize) -> Result<BranchPoint> {
    let err = residual_err(&state, problem, DEFAULT_ERR_GRID)?;
    let defect = phi_m_defect(&state, problem, cons)?;
    Ok(BranchPoint {
        parameter: state.params()[0],
        amplitude: amplitude(&state),
        period: state.period(),
        residual_err: err,
        newton_iters: iters,
        phi_defect: defect.max(),
        state,
    })
}

/// Solves at a single parameter value with the default constraints.
pub fn solve_at(init: &DiscreteState, problem: &DdeProblem, parameter: f64, settings: &NewtonSettings) -> Result<BranchPoint> {
    let mut guess = init.clone();
    guess.mu[1] = parameter;
    let cons = AffineConstraints::default_for(problem, init, &[parameter]);
    let out = newton_solve(&guess, problem, &cons, settings)?;
    branch_point(out.state, problem, &cons, out.iterations)
}

/// Natural-parameter continuation of the first parameter from `p_from` to
/// `p_to` in `steps` uniform steps. Each step starts Newton from the previous
/// orbit; a failing step is halved up to [`MAX_STEP_HALVINGS`] times.
/// Returns the converged point at every step target.
pub fn continue_branch(
    start: &DiscreteState,
    problem: &DdeProblem,
    p_from: f64,
    p_to: f64,
    steps: usize,
    settings: &NewtonSettings,
) -> Result<Vec<BranchPoint>> {
    if steps == 0 {
        return Err(Error::InvalidArgument("continuation needs steps >= 1".into()));
    }
    if problem.n_params() < 1 {
        return Err(Error::InvalidArgument(format!(
            "{} has no parameter to continue in",
            problem.name()
        )));
    }
    let mut points: Vec<BranchPoint> = Vec::with_capacity(steps);
    let mut current = start.clone();
    let oscillating = amplitude(start) > COLLAPSE_AMPLITUDE;
    let mut last_good: Option<BranchPoint> = None;
    current.mu[1] = p_from;
    let mut p_cur = p_from;
    let full = (p_to - p_from) / steps as f64;
    for k in 1..=steps {
        let target = if k == steps { p_to } else { p_from + k as f64 * full };
        let mut step = target - p_cur;
        let mut halvings = 0;
        loop {
            let next_p = if (target - p_cur).abs() <= step.abs() { target } else { p_cur + step };
            let attempt = solve_at(&current, problem, next_p, settings).and_then(|point| {
                // the constant solution also satisfies the phase anchor
                if oscillating && point.amplitude <= COLLAPSE_AMPLITUDE {
                    Err(Error::CollapsedToEquilibrium { parameter: next_p })
                } else {
                    Ok(point)
                }
            });
            match attempt {
                Ok(point) => {
                    log::info!(
                        "p = {next_p:.6}: T = {:.6}, amplitude = {:.6}, {} iterations",
                        point.period,
                        point.amplitude,
                        point.newton_iters
                    );
                    current = point.state.clone();
                    p_cur = next_p;
                    last_good = Some(point.clone());
                    if next_p == target {
                        points.push(point);
                        break;
                    }
                }
                Err(e) => {
                    halvings += 1;
                    if halvings > MAX_STEP_HALVINGS {
                        return Err(Error::StepFailure {
                            parameter: next_p,
                            source: Box::new(e),
                            last: last_good.map(Box::new),
                        });
                    }
                    log::debug!("step to {next_p} failed ({e}), halving");
                    step *= 0.5;
                }
            }
        }
    }
    Ok(points)
}

/// Bundled starting guesses for [`crate::problem::sd_quadratic`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuessFile {
    pub format_version: u32,
    pub description: String,
    pub solutions: Vec<SolutionDocument>,
}

const SD_QUADRATIC_GUESSES: &str = include_str!("../data/sd_quadratic_guess.json");

/// Parameter values for which a bundled `sd_quadratic` guess exists.
pub fn sd_quadratic_guess_parameters() -> Result<Vec<f64>> {
    let file: GuessFile = serde_json::from_str(SD_QUADRATIC_GUESSES)?;
    Ok(file.solutions.iter().map(|s| s.mu[1]).collect())
}

/// Coarse (`L = 12`, `m = 5`) periodic orbit of `sd_quadratic` at `tau`, one
/// of the bundled parameter values.
pub fn sd_quadratic_guess(tau: f64) -> Result<DiscreteState> {
    let file: GuessFile = serde_json::from_str(SD_QUADRATIC_GUESSES)?;
    check_version(file.format_version)?;
    let doc = file
        .solutions
        .iter()
        .find(|s| (s.mu[1] - tau).abs() < 1e-12)
        .ok_or_else(|| {
            Error::InvalidArgument(format!("no bundled sd_quadratic guess for tau = {tau}"))
        })?;
    DiscreteState::from_document(doc)
}

/// Resamples a state to `(mesh, m)` and re-converges it at its parameter.
pub fn refine(state: &DiscreteState, problem: &DdeProblem, mesh: Mesh, m: usize, settings: &NewtonSettings) -> Result<BranchPoint> {
    let guess = state.resample(mesh, m)?;
    solve_at(&guess, problem, state.params()[0], settings)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mackey_glass_hopf_point() {
        let h = mackey_glass_hopf().unwrap();
        assert!((h.tau_hopf - 0.4708).abs() < 5e-4);
        assert!((h.omega - 15f64.sqrt()).abs() < 1e-12);
        // plug back into i w = a + b h'(1) e^{-i w tau}
        let beta = -4.0;
        let re = -1.0 + beta * (h.omega * h.tau_hopf).cos();
        let im = h.omega + beta * (h.omega * h.tau_hopf).sin();
        assert!(re.abs() < 1e-10 && im.abs() < 1e-10, "{re} {im}");
        assert!((h.period() - 1.6223).abs() < 1e-4);
    }

    #[test]
    fn no_hopf_when_delay_term_is_weak() {
        assert!(matches!(scalar_hopf(-1.0, -0.5), Err(Error::NoHopf { .. })));
        assert!(matches!(scalar_hopf(-1.0, 1.0), Err(Error::NoHopf { .. })));
    }

    #[test]
    fn positive_feedback_hopf() {
        // beta > 0: phase in (pi, 2 pi)
        let (w, tau) = scalar_hopf(0.5, 2.0).unwrap();
        let re = 0.5 + 2.0 * (w * tau).cos();
        let im = w + 2.0 * (w * tau).sin();
        assert!(re.abs() < 1e-12 && im.abs() < 1e-12);
    }

    #[test]
    fn sd_quadratic_hopf_point() {
        let h = sd_quadratic_hopf().unwrap();
        assert!((h.tau_hopf - PI / 2.0).abs() < 1e-12);
        assert!((h.omega - 1.0).abs() < 1e-15);
    }

    #[test]
    fn initial_guess_shape() {
        let h = mackey_glass_hopf().unwrap();
        let s = hopf_initial_guess(&h, 0.01, Mesh::uniform(11).unwrap(), 4).unwrap();
        assert_eq!(s.len(), 46);
        assert!((s.period() - 2.0 * PI / 15f64.sqrt()).abs() < 1e-12);
        assert!((s.params()[0] - h.tau_hopf - 1e-3).abs() < 1e-15);
        let dev = s.poly.values().iter().fold(0.0_f64, |a, v| a.max((v - 1.0).abs()));
        assert!(dev <= 0.01 + 1e-15 && dev > 0.0099);

        let flat = hopf_initial_guess(&h, 0.0, Mesh::uniform(3).unwrap(), 4).unwrap();
        assert!(flat.poly.values().iter().all(|&v| v == 1.0));
        assert!(hopf_initial_guess(&h, -0.1, Mesh::uniform(3).unwrap(), 4).is_err());
    }

    #[test]
    fn bundled_guesses_load() {
        let ps = sd_quadratic_guess_parameters().unwrap();
        assert!(ps.contains(&0.95) && ps.contains(&1.1));
        let g = sd_quadratic_guess(0.95).unwrap();
        assert_eq!(g.mesh().intervals(), 12);
        assert_eq!(g.degree(), 5);
        assert!(sd_quadratic_guess(0.5).is_err());
    }
}
