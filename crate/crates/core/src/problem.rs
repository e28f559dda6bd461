//! Right-hand sides of functional differential equations `y'(t) = G(y_t, p)`
//! and their rescaled-time form `y'(t) = T G(y(t + ./T), p)` on period one.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::piecewise::PeriodicPiecewisePoly;

/// History segment `theta -> y(t + theta)` handed to a right-hand side.
pub trait History {
    fn dim(&self) -> usize;

    fn eval_into(&self, theta: f64, out: &mut [f64]);

    fn eval(&self, theta: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(theta, &mut out);
        out
    }

    /// First component, the common case for scalar equations.
    fn scalar(&self, theta: f64) -> f64 {
        self.eval(theta)[0]
    }
}

/// History given by a closure, mostly for tests.
pub struct FnHistory<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(f64) -> Vec<f64>> FnHistory<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnHistory { dim, f }
    }
}

impl<F: Fn(f64) -> Vec<f64>> History for FnHistory<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_into(&self, theta: f64, out: &mut [f64]) {
        out.copy_from_slice(&(self.f)(theta));
    }
}

/// Scalar history `theta -> f(theta)`.
pub fn scalar_history<F: Fn(f64) -> f64>(f: F) -> FnHistory<impl Fn(f64) -> Vec<f64>> {
    FnHistory::new(1, move |theta| vec![f(theta)])
}

pub type RhsFn = dyn Fn(&dyn History, &[f64]) -> Result<Vec<f64>> + Send + Sync;
pub type MaxDelayFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
/// Discrete delay as a function of the current state and the parameters.
pub type DelayFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

/// A functional differential equation `y'(t) = G(y_t, p)` in unscaled time.
///
/// The right-hand side reads the history only through the [`History`] it is
/// given and must be deterministic.
#[derive(Clone)]
pub struct DdeProblem {
    name: String,
    dim: usize,
    n_params: usize,
    rhs: Arc<RhsFn>,
    max_delay: Arc<MaxDelayFn>,
    delay: Option<Arc<DelayFn>>,
    equilibrium: Option<Vec<f64>>,
    default_params: Option<Vec<f64>>,
}

impl fmt::Debug for DdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DdeProblem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("n_params", &self.n_params)
            .field("equilibrium", &self.equilibrium)
            .finish_non_exhaustive()
    }
}

impl DdeProblem {
    pub fn new<F>(name: impl Into<String>, dim: usize, n_params: usize, max_delay: f64, rhs: F) -> Self
    where
        F: Fn(&dyn History, &[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
    {
        DdeProblem {
            name: name.into(),
            dim,
            n_params,
            rhs: Arc::new(rhs),
            max_delay: Arc::new(move |_| max_delay),
            delay: None,
            equilibrium: None,
            default_params: None,
        }
    }

    /// Parameter-dependent bound on the delays.
    pub fn with_max_delay<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        self.max_delay = Arc::new(f);
        self
    }

    /// Declares the (single) discrete delay `r(y(t), p)`, used by the
    /// circle-map diagnostic.
    pub fn with_delay<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        self.delay = Some(Arc::new(f));
        self
    }

    pub fn with_equilibrium(mut self, eq: Vec<f64>) -> Self {
        self.equilibrium = Some(eq);
        self
    }

    pub fn with_default_params(mut self, p: Vec<f64>) -> Self {
        self.default_params = Some(p);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    /// Number of scalar unknowns besides the profile, `1 + n_params`.
    pub fn n_mu(&self) -> usize {
        1 + self.n_params
    }

    pub fn max_delay(&self, p: &[f64]) -> f64 {
        (self.max_delay)(p)
    }

    pub fn equilibrium(&self) -> Option<&[f64]> {
        self.equilibrium.as_deref()
    }

    pub fn default_params(&self) -> Option<&[f64]> {
        self.default_params.as_deref()
    }

    pub fn delay(&self, y: &[f64], p: &[f64]) -> Option<f64> {
        self.delay.as_ref().map(|r| r(y, p))
    }

    /// `G(history, p)`.
    pub fn rhs(&self, history: &dyn History, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() != self.n_params {
            return Err(Error::InvalidArgument(format!(
                "{} expects {} parameters, got {}",
                self.name,
                self.n_params,
                p.len()
            )));
        }
        (self.rhs)(history, p)
    }
}

/// History `theta -> v(t + theta / T)` of a period-one profile.
pub struct RescaledHistory<'a> {
    poly: &'a PeriodicPiecewisePoly,
    t: f64,
    period: f64,
}

impl History for RescaledHistory<'_> {
    fn dim(&self) -> usize {
        crate::piecewise::Piecewise::dim(self.poly)
    }

    fn eval_into(&self, theta: f64, out: &mut [f64]) {
        self.poly.eval_into(self.t + theta / self.period, out);
    }

    fn scalar(&self, theta: f64) -> f64 {
        self.poly.eval_scalar(self.t + theta / self.period)
    }
}

/// `G(v_t, mu) = T G_FDE(v(t + ./T), p)` with `mu = (T, p)`.
pub struct RescaledRhs<'a> {
    problem: &'a DdeProblem,
    poly: &'a PeriodicPiecewisePoly,
    mu: &'a [f64],
}

impl<'a> RescaledRhs<'a> {
    pub fn new(problem: &'a DdeProblem, poly: &'a PeriodicPiecewisePoly, mu: &'a [f64]) -> Result<Self> {
        if mu.len() != problem.n_mu() {
            return Err(Error::InvalidArgument(format!(
                "expected {} entries in (T, p), got {}",
                problem.n_mu(),
                mu.len()
            )));
        }
        if !(mu[0] > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "period must be positive, got {}",
                mu[0]
            )));
        }
        Ok(RescaledRhs { problem, poly, mu })
    }

    pub fn period(&self) -> f64 {
        self.mu[0]
    }

    pub fn history_at(&self, t: f64) -> RescaledHistory<'a> {
        RescaledHistory {
            poly: self.poly,
            t,
            period: self.mu[0],
        }
    }

    /// Unscaled `G_FDE(v(t + ./T), p)`.
    pub fn unscaled_at(&self, t: f64) -> Result<Vec<f64>> {
        self.problem.rhs(&self.history_at(t), &self.mu[1..])
    }

    pub fn eval_at(&self, t: f64) -> Result<Vec<f64>> {
        let mut g = self.unscaled_at(t)?;
        let period = self.mu[0];
        g.iter_mut().for_each(|v| *v *= period);
        Ok(g)
    }
}

/// Mackey-Glass coefficients `a`, `b`, `c`.
pub const MACKEY_GLASS_A: f64 = -1.0;
pub const MACKEY_GLASS_B: f64 = 2.0;
pub const MACKEY_GLASS_C: f64 = 10.0;

/// `y'(t) = a y(t) + b y(t - tau) / (1 + y(t - tau)^c)` with `a = -1`,
/// `b = 2`, `c = 10` and the delay `tau` as the only parameter. The
/// equilibrium is `y = 1`.
pub fn mackey_glass() -> DdeProblem {
    DdeProblem::new("mackey_glass", 1, 1, 0.0, |h, p| {
        let tau = p[0];
        if !(tau > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "mackey_glass needs tau > 0, got {tau}"
            )));
        }
        let now = h.scalar(0.0);
        let lag = h.scalar(-tau);
        Ok(vec![
            MACKEY_GLASS_A * now + MACKEY_GLASS_B * lag / (1.0 + lag.powi(MACKEY_GLASS_C as i32)),
        ])
    })
    .with_max_delay(|p| p[0])
    .with_delay(|_, p| p[0])
    .with_equilibrium(vec![1.0])
    .with_default_params(vec![1.0])
}

/// Amplitude bound used for the declared maximal delay of [`sd_quadratic`].
pub const SD_QUADRATIC_AMPLITUDE_BOUND: f64 = 2.0;

/// `y'(t) = -y(t - tau - y(t) - y(t)^2)` with parameter `tau`.
pub fn sd_quadratic() -> DdeProblem {
    sd_quadratic_with_bound(SD_QUADRATIC_AMPLITUDE_BOUND)
}

/// [`sd_quadratic`] with a custom amplitude bound `B` in the declared
/// maximal delay `tau + B + B^2`. Larger delays still evaluate fine because
/// the history is periodic.
pub fn sd_quadratic_with_bound(bound: f64) -> DdeProblem {
    DdeProblem::new("sd_quadratic", 1, 1, 0.0, |h, p| {
        let now = h.scalar(0.0);
        let delay = p[0] + now + now * now;
        if delay < 0.0 {
            return Err(Error::NegativeDelay { delay });
        }
        Ok(vec![-h.scalar(-delay)])
    })
    .with_max_delay(move |p| p[0] + bound + bound * bound)
    .with_delay(|y, p| p[0] + y[0] + y[0] * y[0])
    .with_equilibrium(vec![0.0])
    .with_default_params(vec![1.0])
}

/// Window length of [`state_eval_example`].
pub const STATE_EVAL_WINDOW: f64 = 1.0;

/// `y'(t) = y(t + y(t))`: the history is read at a point given by the
/// current state. No parameters; the state must stay in `[-1, 0]`.
pub fn state_eval_example() -> DdeProblem {
    DdeProblem::new("state_eval_example", 1, 0, STATE_EVAL_WINDOW, |h, _| {
        let theta = h.scalar(0.0);
        if !(-STATE_EVAL_WINDOW..=0.0).contains(&theta) {
            return Err(Error::OutOfWindow {
                theta,
                lower: -STATE_EVAL_WINDOW,
            });
        }
        Ok(vec![h.scalar(theta)])
    })
}

/// Built-in problems by name.
pub fn problem_by_name(name: &str) -> Result<DdeProblem> {
    match name {
        "mackey_glass" => Ok(mackey_glass()),
        "sd_quadratic" => Ok(sd_quadratic()),
        "state_eval_example" => Ok(state_eval_example()),
        other => Err(Error::InvalidArgument(format!("unknown problem `{other}`"))),
    }
}
