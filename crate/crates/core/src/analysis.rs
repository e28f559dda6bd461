//! Diagnostics on converged orbits: the dense-grid residual, convergence
//! studies over `(L, m)`, Bernstein-ellipse interpolation bounds and the
//! circle map of a state-dependent delay.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::time::Instant;

use crate::collocation::{newton_solve, AffineConstraints, DiscreteState, NewtonSettings};
use crate::error::{Error, Result};
use crate::nodes::NodeKind;
use crate::oracle::phi_m_defect;
use crate::piecewise::Mesh;
use crate::problem::{DdeProblem, RescaledRhs};

pub const DEFAULT_ERR_GRID: usize = 10001;

/// Cells with `err` at or below `PLATEAU_FACTOR * eps * m^2 * L * max(1, |y|)`
/// are treated as roundoff plateau. The `m^2 L` accounts for the growth of
/// rounding errors under differentiation on intervals of width `1 / L`.
pub const PLATEAU_FACTOR: f64 = 100.0;

/// Roundoff level of `err` for degree `m` on `intervals` uniform intervals and
/// a profile of size `scale`.
pub fn plateau_level(m: usize, intervals: usize, scale: f64) -> f64 {
    PLATEAU_FACTOR * f64::EPSILON * (m * m * intervals) as f64 * scale.max(1.0)
}

/// `max_t |y'(t)/T - G(y(t + ./T), p)|` over `grid_points` uniform points of
/// `[0, 1]`.
pub fn residual_err(state: &DiscreteState, problem: &DdeProblem, grid_points: usize) -> Result<f64> {
    if grid_points < 2 {
        return Err(Error::InvalidArgument(format!(
            "residual grid needs at least 2 points, got {grid_points}"
        )));
    }
    let rhs = RescaledRhs::new(problem, &state.poly, &state.mu)?;
    let period = state.period();
    let mut err = 0.0_f64;
    for k in 0..grid_points {
        let t = k as f64 / (grid_points - 1) as f64;
        let dy = state.poly.eval_deriv(t);
        let g = rhs.unscaled_at(t)?;
        for (d, g) in dy.iter().zip(&g) {
            let r = (d / period - g).abs();
            if !r.is_finite() {
                return Err(Error::NonFiniteResidual);
            }
            err = err.max(r);
        }
    }
    Ok(err)
}

/// One `(L, m)` cell of a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub intervals: usize,
    pub degree: usize,
    pub err: Option<f64>,
    pub phi_defect: Option<f64>,
    pub newton_iters: Option<usize>,
    pub period: Option<f64>,
    /// Seconds; not reproducible between runs, so left out of the JSON form.
    #[serde(skip_serializing, default)]
    pub wall_time: f64,
    /// Failure message when the cell did not converge.
    pub error: Option<String>,
}

/// Least-squares slope of `ln err` against `m` for one `L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub intervals: usize,
    pub slope: Option<f64>,
    pub cells_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub problem: String,
    pub parameter: f64,
    pub node_kind: NodeKind,
    pub grid: usize,
    pub rows: Vec<ConvergenceRow>,
    pub slopes: Vec<SlopeFit>,
}

impl ConvergenceTable {
    pub fn row(&self, intervals: usize, degree: usize) -> Option<&ConvergenceRow> {
        self.rows
            .iter()
            .find(|r| r.intervals == intervals && r.degree == degree)
    }

    pub fn slope(&self, intervals: usize) -> Option<f64> {
        self.slopes
            .iter()
            .find(|s| s.intervals == intervals)
            .and_then(|s| s.slope)
    }

    /// CSV with one line per cell. `wall_time` is left out unless asked for,
    /// so that repeated runs give identical files.
    pub fn to_csv(&self, with_wall_time: bool) -> String {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        let mut out = String::from("L,m,err,phi_defect,newton_iters,T");
        if with_wall_time {
            out.push_str(",wall_time");
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}",
                r.intervals,
                r.degree,
                fmt(r.err),
                fmt(r.phi_defect),
                r.newton_iters.map(|n| n.to_string()).unwrap_or_default(),
                r.period.map(|x| format!("{x:.17e}")).unwrap_or_default(),
            ));
            if with_wall_time {
                out.push_str(&format!(",{:.6}", r.wall_time));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Fits `ln err = a + s m` by least squares over the cells whose error lies
/// above `level(m)`. Returns the slope (if at least two cells qualify) and the
/// number of cells used.
pub fn fit_slope<F: Fn(usize) -> f64>(cells: &[(usize, f64)], level: F) -> (Option<f64>, usize) {
    let used: Vec<(f64, f64)> = cells
        .iter()
        .filter(|&&(m, err)| err.is_finite() && err > level(m))
        .map(|&(m, err)| (m as f64, err.ln()))
        .collect();
    if used.len() < 2 {
        return (None, used.len());
    }
    let n = used.len() as f64;
    let mx = used.iter().map(|u| u.0).sum::<f64>() / n;
    let my = used.iter().map(|u| u.1).sum::<f64>() / n;
    let sxy: f64 = used.iter().map(|u| (u.0 - mx) * (u.1 - my)).sum();
    let sxx: f64 = used.iter().map(|u| (u.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return (None, used.len());
    }
    (Some(sxy / sxx), used.len())
}

/// Converges the orbit of `problem` at `parameter` on every `(L, m)` of a
/// uniform mesh and records the residual and diagnostics.
///
/// Each `L` is handled independently; within it degrees are visited in
/// increasing order and each cell starts Newton from the last converged cell
/// of the same `L` (the seed, resampled, for the first one).
pub fn convergence_study(
    problem: &DdeProblem,
    seed: &DiscreteState,
    parameter: f64,
    l_list: &[usize],
    m_list: &[usize],
    settings: &NewtonSettings,
    grid: usize,
) -> Result<ConvergenceTable> {
    if l_list.is_empty() || m_list.is_empty() {
        return Err(Error::InvalidArgument("empty L or m list".into()));
    }
    if let Some(&l) = l_list.iter().find(|&&l| l < 1) {
        return Err(Error::InvalidArgument(format!("L must be >= 1, got {l}")));
    }
    if let Some(&m) = m_list.iter().find(|&&m| m < 2) {
        return Err(Error::InvalidArgument(format!("m must be >= 2, got {m}")));
    }
    settings.validate()?;
    let mut ls = l_list.to_vec();
    ls.sort_unstable();
    ls.dedup();
    let mut ms = m_list.to_vec();
    ms.sort_unstable();
    ms.dedup();

    let cons = AffineConstraints::default_for(problem, seed, &[parameter]);
    let mut start = seed.clone();
    start.mu[1] = parameter;

    let per_l: Vec<Vec<ConvergenceRow>> = ls
        .par_iter()
        .map(|&l| {
            let mut warm: Option<DiscreteState> = None;
            ms.iter()
                .map(|&m| {
                    let clock = Instant::now();
                    let from = warm.as_ref().unwrap_or(&start);
                    let cell = Mesh::uniform(l)
                        .and_then(|mesh| from.resample(mesh, m))
                        .and_then(|guess| newton_solve(&guess, problem, &cons, settings))
                        .and_then(|out| {
                            let err = residual_err(&out.state, problem, grid)?;
                            let defect = phi_m_defect(&out.state, problem, &cons)?;
                            Ok((out, err, defect.max()))
                        });
                    let wall_time = clock.elapsed().as_secs_f64();
                    match cell {
                        Ok((out, err, defect)) => {
                            log::debug!("L = {l}, m = {m}: err = {err:e}");
                            let row = ConvergenceRow {
                                intervals: l,
                                degree: m,
                                err: Some(err),
                                phi_defect: Some(defect),
                                newton_iters: Some(out.iterations),
                                period: Some(out.state.period()),
                                wall_time,
                                error: None,
                            };
                            warm = Some(out.state);
                            row
                        }
                        Err(e) => {
                            log::warn!("L = {l}, m = {m} failed: {e}");
                            ConvergenceRow {
                                intervals: l,
                                degree: m,
                                err: None,
                                phi_defect: None,
                                newton_iters: None,
                                period: None,
                                wall_time,
                                error: Some(e.to_string()),
                            }
                        }
                    }
                })
                .collect()
        })
        .collect();

    let scale = start.poly.values().iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let slopes = ls
        .iter()
        .zip(&per_l)
        .map(|(&l, rows)| {
            let cells: Vec<(usize, f64)> = rows
                .iter()
                .filter_map(|r| r.err.map(|e| (r.degree, e)))
                .collect();
            let (slope, cells_used) = fit_slope(&cells, |m| plateau_level(m, l, scale));
            SlopeFit {
                intervals: l,
                slope,
                cells_used,
            }
        })
        .collect();

    Ok(ConvergenceTable {
        problem: problem.name().to_string(),
        parameter,
        node_kind: seed.collocation,
        grid,
        rows: per_l.into_iter().flatten().collect(),
        slopes,
    })
}

/// `bound(m) = 4 M exp(-eta m) / (exp(eta) - 1)` for interpolation of a
/// function bounded by `M` on the Bernstein ellipse with parameter `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernsteinBound {
    pub eta: f64,
    pub max_modulus: f64,
}

impl BernsteinBound {
    pub fn bound(&self, m: usize) -> f64 {
        4.0 * self.max_modulus * (-self.eta * m as f64).exp() / self.eta.exp_m1()
    }
}

/// Interior points at which the Cauchy integral over the ellipse is checked.
const CAUCHY_CHECKS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
const CAUCHY_TOL: f64 = 1e-6;

/// Point of the ellipse `B_eta` around `[a, b]` at angle `theta`, and its
/// derivative in `theta`.
fn ellipse_point(a: f64, b: f64, eta: f64, theta: f64) -> (Complex64, Complex64) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let z = Complex64::new(c + r * eta.cosh() * theta.cos(), r * eta.sinh() * theta.sin());
    let dz = Complex64::new(-r * eta.cosh() * theta.sin(), r * eta.sinh() * theta.cos());
    (z, dz)
}

/// Estimates `M` for `f` on the Bernstein ellipse of `[0, 1]`.
pub fn bernstein_bound_fit<F>(f: F, eta: f64, samples: usize) -> Result<BernsteinBound>
where
    F: Fn(Complex64) -> Complex64,
{
    bernstein_bound_fit_on_mesh(f, &Mesh::uniform(1)?, eta, samples)
}

/// Estimates `M` as the largest `|f|` over `samples` points on each of the
/// ellipses `B_i` around the mesh intervals.
///
/// `f` must be analytic inside every ellipse. A nonfinite value on the
/// contour, or a Cauchy integral that does not reproduce `f` at interior real
/// points, means a singularity lies inside and is reported as an error.
pub fn bernstein_bound_fit_on_mesh<F>(f: F, mesh: &Mesh, eta: f64, samples: usize) -> Result<BernsteinBound>
where
    F: Fn(Complex64) -> Complex64,
{
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::InvalidArgument(format!("eta must be positive, got {eta}")));
    }
    if samples < 16 {
        return Err(Error::InvalidArgument(format!(
            "need at least 16 ellipse samples, got {samples}"
        )));
    }
    let breaks = mesh.breaks();
    let mut max_modulus = 0.0_f64;
    for i in 0..mesh.intervals() {
        let (a, b) = (breaks[i], breaks[i + 1]);
        let mut contour = Vec::with_capacity(samples);
        for k in 0..samples {
            let theta = 2.0 * PI * k as f64 / samples as f64;
            let (z, dz) = ellipse_point(a, b, eta, theta);
            let fz = f(z);
            if !(fz.re.is_finite() && fz.im.is_finite()) {
                return Err(Error::AnalyticityViolation(format!(
                    "f is not finite at z = {z} on the ellipse around [{a}, {b}]"
                )));
            }
            max_modulus = max_modulus.max(fz.norm());
            contour.push((z, dz, fz));
        }
        let dtheta = 2.0 * PI / samples as f64;
        for s in CAUCHY_CHECKS {
            let x = Complex64::new(a + s * (b - a), 0.0);
            let mut integral = Complex64::new(0.0, 0.0);
            let mut scale = 0.0_f64;
            for &(z, dz, fz) in &contour {
                let term = fz * dz / (z - x);
                integral += term;
                scale = scale.max(term.norm());
            }
            integral *= dtheta / (2.0 * PI * Complex64::i());
            let fx = f(x);
            let mismatch = (integral - fx).norm();
            if !(mismatch <= CAUCHY_TOL * scale.max(fx.norm())) {
                return Err(Error::AnalyticityViolation(format!(
                    "Cauchy integral misses f({}) by {mismatch:e}: singularity inside the ellipse around [{a}, {b}]",
                    x.re
                )));
            }
        }
    }
    if !(max_modulus > 0.0) {
        return Err(Error::InvalidArgument("f vanishes on the ellipse".into()));
    }
    Ok(BernsteinBound { eta, max_modulus })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    Neutral,
}

/// What the first iterate is, up to the sampling resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MapKind {
    /// `r` is an integer constant: every point is fixed.
    Identity,
    /// `r` is a non-integer constant: rigid rotation by `-shift` mod 1.
    Rotation { shift: f64 },
    General,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicPoints {
    pub k: usize,
    /// Every point is fixed by the `k`-th iterate; no isolated points listed.
    pub all_fixed: bool,
    pub points: Vec<f64>,
    pub slopes: Vec<f64>,
    pub stability: Vec<Stability>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleMapReport {
    pub kind: MapKind,
    pub grid: Vec<f64>,
    /// `iterates[k - 1][i]` is `g^k(grid[i])` reduced to `[0, 1)`.
    pub iterates: Vec<Vec<f64>>,
    pub periodic_points: Vec<PeriodicPoints>,
}

impl CircleMapReport {
    pub fn points_of(&self, k: usize) -> Option<&PeriodicPoints> {
        self.periodic_points.iter().find(|p| p.k == k)
    }

    /// CSV `t, g1, g2, ...`.
    pub fn iterates_csv(&self) -> String {
        let mut out = String::from("t");
        for k in 1..=self.iterates.len() {
            out.push_str(&format!(",g{k}"));
        }
        out.push('\n');
        for (i, t) in self.grid.iter().enumerate() {
            out.push_str(&format!("{t:.10}"));
            for it in &self.iterates {
                out.push_str(&format!(",{:.12}", it[i]));
            }
            out.push('\n');
        }
        out
    }
}

const FIXED_POINT_TOL: f64 = 1e-10;
const SLOPE_STEP: f64 = 1e-6;
const FLAT_TOL: f64 = 1e-12;

/// Lift of the `k`-th iterate of `t -> t - r(t)`.
fn lift_iterate<R: Fn(f64) -> f64>(r: &R, k: usize, t: f64) -> f64 {
    let mut x = t;
    for _ in 0..k {
        x -= r(x.rem_euclid(1.0));
    }
    x
}

/// Iterates the circle map `t -> t - r(t) mod 1` and locates the fixed
/// points of its iterates `k = 1..=k_max`.
///
/// `r` is sampled on `grid` uniform points of `[0, 1)`; roots of
/// `g^k(t) - t - n` for integers `n` are bracketed by sign changes of the
/// lift and refined by bisection.
pub fn circle_map_analysis<R>(r: R, k_max: usize, grid: usize) -> Result<CircleMapReport>
where
    R: Fn(f64) -> f64,
{
    if k_max < 1 {
        return Err(Error::InvalidArgument("k_max must be >= 1".into()));
    }
    if grid < 1000 {
        return Err(Error::InvalidArgument(format!(
            "circle-map grid needs at least 1000 points, got {grid}"
        )));
    }
    let ts: Vec<f64> = (0..grid).map(|i| i as f64 / grid as f64).collect();
    let first: Vec<f64> = ts.iter().map(|&t| r(t)).collect();
    let r_min = first.iter().cloned().fold(f64::INFINITY, f64::min);
    let r_max = first.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(r_min.is_finite() && r_max.is_finite()) {
        return Err(Error::NonFiniteResidual);
    }
    let kind = if r_max - r_min <= FLAT_TOL {
        let c = 0.5 * (r_max + r_min);
        if (c - c.round()).abs() <= FLAT_TOL {
            MapKind::Identity
        } else {
            MapKind::Rotation { shift: c.rem_euclid(1.0) }
        }
    } else {
        MapKind::General
    };

    let mut iterates = Vec::with_capacity(k_max);
    let mut periodic_points = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let lift: Vec<f64> = ts.iter().map(|&t| lift_iterate(&r, k, t)).collect();
        iterates.push(lift.iter().map(|x| x.rem_euclid(1.0)).collect());
        let disp: Vec<f64> = lift.iter().zip(&ts).map(|(g, t)| g - t).collect();
        let d_min = disp.iter().cloned().fold(f64::INFINITY, f64::min);
        let d_max = disp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if d_max - d_min <= FLAT_TOL {
            let c = 0.5 * (d_max + d_min);
            periodic_points.push(PeriodicPoints {
                k,
                all_fixed: (c - c.round()).abs() <= FLAT_TOL,
                points: Vec::new(),
                slopes: Vec::new(),
                stability: Vec::new(),
            });
            continue;
        }
        let disp_at = |t: f64| lift_iterate(&r, k, t) - t;
        let mut points = Vec::new();
        for i in 0..grid {
            let (a, b) = (ts[i], if i + 1 < grid { ts[i + 1] } else { 1.0 });
            let (da, db) = (disp[i], if i + 1 < grid { disp[i + 1] } else { disp_at(1.0) });
            let lo_n = da.min(db).ceil() as i64;
            let hi_n = da.max(db).floor() as i64;
            for n in lo_n..=hi_n {
                let n = n as f64;
                let (fa, fb) = (da - n, db - n);
                if fa == 0.0 {
                    points.push(a);
                } else if fa * fb < 0.0 {
                    let (mut lo, mut hi) = (a, b);
                    while hi - lo > FIXED_POINT_TOL {
                        let mid = 0.5 * (lo + hi);
                        if (disp_at(mid) - n) * fa > 0.0 {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    points.push(0.5 * (lo + hi));
                }
            }
        }
        points.sort_by(|a, b| a.total_cmp(b));
        let slopes: Vec<f64> = points
            .iter()
            .map(|&t| (lift_iterate(&r, k, t + SLOPE_STEP) - lift_iterate(&r, k, t - SLOPE_STEP)) / (2.0 * SLOPE_STEP))
            .collect();
        let stability = slopes
            .iter()
            .map(|s| {
                if (s.abs() - 1.0).abs() <= 1e-6 {
                    Stability::Neutral
                } else if s.abs() > 1.0 {
                    Stability::Unstable
                } else {
                    Stability::Stable
                }
            })
            .collect();
        periodic_points.push(PeriodicPoints {
            k,
            all_fixed: false,
            points,
            slopes,
            stability,
        });
    }
    Ok(CircleMapReport {
        kind,
        grid: ts,
        iterates,
        periodic_points,
    })
}

/// `t -> r*(t) / T` for a state of a problem with a state-dependent delay.
pub fn rescaled_delay<'a>(state: &'a DiscreteState, problem: &'a DdeProblem) -> Result<impl Fn(f64) -> f64 + 'a> {
    let params = state.params().to_vec();
    if problem.delay(&vec![0.0; state.dim()], &params).is_none() {
        return Err(Error::InvalidArgument(format!(
            "{} has no delay function",
            problem.name()
        )));
    }
    let period = state.period();
    Ok(move |t: f64| {
        let y = state.poly.eval(t);
        problem.delay(&y, &params).unwrap_or(f64::NAN) / period
    })
}
