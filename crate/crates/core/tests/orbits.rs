use std::f64::consts::PI;
use std::sync::OnceLock;

use semdde::analysis::{convergence_study, residual_err, DEFAULT_ERR_GRID};
use semdde::collocation::{assemble_residual, newton_solve, AffineConstraints, DiscreteState, NewtonSettings};
use semdde::continuation::{
    continue_branch, hopf_initial_guess, mackey_glass_hopf, refine, sd_quadratic_guess, solve_at, BranchPoint,
};
use semdde::oracle::phi_m_defect;
use semdde::piecewise::{Mesh, PeriodicPiecewisePoly};
use semdde::problem::{mackey_glass, sd_quadratic};

fn settings() -> NewtonSettings {
    NewtonSettings::default()
}

/// Mackey-Glass branch from the Hopf point to tau = 1 on L = 11, m = 10.
fn branch() -> &'static [BranchPoint] {
    static BRANCH: OnceLock<Vec<BranchPoint>> = OnceLock::new();
    BRANCH.get_or_init(|| {
        let problem = mackey_glass();
        let h = mackey_glass_hopf().unwrap();
        let guess = hopf_initial_guess(&h, 0.01, Mesh::uniform(11).unwrap(), 10).unwrap();
        let start = solve_at(&guess, &problem, guess.params()[0], &settings()).unwrap();
        let mut points = vec![start.clone()];
        points.extend(continue_branch(&start.state, &problem, start.parameter, 1.0, 40, &settings()).unwrap());
        points
    })
}

fn orbit_at_one(m: usize) -> BranchPoint {
    let seed = &branch().last().unwrap().state;
    refine(seed, &mackey_glass(), Mesh::uniform(11).unwrap(), m, &settings()).unwrap()
}

#[test]
fn newton_from_hopf_guess() {
    let problem = mackey_glass();
    let h = mackey_glass_hopf().unwrap();
    let guess = hopf_initial_guess(&h, 0.01, Mesh::uniform(11).unwrap(), 4).unwrap();
    assert_eq!(guess.len(), 46);
    let cons = AffineConstraints::default_for(&problem, &guess, guess.params());
    let out = newton_solve(&guess, &problem, &cons, &settings()).unwrap();
    let t_hopf = 2.0 * PI / 15f64.sqrt();
    assert!((out.state.period() - t_hopf).abs() < 0.01 * t_hopf, "T = {}", out.state.period());
    assert!(out.final_residual() <= settings().tol_residual);

    // superlinear tail: successive contraction ratios shrink while the
    // residual is well above roundoff
    let h = &out.residual_history;
    let ratios: Vec<f64> = h
        .windows(2)
        .filter(|w| w[1] > 1e-13)
        .map(|w| w[1] / w[0])
        .collect();
    let tail = &ratios[ratios.len().saturating_sub(3)..];
    assert!(tail.len() >= 2, "history {h:?}");
    assert!(tail.windows(2).all(|w| w[1] < w[0]), "ratios {ratios:?}");
    assert!(*tail.last().unwrap() < 0.05, "ratios {ratios:?}");
}

#[test]
fn newton_at_a_solution_stays_put() {
    let problem = mackey_glass();
    let p = &branch()[10];
    let cons = AffineConstraints::default_for(&problem, &p.state, p.state.params());
    let out = newton_solve(&p.state, &problem, &cons, &settings()).unwrap();
    assert!(out.iterations <= 1, "{} iterations", out.iterations);
    let moved = out
        .state
        .flatten()
        .iter()
        .zip(p.state.flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(moved <= 1e-12, "moved {moved}");
}

#[test]
fn mackey_glass_branch_grows() {
    let b = branch();
    assert_eq!(b.len(), 41);
    let last = b.last().unwrap();
    assert_eq!(last.parameter, 1.0);
    assert!(last.amplitude > 0.5, "amplitude {}", last.amplitude);
    assert!(last.period > 2.0 * (2.0 * PI / 15f64.sqrt()) * 0.5, "T {}", last.period);
    assert!(b.windows(2).all(|w| w[1].amplitude > w[0].amplitude));
    assert!(b.windows(2).all(|w| w[1].parameter > w[0].parameter));
    for p in b {
        assert!(p.phi_defect <= 100.0 * settings().tol_residual, "p = {}: {}", p.parameter, p.phi_defect);
    }
    // regression anchors from the first oracle-checked run
    assert!((last.period - 3.1165444128826).abs() < 1e-8, "T {}", last.period);
    assert!((last.amplitude - 0.5393).abs() < 1e-3, "amplitude {}", last.amplitude);
}

#[test]
fn zero_length_continuation_reconverges() {
    let problem = mackey_glass();
    let p = &branch()[20];
    let out = continue_branch(&p.state, &problem, p.parameter, p.parameter, 1, &settings()).unwrap();
    assert_eq!(out.len(), 1);
    assert!(out[0].newton_iters <= 1);
    assert!((out[0].period - p.period).abs() < 1e-12);
}

#[test]
fn oracle_agrees_with_solver_and_detects_perturbations() {
    let problem = mackey_glass();
    let p = orbit_at_one(20);
    let cons = AffineConstraints::default_for(&problem, &p.state, p.state.params());
    let d = phi_m_defect(&p.state, &problem, &cons).unwrap();
    assert!(d.sup_defect_v <= 1e-8, "{d:?}");
    assert!(d.max() <= 100.0 * settings().tol_residual, "{d:?}");

    let mut bumped = p.state.clone();
    bumped.poly.values_mut()[37] += 1e-4;
    let d = phi_m_defect(&bumped, &problem, &cons).unwrap();
    assert!(d.sup_defect_v >= 1e-6, "{d:?}");
}

#[test]
fn residual_err_tracks_newton_tolerance() {
    let problem = mackey_glass();
    for m in [20, 24, 30] {
        let p = orbit_at_one(m);
        let err = residual_err(&p.state, &problem, DEFAULT_ERR_GRID).unwrap();
        assert!(err <= 1e3 * settings().tol_residual, "m = {m}: err {err}");
        assert_eq!(err, p.residual_err);
    }
}

#[test]
fn err_decreases_with_degree() {
    let seed = &branch().last().unwrap().state;
    let m_list: Vec<usize> = (4..=40).step_by(4).collect();
    let t = convergence_study(&mackey_glass(), seed, 1.0, &[5], &m_list, &settings(), DEFAULT_ERR_GRID).unwrap();
    let errs: Vec<f64> = t.rows.iter().map(|r| r.err.unwrap()).collect();
    assert!(errs.windows(2).all(|w| w[1] <= 2.0 * w[0]), "{errs:?}");
    assert!(errs.last().unwrap() < &1e-9);
}

#[test]
fn single_cell_study() {
    let seed = &branch().last().unwrap().state;
    let t = convergence_study(&mackey_glass(), seed, 1.0, &[1], &[4], &settings(), DEFAULT_ERR_GRID).unwrap();
    assert_eq!(t.rows.len(), 1);
    assert_eq!((t.rows[0].intervals, t.rows[0].degree), (1, 4));
}

#[test]
fn time_shift_only_moves_the_phase_row() {
    let problem = mackey_glass();
    let p = orbit_at_one(20);
    let shifted = PeriodicPiecewisePoly::from_fn(
        p.state.mesh().clone(),
        p.state.degree(),
        1,
        p.state.poly.rep_kind(),
        |t| p.state.poly.eval(t + 0.1),
    )
    .unwrap();
    let s = DiscreteState::new(shifted, p.state.mu.clone(), p.state.collocation);
    let cons = AffineConstraints::default_for(&problem, &p.state, p.state.params());
    let r = assemble_residual(&s, &problem, &cons).unwrap();
    let n = s.n_profile();
    let fde = r[..n].iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    assert!(fde <= 1e-7, "FDE rows {fde}");
    assert!(r[n].abs() > 1e-3, "phase row {}", r[n]);
    assert!(r[n + 1].abs() <= 1e-15);
}

#[test]
fn sd_quadratic_reconverges_from_bundled_guess() {
    let problem = sd_quadratic();
    for (tau, period) in [(0.95, 14.061907), (1.1, 8.776977)] {
        let guess = sd_quadratic_guess(tau).unwrap();
        let p = refine(&guess, &problem, Mesh::uniform(20).unwrap(), 12, &settings()).unwrap();
        assert_eq!(p.parameter, tau);
        assert!((p.period - period).abs() < 1e-3, "tau = {tau}: T = {}", p.period);
        assert!(p.phi_defect <= 100.0 * settings().tol_residual);
    }
}
