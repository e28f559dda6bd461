use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Instant;

use semdde::analysis::{
    circle_map_analysis, convergence_study, rescaled_delay, ConvergenceTable, MapKind, PeriodicPoints, Stability,
};
use semdde::collocation::{DiscreteState, SolutionDocument};
use semdde::continuation::{
    self, hopf_initial_guess_at, mackey_glass_hopf, sd_quadratic_guess, sd_quadratic_hopf, solve_at, BranchPoint,
    HopfData,
};
use semdde::nodes::{lebesgue_constant, make_nodes, NodeKind};
use semdde::piecewise::PeriodicPiecewisePoly;
use semdde::problem::{problem_by_name, DdeProblem};
use semdde::FORMAT_VERSION;

use crate::config::{GuessSpec, RunConfig};
use crate::CliError;

/// First line of every CSV file written by the CLI.
pub const CSV_VERSION_LINE: &str = "# format_version 1";

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
    write_file(path, &(text + "\n"))
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| CliError::io(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| CliError::io(path, e))?;
    }
    let body = w.into_inner().map_err(|e| CliError::io(path, e))?;
    let body = String::from_utf8(body).map_err(|e| CliError::io(path, e))?;
    write_file(path, &format!("{CSV_VERSION_LINE}\n{body}"))
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

#[derive(Serialize)]
struct Meta {
    format_version: u32,
    command: &'static str,
    wall_time: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    cells: Vec<CellTime>,
}

#[derive(Serialize)]
struct CellTime {
    parameter: f64,
    intervals: usize,
    degree: usize,
    wall_time: f64,
}

fn write_meta(out: &Path, command: &'static str, clock: Instant, cells: Vec<CellTime>) -> Result<(), CliError> {
    write_json(
        &out.join("meta.json"),
        &Meta {
            format_version: FORMAT_VERSION,
            command,
            wall_time: clock.elapsed().as_secs_f64(),
            cells,
        },
    )
}

fn hopf_for(problem: &DdeProblem) -> Result<HopfData, CliError> {
    Ok(match problem.name() {
        "mackey_glass" => mackey_glass_hopf()?,
        "sd_quadratic" => sd_quadratic_hopf()?,
        other => return Err(CliError::Config(format!("no Hopf data for problem `{other}`"))),
    })
}

pub fn load_solution(path: &Path) -> Result<(String, DiscreteState), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let doc: SolutionDocument =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let state = DiscreteState::from_document(&doc)?;
    Ok((doc.problem, state))
}

/// Initial state from the config's guess section, on the config's mesh and
/// degree.
pub fn initial_guess(cfg: &RunConfig, problem: &DdeProblem) -> Result<DiscreteState, CliError> {
    let mesh = cfg.mesh.build()?;
    let mut state = match &cfg.guess {
        GuessSpec::Hopf { amplitude, offset } => {
            let h = hopf_for(problem)?;
            hopf_initial_guess_at(&h, *amplitude, mesh, cfg.degree, h.tau_hopf + offset)?
        }
        GuessSpec::File { path } => {
            let (name, state) = load_solution(path)?;
            if name != problem.name() {
                return Err(CliError::Config(format!(
                    "{} holds a `{name}` solution, config asks for `{}`",
                    path.display(),
                    problem.name()
                )));
            }
            state.resample(mesh, cfg.degree)?
        }
        GuessSpec::Constant { value, period } => {
            let params = cfg
                .parameter
                .map(|p| vec![p])
                .or_else(|| problem.default_params().map(<[f64]>::to_vec))
                .ok_or_else(|| CliError::Config("constant guess needs `parameter`".into()))?;
            let poly = PeriodicPiecewisePoly::constant(mesh, cfg.degree, NodeKind::ChebyshevLobatto, value)?;
            let mut mu = vec![*period];
            mu.extend(params);
            DiscreteState::new(poly, mu, cfg.collocation)
        }
        GuessSpec::Bundled => {
            if problem.name() != "sd_quadratic" {
                return Err(CliError::Config("bundled guesses exist only for sd_quadratic".into()));
            }
            let p = cfg
                .parameter
                .or_else(|| cfg.parameters.first().copied())
                .ok_or_else(|| CliError::Config("bundled guess needs `parameter`".into()))?;
            sd_quadratic_guess(p)?.resample(mesh, cfg.degree)?
        }
    };
    if state.mu.len() != problem.n_mu() {
        return Err(CliError::Config(format!(
            "guess has {} entries in (T, p), `{}` needs {}",
            state.mu.len(),
            problem.name(),
            problem.n_mu()
        )));
    }
    state.collocation = cfg.collocation;
    Ok(state)
}

fn problem_of(cfg: &RunConfig) -> Result<DdeProblem, CliError> {
    problem_by_name(cfg.problem_name()?).map_err(CliError::config)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SolveResult {
    pub format_version: u32,
    pub problem: String,
    pub parameter: f64,
    pub period: f64,
    pub amplitude: f64,
    pub err: f64,
    pub phi_defect: f64,
    pub iterations: usize,
}

fn solve_result(problem: &DdeProblem, p: &BranchPoint) -> SolveResult {
    SolveResult {
        format_version: FORMAT_VERSION,
        problem: problem.name().to_string(),
        parameter: p.parameter,
        period: p.period,
        amplitude: p.amplitude,
        err: p.residual_err,
        phi_defect: p.phi_defect,
        iterations: p.newton_iters,
    }
}

/// Recomputes `err` on the configured grid when it differs from the default.
fn with_grid(mut point: BranchPoint, problem: &DdeProblem, grid: usize) -> Result<BranchPoint, CliError> {
    if grid != semdde::analysis::DEFAULT_ERR_GRID {
        point.residual_err = semdde::analysis::residual_err(&point.state, problem, grid)?;
    }
    Ok(point)
}

pub fn solve(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let clock = Instant::now();
    let problem = problem_of(cfg)?;
    let guess = initial_guess(cfg, &problem)?;
    let target = cfg.parameter.unwrap_or(guess.params()[0]);
    let point = with_grid(solve_at(&guess, &problem, target, &cfg.newton)?, &problem, cfg.grid)?;
    let result = solve_result(&problem, &point);
    write_json(&out.join("solution.json"), &point.state.to_document(problem.name()))?;
    write_json(&out.join("result.json"), &result)?;
    write_meta(out, "solve", clock, Vec::new())?;
    println!("{}", serde_json::to_string(&result).map_err(CliError::config)?);
    Ok(())
}

pub const BRANCH_HEADER: [&str; 6] = ["p", "T", "amplitude", "newton_iters", "residual_err", "phi_defect"];

/// One row of `branch.csv`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct BranchRow {
    pub p: f64,
    #[serde(rename = "T")]
    pub period: f64,
    pub amplitude: f64,
    pub newton_iters: usize,
    pub residual_err: f64,
    pub phi_defect: f64,
}

impl BranchRow {
    fn of(p: &BranchPoint) -> Self {
        BranchRow {
            p: p.parameter,
            period: p.period,
            amplitude: p.amplitude,
            newton_iters: p.newton_iters,
            residual_err: p.residual_err,
            phi_defect: p.phi_defect,
        }
    }

    fn record(&self) -> Vec<String> {
        vec![
            num(self.p),
            num(self.period),
            num(self.amplitude),
            self.newton_iters.to_string(),
            num(self.residual_err),
            num(self.phi_defect),
        ]
    }
}

/// Reads a CSV written by this tool, checking its version line.
pub fn read_versioned_csv(path: &Path) -> Result<String, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let first = text.lines().next().unwrap_or("");
    let version = first
        .strip_prefix("# format_version ")
        .and_then(|v| v.trim().parse::<u32>().ok())
        .ok_or_else(|| CliError::Config(format!("{}: missing format_version line", path.display())))?;
    if version == 0 || version > FORMAT_VERSION {
        return Err(semdde::Error::UnsupportedVersion {
            found: version,
            supported: FORMAT_VERSION,
        }
        .into());
    }
    Ok(text)
}

pub fn read_branch(path: &Path) -> Result<Vec<BranchRow>, CliError> {
    let text = read_versioned_csv(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    reader
        .deserialize()
        .collect::<Result<Vec<BranchRow>, _>>()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn point_path(out: &Path, index: usize) -> PathBuf {
    out.join("points").join(format!("point_{index:04}.json"))
}

pub fn continue_branch(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let clock = Instant::now();
    let spec = cfg
        .continuation
        .as_ref()
        .ok_or_else(|| CliError::Config("config has no `continuation` section".into()))?;
    let problem = problem_of(cfg)?;

    let (mut rows, start, p_from) = match &spec.resume {
        Some(resume) => {
            let rows = read_branch(&resume.branch)?;
            let last = rows
                .last()
                .ok_or_else(|| CliError::Config(format!("{} has no rows", resume.branch.display())))?;
            let (name, state) = load_solution(&resume.solution)?;
            if name != problem.name() {
                return Err(CliError::Config(format!(
                    "{} holds a `{name}` solution",
                    resume.solution.display()
                )));
            }
            let p = state.params()[0];
            if (p - last.p).abs() > 1e-12 * (1.0 + p.abs()) {
                return Err(CliError::Config(format!(
                    "solution is at p = {p}, last branch row at p = {}",
                    last.p
                )));
            }
            (rows, state, p)
        }
        None => {
            let guess = initial_guess(cfg, &problem)?;
            let p = spec.from.or(cfg.parameter).unwrap_or(guess.params()[0]);
            let first = solve_at(&guess, &problem, p, &cfg.newton)?;
            (Vec::new(), first.state, p)
        }
    };

    let points = continuation::continue_branch(&start, &problem, p_from, spec.to, spec.steps, &cfg.newton)?;
    let offset = rows.len();
    for (k, point) in points.into_iter().enumerate() {
        let point = with_grid(point, &problem, cfg.grid)?;
        write_json(&point_path(out, offset + k), &point.state.to_document(problem.name()))?;
        rows.push(BranchRow::of(&point));
    }
    let records: Vec<Vec<String>> = rows.iter().map(BranchRow::record).collect();
    write_csv(&out.join("branch.csv"), &BRANCH_HEADER, &records)?;
    write_meta(out, "continue", clock, Vec::new())?;
    if let Some(last) = rows.last() {
        println!(
            "{} points, last p = {}, T = {}, amplitude = {}",
            rows.len(),
            last.p,
            last.period,
            last.amplitude
        );
    }
    Ok(())
}

/// Orbit at `p` to seed a convergence study: the configured guess, or for a
/// Hopf guess the orbit continued from the Hopf point to `p`.
fn seed_orbit(cfg: &RunConfig, problem: &DdeProblem, p: f64) -> Result<DiscreteState, CliError> {
    let guess = initial_guess(cfg, problem)?;
    let p_guess = guess.params()[0];
    if !matches!(cfg.guess, GuessSpec::Hopf { .. }) || p_guess == p {
        return Ok(guess);
    }
    let steps = cfg.continuation.as_ref().map_or(40, |c| c.steps);
    let first = solve_at(&guess, problem, p_guess, &cfg.newton)?;
    let branch = continuation::continue_branch(&first.state, problem, p_guess, p, steps, &cfg.newton)?;
    Ok(branch.last().expect("steps >= 1").state.clone())
}

#[derive(Serialize)]
struct ConvergenceFile<'a> {
    format_version: u32,
    tables: &'a [ConvergenceTable],
}

pub fn convergence(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let clock = Instant::now();
    if cfg.intervals.is_empty() {
        return Err(CliError::Config("convergence needs a non-empty `intervals` list".into()));
    }
    if cfg.degrees.is_empty() {
        return Err(CliError::Config("convergence needs a non-empty `degrees` list".into()));
    }
    let problem = problem_of(cfg)?;
    let parameters: Vec<f64> = if cfg.parameters.is_empty() {
        vec![cfg
            .parameter
            .ok_or_else(|| CliError::Config("convergence needs `parameter` or `parameters`".into()))?]
    } else {
        cfg.parameters.clone()
    };

    let mut tables = Vec::new();
    for &p in &parameters {
        let mut local = cfg.clone();
        local.parameter = Some(p);
        let seed = seed_orbit(&local, &problem, p)?;
        log::info!("seed at p = {p}: T = {}", seed.period());
        tables.push(convergence_study(
            &problem,
            &seed,
            p,
            &cfg.intervals,
            &cfg.degrees,
            &cfg.newton,
            cfg.grid,
        )?);
    }

    let mut records = Vec::new();
    let mut cells = Vec::new();
    for t in &tables {
        for r in &t.rows {
            let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
            records.push(vec![
                num(t.parameter),
                r.intervals.to_string(),
                r.degree.to_string(),
                opt(r.err),
                opt(r.phi_defect),
                r.newton_iters.map(|n| n.to_string()).unwrap_or_default(),
                opt(r.period),
            ]);
            cells.push(CellTime {
                parameter: t.parameter,
                intervals: r.intervals,
                degree: r.degree,
                wall_time: r.wall_time,
            });
        }
    }
    write_csv(
        &out.join("convergence.csv"),
        &["p", "L", "m", "err", "phi_defect", "newton_iters", "T"],
        &records,
    )?;
    let slopes: Vec<Vec<String>> = tables
        .iter()
        .flat_map(|t| {
            t.slopes.iter().map(move |s| {
                vec![
                    num(t.parameter),
                    s.intervals.to_string(),
                    s.slope.map(num).unwrap_or_default(),
                    s.cells_used.to_string(),
                ]
            })
        })
        .collect();
    write_csv(&out.join("slopes.csv"), &["p", "L", "slope", "cells_used"], &slopes)?;
    write_json(
        &out.join("convergence.json"),
        &ConvergenceFile {
            format_version: FORMAT_VERSION,
            tables: &tables,
        },
    )?;
    write_meta(out, "convergence", clock, cells)?;
    for t in &tables {
        for s in &t.slopes {
            println!("p = {}, L = {}: slope {:?} over {} cells", t.parameter, s.intervals, s.slope, s.cells_used);
        }
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CircleMapSummary {
    pub format_version: u32,
    pub kind: MapKind,
    pub periodic_points: Vec<PeriodicPoints>,
    /// Number of unstable isolated fixed points of each iterate.
    pub unstable_counts: Vec<usize>,
}

pub fn circle_map(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let clock = Instant::now();
    let spec = &cfg.circle_map;
    let report = match (spec.constant_delay, &spec.solution) {
        (Some(c), _) => circle_map_analysis(move |_| c, spec.k_max, spec.grid)?,
        (None, Some(path)) => {
            let (name, state) = load_solution(path)?;
            let problem = problem_by_name(&name).map_err(CliError::config)?;
            let r = rescaled_delay(&state, &problem)?;
            circle_map_analysis(r, spec.k_max, spec.grid)?
        }
        (None, None) => {
            return Err(CliError::Config(
                "circle_map needs `solution` or `constant_delay`".into(),
            ))
        }
    };
    write_file(
        &out.join("circle_map.csv"),
        &format!("{CSV_VERSION_LINE}\n{}", report.iterates_csv()),
    )?;
    let unstable_counts = report
        .periodic_points
        .iter()
        .map(|p| p.stability.iter().filter(|s| **s == Stability::Unstable).count())
        .collect();
    let summary = CircleMapSummary {
        format_version: FORMAT_VERSION,
        kind: report.kind,
        periodic_points: report.periodic_points,
        unstable_counts,
    };
    write_json(&out.join("periodic_points.json"), &summary)?;
    write_meta(out, "circle-map", clock, Vec::new())?;
    for p in &summary.periodic_points {
        if p.all_fixed {
            println!("k = {}: every point fixed", p.k);
        } else {
            println!(
                "k = {}: {} fixed points, {} unstable",
                p.k,
                p.points.len(),
                summary.unstable_counts[p.k - 1]
            );
        }
    }
    Ok(())
}

pub fn nodes(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let clock = Instant::now();
    let spec = &cfg.nodes;
    let mut node_rows = Vec::new();
    let mut leb_rows = Vec::new();
    for &kind in &spec.kinds {
        for &m in &spec.degrees {
            let f = make_nodes(kind, m)?;
            for (j, (t, w)) in f.nodes().iter().zip(f.bary_weights()).enumerate() {
                node_rows.push(vec![kind.to_string(), m.to_string(), j.to_string(), num(*t), num(*w)]);
            }
            let lambda = lebesgue_constant(&f, spec.samples.max(10 * f.len()))?;
            leb_rows.push(vec![
                kind.to_string(),
                m.to_string(),
                f.len().to_string(),
                num(lambda),
                num(lambda / m as f64),
                num(2.0 / std::f64::consts::PI * (m as f64).ln() + 1.0),
            ]);
        }
    }
    write_csv(&out.join("nodes.csv"), &["kind", "m", "j", "node", "bary_weight"], &node_rows)?;
    write_csv(
        &out.join("lebesgue.csv"),
        &["kind", "m", "n_nodes", "lebesgue", "lebesgue_over_m", "chebyshev_bound"],
        &leb_rows,
    )?;
    write_meta(out, "nodes", clock, Vec::new())?;
    Ok(())
}
