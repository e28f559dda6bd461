//! Regenerates `data/sd_quadratic_guess.json`.
//!
//! The orbits of `y'(t) = -y(t - tau - y(t) - y(t)^2)` at tau = 1.1 and 0.95
//! are unstable, so they are reached by continuation from the Hopf point at
//! tau = pi/2 on a fine mesh (L = 100, m = 6) and then stored on the coarse
//! L = 12, m = 5 discretization.
//!
//! ```text
//! cargo run --release -p semdde --example generate_sd_guess [out.json]
//! ```

use semdde::collocation::NewtonSettings;
use semdde::continuation::{
    continue_branch, hopf_initial_guess_at, sd_quadratic_hopf, solve_at, GuessFile,
};
use semdde::piecewise::Mesh;
use semdde::problem::sd_quadratic;
use semdde::FORMAT_VERSION;

const FINE_L: usize = 100;
const FINE_M: usize = 6;
const COARSE_L: usize = 12;
const COARSE_M: usize = 5;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/sd_quadratic_guess.json").into());
    let problem = sd_quadratic();
    let settings = NewtonSettings::default();
    let hopf = sd_quadratic_hopf()?;

    // subcritical: the branch bends back to tau < pi/2
    let p0 = hopf.tau_hopf - 1e-3;
    let guess = hopf_initial_guess_at(&hopf, 0.05, Mesh::uniform(FINE_L)?, FINE_M, p0)?;
    let first = solve_at(&guess, &problem, p0, &settings)?;
    let upper = continue_branch(&first.state, &problem, p0, 1.1, 47, &settings)?;
    let at_upper = upper.last().unwrap();
    let lower = continue_branch(&at_upper.state, &problem, 1.1, 0.95, 15, &settings)?;
    let at_lower = lower.last().unwrap();

    let mut solutions = Vec::new();
    for point in [at_lower, at_upper] {
        eprintln!(
            "tau = {}: T = {:.6}, amplitude = {:.6}, err = {:.2e}",
            point.parameter, point.period, point.amplitude, point.residual_err
        );
        let coarse = point.state.resample(Mesh::uniform(COARSE_L)?, COARSE_M)?;
        solutions.push(coarse.to_document(problem.name()));
    }
    let file = GuessFile {
        format_version: FORMAT_VERSION,
        description: format!(
            "sd_quadratic orbits at tau = 0.95 and 1.1, continued from the Hopf point on L = {FINE_L}, m = {FINE_M} and resampled to L = {COARSE_L}, m = {COARSE_M}"
        ),
        solutions,
    };
    std::fs::write(&out, serde_json::to_string_pretty(&file)? + "\n")?;
    eprintln!("wrote {out}");
    Ok(())
}
