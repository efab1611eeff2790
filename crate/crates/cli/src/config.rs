//! Flags, the optional JSON settings file, and their merge into one
//! validated [`RunConfig`].

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use nld_core::radial::Spacing;
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

#[derive(Parser, Debug)]
#[command(
    name = "solve",
    version,
    about = "Localized standing waves of the nonlinear Dirac equation for frequencies near the mass gap",
    long_about = "Without a subcommand, runs the full pipeline at one epsilon: ground state, \
                  fixed-point iteration, rescaling to physical variables, decay fits and a \
                  shooting cross-check."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Ground state Q with residual, integral identities and tail fit.
    GroundState,
    /// Continuation branch over a decreasing epsilon list.
    Sweep(SweepArgs),
    /// Inequality sweeps, Hardy suite and the theta < 1 counterexample.
    Lemmas(LemmaArgs),
}

#[derive(Args, Debug, Default)]
pub struct RunArgs {
    /// Flat JSON object with any of the settings below; flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Nonlinearity exponent, 0 < theta < 2.
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    /// m - omega with m = 1/2.
    #[arg(long, global = true, conflicts_with = "omega")]
    pub epsilon: Option<f64>,
    /// Frequency, 0 < omega < 1/2.
    #[arg(long, global = true)]
    pub omega: Option<f64>,
    /// Extent of the rescaled grid.
    #[arg(long = "rmax", global = true)]
    pub r_max: Option<f64>,
    /// Number of grid nodes.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// uniform or graded.
    #[arg(long, global = true)]
    pub spacing: Option<Spacing>,
    /// Bracket width for the ground-state and shooting bisections.
    #[arg(long, global = true)]
    pub ode_tol: Option<f64>,
    /// Step size at which the fixed-point iteration stops.
    #[arg(long, global = true)]
    pub fp_tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    /// Trust-ball radius in W^{1,4}; defaults to the norm of (Q, -Q').
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Step weight in (0, 1]; 1 is plain Picard.
    #[arg(long, global = true)]
    pub relaxation: Option<f64>,
    /// Epsilon values solved first, each warm-starting the next.
    #[arg(long, global = true, value_delimiter = ',')]
    pub path: Option<Vec<f64>>,
    /// Skip the shooting cross-check.
    #[arg(long, global = true)]
    pub no_shoot: bool,
    #[arg(long, short = 'o', global = true)]
    pub output_dir: Option<PathBuf>,
    /// Seed for randomized suites.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Log progress to stderr (-vv for debug).
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Strictly decreasing epsilon values.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    pub epsilons: Vec<f64>,
    /// Theta values, one branch each; defaults to --theta.
    #[arg(long, value_delimiter = ',')]
    pub thetas: Option<Vec<f64>>,
    /// Also run the list with midpoints inserted and compare the largest gaps.
    #[arg(long)]
    pub refine: bool,
}

#[derive(Args, Debug)]
pub struct LemmaArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 1.25, 1.5, 1.75, 1.9])]
    pub theta_list: Vec<f64>,
    /// Points per axis of the two-argument sweeps (odd).
    #[arg(long, default_value_t = 201)]
    pub points: usize,
    /// Points per axis of the three-argument sweep (odd).
    #[arg(long, default_value_t = 35)]
    pub points_3d: usize,
    /// Repeat every sweep at twice the resolution and report the change.
    #[arg(long)]
    pub refine: bool,
    #[arg(long, default_value_t = 50)]
    pub hardy_fields: usize,
}

/// Settings file: every key optional, unknown keys rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    theta: Option<f64>,
    epsilon: Option<f64>,
    omega: Option<f64>,
    r_max: Option<f64>,
    n: Option<usize>,
    spacing: Option<Spacing>,
    ode_tol: Option<f64>,
    fp_tol: Option<f64>,
    max_iter: Option<usize>,
    delta: Option<f64>,
    relaxation: Option<f64>,
    path: Option<Vec<f64>>,
    shoot: Option<bool>,
    output_dir: Option<PathBuf>,
    seed: Option<u64>,
}

/// Fully resolved settings, embedded verbatim in every JSON artifact.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub theta: f64,
    pub epsilon: Option<f64>,
    pub omega: Option<f64>,
    pub r_max: f64,
    pub n: usize,
    pub spacing: Spacing,
    pub ode_tol: f64,
    pub fp_tol: f64,
    pub max_iter: usize,
    pub delta: Option<f64>,
    pub relaxation: f64,
    pub path: Vec<f64>,
    pub shoot: bool,
    pub output_dir: PathBuf,
    pub seed: u64,
}

/// ε from ω, rounded to 12 significant digits so that `--omega 0.499`
/// and `--epsilon 1e-3` give the same run.
fn epsilon_from_omega(omega: f64) -> f64 {
    format!("{:.11e}", 0.5 - omega).parse().expect("formatted float parses")
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

pub fn resolve(args: &RunArgs) -> Result<RunConfig, Failure> {
    let file = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::Io(format!("reading {}: {e}", p.display())))?;
            serde_json::from_str::<FileConfig>(&text).map_err(|e| usage(format!("config {}: {e}", p.display())))?
        }
        None => FileConfig::default(),
    };
    let (epsilon, omega) = if args.epsilon.is_some() || args.omega.is_some() {
        (args.epsilon, args.omega)
    } else {
        (file.epsilon, file.omega)
    };
    let epsilon = match (epsilon, omega) {
        (Some(_), Some(_)) => return Err(usage("give epsilon or omega, not both")),
        (Some(e), None) => Some(e),
        (None, Some(w)) => {
            if !(w > 0.0 && w < 0.5) {
                return Err(usage(format!("omega = {w} outside (0, 1/2)")));
            }
            Some(epsilon_from_omega(w))
        }
        (None, None) => None,
    };
    let cfg = RunConfig {
        theta: args.theta.or(file.theta).unwrap_or(1.0),
        epsilon,
        omega: epsilon.map(|e| 0.5 - e),
        r_max: args.r_max.or(file.r_max).unwrap_or(20.0),
        n: args.n.or(file.n).unwrap_or(4000),
        spacing: args.spacing.or(file.spacing).unwrap_or(Spacing::Uniform),
        ode_tol: args.ode_tol.or(file.ode_tol).unwrap_or(1e-12),
        fp_tol: args.fp_tol.or(file.fp_tol).unwrap_or(1e-10),
        max_iter: args.max_iter.or(file.max_iter).unwrap_or(500),
        delta: args.delta.or(file.delta),
        relaxation: args.relaxation.or(file.relaxation).unwrap_or(1.0),
        path: args.path.clone().or(file.path).unwrap_or_default(),
        shoot: !args.no_shoot && file.shoot.unwrap_or(true),
        output_dir: args.output_dir.clone().or(file.output_dir).unwrap_or_else(|| PathBuf::from("out")),
        seed: args.seed.or(file.seed).unwrap_or(0),
    };
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    fn validate(&self) -> Result<(), Failure> {
        if !(self.theta > 0.0 && self.theta < 2.0) {
            return Err(usage(format!(
                "theta = {} outside the admissible range 0 < theta < 2",
                self.theta
            )));
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e < 0.5) {
                return Err(usage(format!("epsilon = {e} outside (0, 1/2)")));
            }
        }
        if !(self.r_max.is_finite() && self.r_max > 0.0) || self.n < nld_core::radial::MIN_NODES {
            return Err(usage(format!(
                "need rmax > 0 and n >= {}, got {} and {}",
                nld_core::radial::MIN_NODES,
                self.r_max,
                self.n
            )));
        }
        if !(self.ode_tol > 0.0 && self.fp_tol > 0.0) || self.max_iter == 0 {
            return Err(usage("tolerances must be positive and max-iter at least 1"));
        }
        if self.delta.is_some_and(|d| !(d > 0.0)) {
            return Err(usage("delta must be positive"));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(usage(format!("relaxation = {} outside (0, 1]", self.relaxation)));
        }
        if let Some(bad) = self.path.iter().find(|e| !(**e > 0.0 && **e < 0.5)) {
            return Err(usage(format!("path value {bad} outside (0, 1/2)")));
        }
        Ok(())
    }

    /// ε for commands that need one.
    pub fn require_epsilon(&self) -> Result<f64, Failure> {
        self.epsilon.ok_or_else(|| usage("one of --epsilon or --omega is required"))
    }

    /// The contraction theory covers 1 <= theta < 2 only.
    pub fn require_contraction_range(&self) -> Result<(), Failure> {
        if !(1.0..2.0).contains(&self.theta) {
            return Err(usage(format!(
                "theta = {}: the fixed-point iteration needs 1 <= theta < 2",
                self.theta
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn omega_and_epsilon_agree() {
        assert_eq!(epsilon_from_omega(0.499), 1e-3);
        assert_eq!(epsilon_from_omega(0.49), 1e-2);
    }
}
