use std::fs;
use std::path::Path;

use log::{info, warn};
use nld_core::contraction::{
    continue_branch, fixed_point_residual, fixed_point_solve, loglog_fit, refine_epsilons, BranchRecord,
    ContractionConfig, LogLogFit, PerturbationPair,
};
use nld_core::diagnostics::{
    compare_profiles, fit_decay, mass_gap, rescale_to_physical, ComparisonRecord, DecayFit,
};
use nld_core::ground_state::{pohozaev_residuals, solve_ground_state, GroundState, GroundStateHeader};
use nld_core::linear_operator::LinearizedOp;
use nld_core::nonlinearity::{
    counterexample_ratio, hardy_suite, mixed_difference_ratio, random_hardy_fields, sweep as run_sweep, sweeps_to_csv,
    Inequality, NonlinearContext, SweepRecord,
};
use nld_core::radial::{NormSpec, RadialGrid, Spacing};
use nld_core::shooting::{dirac_residual, shoot_dirac_from, ShootStart, SpinorHeader};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{LemmaArgs, RunConfig, SweepArgs};
use crate::failure::Failure;

const VERSION: &str = env!("CARGO_PKG_VERSION");
const FIT_WINDOW: (f64, f64) = (0.5, 0.75);

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    version: &'static str,
    config: &'a RunConfig,
    #[serde(flatten)]
    body: T,
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Failure::Io(format!("writing {}: {e}", path.display())))
}

fn write_json<T: Serialize>(cfg: &RunConfig, name: &str, body: T) -> Result<(), Failure> {
    let env = Envelope {
        version: VERSION,
        config: cfg,
        body,
    };
    let mut text = serde_json::to_string_pretty(&env).map_err(|e| Failure::Io(format!("encoding {name}: {e}")))?;
    text.push('\n');
    write(&cfg.output_dir, name, &text)
}

fn prepare_output(cfg: &RunConfig) -> Result<(), Failure> {
    fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| Failure::Io(format!("creating {}: {e}", cfg.output_dir.display())))
}

fn grid(cfg: &RunConfig) -> Result<RadialGrid, Failure> {
    RadialGrid::new(cfg.r_max, cfg.n, cfg.spacing).map_err(Failure::at("grid"))
}

fn ground_state_for(cfg: &RunConfig, theta: f64) -> Result<GroundState, Failure> {
    let grid = grid(cfg)?;
    let gs = solve_ground_state(theta, &grid, cfg.ode_tol).map_err(Failure::at("ground state"))?;
    info!("ground state theta {theta}: Q(0) = {:.10}, residual {:.2e}", gs.shoot_param(), gs.residual());
    Ok(gs)
}

fn contraction_config(cfg: &RunConfig) -> ContractionConfig {
    ContractionConfig {
        tol: cfg.fp_tol,
        max_iter: cfg.max_iter,
        delta: cfg.delta,
        warm_start: None,
        relaxation: cfg.relaxation,
    }
}

#[derive(Serialize)]
struct GroundStateReport {
    header: GroundStateHeader,
    pohozaev: (f64, f64),
    decay: DecayFit,
}

pub fn ground_state(cfg: &RunConfig) -> Result<(), Failure> {
    prepare_output(cfg)?;
    if cfg.theta < 1.0 {
        warn!("theta = {} < 1: the contraction estimates do not apply", cfg.theta);
    }
    let gs = ground_state_for(cfg, cfg.theta)?;
    let pohozaev = pohozaev_residuals(&gs).map_err(Failure::at("integral identities"))?;
    let decay = fit_decay(gs.q(), FIT_WINDOW).map_err(Failure::at("tail fit"))?;
    write(&cfg.output_dir, "ground_state.csv", &gs.to_csv())?;
    write_json(
        cfg,
        "ground_state.json",
        GroundStateReport {
            header: gs.header(),
            pohozaev,
            decay,
        },
    )
}

#[derive(Serialize)]
struct SolveReport {
    ground_state: GroundStateHeader,
    delta: f64,
    fixed_point: BranchRecord,
    l4_residual: f64,
    spinor: SpinorHeader,
    decay: Decays,
    mass_gap: f64,
    shooting: Option<ShootingReport>,
}

#[derive(Serialize)]
struct Decays {
    e1: DecayFit,
    e2: DecayFit,
    f: DecayFit,
    g: DecayFit,
}

#[derive(Serialize)]
struct ShootingReport {
    header: SpinorHeader,
    comparison: ComparisonRecord,
}

pub fn solve(cfg: &RunConfig) -> Result<(), Failure> {
    let epsilon = cfg.require_epsilon()?;
    cfg.require_contraction_range()?;
    prepare_output(cfg)?;
    let gs = ground_state_for(cfg, cfg.theta)?;
    let op = LinearizedOp::new(&gs).map_err(Failure::at("linearized operator"))?;
    let base = contraction_config(cfg);

    let mut warm: Option<PerturbationPair> = None;
    let mut last = None;
    for &e in cfg.path.iter().chain([epsilon].iter()) {
        let ctx = NonlinearContext::new(&gs, e).map_err(Failure::at("fixed point"))?;
        let local = ContractionConfig {
            warm_start: warm
                .take()
                .map(|p| PerturbationPair::new(p.fields().scale(e / p.epsilon()), e, cfg.theta)),
            ..base.clone()
        };
        let point = fixed_point_solve(&ctx, &op, &local).map_err(Failure::at("fixed point"))?;
        info!("epsilon {e}: {} iterations, |e| = {:.4e}", point.iterations, point.pair.w14_norm());
        warm = Some(point.pair.clone());
        last = Some((ctx, point));
    }
    let (ctx, point) = last.expect("path ends at epsilon");
    let l4_residual =
        fixed_point_residual(&ctx, &op, point.pair.fields(), NormSpec::l4()).map_err(Failure::at("fixed point"))?;

    let physical = rescale_to_physical(&point.pair, &gs).map_err(Failure::at("rescaling"))?;
    let spinor = SpinorHeader {
        residual: dirac_residual(&physical),
        ..physical.header()
    };
    let decay = Decays {
        e1: fit_decay(point.pair.e1(), FIT_WINDOW).map_err(Failure::at("decay fit"))?,
        e2: fit_decay(point.pair.e2(), FIT_WINDOW).map_err(Failure::at("decay fit"))?,
        f: fit_decay(physical.f(), FIT_WINDOW).map_err(Failure::at("decay fit"))?,
        g: fit_decay(physical.g(), FIT_WINDOW).map_err(Failure::at("decay fit"))?,
    };

    let shooting = if cfg.shoot {
        let shot = shoot_dirac_from(
            physical.omega(),
            cfg.theta,
            physical.grid(),
            cfg.ode_tol,
            ShootStart::Guess(physical.g0()),
        )
        .map_err(Failure::at("shooting"))?;
        let diff = compare_profiles(&physical, &shot).map_err(Failure::at("comparison"))?;
        info!("shooting agrees to {diff:.2e}");
        Some(ShootingReport {
            header: shot.header(),
            comparison: ComparisonRecord {
                omega: physical.omega(),
                theta: cfg.theta,
                relative_difference: diff,
            },
        })
    } else {
        None
    };

    let record = point_record(&point, cfg.theta);
    write(&cfg.output_dir, "spinor.csv", &physical.to_csv())?;
    write(&cfg.output_dir, "perturbation.csv", &point.pair.to_csv())?;
    write_json(
        cfg,
        "report.json",
        SolveReport {
            ground_state: gs.header(),
            delta: base.delta_for(&gs),
            fixed_point: record,
            l4_residual,
            spinor,
            decay,
            mass_gap: mass_gap(epsilon),
            shooting,
        },
    )
}

fn point_record(point: &nld_core::contraction::BranchPoint, theta: f64) -> BranchRecord {
    let norm = point.pair.w14_norm();
    BranchRecord {
        epsilon: point.epsilon,
        theta,
        iterations: point.iterations,
        residual: point.final_residual,
        w14_norm: norm,
        norm_over_epsilon: norm / point.epsilon,
        contraction_factor: point.contraction_factor,
    }
}

#[derive(Serialize)]
struct Rejected {
    epsilon: f64,
    error: String,
}

#[derive(Serialize)]
struct BranchReport {
    theta: f64,
    rejected: Vec<Rejected>,
    epsilon_limit: Option<f64>,
    records: Vec<BranchRecord>,
    scaling_fit: Option<LogLogFit>,
    max_gap: Option<f64>,
    refined_max_gap: Option<f64>,
    refined_gap_ratio: Option<f64>,
}

#[derive(Serialize)]
struct SweepReport {
    branches: Vec<BranchReport>,
}

fn validate_epsilons(eps: &[f64]) -> Result<(), Failure> {
    if eps.is_empty() {
        return Err(Failure::Usage("--epsilons needs at least one value".into()));
    }
    if let Some(bad) = eps.iter().find(|e| !(**e > 0.0 && **e < 0.5)) {
        return Err(Failure::Usage(format!("epsilon {bad} outside (0, 1/2)")));
    }
    if eps.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Failure::Usage("--epsilons must be strictly decreasing".into()));
    }
    Ok(())
}

fn tag(x: f64) -> String {
    format!("{x:e}").replace('.', "p")
}

/// One branch: leading values that fail from a cold start are rejected,
/// the rest are continued.
fn run_branch(cfg: &RunConfig, theta: f64, eps: &[f64], refine: bool) -> Result<BranchReport, Failure> {
    let gs = ground_state_for(cfg, theta)?;
    let op = LinearizedOp::new(&gs).map_err(Failure::at("linearized operator"))?;
    let base = contraction_config(cfg);
    let mut rejected = Vec::new();
    let mut first = None;
    for (k, &e) in eps.iter().enumerate() {
        let ctx = NonlinearContext::new(&gs, e).map_err(Failure::at("branch"))?;
        match fixed_point_solve(&ctx, &op, &base) {
            Ok(_) => {
                first = Some(k);
                break;
            }
            Err(err) if err.is_solver_failure() => {
                info!("theta {theta}: epsilon {e} rejected: {err}");
                rejected.push(Rejected {
                    epsilon: e,
                    error: err.to_string(),
                });
            }
            Err(err) => return Err(Failure::at("branch")(err)),
        }
    }
    let Some(first) = first else {
        return Ok(BranchReport {
            theta,
            rejected,
            epsilon_limit: None,
            records: Vec::new(),
            scaling_fit: None,
            max_gap: None,
            refined_max_gap: None,
            refined_gap_ratio: None,
        });
    };
    let rest = &eps[first..];
    let branch = continue_branch(&gs, &op, rest, &base).map_err(Failure::at("continuation"))?;
    for p in &branch.points {
        let name = format!("branch_theta{}_eps{}.csv", tag(theta), tag(p.epsilon));
        write(&cfg.output_dir, &name, &p.pair.to_csv())?;
    }
    let scaling_fit = if branch.points.len() >= 2 {
        Some(branch.scaling_fit().map_err(Failure::at("scaling fit"))?)
    } else {
        None
    };
    let max_gap = branch.max_gap().map_err(Failure::at("branch gaps"))?;
    let (refined_max_gap, refined_gap_ratio) = if refine && rest.len() >= 2 {
        let fine = continue_branch(&gs, &op, &refine_epsilons(rest), &base).map_err(Failure::at("refined continuation"))?;
        let g = fine.max_gap().map_err(Failure::at("branch gaps"))?;
        (Some(g), Some(g / max_gap))
    } else {
        (None, None)
    };
    Ok(BranchReport {
        theta,
        rejected,
        epsilon_limit: Some(rest[0]),
        records: branch.records(),
        scaling_fit,
        max_gap: (rest.len() >= 2).then_some(max_gap),
        refined_max_gap,
        refined_gap_ratio,
    })
}

pub fn sweep(cfg: &RunConfig, args: &SweepArgs) -> Result<(), Failure> {
    validate_epsilons(&args.epsilons)?;
    let thetas = args.thetas.clone().unwrap_or_else(|| vec![cfg.theta]);
    if thetas.is_empty() {
        return Err(Failure::Usage("--thetas needs at least one value".into()));
    }
    for &t in &thetas {
        RunConfig { theta: t, ..cfg.clone() }.require_contraction_range()?;
    }
    prepare_output(cfg)?;
    let results: Vec<Result<BranchReport, Failure>> = std::thread::scope(|s| {
        let handles: Vec<_> = thetas
            .iter()
            .map(|&t| s.spawn(move || run_branch(cfg, t, &args.epsilons, args.refine)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("branch thread panicked")).collect()
    });
    let branches = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    write_json(cfg, "branch.json", SweepReport { branches })
}

#[derive(Serialize)]
struct SweepWithRefinement {
    #[serde(flatten)]
    record: SweepRecord,
    refined_max_ratio: Option<f64>,
    relative_change: Option<f64>,
}

#[derive(Serialize)]
struct HardyRow {
    p: &'static str,
    fields: usize,
    max_ratio: f64,
    sharp_constant: f64,
}

#[derive(Serialize)]
struct ExactZeros {
    samples: usize,
    all_zero: bool,
}

#[derive(Serialize)]
struct CounterexampleRow {
    alpha: f64,
    epsilons: Vec<f64>,
    ratios: Vec<f64>,
    growth_slope: f64,
}

#[derive(Serialize)]
struct LemmaReport {
    sweeps: Vec<SweepWithRefinement>,
    exact_zeros: Option<ExactZeros>,
    hardy: Vec<HardyRow>,
    counterexample: Vec<CounterexampleRow>,
}

const HARDY_RMAX: f64 = 40.0;
const HARDY_NODES: usize = 8000;
const COUNTEREXAMPLE_THETA: f64 = 0.5;
const COUNTEREXAMPLE_R0: f64 = 5.0;
const EXACT_ZERO_SAMPLES: usize = 10_000;

pub fn lemmas(cfg: &RunConfig, args: &LemmaArgs) -> Result<(), Failure> {
    if args.theta_list.is_empty() {
        return Err(Failure::Usage("--theta-list needs at least one value".into()));
    }
    if let Some(bad) = args.theta_list.iter().find(|t| !(**t > 0.0 && **t < 2.0)) {
        return Err(Failure::Usage(format!(
            "theta = {bad} outside the admissible range 0 < theta < 2"
        )));
    }
    prepare_output(cfg)?;
    let mut sweeps = Vec::new();
    for &theta in &args.theta_list {
        let mut cases = vec![(Inequality::Remainder, 10.0, args.points), (Inequality::Difference, 10.0, args.points)];
        if theta >= 1.0 {
            cases.push((Inequality::MixedDifference, 5.0, args.points_3d));
        }
        for (ineq, extent, n) in cases {
            let record = run_sweep(ineq, theta, extent, n).map_err(Failure::at("inequality sweep"))?;
            let refined = if args.refine {
                Some(run_sweep(ineq, theta, extent, 2 * n - 1).map_err(Failure::at("inequality sweep"))?.max_ratio)
            } else {
                None
            };
            sweeps.push(SweepWithRefinement {
                relative_change: refined.map(|f| (f - record.max_ratio).abs() / f),
                refined_max_ratio: refined,
                record,
            });
        }
    }

    let exact_zeros = if args.theta_list.contains(&1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut all_zero = true;
        for _ in 0..EXACT_ZERO_SAMPLES {
            let a: f64 = rng.gen_range(-100.0..100.0);
            let b = rng.gen_range(-0.2..0.2) * a.abs();
            let c = rng.gen_range(-0.2..0.2) * a.abs();
            all_zero &= mixed_difference_ratio(a, b, c, 1.0).map_err(Failure::at("exact zeros"))? == 0.0;
        }
        Some(ExactZeros {
            samples: EXACT_ZERO_SAMPLES,
            all_zero,
        })
    } else {
        None
    };

    let hardy_grid = RadialGrid::new(HARDY_RMAX, HARDY_NODES, Spacing::Uniform).map_err(Failure::at("hardy"))?;
    let fields = random_hardy_fields(&hardy_grid, args.hardy_fields, cfg.seed);
    let mut hardy = Vec::new();
    for (label, p) in [("2", 2.0), ("4", 4.0), ("inf", f64::INFINITY)] {
        let rec = hardy_suite(&fields, p).map_err(Failure::at("hardy"))?;
        hardy.push(HardyRow {
            p: label,
            fields: rec.fields,
            max_ratio: rec.max_ratio,
            sharp_constant: rec.sharp_constant,
        });
    }

    let gs = ground_state_for(cfg, COUNTEREXAMPLE_THETA)?;
    let epsilons = vec![1e-2, 1e-3, 1e-4, 1e-5];
    let inverse: Vec<f64> = epsilons.iter().map(|e| 1.0 / e).collect();
    let mut counterexample = Vec::new();
    for alpha in [2.0, 0.5] {
        let ratios = epsilons
            .iter()
            .map(|&e| counterexample_ratio(e, alpha, COUNTEREXAMPLE_THETA, &gs, COUNTEREXAMPLE_R0))
            .collect::<Result<Vec<_>, _>>()
            .map_err(Failure::at("counterexample"))?;
        let growth_slope = loglog_fit(&inverse, &ratios).map_err(Failure::at("counterexample"))?.slope;
        counterexample.push(CounterexampleRow {
            alpha,
            epsilons: epsilons.clone(),
            ratios,
            growth_slope,
        });
    }

    let records: Vec<SweepRecord> = sweeps.iter().map(|s| s.record.clone()).collect();
    write(&cfg.output_dir, "sweeps.csv", &sweeps_to_csv(&records))?;
    write_json(
        cfg,
        "lemmas.json",
        LemmaReport {
            sweeps,
            exact_zeros,
            hardy,
            counterexample,
        },
    )
}
