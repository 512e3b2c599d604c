//! `tacnog` — command-line front end for the guidance toolkit.
//!
//! Subcommands cover the whole pipeline: sweep the costate grid into a
//! dataset, train the policy network, solve boundary-value problems by
//! shooting, run closed-loop simulations, and audit the invariants the
//! pipeline relies on. All outputs are plain CSV/JSON. Exit codes: 0 on
//! success, 1 on a domain error, 2 on a usage error.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tacnog_core::dataset::{generate_dataset, read_dataset, write_dataset, SweepConfig};
use tacnog_core::extremal::{
    check_disconjugacy, propagate_extremal, propagate_raw, scaling_covariance_deviation,
    CostateParams, DEFAULT_DISCONJUGACY_TOL, DEFAULT_STEP,
};
use tacnog_core::model::{canonicalize, DimensionalScenario};
use tacnog_core::policy::{train, PolicyNetwork, TrainConfig};
use tacnog_core::shooting::{multistart, solve, MultistartConfig, ShootingProblem};
use tacnog_core::sim::{default_steps, run_closed_loop, write_trace_csv, OraclePolicy, SimSummary};

#[derive(Parser)]
#[command(name = "tacnog", version, about = "Time- and angle-constrained nonlinear optimal guidance toolkit")]
struct Cli {
    /// Seed for every random draw in the run.
    #[arg(long, global = true, env = "TACNOG_SEED", default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the costate grid and write the filtered training set.
    GenDataset(GenDatasetArgs),
    /// Train the policy network on a dataset.
    Train(TrainArgs),
    /// Solve the boundary-value problem for a scenario by shooting.
    Shoot(ShootArgs),
    /// Run a closed-loop engagement.
    Simulate(SimulateArgs),
    /// Check the time-scaling covariance of the extremal flow.
    EvalScaling(EvalScalingArgs),
    /// Re-propagate every dataset record and verify it reproduces.
    Replay(ReplayArgs),
    /// Measure policy inference latency.
    BenchInfer(BenchInferArgs),
}

#[derive(Args)]
struct GenDatasetArgs {
    /// Grid extent for each costate component.
    #[arg(long)]
    pmax: f64,
    /// Grid spacing.
    #[arg(long)]
    step: f64,
    /// Propagation horizon.
    #[arg(long, default_value_t = 1.5)]
    horizon: f64,
    /// Integrator step.
    #[arg(long, default_value_t = DEFAULT_STEP)]
    integ_step: f64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (0 = rayon default).
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset CSV produced by gen-dataset.
    #[arg(long)]
    data: PathBuf,
    /// Output weights JSON.
    #[arg(long)]
    out: PathBuf,
    /// Horizon the dataset was generated at.
    #[arg(long, default_value_t = 1.5)]
    horizon: f64,
    #[arg(long, default_value_t = 400)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 0.1)]
    val_frac: f64,
    /// Optional CSV of per-epoch losses.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args)]
struct ShootArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Search from a grid of initial guesses instead of a single solve.
    #[arg(long)]
    multistart: bool,
    /// Initial guess components for the single-solve mode.
    #[arg(long, default_value_t = 0.0)]
    qx: f64,
    #[arg(long, default_value_t = 0.0)]
    qy: f64,
    #[arg(long, default_value_t = 0.0)]
    qc: f64,
    /// Output JSON path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Trained weights JSON; mutually exclusive with --oracle.
    #[arg(long, conflicts_with = "oracle")]
    model: Option<PathBuf>,
    /// Use the exact shooting oracle as the policy.
    #[arg(long)]
    oracle: bool,
    /// Guidance step; defaults to one hundredth of the impact time.
    #[arg(long)]
    dt: Option<f64>,
    /// Plant substeps per guidance step.
    #[arg(long, default_value_t = 10)]
    plant_substeps: usize,
    /// Output JSON summary path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional CSV trace path.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct EvalScalingArgs {
    /// Number of random accepted parameter triples to test.
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 1.5)]
    horizon: f64,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    integ_step: f64,
    /// Maximum allowed deviation.
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
}

#[derive(Args)]
struct ReplayArgs {
    /// Dataset CSV to audit.
    #[arg(long)]
    data: PathBuf,
    /// Horizon the dataset was generated at.
    #[arg(long, default_value_t = 1.5)]
    horizon: f64,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    integ_step: f64,
    /// Also re-check disconjugacy at a ten times finer step.
    #[arg(long)]
    refine: bool,
}

#[derive(Args)]
struct BenchInferArgs {
    /// Trained weights JSON.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    iters: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::GenDataset(args) => gen_dataset(args),
        Command::Train(args) => train_cmd(args, cli.seed),
        Command::Shoot(args) => shoot(args),
        Command::Simulate(args) => simulate(args),
        Command::EvalScaling(args) => eval_scaling(args, cli.seed),
        Command::Replay(args) => replay(args),
        Command::BenchInfer(args) => bench_infer(args),
    }
}

fn gen_dataset(args: GenDatasetArgs) -> anyhow::Result<()> {
    let cfg = SweepConfig {
        p_max: args.pmax,
        step_q: args.step,
        horizon: args.horizon,
        step: args.integ_step,
    };
    println!(
        "config: pmax = {}, step = {}, horizon = {}, integ_step = {}, out = {}, workers = {}",
        cfg.p_max,
        cfg.step_q,
        cfg.horizon,
        cfg.step,
        args.out.display(),
        args.workers
    );
    let started = Instant::now();
    let (records, stats) = if args.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(args.workers)
            .build()
            .context("building worker pool")?;
        pool.install(|| generate_dataset(&cfg))?
    } else {
        generate_dataset(&cfg)?
    };
    write_dataset(&args.out, &records)?;
    println!(
        "sweep: total = {}, accepted = {}, rejected_disconjugacy = {}, rejected_colinear = {}, diverged = {} ({:.1?})",
        stats.total,
        stats.accepted,
        stats.rejected_disconjugacy,
        stats.rejected_colinear,
        stats.diverged,
        started.elapsed()
    );
    println!("wrote {} records to {}", records.len(), args.out.display());
    Ok(())
}

fn train_cmd(args: TrainArgs, seed: u64) -> anyhow::Result<()> {
    let cfg = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch,
        learning_rate: args.lr,
        validation_fraction: args.val_frac,
        seed,
        ..TrainConfig::default()
    };
    println!(
        "config: data = {}, out = {}, horizon = {}, epochs = {}, batch = {}, lr = {}, val_frac = {}, seed = {}",
        args.data.display(),
        args.out.display(),
        args.horizon,
        cfg.epochs,
        cfg.batch_size,
        cfg.learning_rate,
        cfg.validation_fraction,
        cfg.seed
    );
    let records = read_dataset(&args.data)?;
    let started = Instant::now();
    let (net, report) = train(&records, args.horizon, &cfg)?;
    net.save(&args.out)?;
    println!(
        "trained on {} records ({} train / {} validation) in {:.1?}",
        records.len(),
        report.train_count,
        report.validation_count,
        started.elapsed()
    );
    println!(
        "best epoch {} of {}: validation rmse = {:.6} ({:.3}% of control std {:.4})",
        report.best_epoch,
        cfg.epochs,
        report.validation_rmse,
        100.0 * report.validation_rmse / report.control_std.max(1e-300),
        report.control_std
    );
    if let Some(path) = args.history {
        let mut text = String::from("epoch,train_mse,validation_mse\n");
        for e in &report.history {
            text.push_str(&format!(
                "{},{:.16e},{:.16e}\n",
                e.epoch, e.train_mse, e.validation_mse
            ));
        }
        std::fs::write(&path, text)?;
        println!("wrote loss history to {}", path.display());
    }
    Ok(())
}

fn shoot(args: ShootArgs) -> anyhow::Result<()> {
    println!(
        "config: scenario = {}, multistart = {}, guess = ({}, {}, {})",
        args.scenario.display(),
        args.multistart,
        args.qx,
        args.qy,
        args.qc
    );
    let sc = DimensionalScenario::load(&args.scenario)?;
    let canonical = canonicalize(&sc)?;
    let prob = ShootingProblem::new(canonical.pursuer0, canonical.horizon);
    let solutions = if args.multistart {
        multistart(&prob, &MultistartConfig::default())?
    } else {
        vec![solve(&prob.with_guess(CostateParams::new(args.qx, args.qy, args.qc)))?]
    };
    let dim_factor = sc.speed * sc.speed;
    let report: Vec<serde_json::Value> = solutions
        .iter()
        .map(|s| {
            serde_json::json!({
                "q": [s.params.p_x, s.params.p_y, s.params.c_0],
                "residual_norm": s.residual_norm,
                "converged": s.converged,
                "iterations": s.iterations,
                "effort": s.effort,
                "effort_dimensional": s.effort * dim_factor,
                "disconjugate": s.disconjugate,
                "colinear_free": s.colinear_free,
            })
        })
        .collect();
    let text = serde_json::to_string_pretty(&report)?;
    match &args.out {
        Some(path) => {
            std::fs::write(path, &text)?;
            println!("wrote {} roots to {}", report.len(), path.display());
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let sc = DimensionalScenario::load(&args.scenario)?;
    let (default_dt, _) = default_steps(&sc);
    let dt = args.dt.unwrap_or(default_dt);
    let h = dt / args.plant_substeps.max(1) as f64;
    println!(
        "config: scenario = {}, policy = {}, dt = {dt}, plant_step = {h}",
        args.scenario.display(),
        if args.oracle {
            "oracle".to_string()
        } else {
            args.model
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        }
    );
    let result = if args.oracle {
        let mut policy = OraclePolicy::new(1.5, DEFAULT_STEP);
        run_closed_loop(&sc, &mut policy, dt, h)
    } else {
        let path = args
            .model
            .as_ref()
            .ok_or_else(|| anyhow!("either --model or --oracle is required"))?;
        let mut policy = PolicyNetwork::load(path)?;
        run_closed_loop(&sc, &mut policy, dt, h)
    };
    let result = match result {
        Ok(r) => r,
        Err(aborted) => {
            bail!(
                "run aborted after {} trace samples: {}",
                aborted.partial_trace.len(),
                aborted.reason
            );
        }
    };
    let summary = SimSummary::from_result(&result);
    let text = serde_json::to_string_pretty(&summary)?;
    match &args.out {
        Some(path) => {
            std::fs::write(path, &text)?;
            println!("wrote summary to {}", path.display());
        }
        None => println!("{text}"),
    }
    if let Some(path) = &args.trace {
        write_trace_csv(path, &result.trace)?;
        println!("wrote trace ({} samples) to {}", result.trace.len(), path.display());
    }
    Ok(())
}

fn eval_scaling(args: EvalScalingArgs, seed: u64) -> anyhow::Result<()> {
    println!(
        "config: samples = {}, horizon = {}, integ_step = {}, tolerance = {:.1e}, seed = {}",
        args.samples, args.horizon, args.integ_step, args.tolerance, seed
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lambdas = [0.25, 0.5, 2.0, 4.0];
    let mut tested = 0usize;
    let mut worst: f64 = 0.0;
    while tested < args.samples {
        let q = CostateParams::new(
            rng.random_range(-10.0..10.0),
            rng.random_range(-10.0..10.0),
            rng.random_range(-10.0..10.0),
        );
        // Only accepted extremals enter the dataset, so audit those.
        let traj = propagate_extremal(&q, args.horizon, args.integ_step)?;
        if !(traj.disconjugate && traj.colinear_free) {
            continue;
        }
        for &lambda in &lambdas {
            let dev = scaling_covariance_deviation(&q, args.horizon, args.integ_step, lambda)?;
            worst = worst.max(dev);
            if dev > args.tolerance {
                bail!(
                    "scaling covariance violated: q = ({}, {}, {}), lambda = {lambda}, deviation = {dev:.3e}",
                    q.p_x, q.p_y, q.c_0
                );
            }
        }
        tested += 1;
    }
    println!(
        "scaling covariance holds for {} accepted samples x {:?}: worst deviation = {:.3e}",
        tested, lambdas, worst
    );
    Ok(())
}

fn replay(args: ReplayArgs) -> anyhow::Result<()> {
    println!(
        "config: data = {}, horizon = {}, integ_step = {}, refine = {}",
        args.data.display(),
        args.horizon,
        args.integ_step,
        args.refine
    );
    let records = read_dataset(&args.data)?;
    let mut worst_state: f64 = 0.0;
    let mut worst_control: f64 = 0.0;
    let mut refinement_failures = 0usize;
    for rec in &records {
        let traj = propagate_raw(&rec.params, args.horizon, args.integ_step)?;
        let z = traj.terminal_state();
        for d in 0..3 {
            worst_state = worst_state.max((z[d] - rec.state[d]).abs());
        }
        worst_control = worst_control.max((traj.terminal_control() - rec.control).abs());
        if args.refine {
            let fine = propagate_raw(&rec.params, args.horizon, args.integ_step / 10.0)?;
            if !check_disconjugacy(&fine, 10.0 * fine.step, DEFAULT_DISCONJUGACY_TOL) {
                refinement_failures += 1;
                eprintln!(
                    "refinement failure: q = ({}, {}, {})",
                    rec.params.p_x, rec.params.p_y, rec.params.c_0
                );
            }
        }
    }
    println!(
        "replayed {} records: worst state deviation = {:.3e}, worst control deviation = {:.3e}",
        records.len(),
        worst_state,
        worst_control
    );
    if worst_state > 1e-10 || worst_control > 1e-10 {
        bail!("replay deviation exceeds 1e-10");
    }
    if args.refine {
        println!("refined disconjugacy failures: {refinement_failures}");
        if refinement_failures > 0 {
            bail!("{refinement_failures} records fail disconjugacy at the refined step");
        }
    }
    Ok(())
}

fn bench_infer(args: BenchInferArgs) -> anyhow::Result<()> {
    println!(
        "config: model = {}, iters = {}",
        args.model.display(),
        args.iters
    );
    let net = PolicyNetwork::load(&args.model)?;
    let mut acc = 0.0f64;
    let started = Instant::now();
    for i in 0..args.iters {
        let t = i as f64 * 1e-4;
        acc += net.forward([0.3 + t.sin() * 0.1, 1.2, -1.5]);
    }
    let elapsed = started.elapsed();
    let per_call = elapsed.as_secs_f64() / args.iters as f64;
    println!(
        "{} calls in {:.3?}: {:.3} us per call (accumulator {acc:.3e})",
        args.iters,
        elapsed,
        per_call * 1e6
    );
    if per_call > 1e-3 {
        bail!("inference latency {:.3} ms exceeds 1 ms", per_call * 1e3);
    }
    Ok(())
}
