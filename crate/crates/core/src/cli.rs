//! Command-line interface.
//!
//! Every study command resolves a system (from a config file or a built-in
//! example), runs, prints a short summary to stdout, and writes its data
//! products plus a checksummed manifest into an output directory. Exit
//! codes: 0 on success, 2 for input/validation problems, 3 for numerical
//! failures.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config_io::{
    csv_float, load_config, resolve_output_dir, write_outputs, ExperimentConfig, GammaSpec,
    NamedOutput, OutputPayload, SystemSpec,
};
use crate::critical::{
    feasibility, gamma_sb, upper_bound_with, UpperBoundOptions, DEFAULT_BISECT_TOL,
};
use crate::error::{Result, RreError};
use crate::maps::{solve_dare, DEFAULT_DARE_MAX_ITER, DEFAULT_DARE_TOL};
use crate::model::{
    check_detectability, check_stabilizability, rows_from_dmatrix, spectral_abscissa, RawSystem,
    SymMatrix, SystemModel, DEFAULT_PBH_TOL,
};
use crate::presets::{scalar_example, ten_dim_example, TEN_DIM_DEFAULT_SEED};
use crate::simulator::{run_rre, ArrivalProcess};
use crate::stats::{ensemble_at_time, ergodic_average, ScalarFunctional};
use crate::support::{
    enumerate_support, scalar_affine_check, scalar_partition, SupportAtlas, DEFAULT_DEDUPE_TOL,
    DEFAULT_MAX_NODES,
};

#[derive(Parser, Debug)]
#[command(
    name = "rre",
    version,
    about = "Random Riccati recursions under intermittent observations: \
             simulation, support enumeration, and critical arrival rates"
)]
struct Cli {
    /// Worker threads for ensemble commands (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a config or example system and print its structural properties.
    Validate {
        #[command(flatten)]
        source: SourceArgs,
    },
    /// Solve the steady-state Riccati fixed point and gain.
    Dare {
        #[command(flatten)]
        source: SourceArgs,
        /// Relative fixed-point tolerance.
        #[arg(long, default_value_t = DEFAULT_DARE_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_DARE_MAX_ITER)]
        max_iter: usize,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Run one covariance trajectory and write it as CSV.
    Simulate {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Also write every matrix entry (columns p_i_j).
        #[arg(long)]
        full_matrix: bool,
        /// Initial covariance.
        #[arg(long, value_enum, default_value_t = P0Choice::Q)]
        p0: P0Choice,
    },
    /// Empirical distribution of a covariance functional at a fixed time,
    /// one ensemble per arrival rate.
    Cdf {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = FunctionalName::Trace)]
        functional: FunctionalName,
        /// Threshold for the exceedance functional.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, value_enum, default_value_t = P0Choice::Q)]
        p0: P0Choice,
    },
    /// Enumerate the support of the invariant distribution up to a depth.
    Support {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Relative Frobenius tolerance for node deduplication.
        #[arg(long, default_value_t = DEFAULT_DEDUPE_TOL)]
        dedupe_tol: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_NODES)]
        max_nodes: usize,
    },
    /// Band/hole decomposition and self-similarity report for the scalar
    /// example's support.
    ScalarFractal {
        #[command(flatten)]
        run: RunArgs,
        /// Number of bands beyond the first to model.
        #[arg(long, default_value_t = 6)]
        levels: usize,
    },
    /// Lower and upper bounds on the critical arrival probability.
    Critical {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, default_value_t = DEFAULT_BISECT_TOL)]
        bisect_tol: f64,
        /// Also scan scaled gains (grid size) for a possibly tighter upper
        /// bound.
        #[arg(long, value_name = "POINTS")]
        gain_scan: Option<usize>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Long-run time average of a covariance functional along one path.
    Ergodic {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = FunctionalName::Trace)]
        functional: FunctionalName,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, value_enum, default_value_t = P0Choice::Q)]
        p0: P0Choice,
    },
}

/// Where the system comes from: a config file or a built-in example.
#[derive(Args, Debug, Clone)]
struct SourceArgs {
    /// Experiment config (JSON).
    #[arg(
        long,
        value_name = "PATH",
        conflicts_with = "example",
        required_unless_present = "example"
    )]
    config: Option<PathBuf>,
    /// Built-in example system.
    #[arg(long, value_enum)]
    example: Option<ExampleName>,
    /// Seed for generating the ten-dimensional example.
    #[arg(long, requires = "example", default_value_t = TEN_DIM_DEFAULT_SEED)]
    example_seed: u64,
}

/// Flags that override the corresponding config fields.
#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// Arrival probability; repeat or comma-separate for sweeps.
    #[arg(long = "gamma", value_name = "P", value_delimiter = ',')]
    gamma: Vec<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    /// Output directory (default: config's output_dir, then
    /// $RRE_OUTPUT_ROOT/<command>, then rre-out/<command>).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

impl Default for RunArgs {
    fn default() -> Self {
        RunArgs {
            gamma: Vec::new(),
            seed: None,
            horizon: None,
            burn_in: None,
            replicates: None,
            depth: None,
            out: None,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ExampleName {
    /// A = sqrt(2), C = Q = R = 1.
    Scalar,
    /// Ten states, five outputs, spectral radius 1.25.
    TenDim,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum FunctionalName {
    Trace,
    LambdaMax,
    /// Indicator of the trace exceeding --threshold.
    Exceed,
}

impl FunctionalName {
    fn build(self, threshold: Option<f64>) -> Result<ScalarFunctional> {
        match self {
            FunctionalName::Trace => Ok(ScalarFunctional::Trace),
            FunctionalName::LambdaMax => Ok(ScalarFunctional::LambdaMax),
            FunctionalName::Exceed => {
                let thr = threshold.ok_or_else(|| {
                    RreError::InvalidArgument(
                        "--functional exceed needs --threshold".into(),
                    )
                })?;
                Ok(ScalarFunctional::IndicatorTraceAbove(thr))
            }
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum P0Choice {
    /// Start from the process noise covariance Q.
    Q,
    /// Start from the steady-state fixed point.
    Steady,
}

/// Parses the process arguments, runs, and returns the exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        // Fails only if a global pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// A resolved run: the effective config (after flag overrides), the system,
/// and where relative paths resolve from.
struct Resolved {
    cfg: ExperimentConfig,
    model: SystemModel,
}

fn resolve(source: &SourceArgs, run: &RunArgs) -> Result<Resolved> {
    let mut cfg = match (&source.config, source.example) {
        (Some(path), _) => load_config(path)?,
        (None, Some(example)) => {
            let model = match example {
                ExampleName::Scalar => scalar_example(),
                ExampleName::TenDim => ten_dim_example(source.example_seed)?,
            };
            ExperimentConfig {
                system: SystemSpec::Inline(RawSystem::from(&model)),
                gamma_bar: GammaSpec::default(),
                seed: 0,
                horizon: 1_000,
                burn_in: crate::simulator::DEFAULT_BURN_IN,
                replicates: 1_000,
                depth: crate::support::DEFAULT_DEPTH,
                output_dir: None,
            }
        }
        (None, None) => unreachable!("clap enforces one source"),
    };

    if !run.gamma.is_empty() {
        cfg.gamma_bar = if run.gamma.len() == 1 {
            GammaSpec::Single(run.gamma[0])
        } else {
            GammaSpec::List(run.gamma.clone())
        };
    }
    if let Some(s) = run.seed {
        cfg.seed = s;
    }
    if let Some(h) = run.horizon {
        cfg.horizon = h;
    }
    if let Some(b) = run.burn_in {
        cfg.burn_in = b;
    }
    if let Some(r) = run.replicates {
        cfg.replicates = r;
    }
    if let Some(d) = run.depth {
        cfg.depth = d;
    }
    cfg.validate()?;

    let base_dir = source
        .config
        .as_deref()
        .and_then(Path::parent)
        .unwrap_or_else(|| Path::new("."));
    let model = cfg.resolve_system(base_dir)?;
    Ok(Resolved { cfg, model })
}

fn single_gamma(cfg: &ExperimentConfig) -> Result<f64> {
    let gammas = cfg.gamma_bar.values();
    match gammas.as_slice() {
        [g] => Ok(*g),
        [] => Err(RreError::InvalidArgument(
            "this command needs an arrival probability: pass --gamma or set \
             gamma_bar in the config"
                .into(),
        )),
        more => Err(RreError::InvalidArgument(format!(
            "this command takes exactly one arrival probability, got {}",
            more.len()
        ))),
    }
}

fn gamma_sweep(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    let gammas = cfg.gamma_bar.values();
    if gammas.is_empty() {
        return Err(RreError::InvalidArgument(
            "this command needs at least one arrival probability: pass \
             --gamma or set gamma_bar in the config"
                .into(),
        ));
    }
    Ok(gammas)
}

fn initial_cov(m: &SystemModel, choice: P0Choice) -> Result<SymMatrix> {
    match choice {
        P0Choice::Q => Ok(m.q().clone()),
        P0Choice::Steady => {
            Ok(solve_dare(m, DEFAULT_DARE_TOL, DEFAULT_DARE_MAX_ITER)?.p_star)
        }
    }
}

fn out_dir(flag: Option<&Path>, cfg: &ExperimentConfig, run_name: &str) -> PathBuf {
    resolve_output_dir(flag, cfg.output_dir.as_deref(), run_name)
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Validate { source } => cmd_validate(&source),
        Command::Dare {
            source,
            tol,
            max_iter,
            out,
        } => cmd_dare(&source, tol, max_iter, out.as_deref()),
        Command::Simulate {
            source,
            run,
            full_matrix,
            p0,
        } => cmd_simulate(&source, &run, full_matrix, p0),
        Command::Cdf {
            source,
            run,
            functional,
            threshold,
            p0,
        } => cmd_cdf(&source, &run, functional, threshold, p0),
        Command::Support {
            source,
            run,
            dedupe_tol,
            max_nodes,
        } => cmd_support(&source, &run, dedupe_tol, max_nodes),
        Command::ScalarFractal { run, levels } => cmd_scalar_fractal(&run, levels),
        Command::Critical {
            source,
            bisect_tol,
            gain_scan,
            out,
        } => cmd_critical(&source, bisect_tol, gain_scan, out.as_deref()),
        Command::Ergodic {
            source,
            run,
            functional,
            threshold,
            p0,
        } => cmd_ergodic(&source, &run, functional, threshold, p0),
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn cmd_validate(source: &SourceArgs) -> Result<()> {
    let resolved = resolve(source, &RunArgs::default())?;
    let m = &resolved.model;
    println!("system: {} states, {} outputs", m.dim_n(), m.dim_m());
    println!("spectral radius of A: {:.6}", spectral_abscissa(m));
    println!(
        "detectable: {}    stabilizable: {}",
        yes_no(check_detectability(m, DEFAULT_PBH_TOL)),
        yes_no(check_stabilizability(m, DEFAULT_PBH_TOL))
    );
    println!(
        "Q strictly positive definite: {}",
        yes_no(m.q_strictly_positive())
    );
    let gammas = resolved.cfg.gamma_bar.values();
    if gammas.is_empty() {
        println!("arrival rates: none specified");
    } else {
        let list: Vec<String> = gammas.iter().map(|g| format!("{g}")).collect();
        println!("arrival rates: {}", list.join(", "));
    }
    println!("ok");
    Ok(())
}

fn cmd_dare(
    source: &SourceArgs,
    tol: f64,
    max_iter: usize,
    out: Option<&Path>,
) -> Result<()> {
    let resolved = resolve(source, &RunArgs::default())?;
    let started = Instant::now();
    let solution = solve_dare(&resolved.model, tol, max_iter)?;
    let solve_ms = started.elapsed().as_millis() as u64;

    println!(
        "fixed point: trace = {:.12}, lambda_max = {:.12}",
        solution.p_star.trace(),
        solution.p_star.lambda_max()
    );
    println!(
        "converged in {} iterations (residual {:.3e})",
        solution.iterations, solution.residual
    );

    let report = serde_json::json!({
        "p_star": rows_from_dmatrix(solution.p_star.as_dmatrix()),
        "gain": rows_from_dmatrix(&solution.gain),
        "trace": solution.p_star.trace(),
        "lambda_max": solution.p_star.lambda_max(),
        "iterations": solution.iterations,
        "residual": solution.residual,
        "tolerance": tol,
    });
    let dir = out_dir(out, &resolved.cfg, "dare");
    let mut timings = BTreeMap::new();
    timings.insert("solve".to_string(), solve_ms);
    write_outputs(
        &dir,
        &resolved.cfg,
        &[NamedOutput {
            name: "dare.json".into(),
            payload: OutputPayload::Json(report),
        }],
        timings,
    )?;
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_simulate(
    source: &SourceArgs,
    run: &RunArgs,
    full_matrix: bool,
    p0: P0Choice,
) -> Result<()> {
    let resolved = resolve(source, run)?;
    let gamma = single_gamma(&resolved.cfg)?;
    let m = &resolved.model;
    let start = initial_cov(m, p0)?;
    let ap = ArrivalProcess::new(gamma, resolved.cfg.seed)?;

    let started = Instant::now();
    let traj = run_rre(m, &ap, &start, resolved.cfg.horizon)?;
    let sim_ms = started.elapsed().as_millis() as u64;

    let n = m.dim_n();
    let mut header = vec![
        "t".to_string(),
        "arrival".to_string(),
        "trace".to_string(),
        "lambda_max".to_string(),
    ];
    if full_matrix {
        for i in 0..n {
            for j in 0..n {
                header.push(format!("p_{i}_{j}"));
            }
        }
    }
    let mut rows = Vec::with_capacity(traj.covs.len());
    for (t, cov) in traj.covs.iter().enumerate() {
        let mut row = vec![
            t.to_string(),
            if t == 0 {
                String::new()
            } else {
                (traj.arrivals[t - 1] as u8).to_string()
            },
            csv_float(cov.trace()),
            csv_float(cov.lambda_max()),
        ];
        if full_matrix {
            for i in 0..n {
                for j in 0..n {
                    row.push(csv_float(cov.get(i, j)));
                }
            }
        }
        rows.push(row);
    }

    let last = traj.covs.last().expect("horizon >= 0 keeps p0");
    println!(
        "simulated {} steps at rate {gamma}: final trace = {:.6}, lambda_max = {:.6}",
        traj.horizon(),
        last.trace(),
        last.lambda_max()
    );

    let dir = out_dir(run.out.as_deref(), &resolved.cfg, "simulate");
    let mut timings = BTreeMap::new();
    timings.insert("simulate".to_string(), sim_ms);
    write_outputs(
        &dir,
        &resolved.cfg,
        &[NamedOutput {
            name: "trajectory.csv".into(),
            payload: OutputPayload::Csv { header, rows },
        }],
        timings,
    )?;
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_cdf(
    source: &SourceArgs,
    run: &RunArgs,
    functional: FunctionalName,
    threshold: Option<f64>,
    p0: P0Choice,
) -> Result<()> {
    let resolved = resolve(source, run)?;
    let gammas = gamma_sweep(&resolved.cfg)?;
    let h = functional.build(threshold)?;
    let m = &resolved.model;
    let start = initial_cov(m, p0)?;
    let cfg = &resolved.cfg;

    let mut outputs = Vec::new();
    let mut summaries = Vec::new();
    let mut timings = BTreeMap::new();
    println!(
        "{} replicates per rate, functional {} at t = {}",
        cfg.replicates,
        h.label(),
        cfg.horizon
    );
    for gamma in &gammas {
        let started = Instant::now();
        let dist = ensemble_at_time(
            m,
            *gamma,
            &start,
            cfg.horizon,
            cfg.replicates,
            h,
            cfg.seed,
        )?;
        timings.insert(
            format!("ensemble-{gamma:.4}"),
            started.elapsed().as_millis() as u64,
        );

        let len = dist.len();
        let rows: Vec<Vec<String>> = dist
            .samples()
            .iter()
            .enumerate()
            .map(|(i, v)| vec![csv_float(*v), csv_float((i + 1) as f64 / len as f64)])
            .collect();
        outputs.push(NamedOutput {
            name: format!("cdf-{gamma:.4}.csv"),
            payload: OutputPayload::Csv {
                header: vec!["value".into(), "cdf".into()],
                rows,
            },
        });

        let q10 = dist.quantile(0.10)?;
        let q90 = dist.quantile(0.90)?;
        println!(
            "rate {gamma}: median = {:.6}, q10 = {q10:.6}, q90 = {q90:.6}, max = {:.6}",
            dist.median(),
            dist.max()
        );
        summaries.push(serde_json::json!({
            "gamma_bar": gamma,
            "replicates": len,
            "mean": dist.mean(),
            "median": dist.median(),
            "q10": q10,
            "q90": q90,
            "min": dist.min(),
            "max": dist.max(),
        }));
    }
    outputs.push(NamedOutput {
        name: "cdf-summary.json".into(),
        payload: OutputPayload::Json(serde_json::json!({
            "functional": h.label(),
            "time": cfg.horizon,
            "per_rate": summaries,
        })),
    });

    let dir = out_dir(run.out.as_deref(), cfg, "cdf");
    write_outputs(&dir, cfg, &outputs, timings)?;
    println!("wrote {}", dir.display());
    Ok(())
}

fn atlas_outputs(atlas: &SupportAtlas) -> NamedOutput {
    let rows: Vec<Vec<String>> = atlas
        .nodes()
        .iter()
        .map(|node| {
            vec![
                node.word.to_string(),
                node.word.len().to_string(),
                csv_float(node.matrix.trace()),
                csv_float(node.matrix.lambda_max()),
            ]
        })
        .collect();
    NamedOutput {
        name: "atlas.csv".into(),
        payload: OutputPayload::Csv {
            header: vec![
                "word".into(),
                "length".into(),
                "trace".into(),
                "lambda_max".into(),
            ],
            rows,
        },
    }
}

fn cmd_support(
    source: &SourceArgs,
    run: &RunArgs,
    dedupe_tol: f64,
    max_nodes: usize,
) -> Result<()> {
    let resolved = resolve(source, run)?;
    let m = &resolved.model;
    let cfg = &resolved.cfg;
    let p_star = solve_dare(m, DEFAULT_DARE_TOL, DEFAULT_DARE_MAX_ITER)?.p_star;

    let started = Instant::now();
    let atlas = enumerate_support(m, &p_star, cfg.depth, dedupe_tol, max_nodes)?;
    let enum_ms = started.elapsed().as_millis() as u64;

    let traces: Vec<f64> = atlas.nodes().iter().map(|n| n.matrix.trace()).collect();
    let min_trace = traces.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_trace = traces.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!(
        "{} distinct nodes up to depth {} (dedupe tolerance {:.1e})",
        atlas.len(),
        atlas.depth,
        atlas.dedupe_tol
    );
    println!("trace range: [{min_trace:.6}, {max_trace:.6}]");

    let summary = serde_json::json!({
        "depth": atlas.depth,
        "dedupe_tol": atlas.dedupe_tol,
        "complete": atlas.complete,
        "node_count": atlas.len(),
        "min_trace": min_trace,
        "max_trace": max_trace,
    });
    let dir = out_dir(run.out.as_deref(), cfg, "support");
    let mut timings = BTreeMap::new();
    timings.insert("enumerate".to_string(), enum_ms);
    write_outputs(
        &dir,
        cfg,
        &[
            atlas_outputs(&atlas),
            NamedOutput {
                name: "support-summary.json".into(),
                payload: OutputPayload::Json(summary),
            },
        ],
        timings,
    )?;
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_scalar_fractal(run: &RunArgs, levels: usize) -> Result<()> {
    let source = SourceArgs {
        config: None,
        example: Some(ExampleName::Scalar),
        example_seed: TEN_DIM_DEFAULT_SEED,
    };
    let resolved = resolve(&source, run)?;
    let m = &resolved.model;
    let cfg = &resolved.cfg;
    let p_star = SymMatrix::scalar(1.0 + std::f64::consts::SQRT_2)?;

    let started = Instant::now();
    let atlas = enumerate_support(m, &p_star, cfg.depth, DEFAULT_DEDUPE_TOL, DEFAULT_MAX_NODES)?;
    let partition = scalar_partition(&atlas, levels)?;
    let affine_deviation = scalar_affine_check(&atlas)?;
    let enum_ms = started.elapsed().as_millis() as u64;

    println!(
        "{} nodes at depth {}; self-similarity deviation {:.3e}",
        atlas.len(),
        atlas.depth,
        affine_deviation
    );
    let mut bands = Vec::new();
    for (n, bucket) in partition.buckets.iter().enumerate() {
        let (lo, hi) = partition.bucket_ranges[n];
        println!(
            "band {n}: {} nodes in [{lo:.6}, {hi:.6}]",
            bucket.len()
        );
        bands.push(serde_json::json!({
            "index": n,
            "lo": lo,
            "hi": hi,
            "count": bucket.len(),
            "min": bucket.first().copied(),
            "max": bucket.last().copied(),
        }));
    }
    if !partition.hole_violations.is_empty() {
        println!(
            "WARNING: {} nodes fall inside provably empty holes",
            partition.hole_violations.len()
        );
    }

    let holes: Vec<serde_json::Value> = partition
        .holes
        .iter()
        .enumerate()
        .map(|(n, (lo, hi))| {
            serde_json::json!({"index": n, "lo": lo, "hi": hi, "length": hi - lo})
        })
        .collect();
    let node_rows: Vec<Vec<String>> = atlas
        .nodes()
        .iter()
        .map(|node| {
            vec![
                node.word.to_string(),
                node.word.len().to_string(),
                csv_float(node.matrix.trace()),
            ]
        })
        .collect();
    let report = serde_json::json!({
        "depth": atlas.depth,
        "node_count": atlas.len(),
        "affine_deviation": affine_deviation,
        "bands": bands,
        "holes": holes,
        "hole_violation_count": partition.hole_violations.len(),
        "beyond_count": partition.beyond.len(),
    });

    let dir = out_dir(run.out.as_deref(), cfg, "scalar-fractal");
    let mut timings = BTreeMap::new();
    timings.insert("enumerate".to_string(), enum_ms);
    write_outputs(
        &dir,
        cfg,
        &[
            NamedOutput {
                name: "nodes.csv".into(),
                payload: OutputPayload::Csv {
                    header: vec!["word".into(), "length".into(), "value".into()],
                    rows: node_rows,
                },
            },
            NamedOutput {
                name: "fractal-report.json".into(),
                payload: OutputPayload::Json(report),
            },
        ],
        timings,
    )?;
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_critical(
    source: &SourceArgs,
    bisect_tol: f64,
    gain_scan: Option<usize>,
    out: Option<&Path>,
) -> Result<()> {
    let resolved = resolve(source, &RunArgs::default())?;
    let m = &resolved.model;

    let started = Instant::now();
    let bounds = upper_bound_with(
        m,
        UpperBoundOptions {
            bisect_tol,
            gain_scale_scan: gain_scan,
        },
    )?;
    let solve_ms = started.elapsed().as_millis() as u64;
    let weak = gamma_sb(m);
    let at_lower = feasibility(m, bounds.lower, &bounds.gain)?;

    println!("spectral radius of A: {:.6}", bounds.alpha);
    println!(
        "critical arrival probability bracket: [{:.6}, {:.6}]",
        bounds.lower, bounds.upper
    );
    println!(
        "fixed-gain radius: {:.6} at the upper bound, {:.6} at the lower",
        bounds.spectral_radius_at_upper, at_lower.spectral_radius
    );
    match weak {
        Some(g) => println!("boundedness in probability holds for every rate > {g}"),
        None => println!(
            "boundedness in probability: no statement (system is not \
             detectable and stabilizable)"
        ),
    }

    let report = serde_json::json!({
        "alpha": bounds.alpha,
        "lower": bounds.lower,
        "upper": bounds.upper,
        "bisect_tol": bounds.bisect_tol,
        "spectral_radius_at_upper": bounds.spectral_radius_at_upper,
        "gain": rows_from_dmatrix(&bounds.gain),
        "notes": bounds.notes,
        "weak_sense_critical": weak,
    });
    let dir = out_dir(out, &resolved.cfg, "critical");
    let mut timings = BTreeMap::new();
    timings.insert("bounds".to_string(), solve_ms);
    write_outputs(
        &dir,
        &resolved.cfg,
        &[NamedOutput {
            name: "critical.json".into(),
            payload: OutputPayload::Json(report),
        }],
        timings,
    )?;
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_ergodic(
    source: &SourceArgs,
    run: &RunArgs,
    functional: FunctionalName,
    threshold: Option<f64>,
    p0: P0Choice,
) -> Result<()> {
    let resolved = resolve(source, run)?;
    let gamma = single_gamma(&resolved.cfg)?;
    let h = functional.build(threshold)?;
    let m = &resolved.model;
    let cfg = &resolved.cfg;
    let start = initial_cov(m, p0)?;
    let ap = ArrivalProcess::new(gamma, cfg.seed)?;

    let started = Instant::now();
    let estimate = ergodic_average(m, &ap, &start, h, cfg.burn_in, cfg.horizon)?;
    let run_ms = started.elapsed().as_millis() as u64;

    println!(
        "time average of {} over ({}, {}]: {:.8}",
        h.label(),
        cfg.burn_in,
        cfg.horizon,
        estimate.value
    );
    let d = &estimate.diagnostic;
    if d.divergent {
        println!(
            "WARNING: running average grew {}x over the second half{} — \
             the path shows no sign of settling",
            if d.growth_ratio.is_finite() {
                format!("{:.1}", d.growth_ratio)
            } else {
                "inf".to_string()
            },
            if d.nonfinite { " (overflowed)" } else { "" }
        );
    }

    let report = serde_json::json!({
        "gamma_bar": gamma,
        "seed": cfg.seed,
        "burn_in": cfg.burn_in,
        "horizon": cfg.horizon,
        "functional": h.label(),
        "value": estimate.value,
        "diagnostic": {
            "halfway_average": d.halfway_average,
            "final_average": d.final_average,
            "growth_ratio": d.growth_ratio,
            "nonfinite": d.nonfinite,
            "divergent": d.divergent,
        },
    });
    let dir = out_dir(run.out.as_deref(), cfg, "ergodic");
    let mut timings = BTreeMap::new();
    timings.insert("average".to_string(), run_ms);
    write_outputs(
        &dir,
        cfg,
        &[NamedOutput {
            name: "ergodic.json".into(),
            payload: OutputPayload::Json(report),
        }],
        timings,
    )?;
    println!("wrote {}", dir.display());
    Ok(())
}
