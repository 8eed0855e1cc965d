use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use ksglasso::evaluate::{bic, edge_density, fit_grid, gamma_grid, points_from_fit, pr_auc, GridFit, PRPoint};
use ksglasso::io::{read_matrix_csv, read_sym_csv, write_key_values, write_matrix_csv};
use ksglasso::simulate::{sample_data, GraphSpec};
use ksglasso::solver::{Solver, SolverConfig, SweepSchedule, Termination};
use ksglasso::{sample_stats, DenseSymMatrix, KsModel, SampleStats};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::manifest::RunManifest;
use crate::{EstimateArgs, EvalArgs, Kind, SimulateArgs, SolverArgs};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_MAX_ITERS: u8 = 4;
pub const EXIT_NUMERICAL: u8 = 5;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(std::io::Error),
    Lib(ksglasso::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => f.write_str(msg),
            CliError::Io(e) => write!(f, "{e}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<ksglasso::Error> for CliError {
    fn from(e: ksglasso::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Lib(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use ksglasso::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
            CliError::Lib(e) => match e {
                E::Io(_) => EXIT_IO,
                E::Csv(c) if c.is_io_error() => EXIT_IO,
                E::Csv(_) | E::Dimension(_) | E::Input(_) | E::NotSymmetric { .. } | E::SizeCap { .. } => EXIT_USAGE,
                _ => EXIT_NUMERICAL,
            },
        }
    }

    fn diagnostic(&self) -> Value {
        let kind = match self {
            CliError::Usage(_) => "usage",
            CliError::Io(_) => "io",
            CliError::Lib(e) => match e {
                ksglasso::Error::LineSearch { .. } => "line_search",
                ksglasso::Error::NotPositiveDefinite { .. } => "not_positive_definite",
                ksglasso::Error::EigenNonConvergence { .. } => "eigen_nonconvergence",
                ksglasso::Error::Generation(_) => "generation",
                _ if self.exit_code() == EXIT_NUMERICAL => "numerical",
                _ if self.exit_code() == EXIT_IO => "io",
                _ => "input",
            },
        };
        json!({ "kind": kind, "message": self.to_string() })
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Writes the manifest for a run that failed after its output directory
/// was created, then reports the error's exit code.
fn record_failure(mut manifest: RunManifest, out: &Path, err: CliError, extra: Option<Value>) -> Result<u8, CliError> {
    let code = err.exit_code();
    let mut diag = err.diagnostic();
    if let (Some(extra), Some(obj)) = (extra, diag.as_object_mut()) {
        obj.insert("state".into(), extra);
    }
    manifest.diagnostic = Some(diag);
    manifest.write(out, "error", code)?;
    eprintln!("error: {err}");
    Ok(code)
}

fn create_out_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out)?;
    Ok(())
}

fn read_data(paths: &[PathBuf]) -> Result<SampleStats, CliError> {
    let data = paths.iter().map(|p| read_matrix_csv(p)).collect::<ksglasso::Result<Vec<_>>>()?;
    Ok(sample_stats(&data)?)
}

fn solver_config(args: &SolverArgs, gamma_theta: f64, gamma_psi: f64) -> SolverConfig {
    SolverConfig {
        gamma_theta,
        gamma_psi,
        k_trunc: args.k,
        rho: args.rho,
        epsilon: args.eps,
        max_newton_iters: args.max_iters,
        rng_seed: args.seed,
        screening: args.screening,
        sweep_schedule: args.sweeps.map_or(SweepSchedule::Increasing, SweepSchedule::Fixed),
        ..SolverConfig::default()
    }
}

fn config_json(cfg: &SolverConfig, p: usize, q: usize) -> Value {
    json!({
        "gamma_theta": cfg.gamma_theta,
        "gamma_psi": cfg.gamma_psi,
        "k_trunc": cfg.k_trunc,
        "rho": cfg.rho_for(p, q),
        "epsilon": cfg.epsilon,
        "consecutive_required": cfg.consecutive_required,
        "max_newton_iters": cfg.max_newton_iters,
        "sigma": cfg.sigma,
        "beta": cfg.beta,
        "max_backtracks": cfg.max_backtracks,
        "sweep_schedule": match cfg.sweep_schedule {
            SweepSchedule::Increasing => "increasing".to_string(),
            SweepSchedule::Fixed(n) => format!("fixed:{n}"),
        },
        "screening": cfg.screening,
        "p": p,
        "q": q,
    })
}

fn write_model(out: &Path, model: &KsModel, theta: &str, psi: &str) -> Result<Vec<String>, CliError> {
    write_matrix_csv(&out.join(theta), model.theta().as_matrix())?;
    write_matrix_csv(&out.join(psi), model.psi().as_matrix())?;
    Ok(vec![theta.to_string(), psi.to_string()])
}

pub fn simulate(args: &SimulateArgs, argv: &[String]) -> Result<u8, CliError> {
    let (p, q) = (args.p, args.q.unwrap_or(args.p));
    if p == 0 || q == 0 || args.n == 0 {
        return Err(usage("--p, --q and --n must be positive"));
    }
    let (theta_spec, psi_spec) = match args.kind {
        Kind::Random => {
            if args.blocks.is_some() {
                return Err(usage("--blocks applies to --kind clustered"));
            }
            let nnz = args.nnz.ok_or_else(|| usage("--kind random needs --nnz"))?;
            let nnz_psi = args.nnz_psi.unwrap_or_else(|| ((nnz * q) as f64 / p as f64).round() as usize);
            if nnz > p * p || nnz_psi > q * q {
                return Err(usage(format!("targets {nnz}/{nnz_psi} exceed {p}x{p} / {q}x{q} entries")));
            }
            (GraphSpec::random(p, nnz, args.seed), GraphSpec::random(q, nnz_psi, args.seed + 1))
        }
        Kind::Clustered => {
            if args.nnz.is_some() || args.nnz_psi.is_some() {
                return Err(usage("--nnz applies to --kind random"));
            }
            let blocks = args.blocks.ok_or_else(|| usage("--kind clustered needs --blocks"))?;
            if blocks == 0 || blocks > p.min(q) {
                return Err(usage(format!("--blocks must lie in 1..={}", p.min(q))));
            }
            (GraphSpec::clustered(p, blocks, args.seed), GraphSpec::clustered(q, blocks, args.seed + 1))
        }
    };
    let sample_seed = args.seed + 2;

    create_out_dir(&args.out)?;
    let mut manifest = RunManifest::start("simulate", argv, &args.out);
    manifest.config = json!({
        "kind": theta_spec.kind.as_str(),
        "p": p,
        "q": q,
        "n": args.n,
        "target_nnz": theta_spec.target_nnz,
        "target_nnz_psi": psi_spec.target_nnz,
        "blocks": args.blocks,
    });
    manifest.seeds = json!({
        "seed": args.seed,
        "theta": theta_spec.seed,
        "psi": psi_spec.seed,
        "samples": sample_seed,
    });

    let run = || -> Result<Vec<String>, CliError> {
        let truth = KsModel::new(theta_spec.generate()?, psi_spec.generate()?)?;
        let mut files = write_model(&args.out, &truth, "theta_true.csv", "psi_true.csv")?;
        let data = sample_data(&truth, args.n, &mut ChaCha8Rng::seed_from_u64(sample_seed));
        for (i, y) in data.iter().enumerate() {
            let name = format!("data_{i:03}.csv");
            write_matrix_csv(&args.out.join(&name), y)?;
            files.push(name);
        }
        let mut meta = vec![
            ("kind", theta_spec.kind.as_str().to_string()),
            ("p", p.to_string()),
            ("q", q.to_string()),
            ("n", args.n.to_string()),
            ("seed", args.seed.to_string()),
        ];
        match args.kind {
            Kind::Random => {
                meta.push(("target_nnz", theta_spec.target_nnz.to_string()));
                meta.push(("target_nnz_psi", psi_spec.target_nnz.to_string()));
            }
            Kind::Clustered => meta.push(("num_blocks", theta_spec.num_blocks.to_string())),
        }
        meta.push(("nnz_theta", truth.theta().nnz(0.0).to_string()));
        meta.push(("nnz_psi", truth.psi().nnz(0.0).to_string()));
        write_key_values(&args.out.join("metadata.txt"), &meta)?;
        files.push("metadata.txt".into());
        Ok(files)
    };
    match run() {
        Ok(files) => {
            manifest.add_artifacts(&args.out, &files)?;
            manifest.write(&args.out, "ok", EXIT_OK)?;
            Ok(EXIT_OK)
        }
        Err(e) => record_failure(manifest, &args.out, e, None),
    }
}

pub fn estimate(args: &EstimateArgs, argv: &[String]) -> Result<u8, CliError> {
    let stats = read_data(&args.data)?;
    let (p, q) = (stats.p(), stats.q());
    let cfg = solver_config(&args.solver, args.gamma_theta, args.gamma_psi.unwrap_or(args.gamma_theta));
    cfg.validate(p, q)?;

    create_out_dir(&args.out)?;
    let mut manifest = RunManifest::start("estimate", argv, &args.out);
    manifest.add_inputs(&args.data)?;
    manifest.config = config_json(&cfg, p, q);
    manifest.seeds = json!({ "rng_seed": cfg.rng_seed });

    let mut solver = Solver::new(&stats, cfg)?;
    if let Err(e) = solver.run() {
        solver.trace().write_csv(&args.out.join("trace.csv"), args.record_time)?;
        manifest.add_artifacts(&args.out, &["trace.csv".into()])?;
        let state = json!({
            "iteration": solver.iteration(),
            "objective": solver.objective().f,
            "min_pair_sum": solver.model().min_pair_sum(),
        });
        return record_failure(manifest, &args.out, e.into(), Some(state));
    }
    let fit = match solver.finish() {
        Ok(fit) => fit,
        Err(e) => return record_failure(manifest, &args.out, e.into(), None),
    };
    let mut files = write_model(&args.out, &fit.model, "theta_hat.csv", "psi_hat.csv")?;
    fit.trace.write_csv(&args.out.join("trace.csv"), args.record_time)?;
    files.push("trace.csv".into());
    manifest.add_artifacts(&args.out, &files)?;
    let code = match fit.termination {
        Termination::MaxIterations => EXIT_MAX_ITERS,
        Termination::Converged | Termination::Stationary => EXIT_OK,
    };
    manifest.write(&args.out, fit.termination.as_str(), code)?;
    if code == EXIT_MAX_ITERS {
        eprintln!("warning: stopped after {} iterations without converging", fit.trace.iterations());
    }
    Ok(code)
}

fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let grid = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| usage(format!("cannot parse grid value {s:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if grid.is_empty() {
        return Err(usage("gamma grid is empty"));
    }
    if let Some(bad) = grid.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
        return Err(usage(format!("grid values must be positive, got {bad}")));
    }
    Ok(grid)
}

fn read_truth(args: &EvalArgs, p: usize, q: usize) -> Result<Option<(DenseSymMatrix, DenseSymMatrix)>, CliError> {
    let (Some(tp), Some(pp)) = (&args.truth_theta, &args.truth_psi) else {
        return Ok(None);
    };
    let (theta, psi) = (read_sym_csv(tp)?, read_sym_csv(pp)?);
    if theta.dim() != p || psi.dim() != q {
        return Err(CliError::Lib(ksglasso::Error::Dimension(format!(
            "truth is {0}x{0} / {1}x{1}, data has p={p} q={q}",
            theta.dim(),
            psi.dim()
        ))));
    }
    Ok(Some((theta, psi)))
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

struct GridRow {
    gamma: f64,
    termination: Option<Termination>,
    iterations: Option<usize>,
    bic: Option<f64>,
    pr: Option<PRPoint>,
    nnz: Option<(usize, usize)>,
    error: Option<String>,
}

fn grid_row(stats: &SampleStats, fit: &GridFit, truth: Option<&(DenseSymMatrix, DenseSymMatrix)>) -> GridRow {
    let mut row = GridRow {
        gamma: fit.gamma,
        termination: None,
        iterations: None,
        bic: None,
        pr: None,
        nnz: None,
        error: None,
    };
    match &fit.outcome {
        Ok(res) => {
            row.termination = Some(res.termination);
            row.iterations = Some(res.trace.iterations());
            row.nnz = Some((res.model.theta().nnz_off(1e-8) / 2, res.model.psi().nnz_off(1e-8) / 2));
            match bic(stats, &res.model) {
                Ok(b) => row.bic = Some(b),
                Err(e) => row.error = Some(e.to_string()),
            }
            if let Some((t, p)) = truth {
                match points_from_fit(fit, (t, p)) {
                    Ok(pt) => row.pr = Some(pt),
                    Err(f) => row.error = Some(f.message),
                }
            }
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

fn write_table(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn eval(args: &EvalArgs, argv: &[String]) -> Result<u8, CliError> {
    let explicit_grid = args.gamma_grid.as_deref().map(parse_grid).transpose()?;
    let stats = read_data(&args.data)?;
    let (p, q) = (stats.p(), stats.q());
    let truth = read_truth(args, p, q)?;
    let grid = match explicit_grid {
        Some(g) => g,
        None => gamma_grid(&stats, args.grid_points, args.grid_ratio)?,
    };
    let cfg = solver_config(&args.solver, grid[0], grid[0]);
    cfg.validate(p, q)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| usage(format!("cannot start {} worker threads: {e}", args.jobs)))?;

    create_out_dir(&args.out)?;
    let mut manifest = RunManifest::start("eval", argv, &args.out);
    manifest.add_inputs(args.data.iter().chain(args.truth_theta.iter()).chain(args.truth_psi.iter()))?;
    let mut config = config_json(&cfg, p, q);
    config["gamma_grid"] = json!(grid);
    config["jobs"] = json!(args.jobs);
    manifest.config = config.clone();
    manifest.seeds = json!({ "rng_seed": cfg.rng_seed });

    let fits = pool.install(|| fit_grid(&stats, &grid, &cfg));
    let rows: Vec<GridRow> = fits.iter().map(|f| grid_row(&stats, f, truth.as_ref())).collect();

    let mut files = Vec::new();
    let nnz_cells = |r: &GridRow| match r.nnz {
        Some((a, b)) => (a.to_string(), b.to_string()),
        None => (String::new(), String::new()),
    };
    let bic_rows = rows
        .iter()
        .map(|r| {
            let (nt, np) = nnz_cells(r);
            vec![
                r.gamma.to_string(),
                opt(r.bic),
                r.termination.map_or("failed", |t| t.as_str()).to_string(),
                r.iterations.map_or(String::new(), |i| i.to_string()),
                nt,
                np,
                r.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    write_table(
        &args.out.join("bic.csv"),
        &["gamma", "bic", "termination", "iterations", "nnz_theta", "nnz_psi", "error"],
        bic_rows,
    )?;
    files.push("bic.csv".to_string());

    let mut metrics = json!({});
    if let Some((tt, tp)) = &truth {
        let pr_rows = rows
            .iter()
            .map(|r| {
                let (nt, np) = nnz_cells(r);
                vec![
                    r.gamma.to_string(),
                    opt(r.pr.as_ref().map(|x| x.precision)),
                    opt(r.pr.as_ref().map(|x| x.recall)),
                    nt,
                    np,
                    r.error.clone().unwrap_or_default(),
                ]
            })
            .collect();
        write_table(
            &args.out.join("pr_curve.csv"),
            &["gamma", "precision", "recall", "nnz_theta", "nnz_psi", "error"],
            pr_rows,
        )?;
        files.push("pr_curve.csv".to_string());
        let points: Vec<PRPoint> = rows.iter().filter_map(|r| r.pr.clone()).collect();
        let baseline = edge_density(tt, tp);
        metrics["baseline"] = json!(baseline);
        metrics["auc"] = json!(pr_auc(&points, baseline));
    }

    let best = rows
        .iter()
        .zip(&fits)
        .filter_map(|(r, f)| Some((r.bic?, f.outcome.as_ref().ok()?, r)))
        .min_by(|a, b| a.0.total_cmp(&b.0));
    let code = match best {
        Some((score, res, row)) => {
            files.extend(write_model(&args.out, &res.model, "theta_hat.csv", "psi_hat.csv")?);
            metrics["best_gamma"] = json!(row.gamma);
            metrics["best_bic"] = json!(score);
            if let Some(pt) = &row.pr {
                metrics["best_precision"] = json!(pt.precision);
                metrics["best_recall"] = json!(pt.recall);
            }
            EXIT_OK
        }
        None => EXIT_NUMERICAL,
    };

    let points: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "gamma": r.gamma,
                "termination": r.termination.map(|t| t.as_str()),
                "iterations": r.iterations,
                "bic": r.bic,
                "precision": r.pr.as_ref().map(|x| x.precision),
                "recall": r.pr.as_ref().map(|x| x.recall),
                "error": r.error,
            })
        })
        .collect();
    let summary = json!({
        "config": config,
        "seeds": { "rng_seed": cfg.rng_seed },
        "points": points,
        "metrics": metrics,
    });
    fs::write(
        args.out.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n",
    )?;
    files.push("summary.json".to_string());

    manifest.add_artifacts(&args.out, &files)?;
    if code == EXIT_OK {
        manifest.write(&args.out, "ok", code)?;
    } else {
        manifest.diagnostic = Some(json!({ "kind": "numerical", "message": "every grid fit failed" }));
        manifest.write(&args.out, "error", code)?;
        eprintln!("error: every grid fit failed; see bic.csv");
    }
    Ok(code)
}
