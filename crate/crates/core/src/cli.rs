//! Command-line entry point.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::Serialize;
use serde_json::json;

use crate::config::{self, Command, RateFamily, RunConfig};
use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, KernelTable};
use crate::model::{ldp_slope, simulate, LdpOptions, SimOptions};
use crate::rates::{rate_with_random_start, smalltime_rate, solve, tail_rate, RateOptions, RateResult, Sense};
use crate::smile::{evaluate, mc_smile, McSmileOptions, SmileKind, SmileQuery};
use crate::verify::quick_checks;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

pub const MANIFEST: &str = "run_manifest.json";

#[derive(Debug, Parser)]
#[command(name = "rough-ldp", version, about = "Large deviations for rough Stein-Stein volatility")]
pub struct Args {
    /// JSON run configuration (or a previous run manifest).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, env = "ROUGH_LDP_SEED")]
    pub seed: Option<u64>,
    /// Worker threads for Monte Carlo.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory, overriding `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `key.path=value`, applied to the configuration before validation.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) | Error::Csv(_) => EXIT_IO,
        Error::Convergence(_) | Error::Quadrature { .. } | Error::Factorization { .. } => EXIT_NUMERICAL,
        _ => EXIT_VALIDATION,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match run(&args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[derive(Serialize)]
struct Outcome {
    files: Vec<String>,
    converged: bool,
    summary: serde_json::Value,
}

pub fn run(args: &Args) -> Result<i32> {
    let text = fs::read_to_string(&args.config)?;
    let mut overrides = args.overrides.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("seed={seed}"));
    }
    if let Some(out) = &args.out {
        overrides.push(format!("output_dir={}", serde_json::to_string(out)?));
    }
    let cfg = config::load(&text, &overrides)?;
    if let Some(n) = args.threads {
        // a global pool can only be installed once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let out = cfg.output_dir.clone();
    fs::create_dir_all(&out)?;
    let outcome = match cfg.command {
        Command::Kernels => kernels(&cfg, &out)?,
        Command::Simulate => simulate_cmd(&cfg, &out)?,
        Command::Rate => rate_cmd(&cfg, &out)?,
        Command::Smile => smile_cmd(&cfg, &out)?,
        Command::Verify => verify_cmd(&cfg, &out)?,
    };
    let manifest = json!({
        "manifest_version": 1,
        "program": concat!("rough-ldp ", env!("CARGO_PKG_VERSION")),
        "config_path": args.config,
        "overrides": args.overrides,
        "seed_override": args.seed,
        "out_override": args.out,
        "threads": args.threads,
        "config": cfg,
        "outputs": outcome.files,
        "converged": outcome.converged,
        "summary": outcome.summary,
    });
    fs::write(out.join(MANIFEST), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(if outcome.converged { EXIT_OK } else { EXIT_NUMERICAL })
}

fn fmt(x: f64) -> String {
    format!("{x:?}")
}

fn kernels(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let p = &cfg.model;
    let spec = cfg.kernels.kernel.unwrap_or(KernelSpec::FFou { hurst: p.hurst, beta: p.beta, xi: p.xi });
    spec.validate()?;
    let grid = cfg.grid.build()?;
    let nodes = grid.nodes();
    let mut w = csv::Writer::from_path(out.join("kernels.csv"))?;
    w.write_record(["t", "s", "value"])?;
    for (i, &t) in nodes.iter().enumerate() {
        for &s in &nodes[..i] {
            let v = crate::kernels::eval_kernel(&spec, t, s)?;
            w.write_record([fmt(t), fmt(s), fmt(v)])?;
        }
    }
    w.flush()?;
    let mut files = vec!["kernels.csv".to_string()];
    if cfg.kernels.gram {
        let gram = KernelTable::new(&spec, &grid)?.gram();
        let mut w = csv::Writer::from_path(out.join("gram.csv"))?;
        w.write_record(nodes.iter().map(|t| fmt(*t)))?;
        for i in 0..grid.len() {
            w.write_record(gram.row(i).iter().map(|v| fmt(*v)))?;
        }
        w.flush()?;
        files.push("gram.csv".into());
    }
    println!("tabulated {:?} on {} nodes", spec, grid.len());
    Ok(Outcome { files, converged: true, summary: json!({ "kernel": spec }) })
}

fn simulate_cmd(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let s = &cfg.simulate;
    let sim =
        SimOptions { vol_mode: s.vol_mode, allow_coarse_grid: false, allow_scheme_violation: s.allow_scheme_violation };
    let mut files = Vec::new();
    let mut summary = json!({});
    if let Some(level) = s.level {
        let opts = LdpOptions { grid_nodes: cfg.grid.n, sim };
        let fit = ldp_slope(&cfg.model, &cfg.law, cfg.scheme, &cfg.eps_ladder, level, s.n_paths, cfg.seed, &opts)?;
        let mut w = csv::Writer::from_path(out.join("model.csv"))?;
        w.write_record(["eps", "level", "p_hat", "std_err", "h_eps_log_p", "n_paths", "seed"])?;
        for r in &fit.rows {
            w.write_record([
                fmt(r.eps),
                fmt(r.level),
                fmt(r.estimate.p_hat),
                fmt(r.estimate.std_err),
                fmt(r.h_log_p),
                r.estimate.n_paths.to_string(),
                r.estimate.seed.to_string(),
            ])?;
        }
        w.flush()?;
        files.push("model.csv".into());
        println!("limit {} (se {}), slope {}", fit.limit, fit.limit_se, fit.slope);
        summary = json!({ "limit": fit.limit, "limit_se": fit.limit_se, "slope": fit.slope });
    }
    if s.write_paths > 0 {
        let eps = cfg.eps_ladder.first().copied().unwrap_or(1.0);
        let grid = cfg.grid.build()?;
        let batch = simulate(&cfg.model, &cfg.law, cfg.scheme, eps, &grid, s.write_paths, cfg.seed, sim)?;
        let mut w = csv::Writer::from_path(out.join("paths.csv"))?;
        w.write_record(grid.nodes().iter().map(|t| fmt(*t)))?;
        for i in 0..batch.n_paths {
            w.write_record(batch.x_path(i).iter().map(|v| fmt(*v)))?;
        }
        w.flush()?;
        files.push("paths.csv".into());
    }
    Ok(Outcome { files, converged: true, summary })
}

fn rate_cmd(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let r = &cfg.rate;
    let b = r.b.unwrap_or(cfg.model.vol.b);
    let opts = RateOptions {
        grid_nodes: cfg.grid.n,
        terminal_time: r.terminal_time,
        include_drift: r.include_drift,
        solver: cfg.solver.clone(),
    };
    let mut rows: Vec<(f64, RateResult, usize)> = Vec::new();
    for &level in &r.levels {
        let result = match r.family {
            RateFamily::Tail => tail_rate(&cfg.model, level, b, &opts)?,
            RateFamily::SmallTime => smalltime_rate(&cfg.model, level, b, &opts)?,
            RateFamily::RandomStart => {
                let support =
                    r.support.ok_or_else(|| Error::InvalidParameter("random_start needs `support`".into()))?;
                rate_with_random_start(&cfg.model, level, support, &opts)?
            }
            RateFamily::Problem => {
                let p = r.problem.as_ref().expect("validated");
                let sense = if p.constraint.sense == Sense::Eq {
                    Sense::Eq
                } else if level < 0.0 {
                    Sense::Le
                } else {
                    p.constraint.sense
                };
                let q = p.with_level(level, sense);
                solve(&q, &cfg.solver)?
            }
        };
        let n = match r.family {
            RateFamily::Problem => r.problem.as_ref().map_or(0, |p| p.grid.len()),
            _ => cfg.grid.n,
        };
        for warning in &result.warnings {
            eprintln!("warning: {warning}");
        }
        println!("level {level}: value = {}", result.value);
        rows.push((level, result, n));
    }
    let mut w = csv::Writer::from_path(out.join("rates.csv"))?;
    w.write_record(["problem_id", "level", "value", "converged", "kkt_residual", "start_used", "n_grid"])?;
    for (i, (level, res, n)) in rows.iter().enumerate() {
        w.write_record([
            i.to_string(),
            fmt(*level),
            fmt(res.value),
            res.converged.to_string(),
            fmt(res.kkt_residual),
            fmt(res.start_used),
            n.to_string(),
        ])?;
    }
    w.flush()?;
    let converged = rows.iter().all(|(_, r, _)| r.converged);
    let values: Vec<f64> = rows.iter().map(|(_, r, _)| r.value).collect();
    Ok(Outcome { files: vec!["rates.csv".into()], converged, summary: json!({ "values": values }) })
}

fn smile_cmd(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let opts = RateOptions { grid_nodes: cfg.grid.n, solver: cfg.solver.clone(), ..RateOptions::default() };
    let h = cfg.model.hurst.value();
    let mut w = csv::Writer::from_path(out.join("smile.csv"))?;
    w.write_record(["kind", "k", "t", "b", "H", "rate", "limit_value", "error_bar"])?;
    let mut converged = true;
    let mut limits = Vec::new();
    for kind in &cfg.smile.queries {
        let query = SmileQuery { kind: *kind, params: cfg.model.clone(), law: Some(cfg.law) };
        let res = evaluate(&query, &opts)?;
        converged &= res.rate_used.converged;
        let (name, k, t, b) = match *kind {
            SmileKind::TailSlope { t } => ("tail_slope", f64::NAN, t, cfg.model.vol.b),
            SmileKind::SmallTime { k, b } => ("small_time", k, f64::NAN, b),
            SmileKind::Forward { k, t, .. } => ("forward", k, t, f64::NAN),
        };
        let opt = |x: f64| if x.is_nan() { String::new() } else { fmt(x) };
        w.write_record([
            name.to_string(),
            opt(k),
            opt(t),
            opt(b),
            fmt(h),
            fmt(res.rate_used.value),
            fmt(res.limit_value),
            String::new(),
        ])?;
        println!("{name}: limit = {} (rate {})", res.limit_value, res.rate_used.value);
        limits.push(res.limit_value);
    }
    if let Some(mc) = &cfg.smile.mc {
        let o = McSmileOptions { grid_nodes: cfg.grid.n, bootstrap: mc.bootstrap };
        let s = mc_smile(&cfg.model, &cfg.law, mc.t, &mc.strikes, mc.n_paths, cfg.seed, &o)?;
        for r in &s.rows {
            w.write_record([
                "mc".to_string(),
                fmt(r.k),
                fmt(mc.t),
                String::new(),
                fmt(h),
                String::new(),
                fmt(r.implied_vol),
                fmt(r.error_bar),
            ])?;
        }
    }
    w.flush()?;
    Ok(Outcome { files: vec!["smile.csv".into()], converged, summary: json!({ "limits": limits }) })
}

fn verify_cmd(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let checks = quick_checks(&cfg.solver);
    let mut w = csv::Writer::from_path(out.join("verify.csv"))?;
    w.write_record(["check", "passed", "detail"])?;
    for c in &checks {
        println!("{}", c.line());
        w.write_record([c.name.as_str(), if c.passed { "true" } else { "false" }, c.detail.as_str()])?;
    }
    w.flush()?;
    let passed = checks.iter().all(|c| c.passed);
    Ok(Outcome {
        files: vec!["verify.csv".into()],
        converged: passed,
        summary: json!({ "passed": checks.iter().filter(|c| c.passed).count(), "total": checks.len() }),
    })
}
