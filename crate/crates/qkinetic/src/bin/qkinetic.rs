//! Batch entry point: run a trajectory, run the verification suite, or
//! sweep a parameter axis.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver failure (partial
//! outputs written), 4 verification failure.

use qkinetic::config::{Problem, RunConfig, SweepAxis, VerifySection};
use qkinetic::diagnostics::DiagnosticsRecord;
use qkinetic::field::DistributionField;
use qkinetic::params::ModelParams;
use qkinetic::runio::{write_diagnostics_csv, write_snapshot, RunManifest};
use qkinetic::solver::{suggest_horizon, time_march};
use qkinetic::verifier::{
    check_classical_limit, check_contraction, check_cutoff_decay, check_decomposition,
    check_frequency_envelope, check_nonlinear_bound, check_pointwise_bounds, fit_slope,
    BoundReport, VerifyBundle,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_OK: u8 = 0;
const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_VERIFY: u8 = 4;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() {
        eprintln!("{USAGE}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let cmd = args[0].as_str();
    let cli = match CliOptions::parse(&args[1..]) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}\n{USAGE}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    let code = match cmd {
        "run" => cmd_run(&cli),
        "verify" => cmd_verify(&cli),
        "sweep" => cmd_sweep(&cli),
        other => {
            eprintln!("unknown subcommand `{other}`\n{USAGE}");
            EXIT_CONFIG
        }
    };
    ExitCode::from(code)
}

const USAGE: &str = "usage: qkinetic <run|verify|sweep> --config <file.json> \
[--out-dir <dir>] [--threads N] [--seed S] [--conservative-fix] [--snapshots] \
[--kernel-cache BYTES]\n\
The thread count falls back to the QKINETIC_THREADS environment variable.";

struct CliOptions {
    config_path: PathBuf,
    out_dir: PathBuf,
    threads: Option<usize>,
    seed: Option<u64>,
    conservative_fix: bool,
    snapshots: bool,
    kernel_cache: Option<usize>,
}

impl CliOptions {
    fn parse(args: &[String]) -> Result<Self, String> {
        let mut config_path = None;
        let mut out_dir = PathBuf::from("out");
        let mut threads = std::env::var("QKINETIC_THREADS")
            .ok()
            .and_then(|s| s.parse().ok());
        let mut seed = None;
        let mut conservative_fix = false;
        let mut snapshots = false;
        let mut kernel_cache = None;
        let mut it = args.iter();
        while let Some(a) = it.next() {
            match a.as_str() {
                "--config" => {
                    config_path =
                        Some(PathBuf::from(it.next().ok_or("--config needs a value")?))
                }
                "--out-dir" => out_dir = PathBuf::from(it.next().ok_or("--out-dir needs a value")?),
                "--threads" => {
                    threads = Some(
                        it.next()
                            .ok_or("--threads needs a value")?
                            .parse()
                            .map_err(|_| "--threads must be an integer")?,
                    )
                }
                "--seed" => {
                    seed = Some(
                        it.next()
                            .ok_or("--seed needs a value")?
                            .parse()
                            .map_err(|_| "--seed must be an integer")?,
                    )
                }
                "--conservative-fix" => conservative_fix = true,
                "--snapshots" => snapshots = true,
                "--kernel-cache" => {
                    kernel_cache = Some(
                        it.next()
                            .ok_or("--kernel-cache needs a value")?
                            .parse()
                            .map_err(|_| "--kernel-cache must be bytes")?,
                    )
                }
                other => return Err(format!("unknown flag `{other}`")),
            }
        }
        Ok(CliOptions {
            config_path: config_path.ok_or("--config is required")?,
            out_dir,
            threads,
            seed,
            conservative_fix,
            snapshots,
            kernel_cache,
        })
    }

    /// Load the config with CLI overrides applied.
    fn load(&self) -> Result<(RunConfig, Vec<u8>), String> {
        let bytes =
            std::fs::read(&self.config_path).map_err(|e| format!("reading config: {e}"))?;
        let mut cfg: RunConfig =
            serde_json::from_slice(&bytes).map_err(|e| format!("parsing config: {e}"))?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if self.conservative_fix {
            cfg.conservative_fix = true;
        }
        if self.snapshots {
            cfg.snapshots = true;
        }
        if let Some(k) = self.kernel_cache {
            cfg.kernel_cache_bytes = k;
        }
        Ok((cfg, bytes))
    }
}

fn ensure_out_dir(dir: &Path) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("creating {}: {e}", dir.display()))
}

fn cmd_run(cli: &CliOptions) -> u8 {
    let (cfg, raw) = match cli.load() {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Err(e) = ensure_out_dir(&cli.out_dir) {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    let problem = match Problem::build(&cfg) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let f0 = match problem.initial_field(&cfg.initial, cfg.seed) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let mut solver_cfg = cfg.solver;
    solver_cfg.conservative_fix = cfg.conservative_fix;
    let ctx = problem.solver_ctx();
    let mut manifest = RunManifest::new(&raw, cfg.seed);

    let (records, fields, times, ok) = match time_march(&f0, &solver_cfg, &ctx) {
        Ok(traj) => (traj.records, traj.fields, traj.times, true),
        Err(fail) => {
            eprintln!("solver failure: {}", fail.error);
            let t = fail.partial;
            (t.records, t.fields, t.times, false)
        }
    };
    let csv = cli.out_dir.join("diagnostics.csv");
    if let Err(e) = write_diagnostics_csv(&csv, &records) {
        eprintln!("error writing diagnostics: {e}");
        return EXIT_SOLVER;
    }
    manifest.record_output(&csv);
    if cfg.snapshots {
        for (i, (field, t)) in fields.iter().zip(&times).enumerate() {
            match write_snapshot(
                &cli.out_dir,
                i,
                *t,
                field,
                cfg.v_max,
                cfg.n_per_axis,
                cfg.length,
            ) {
                Ok((b, s)) => {
                    manifest.record_output(&b);
                    manifest.record_output(&s);
                }
                Err(e) => {
                    eprintln!("error writing snapshot {i}: {e}");
                    return EXIT_SOLVER;
                }
            }
        }
    }
    if let Err(e) = manifest.finish_and_write(&cli.out_dir) {
        eprintln!("error writing manifest: {e}");
        return EXIT_SOLVER;
    }
    if ok {
        EXIT_OK
    } else {
        EXIT_SOLVER
    }
}

/// Canonical check identifiers.
const ALL_CHECKS: &[&str] = &[
    "equilibrium-product-bounds",
    "collision-frequency-envelope",
    "cutoff-scattering-decay",
    "nonlinear-form-bound",
    "damped-iteration-contraction",
    "classical-limit-slope",
    "fluctuation-decomposition-identity",
];

fn cmd_verify(cli: &CliOptions) -> u8 {
    let (cfg, raw) = match cli.load() {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Err(e) = ensure_out_dir(&cli.out_dir) {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    let check_list: Vec<String> = match &cfg.checks {
        None => ALL_CHECKS.iter().map(|s| s.to_string()).collect(),
        Some(list) => list.clone(),
    };
    if check_list.is_empty() {
        eprintln!("error: nothing to verify (empty check list)");
        return EXIT_CONFIG;
    }
    for c in &check_list {
        if !ALL_CHECKS.contains(&c.as_str()) {
            eprintln!("error: unknown check `{c}`");
            return EXIT_CONFIG;
        }
    }
    let mut manifest = RunManifest::new(&raw, cfg.seed);
    let mut reports = Vec::new();
    let code = match run_checks(&cfg, &check_list, &mut reports) {
        Ok(()) => {
            if reports.iter().all(|r| r.pass) {
                EXIT_OK
            } else {
                EXIT_VERIFY
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    };
    let path = cli.out_dir.join("report.json");
    match std::fs::File::create(&path)
        .map_err(|e| e.to_string())
        .and_then(|mut f| {
            serde_json::to_writer_pretty(&mut f, &reports).map_err(|e| e.to_string())
        }) {
        Ok(()) => manifest.record_output(&path),
        Err(e) => {
            eprintln!("error writing report: {e}");
            return EXIT_CONFIG;
        }
    }
    if let Err(e) = manifest.finish_and_write(&cli.out_dir) {
        eprintln!("error writing manifest: {e}");
        return EXIT_CONFIG;
    }
    for r in &reports {
        println!(
            "{:<36} {}  (fitted {:.4e}, worst ratio {:.4e})",
            r.id,
            if r.pass { "pass" } else { "FAIL" },
            r.fitted_constant,
            r.worst_ratio
        );
    }
    code
}

fn build_problem_at(cfg: &RunConfig, delta: f64, rho: f64, n: usize, beta: f64) -> Result<Problem, String> {
    let sub = RunConfig {
        delta,
        rho,
        n_per_axis: n,
        beta,
        ..cfg.clone()
    };
    Problem::build(&sub).map_err(|e| e.to_string())
}

fn run_checks(
    cfg: &RunConfig,
    list: &[String],
    reports: &mut Vec<BoundReport>,
) -> Result<(), String> {
    let v: &VerifySection = &cfg.verify;
    for id in list {
        match id.as_str() {
            "equilibrium-product-bounds" => {
                for &rho in &v.rho_values {
                    for &delta in &v.delta_values {
                        let params = ModelParams {
                            delta,
                            rho,
                            ..cfg.params().map_err(|e| e.to_string())?
                        };
                        reports.push(check_pointwise_bounds(
                            &params, cfg.v_max, v.samples, cfg.seed,
                        ));
                    }
                }
            }
            "collision-frequency-envelope" => {
                for &delta in &[0.0, 1.0] {
                    let base = build_problem_at(cfg, delta, cfg.rho, cfg.n_per_axis, cfg.beta)?;
                    let fine = build_problem_at(cfg, delta, cfg.rho, v.fine_n_per_axis, cfg.beta)?;
                    reports.push(check_frequency_envelope(
                        &bundle(&base),
                        &bundle(&fine),
                        cfg.seed,
                    ));
                }
            }
            "cutoff-scattering-decay" => {
                for &delta in &[0.0, 1.0] {
                    let params = ModelParams {
                        delta,
                        ..cfg.params().map_err(|e| e.to_string())?
                    };
                    reports.push(check_cutoff_decay(&params, cfg.seed));
                }
            }
            "nonlinear-form-bound" => {
                for &delta in &[0.0, 1.0] {
                    let base =
                        build_problem_at(cfg, delta, cfg.rho, cfg.n_per_axis, v.beta_for_nonlinear)?;
                    let fine = build_problem_at(
                        cfg,
                        delta,
                        cfg.rho,
                        v.fine_n_per_axis,
                        v.beta_for_nonlinear,
                    )?;
                    reports.push(
                        check_nonlinear_bound(&bundle(&base), &bundle(&fine), v.p, cfg.seed)
                            .map_err(|e| e.to_string())?,
                    );
                }
            }
            "damped-iteration-contraction" => {
                reports.push(contraction_report(cfg).map_err(|e| e.to_string())?);
            }
            "classical-limit-slope" => {
                let problem = Problem::build(cfg).map_err(|e| e.to_string())?;
                reports.push(
                    check_classical_limit(&problem.params, &problem.grid, &problem.ws, cfg.seed)
                        .map_err(|e| e.to_string())?,
                );
            }
            "fluctuation-decomposition-identity" => {
                let problem = Problem::build(cfg).map_err(|e| e.to_string())?;
                reports.push(
                    check_decomposition(
                        &bundle(&problem),
                        v.decomposition_trials,
                        cfg.seed,
                        v.flip_scattering_sign,
                    )
                    .map_err(|e| e.to_string())?,
                );
            }
            other => return Err(format!("unknown check `{other}`")),
        }
    }
    Ok(())
}

fn bundle(p: &Problem) -> VerifyBundle<'_> {
    VerifyBundle {
        params: &p.params,
        grid: &p.grid,
        tables: &p.tables,
        ws: &p.ws,
    }
}

fn contraction_report(cfg: &RunConfig) -> Result<BoundReport, String> {
    let problem = Problem::build(cfg).map_err(|e| e.to_string())?;
    let ctx = problem.solver_ctx();
    let f0 = problem
        .initial_field(
            &qkinetic::config::InitialSpec::Bump { amplitude: 0.3 },
            cfg.seed,
        )
        .map_err(|e| e.to_string())?;
    let horizon =
        suggest_horizon(&f0, &ctx, cfg.solver.horizon_constant).map_err(|e| e.to_string())?;
    let mut sweeps = Vec::new();
    for frac in [1.0, 0.5, 0.25] {
        let dt = horizon * frac;
        let mut solver_cfg = cfg.solver;
        solver_cfg.dt = Some(dt);
        solver_cfg.t_end = dt * cfg.verify.contraction_windows as f64;
        let traj = time_march(&f0, &solver_cfg, &ctx).map_err(|f| f.error.to_string())?;
        sweeps.push((dt, traj.reports));
    }
    Ok(check_contraction(&sweeps, horizon, cfg.seed))
}

fn cmd_sweep(cli: &CliOptions) -> u8 {
    let (cfg, raw) = match cli.load() {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let sweep = match &cfg.sweep {
        Some(s) if !s.values.is_empty() => s.clone(),
        _ => {
            eprintln!("error: sweep requires a `sweep` section with values");
            return EXIT_CONFIG;
        }
    };
    if let Err(e) = ensure_out_dir(&cli.out_dir) {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    let mut manifest = RunManifest::new(&raw, cfg.seed);
    let axis_name = match sweep.axis {
        SweepAxis::Delta => "delta",
        SweepAxis::Rho => "rho",
        SweepAxis::Gamma => "gamma",
        SweepAxis::Resolution => "resolution",
    };
    let mut rows: Vec<String> = Vec::new();
    let mut statuses = Vec::new();
    let mut finals: Vec<(f64, Option<DistributionField>)> = Vec::new();
    let mut conservation: Vec<(f64, f64)> = Vec::new();
    for &value in &sweep.values {
        let mut sub = cfg.clone();
        match sweep.axis {
            SweepAxis::Delta => sub.delta = value,
            SweepAxis::Rho => sub.rho = value,
            SweepAxis::Gamma => sub.gamma = value,
            SweepAxis::Resolution => sub.n_per_axis = value as usize,
        }
        let outcome = run_one_sweep_point(&sub, value, axis_name, &mut rows);
        match outcome {
            Ok((final_field, max_defect)) => {
                statuses.push(serde_json::json!({"value": value, "status": "ok"}));
                finals.push((value, Some(final_field)));
                conservation.push((value, max_defect));
            }
            Err(e) => {
                eprintln!("sweep point {axis_name}={value} failed: {e}");
                statuses.push(serde_json::json!({
                    "value": value, "status": "failed", "error": e
                }));
                finals.push((value, None));
            }
        }
    }
    let csv_path = cli.out_dir.join("sweep.csv");
    {
        use std::io::Write;
        let mut f = match std::fs::File::create(&csv_path) {
            Ok(f) => f,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_CONFIG;
            }
        };
        let _ = writeln!(f, "axis,value,{}", DiagnosticsRecord::CSV_HEADER);
        for row in &rows {
            let _ = writeln!(f, "{row}");
        }
    }
    manifest.record_output(&csv_path);

    // Slope summary for the quantum-parameter axis.
    let mut summary = serde_json::json!({
        "axis": axis_name,
        "points": statuses,
        "max_conservation_defect": conservation
            .iter()
            .map(|(v, d)| serde_json::json!({"value": v, "max_defect": d}))
            .collect::<Vec<_>>(),
    });
    if sweep.axis == SweepAxis::Delta {
        if let Some((_, Some(baseline))) = finals.iter().find(|(v, f)| *v == 0.0 && f.is_some()) {
            let mut ds = Vec::new();
            let mut dists = Vec::new();
            for (v, f) in &finals {
                if *v > 0.0 {
                    if let Some(field) = f {
                        let d = field
                            .values
                            .iter()
                            .zip(&baseline.values)
                            .map(|(a, b)| (a - b).abs())
                            .fold(0.0f64, f64::max);
                        ds.push(*v);
                        dists.push(d);
                    }
                }
            }
            if ds.len() >= 2 {
                summary["delta_limit"] = serde_json::json!({
                    "deltas": ds,
                    "sup_distances": dists,
                    "slope": fit_slope(&ds, &dists),
                });
            }
        }
    }
    let sum_path = cli.out_dir.join("sweep_summary.json");
    if let Ok(mut f) = std::fs::File::create(&sum_path) {
        let _ = serde_json::to_writer_pretty(&mut f, &summary);
    }
    manifest.record_output(&sum_path);
    if manifest.finish_and_write(&cli.out_dir).is_err() {
        return EXIT_CONFIG;
    }
    EXIT_OK
}

fn run_one_sweep_point(
    sub: &RunConfig,
    value: f64,
    axis_name: &str,
    rows: &mut Vec<String>,
) -> Result<(DistributionField, f64), String> {
    let problem = Problem::build(sub).map_err(|e| e.to_string())?;
    let f0 = problem
        .initial_field(&sub.initial, sub.seed)
        .map_err(|e| e.to_string())?;
    let mut solver_cfg = sub.solver;
    solver_cfg.conservative_fix = sub.conservative_fix;
    let ctx = problem.solver_ctx();
    let traj = time_march(&f0, &solver_cfg, &ctx).map_err(|f| f.error.to_string())?;
    for r in &traj.records {
        rows.push(format!("{axis_name},{value},{}", r.csv_row()));
    }
    let r0 = &traj.records[0];
    let max_defect = traj.records[1..]
        .iter()
        .map(|r| {
            (r.mass_defect - r0.mass_defect)
                .abs()
                .max((r.energy_defect - r0.energy_defect).abs())
        })
        .fold(0.0f64, f64::max);
    Ok((
        traj.fields.last().expect("trajectory has fields").clone(),
        max_defect,
    ))
}
