//! Command-line front end: run scenarios, certify guarantee levels, sweep
//! parameters, and verify the full guarantee suite.
//!
//! Exit codes: 0 success, 1 validation error, 2 runtime/infeasibility,
//! 3 verification failure.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use pbf_safety::config::ScenarioConfig;
use pbf_safety::levelset::CertEquation;
use pbf_safety::report::{
    build_certificates, tightest_certificate, write_certificate_csv, write_sweep_csv,
    write_trajectory_csv, CertificateRecord, SweepRow,
};
use pbf_safety::sim::{monitor, simulate, Trajectory};

const MONITOR_TOL: f64 = 1e-4;

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(name = "pbf-safety", about = "Robust CBF safety filters with certified invariant levels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write the trajectory and certificates.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Solve every applicable guarantee level for a scenario.
    Certify {
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run the scenario once per value of a swept parameter.
    Sweep {
        config: PathBuf,
        /// One of p_hat, eps0, lambda, f_bar.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the built-in verification suite.
    Verify,
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Initial state as "x1,x2".
    #[arg(long)]
    x0: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, overrides } => cmd_run(&config, &overrides),
        Command::Certify { config, out_dir } => cmd_certify(&config, out_dir.as_deref()),
        Command::Sweep {
            config,
            param,
            values,
            overrides,
        } => cmd_sweep(&config, &param, &values, &overrides),
        Command::Verify => cmd_verify(),
    }
}

fn load_config(path: &Path, overrides: Option<&Overrides>) -> Result<ScenarioConfig, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let mut cfg = ScenarioConfig::parse_str(&text)
        .map_err(|e| format!("config {}: {e}", path.display()))?;
    if let Some(ov) = overrides {
        if let Some(dt) = ov.dt {
            cfg.dt = dt;
        }
        if let Some(horizon) = ov.horizon {
            cfg.horizon = horizon;
        }
        if let Some(x0) = &ov.x0 {
            let parts: Vec<f64> = x0
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| format!("--x0: expected \"x1,x2\", got {x0:?}"))?;
            if parts.len() != 2 {
                return Err(format!("--x0: expected 2 components, got {}", parts.len()));
            }
            cfg.x0 = [parts[0], parts[1]];
        }
        if let Some(dir) = &ov.out_dir {
            cfg.out_dir = dir.clone();
        }
        cfg.validate().map_err(|e| e.to_string())?;
    }
    Ok(cfg)
}

fn cmd_run(config: &Path, overrides: &Overrides) -> ExitCode {
    let cfg = match load_config(config, Some(overrides)) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    let name = config
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    let certs = build_certificates(&cfg);
    let records: Vec<CertificateRecord> = cert_records(&certs);

    let scenario = cfg.to_scenario(&name);
    let (traj, failure) = match simulate(&scenario) {
        Ok(t) => (t, None),
        Err(f) => {
            let msg = f.error.to_string();
            (f.partial, Some(msg))
        }
    };

    if let Err(e) = write_outputs(&cfg.out_dir, &name, Some(&traj), &records, None) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_RUNTIME);
    }
    for r in &records {
        println!("{}", r.human_readable());
    }
    if let Some((m, t)) = traj.min_h() {
        println!("min_h = {m:.6} at t = {t:.3}");
    }
    match tightest_certificate(&certs) {
        Some(cert) => {
            let mon = monitor(&traj, cert, MONITOR_TOL);
            println!(
                "certified level h* = {:.6} ({}): {}",
                cert.h_star,
                cert.equation,
                if mon.violated { "VIOLATED" } else { "respected" }
            );
        }
        None => println!("no certificate applicable (compensation variant: {})", cfg.variant),
    }
    match failure {
        Some(msg) => {
            eprintln!("error: simulation aborted: {msg} (partial trajectory written)");
            ExitCode::from(EXIT_RUNTIME)
        }
        None => ExitCode::SUCCESS,
    }
}

fn cmd_certify(config: &Path, out_dir: Option<&Path>) -> ExitCode {
    let cfg = match load_config(config, None) {
        Ok(mut cfg) => {
            if let Some(dir) = out_dir {
                cfg.out_dir = dir.to_path_buf();
            }
            cfg
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    let name = config
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    let certs = build_certificates(&cfg);
    if certs.is_empty() {
        println!(
            "no certificate applicable (compensation variant: {})",
            cfg.variant
        );
        return ExitCode::SUCCESS;
    }
    let records = cert_records(&certs);
    for (eq, res) in &certs {
        match res {
            Ok(c) => println!("{}", CertificateRecord::from(c).human_readable()),
            Err(e) => println!("{eq:<10} certificate unavailable: {e}"),
        }
    }
    if let Err(e) = write_outputs(&cfg.out_dir, &name, None, &records, None) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_RUNTIME);
    }
    ExitCode::SUCCESS
}

fn cmd_sweep(config: &Path, param: &str, values: &str, overrides: &Overrides) -> ExitCode {
    let cfg = match load_config(config, Some(overrides)) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    if !matches!(param, "p_hat" | "eps0" | "lambda" | "f_bar") {
        eprintln!("error: --param must be one of p_hat, eps0, lambda, f_bar, got {param:?}");
        return ExitCode::from(EXIT_VALIDATION);
    }
    let parsed: Result<Vec<f64>, _> = values.split(',').map(|v| v.trim().parse::<f64>()).collect();
    let values = match parsed {
        Ok(v) if !v.is_empty() && v.iter().all(|x| x.is_finite()) => v,
        _ => {
            eprintln!("error: --values must be a non-empty comma-separated list of finite numbers");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };

    let entries: Vec<Result<SweepRow, String>> = values
        .par_iter()
        .map(|&value| sweep_entry(&cfg, param, value))
        .collect();

    let mut rows = Vec::new();
    for entry in entries {
        match entry {
            Ok(row) => rows.push(row),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_RUNTIME);
            }
        }
    }
    if let Err(e) = write_outputs(&cfg.out_dir, "sweep", None, &[], Some(&rows)) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_RUNTIME);
    }
    println!("parameter,value,min_h,violated");
    for r in &rows {
        println!("{},{},{:.6},{}", r.parameter, r.value, r.min_h, r.violated);
    }
    ExitCode::SUCCESS
}

fn sweep_entry(base: &ScenarioConfig, param: &str, value: f64) -> Result<SweepRow, String> {
    let mut cfg = base.clone();
    match param {
        "p_hat" => cfg.p_hat = Some(value),
        "eps0" => cfg.eps0 = value,
        "lambda" => cfg.lambda = value,
        "f_bar" => cfg.f_bar = value,
        _ => unreachable!("validated by caller"),
    }
    cfg.validate().map_err(|e| e.to_string())?;
    let certs = build_certificates(&cfg);
    let name = format!("run_{param}_{value}");
    let scenario = cfg.to_scenario(&name);
    let traj = simulate(&scenario).map_err(|e| format!("{param} = {value}: {e}"))?;
    write_outputs(&cfg.out_dir, &name, Some(&traj), &cert_records(&certs), None)
        .map_err(|e| e.to_string())?;
    let (min_h, _) = traj.min_h().ok_or("empty trajectory")?;
    let violated = tightest_certificate(&certs)
        .map(|c| monitor(&traj, c, MONITOR_TOL).violated)
        .unwrap_or(false);
    let find = |eq: CertEquation| {
        certs
            .iter()
            .find(|(e, _)| *e == eq)
            .and_then(|(_, r)| r.as_ref().ok())
            .map(|c| c.h_star)
    };
    Ok(SweepRow {
        parameter: param.to_string(),
        value,
        h_star_rcbf: find(CertEquation::RcbfUnder).or_else(|| find(CertEquation::RcbfOver)),
        h_star_issf: find(CertEquation::Issf),
        h_star_issf_pbf: find(CertEquation::IssfPbf),
        min_h,
        violated,
    })
}

fn cmd_verify() -> ExitCode {
    let results = pbf_safety::acceptance::run_all();
    let mut all_passed = true;
    for r in &results {
        println!("{}", r.summary_line());
        all_passed &= r.passed;
    }
    if all_passed {
        println!("all {} criteria passed", results.len());
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VERIFY)
    }
}

fn cert_records(
    certs: &[(
        CertEquation,
        Result<pbf_safety::LevelSetCertificate, pbf_safety::levelset::LevelSetError>,
    )],
) -> Vec<CertificateRecord> {
    certs
        .iter()
        .filter_map(|(_, r)| r.as_ref().ok())
        .map(CertificateRecord::from)
        .collect()
}

/// Writes each requested file atomically (temp file + rename).
fn write_outputs(
    dir: &Path,
    name: &str,
    traj: Option<&Trajectory>,
    certs: &[CertificateRecord],
    sweep: Option<&[SweepRow]>,
) -> Result<(), String> {
    fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    if let Some(traj) = traj {
        atomic_write(&dir.join(format!("{name}_trajectory.csv")), |w| {
            write_trajectory_csv(traj, w)
        })?;
    }
    if !certs.is_empty() {
        atomic_write(&dir.join(format!("{name}_certificates.csv")), |w| {
            write_certificate_csv(certs, w)
        })?;
    }
    if let Some(rows) = sweep {
        atomic_write(&dir.join(format!("{name}_aggregate.csv")), |w| {
            write_sweep_csv(rows, w)
        })?;
    }
    Ok(())
}

fn atomic_write(
    path: &Path,
    write: impl FnOnce(&mut fs::File) -> std::io::Result<()>,
) -> Result<(), String> {
    let tmp = path.with_extension("tmp");
    let mut file =
        fs::File::create(&tmp).map_err(|e| format!("cannot create {}: {e}", tmp.display()))?;
    write(&mut file).map_err(|e| format!("cannot write {}: {e}", tmp.display()))?;
    file.flush().map_err(|e| e.to_string())?;
    drop(file);
    fs::rename(&tmp, path).map_err(|e| format!("cannot rename to {}: {e}", path.display()))?;
    Ok(())
}
