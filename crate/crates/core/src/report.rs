//! File outputs: trajectory CSV, certificate reports, and sweep aggregates,
//! plus readers for each so emitted files can be round-tripped.
//!
//! Floats are written with 17 significant digits so that a re-parsed file
//! reproduces the original values bit-exactly.

use std::io::{self, BufRead, Write};

use nalgebra::Vector2;
use thiserror::Error;

use crate::config::ScenarioConfig;
use crate::levelset::{
    solve_hstar_issf, solve_hstar_issf_pbf, solve_hstar_rcbf, CertEquation, GradientNormBounds,
    LevelSetCertificate, LevelSetError,
};
use crate::sim::{Sample, Trajectory};

pub const TRAJECTORY_HEADER: &str = "t,x1,x2,u,F,h,sigma,constraint_residual";
pub const CERTIFICATE_HEADER: &str = "equation,h_star,residual,conditions_ok,annotation";
pub const SWEEP_HEADER: &str =
    "parameter,value,h_star_rcbf,h_star_issf,h_star_issf_pbf,min_h,violated";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: expected header {expected:?}, got {got:?}")]
    BadHeader {
        line: usize,
        expected: &'static str,
        got: String,
    },
    #[error("line {line}: expected {expected} fields, got {got}")]
    FieldCount {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("line {line}: bad value {value:?} in column {column}")]
    BadValue {
        line: usize,
        column: &'static str,
        value: String,
    },
}

/// 17 significant digits: enough to reproduce any f64 exactly.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, mut w: W) -> io::Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for s in &traj.samples {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            format_float(s.t),
            format_float(s.x[0]),
            format_float(s.x[1]),
            format_float(s.u),
            format_float(s.disturbance),
            format_float(s.h),
            format_float(s.sigma),
            format_float(s.constraint_residual),
        )?;
    }
    Ok(())
}

pub fn read_trajectory_csv<R: BufRead>(r: R) -> Result<Vec<Sample>, ReportError> {
    let mut lines = r.lines().enumerate();
    check_header(&mut lines, TRAJECTORY_HEADER)?;
    let mut samples = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(ReportError::FieldCount {
                line: idx + 1,
                expected: 8,
                got: fields.len(),
            });
        }
        let columns = ["t", "x1", "x2", "u", "F", "h", "sigma", "constraint_residual"];
        let mut vals = [0.0; 8];
        for (i, (field, column)) in fields.iter().zip(columns).enumerate() {
            vals[i] = parse_float(idx + 1, column, field)?;
        }
        samples.push(Sample {
            t: vals[0],
            x: Vector2::new(vals[1], vals[2]),
            u: vals[3],
            disturbance: vals[4],
            h: vals[5],
            sigma: vals[6],
            constraint_residual: vals[7],
        });
    }
    Ok(samples)
}

/// One line of a certificate report.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateRecord {
    pub equation: String,
    pub h_star: f64,
    pub residual: f64,
    pub conditions_ok: bool,
    pub annotation: String,
}

impl From<&LevelSetCertificate> for CertificateRecord {
    fn from(cert: &LevelSetCertificate) -> Self {
        Self {
            equation: cert.equation.as_str().to_string(),
            h_star: cert.h_star,
            residual: cert.residual,
            conditions_ok: cert.conditions_ok,
            annotation: cert.annotation.clone(),
        }
    }
}

impl CertificateRecord {
    pub fn human_readable(&self) -> String {
        format!(
            "{:<10} h* = {:+.6}  residual = {:.2e}  conditions_ok = {}  ({})",
            self.equation, self.h_star, self.residual, self.conditions_ok, self.annotation
        )
    }
}

pub fn write_certificate_csv<W: Write>(records: &[CertificateRecord], mut w: W) -> io::Result<()> {
    writeln!(w, "{CERTIFICATE_HEADER}")?;
    for r in records {
        // annotation is the last column and may contain commas
        writeln!(
            w,
            "{},{},{},{},{}",
            r.equation,
            format_float(r.h_star),
            format_float(r.residual),
            r.conditions_ok,
            r.annotation,
        )?;
    }
    Ok(())
}

pub fn read_certificate_csv<R: BufRead>(r: R) -> Result<Vec<CertificateRecord>, ReportError> {
    let mut lines = r.lines().enumerate();
    check_header(&mut lines, CERTIFICATE_HEADER)?;
    let mut records = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.splitn(5, ',').collect();
        if fields.len() != 5 {
            return Err(ReportError::FieldCount {
                line: idx + 1,
                expected: 5,
                got: fields.len(),
            });
        }
        records.push(CertificateRecord {
            equation: fields[0].to_string(),
            h_star: parse_float(idx + 1, "h_star", fields[1])?,
            residual: parse_float(idx + 1, "residual", fields[2])?,
            conditions_ok: parse_bool(idx + 1, "conditions_ok", fields[3])?,
            annotation: fields[4].to_string(),
        });
    }
    Ok(records)
}

/// Certificates applicable to a scenario, keyed by the compensation variant:
/// robust_bound yields the branch-resolved equation, issf yields both the
/// plain ISSf level and the refined one. A failed solve is reported
/// per-equation without aborting the others.
pub fn build_certificates(
    cfg: &ScenarioConfig,
) -> Vec<(CertEquation, Result<LevelSetCertificate, LevelSetError>)> {
    let barrier = match crate::barrier::QuadraticBarrier::from_weights(cfg.q1, cfg.q2) {
        Ok(b) => b,
        Err(_) => return Vec::new(),
    };
    let class_k = match crate::barrier::LinearClassKe::new(cfg.alpha_c) {
        Ok(k) => k,
        Err(_) => return Vec::new(),
    };
    let bounds = GradientNormBounds::from_barrier(&barrier);
    let p = cfg.uncertainty_bound();
    match cfg.variant {
        crate::config::CompensationKind::None => Vec::new(),
        crate::config::CompensationKind::RobustBound => {
            let res = solve_hstar_rcbf(&class_k, &bounds, cfg.p_hat(), p);
            let eq = match &res {
                Ok(c) => c.equation,
                Err(_) => {
                    if cfg.p_hat() < p {
                        CertEquation::RcbfUnder
                    } else {
                        CertEquation::RcbfOver
                    }
                }
            };
            vec![(eq, res)]
        }
        crate::config::CompensationKind::Issf => vec![
            (
                CertEquation::Issf,
                solve_hstar_issf(&class_k, cfg.eps0, cfg.lambda, p),
            ),
            (
                CertEquation::IssfPbf,
                solve_hstar_issf_pbf(&class_k, &bounds, cfg.eps0, cfg.lambda, p),
            ),
        ],
    }
}

/// The tightest (largest h*) successfully solved certificate, used as the
/// monitor reference for a run.
pub fn tightest_certificate(
    certs: &[(CertEquation, Result<LevelSetCertificate, LevelSetError>)],
) -> Option<&LevelSetCertificate> {
    certs
        .iter()
        .filter_map(|(_, r)| r.as_ref().ok())
        .filter(|c| c.conditions_ok)
        .max_by(|a, b| a.h_star.total_cmp(&b.h_star))
}

/// One row of a sweep aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub parameter: String,
    pub value: f64,
    pub h_star_rcbf: Option<f64>,
    pub h_star_issf: Option<f64>,
    pub h_star_issf_pbf: Option<f64>,
    pub min_h: f64,
    pub violated: bool,
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> io::Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    let opt = |v: Option<f64>| v.map(format_float).unwrap_or_default();
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.parameter,
            format_float(r.value),
            opt(r.h_star_rcbf),
            opt(r.h_star_issf),
            opt(r.h_star_issf_pbf),
            format_float(r.min_h),
            r.violated,
        )?;
    }
    Ok(())
}

pub fn read_sweep_csv<R: BufRead>(r: R) -> Result<Vec<SweepRow>, ReportError> {
    let mut lines = r.lines().enumerate();
    check_header(&mut lines, SWEEP_HEADER)?;
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(ReportError::FieldCount {
                line: idx + 1,
                expected: 7,
                got: fields.len(),
            });
        }
        let opt = |column: &'static str, s: &str| -> Result<Option<f64>, ReportError> {
            if s.is_empty() {
                Ok(None)
            } else {
                parse_float(idx + 1, column, s).map(Some)
            }
        };
        rows.push(SweepRow {
            parameter: fields[0].to_string(),
            value: parse_float(idx + 1, "value", fields[1])?,
            h_star_rcbf: opt("h_star_rcbf", fields[2])?,
            h_star_issf: opt("h_star_issf", fields[3])?,
            h_star_issf_pbf: opt("h_star_issf_pbf", fields[4])?,
            min_h: parse_float(idx + 1, "min_h", fields[5])?,
            violated: parse_bool(idx + 1, "violated", fields[6])?,
        });
    }
    Ok(rows)
}

fn check_header(
    lines: &mut impl Iterator<Item = (usize, io::Result<String>)>,
    expected: &'static str,
) -> Result<(), ReportError> {
    match lines.next() {
        Some((idx, line)) => {
            let line = line?;
            if line.trim() != expected {
                return Err(ReportError::BadHeader {
                    line: idx + 1,
                    expected,
                    got: line,
                });
            }
            Ok(())
        }
        None => Err(ReportError::BadHeader {
            line: 1,
            expected,
            got: String::new(),
        }),
    }
}

fn parse_float(line: usize, column: &'static str, s: &str) -> Result<f64, ReportError> {
    s.trim().parse::<f64>().map_err(|_| ReportError::BadValue {
        line,
        column,
        value: s.to_string(),
    })
}

fn parse_bool(line: usize, column: &'static str, s: &str) -> Result<bool, ReportError> {
    match s.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(ReportError::BadValue {
            line,
            column,
            value: s.to_string(),
        }),
    }
}
