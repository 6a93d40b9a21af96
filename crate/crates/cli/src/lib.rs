//! Command-line front end: single-`F` relaxation, branch tables, Monte Carlo
//! validation runs, bifurcation sweeps and isosurface grids.
//!
//! Exit codes: `0` success, `1` validation failure, `2` usage or parse error,
//! `3` domain or precondition error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use relaxed_polar::branches::{
    branch_direct_energy, classify_branch, enumerate_branches, minimal_branch, verify_branch,
    Classification,
};
use relaxed_polar::energy::Extended;
use relaxed_polar::relax::{reduced_energy_unordered, relaxed_polar};
use relaxed_polar::rotcore::{axis_angle, from_row_major, to_rows, AxisAngle, Mat3, Quat, Vec3};
use relaxed_polar::sampling::{run_validation, SamplingMode, ValidationConfig};
use relaxed_polar::{Domain, MaterialParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;

/// Environment variable overriding the validation worker count.
pub const THREADS_ENV: &str = "RELAXED_POLAR_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Domain(#[from] relaxed_polar::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Domain(relaxed_polar::Error::InvalidArgument(_)) => EXIT_USAGE,
            CliError::Domain(_) => EXIT_DOMAIN,
            CliError::Io(_) | CliError::Json(_) | CliError::Csv(_) => EXIT_DOMAIN,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "relaxed-polar",
    version,
    about = "Energy-minimizing Cosserat rotations on SO(3)"
)]
pub struct Cli {
    /// Write output to this file instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Record wall-clock time in the JSON envelope.
    #[arg(long, global = true)]
    pub timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct Weights {
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 0.0)]
    pub muc: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Relaxed polar factors of one deformation gradient.
    Relax {
        /// Nine reals in row-major order, separated by commas or whitespace,
        /// or the word `identity`.
        #[arg(long = "F", num_args = 1..=9, allow_negative_numbers = true, conflicts_with = "sigma", required_unless_present = "sigma")]
        f: Vec<String>,
        /// Singular values; `F = diag(σ)`.
        #[arg(long, num_args = 3, allow_negative_numbers = true)]
        sigma: Vec<f64>,
        #[command(flatten)]
        weights: Weights,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Table of the sixteen critical branches of the limit case (1, 0).
    Branches {
        /// Strictly descending positive singular values.
        #[arg(long, num_args = 3, required = true, allow_negative_numbers = true)]
        sigma: Vec<f64>,
        /// The catalog always refers to (mu, mu_c) = (1, 0); accepted for clarity.
        #[arg(long)]
        mu_limit_case: bool,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Monte Carlo check of global optimality.
    Validate {
        #[command(flatten)]
        weights: Weights,
        #[arg(long, default_value_t = 200)]
        cases_per_domain: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = relaxed_polar::sampling::DEFAULT_TOL)]
        tol: f64,
        /// 4,629,171 shared quaternions and 1000 cases per domain; enforces `--tol`.
        #[arg(long, alias = "paper-scale")]
        full_scale: bool,
        /// Draw a shared quaternion set instead of fresh samples per case.
        #[arg(long)]
        shared: bool,
    },
    /// Bifurcation diagram along σ₁ + σ₂.
    Sweep {
        #[command(flatten)]
        weights: Weights,
        /// `min:max:steps`, steps counting points with both ends included.
        #[arg(long)]
        s12: String,
        #[arg(long, default_value_t = 0.1)]
        sigma3: f64,
        /// Asymmetry: σ₁ = s12/2 + δ, σ₂ = s12/2 − δ.
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Reduced energy on a cubic grid of singular values.
    Isosurface {
        /// Comma-separated contour levels.
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.4,0.8")]
        levels: Vec<f64>,
        #[arg(long, default_value_t = 21)]
        grid: usize,
        /// `lo:hi`, both positive.
        #[arg(long, default_value = "0.1:3")]
        range: String,
        #[command(flatten)]
        weights: Weights,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub elapsed_seconds: f64,
}

/// Wrapper around every JSON payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultEnvelope<T> {
    pub tool: String,
    pub version: String,
    pub command: Vec<String>,
    pub seed: Option<u64>,
    pub payload: T,
    pub timing: Option<Timing>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxPayload {
    pub params: MaterialParams,
    pub f: [[f64; 3]; 3],
    pub sigma: [f64; 3],
    pub domain: Domain,
    pub beta_hat: f64,
    pub r_plus: [[f64; 3]; 3],
    pub r_minus: [[f64; 3]; 3],
    pub axis_angle_plus: AxisAngle,
    pub axis_angle_minus: AxisAngle,
    pub axis: [f64; 3],
    pub u_mmp: f64,
    pub s_mmp: f64,
    pub s12_minus_rho: Extended,
    pub rho: Extended,
    pub lambda_scale: Extended,
    pub reduced_energy: f64,
    pub el_residual_plus: f64,
    pub el_residual_minus: f64,
    pub coincide: bool,
    pub degenerate_axis: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRow {
    pub id: String,
    pub defined: bool,
    pub w: Option<f64>,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub z: Option<f64>,
    pub multiplier: Option<f64>,
    pub closed_form_energy: Option<f64>,
    pub direct_energy: Option<f64>,
    pub residual: Option<f64>,
    pub classification: Option<Classification>,
    pub minimal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchesPayload {
    pub sigma: [f64; 3],
    pub rows: Vec<BranchRow>,
    pub minimal: Vec<String>,
    pub minimal_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub s12: f64,
    pub beta_plus: f64,
    pub beta_minus: f64,
    pub w_red: f64,
    pub domain: Domain,
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoRow {
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma3: f64,
    pub w_red: f64,
    /// Number of contour levels not above `w_red`.
    pub levels_below: usize,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn params(w: &Weights) -> Result<MaterialParams, CliError> {
    MaterialParams::new(w.mu, w.muc).map_err(|e| usage(e.to_string()))
}

/// Parses `--F` tokens: nine reals split on commas or whitespace, or `identity`.
pub fn parse_matrix(tokens: &[String]) -> Result<Mat3, CliError> {
    let joined = tokens.join(" ");
    if joined.trim().eq_ignore_ascii_case("identity") {
        return Ok(Mat3::identity());
    }
    let vals = joined
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| usage(format!("cannot parse {s:?} as a real number")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let arr: [f64; 9] = vals
        .try_into()
        .map_err(|v: Vec<f64>| usage(format!("--F needs nine reals, got {}", v.len())))?;
    if arr.iter().any(|v| !v.is_finite()) {
        return Err(usage("--F entries must be finite"));
    }
    Ok(from_row_major(&arr))
}

fn sigma3(v: &[f64]) -> [f64; 3] {
    [v[0], v[1], v[2]]
}

/// Parses `min:max:steps`.
pub fn parse_range_steps(s: &str) -> Result<(f64, f64, usize), CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || usage(format!("malformed range {s:?}, expected min:max:steps"));
    let [lo, hi, n] = parts.as_slice() else {
        return Err(bad());
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi && n >= 1) || (n == 1 && lo != hi) {
        return Err(bad());
    }
    Ok((lo, hi, n))
}

/// Parses `lo:hi` with `0 < lo < hi`.
pub fn parse_range(s: &str) -> Result<(f64, f64), CliError> {
    let bad = || {
        usage(format!(
            "malformed range {s:?}, expected lo:hi with 0 < lo < hi"
        ))
    };
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(bad());
    }
    Ok((lo, hi))
}

/// `n` points from `lo` to `hi`, both included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|k| {
            if k + 1 == n {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (n - 1) as f64
            }
        })
        .collect()
}

pub fn relax_payload(f: &Mat3, p: &MaterialParams) -> Result<RelaxPayload, CliError> {
    let rr = relaxed_polar(f, p)?;
    let dec = &rr.decomposition;
    let u_mmp = 0.5 * dec.s(1, 2);
    Ok(RelaxPayload {
        params: *p,
        f: to_rows(f),
        sigma: dec.sigma,
        domain: rr.domain,
        beta_hat: rr.beta_hat,
        r_plus: to_rows(&rr.r_plus),
        r_minus: to_rows(&rr.r_minus),
        axis_angle_plus: axis_angle(&rr.r_plus)?,
        axis_angle_minus: axis_angle(&rr.r_minus)?,
        axis: [rr.axis.x, rr.axis.y, rr.axis.z],
        u_mmp,
        s_mmp: u_mmp - 1.0,
        s12_minus_rho: match p.rho {
            Extended::Finite(rho) => Extended::Finite(dec.s(1, 2) - rho),
            Extended::Infinite => Extended::Infinite,
        },
        rho: p.rho,
        lambda_scale: p.lambda_scale,
        reduced_energy: rr.reduced_energy,
        el_residual_plus: rr.el_residuals[0],
        el_residual_minus: rr.el_residuals[1],
        coincide: rr.coincide,
        degenerate_axis: rr.degenerate_axis,
    })
}

pub fn branches_payload(sigma: &[f64; 3]) -> Result<BranchesPayload, CliError> {
    let catalog = enumerate_branches(sigma)?;
    let sel = minimal_branch(sigma)?;
    let mut rows = Vec::with_capacity(catalog.len());
    for b in &catalog {
        let id = b.branch_id();
        let q: Option<Quat> = b.quaternion;
        rows.push(BranchRow {
            id: b.id.clone(),
            defined: b.defined,
            w: q.map(|q| q.w),
            x: q.map(|q| q.x),
            y: q.map(|q| q.y),
            z: q.map(|q| q.z),
            multiplier: b.multiplier,
            closed_form_energy: b.closed_form_energy,
            direct_energy: b
                .defined
                .then(|| branch_direct_energy(id, sigma))
                .transpose()?,
            residual: b.defined.then(|| verify_branch(id, sigma)).transpose()?,
            classification: b.defined.then(|| classify_branch(id, sigma)).transpose()?,
            minimal: sel.contains(id),
        });
    }
    Ok(BranchesPayload {
        sigma: *sigma,
        rows,
        minimal: sel.branches.iter().map(|b| b.id.clone()).collect(),
        minimal_energy: sel.energy,
    })
}

pub fn sweep_rows(
    p: &MaterialParams,
    s12: (f64, f64, usize),
    sigma3: f64,
    delta: f64,
) -> Result<Vec<SweepRow>, CliError> {
    let (lo, hi, n) = s12;
    if !(delta > 0.0 && sigma3 > 0.0) {
        return Err(usage("--delta and --sigma3 must be positive"));
    }
    if !(0.5 * lo - delta > sigma3) {
        return Err(usage(format!(
            "s12 = {lo} with delta = {delta} does not keep sigma2 above sigma3 = {sigma3}"
        )));
    }
    linspace(lo, hi, n)
        .into_iter()
        .map(|s| {
            let sigma = [0.5 * s + delta, 0.5 * s - delta, sigma3];
            let rr = relaxed_polar(&Mat3::from_diagonal(&Vec3::from(sigma)), p)?;
            Ok(SweepRow {
                s12: s,
                beta_plus: rr.beta_hat,
                beta_minus: if rr.beta_hat == 0.0 {
                    0.0
                } else {
                    -rr.beta_hat
                },
                w_red: rr.reduced_energy,
                domain: rr.domain,
                sigma1: sigma[0],
                sigma2: sigma[1],
                sigma3,
            })
        })
        .collect()
}

pub fn isosurface_rows(
    p: &MaterialParams,
    levels: &[f64],
    grid: usize,
    range: (f64, f64),
) -> Result<Vec<IsoRow>, CliError> {
    if grid < 2 {
        return Err(usage("--grid must be at least 2"));
    }
    let axis = linspace(range.0, range.1, grid);
    let mut rows = Vec::with_capacity(grid * grid * grid);
    for &a in &axis {
        for &b in &axis {
            for &c in &axis {
                let w = reduced_energy_unordered(&[a, b, c], p)?;
                rows.push(IsoRow {
                    sigma1: a,
                    sigma2: b,
                    sigma3: c,
                    w_red: w,
                    levels_below: levels.iter().filter(|&&l| l <= w).count(),
                });
            }
        }
    }
    Ok(rows)
}

fn write_csv<T: Serialize>(out: &mut dyn Write, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn relax_csv(out: &mut dyn Write, p: &RelaxPayload) -> Result<(), CliError> {
    let ext = |e: Extended| match e {
        Extended::Finite(v) => v.to_string(),
        Extended::Infinite => "inf".to_string(),
    };
    let mut fields: Vec<(String, String)> = vec![
        ("domain".into(), format!("{:?}", p.domain)),
        ("beta_hat".into(), p.beta_hat.to_string()),
        ("angle_plus".into(), p.axis_angle_plus.angle.to_string()),
        ("angle_minus".into(), p.axis_angle_minus.angle.to_string()),
        ("u_mmp".into(), p.u_mmp.to_string()),
        ("s_mmp".into(), p.s_mmp.to_string()),
        ("rho".into(), ext(p.rho)),
        ("lambda_scale".into(), ext(p.lambda_scale)),
        ("reduced_energy".into(), p.reduced_energy.to_string()),
        ("el_residual_plus".into(), p.el_residual_plus.to_string()),
        ("el_residual_minus".into(), p.el_residual_minus.to_string()),
    ];
    for (k, v) in p.axis.iter().enumerate() {
        fields.push((format!("axis_{k}"), v.to_string()));
    }
    for (name, m) in [("r_plus", &p.r_plus), ("r_minus", &p.r_minus)] {
        for i in 0..3 {
            for j in 0..3 {
                fields.push((format!("{name}_{i}{j}"), m[i][j].to_string()));
            }
        }
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["field", "value"])?;
    for (k, v) in fields {
        w.write_record([k, v])?;
    }
    w.flush()?;
    Ok(())
}

fn threads_from_env() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            usage(format!(
                "{THREADS_ENV} must be a nonnegative integer, got {v:?}"
            ))
        }),
        Err(_) => Ok(0),
    }
}

struct Ctx {
    argv: Vec<String>,
    start: Instant,
    timing: bool,
}

impl Ctx {
    fn envelope<T>(&self, seed: Option<u64>, payload: T) -> ResultEnvelope<T> {
        ResultEnvelope {
            tool: "relaxed-polar".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.argv.clone(),
            seed,
            payload,
            timing: self.timing.then(|| Timing {
                elapsed_seconds: self.start.elapsed().as_secs_f64(),
            }),
        }
    }
}

fn execute(cli: Cli, ctx: &Ctx, out: &mut dyn Write) -> Result<i32, CliError> {
    match cli.command {
        Command::Relax {
            f,
            sigma,
            weights,
            format,
        } => {
            let p = params(&weights)?;
            let m = if sigma.is_empty() {
                parse_matrix(&f)?
            } else {
                Mat3::from_diagonal(&Vec3::from(sigma3(&sigma)))
            };
            let payload = relax_payload(&m, &p)?;
            match format {
                Format::Json => write_json(out, &ctx.envelope(None, payload))?,
                Format::Csv => relax_csv(out, &payload)?,
            }
        }
        Command::Branches { sigma, format, .. } => {
            let payload = branches_payload(&sigma3(&sigma))?;
            match format {
                Format::Json => write_json(out, &ctx.envelope(None, payload))?,
                Format::Csv => write_csv(out, &payload.rows)?,
            }
        }
        Command::Validate {
            weights,
            cases_per_domain,
            samples,
            seed,
            tol,
            full_scale,
            shared,
        } => {
            let p = params(&weights)?;
            if cases_per_domain == 0 || samples == 0 {
                return Err(usage("--cases-per-domain and --samples must be at least 1"));
            }
            let mut cfg = if full_scale {
                ValidationConfig::full_scale(p, seed)
            } else {
                ValidationConfig {
                    n_classical: cases_per_domain,
                    n_nonclassical: cases_per_domain,
                    n_samples: samples,
                    ..ValidationConfig::desk(p, seed)
                }
            };
            cfg.tol = tol;
            if shared {
                cfg.mode = SamplingMode::Shared;
            }
            cfg.threads = threads_from_env()?;
            let report = run_validation(&cfg)?;
            let failed = report.aggregates.failures > 0;
            write_json(out, &ctx.envelope(Some(seed), report))?;
            if failed {
                return Ok(EXIT_VALIDATION_FAILED);
            }
        }
        Command::Sweep {
            weights,
            s12,
            sigma3,
            delta,
            format,
        } => {
            let p = params(&weights)?;
            let rows = sweep_rows(&p, parse_range_steps(&s12)?, sigma3, delta)?;
            match format {
                Format::Json => write_json(out, &ctx.envelope(None, rows))?,
                Format::Csv => write_csv(out, &rows)?,
            }
        }
        Command::Isosurface {
            levels,
            grid,
            range,
            weights,
            format,
        } => {
            let p = params(&weights)?;
            let rows = isosurface_rows(&p, &levels, grid, parse_range(&range)?)?;
            match format {
                Format::Json => write_json(out, &ctx.envelope(None, rows))?,
                Format::Csv => write_csv(out, &rows)?,
            }
        }
    }
    Ok(EXIT_OK)
}

/// Runs the tool on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(stdout, "{text}")
            } else {
                write!(stderr, "{text}")
            };
            return code;
        }
    };
    let ctx = Ctx {
        argv: args
            .iter()
            .skip(1)
            .map(|a| a.to_string_lossy().into_owned())
            .collect(),
        start: Instant::now(),
        timing: cli.timing,
    };
    let out_path = cli.out.clone();
    let mut buf = Vec::new();
    let result = execute(cli, &ctx, &mut buf).and_then(|code| {
        match &out_path {
            Some(path) => std::fs::write(path, &buf)?,
            None => stdout.write_all(&buf)?,
        }
        Ok(code)
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
