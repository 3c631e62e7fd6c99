//! Batch front-end over the core analyses: achievable rates, early-decoding
//! bounds, rate-region traces, blocklength sweeps, and the Monte-Carlo
//! validator.
//!
//! Output is a CSV or JSON table. Every row carries the fully resolved
//! parameter set, so any row can be reproduced as a single-point run:
//! parameters are printed losslessly (shortest round-tripping decimal),
//! computed values are rounded to 12 significant digits, and the JSON
//! encoding is built from the same rounded values so both formats parse to
//! identical numbers.
//!
//! Exit codes: 0 success, 1 the requested analysis was infeasible
//! everywhere, 2 validation failure, 3 resource guard exceeded.
//!
//! Environment overrides: `EDGBC_CONFIG`, `EDGBC_FORMAT`, `EDGBC_OUT`,
//! `EDGBC_SEED` mirror the corresponding global flags.

// Guards of the form `!(x > 0.0)` are deliberate: the negation rejects NaN,
// which `x <= 0.0` would wave through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use edgbc_core::ed::{ed_min_symbols, ChannelConfig, PowerConstraint};
use edgbc_core::math::{capacity, second_order_rate, Probability, Snr};
use edgbc_core::montecarlo::{simulate_cross_term, simulate_ed};
use edgbc_core::optimize::{sweep_n2, trace_rate_region, PowerMode, SolveSpec, SolveStatus, SweepRow};
use edgbc_core::region::{cross_term_tail, snr_set_ipc, tin_rate_user2, Scheme};

// ---------------------------------------------------------------------------
// Errors and exit codes
// ---------------------------------------------------------------------------

#[derive(Debug)]
enum CliError {
    /// Invalid parameters or config input; exit code 2.
    Validation(String),
    /// A computation refused to start because it would exceed the resource
    /// guard; exit code 3.
    Guard(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Guard(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(msg) | CliError::Guard(msg) => f.write_str(msg),
        }
    }
}

impl From<edgbc_core::Error> for CliError {
    fn from(err: edgbc_core::Error) -> Self {
        match err {
            edgbc_core::Error::GuardExceeded { .. } => CliError::Guard(err.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Validation(err.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

// ---------------------------------------------------------------------------
// Table rendering
// ---------------------------------------------------------------------------

/// One table cell. Parameters keep their exact value (shortest decimal that
/// parses back bit-identically); computed values carry 12 significant
/// digits. The JSON encoding re-parses the rendered text, so both formats
/// hold the same number.
#[derive(Clone)]
enum Cell {
    Int(u64),
    /// Lossless parameter echo.
    Num(f64),
    /// Computed value, 12 significant digits.
    Sig(f64),
    Text(&'static str),
    Empty,
}

fn sig12(v: f64) -> String {
    if !v.is_finite() || v == 0.0 {
        return format!("{v}");
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("float literal");
    format!("{rounded}")
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => format!("{v}"),
            Cell::Sig(v) => sig12(*v),
            Cell::Text(s) => (*s).to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Int(v) => serde_json::Value::from(*v),
            Cell::Num(_) | Cell::Sig(_) => {
                let parsed: f64 = self.render().parse().expect("rendered float");
                serde_json::Value::from(parsed)
            }
            Cell::Text(s) => serde_json::Value::from(*s),
            Cell::Empty => serde_json::Value::Null,
        }
    }
}

struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(columns: Vec<&'static str>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    fn to_json(&self) -> String {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = serde_json::Map::new();
                for (name, cell) in self.columns.iter().zip(row) {
                    obj.insert((*name).to_string(), cell.json());
                }
                serde_json::Value::Object(obj)
            })
            .collect();
        let mut text = serde_json::to_string_pretty(&rows).expect("serializable table");
        text.push('\n');
        text
    }
}

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Format {
    Csv,
    Json,
}

/// The four weighted-sum problems: `p1-*` is the hybrid split (HNOMA),
/// `p2-*` early decoding; `*-ipc` individual and `*-spc` sum power.
#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Problem {
    P1Ipc,
    P1Spc,
    P2Ipc,
    P2Spc,
}

impl Problem {
    fn scheme(self) -> Scheme {
        match self {
            Problem::P1Ipc | Problem::P1Spc => Scheme::Hnoma,
            Problem::P2Ipc | Problem::P2Spc => Scheme::Ed,
        }
    }

    fn mode(self) -> PowerMode {
        match self {
            Problem::P1Ipc | Problem::P2Ipc => PowerMode::Ipc,
            Problem::P1Spc | Problem::P2Spc => PowerMode::Spc,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Problem::P1Ipc => "p1-ipc",
            Problem::P1Spc => "p1-spc",
            Problem::P2Ipc => "p2-ipc",
            Problem::P2Spc => "p2-spc",
        }
    }
}

/// Config file schema: defaults for the common scenario/solver/output
/// parameters. Explicit flags win over config values. Unknown keys are
/// rejected.
#[derive(Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    h1: Option<f64>,
    h2: Option<f64>,
    p1: Option<f64>,
    p2: Option<f64>,
    p_total: Option<f64>,
    n1: Option<u64>,
    n2: Option<u64>,
    eps: Option<f64>,
    omega: Option<f64>,
    omega_count: Option<u32>,
    eps_step: Option<f64>,
    power_grid: Option<u32>,
    backoff: Option<f64>,
    problem: Option<Problem>,
    format: Option<Format>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    db: Option<bool>,
}

#[derive(Parser)]
#[command(
    name = "edgbc",
    version,
    about = "Finite-blocklength analyses for a two-user Gaussian broadcast channel",
    long_about = "Finite-blocklength analyses for a two-user Gaussian broadcast channel \
with per-user blocklength constraints: achievable rates, early-decoding bounds, \
weighted sum-rate solves, rate-region traces, and Monte-Carlo validation.\n\n\
Exit codes: 0 success, 1 infeasible everywhere, 2 validation failure, 3 resource guard.\n\
Environment overrides: EDGBC_CONFIG, EDGBC_FORMAT, EDGBC_OUT, EDGBC_SEED."
)]
struct Cli {
    /// JSON config file with defaults for scenario/solver/output parameters
    /// (schema: README). Explicit flags win; unknown keys are rejected.
    #[arg(long, global = true, env = "EDGBC_CONFIG")]
    config: Option<PathBuf>,

    /// Output format.
    #[arg(long, global = true, value_enum, env = "EDGBC_FORMAT")]
    format: Option<Format>,

    /// Write the table to this file instead of stdout.
    #[arg(long, global = true, env = "EDGBC_OUT")]
    out: Option<PathBuf>,

    /// RNG seed for the simulation subcommands.
    #[arg(long, global = true, env = "EDGBC_SEED")]
    seed: Option<u64>,

    /// Interpret gains, powers, and SNRs (h1, h2, p1, p2, p-total, snr) as
    /// dB; converted once at the boundary, all internal math is linear.
    #[arg(long, global = true)]
    db: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normal-approximation rate over a grid of blocklengths and SNRs, or
    /// (with --tin-compare) the strong user's cancellation-vs-noise
    /// comparison across gains.
    Rate(RateArgs),
    /// Minimum received symbols for early decoding across strong-user
    /// gains: full-frame baseline, the finite-blocklength bound, and its
    /// asymptotic limit.
    EdBound(EdBoundArgs),
    /// Trace an achievable rate region by sweeping the objective weight.
    Region(RegionArgs),
    /// Solve one weighted-sum problem across a grid of strong-user
    /// blocklengths.
    Sweep(SweepArgs),
    /// Monte-Carlo validation of the analytic error bounds.
    Simulate {
        #[command(subcommand)]
        sim: SimulateCmd,
    },
}

#[derive(Args)]
struct RateArgs {
    /// Blocklength(s): single value, comma list, or start:end:step.
    #[arg(long, value_parser = parse_u64_list)]
    n: Option<U64List>,
    /// SNR value(s): single value, comma list, or start:end:step.
    #[arg(long, value_parser = parse_f64_list)]
    snr: Option<F64List>,
    /// Block error target in (0, 1).
    #[arg(long)]
    eps: Option<f64>,

    /// Compare the strong user's post-cancellation rate against treating
    /// the superposed signal as noise, at the minimum feasible prefix
    /// length for each gain; reports the equal-rate SNR shift in dB.
    #[arg(long)]
    tin_compare: bool,
    /// Weak user channel gain (tin-compare).
    #[arg(long)]
    h1: Option<f64>,
    /// Strong user gain(s) (tin-compare): single, comma list, or range.
    #[arg(long, value_parser = parse_f64_list)]
    h2: Option<F64List>,
    /// Weak user power (tin-compare).
    #[arg(long)]
    p1: Option<f64>,
    /// Strong user power (tin-compare).
    #[arg(long)]
    p2: Option<f64>,
    /// Frame length (tin-compare).
    #[arg(long)]
    n1: Option<u64>,
    /// Power backoff absorbed by the codebook generator (tin-compare).
    #[arg(long)]
    backoff: Option<f64>,
}

#[derive(Args)]
struct EdBoundArgs {
    /// Weak user channel gain.
    #[arg(long)]
    h1: Option<f64>,
    /// Strong user gain(s): single value, comma list, or start:end:step.
    #[arg(long, value_parser = parse_f64_list)]
    h2: Option<F64List>,
    /// Weak user power.
    #[arg(long)]
    p1: Option<f64>,
    /// Strong user power.
    #[arg(long)]
    p2: Option<f64>,
    /// Frame length; the bound is evaluated against a full frame.
    #[arg(long)]
    n1: Option<u64>,
    /// System block error target.
    #[arg(long)]
    eps: Option<f64>,
    /// Power backoff absorbed by the codebook generator.
    #[arg(long)]
    backoff: Option<f64>,
    /// Weak-user message size in bits; defaults to the clean full-frame
    /// rate at a third of the error target.
    #[arg(long)]
    log_m1: Option<f64>,
}

#[derive(Args)]
struct RegionArgs {
    /// Which weighted-sum problem to trace.
    #[arg(long, value_enum)]
    problem: Option<Problem>,
    #[arg(long)]
    h1: Option<f64>,
    #[arg(long)]
    h2: Option<f64>,
    /// Weak user power (individual power constraint).
    #[arg(long)]
    p1: Option<f64>,
    /// Strong user power (individual power constraint).
    #[arg(long)]
    p2: Option<f64>,
    /// Total power budget (sum power constraint).
    #[arg(long)]
    p_total: Option<f64>,
    #[arg(long)]
    n1: Option<u64>,
    #[arg(long)]
    n2: Option<u64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Number of evenly spaced objective weights in [0, 1].
    #[arg(long)]
    omega_count: Option<u32>,
    /// Error-split grid step; defaults to eps/100.
    #[arg(long)]
    eps_step: Option<f64>,
    /// Power-allocation grid levels per axis (sum power constraint).
    #[arg(long)]
    power_grid: Option<u32>,
    /// Power backoff absorbed by the codebook generator.
    #[arg(long)]
    backoff: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    /// Which weighted-sum problem to solve per blocklength.
    #[arg(long, value_enum)]
    problem: Option<Problem>,
    /// Strong-user blocklengths: single value, comma list, or
    /// start:end:step.
    #[arg(long, value_parser = parse_u64_list)]
    n2: Option<U64List>,
    /// Objective weight on the weak user's rate.
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    h1: Option<f64>,
    #[arg(long)]
    h2: Option<f64>,
    #[arg(long)]
    p1: Option<f64>,
    #[arg(long)]
    p2: Option<f64>,
    #[arg(long)]
    p_total: Option<f64>,
    #[arg(long)]
    n1: Option<u64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Error-split grid step; defaults to eps/100.
    #[arg(long)]
    eps_step: Option<f64>,
    /// Power-allocation grid levels per axis (sum power constraint).
    #[arg(long)]
    power_grid: Option<u32>,
    /// Power backoff absorbed by the codebook generator.
    #[arg(long)]
    backoff: Option<f64>,
}

#[derive(Subcommand)]
enum SimulateCmd {
    /// Full decode chain of the early-decoding scheme plus per-symbol
    /// information-density statistics.
    Ed(SimEdArgs),
    /// Cross-correlation overshoot frequency against its analytic tail.
    Cross(SimCrossArgs),
}

#[derive(Args)]
struct SimEdArgs {
    #[arg(long)]
    h1: Option<f64>,
    #[arg(long)]
    h2: Option<f64>,
    #[arg(long)]
    p1: Option<f64>,
    #[arg(long)]
    p2: Option<f64>,
    #[arg(long)]
    n1: Option<u64>,
    #[arg(long)]
    n2: Option<u64>,
    /// Error target carried in the scenario (not used by the decoder).
    #[arg(long)]
    eps: Option<f64>,
    /// Weak-user codebook power backoff.
    #[arg(long, default_value_t = 0.0)]
    delta1: f64,
    /// Strong-user codebook power backoff.
    #[arg(long, default_value_t = 0.0)]
    delta2: f64,
    /// Weak-user codebook size.
    #[arg(long)]
    m1: usize,
    /// Strong-user codebook size.
    #[arg(long)]
    m2: usize,
    /// Prefix length used by the first decode step; defaults to n2.
    #[arg(long)]
    n2_used: Option<u64>,
    /// Independent codebook/noise trials.
    #[arg(long, default_value_t = 1000)]
    trials: u64,
}

#[derive(Args)]
struct SimCrossArgs {
    /// Overlap blocklength.
    #[arg(long)]
    n2: Option<u64>,
    /// Weak-user overlap power (backed off).
    #[arg(long)]
    p11: Option<f64>,
    /// Strong-user power (backed off).
    #[arg(long)]
    p2bar: Option<f64>,
    /// Per-symbol threshold on the normalized cross term.
    #[arg(long)]
    delta: Option<f64>,
    /// Independent codeword-pair trials.
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
}

// ---------------------------------------------------------------------------
// List parsing: "a", "a,b,c", or "start:end:step" (inclusive)
// ---------------------------------------------------------------------------

#[derive(Clone)]
struct U64List(Vec<u64>);

#[derive(Clone)]
struct F64List(Vec<f64>);

fn parse_u64_list(s: &str) -> Result<U64List, String> {
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err("range must be start:end:step".into());
        }
        let (a, b, step): (u64, u64, u64) = (
            parts[0].parse().map_err(|e| format!("{e}"))?,
            parts[1].parse().map_err(|e| format!("{e}"))?,
            parts[2].parse().map_err(|e| format!("{e}"))?,
        );
        if step == 0 {
            return Err("step must be positive".into());
        }
        if b < a {
            return Err("range end must be >= start".into());
        }
        Ok(U64List((a..=b).step_by(step as usize).collect()))
    } else {
        let vals: Result<Vec<u64>, _> = s.split(',').map(str::parse).collect();
        Ok(U64List(vals.map_err(|e| format!("{e}"))?))
    }
}

fn parse_f64_list(s: &str) -> Result<F64List, String> {
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err("range must be start:end:step".into());
        }
        let (a, b, step): (f64, f64, f64) = (
            parts[0].parse().map_err(|e| format!("{e}"))?,
            parts[1].parse().map_err(|e| format!("{e}"))?,
            parts[2].parse().map_err(|e| format!("{e}"))?,
        );
        if !(step > 0.0) {
            return Err("step must be positive".into());
        }
        if b < a {
            return Err("range end must be >= start".into());
        }
        let mut vals = Vec::new();
        let mut v = a;
        // Half-step tolerance keeps the inclusive endpoint stable against
        // accumulated rounding.
        while v <= b + step * 0.5 {
            vals.push(v);
            v += step;
        }
        Ok(F64List(vals))
    } else {
        let vals: Result<Vec<f64>, _> = s.split(',').map(str::parse).collect();
        Ok(F64List(vals.map_err(|e| format!("{e}"))?))
    }
}

// ---------------------------------------------------------------------------
// Parameter resolution
// ---------------------------------------------------------------------------

fn need<T>(flag: Option<T>, cfg: Option<T>, name: &str) -> CliResult<T> {
    flag.or(cfg)
        .ok_or_else(|| invalid(format!("missing required parameter {name} (flag or config)")))
}

/// dB-to-linear conversion applied once at the boundary.
fn lin(v: f64, db: bool) -> f64 {
    if db {
        10f64.powf(v / 10.0)
    } else {
        v
    }
}

fn status_text(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Feasible => "feasible",
        SolveStatus::ZeroRate => "zero-rate",
        SolveStatus::Infeasible => "infeasible",
    }
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn cmd_rate(cli: &Cli, cfg: &RunConfig, args: &RateArgs) -> CliResult<(Table, bool)> {
    let db = cli.db || cfg.db.unwrap_or(false);
    let eps = need(args.eps, cfg.eps, "--eps")?;
    let eps_p = Probability::new(eps)?;
    if !args.tin_compare {
        let ns = args.n.clone().ok_or_else(|| invalid("missing required parameter --n"))?.0;
        let snrs = args.snr.clone().ok_or_else(|| invalid("missing required parameter --snr"))?.0;
        let mut table = Table::new(vec!["n", "snr", "eps", "rate"]);
        for &n in &ns {
            for &s in &snrs {
                let s_lin = lin(s, db);
                let rate = second_order_rate(n, Snr::new(s_lin)?, eps_p)?;
                table.push(vec![Cell::Int(n), Cell::Num(s_lin), Cell::Num(eps), Cell::Sig(rate)]);
            }
        }
        return Ok((table, false));
    }

    // Cancellation-vs-noise comparison. For each gain: size the weak-user
    // message by its clean full-frame rate at a third of the target, find
    // the minimum feasible prefix, then compare the strong user's
    // post-cancellation rate curve R(n2, s, eps/3) against the
    // noise-limited rate at the operating SNR; the reported shift is the
    // horizontal dB gap at equal rate.
    let h1 = lin(need(args.h1, cfg.h1, "--h1")?, db);
    let h2_list = args
        .h2
        .clone()
        .map(|l| l.0)
        .or_else(|| cfg.h2.map(|v| vec![v]))
        .ok_or_else(|| invalid("missing required parameter --h2"))?;
    let p1 = lin(need(args.p1, cfg.p1, "--p1")?, db);
    let p2 = lin(need(args.p2, cfg.p2, "--p2")?, db);
    let n1 = need(args.n1, cfg.n1, "--n1")?;
    let backoff = args.backoff.or(cfg.backoff).unwrap_or(0.002);
    let third = Probability::new(eps / 3.0)?;

    let mut table = Table::new(vec![
        "h1", "h2", "p1", "p2", "n1", "eps", "backoff", "n2", "ed_r2", "tin_r2",
        "tin_equiv_snr", "shift_db",
    ]);
    let mut any_feasible = false;
    for &h2_raw in &h2_list {
        let h2 = lin(h2_raw, db);
        let channel = ChannelConfig::new(h1, h2, PowerConstraint::Individual { p1, p2 }, n1, n1, eps)?;
        let snrs = snr_set_ipc(&channel, backoff)?;
        let log_m1 = n1 as f64 * second_order_rate(n1, Snr::new(snrs.snr12)?, third)?;
        let bound = ed_min_symbols(log_m1, n1, n1, snrs.snr21, eps / 3.0)?;
        if !bound.feasible {
            continue;
        }
        any_feasible = true;
        let n2 = bound.n_required;
        let s_op = snrs.snr22;
        let ed_r2 = second_order_rate(n2, Snr::new(s_op)?, third)?;
        let p2_bar = p2 - backoff;
        let tin_r2 = tin_rate_user2(n2, h2, p2_bar, p2_bar, eps)?;
        // The post-cancellation curve is increasing in SNR on the bracket,
        // so bisection finds where it meets the noise-limited rate.
        let curve = |s: f64| second_order_rate(n2, Snr::new(s).unwrap(), third).unwrap();
        let (mut lo, mut hi) = (1e-9, s_op);
        if !(curve(lo) < tin_r2 && curve(hi) > tin_r2) {
            return Err(invalid(format!(
                "no equal-rate crossing for h2 = {h2}; the comparison needs a positive gain"
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if curve(mid) < tin_r2 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let s_eq = 0.5 * (lo + hi);
        table.push(vec![
            Cell::Num(h1),
            Cell::Num(h2),
            Cell::Num(p1),
            Cell::Num(p2),
            Cell::Int(n1),
            Cell::Num(eps),
            Cell::Num(backoff),
            Cell::Int(n2),
            Cell::Sig(ed_r2),
            Cell::Sig(tin_r2),
            Cell::Sig(s_eq),
            Cell::Sig(10.0 * (s_op / s_eq).log10()),
        ]);
    }
    Ok((table, !any_feasible))
}

fn cmd_ed_bound(cli: &Cli, cfg: &RunConfig, args: &EdBoundArgs) -> CliResult<(Table, bool)> {
    let db = cli.db || cfg.db.unwrap_or(false);
    let h1 = lin(need(args.h1, cfg.h1, "--h1")?, db);
    let h2_list = args
        .h2
        .clone()
        .map(|l| l.0)
        .or_else(|| cfg.h2.map(|v| vec![v]))
        .ok_or_else(|| invalid("missing required parameter --h2"))?;
    let p1 = lin(need(args.p1, cfg.p1, "--p1")?, db);
    let p2 = lin(need(args.p2, cfg.p2, "--p2")?, db);
    let n1 = need(args.n1, cfg.n1, "--n1")?;
    let eps = need(args.eps, cfg.eps, "--eps")?;
    let backoff = args.backoff.or(cfg.backoff).unwrap_or(0.002);
    let third = Probability::new(eps / 3.0)?;

    let mut table = Table::new(vec![
        "h1", "h2", "p1", "p2", "n1", "eps", "backoff", "log_m1", "n_full", "n_early",
        "n_asymptotic", "feasible",
    ]);
    let mut any_feasible = false;
    for &h2_raw in &h2_list {
        let h2 = lin(h2_raw, db);
        let channel = ChannelConfig::new(h1, h2, PowerConstraint::Individual { p1, p2 }, n1, n1, eps)?;
        let snrs = snr_set_ipc(&channel, backoff)?;
        // The asymptotic latency divides the infinite-blocklength message
        // size by the SIC-step capacity; with an explicit message size the
        // same ratio is reported for that message.
        let (log_m1, log_m1_cell, log_m1_asym) = match args.log_m1 {
            Some(v) => (v, Cell::Num(v), v),
            None => {
                let v = n1 as f64 * second_order_rate(n1, Snr::new(snrs.snr12)?, third)?;
                (v, Cell::Sig(v), n1 as f64 * capacity(Snr::new(snrs.snr12)?))
            }
        };
        let bound = ed_min_symbols(log_m1, n1, n1, snrs.snr21, eps / 3.0)?;
        any_feasible |= bound.feasible;
        let asym = log_m1_asym / capacity(Snr::new(snrs.snr21)?);
        table.push(vec![
            Cell::Num(h1),
            Cell::Num(h2),
            Cell::Num(p1),
            Cell::Num(p2),
            Cell::Int(n1),
            Cell::Num(eps),
            Cell::Num(backoff),
            log_m1_cell,
            Cell::Int(n1),
            Cell::Int(bound.n_required),
            Cell::Sig(asym),
            Cell::Text(if bound.feasible { "true" } else { "false" }),
        ]);
    }
    Ok((table, !any_feasible))
}

/// Columns and cells shared by `region` and `sweep` rows.
fn solution_columns(scheme: Scheme, spc: bool) -> Vec<&'static str> {
    let mut cols = vec!["status", "r1", "r2", "objective"];
    match scheme {
        Scheme::Ed => cols.extend(["eps1", "eps_sic1", "eps_sic2"]),
        Scheme::Hnoma => cols.extend(["eps_h11", "eps_h12", "eps_sic1", "eps_sic2"]),
        Scheme::Tin => unreachable!("no weighted-sum problem for TIN"),
    }
    if spc {
        cols.extend(["p11_bar", "p12_bar", "p2_bar", "alloc_delta"]);
    }
    cols
}

fn solution_cells(row: &SweepRow, scheme: Scheme, spc: bool) -> Vec<Cell> {
    let sol = &row.solution;
    let mut cells = vec![Cell::Text(status_text(sol.status))];
    match sol.point {
        Some(p) => cells.extend([Cell::Sig(p.r1), Cell::Sig(p.r2)]),
        None => cells.extend([Cell::Empty, Cell::Empty]),
    }
    cells.push(Cell::Sig(sol.objective));
    match scheme {
        Scheme::Ed => match sol.budget.and_then(|b| b.ed_parts()) {
            Some((e1, es1, es2)) => cells.extend([
                Cell::Num(e1.get()),
                Cell::Num(es1.get()),
                Cell::Num(es2.get()),
            ]),
            None => cells.extend([Cell::Empty, Cell::Empty, Cell::Empty]),
        },
        Scheme::Hnoma => match sol.budget.and_then(|b| b.hnoma_parts()) {
            Some((eh11, eh12, es1, es2)) => cells.extend([
                Cell::Num(eh11.get()),
                Cell::Num(eh12.get()),
                Cell::Num(es1.get()),
                Cell::Num(es2.get()),
            ]),
            None => cells.extend([Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty]),
        },
        Scheme::Tin => unreachable!("no weighted-sum problem for TIN"),
    }
    if spc {
        match sol.alloc {
            Some(a) => cells.extend([
                Cell::Num(a.p11_bar),
                Cell::Num(a.p12_bar),
                Cell::Num(a.p2_bar),
                Cell::Num(a.delta),
            ]),
            None => cells.extend([Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty]),
        }
    }
    cells
}

/// Assemble the solve spec shared by `region` and `sweep`.
#[allow(clippy::too_many_arguments)]
fn build_spec(
    db: bool,
    problem: Problem,
    h1: f64,
    h2: f64,
    p1: Option<f64>,
    p2: Option<f64>,
    p_total: Option<f64>,
    n1: u64,
    n2: u64,
    eps: f64,
    omega: f64,
    eps_step: Option<f64>,
    power_grid: Option<u32>,
    backoff: Option<f64>,
) -> CliResult<SolveSpec> {
    let power = match problem.mode() {
        PowerMode::Ipc => PowerConstraint::Individual {
            p1: lin(p1.ok_or_else(|| invalid("missing required parameter --p1"))?, db),
            p2: lin(p2.ok_or_else(|| invalid("missing required parameter --p2"))?, db),
        },
        PowerMode::Spc => PowerConstraint::Sum {
            p_total: lin(
                p_total.ok_or_else(|| invalid("missing required parameter --p-total"))?,
                db,
            ),
        },
    };
    let channel = ChannelConfig::new(lin(h1, db), lin(h2, db), power, n1, n2, eps)?;
    let mut spec = SolveSpec::new(channel, omega, problem.scheme(), problem.mode())?;
    spec.eps_step = eps_step;
    spec.power_grid = power_grid;
    spec.backoff_delta = backoff;
    Ok(spec)
}

fn cmd_region(cli: &Cli, cfg: &RunConfig, args: &RegionArgs) -> CliResult<(Table, bool)> {
    let db = cli.db || cfg.db.unwrap_or(false);
    let problem = need(args.problem, cfg.problem, "--problem")?;
    let spec = build_spec(
        db,
        problem,
        need(args.h1, cfg.h1, "--h1")?,
        need(args.h2, cfg.h2, "--h2")?,
        args.p1.or(cfg.p1),
        args.p2.or(cfg.p2),
        args.p_total.or(cfg.p_total),
        need(args.n1, cfg.n1, "--n1")?,
        need(args.n2, cfg.n2, "--n2")?,
        need(args.eps, cfg.eps, "--eps")?,
        0.5,
        args.eps_step.or(cfg.eps_step),
        args.power_grid.or(cfg.power_grid),
        args.backoff.or(cfg.backoff),
    )?;
    let omega_count = args.omega_count.or(cfg.omega_count).unwrap_or(21);
    let result = trace_rate_region(&spec, omega_count)?;

    let spc = problem.mode() == PowerMode::Spc;
    let mut cols = vec![
        "problem", "h1", "h2", "p1", "p2", "p_total", "n1", "n2", "eps", "eps_step",
        "power_grid", "backoff", "omega",
    ];
    cols.extend(solution_columns(problem.scheme(), spc));
    let mut table = Table::new(cols);
    for row in &result.rows {
        let mut cells = param_cells(problem, &spec, row.n2);
        cells.push(Cell::Num(row.omega));
        cells.extend(solution_cells(row, problem.scheme(), spc));
        table.push(cells);
    }
    let infeasible_everywhere = result.rows.is_empty();
    Ok((table, infeasible_everywhere))
}

fn cmd_sweep(cli: &Cli, cfg: &RunConfig, args: &SweepArgs) -> CliResult<(Table, bool)> {
    let db = cli.db || cfg.db.unwrap_or(false);
    let problem = need(args.problem, cfg.problem, "--problem")?;
    let n2_list = args
        .n2
        .clone()
        .map(|l| l.0)
        .or_else(|| cfg.n2.map(|v| vec![v]))
        .ok_or_else(|| invalid("missing required parameter --n2"))?;
    let omega = args.omega.or(cfg.omega).unwrap_or(0.5);
    let n1 = need(args.n1, cfg.n1, "--n1")?;
    let spec = build_spec(
        db,
        problem,
        need(args.h1, cfg.h1, "--h1")?,
        need(args.h2, cfg.h2, "--h2")?,
        args.p1.or(cfg.p1),
        args.p2.or(cfg.p2),
        args.p_total.or(cfg.p_total),
        n1,
        // The per-row blocklength is swept; `build_spec` gets the first
        // value as a placeholder.
        *n2_list.first().ok_or_else(|| invalid("empty --n2 list"))?,
        need(args.eps, cfg.eps, "--eps")?,
        omega,
        args.eps_step.or(cfg.eps_step),
        args.power_grid.or(cfg.power_grid),
        args.backoff.or(cfg.backoff),
    )?;
    let result = sweep_n2(&spec, &n2_list)?;

    let spc = problem.mode() == PowerMode::Spc;
    let mut cols = vec![
        "problem", "h1", "h2", "p1", "p2", "p_total", "n1", "n2", "eps", "eps_step",
        "power_grid", "backoff", "omega",
    ];
    cols.extend(solution_columns(problem.scheme(), spc));
    let mut table = Table::new(cols);
    let mut any_feasible = false;
    for row in &result.rows {
        any_feasible |= row.solution.status != SolveStatus::Infeasible;
        let mut cells = param_cells(problem, &spec, row.n2);
        cells.push(Cell::Num(row.omega));
        cells.extend(solution_cells(row, problem.scheme(), spc));
        table.push(cells);
    }
    Ok((table, !any_feasible))
}

/// The resolved parameter prefix shared by `region` and `sweep` rows.
fn param_cells(problem: Problem, spec: &SolveSpec, n2: u64) -> Vec<Cell> {
    let (p1, p2, p_total) = match spec.cfg.power {
        PowerConstraint::Individual { p1, p2 } => (Cell::Num(p1), Cell::Num(p2), Cell::Empty),
        PowerConstraint::Sum { p_total } => (Cell::Empty, Cell::Empty, Cell::Num(p_total)),
    };
    let power_grid = match problem.mode() {
        PowerMode::Ipc => Cell::Empty,
        PowerMode::Spc => Cell::Int(spec.power_grid() as u64),
    };
    vec![
        Cell::Text(problem.name()),
        Cell::Num(spec.cfg.h1),
        Cell::Num(spec.cfg.h2),
        p1,
        p2,
        p_total,
        Cell::Int(spec.cfg.n1),
        Cell::Int(n2),
        Cell::Num(spec.cfg.eps),
        Cell::Num(spec.eps_step()),
        power_grid,
        Cell::Num(spec.backoff()),
    ]
}

fn cmd_simulate_ed(cli: &Cli, cfg: &RunConfig, args: &SimEdArgs) -> CliResult<(Table, bool)> {
    let db = cli.db || cfg.db.unwrap_or(false);
    let seed = cli.seed.or(cfg.seed).unwrap_or(1);
    let n2 = need(args.n2, cfg.n2, "--n2")?;
    let channel = ChannelConfig::new(
        lin(need(args.h1, cfg.h1, "--h1")?, db),
        lin(need(args.h2, cfg.h2, "--h2")?, db),
        PowerConstraint::Individual {
            p1: lin(need(args.p1, cfg.p1, "--p1")?, db),
            p2: lin(need(args.p2, cfg.p2, "--p2")?, db),
        },
        need(args.n1, cfg.n1, "--n1")?,
        n2,
        args.eps.or(cfg.eps).unwrap_or(1e-3),
    )?;
    let n2_used = args.n2_used.unwrap_or(n2);
    let report = simulate_ed(
        &channel,
        args.delta1,
        args.delta2,
        args.m1,
        args.m2,
        n2_used,
        args.trials,
        seed,
    )?;

    let mut table = Table::new(vec![
        "h1", "h2", "p1", "p2", "n1", "n2", "delta1", "delta2", "m1", "m2", "n2_used",
        "trials", "seed", "step1_rate", "step1_half_width", "step2_rate",
        "step2_half_width", "weak_rate", "weak_half_width", "density_samples",
        "density_mean", "density_var", "density_se_mean", "density_se_var",
        "remapped1", "remapped2",
    ]);
    let (p1, p2) = match channel.power {
        PowerConstraint::Individual { p1, p2 } => (p1, p2),
        PowerConstraint::Sum { .. } => unreachable!("individual constraint built above"),
    };
    table.push(vec![
        Cell::Num(channel.h1),
        Cell::Num(channel.h2),
        Cell::Num(p1),
        Cell::Num(p2),
        Cell::Int(channel.n1),
        Cell::Int(channel.n2),
        Cell::Num(args.delta1),
        Cell::Num(args.delta2),
        Cell::Int(args.m1 as u64),
        Cell::Int(args.m2 as u64),
        Cell::Int(n2_used),
        Cell::Int(args.trials),
        Cell::Int(seed),
        Cell::Sig(report.step1.rate),
        Cell::Sig(report.step1.half_width()),
        Cell::Sig(report.step2.rate),
        Cell::Sig(report.step2.half_width()),
        Cell::Sig(report.weak.rate),
        Cell::Sig(report.weak.half_width()),
        Cell::Int(report.density.samples),
        Cell::Sig(report.density.mean),
        Cell::Sig(report.density.var),
        Cell::Sig(report.density.se_mean),
        Cell::Sig(report.density.se_var),
        Cell::Int(report.remapped1 as u64),
        Cell::Int(report.remapped2 as u64),
    ]);
    Ok((table, false))
}

fn cmd_simulate_cross(cli: &Cli, cfg: &RunConfig, args: &SimCrossArgs) -> CliResult<(Table, bool)> {
    let seed = cli.seed.or(cfg.seed).unwrap_or(1);
    let n2 = need(args.n2, cfg.n2, "--n2")?;
    let p11 = need(args.p11, cfg.p1, "--p11")?;
    let p2bar = need(args.p2bar, cfg.p2, "--p2bar")?;
    let delta = args.delta.ok_or_else(|| invalid("missing required parameter --delta"))?;
    let est = simulate_cross_term(n2, p11, p2bar, delta, args.trials, seed)?;
    let tail = cross_term_tail(n2, delta, p11, p2bar)?;

    let mut table = Table::new(vec![
        "n2", "p11", "p2bar", "delta", "trials", "seed", "rate", "half_width",
        "analytic_tail",
    ]);
    table.push(vec![
        Cell::Int(n2),
        Cell::Num(p11),
        Cell::Num(p2bar),
        Cell::Num(delta),
        Cell::Int(args.trials),
        Cell::Int(seed),
        Cell::Sig(est.rate),
        Cell::Sig(est.half_width()),
        Cell::Sig(tail),
    ]);
    Ok((table, false))
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

fn run(cli: &Cli) -> CliResult<u8> {
    let cfg: RunConfig = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            serde_json::from_str(&text)
                .map_err(|e| invalid(format!("config {}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };

    let (table, infeasible_everywhere) = match &cli.command {
        Command::Rate(args) => cmd_rate(cli, &cfg, args)?,
        Command::EdBound(args) => cmd_ed_bound(cli, &cfg, args)?,
        Command::Region(args) => cmd_region(cli, &cfg, args)?,
        Command::Sweep(args) => cmd_sweep(cli, &cfg, args)?,
        Command::Simulate { sim } => match sim {
            SimulateCmd::Ed(args) => cmd_simulate_ed(cli, &cfg, args)?,
            SimulateCmd::Cross(args) => cmd_simulate_cross(cli, &cfg, args)?,
        },
    };

    let format = cli.format.or(cfg.format).unwrap_or(Format::Csv);
    let rendered = match format {
        Format::Csv => table.to_csv(),
        Format::Json => table.to_json(),
    };
    match cli.out.as_ref().or(cfg.out.as_ref()) {
        Some(path) => fs::write(path, rendered)?,
        None => print!("{rendered}"),
    }
    Ok(if infeasible_everywhere { 1 } else { 0 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.code())
        }
    }
}
