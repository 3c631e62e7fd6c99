//! End-to-end checks of the `edgbc` binary: output format contracts,
//! parameter round-trips, exit codes, and determinism.
//!
//! Every table row carries the fully resolved parameter set, so feeding a
//! row's parameter cells back as a single-point invocation must reproduce
//! the row's value cells exactly. CSV and JSON encodings of the same run
//! must agree value-for-value after parsing. Both invariants are enforced
//! here against live runs rather than stored fixtures.

use std::path::PathBuf;
use std::process::{Command, Output};

use edgbc_core::math::{capacity, Snr};

fn edgbc(args: &[&str]) -> Output {
    edgbc_env(args, &[])
}

/// Runs the binary with a scrubbed environment so ambient `EDGBC_*`
/// variables cannot leak into a test, then applies `envs` on top.
fn edgbc_env(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_edgbc"));
    cmd.args(args);
    for key in ["EDGBC_CONFIG", "EDGBC_FORMAT", "EDGBC_OUT", "EDGBC_SEED"] {
        cmd.env_remove(key);
    }
    for (key, value) in envs {
        cmd.env(key, value);
    }
    cmd.output().expect("binary spawns")
}

fn stdout_text(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is utf8")
}

fn stderr_text(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr is utf8")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process not killed by signal")
}

/// Cells never contain commas or quotes, so a plain split is a full parser.
fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .expect("header line")
        .split(',')
        .map(str::to_string)
        .collect();
    let rows: Vec<Vec<String>> = lines
        .map(|line| line.split(',').map(str::to_string).collect())
        .collect();
    for row in &rows {
        assert_eq!(row.len(), header.len(), "ragged csv row: {row:?}");
    }
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header
        .iter()
        .position(|c| c == name)
        .unwrap_or_else(|| panic!("missing column {name} in {header:?}"))
}

/// Mirrors the binary's 12-significant-digit rendering of computed values.
fn sig12(v: f64) -> String {
    let rounded: f64 = format!("{v:.11e}").parse().expect("float literal");
    format!("{rounded}")
}

fn temp_path(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("edgbc-test-{}-{name}", std::process::id()))
}

const SWEEP_BASE: &[&str] = &[
    "sweep", "--problem", "p2-ipc", "--h1", "1", "--h2", "10", "--p1", "8", "--p2",
    "0.2", "--n1", "1024", "--eps", "0.000002", "--omega", "0.5",
];

// ---------------------------------------------------------------------------
// Values and grids
// ---------------------------------------------------------------------------

#[test]
fn rate_at_half_target_equals_capacity() {
    let out = edgbc(&["rate", "--n", "1024", "--snr", "8", "--eps", "0.5"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_text(&out));
    let (header, rows) = parse_csv(&stdout_text(&out));
    assert_eq!(header, ["n", "snr", "eps", "rate"]);
    assert_eq!(rows.len(), 1);
    let expected = sig12(capacity(Snr::new(8.0).unwrap()));
    assert_eq!(rows[0], ["1024", "8", "0.5", expected.as_str()]);
}

#[test]
fn range_and_list_arguments_expand_inclusively() {
    let out = edgbc(&["rate", "--n", "512:1024:256", "--snr", "1,8", "--eps", "0.001"]);
    assert_eq!(exit_code(&out), 0);
    let (header, rows) = parse_csv(&stdout_text(&out));
    assert_eq!(rows.len(), 6, "3 blocklengths x 2 snrs");
    let n_col = column(&header, "n");
    let snr_col = column(&header, "snr");
    let seen: Vec<(String, String)> = rows
        .iter()
        .map(|r| (r[n_col].clone(), r[snr_col].clone()))
        .collect();
    for n in ["512", "768", "1024"] {
        for snr in ["1", "8"] {
            assert!(
                seen.contains(&(n.to_string(), snr.to_string())),
                "missing grid point ({n}, {snr})"
            );
        }
    }
}

#[test]
fn ed_bound_reports_reference_operating_points() {
    let out = edgbc(&[
        "ed-bound", "--h1", "1", "--h2", "100,1000,10000", "--p1", "8", "--p2", "0.2",
        "--n1", "2048", "--eps", "0.000002",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_text(&out));
    let (header, rows) = parse_csv(&stdout_text(&out));
    assert_eq!(rows.len(), 3);
    let early = column(&header, "n_early");
    let full = column(&header, "n_full");
    let feasible = column(&header, "feasible");
    let early_cells: Vec<&str> = rows.iter().map(|r| r[early].as_str()).collect();
    assert_eq!(early_cells, ["1628", "1604", "1601"]);
    for row in &rows {
        assert_eq!(row[full], "2048");
        assert_eq!(row[feasible], "true");
    }
    // The asymptotic column at the largest gain pins the latency floor the
    // finite-blocklength bound is compared against.
    let asym = column(&header, "n_asymptotic");
    assert_eq!(rows[2][asym], "1208.67412629");
}

// ---------------------------------------------------------------------------
// Output format contracts
// ---------------------------------------------------------------------------

#[test]
fn csv_and_json_encodings_hold_identical_values() {
    let mut args = SWEEP_BASE.to_vec();
    args.extend(["--n2", "840:904:32"]);
    let csv_out = edgbc(&args);
    assert_eq!(exit_code(&csv_out), 0);
    let mut json_args = args.clone();
    json_args.extend(["--format", "json"]);
    let json_out = edgbc(&json_args);
    assert_eq!(exit_code(&json_out), 0);

    let (header, rows) = parse_csv(&stdout_text(&csv_out));
    let parsed: serde_json::Value =
        serde_json::from_str(&stdout_text(&json_out)).expect("json output parses");
    let objects = parsed.as_array().expect("top-level array");
    assert_eq!(objects.len(), rows.len());

    for (row, object) in rows.iter().zip(objects) {
        let object = object.as_object().expect("row object");
        assert_eq!(object.len(), header.len());
        for (name, cell) in header.iter().zip(row) {
            let value = &object[name];
            match value {
                serde_json::Value::Null => {
                    assert!(cell.is_empty(), "{name}: csv {cell:?} vs json null")
                }
                serde_json::Value::String(s) => assert_eq!(s, cell, "{name} mismatch"),
                serde_json::Value::Number(num) => {
                    let json_bits = num.as_f64().expect("numeric cell").to_bits();
                    let csv_bits = cell.parse::<f64>().expect("csv float").to_bits();
                    assert_eq!(json_bits, csv_bits, "{name}: csv {cell} vs json {num}");
                }
                other => panic!("unexpected json cell {other:?}"),
            }
        }
    }
}

#[test]
fn row_parameters_fed_back_reproduce_row_values() {
    let mut args = SWEEP_BASE.to_vec();
    args.extend(["--n2", "840:904:32"]);
    let out = edgbc(&args);
    assert_eq!(exit_code(&out), 0);
    let text = stdout_text(&out);
    let (header, rows) = parse_csv(&text);
    let header_line = text.lines().next().expect("header line").to_string();

    // Every parameter column maps to the flag that sets it; empty cells are
    // parameters the run's power mode does not use.
    let flag_of = [
        ("problem", "--problem"),
        ("h1", "--h1"),
        ("h2", "--h2"),
        ("p1", "--p1"),
        ("p2", "--p2"),
        ("p_total", "--p-total"),
        ("n1", "--n1"),
        ("n2", "--n2"),
        ("eps", "--eps"),
        ("eps_step", "--eps-step"),
        ("power_grid", "--power-grid"),
        ("backoff", "--backoff"),
        ("omega", "--omega"),
    ];
    for (row_index, row) in rows.iter().enumerate() {
        let mut replay: Vec<String> = vec!["sweep".to_string()];
        for (name, flag) in flag_of {
            let cell = &row[column(&header, name)];
            if !cell.is_empty() {
                replay.push(flag.to_string());
                replay.push(cell.clone());
            }
        }
        let replay_refs: Vec<&str> = replay.iter().map(String::as_str).collect();
        let single = edgbc(&replay_refs);
        let single_text = stdout_text(&single);
        let mut lines = single_text.lines();
        assert_eq!(lines.next(), Some(header_line.as_str()));
        let expected = text.lines().nth(row_index + 1).expect("source row");
        assert_eq!(lines.next(), Some(expected), "row {row_index} round-trip");
        assert_eq!(lines.next(), None, "single-point replay emits one row");
    }
}

#[test]
fn config_file_defaults_match_explicit_flags() {
    let config = temp_path("config.json");
    std::fs::write(
        &config,
        r#"{"h1": 1, "h2": 10, "p1": 8, "p2": 0.2, "n1": 1024, "eps": 0.000002}"#,
    )
    .expect("write config");
    let config_str = config.to_str().expect("utf8 path");

    let mut full = SWEEP_BASE.to_vec();
    full.extend(["--n2", "872"]);
    let reference = edgbc(&full);

    let from_flag = edgbc(&[
        "sweep", "--problem", "p2-ipc", "--omega", "0.5", "--n2", "872", "--config",
        config_str,
    ]);
    let from_env = edgbc_env(
        &["sweep", "--problem", "p2-ipc", "--omega", "0.5", "--n2", "872"],
        &[("EDGBC_CONFIG", config_str)],
    );
    assert_eq!(exit_code(&reference), 0);
    assert_eq!(stdout_text(&from_flag), stdout_text(&reference));
    assert_eq!(stdout_text(&from_env), stdout_text(&reference));

    // An explicit flag wins over the config value: overriding eps moves the
    // resolved eps and eps_step cells.
    let overridden = edgbc(&[
        "sweep", "--problem", "p2-ipc", "--omega", "0.5", "--n2", "872", "--config",
        config_str, "--eps", "0.00002",
    ]);
    let (header, rows) = parse_csv(&stdout_text(&overridden));
    assert_eq!(rows[0][column(&header, "eps")], "0.00002");
    // The echoed step is the resolved default eps/100 as computed, not the
    // nearest decimal literal.
    let resolved_step = 0.00002_f64 / 100.0;
    assert_eq!(rows[0][column(&header, "eps_step")], format!("{resolved_step}"));

    std::fs::remove_file(&config).ok();
}

#[test]
fn db_inputs_convert_once_at_the_boundary() {
    // 0 dB is exactly unit gain, so the two runs must render identically.
    let linear = edgbc(&["rate", "--n", "1024", "--snr", "1", "--eps", "0.5"]);
    let db = edgbc(&["rate", "--db", "--n", "1024", "--snr", "0", "--eps", "0.5"]);
    assert_eq!(exit_code(&db), 0);
    assert_eq!(stdout_text(&db), stdout_text(&linear));
}

#[test]
fn out_flag_writes_the_table_and_silences_stdout() {
    let path = temp_path("rate.csv");
    let path_str = path.to_str().expect("utf8 path");
    let to_stdout = edgbc(&["rate", "--n", "512", "--snr", "4", "--eps", "0.001"]);
    let to_file = edgbc(&[
        "rate", "--n", "512", "--snr", "4", "--eps", "0.001", "--out", path_str,
    ]);
    assert_eq!(exit_code(&to_file), 0);
    assert!(stdout_text(&to_file).is_empty(), "table went to the file");
    let written = std::fs::read_to_string(&path).expect("out file");
    assert_eq!(written, stdout_text(&to_stdout));
    std::fs::remove_file(&path).ok();
}

#[test]
fn format_env_override_yields_json_and_flags_win() {
    let args = ["rate", "--n", "1024", "--snr", "8", "--eps", "0.5"];
    let json = edgbc_env(&args, &[("EDGBC_FORMAT", "json")]);
    let parsed: serde_json::Value =
        serde_json::from_str(&stdout_text(&json)).expect("json output parses");
    let rate = parsed[0]["rate"].as_f64().expect("rate field");
    assert!((rate - capacity(Snr::new(8.0).unwrap())).abs() < 1e-11);

    let mut csv_args = args.to_vec();
    csv_args.extend(["--format", "csv"]);
    let csv = edgbc_env(&csv_args, &[("EDGBC_FORMAT", "json")]);
    assert!(stdout_text(&csv).starts_with("n,snr,eps,rate"));
}

// ---------------------------------------------------------------------------
// Region structure
// ---------------------------------------------------------------------------

#[test]
fn region_trace_is_feasible_and_mutually_nondominated() {
    let out = edgbc(&[
        "region", "--problem", "p2-spc", "--h1", "1", "--h2", "50", "--p-total", "10",
        "--n1", "1024", "--n2", "840", "--eps", "0.00002", "--power-grid", "4",
        "--omega-count", "5",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_text(&out));
    let (header, rows) = parse_csv(&stdout_text(&out));
    assert!(!rows.is_empty());
    let status = column(&header, "status");
    let r1_col = column(&header, "r1");
    let r2_col = column(&header, "r2");
    let points: Vec<(f64, f64)> = rows
        .iter()
        .map(|row| {
            assert_eq!(row[status], "feasible");
            (
                row[r1_col].parse::<f64>().expect("r1"),
                row[r2_col].parse::<f64>().expect("r2"),
            )
        })
        .collect();
    for (i, a) in points.iter().enumerate() {
        for (j, b) in points.iter().enumerate() {
            if i != j {
                let dominates = a.0 >= b.0 && a.1 >= b.1 && (a.0 > b.0 || a.1 > b.1);
                assert!(!dominates, "row {i} {a:?} dominates row {j} {b:?}");
            }
        }
    }
    // Sum power allocations are echoed per row and respect the budget on
    // average over the frame.
    let p11 = column(&header, "p11_bar");
    let p12 = column(&header, "p12_bar");
    let p2b = column(&header, "p2_bar");
    let n1_col = column(&header, "n1");
    let n2_col = column(&header, "n2");
    for row in &rows {
        let frame: f64 = row[n1_col].parse().expect("n1");
        let overlap: f64 = row[n2_col].parse().expect("n2");
        let share = overlap / frame;
        let avg = share * (row[p11].parse::<f64>().unwrap() + row[p2b].parse::<f64>().unwrap())
            + (1.0 - share) * row[p12].parse::<f64>().unwrap();
        assert!(avg <= 10.0 * (1.0 + 1e-9), "average power {avg} over budget");
    }
}

// ---------------------------------------------------------------------------
// Exit codes
// ---------------------------------------------------------------------------

#[test]
fn validation_failures_exit_two() {
    let bad_eps = edgbc(&["rate", "--n", "1024", "--snr", "8", "--eps", "1.5"]);
    assert_eq!(exit_code(&bad_eps), 2);
    assert!(stdout_text(&bad_eps).is_empty());
    assert!(stderr_text(&bad_eps).contains("(0, 1)"), "names the valid interval");

    let missing = edgbc(&["sweep", "--problem", "p2-ipc", "--n2", "512"]);
    assert_eq!(exit_code(&missing), 2);
    assert!(stderr_text(&missing).contains("--n1"), "names the missing flag");

    let config = temp_path("bad-config.json");
    std::fs::write(&config, r#"{"bogus_key": 3}"#).expect("write config");
    let unknown = edgbc(&[
        "rate", "--n", "8", "--snr", "1", "--eps", "0.5", "--config",
        config.to_str().expect("utf8 path"),
    ]);
    assert_eq!(exit_code(&unknown), 2);
    assert!(stderr_text(&unknown).contains("bogus_key"), "names the unknown key");
    std::fs::remove_file(&config).ok();
}

#[test]
fn resource_guard_violations_exit_three() {
    let out = edgbc(&[
        "simulate", "ed", "--h1", "1", "--h2", "2", "--p1", "6.5", "--p2", "0.5",
        "--n1", "512", "--n2", "512", "--m1", "1000000", "--m2", "2", "--trials",
        "100000",
    ]);
    assert_eq!(exit_code(&out), 3);
    assert!(stderr_text(&out).contains("guard"));
}

#[test]
fn infeasible_everywhere_exits_one_with_the_table() {
    let mut args = SWEEP_BASE.to_vec();
    args.extend(["--n2", "256:320:32"]);
    let out = edgbc(&args);
    assert_eq!(exit_code(&out), 1);
    let (header, rows) = parse_csv(&stdout_text(&out));
    assert_eq!(rows.len(), 3, "rows are kept and flagged, not dropped");
    let status = column(&header, "status");
    let r1_col = column(&header, "r1");
    for row in &rows {
        assert_eq!(row[status], "infeasible");
        assert!(row[r1_col].is_empty(), "no rate point at an infeasible row");
    }
}

// ---------------------------------------------------------------------------
// Simulation determinism
// ---------------------------------------------------------------------------

#[test]
fn seeded_simulations_are_bit_reproducible() {
    let cross_args = [
        "simulate", "cross", "--n2", "100", "--p11", "8", "--p2bar", "0.2", "--delta",
        "0.5", "--trials", "100000", "--seed", "7",
    ];
    let first = edgbc(&cross_args);
    let second = edgbc(&cross_args);
    assert_eq!(exit_code(&first), 0, "stderr: {}", stderr_text(&first));
    assert_eq!(stdout_text(&first), stdout_text(&second));
    let (header, rows) = parse_csv(&stdout_text(&first));
    assert_eq!(rows[0][column(&header, "analytic_tail")], "0.141830159087");
    let rate: f64 = rows[0][column(&header, "rate")].parse().expect("rate");
    let tail: f64 = rows[0][column(&header, "analytic_tail")].parse().expect("tail");
    assert!(rate <= tail, "overshoot frequency stays under the analytic tail");

    let ed_args = [
        "simulate", "ed", "--h1", "1", "--h2", "2", "--p1", "6.5", "--p2", "0.5",
        "--n1", "256", "--n2", "128", "--m1", "4", "--m2", "2", "--trials", "200",
        "--seed", "9",
    ];
    let first = edgbc(&ed_args);
    let second = edgbc(&ed_args);
    assert_eq!(exit_code(&first), 0, "stderr: {}", stderr_text(&first));
    assert_eq!(stdout_text(&first), stdout_text(&second));
    let (header, rows) = parse_csv(&stdout_text(&first));
    let samples: u64 = rows[0][column(&header, "density_samples")].parse().expect("count");
    assert_eq!(samples, 200 * 128, "one density sample per overlap symbol");
}
