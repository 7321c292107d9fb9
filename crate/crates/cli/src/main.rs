//! `wsn-sim`: command-line front end to `wsn_core`.
//!
//! Exit codes: 0 on success, 1 for bad arguments or configuration, 2 for
//! I/O failures, 3 when `verify` finds a failing criterion.

mod args;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use clap::Parser;
use wsn_core::acceptance::{self, Report};
use wsn_core::engine::{oracle_rows, write_csv, write_json, write_oracle_csv, Axis};
use wsn_core::{run_sweep, Error, OutputFormat, Result, SimParams, SweepSpec};

use crate::args::{Cli, Command, OracleArgs, PointArgs, SimulateArgs, VerifyArgs};

const CONFIG_ERROR: u8 = 1;
const IO_ERROR: u8 = 2;
const ACCEPTANCE_FAILURE: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(CONFIG_ERROR) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Oracle(args) => oracle(args),
        Command::Verify(args) => verify(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("wsn-sim: {e}");
            ExitCode::from(if e.is_io() { IO_ERROR } else { CONFIG_ERROR })
        }
    }
}

fn names_field(axis: &Axis, field: &str) -> bool {
    let name = axis.field.to_ascii_lowercase();
    match field {
        "snr_db" => name == "snr_db" || name == "snr",
        "pc" => name == "pc" || name == "p_c",
        other => name == other.to_ascii_lowercase(),
    }
}

/// Applies the point flags to `base`, returning the fields that were set.
fn apply_point(point: &PointArgs, base: &mut SimParams) -> Vec<&'static str> {
    let mut set = Vec::new();
    if let Some(m) = point.order {
        base.order = m;
        set.push("M");
    }
    if let Some(l) = point.sensors {
        base.sensors = l;
        set.push("L");
    }
    if let Some(basis) = point.snr_basis {
        base.snr_basis = basis;
        set.push("snr_basis");
    }
    if let Some(pc) = point.pc {
        base.p_c = pc;
        set.push("pc");
    }
    if let Some(rho) = point.rho {
        base.rho = rho;
        set.push("rho");
    }
    set
}

fn sweep_spec(args: &SimulateArgs) -> Result<SweepSpec> {
    let mut spec = match &args.config {
        Some(path) => SweepSpec::from_json_file(path)?,
        None => SweepSpec::new(SimParams::default(), Vec::new()),
    };
    let base = &mut spec.base;
    let mut set = apply_point(&args.point, base);
    if let Some(c) = args.combiner {
        base.combiner = c;
        set.push("combiner");
    }
    if let Some(f) = args.fidelity {
        base.fidelity = f;
        set.push("fidelity");
    }
    if let Some(f) = args.fading {
        base.fading = f;
        set.push("fading");
    }
    if let Some(t) = args.trials {
        base.trials = t;
        set.push("trials");
    }
    if let Some(s) = args.seed {
        base.seed = s;
        set.push("seed");
    }
    if let Some(snr) = &args.point.snr {
        set.push("snr_db");
        spec.axes.retain(|a| !names_field(a, "snr_db"));
        spec.axes.push(Axis::new("snr_db", snr.0.iter().copied()));
    }
    // A flag pins its field, replacing any axis the config sweeps over it.
    spec.axes.retain(|a| a.field == "snr_db" || !set.iter().any(|f| names_field(a, f)));
    if spec.axes.is_empty() {
        spec.axes.push(Axis::new("snr_db", [spec.base.snr_db]));
    }
    if args.workers.is_some() {
        spec.workers = args.workers;
    }
    if args.out.is_some() {
        spec.output_path = args.out.clone();
    }
    if let Some(format) = args.format {
        spec.format = format;
    }
    Ok(spec)
}

fn simulate(args: SimulateArgs) -> Result<ExitCode> {
    let spec = sweep_spec(&args)?;
    let table = run_sweep(&spec)?;
    match &spec.output_path {
        Some(path) => eprintln!("wrote {} rows to {}", table.len(), path.display()),
        None => {
            let stdout = io::stdout().lock();
            match spec.format {
                OutputFormat::Csv => write_csv(&table, stdout)?,
                OutputFormat::Json => write_json(&table, stdout)?,
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn oracle(args: OracleArgs) -> Result<ExitCode> {
    let mut base = SimParams::default();
    apply_point(&args.point, &mut base);
    let snrs = args.point.snr.map_or_else(|| vec![base.snr_db], |s| s.0);
    let mut rows = Vec::new();
    for snr_db in snrs {
        rows.extend(oracle_rows(&SimParams { snr_db, ..base.clone() })?);
    }
    match &args.out {
        Some(path) => write_oracle_csv(&rows, BufWriter::new(File::create(path)?))?,
        None => write_oracle_csv(&rows, io::stdout().lock())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(args: VerifyArgs) -> Result<ExitCode> {
    let selected: Vec<_> = if args.only.is_empty() {
        acceptance::CRITERIA.iter().collect()
    } else {
        args.only
            .iter()
            .map(|&id| {
                acceptance::criterion(id)
                    .ok_or_else(|| Error::Config(format!("no acceptance criterion {id}")))
            })
            .collect::<Result<_>>()?
    };
    let mut out = io::stdout().lock();
    let mut reports: Vec<Report> = Vec::with_capacity(selected.len());
    for c in selected {
        let report = c.run();
        writeln!(out, "{report}")?;
        out.flush()?;
        reports.push(report);
    }
    let failed = reports.iter().filter(|r| !r.outcome.passed()).count();
    writeln!(out, "{} of {} criteria passed", reports.len() - failed, reports.len())?;
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(ACCEPTANCE_FAILURE) })
}
