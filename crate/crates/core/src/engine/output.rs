use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SimParams;
use crate::analytic::{awgn_mfsk_sep, high_snr_ber_floor, rayleigh_ncbfsk_ber, ser_to_ber, OracleKind};
use crate::metrics::{format_g17, BerPoint};
use crate::{Error, Result};

/// Result file header, in order.
pub const CSV_COLUMNS: [&str; 15] = [
    "snr_db",
    "M",
    "L",
    "pc",
    "rho",
    "combiner",
    "fidelity",
    "trials",
    "symbol_errors",
    "bit_errors",
    "ser",
    "ber",
    "ci_low",
    "ci_high",
    "seed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    /// One JSON object per line, same fields as the CSV columns.
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" | "jsonl" | "ndjson" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!("unknown output format `{other}`"))),
        }
    }
}

pub(crate) fn csv_record(p: &BerPoint) -> [String; 15] {
    [
        format_g17(p.snr_db),
        p.order.to_string(),
        p.sensors.to_string(),
        format_g17(p.pc),
        format_g17(p.rho),
        p.combiner.to_string(),
        p.fidelity.to_string(),
        p.trials.to_string(),
        p.symbol_errors.to_string(),
        p.bit_errors.to_string(),
        format_g17(p.ser),
        format_g17(p.ber),
        format_g17(p.ci_low),
        format_g17(p.ci_high),
        p.seed.to_string(),
    ]
}

/// Writes the header and one row per point.
pub fn write_csv<W: Write>(table: &[BerPoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_COLUMNS)?;
    for p in table {
        w.write_record(csv_record(p))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one JSON object per line.
pub fn write_json<W: Write>(table: &[BerPoint], mut writer: W) -> Result<()> {
    for p in table {
        serde_json::to_writer(&mut writer, p)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes a full result table to `path`, replacing any existing file.
pub fn emit_results(table: &[BerPoint], format: OutputFormat, path: &Path) -> Result<()> {
    if table.is_empty() {
        return Err(Error::Config("refusing to write an empty result table".into()));
    }
    let file = BufWriter::new(File::create(path)?);
    match format {
        OutputFormat::Csv => write_csv(table, file),
        OutputFormat::Json => write_json(table, file),
    }
}

/// Reads a result file written by [`emit_results`] or a sweep.
pub fn read_results(path: &Path, format: OutputFormat) -> Result<Vec<BerPoint>> {
    let file = File::open(path)?;
    match format {
        OutputFormat::Csv => {
            let mut reader = csv::Reader::from_reader(file);
            let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
            if header != CSV_COLUMNS {
                return Err(Error::Config(format!(
                    "{} does not have the expected result header",
                    path.display()
                )));
            }
            reader
                .deserialize()
                .map(|row| row.map_err(Error::from))
                .collect()
        }
        OutputFormat::Json => BufReader::new(file)
            .lines()
            .filter(|line| !matches!(line, Ok(l) if l.trim().is_empty()))
            .map(|line| Ok(serde_json::from_str(&line?)?))
            .collect(),
    }
}

/// Analytic reference for one grid point, laid out like a result row.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub kind: OracleKind,
    pub point: BerPoint,
}

/// Analytic references for a simulation point.
///
/// * `sep`: single-branch AWGN at the per-sensor SNR.
/// * `ber`: single-branch Rayleigh BFSK at the per-sensor SNR (`M = 2` only).
/// * `floor`: high-SNR plateau from imperfect sensors.
pub fn oracle_rows(params: &SimParams) -> Result<Vec<OracleRow>> {
    params.validate()?;
    let gamma = params.per_sensor_energy() / super::N0;
    let row = |kind, ser: f64, ber: f64| OracleRow {
        kind,
        point: BerPoint {
            snr_db: params.snr_db,
            order: params.order,
            sensors: params.sensors,
            pc: params.p_c,
            rho: params.rho,
            combiner: params.combiner,
            fidelity: params.fidelity,
            trials: 0,
            symbol_errors: 0,
            bit_errors: 0,
            ser,
            ber,
            ci_low: ber,
            ci_high: ber,
            seed: params.seed,
        },
    };
    let mut rows = Vec::with_capacity(3);
    let sep = awgn_mfsk_sep(params.order, gamma)?;
    rows.push(row(OracleKind::Sep, sep, ser_to_ber(sep, params.order)?));
    if params.order == 2 {
        let ber = rayleigh_ncbfsk_ber(gamma)?;
        rows.push(row(OracleKind::Ber, ber, ber));
    }
    rows.push(row(
        OracleKind::Floor,
        1.0 - params.p_c,
        high_snr_ber_floor(params.p_c, params.order)?,
    ));
    Ok(rows)
}

/// Oracle table: the result columns followed by a `kind` column.
pub fn write_oracle_csv<W: Write>(rows: &[OracleRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_COLUMNS.iter().copied().chain(["kind"]))?;
    for r in rows {
        let record = csv_record(&r.point);
        w.write_record(record.iter().map(String::as_str).chain([r.kind.as_str()]))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_point, Fidelity};
    use crate::fusion::Combiner;

    fn sample() -> BerPoint {
        BerPoint {
            snr_db: 12.5,
            order: 16,
            sensors: 4,
            pc: 0.9995,
            rho: 0.1,
            combiner: Combiner::Egc,
            fidelity: Fidelity::Symbol,
            trials: 1_000_000,
            symbol_errors: 1234,
            bit_errors: 2345,
            ser: 0.001234,
            ber: 2345.0 / 4e6,
            ci_low: 0.1 / 3.0,
            ci_high: 2.0 / 3.0,
            seed: u64::MAX,
        }
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.csv");
        emit_results(&[sample()], OutputFormat::Csv, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
        assert_eq!(lines.count(), 1);
        assert_eq!(read_results(&path, OutputFormat::Csv).unwrap(), vec![sample()]);
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.jsonl");
        emit_results(&[sample(), sample()], OutputFormat::Json, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.lines().next().unwrap().starts_with("{\"snr_db\":12.5,\"M\":16,\"L\":4,"));
        assert_eq!(read_results(&path, OutputFormat::Json).unwrap(), vec![sample(), sample()]);
    }

    #[test]
    fn empty_table_and_bad_paths() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_results(&[], OutputFormat::Csv, &dir.path().join("x.csv")).is_err());
        let err = emit_results(&[sample()], OutputFormat::Csv, &dir.path().join("no/such/x.csv"))
            .unwrap_err();
        assert!(err.is_io());
    }

    #[test]
    fn identical_runs_give_identical_bytes() {
        let p = SimParams { order: 4, sensors: 2, trials: 20_000, seed: 5, ..Default::default() };
        let render = || {
            let mut buf = Vec::new();
            write_csv(&[run_point(&p).unwrap()], &mut buf).unwrap();
            buf
        };
        assert_eq!(render(), render());
    }

    #[test]
    fn oracle_rows_for_binary_point() {
        let p = SimParams { snr_db: 0.0, p_c: 0.99, ..Default::default() };
        let rows = oracle_rows(&p).unwrap();
        let kinds: Vec<_> = rows.iter().map(|r| r.kind).collect();
        assert_eq!(kinds, vec![OracleKind::Sep, OracleKind::Ber, OracleKind::Floor]);
        assert!((rows[0].point.ser - 0.5 * (-0.5f64).exp()).abs() < 1e-12);
        assert!((rows[1].point.ber - 1.0 / 3.0).abs() < 1e-12);
        assert!((rows[2].point.ber - 0.01).abs() < 1e-12);
        let mut buf = Vec::new();
        write_oracle_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().next().unwrap().ends_with(",seed,kind"));
        assert_eq!(text.lines().count(), 4);
    }
}
