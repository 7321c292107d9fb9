use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::output::{csv_record, read_results, OutputFormat, CSV_COLUMNS};
use super::{run_point, with_workers, SimParams};
use crate::metrics::BerPoint;
use crate::{Error, Result};

/// Fields a sweep axis may vary, by their config names.
pub const AXIS_FIELDS: [&str; 12] = [
    "M",
    "L",
    "snr_db",
    "snr_basis",
    "pc",
    "rho",
    "combiner",
    "fidelity",
    "fading",
    "trials",
    "seed",
    "chunk_size",
];

fn canonical_field(name: &str) -> Option<&'static str> {
    let lowered = name.to_ascii_lowercase();
    let key = match lowered.as_str() {
        "m" => "M",
        "l" => "L",
        "p_c" | "pc" => "pc",
        "snr" => "snr_db",
        _ => return AXIS_FIELDS.iter().find(|f| **f == lowered).copied(),
    };
    Some(key)
}

/// One swept parameter and its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub field: String,
    pub values: Vec<Value>,
}

impl Axis {
    pub fn new<T: Into<Value>>(field: &str, values: impl IntoIterator<Item = T>) -> Self {
        Self {
            field: field.to_string(),
            values: values.into_iter().map(Into::into).collect(),
        }
    }
}

/// A full experiment: the Cartesian product of `axes` applied to `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub base: SimParams,
    #[serde(default)]
    pub axes: Vec<Axis>,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
    /// Worker threads; `None` uses every core. Never affects results.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl SweepSpec {
    pub fn new(base: SimParams, axes: Vec<Axis>) -> Self {
        Self {
            base,
            axes,
            output_path: None,
            format: OutputFormat::Csv,
            workers: None,
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid sweep config: {e}")))
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Expands the axes into concrete points, first axis outermost.
    pub fn points(&self) -> Result<Vec<SimParams>> {
        if self.axes.is_empty() {
            return Err(Error::Config("a sweep needs at least one axis".into()));
        }
        let mut fields = Vec::with_capacity(self.axes.len());
        for axis in &self.axes {
            let field = canonical_field(&axis.field).ok_or_else(|| {
                Error::Config(format!(
                    "unknown sweep field `{}` (expected one of {})",
                    axis.field,
                    AXIS_FIELDS.join(", ")
                ))
            })?;
            if axis.values.is_empty() {
                return Err(Error::Config(format!("axis `{}` has no values", axis.field)));
            }
            if fields.contains(&field) {
                return Err(Error::Config(format!("field `{field}` swept twice")));
            }
            fields.push(field);
        }

        let base = serde_json::to_value(&self.base)?;
        let mut points = Vec::new();
        let mut index = vec![0usize; self.axes.len()];
        loop {
            let mut value = base.clone();
            let map = value.as_object_mut().expect("SimParams serializes to an object");
            for ((axis, field), &i) in self.axes.iter().zip(&fields).zip(&index) {
                map.insert((*field).to_string(), axis.values[i].clone());
            }
            let params: SimParams = serde_json::from_value(value)
                .map_err(|e| Error::Config(format!("invalid sweep value: {e}")))?;
            params.validate()?;
            points.push(params);

            // Odometer increment, last axis fastest.
            let mut k = self.axes.len();
            loop {
                if k == 0 {
                    return Ok(points);
                }
                k -= 1;
                index[k] += 1;
                if index[k] < self.axes[k].values.len() {
                    break;
                }
                index[k] = 0;
            }
        }
    }
}

fn same_point(row: &BerPoint, p: &SimParams) -> bool {
    row.snr_db == p.snr_db
        && row.order == p.order
        && row.sensors == p.sensors
        && row.pc == p.p_c
        && row.rho == p.rho
        && row.combiner == p.combiner
        && row.fidelity == p.fidelity
        && row.trials == p.trials
        && row.seed == p.seed
}

/// Appends rows to a result file, one flush per row.
struct IncrementalWriter {
    file: File,
    format: OutputFormat,
}

impl IncrementalWriter {
    fn open(path: &Path, format: OutputFormat, fresh: bool) -> Result<Self> {
        let mut file = if fresh {
            File::create(path)?
        } else {
            OpenOptions::new().append(true).open(path)?
        };
        if fresh && format == OutputFormat::Csv {
            writeln!(file, "{}", CSV_COLUMNS.join(","))?;
        }
        Ok(Self { file, format })
    }

    fn append(&mut self, row: &BerPoint) -> Result<()> {
        match self.format {
            OutputFormat::Csv => {
                let mut w = csv::WriterBuilder::new()
                    .has_headers(false)
                    .from_writer(&mut self.file);
                w.write_record(csv_record(row))?;
                w.flush()?;
            }
            OutputFormat::Json => {
                serde_json::to_writer(&mut self.file, row)?;
                self.file.write_all(b"\n")?;
            }
        }
        self.file.sync_data()?;
        Ok(())
    }
}

/// Runs every point of the sweep and returns one row per point.
///
/// With an output path, rows are appended as they finish. Points already
/// present in an existing file are read back instead of recomputed, so an
/// interrupted sweep resumes where it stopped. Result rows do not record
/// the SNR basis, so only resume a file with a sweep that uses the same one.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<BerPoint>> {
    let points = spec.points()?;
    let (existing, mut writer) = match &spec.output_path {
        None => (Vec::new(), None),
        Some(path) => {
            let resumable = path.metadata().map(|m| m.len() > 0).unwrap_or(false);
            let existing = if resumable {
                read_results(path, spec.format)?
            } else {
                Vec::new()
            };
            let writer = IncrementalWriter::open(path, spec.format, !resumable)?;
            (existing, Some(writer))
        }
    };

    let mut table = Vec::with_capacity(points.len());
    for params in &points {
        if let Some(row) = existing.iter().find(|row| same_point(row, params)) {
            table.push(row.clone());
            continue;
        }
        let row = with_workers(spec.workers, || run_point(params))?;
        if let Some(w) = writer.as_mut() {
            w.append(&row)?;
        }
        table.push(row);
    }
    Ok(table)
}
