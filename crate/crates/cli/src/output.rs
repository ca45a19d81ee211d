use std::io::Write;
use std::path::Path;

use serde_json::Value;

use qrem_core::{QremError, Result, SparseDistribution};

pub const DISTRIBUTION_SCHEMA: &str = "qrem.distribution/v1";
pub const CALIBRATION_SCHEMA: &str = "qrem.calibration/v1";
pub const EXPVAL_SCHEMA: &str = "qrem.expval/v1";
pub const FIDELITY_SCHEMA: &str = "qrem.fidelity/v1";
pub const MQC_MANIFEST_SCHEMA: &str = "qrem.mqc-manifest/v1";
pub const MLAE_SCHEMA: &str = "qrem.mlae-report/v1";

pub fn tagged(schema: &str, mut value: Value) -> Value {
    if let Value::Object(map) = &mut value {
        map.insert("schema".into(), Value::String(schema.into()));
    }
    value
}

pub fn distribution_json(d: &SparseDistribution<f64>) -> Value {
    tagged(DISTRIBUTION_SCHEMA, d.to_counts_json())
}

/// Pretty JSON to `path`, or to stdout.
pub fn emit_json(value: &Value, path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}")?;
        }
    }
    Ok(())
}

pub fn emit_csv<R: serde::Serialize>(rows: &[R], path: Option<&Path>) -> Result<()> {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(std::fs::File::create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> QremError {
    QremError::Io(std::io::Error::other(e.to_string()))
}

/// Fail before any work if an output file could not be created.
pub fn check_output(path: Option<&Path>) -> Result<()> {
    if let Some(parent) = path.and_then(Path::parent) {
        if !parent.as_os_str().is_empty() && !parent.is_dir() {
            return Err(QremError::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("output directory {} does not exist", parent.display()),
            )));
        }
    }
    Ok(())
}
