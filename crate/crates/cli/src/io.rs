//! Stream ingestion and result emission.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use hdqcd::sim::ResultRow;
use nalgebra::DVector;
use serde::Serialize;
use serde_json::Value;

use crate::config::Format;
use crate::error::{CliError, CliResult};

/// Magic bytes of the binary stream format.
pub const MAGIC: &[u8; 4] = b"HDW1";
const HEADER_LEN: usize = 12;

/// Read a stream of `p`-dimensional samples.
///
/// CSV holds one sample per line; blank lines and `#` comments are skipped.
/// Binary is `HDW1`, `u32 p`, `u32 n` (little endian), then `p·n` little
/// endian doubles, one sample after another.
pub fn ingest_stream(path: &Path, format: Format) -> CliResult<Vec<DVector<f64>>> {
    let bytes = fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let binary = match format {
        Format::Binary => true,
        Format::Csv => false,
        Format::Auto => bytes.starts_with(MAGIC),
    };
    let out = if binary {
        parse_binary(&bytes)
    } else {
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| CliError::Data(format!("not UTF-8 text at byte {}", e.valid_up_to())))?;
        parse_csv(text)
    };
    out.map_err(|e| match e {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_csv(text: &str) -> CliResult<Vec<DVector<f64>>> {
    let mut samples = Vec::new();
    let mut p = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let lineno = i + 1;
        let values = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Data(format!("line {lineno}: cannot parse {:?} as a number", f.trim())))
            })
            .collect::<CliResult<Vec<f64>>>()?;
        match p {
            None => p = Some(values.len()),
            Some(p) if p != values.len() => {
                return Err(CliError::Data(format!(
                    "line {lineno}: expected {p} fields, found {}",
                    values.len()
                )))
            }
            Some(_) => {}
        }
        samples.push(DVector::from_vec(values));
    }
    if samples.is_empty() {
        return Err(CliError::Data("stream holds no samples".into()));
    }
    Ok(samples)
}

pub fn parse_binary(bytes: &[u8]) -> CliResult<Vec<DVector<f64>>> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(CliError::Data("offset 0: missing HDW1 header".into()));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize;
    let (p, n) = (word(4), word(8));
    if p == 0 {
        return Err(CliError::Data("offset 4: dimension is zero".into()));
    }
    let body = &bytes[HEADER_LEN..];
    let expected = p
        .checked_mul(n)
        .and_then(|k| k.checked_mul(8))
        .ok_or_else(|| CliError::Data("offset 4: header size overflows".into()))?;
    if body.len() != expected {
        let complete = body.len() / (8 * p);
        return Err(CliError::Data(format!(
            "offset {}: header declares {n} samples of dimension {p} but the file holds {} bytes of data",
            HEADER_LEN + complete.min(n) * 8 * p,
            body.len()
        )));
    }
    Ok(body
        .chunks_exact(8 * p)
        .map(|chunk| {
            DVector::from_iterator(
                p,
                chunk
                    .chunks_exact(8)
                    .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))),
            )
        })
        .collect())
}

/// Check that every sample has the dimension of the first.
pub fn stream_dimension(samples: &[DVector<f64>]) -> CliResult<usize> {
    let p = samples.first().map(|x| x.len()).ok_or_else(|| CliError::Data("empty stream".into()))?;
    match samples.iter().position(|x| x.len() != p) {
        Some(k) => Err(CliError::Data(format!(
            "sample {}: dimension {} differs from {p}",
            k + 1,
            samples[k].len()
        ))),
        None => Ok(p),
    }
}

pub fn write_csv_stream(path: &Path, samples: &[DVector<f64>]) -> CliResult<()> {
    let mut s = String::new();
    for x in samples {
        let fields: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    write_file(path, s.as_bytes())
}

pub fn write_binary_stream(path: &Path, samples: &[DVector<f64>]) -> CliResult<()> {
    let p = stream_dimension(samples)?;
    let too_big = || CliError::Data("stream too large for the HDW1 header".into());
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * p * samples.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&u32::try_from(p).map_err(|_| too_big())?.to_le_bytes());
    buf.extend_from_slice(&u32::try_from(samples.len()).map_err(|_| too_big())?.to_le_bytes());
    for x in samples {
        for v in x.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    write_file(path, &buf)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

/// Result table columns, in emission order.
pub const COLUMNS: [&str; 12] = [
    "p", "n", "b", "estimator", "metric", "value", "stderr", "reps", "censored", "seed", "version", "error",
];

/// Emitted tables and manifests identify the producing build by this.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Render rows as CSV, sorted by `(p, n, b, estimator, metric)`.
pub fn render_results(rows: &[ResultRow], seed: u64) -> CliResult<String> {
    if rows.is_empty() {
        return Err(CliError::Data("no result records to emit".into()));
    }
    let mut sorted: Vec<&ResultRow> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        (a.p, a.n)
            .cmp(&(b.p, b.n))
            .then(a.b.total_cmp(&b.b))
            .then_with(|| a.estimator.cmp(&b.estimator))
            .then_with(|| a.metric.cmp(&b.metric))
    });
    let mut s = COLUMNS.join(",");
    s.push('\n');
    for r in sorted {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.p,
            r.n,
            r.b,
            csv_field(&r.estimator),
            csv_field(&r.metric),
            r.value,
            r.stderr,
            r.reps,
            r.censored,
            seed,
            VERSION,
            csv_field(r.error.as_deref().unwrap_or(""))
        )
        .expect("writing to a String");
    }
    Ok(s)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// `<stem>.manifest.json` next to `path`.
pub fn manifest_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.manifest.json"))
}

/// Manifest written alongside every output table.
#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: Option<u64>,
    pub config: Value,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub details: Value,
    pub outputs: Vec<&'a str>,
}

pub fn write_manifest(table: &Path, manifest: &Manifest<'_>) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    write_file(&manifest_path(table), text.as_bytes())
}

/// Write `rows` as CSV at `path` plus its manifest. Nothing is written for
/// an empty record set.
pub fn emit_results(rows: &[ResultRow], path: &Path, manifest: &Manifest<'_>) -> CliResult<()> {
    let csv = render_results(rows, manifest.seed.unwrap_or(0))?;
    write_file(path, csv.as_bytes())?;
    write_manifest(path, manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"x\""), "\"say \"\"x\"\"\"");
    }

    #[test]
    fn manifest_sits_next_to_table() {
        assert_eq!(manifest_path(Path::new("out/run.csv")), Path::new("out/run.manifest.json"));
    }

    #[test]
    fn binary_truncation_reports_offset() {
        let mut bytes = MAGIC.to_vec();
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&[0u8; 8 * 5]);
        let err = parse_binary(&bytes).unwrap_err().to_string();
        assert!(err.contains("offset 44"), "{err}");
    }
}
