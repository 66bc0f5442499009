//! Output files: JSON and CSV with 17 significant digits and a metadata
//! header naming the tool version, seed and config hash.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use cfdist_core::{FunctionalCurve, UniformBand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliResult;

pub const TOOL: &str = "cfdist";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub config_sha256: String,
}

impl Metadata {
    pub fn new(config_bytes: &[u8], seed: Option<u64>) -> Self {
        let digest = Sha256::digest(config_bytes);
        let config_sha256 = digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        });
        Self { tool: TOOL, version: VERSION, seed, config_sha256 }
    }

    fn csv_header(&self) -> String {
        let seed = self.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        format!(
            "# tool: {}\n# version: {}\n# seed: {}\n# config_sha256: {}\n",
            self.tool, self.version, seed, self.config_sha256
        )
    }
}

/// A float with 17 significant digits, or `NaN`/`inf` spelled out.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

struct SeventeenDigits;

impl serde_json::ser::Formatter for SeventeenDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_float(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    metadata: &'a Metadata,
    #[serde(flatten)]
    body: &'a T,
}

/// `{"metadata": ..., <fields of body>}` with 17-digit floats.
pub fn to_json<T: Serialize>(metadata: &Metadata, body: &T) -> CliResult<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SeventeenDigits);
    Document { metadata, body }
        .serialize(&mut ser)
        .map_err(|e| crate::error::CliError::Numerical(format!("serialization failed: {e}")))?;
    out.push(b'\n');
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, metadata: &Metadata, body: &T) -> CliResult<()> {
    std::fs::write(path, to_json(metadata, body)?)?;
    Ok(())
}

/// One block of rows in a curves file.
pub struct CurveRows<'a> {
    pub label: String,
    pub curve: &'a FunctionalCurve,
    pub band: Option<&'a UniformBand>,
}

pub const CURVE_COLUMNS: &str = "functional,grid,estimate,lower,upper,se";

/// Curves CSV; band columns are empty when no band was computed.
pub fn curves_csv(metadata: &Metadata, blocks: &[CurveRows<'_>]) -> Vec<u8> {
    let mut out = metadata.csv_header();
    out.push_str(CURVE_COLUMNS);
    out.push('\n');
    for block in blocks {
        for t in 0..block.curve.len() {
            let band = block.band.map(|b| (b.lower.values[t], b.upper.values[t], b.pointwise_se.values[t]));
            let (lower, upper, se) = match band {
                Some((l, u, s)) => (format_float(l), format_float(u), format_float(s)),
                None => (String::new(), String::new(), String::new()),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                block.label,
                format_float(block.curve.index_grid[t]),
                format_float(block.curve.values[t]),
                lower,
                upper,
                se
            );
        }
    }
    out.into_bytes()
}

/// Long-format bootstrap draws: replication,functional,grid,value.
pub fn draws_csv(metadata: &Metadata, labels: &[(String, &FunctionalCurve)], replications: &[usize], rows: &[Vec<f64>]) -> Vec<u8> {
    let mut out = metadata.csv_header();
    out.push_str("replication,functional,grid,value\n");
    for (b, row) in replications.iter().zip(rows) {
        let mut offset = 0;
        for (label, curve) in labels {
            for t in 0..curve.len() {
                let _ = writeln!(
                    out,
                    "{b},{label},{},{}",
                    format_float(curve.index_grid[t]),
                    format_float(row[offset + t])
                );
            }
            offset += curve.len();
        }
    }
    out.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_significant_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(-2.0), "-2.0000000000000000e0");
        for v in [0.1, 1.0 / 3.0, 12345.678, -1e-300, 6.02e23] {
            assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn json_carries_metadata_and_formats_floats() {
        let meta = Metadata::new(b"{}", Some(3));
        let bytes = to_json(&meta, &serde_json::json!({"x": 0.5, "n": 2})).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.starts_with("{\"metadata\":{\"tool\":\"cfdist\""), "{text}");
        assert!(text.contains("\"x\":5.0000000000000000e-1"), "{text}");
        assert!(text.contains("\"n\":2"), "{text}");
        assert!(text.contains("44136fa355b3678a1146ad16f7e8649e94fb4fc21fe77e8310c060f61caaff8a"));
    }

    #[test]
    fn csv_has_header_block_and_columns() {
        let meta = Metadata::new(b"", None);
        let curve = FunctionalCurve::new("q", vec![0.5], vec![1.0]).unwrap();
        let text = String::from_utf8(curves_csv(&meta, &[CurveRows { label: "q".into(), curve: &curve, band: None }])).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[2], "# seed: none");
        assert_eq!(lines[4], CURVE_COLUMNS);
        assert_eq!(lines[5], "q,5.0000000000000000e-1,1.0000000000000000e0,,,");
    }
}
