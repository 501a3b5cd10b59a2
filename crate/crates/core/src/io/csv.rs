//! Comma-separated tables with a provenance comment line.

use std::io::Write;

use sha2::{Digest, Sha256};

use crate::error::Result;

/// What the leading `#` line of every emitted table records.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CsvProvenance {
    pub seed: u64,
    /// Hex SHA-256 of the configuration that produced the table.
    pub config_checksum: String,
}

impl CsvProvenance {
    pub fn new(seed: u64, config_bytes: &[u8]) -> Self {
        Self {
            seed,
            config_checksum: sha256_hex(config_bytes),
        }
    }

    pub fn comment(&self) -> String {
        format!(
            "# seed={} config_sha256={} version=bfdn-{}",
            self.seed,
            self.config_checksum,
            env!("CARGO_PKG_VERSION")
        )
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Shortest round-trip decimal; infinities print as `inf` / `-inf`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

pub fn write_table(
    w: &mut impl Write,
    provenance: &CsvProvenance,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    writeln!(w, "{}", provenance.comment())?;
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(header)?;
    for row in rows {
        out.write_record(row)?;
    }
    out.flush()?;
    Ok(())
}

/// Parse a table written by [`write_table`]: comment lines are skipped, the
/// first remaining line is the header.
pub fn read_table(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader.headers()?.iter().map(str::to_string).collect();
    let rows = reader
        .records()
        .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comment_then_header_then_rows() {
        let prov = CsvProvenance::new(3, b"{}");
        let mut out = Vec::new();
        write_table(&mut out, &prov, &["a", "b"], &[vec!["1".into(), fmt_f64(f64::INFINITY)]]).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert!(lines[0].starts_with("# seed=3 config_sha256="));
        assert_eq!(lines[1], "a,b");
        assert_eq!(lines[2], "1,inf");
        let (h, rows) = read_table(&text).unwrap();
        assert_eq!(h, ["a", "b"]);
        assert_eq!(rows, [["1", "inf"]]);
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
