//! Column-oriented CSV output shared by every module.

use crate::error::{Error, Result};
use std::io::Write;

/// Writes equally long columns under a header row.
pub fn write_columns<W: Write>(writer: W, headers: &[&str], columns: &[&[f64]]) -> Result<()> {
    if headers.len() != columns.len() {
        return Err(Error::Config(
            "header count differs from column count".into(),
        ));
    }
    let rows = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != rows) {
        return Err(Error::Config("columns have different lengths".into()));
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(headers).map_err(io_err)?;
    for i in 0..rows {
        w.write_record(columns.iter().map(|c| format_float(c[i])))
            .map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

/// Shortest representation that round-trips.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

fn io_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut buf = Vec::new();
        write_columns(&mut buf, &["a", "b"], &[&[1.0, 0.1], &[-2.5, 1e-300]]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "a,b\n1.0,-2.5\n0.1,1e-300\n");
    }

    #[test]
    fn rejects_ragged() {
        assert!(write_columns(Vec::new(), &["a", "b"], &[&[1.0], &[]]).is_err());
    }
}
