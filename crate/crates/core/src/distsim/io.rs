//! Frame files and CSV data matrices.
//!
//! The text frame format is a header line `m n` followed by `m * n` lines
//! `re im`, column-major, each value written with 17 significant digits so
//! that a write/read cycle is exact. The JSON format carries the same data as
//! `{"m": .., "n": .., "re": [..], "im": [..]}`, also column-major.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{Construction, Frame, FrameKind};
use crate::matrix::ComplexMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameFormat {
    Text,
    Json,
}

impl FrameFormat {
    /// `.json` selects JSON; anything else is the text format.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => FrameFormat::Json,
            _ => FrameFormat::Text,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonFrame {
    m: usize,
    n: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

pub fn write_frame<W: Write>(matrix: &ComplexMatrix, format: FrameFormat, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    let (m, n) = (matrix.rows(), matrix.cols());
    match format {
        FrameFormat::Text => {
            writeln!(out, "{m} {n}")?;
            for z in matrix.as_inner().iter() {
                writeln!(out, "{:.16e} {:.16e}", z.re, z.im)?;
            }
        }
        FrameFormat::Json => {
            let doc = JsonFrame {
                m,
                n,
                re: matrix.as_inner().iter().map(|z| z.re).collect(),
                im: matrix.as_inner().iter().map(|z| z.im).collect(),
            };
            serde_json::to_writer(&mut out, &doc).map_err(|e| format_err(e.to_string()))?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn parse_text<R: BufRead>(input: R) -> Result<DMatrix<Complex64>> {
    let mut lines = input
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()));
    let (_, header) = lines.next().ok_or_else(|| format_err("empty file"))?;
    let header = header?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| format_err(format!("bad header {header:?}, expected `m n`")))?;
    let [m, n] = dims[..] else {
        return Err(format_err(format!("bad header {header:?}, expected `m n`")));
    };
    if m == 0 || n == 0 {
        return Err(format_err(format!("header declares an empty {m}x{n} matrix")));
    }
    let mut data = Vec::with_capacity(m * n);
    for (lineno, line) in lines {
        let line = line?;
        let parts: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| format_err(format!("line {}: cannot parse {line:?}", lineno + 1)))?;
        let [re, im] = parts[..] else {
            return Err(format_err(format!("line {}: expected `re im`", lineno + 1)));
        };
        data.push(Complex64::new(re, im));
    }
    if data.len() != m * n {
        return Err(format_err(format!(
            "header declares {m}x{n} = {} entries but the file has {}",
            m * n,
            data.len()
        )));
    }
    Ok(DMatrix::from_column_slice(m, n, &data))
}

fn parse_json<R: Read>(input: R) -> Result<DMatrix<Complex64>> {
    let doc: JsonFrame = serde_json::from_reader(input).map_err(|e| format_err(e.to_string()))?;
    if doc.m == 0 || doc.n == 0 {
        return Err(format_err("empty matrix"));
    }
    if doc.re.len() != doc.m * doc.n || doc.im.len() != doc.m * doc.n {
        return Err(format_err(format!(
            "{}x{} matrix needs {} entries, got {} real and {} imaginary",
            doc.m,
            doc.n,
            doc.m * doc.n,
            doc.re.len(),
            doc.im.len()
        )));
    }
    let data: Vec<Complex64> = doc.re.iter().zip(&doc.im).map(|(&r, &i)| Complex64::new(r, i)).collect();
    Ok(DMatrix::from_column_slice(doc.m, doc.n, &data))
}

/// Reads a frame, normalizing its columns to unit norm.
pub fn read_frame<R: BufRead>(input: R, format: FrameFormat) -> Result<Frame> {
    let raw = match format {
        FrameFormat::Text => parse_text(input)?,
        FrameFormat::Json => parse_json(input)?,
    };
    let matrix = ComplexMatrix::new(raw).map_err(|e| format_err(e.to_string()))?;
    Frame::from_matrix(matrix, FrameKind::Imported, Construction::External)
        .map_err(|e| format_err(e.to_string()))
}

pub fn import_frame(path: &Path, format: FrameFormat) -> Result<Frame> {
    read_frame(BufReader::new(File::open(path)?), format)
}

pub fn export_frame(frame: &Frame, path: &Path, format: FrameFormat) -> Result<()> {
    write_frame(frame.matrix(), format, File::create(path)?)
}

/// Reads a headerless CSV of reals into a matrix.
pub fn read_csv_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| format_err(e.to_string()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| format_err(e.to_string()))?;
        let row = record
            .iter()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| format_err(format!("row {}: non-numeric field", i + 1)))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(format_err(format!(
                    "row {} has {} fields, expected {}",
                    i + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 {
        return Err(format_err("empty CSV"));
    }
    Ok(DMatrix::from_row_iterator(rows.len(), cols, rows.into_iter().flatten()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{build_frame, uspc_spec};

    #[test]
    fn text_round_trip_is_exact() {
        let f = build_frame(&uspc_spec(9, 4).unwrap()).unwrap();
        for format in [FrameFormat::Text, FrameFormat::Json] {
            let mut buf = Vec::new();
            write_frame(f.matrix(), format, &mut buf).unwrap();
            let back = read_frame(&buf[..], format).unwrap();
            assert!(back.matrix().max_abs_diff(f.matrix()) <= 1e-15);
            assert_eq!(back.kind(), FrameKind::Imported);
        }
    }

    #[test]
    fn header_and_body_layout() {
        let m = ComplexMatrix::from_row_slice(
            1,
            2,
            &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_frame(&m, FrameFormat::Text, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "1 2");
        assert_eq!(lines[1], "1.0000000000000000e0 0.0000000000000000e0");
        assert_eq!(lines[2], "0.0000000000000000e0 1.0000000000000000e0");
    }

    #[test]
    fn format_errors() {
        let cases = [
            "",
            "2\n1 0\n",
            "1 2\n1 0\n",
            "1 2\n1 0\n0 x\n",
            "1 2\n1 0\n0 0\n",
            "1 1\n1 0 3\n",
            "0 1\n",
        ];
        for text in cases {
            let res = read_frame(text.as_bytes(), FrameFormat::Text);
            assert!(matches!(res, Err(Error::Format(_))), "{text:?}: {res:?}");
        }
    }

    #[test]
    fn csv_matrix() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        std::fs::write(&path, "1, 2, 3\n4,5,6\n").unwrap();
        let a = read_csv_matrix(&path).unwrap();
        assert_eq!(a.shape(), (2, 3));
        assert_eq!(a[(1, 0)], 4.0);
        std::fs::write(&path, "1,2\n3\n").unwrap();
        assert!(read_csv_matrix(&path).is_err());
    }
}
