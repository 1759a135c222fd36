//! Matrix files, grayscale frame sequences and bench suite configuration.
//!
//! The binary matrix format is the 4 bytes `SPCP`, then `rows` and `cols` as
//! little-endian `u32`, then `rows * cols` little-endian `f64` values in
//! column-major order. CSV files hold one matrix row per line with values
//! written to 17 significant digits.

pub mod config;
pub mod frames;

use std::fs;
use std::path::{Path, PathBuf};

use crate::model::Matrix;

pub use config::{parse_config, suite_from_config, Config, Section, SuiteSpec};
pub use frames::{
    add_video_noise, frames_to_matrix, video_varrho, matrix_to_frames, read_frame_dir, read_pgm, synthetic_video, write_frame_dir,
    write_pgm, Frame, FrameSequence,
};

pub const BIN_MAGIC: &[u8; 4] = b"SPCP";

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("bad magic: expected SPCP header")]
    BadMagic,
    #[error("truncated file: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: usize, found: usize },
    #[error("non-numeric cell {text:?} at line {line}, column {col}")]
    NonNumericCell { line: usize, col: usize, text: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("frame {index} is {found_h}x{found_w}, expected {h}x{w}")]
    InconsistentFrameSize { index: usize, h: usize, w: usize, found_h: usize, found_w: usize },
    #[error("bad PGM: {0}")]
    BadPgm(String),
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl IoError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Bin,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatrixFile {
    pub format: MatrixFormat,
    pub path: PathBuf,
}

impl MatrixFile {
    pub fn new(format: MatrixFormat, path: impl Into<PathBuf>) -> Self {
        Self { format, path: path.into() }
    }

    /// `.csv` files are CSV, everything else is binary.
    pub fn from_path(path: impl Into<PathBuf>) -> Self {
        let path = path.into();
        let csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        Self { format: if csv { MatrixFormat::Csv } else { MatrixFormat::Bin }, path }
    }
}

pub fn encode_bin(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * m.len());
    out.extend_from_slice(BIN_MAGIC);
    out.extend_from_slice(&(m.nrows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u32).to_le_bytes());
    for v in m.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_bin(bytes: &[u8]) -> Result<Matrix, IoError> {
    if bytes.len() < 4 {
        return Err(IoError::TruncatedFile { expected: 12, found: bytes.len() });
    }
    if &bytes[..4] != BIN_MAGIC {
        return Err(IoError::BadMagic);
    }
    if bytes.len() < 12 {
        return Err(IoError::TruncatedFile { expected: 12, found: bytes.len() });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
    let (rows, cols) = (word(4), word(8));
    let expected = 12 + 8 * rows * cols;
    if bytes.len() < expected {
        return Err(IoError::TruncatedFile { expected, found: bytes.len() });
    }
    if bytes.len() > expected {
        return Err(IoError::DimensionMismatch(format!(
            "{rows}x{cols} header but {} trailing bytes",
            bytes.len() - expected
        )));
    }
    let vals = bytes[12..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    Ok(Matrix::from_iterator(rows, cols, vals))
}

pub fn format_csv(m: &Matrix) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|v| format!("{v:.16e}")))
            .expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("ascii output")
}

pub fn parse_csv(text: &str) -> Result<Matrix, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { pos, expected_len, len } => IoError::DimensionMismatch(format!(
                "line {} has {len} cells, expected {expected_len}",
                pos.as_ref().map_or(0, |p| p.line())
            )),
            _ => IoError::DimensionMismatch(e.to_string()),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, t)| {
                t.parse::<f64>()
                    .map_err(|_| IoError::NonNumericCell { line, col: c + 1, text: t.to_string() })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn read_matrix(f: &MatrixFile) -> Result<Matrix, IoError> {
    match f.format {
        MatrixFormat::Bin => decode_bin(&fs::read(&f.path).map_err(|e| IoError::io(&f.path, e))?),
        MatrixFormat::Csv => parse_csv(&fs::read_to_string(&f.path).map_err(|e| IoError::io(&f.path, e))?),
    }
}

pub fn write_matrix(m: &Matrix, f: &MatrixFile) -> Result<(), IoError> {
    let bytes = match f.format {
        MatrixFormat::Bin => encode_bin(m),
        MatrixFormat::Csv => format_csv(m).into_bytes(),
    };
    fs::write(&f.path, bytes).map_err(|e| IoError::io(&f.path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_bin_layout() {
        let m = Matrix::identity(2, 2);
        let b = encode_bin(&m);
        assert_eq!(b.len(), 4 + 4 + 4 + 32);
        assert_eq!(&b[..4], b"SPCP");
        assert_eq!(&b[4..12], &[2, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&b[12..20], &1.0f64.to_le_bytes());
        assert_eq!(decode_bin(&b).unwrap(), m);
    }

    #[test]
    fn bin_is_column_major() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = encode_bin(&m);
        assert_eq!(&b[20..28], &3.0f64.to_le_bytes());
    }

    #[test]
    fn bin_errors() {
        let b = encode_bin(&Matrix::identity(2, 3));
        assert!(matches!(decode_bin(b"XPCP\0\0\0\0\0\0\0\0"), Err(IoError::BadMagic)));
        assert!(matches!(decode_bin(&b[..20]), Err(IoError::TruncatedFile { expected: 60, found: 20 })));
        assert!(matches!(decode_bin(&b[..6]), Err(IoError::TruncatedFile { .. })));
        let mut long = b.clone();
        long.push(0);
        assert!(matches!(decode_bin(&long), Err(IoError::DimensionMismatch(_))));
    }

    #[test]
    fn csv_example() {
        let m = parse_csv("1.5,2\n3,4").unwrap();
        assert_eq!(m, Matrix::from_row_slice(2, 2, &[1.5, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(parse_csv("1,2\n3,x"), Err(IoError::NonNumericCell { line: 2, col: 2, .. })));
        assert!(matches!(parse_csv("1,2\n3"), Err(IoError::DimensionMismatch(_))));
    }

    #[test]
    fn csv_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = Matrix::from_fn(25, 40, |_, _| rng.random_range(-1e3..1e3) * 10f64.powi(rng.random_range(-8..8)));
        let back = parse_csv(&format_csv(&m)).unwrap();
        let maxabs = m.amax();
        assert!((back - &m).amax() <= 1e-15 * maxabs);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = Matrix::from_fn(3, 5, |i, j| (i as f64 + 0.1) / (j as f64 + 0.7));
        for name in ["a.bin", "a.csv"] {
            let f = MatrixFile::from_path(dir.path().join(name));
            write_matrix(&m, &f).unwrap();
            let back = read_matrix(&f).unwrap();
            if f.format == MatrixFormat::Bin {
                assert_eq!(back, m);
            } else {
                assert!((back - &m).amax() <= 1e-15 * m.amax());
            }
        }
        let missing = MatrixFile::from_path(dir.path().join("nope.bin"));
        assert!(matches!(read_matrix(&missing), Err(IoError::Io { .. })));
    }
}
