//! Grayscale frames, binary PGM (P5) files and the video data matrix.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::IoError;
use crate::model::Matrix;

/// One `h x w` grayscale image, samples stored row by row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub h: usize,
    pub w: usize,
    pub data: Vec<u8>,
}

impl Frame {
    pub fn new(h: usize, w: usize, data: Vec<u8>) -> Result<Self, IoError> {
        if data.len() != h * w {
            return Err(IoError::DimensionMismatch(format!("{h}x{w} frame with {} samples", data.len())));
        }
        Ok(Self { h, w, data })
    }

    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.data[r * self.w + c]
    }
}

/// Nonempty list of frames sharing one size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSequence {
    frames: Vec<Frame>,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>) -> Result<Self, IoError> {
        let first = frames
            .first()
            .ok_or_else(|| IoError::DimensionMismatch("frame sequence is empty".into()))?;
        let (h, w) = (first.h, first.w);
        if let Some((index, f)) = frames.iter().enumerate().find(|(_, f)| f.h != h || f.w != w) {
            return Err(IoError::InconsistentFrameSize { index, h, w, found_h: f.h, found_w: f.w });
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn frame_shape(&self) -> (usize, usize) {
        (self.frames[0].h, self.frames[0].w)
    }
}

/// `(h*w) x T` matrix whose column `i` stacks the columns of frame `i`.
pub fn frames_to_matrix(fs: &FrameSequence) -> Matrix {
    let (h, w) = fs.frame_shape();
    let mut d = Matrix::zeros(h * w, fs.len());
    for (t, f) in fs.frames().iter().enumerate() {
        for c in 0..w {
            for r in 0..h {
                d[(c * h + r, t)] = f64::from(f.get(r, c));
            }
        }
    }
    d
}

/// Inverse of [`frames_to_matrix`]; values are clamped to `[0, 255]` and rounded.
pub fn matrix_to_frames(m: &Matrix, h: usize, w: usize) -> Result<FrameSequence, IoError> {
    if m.nrows() != h * w || m.ncols() == 0 {
        return Err(IoError::DimensionMismatch(format!(
            "{}x{} matrix cannot hold {h}x{w} frames",
            m.nrows(),
            m.ncols()
        )));
    }
    let frames = (0..m.ncols())
        .map(|t| {
            let mut data = vec![0u8; h * w];
            for c in 0..w {
                for r in 0..h {
                    let v = m[(c * h + r, t)];
                    data[r * w + c] = if v.is_nan() { 0 } else { v.clamp(0.0, 255.0).round() as u8 };
                }
            }
            Frame { h, w, data }
        })
        .collect();
    FrameSequence::new(frames)
}

/// `frobenius / (sqrt(entries) 10^(snr/20))`.
pub fn video_varrho(frobenius: f64, entries: usize, snr_db: f64) -> f64 {
    frobenius / ((entries as f64).sqrt() * 10f64.powf(snr_db / 20.0))
}

/// Adds `varrho * N(0,1)` noise with `varrho = ||D||_F / (sqrt(m n) 10^(snr/20))`.
pub fn add_video_noise(d: &Matrix, snr_db: f64, seed: u64) -> (Matrix, f64) {
    let varrho = video_varrho(d.norm(), d.len(), snr_db);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = d.clone();
    for v in out.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v += varrho * z;
    }
    (out, varrho)
}

fn pgm_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8], IoError> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(IoError::BadPgm("header ends early".into()));
    }
    Ok(&bytes[start..*pos])
}

fn pgm_number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<usize, IoError> {
    let tok = pgm_token(bytes, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| IoError::BadPgm(format!("bad {what}")))
}

/// Parses a binary PGM with maxval at most 255.
pub fn decode_pgm(bytes: &[u8]) -> Result<Frame, IoError> {
    let mut pos = 0;
    if pgm_token(bytes, &mut pos)? != b"P5" {
        return Err(IoError::BadPgm("not a P5 file".into()));
    }
    let w = pgm_number(bytes, &mut pos, "width")?;
    let h = pgm_number(bytes, &mut pos, "height")?;
    let maxval = pgm_number(bytes, &mut pos, "maxval")?;
    if !(1..=255).contains(&maxval) {
        return Err(IoError::BadPgm(format!("maxval {maxval} unsupported")));
    }
    pos += 1;
    let need = h * w;
    let body = bytes.get(pos..).unwrap_or_default();
    if body.len() < need {
        return Err(IoError::TruncatedFile { expected: pos + need, found: bytes.len() });
    }
    Frame::new(h, w, body[..need].to_vec())
}

pub fn encode_pgm(f: &Frame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", f.w, f.h).into_bytes();
    out.extend_from_slice(&f.data);
    out
}

pub fn read_pgm(path: &Path) -> Result<Frame, IoError> {
    decode_pgm(&fs::read(path).map_err(|e| IoError::io(path, e))?)
}

pub fn write_pgm(path: &Path, f: &Frame) -> Result<(), IoError> {
    fs::write(path, encode_pgm(f)).map_err(|e| IoError::io(path, e))
}

/// Reads every `*.pgm` file of a directory in file-name order.
pub fn read_frame_dir(dir: &Path) -> Result<FrameSequence, IoError> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| IoError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")))
        .collect();
    paths.sort();
    let frames = paths.iter().map(|p| read_pgm(p)).collect::<Result<Vec<_>, _>>()?;
    FrameSequence::new(frames)
}

/// Writes `frame_0000.pgm`, `frame_0001.pgm`, ... creating the directory.
pub fn write_frame_dir(dir: &Path, fs_: &FrameSequence) -> Result<(), IoError> {
    fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    for (i, f) in fs_.frames().iter().enumerate() {
        write_pgm(&dir.join(format!("frame_{i:04}.pgm")), f)?;
    }
    Ok(())
}

/// Static shaded background with a bright square moving diagonally.
pub fn synthetic_video(h: usize, w: usize, count: usize, square: usize) -> FrameSequence {
    let bg = |r: usize, c: usize| {
        let x = c as f64 / w.max(1) as f64;
        let y = r as f64 / h.max(1) as f64;
        (40.0 + 120.0 * y + 50.0 * (6.0 * x).sin().abs()).round() as u8
    };
    let side = square.min(h).min(w);
    let frames = (0..count)
        .map(|t| {
            let r0 = if h > side { (t * 2) % (h - side + 1) } else { 0 };
            let c0 = if w > side { (t * 3) % (w - side + 1) } else { 0 };
            let mut data = vec![0u8; h * w];
            for r in 0..h {
                for c in 0..w {
                    let inside = (r0..r0 + side).contains(&r) && (c0..c0 + side).contains(&c);
                    data[r * w + c] = if inside { 245 } else { bg(r, c) };
                }
            }
            Frame { h, w, data }
        })
        .collect();
    FrameSequence::new(frames).expect("count > 0")
}
