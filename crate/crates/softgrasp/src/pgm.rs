//! Binary PGM (P5) reading and writing for tactile image fixtures and the
//! sensor nodes' replay mode. 8-bit only.

use std::fs;
use std::io::Write;
use std::path::Path;

use softgrasp_core::image::TactileImage;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a binary PGM (P5) file")]
    BadMagic,
    #[error("malformed PGM header")]
    BadHeader,
    #[error("only 8-bit PGM supported (maxval {0})")]
    UnsupportedMaxval(u32),
    #[error("pixel payload truncated: expected {expected}, got {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("invalid image: {0}")]
    Image(String),
}

/// Writes an image as binary PGM, quantizing intensities to 8 bits.
pub fn write_pgm(path: &Path, image: &TactileImage) -> Result<(), PgmError> {
    let mut out = Vec::with_capacity(image.width() * image.height() + 32);
    write!(out, "P5\n{} {}\n255\n", image.width(), image.height())?;
    out.extend_from_slice(&image.to_gray8());
    fs::write(path, out)?;
    Ok(())
}

/// Reads a binary 8-bit PGM. Header whitespace and `#` comments are
/// accepted as produced by common tools.
pub fn read_pgm(path: &Path) -> Result<TactileImage, PgmError> {
    let data = fs::read(path)?;
    parse_pgm(&data)
}

pub fn parse_pgm(data: &[u8]) -> Result<TactileImage, PgmError> {
    if data.len() < 2 || &data[0..2] != b"P5" {
        return Err(PgmError::BadMagic);
    }
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in &mut fields {
        *field = next_header_value(data, &mut pos)?;
    }
    let (width, height, maxval) = (fields[0] as usize, fields[1] as usize, fields[2]);
    if maxval != 255 {
        return Err(PgmError::UnsupportedMaxval(maxval));
    }
    // Exactly one whitespace byte separates the header from the payload.
    pos += 1;
    let expected = width * height;
    let payload = data.get(pos..pos + expected).ok_or(PgmError::Truncated {
        expected,
        actual: data.len().saturating_sub(pos),
    })?;
    TactileImage::from_gray8(width, height, payload).map_err(|e| PgmError::Image(e.to_string()))
}

fn next_header_value(data: &[u8], pos: &mut usize) -> Result<u32, PgmError> {
    // Skip whitespace and comment lines.
    loop {
        match data.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while let Some(&b) = data.get(*pos) {
                    *pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            Some(_) => break,
            None => return Err(PgmError::BadHeader),
        }
    }
    let start = *pos;
    while let Some(b) = data.get(*pos) {
        if b.is_ascii_digit() {
            *pos += 1;
        } else {
            break;
        }
    }
    if start == *pos {
        return Err(PgmError::BadHeader);
    }
    std::str::from_utf8(&data[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or(PgmError::BadHeader)
}

/// Loads every `*.pgm` in a directory, sorted by file name: the frame order
/// of a replay sequence.
pub fn read_pgm_dir(dir: &Path) -> Result<Vec<TactileImage>, PgmError> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_pgm(p)).collect()
}
