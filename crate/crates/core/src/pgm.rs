//! Portable graymap (P2 / P5) reading and writing.
//!
//! Intensities are scaled to `[0, 1]` on read. On write they are scaled by
//! `maxval`, clamped, and rounded half-to-even. 16-bit P5 samples are
//! big-endian.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgmEncoding {
    /// `P2`
    Ascii,
    /// `P5`
    Binary,
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<ImageGrid> {
    decode_pgm(&fs::read(path)?)
}

/// Writes a binary 8-bit PGM.
pub fn write_pgm(grid: &ImageGrid, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_pgm(grid, 255, PgmEncoding::Binary)?)?;
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.data.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.data.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.data.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(match self.data.get(start) {
                None => Error::format(start, format!("unexpected end of file, expected {what}")),
                Some(_) => Error::format(start, format!("expected {what}")),
            });
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(start, format!("{what} out of range")))
    }
}

pub fn decode_pgm(data: &[u8]) -> Result<ImageGrid> {
    let encoding = match data.get(..2) {
        Some(b"P2") => PgmEncoding::Ascii,
        Some(b"P5") => PgmEncoding::Binary,
        _ => return Err(Error::format(0, "bad magic number, expected P2 or P5")),
    };
    let mut cur = Cursor { data, pos: 2 };
    if !cur.data.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(Error::format(2, "expected whitespace after magic number"));
    }
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::format(maxval_at, format!("empty image {width}x{height}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::format(maxval_at, format!("maxval {maxval} outside 1..=65535")));
    }
    let scale = f64::from(maxval);
    let count = width * height;
    let mut values = Vec::with_capacity(count);

    match encoding {
        PgmEncoding::Ascii => {
            for _ in 0..count {
                let at = cur.pos;
                let v = cur.number("sample")?;
                if v > maxval {
                    return Err(Error::format(at, format!("sample {v} exceeds maxval {maxval}")));
                }
                values.push(f64::from(v) / scale);
            }
        }
        PgmEncoding::Binary => {
            // exactly one whitespace byte separates the header from the raster
            if !cur.data.get(cur.pos).is_some_and(u8::is_ascii_whitespace) {
                return Err(Error::format(cur.pos, "expected whitespace before raster"));
            }
            let start = cur.pos + 1;
            let bytes_per = if maxval > 255 { 2 } else { 1 };
            let needed = count * bytes_per;
            let raster = &data[start.min(data.len())..];
            if raster.len() < needed {
                return Err(Error::format(
                    start + raster.len(),
                    format!("truncated raster: need {needed} bytes, have {}", raster.len()),
                ));
            }
            for (k, chunk) in raster[..needed].chunks_exact(bytes_per).enumerate() {
                let v = match *chunk {
                    [b] => u32::from(b),
                    [hi, lo] => u32::from(u16::from_be_bytes([hi, lo])),
                    _ => unreachable!(),
                };
                if v > maxval {
                    return Err(Error::format(start + k * bytes_per, format!("sample {v} exceeds maxval {maxval}")));
                }
                values.push(f64::from(v) / scale);
            }
        }
    }
    ImageGrid::from_row_major(height, width, &values)
}

fn quantize(x: f64, maxval: u32) -> u32 {
    let m = f64::from(maxval);
    (x * m).clamp(0.0, m).round_ties_even() as u32
}

/// Encode with header `P5\n<W> <H>\n<maxval>\n` (or `P2`).
///
/// The ASCII raster writes one image row per line.
pub fn encode_pgm(grid: &ImageGrid, maxval: u32, encoding: PgmEncoding) -> Result<Vec<u8>> {
    if maxval == 0 || maxval > 65535 {
        return Err(Error::param(format!("maxval {maxval} outside 1..=65535")));
    }
    let magic = match encoding {
        PgmEncoding::Ascii => "P2",
        PgmEncoding::Binary => "P5",
    };
    let mut out = format!("{magic}\n{} {}\n{maxval}\n", grid.cols(), grid.rows()).into_bytes();
    match encoding {
        PgmEncoding::Binary => {
            for i in 0..grid.rows() {
                for j in 0..grid.cols() {
                    let v = quantize(grid.get(i, j), maxval);
                    if maxval > 255 {
                        out.extend_from_slice(&(v as u16).to_be_bytes());
                    } else {
                        out.push(v as u8);
                    }
                }
            }
        }
        PgmEncoding::Ascii => {
            for i in 0..grid.rows() {
                let line: Vec<String> =
                    (0..grid.cols()).map(|j| quantize(grid.get(i, j), maxval).to_string()).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
        }
    }
    Ok(out)
}
