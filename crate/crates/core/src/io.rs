//! Binary grid files (`DPG1`) and 8-bit PGM/PPM export.
//!
//! Grid file layout: the 4 magic bytes `DPG1`, `u32` LE height, `u32` LE
//! width, then `height * width` `f64` LE values in row-major order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::DenseGrid;

pub const GRID_MAGIC: &[u8; 4] = b"DPG1";
const GRID_HEADER_LEN: usize = 12;

pub fn encode_grid(grid: &DenseGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(GRID_HEADER_LEN + 8 * grid.len());
    out.extend_from_slice(GRID_MAGIC);
    out.extend_from_slice(&(grid.height() as u32).to_le_bytes());
    out.extend_from_slice(&(grid.width() as u32).to_le_bytes());
    for v in grid.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_grid(bytes: &[u8], origin: &Path) -> Result<DenseGrid> {
    let bad = |message: String| Error::GridFile {
        path: origin.to_path_buf(),
        message,
    };
    if bytes.len() < GRID_HEADER_LEN {
        return Err(bad(format!("file too short ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != GRID_MAGIC {
        return Err(bad(format!("bad magic {:?}", &bytes[..4])));
    }
    let height = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let width = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let payload = &bytes[GRID_HEADER_LEN..];
    let expected = height
        .checked_mul(width)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| bad("dimension overflow".into()))?;
    if payload.len() != expected {
        return Err(bad(format!(
            "length mismatch: header {height}x{width} needs {expected} payload bytes, found {}",
            payload.len()
        )));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DenseGrid::from_vec(height, width, values).map_err(|e| bad(e.to_string()))
}

pub fn store_grid(grid: &DenseGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_grid(grid)).map_err(|e| Error::io(path, e))
}

pub fn load_grid(path: impl AsRef<Path>) -> Result<DenseGrid> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_grid(&bytes, path)
}

/// Maps a value in `[0, 1]` (clamped) to a byte, rounding half away from zero.
fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Converts a grid to 8-bit gray levels. With `normalize`, `[min, max]` is
/// stretched to `[0, 255]` (all zeros when `min == max`); otherwise values
/// are clamped to `[0, 1]`.
pub fn grid_to_gray(grid: &DenseGrid, normalize: bool) -> Vec<u8> {
    if normalize {
        let (lo, hi) = grid.min_max();
        if hi <= lo {
            return vec![0; grid.len()];
        }
        let span = hi - lo;
        grid.values().iter().map(|&v| to_byte((v - lo) / span)).collect()
    } else {
        grid.values().iter().map(|&v| to_byte(v)).collect()
    }
}

pub fn encode_pgm(grid: &DenseGrid, normalize: bool) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", grid.width(), grid.height()).into_bytes();
    out.extend(grid_to_gray(grid, normalize));
    out
}

pub fn export_pgm(grid: &DenseGrid, path: impl AsRef<Path>, normalize: bool) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(grid, normalize)).map_err(|e| Error::io(path, e))
}

/// Interleaved 8-bit RGB image, written as binary PPM.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn from_gray(grid: &DenseGrid, normalize: bool) -> Self {
        let data = grid_to_gray(grid, normalize)
            .into_iter()
            .flat_map(|g| [g, g, g])
            .collect();
        Self {
            width: grid.width(),
            height: grid.height(),
            data,
        }
    }

    pub fn put(&mut self, x: i64, y: i64, rgb: [u8; 3]) {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return;
        }
        let i = 3 * (y as usize * self.width + x as usize);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Midpoint circle outline.
    pub fn draw_circle(&mut self, cx: i64, cy: i64, radius: i64, rgb: [u8; 3]) {
        if radius <= 0 {
            self.put(cx, cy, rgb);
            return;
        }
        let (mut x, mut y, mut err) = (radius, 0i64, 1 - radius);
        while x >= y {
            for (dx, dy) in [
                (x, y),
                (y, x),
                (-y, x),
                (-x, y),
                (-x, -y),
                (-y, -x),
                (y, -x),
                (x, -y),
            ] {
                self.put(cx + dx, cy + dy, rgb);
            }
            y += 1;
            if err < 0 {
                err += 2 * y + 1;
            } else {
                x -= 1;
                err += 2 * (y - x) + 1;
            }
        }
    }

    pub fn encode_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.encode_ppm()).map_err(|e| Error::io(path, e))
    }
}
