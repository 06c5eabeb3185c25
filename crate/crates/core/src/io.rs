//! Matrix and hyperspectral-cube persistence, preprocessing and
//! abundance-map rendering.
//!
//! Binary matrix layout (`SSNMF1`), all integers and floats little-endian:
//!
//! | offset | size      | content                          |
//! |--------|-----------|----------------------------------|
//! | 0      | 6         | magic `SSNMF1`                   |
//! | 6      | 4         | rows, `u32`                      |
//! | 10     | 4         | cols, `u32`                      |
//! | 14     | 8·rows·cols | `f64` values, column-major     |

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DataMatrix;

pub const MAGIC: &[u8; 6] = b"SSNMF1";
const HEADER_LEN: usize = 14;

/// Serializes `x` in the binary matrix format.
pub fn encode_matrix(x: &DataMatrix) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * x.as_slice().len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(x.rows() as u32).to_le_bytes());
    buf.extend_from_slice(&(x.cols() as u32).to_le_bytes());
    for v in x.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

fn format_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        offset: offset as u64,
        message: message.into(),
    }
}

/// Parses the binary matrix format.
pub fn decode_matrix(bytes: &[u8]) -> Result<DataMatrix> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(format_err(0, "bad magic, expected SSNMF1"));
    }
    let read_u32 = |at: usize, what: &str| -> Result<usize> {
        bytes
            .get(at..at + 4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()) as usize)
            .ok_or_else(|| format_err(bytes.len(), format!("truncated header: missing {what}")))
    };
    let rows = read_u32(6, "row count")?;
    let cols = read_u32(10, "column count")?;
    if rows == 0 {
        return Err(format_err(6, "row count is zero"));
    }
    if cols == 0 {
        return Err(format_err(10, "column count is zero"));
    }
    let expected = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(8))
        .and_then(|c| c.checked_add(HEADER_LEN))
        .ok_or_else(|| format_err(6, "dimensions overflow"))?;
    if bytes.len() < expected {
        return Err(format_err(
            bytes.len(),
            format!("truncated payload: expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    if bytes.len() > expected {
        return Err(format_err(
            expected,
            format!("{} trailing bytes after payload", bytes.len() - expected),
        ));
    }
    let mut values = Vec::with_capacity(rows * cols);
    for (idx, chunk) in bytes[HEADER_LEN..].chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(format_err(HEADER_LEN + 8 * idx, "non-finite value"));
        }
        values.push(v);
    }
    DataMatrix::new(rows, cols, values)
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DataMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_matrix(&bytes)
}

pub fn write_matrix(path: impl AsRef<Path>, x: &DataMatrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_matrix(x)).map_err(|e| Error::io(path, e))
}

/// Parses comma-separated numeric text; line `i`, field `j` becomes entry `(i, j)`.
pub fn parse_csv(text: &str) -> Result<DataMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| {
                let cell = cell.trim();
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        line: lineno + 1,
                        message: format!("'{cell}' is not a finite number"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("expected {} fields, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no data".into(),
        });
    }
    DataMatrix::from_rows(&rows)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<DataMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text)
}

pub fn write_csv(path: impl AsRef<Path>, x: &DataMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for i in 0..x.rows() {
        let row: Vec<String> = x.row(i).iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a matrix, choosing the parser from the extension (`.csv` → CSV,
/// anything else → binary).
pub fn read_any(path: impl AsRef<Path>) -> Result<DataMatrix> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => read_csv(path),
        _ => read_matrix(path),
    }
}

/// Image geometry stored next to a cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sidecar {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
}

pub fn read_sidecar(path: impl AsRef<Path>) -> Result<Sidecar> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })
}

/// Hyperspectral image: pixel `(x, y)` (0-based) is column `y * width + x`.
#[derive(Debug, Clone, PartialEq)]
pub struct HsiCube {
    width: usize,
    height: usize,
    data: DataMatrix,
}

impl HsiCube {
    pub fn new(data: DataMatrix, width: usize, height: usize) -> Result<Self> {
        if width.checked_mul(height) != Some(data.cols()) {
            return Err(Error::Dimension(format!(
                "{width}x{height} image needs {} pixels, matrix has {}",
                width.saturating_mul(height),
                data.cols()
            )));
        }
        Ok(HsiCube {
            width,
            height,
            data,
        })
    }

    /// Checks the sidecar's band count against the matrix as well.
    pub fn with_sidecar(data: DataMatrix, sidecar: &Sidecar) -> Result<Self> {
        if sidecar.bands != data.rows() {
            return Err(Error::Dimension(format!(
                "sidecar declares {} bands, matrix has {} rows",
                sidecar.bands,
                data.rows()
            )));
        }
        Self::new(data, sidecar.width, sidecar.height)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bands(&self) -> usize {
        self.data.rows()
    }

    pub fn pixel_index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn data(&self) -> &DataMatrix {
        &self.data
    }

    pub fn into_data(self) -> DataMatrix {
        self.data
    }
}

/// Zeroes every pixel that is among the `k` largest values of at least one
/// band. Returns the cleaned cube and the zeroed pixel indices, ascending.
pub fn clip_extremes(cube: &HsiCube, k: usize) -> Result<(HsiCube, Vec<usize>)> {
    let data = cube.data();
    let n = data.cols();
    if k == 0 || k > n {
        return Err(Error::Parameter(format!("k = {k} must lie in [1, {n}]")));
    }
    let mut flagged = vec![false; n];
    let mut order: Vec<usize> = (0..n).collect();
    for i in 0..data.rows() {
        let band = data.row(i);
        order.select_nth_unstable_by(k - 1, |&a, &b| {
            band[b].total_cmp(&band[a]).then(a.cmp(&b))
        });
        for &j in &order[..k] {
            flagged[j] = true;
        }
    }
    let removed: Vec<usize> = (0..n).filter(|&j| flagged[j]).collect();
    let mut out = data.clone();
    for &j in &removed {
        out.col_mut(j).iter_mut().for_each(|v| *v = 0.0);
    }
    Ok((
        HsiCube {
            width: cube.width,
            height: cube.height,
            data: out,
        },
        removed,
    ))
}

/// Grayscale bytes for one abundance row, scaled so the row maximum maps to 255.
pub fn quantize_row(row: &[f64]) -> Vec<u8> {
    let max = row.iter().copied().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return vec![0; row.len()];
    }
    row.iter()
        .map(|&v| (255.0 * v.max(0.0) / max + 0.5).floor().min(255.0) as u8)
        .collect()
}

/// Binary PGM (`P5`, maxval 255).
pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut buf = format!("P5\n{width} {height}\n255\n").into_bytes();
    buf.extend_from_slice(pixels);
    buf
}

/// Writes one PGM per row of `h` as `endmember_01.pgm`, `endmember_02.pgm`, ...
pub fn write_abundance_maps(
    h: &DataMatrix,
    width: usize,
    height: usize,
    dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    if width.checked_mul(height) != Some(h.cols()) {
        return Err(Error::Dimension(format!(
            "{width}x{height} image needs {} pixels, H has {} columns",
            width.saturating_mul(height),
            h.cols()
        )));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::with_capacity(h.rows());
    for k in 0..h.rows() {
        let path = dir.join(format!("endmember_{:02}.pgm", k + 1));
        let bytes = encode_pgm(width, height, &quantize_row(&h.row(k)));
        let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}
