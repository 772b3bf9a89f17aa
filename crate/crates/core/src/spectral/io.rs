//! Flat little-endian container for fields and trajectories.
//!
//! Layout (all integers little-endian):
//!
//! | offset | size | content                                            |
//! |--------|------|----------------------------------------------------|
//! | 0      | 8    | magic `HNLSFLD1`                                   |
//! | 8      | 4    | format version (u32, currently 1)                  |
//! | 12     | 1    | dimension d                                        |
//! | 13     | 1    | representation (0 position, 1 frequency)          |
//! | 14     | 1    | precision (0 complex64, 1 complex128)              |
//! | 15     | 1    | flags (bit 0: kernel exponent present,             |
//! |        |      | bit 1: records are interaction-picture profiles)   |
//! | 16     | 4    | points per axis n (u32)                            |
//! | 20     | 4    | record count (u32)                                 |
//! | 24     | 8    | half-width L (f64)                                 |
//! | 32     | 8    | kernel exponent gamma (f64, NaN when absent)       |
//! | 40     | ...  | records: time (f64) then n^d (re, im) pairs        |

use std::io::{Read, Write};

use num_complex::Complex64;

use super::field::{ComplexField, Representation};
use super::grid::Grid;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"HNLSFLD1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Complex64,
    Complex128,
}

/// Decoded container: grid, optional kernel exponent and timed records.
#[derive(Debug, Clone)]
pub struct Container {
    pub grid: Grid,
    pub gamma: Option<f64>,
    pub interaction: bool,
    pub records: Vec<(f64, ComplexField)>,
}

pub fn write_records<W: Write>(
    mut w: W,
    records: &[(f64, &ComplexField)],
    gamma: Option<f64>,
    interaction: bool,
    precision: Precision,
) -> Result<()> {
    let first = records
        .first()
        .ok_or_else(|| Error::Container("no records to write".into()))?
        .1;
    let grid = first.grid();
    let repr = first.representation();
    for (_, f) in records {
        first.check_same_grid(f)?;
        if f.representation() != repr {
            return Err(Error::Container("records mix representations".into()));
        }
    }
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(MAGIC);
    header.extend_from_slice(&VERSION.to_le_bytes());
    header.push(grid.dim() as u8);
    header.push(match repr {
        Representation::Position => 0,
        Representation::Frequency => 1,
    });
    header.push(match precision {
        Precision::Complex64 => 0,
        Precision::Complex128 => 1,
    });
    header.push(gamma.is_some() as u8 | (interaction as u8) << 1);
    header.extend_from_slice(&(grid.n() as u32).to_le_bytes());
    header.extend_from_slice(&(records.len() as u32).to_le_bytes());
    header.extend_from_slice(&grid.half_width().to_le_bytes());
    header.extend_from_slice(&gamma.unwrap_or(f64::NAN).to_le_bytes());
    w.write_all(&header)?;
    let mut buf = Vec::new();
    for (t, f) in records {
        buf.clear();
        buf.extend_from_slice(&t.to_le_bytes());
        for z in f.values() {
            match precision {
                Precision::Complex64 => {
                    buf.extend_from_slice(&(z.re as f32).to_le_bytes());
                    buf.extend_from_slice(&(z.im as f32).to_le_bytes());
                }
                Precision::Complex128 => {
                    buf.extend_from_slice(&z.re.to_le_bytes());
                    buf.extend_from_slice(&z.im.to_le_bytes());
                }
            }
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

/// Writes a single field as a one-record container at time 0.
pub fn write_field<W: Write>(w: W, field: &ComplexField, gamma: Option<f64>, precision: Precision) -> Result<()> {
    write_records(w, &[(0.0, field)], gamma, false, precision)
}

pub fn read_container<R: Read>(mut r: R) -> Result<Container> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)?;
    if &header[0..8] != MAGIC {
        return Err(Error::Container("bad magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(header[o..o + 8].try_into().unwrap());
    let version = u32_at(8);
    if version != VERSION {
        return Err(Error::Container(format!("unsupported version {version}")));
    }
    let dim = header[12] as usize;
    let repr = match header[13] {
        0 => Representation::Position,
        1 => Representation::Frequency,
        b => return Err(Error::Container(format!("unknown representation tag {b}"))),
    };
    let precision = match header[14] {
        0 => Precision::Complex64,
        1 => Precision::Complex128,
        b => return Err(Error::Container(format!("unknown precision tag {b}"))),
    };
    let has_gamma = header[15] & 1 == 1;
    let interaction = header[15] & 2 == 2;
    let n = u32_at(16) as usize;
    let count = u32_at(20) as usize;
    let grid = Grid::new(dim, n, f64_at(24))?;
    let gamma = has_gamma.then(|| f64_at(32));
    let width = match precision {
        Precision::Complex64 => 8,
        Precision::Complex128 => 16,
    };
    let mut payload = vec![0u8; 8 + grid.len() * width];
    let mut records = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut payload)?;
        let t = f64::from_le_bytes(payload[0..8].try_into().unwrap());
        let values = payload[8..]
            .chunks_exact(width)
            .map(|c| match precision {
                Precision::Complex64 => Complex64::new(
                    f32::from_le_bytes(c[0..4].try_into().unwrap()) as f64,
                    f32::from_le_bytes(c[4..8].try_into().unwrap()) as f64,
                ),
                Precision::Complex128 => Complex64::new(
                    f64::from_le_bytes(c[0..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..16].try_into().unwrap()),
                ),
            })
            .collect();
        records.push((t, ComplexField::from_values(&grid, values, repr)?));
    }
    Ok(Container {
        grid,
        gamma,
        interaction,
        records,
    })
}

/// Reads the first record of a container.
pub fn read_field<R: Read>(r: R) -> Result<(ComplexField, Option<f64>)> {
    let c = read_container(r)?;
    let gamma = c.gamma;
    let field = c
        .records
        .into_iter()
        .next()
        .ok_or_else(|| Error::Container("container holds no records".into()))?
        .1;
    Ok((field, gamma))
}

pub fn save_field(path: &std::path::Path, field: &ComplexField, gamma: Option<f64>) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_field(file, field, gamma, Precision::Complex128)
}

pub fn load_field(path: &std::path::Path) -> Result<(ComplexField, Option<f64>)> {
    read_field(std::io::BufReader::new(std::fs::File::open(path)?))
}
