//! Binary snapshot container for [`GaussianState`].
//!
//! All multi-byte fields are little-endian.
//!
//! | offset | size | field |
//! |-------:|-----:|-------|
//! | 0 | 8 | magic `QSOLSNAP` |
//! | 8 | 4 | byte-order mark `0x01020304` (reads back as `04 03 02 01`) |
//! | 12 | 4 | format version, `1` |
//! | 16 | 8 | site count `M` (u64) |
//! | 24 | 1 | domain: `0` position, `1` frequency |
//! | 25 | 7 | zero padding |
//! | 32 | 8 | box length `L` (f64) |
//! | 40 | 8 | propagation time `t` (f64) |
//! | 48 | 16 M | `alpha`, `(re, im)` pairs |
//! | .. | 16 M^2 | `N`, row-major `(re, im)` pairs |
//! | .. | 16 M^2 | `A`, row-major `(re, im)` pairs |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{Domain, Grid};
use crate::state::GaussianState;

pub const MAGIC: &[u8; 8] = b"QSOLSNAP";
pub const BYTE_ORDER_MARK: u32 = 0x0102_0304;
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 48;

fn write_complex<W: Write>(w: &mut W, z: Complex64) -> std::io::Result<()> {
    w.write_f64::<LittleEndian>(z.re)?;
    w.write_f64::<LittleEndian>(z.im)
}

fn read_complex<R: Read>(r: &mut R) -> std::io::Result<Complex64> {
    let re = r.read_f64::<LittleEndian>()?;
    let im = r.read_f64::<LittleEndian>()?;
    Ok(Complex64::new(re, im))
}

pub fn write_snapshot<W: Write>(w: &mut W, s: &GaussianState) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(BYTE_ORDER_MARK)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u64::<LittleEndian>(s.sites() as u64)?;
    w.write_u8(match s.grid.domain() {
        Domain::Position => 0,
        Domain::Frequency => 1,
    })?;
    w.write_all(&[0u8; 7])?;
    w.write_f64::<LittleEndian>(s.grid.period())?;
    w.write_f64::<LittleEndian>(s.t)?;
    for &z in s.alpha.iter().chain(s.normal.iter()).chain(s.anomalous.iter()) {
        write_complex(w, z)?;
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(r: &mut R) -> Result<GaussianState> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let bom = r.read_u32::<LittleEndian>()?;
    if bom != BYTE_ORDER_MARK {
        return Err(Error::Snapshot(format!("unexpected byte-order mark {bom:#010x}")));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let m = usize::try_from(r.read_u64::<LittleEndian>()?)
        .map_err(|_| Error::Snapshot("site count overflows".into()))?;
    let domain = match r.read_u8()? {
        0 => Domain::Position,
        1 => Domain::Frequency,
        d => return Err(Error::Snapshot(format!("unknown domain tag {d}"))),
    };
    let mut pad = [0u8; 7];
    r.read_exact(&mut pad)?;
    let period = r.read_f64::<LittleEndian>()?;
    let t = r.read_f64::<LittleEndian>()?;
    let grid = match domain {
        Domain::Position => Grid::position(m, period),
        Domain::Frequency => Grid::frequency(m, period),
    }
    .map_err(|e| Error::Snapshot(format!("invalid grid header: {e}")))?;

    let mut alpha = Array1::zeros(m);
    for z in alpha.iter_mut() {
        *z = read_complex(r)?;
    }
    let mut normal = Array2::zeros((m, m));
    for z in normal.iter_mut() {
        *z = read_complex(r)?;
    }
    let mut anomalous = Array2::zeros((m, m));
    for z in anomalous.iter_mut() {
        *z = read_complex(r)?;
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Snapshot("trailing bytes after anomalous block".into()));
    }
    Ok(GaussianState { grid, alpha, normal, anomalous, t })
}

/// Encoded size in bytes for `m` sites.
pub fn encoded_len(m: usize) -> usize {
    HEADER_LEN + 16 * (m + 2 * m * m)
}

pub fn save(path: &Path, s: &GaussianState) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_snapshot(&mut w, s)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<GaussianState> {
    read_snapshot(&mut BufReader::new(File::open(path)?))
}
