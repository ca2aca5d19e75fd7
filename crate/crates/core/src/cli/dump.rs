//! Trajectory dumps.
//!
//! ```text
//! "VSPD"  magic
//! u32     version (1)
//! u64     paths, times, state length
//! f64     time grid (times values)
//! f64     states, path-major then time-major
//! ```
//!
//! All integers and floats are little-endian.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::linear::PathEnsemble;

pub const MAGIC: &[u8; 4] = b"VSPD";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Dump {
    pub grid: Vec<f64>,
    pub state_len: usize,
    /// One `times × state_len` block per path.
    pub paths: Vec<Vec<f64>>,
}

impl Dump {
    pub fn from_ensemble(e: &PathEnsemble) -> Self {
        Self {
            grid: e.grid.clone(),
            state_len: e.state_len(),
            paths: e.paths.clone(),
        }
    }
}

pub fn write_dump(mut w: impl Write, d: &Dump) -> Result<()> {
    let times = d.grid.len();
    if d.paths.iter().any(|p| p.len() != times * d.state_len) {
        return Err(Error::shape(
            "dump paths do not match the grid and state length",
        ));
    }
    let mut buf = Vec::with_capacity(28 + 8 * (times + d.paths.len() * times * d.state_len));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    for n in [d.paths.len(), times, d.state_len] {
        buf.extend_from_slice(&(n as u64).to_le_bytes());
    }
    for v in d.grid.iter().chain(d.paths.iter().flatten()) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_dump(mut r: impl Read) -> Result<Dump> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let bad = |m: &str| Error::Config(format!("trajectory dump: {m}"));
    if bytes.len() < 32 || &bytes[..4] != MAGIC {
        return Err(bad("missing VSPD header"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let word = |k: usize| {
        u64::from_le_bytes(bytes[8 + 8 * k..16 + 8 * k].try_into().expect("8 bytes")) as usize
    };
    let (paths, times, state_len) = (word(0), word(1), word(2));
    let count = times
        .checked_add(
            paths
                .checked_mul(times)
                .and_then(|n| n.checked_mul(state_len))
                .ok_or_else(|| bad("size overflow"))?,
        )
        .ok_or_else(|| bad("size overflow"))?;
    if bytes.len() != 32 + 8 * count {
        return Err(bad("payload length does not match the header"));
    }
    let mut floats = bytes[32..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let grid: Vec<f64> = floats.by_ref().take(times).collect();
    let block = times * state_len;
    let paths = (0..paths)
        .map(|_| floats.by_ref().take(block).collect())
        .collect();
    Ok(Dump {
        grid,
        state_len,
        paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let d = Dump {
            grid: vec![0.0, 0.5, 1.0],
            state_len: 2,
            paths: vec![(0..6).map(f64::from).collect(), vec![-1.5; 6]],
        };
        let mut buf = Vec::new();
        write_dump(&mut buf, &d).unwrap();
        assert_eq!(&buf[..4], b"VSPD");
        assert_eq!(buf.len(), 32 + 8 * (3 + 12));
        assert_eq!(read_dump(&buf[..]).unwrap(), d);
        assert!(read_dump(&buf[..buf.len() - 1]).is_err());
        let mut wrong = buf.clone();
        wrong[4] = 9;
        assert!(read_dump(&wrong[..]).is_err());
    }
}
