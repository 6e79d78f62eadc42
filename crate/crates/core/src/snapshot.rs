//! Binary snapshot records.
//!
//! Each record is the 4-byte magic `BBL1`, the point count `N` as a
//! little-endian `u64`, the time as a little-endian `f64`, then `N`
//! little-endian `f64` values of `u` followed by `N` values of `v`.
//! A file is a plain concatenation of records.

use std::io::{self, Read, Write};
use std::ops::ControlFlow;

use crate::error::{Error, Result};
use crate::integrator::Observer;
use crate::model::FieldState;

pub const MAGIC: &[u8; 4] = b"BBL1";

pub fn write_record<W: Write>(w: &mut W, state: &FieldState) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(state.u.len() as u64).to_le_bytes())?;
    w.write_all(&state.t.to_le_bytes())?;
    for x in state.u.iter().chain(&state.v) {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

/// Read one record; `Ok(None)` at a clean end of stream.
pub fn read_record<R: Read>(r: &mut R) -> Result<Option<FieldState>> {
    let mut magic = [0u8; 4];
    match r.read_exact(&mut magic) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    if &magic != MAGIC {
        return Err(Error::Snapshot(format!("bad magic {magic:?}")));
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let n = u64::from_le_bytes(word) as usize;
    if n == 0 || n > (1 << 28) {
        return Err(Error::Snapshot(format!("implausible point count {n}")));
    }
    r.read_exact(&mut word)?;
    let t = f64::from_le_bytes(word);
    let mut read_vec = |r: &mut R| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut word)?;
            out.push(f64::from_le_bytes(word));
        }
        Ok(out)
    };
    let u = read_vec(r)?;
    let v = read_vec(r)?;
    Ok(Some(FieldState { u, v, t }))
}

pub fn read_all<R: Read>(r: &mut R) -> Result<Vec<FieldState>> {
    let mut out = Vec::new();
    while let Some(s) = read_record(r)? {
        out.push(s);
    }
    Ok(out)
}

/// Observer that appends every observed state to a writer.
pub struct SnapshotWriter<W: Write> {
    writer: W,
    error: Option<Error>,
    pub records: usize,
}

impl<W: Write> SnapshotWriter<W> {
    pub fn new(writer: W) -> Self {
        Self {
            writer,
            error: None,
            records: 0,
        }
    }

    /// Flush and surface the first write error, if any.
    pub fn finish(mut self) -> Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.writer.flush()?;
        Ok(self.writer)
    }
}

impl<W: Write> Observer for SnapshotWriter<W> {
    fn observe(&mut self, _t: f64, state: &FieldState) -> ControlFlow<()> {
        match write_record(&mut self.writer, state) {
            Ok(()) => {
                self.records += 1;
                ControlFlow::Continue(())
            }
            Err(e) => {
                self.error = Some(e);
                ControlFlow::Break(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_exact() {
        let s = FieldState {
            u: vec![1.0, 2.0],
            v: vec![-0.5, 3.25],
            t: 4.0,
        };
        let mut buf = Vec::new();
        write_record(&mut buf, &s).unwrap();
        assert_eq!(buf.len(), 4 + 8 + 8 + 4 * 8);
        assert_eq!(&buf[..4], b"BBL1");
        assert_eq!(&buf[4..12], &2u64.to_le_bytes());
        assert_eq!(&buf[12..20], &4.0f64.to_le_bytes());
        assert_eq!(&buf[20..28], &1.0f64.to_le_bytes());
        assert_eq!(&buf[44..52], &3.25f64.to_le_bytes());
        let back = read_all(&mut buf.as_slice()).unwrap();
        assert_eq!(back, vec![s]);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let s = FieldState {
            u: vec![1.0; 4],
            v: vec![0.0; 4],
            t: 0.0,
        };
        let mut buf = Vec::new();
        write_record(&mut buf, &s).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_record(&mut bad.as_slice()).is_err());
        let truncated = &buf[..buf.len() - 3];
        assert!(read_record(&mut &truncated[..]).is_err());
    }
}
