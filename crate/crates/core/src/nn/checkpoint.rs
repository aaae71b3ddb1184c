//! Binary checkpoint format.
//!
//! Layout: the magic bytes `RMDP1`, then one record per tensor:
//! name length (u32 LE), name bytes, rank (u32 LE), dims (u32 LE each),
//! payload (f32 LE, row-major).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 5] = b"RMDP1";

#[derive(Debug, Clone, PartialEq)]
pub struct TensorRecord {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl TensorRecord {
    pub fn new(name: impl Into<String>, dims: Vec<usize>, data: Vec<f32>) -> Self {
        let record = Self { name: name.into(), dims, data };
        debug_assert_eq!(record.dims.iter().product::<usize>(), record.data.len());
        record
    }
}

pub fn save_tensors(path: &Path, tensors: &[TensorRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    for t in tensors {
        let expected: usize = t.dims.iter().product();
        if expected != t.data.len() {
            return Err(Error::invalid(format!(
                "tensor `{}` has {} values but dims {:?}",
                t.name,
                t.data.len(),
                t.dims
            )));
        }
        w.write_all(&(t.name.len() as u32).to_le_bytes())?;
        w.write_all(t.name.as_bytes())?;
        w.write_all(&(t.dims.len() as u32).to_le_bytes())?;
        for &d in &t.dims {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for &x in &t.data {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_tensors(path: &Path) -> Result<Vec<TensorRecord>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::invalid(format!(
            "bad checkpoint magic {:?} in {}",
            magic,
            path.display()
        )));
    }
    let mut out = Vec::new();
    loop {
        let mut len_buf = [0u8; 4];
        match r.read_exact(&mut len_buf) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let name_len = u32::from_le_bytes(len_buf) as usize;
        let mut name_bytes = vec![0u8; name_len];
        r.read_exact(&mut name_bytes)?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| Error::invalid("checkpoint tensor name is not utf-8"))?;
        let mut rank_buf = [0u8; 4];
        r.read_exact(&mut rank_buf)?;
        let rank = u32::from_le_bytes(rank_buf) as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            let mut d = [0u8; 4];
            r.read_exact(&mut d)?;
            dims.push(u32::from_le_bytes(d) as usize);
        }
        let count: usize = dims.iter().product();
        let mut data = Vec::with_capacity(count);
        let mut f = [0u8; 4];
        for _ in 0..count {
            r.read_exact(&mut f)?;
            data.push(f32::from_le_bytes(f));
        }
        out.push(TensorRecord { name, dims, data });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_everything() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        let tensors = vec![
            TensorRecord::new("trunk_0_w", vec![2, 3], vec![0.5, -1.0, 2.0, 0.0, 1.5, -0.25]),
            TensorRecord::new("head_0_b", vec![2], vec![1.0, -1.0]),
            TensorRecord::new("scalar", vec![1], vec![42.0]),
        ];
        save_tensors(&path, &tensors).unwrap();
        let loaded = load_tensors(&path).unwrap();
        assert_eq!(loaded, tensors);
    }

    #[test]
    fn byte_layout_is_exactly_as_specified() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.ckpt");
        save_tensors(&path, &[TensorRecord::new("w", vec![1, 2], vec![1.0, -2.0])]).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let mut expect = Vec::new();
        expect.extend_from_slice(b"RMDP1");
        expect.extend_from_slice(&1u32.to_le_bytes()); // name length
        expect.extend_from_slice(b"w");
        expect.extend_from_slice(&2u32.to_le_bytes()); // rank
        expect.extend_from_slice(&1u32.to_le_bytes());
        expect.extend_from_slice(&2u32.to_le_bytes());
        expect.extend_from_slice(&1.0f32.to_le_bytes());
        expect.extend_from_slice(&(-2.0f32).to_le_bytes());
        assert_eq!(bytes, expect);
    }

    #[test]
    fn rejects_wrong_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, b"NOPE!rest").unwrap();
        assert!(load_tensors(&path).is_err());
    }
}
