//! Binary parameter checkpoints.
//!
//! Layout (little-endian): magic `PHCKPT1`, `u32` tensor count, then per
//! tensor a `u16` name length, UTF-8 name, `u8` rank, `rank × u32` dims and
//! the values as `f64`.

use std::io::{Read, Write};

use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::NnError;
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 7] = b"PHCKPT1";

pub fn write_checkpoint<T: Scalar>(store: &ParamStore<T>, mut w: impl Write) -> std::io::Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&(store.len() as u32).to_le_bytes())?;
    for (name, t) in store.iter() {
        let bytes = name.as_bytes();
        w.write_all(&(bytes.len() as u16).to_le_bytes())?;
        w.write_all(bytes)?;
        w.write_all(&[2u8])?;
        w.write_all(&(t.rows() as u32).to_le_bytes())?;
        w.write_all(&(t.cols() as u32).to_le_bytes())?;
        for &v in t.data() {
            w.write_all(&v.as_f64().to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn checkpoint_bytes<T: Scalar>(store: &ParamStore<T>) -> Vec<u8> {
    let mut buf = Vec::new();
    write_checkpoint(store, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

fn read_exact<const N: usize>(r: &mut impl Read) -> Result<[u8; N], NnError> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    Ok(buf)
}

pub fn read_checkpoint<T: Scalar>(mut r: impl Read) -> Result<ParamStore<T>, NnError> {
    let magic: [u8; 7] = read_exact(&mut r)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(NnError::Checkpoint("bad magic".into()));
    }
    let count = u32::from_le_bytes(read_exact(&mut r)?);
    let mut store = ParamStore::new();
    for _ in 0..count {
        let len = u16::from_le_bytes(read_exact(&mut r)?) as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        let name = String::from_utf8(name).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        let [rank] = read_exact::<1>(&mut r)?;
        let dims: Vec<usize> = (0..rank)
            .map(|_| read_exact::<4>(&mut r).map(|b| u32::from_le_bytes(b) as usize))
            .collect::<Result<_, _>>()?;
        let (rows, cols) = match dims.as_slice() {
            [c] => (1, *c),
            [r, c] => (*r, *c),
            _ => return Err(NnError::Checkpoint(format!("unsupported rank {rank} for {name}"))),
        };
        let data = (0..rows * cols)
            .map(|_| read_exact::<8>(&mut r).map(|b| T::lit(f64::from_le_bytes(b))))
            .collect::<Result<Vec<_>, _>>()?;
        store.add(name, Tensor::from_vec(rows, cols, data));
    }
    Ok(store)
}

/// Copies values from `loaded` into `target` by name, checking shapes.
pub fn load_into<T: Scalar>(target: &mut ParamStore<T>, loaded: &ParamStore<T>) -> Result<(), NnError> {
    if target.len() != loaded.len() {
        return Err(NnError::Checkpoint(format!(
            "checkpoint has {} tensors, model expects {}",
            loaded.len(),
            target.len()
        )));
    }
    for (name, t) in loaded.iter() {
        let id = target
            .id(name)
            .ok_or_else(|| NnError::Checkpoint(format!("unexpected tensor {name}")))?;
        let dst = target.get_mut(id);
        if dst.shape() != t.shape() {
            return Err(NnError::Checkpoint(format!(
                "tensor {name}: checkpoint {:?} vs model {:?}",
                t.shape(),
                dst.shape()
            )));
        }
        *dst = t.clone();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_bits() {
        let mut store = ParamStore::<f64>::new();
        store.add("a", Tensor::from_rows(&[vec![1.5, -0.0], vec![f64::MIN_POSITIVE, 3.25]]));
        store.add("b.bias", Tensor::row_vector(vec![0.1, 0.2, 0.3]));
        let bytes = checkpoint_bytes(&store);
        let back: ParamStore<f64> = read_checkpoint(bytes.as_slice()).unwrap();
        assert_eq!(checkpoint_bytes(&back), bytes);
    }

    #[test]
    fn rejects_bad_magic() {
        assert!(read_checkpoint::<f64>(&b"NOTACKPT"[..]).is_err());
    }
}
