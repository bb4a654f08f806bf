//! Binary parameter checkpoints.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic   "CRSTCP1"          7 bytes
//! count   u32                number of tensors
//! repeated count times:
//!   name_len  u32
//!   name      name_len bytes of UTF-8
//!   rank      u32
//!   dims      rank × u32
//!   payload   product(dims) × f64
//! ```

use std::io::{Read, Write};

use super::{ParamStore, Result, Tensor, TensorError};

pub const CHECKPOINT_MAGIC: &[u8; 7] = b"CRSTCP1";

pub fn write_checkpoint<W: Write>(mut w: W, params: &ParamStore) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&(params.len() as u32).to_le_bytes())?;
    for (name, t) in params.iter() {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for &v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| TensorError::Checkpoint("truncated file".into()))?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<ParamStore> {
    let mut magic = [0u8; 7];
    r.read_exact(&mut magic)
        .map_err(|_| TensorError::Checkpoint("truncated header".into()))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(TensorError::Checkpoint("bad magic".into()));
    }
    let count = read_u32(&mut r)?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let name_len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)
            .map_err(|_| TensorError::Checkpoint("truncated name".into()))?;
        let name = String::from_utf8(name).map_err(|_| TensorError::Checkpoint("name is not UTF-8".into()))?;
        let rank = read_u32(&mut r)? as usize;
        let shape = (0..rank)
            .map(|_| read_u32(&mut r).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let mut buf = vec![0u8; n * 8];
        r.read_exact(&mut buf)
            .map_err(|_| TensorError::Checkpoint(format!("truncated payload for `{name}`")))?;
        let data = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        store.insert(name, Tensor::new(shape, data)?);
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_exact() {
        let mut store = ParamStore::new();
        store.insert(
            "enc.w0",
            Tensor::from_matrix(2, 3, vec![1.0, -2.5, 3.25, 1e-300, f64::MIN_POSITIVE, 7.0]).unwrap(),
        );
        store.insert("bias", Tensor::new(vec![4], vec![0.1, 0.2, 0.3, 0.4]).unwrap());
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &store).unwrap();
        assert_eq!(&buf[..7], b"CRSTCP1");
        assert_eq!(read_checkpoint(buf.as_slice()).unwrap(), store);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(read_checkpoint(&b"CRSTCX1\0\0\0\0"[..]).is_err());
        let mut store = ParamStore::new();
        store.insert("w", Tensor::zeros(&[2, 2]));
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &store).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_checkpoint(buf.as_slice()).is_err());
    }
}
