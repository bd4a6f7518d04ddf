//! `TPSW` weight container.
//!
//! ```text
//! header   "TPSW" | version: u32 = 1 | tensor_count: u32
//! record   name_len: u32 | name: UTF-8 | rank: u32 | dims: rank × u32 | data: Π dims × f32
//! ```
//!
//! All integers and floats are little-endian. Records appear in
//! lexicographic byte order of their names.

use std::path::Path;

use crate::error::{Error, Result};
use crate::net::WeightStore;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"TPSW";
pub const VERSION: u32 = 1;

pub fn encode_weights(w: &WeightStore) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + w.parameter_count() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(w.len() as u32).to_le_bytes());
    for (name, t) in w.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
        for &d in t.dims() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let available = self.buf.len() - self.pos;
        if n > available {
            return Err(Error::Truncated {
                offset: self.pos,
                needed: n,
                available,
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

pub fn decode_weights(bytes: &[u8]) -> Result<WeightStore> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("bad magic, expected `TPSW`".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let count = r.u32()?;
    let mut store = WeightStore::new();
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| {
                Error::Format(format!(
                    "tensor name at offset {} is not UTF-8",
                    r.pos - name_len
                ))
            })?
            .to_string();
        let rank = r.u32()? as usize;
        if !(1..=4).contains(&rank) {
            return Err(Error::Format(format!("tensor `{name}` has rank {rank}")));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32()? as usize);
        }
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Format(format!("tensor `{name}` has invalid dims {dims:?}")))?;
        let bytes_needed = count
            .checked_mul(4)
            .ok_or_else(|| Error::Format(format!("tensor `{name}` is too large")))?;
        let payload = r.take(bytes_needed)?;
        let data: Vec<f32> = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!(
                "tensor `{name}` has a non-finite value at {i}"
            )));
        }
        if store.contains(&name) {
            return Err(Error::DuplicateEntry(name));
        }
        let t = Tensor::new(&dims, data)?;
        store.insert(name, t);
    }
    if r.remaining() != 0 {
        return Err(Error::Format(format!(
            "{} trailing bytes after last tensor",
            r.remaining()
        )));
    }
    Ok(store)
}

pub fn save_weights(w: &WeightStore, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_weights(w)).map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<WeightStore> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_weights(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(name: &str, dims: &[u32], data: &[f32]) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(&(name.len() as u32).to_le_bytes());
        b.extend_from_slice(name.as_bytes());
        b.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for d in dims {
            b.extend_from_slice(&d.to_le_bytes());
        }
        for v in data {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b
    }

    fn header(count: u32) -> Vec<u8> {
        let mut b = b"TPSW".to_vec();
        b.extend_from_slice(&1u32.to_le_bytes());
        b.extend_from_slice(&count.to_le_bytes());
        b
    }

    #[test]
    fn empty_store_is_twelve_bytes() {
        let bytes = encode_weights(&WeightStore::new());
        assert_eq!(bytes, header(0));
        assert_eq!(bytes.len(), 12);
        assert!(decode_weights(&bytes).unwrap().is_empty());
    }

    #[test]
    fn single_tensor_layout() {
        let mut w = WeightStore::new();
        w.insert("b", Tensor::new(&[2], vec![1.0, 2.0]).unwrap());
        let mut want = header(1);
        want.extend(record("b", &[2], &[1.0, 2.0]));
        let bytes = encode_weights(&w);
        assert_eq!(bytes, want);
        assert_eq!(bytes.len(), 12 + 4 + 1 + 4 + 4 + 8);
    }

    #[test]
    fn names_are_sorted() {
        let mut w = WeightStore::new();
        w.insert("zeta", Tensor::zeros(&[1]).unwrap());
        w.insert("alpha", Tensor::zeros(&[1]).unwrap());
        let bytes = encode_weights(&w);
        let first = &bytes[16..21];
        assert_eq!(first, b"alpha");
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(
            decode_weights(b"TPSX\x01\0\0\0\0\0\0\0"),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            decode_weights(b"TPSW\x02\0\0\0\0\0\0\0"),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            decode_weights(b"TPS"),
            Err(Error::Truncated { .. })
        ));

        let mut dup = header(2);
        dup.extend(record("a", &[1], &[1.0]));
        dup.extend(record("a", &[1], &[2.0]));
        assert!(matches!(decode_weights(&dup), Err(Error::DuplicateEntry(n)) if n == "a"));

        let mut short = header(1);
        short.extend(record("a", &[3], &[1.0, 2.0, 3.0]));
        short.truncate(short.len() - 2);
        assert!(matches!(
            decode_weights(&short),
            Err(Error::Truncated { .. })
        ));

        let mut huge = header(1);
        huge.extend(record("a", &[u32::MAX, u32::MAX, u32::MAX, u32::MAX], &[]));
        assert!(decode_weights(&huge).is_err());

        let mut rank0 = header(1);
        rank0.extend(record("a", &[], &[]));
        assert!(matches!(decode_weights(&rank0), Err(Error::Format(_))));

        let mut nan = header(1);
        nan.extend(record("a", &[1], &[f32::NAN]));
        assert!(matches!(decode_weights(&nan), Err(Error::Format(_))));

        let mut trailing = header(0);
        trailing.push(0);
        assert!(matches!(decode_weights(&trailing), Err(Error::Format(_))));

        let mut missing = header(2);
        missing.extend(record("a", &[1], &[1.0]));
        assert!(matches!(
            decode_weights(&missing),
            Err(Error::Truncated { .. })
        ));
    }

    proptest! {
        #[test]
        fn roundtrip_is_bit_identical(
            entries in proptest::collection::btree_map(
                "[a-z.]{1,12}",
                (proptest::collection::vec(1usize..5, 1..=4), any::<u64>()),
                0..20,
            )
        ) {
            let mut w = WeightStore::new();
            for (name, (dims, seed)) in entries {
                let mut s = seed;
                let t = Tensor::from_fn(&dims, |_| {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    f32::from_bits((s >> 33) as u32 & 0x7f7f_ffff) * if s & 1 == 0 { 1.0 } else { -1.0 }
                }).unwrap();
                w.insert(name, t);
            }
            let bytes = encode_weights(&w);
            let back = decode_weights(&bytes).unwrap();
            prop_assert_eq!(encode_weights(&back), bytes);
            prop_assert_eq!(back, w);
        }
    }
}
