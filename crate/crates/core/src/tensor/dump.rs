//! Binary tensor dump: `OVSRT1`, four little-endian `u32` dims (NCHW), then
//! the payload as little-endian `f64` regardless of the in-memory precision.

use alloc::format;
use alloc::vec::Vec;

use super::{numel, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DUMP_MAGIC: &[u8; 6] = b"OVSRT1";

const HEADER_LEN: usize = 6 + 4 * 4;

pub fn encode_tensor(t: &Tensor, out: &mut Vec<u8>) {
    out.reserve(HEADER_LEN + t.len() * 8);
    out.extend_from_slice(DUMP_MAGIC);
    for d in t.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in t.data() {
        out.extend_from_slice(&(v as f64).to_le_bytes());
    }
}

/// Decodes one tensor from the front of `bytes`, returning it together with
/// the number of bytes consumed.
pub fn decode_tensor(bytes: &[u8]) -> Result<(Tensor, usize)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "tensor dump truncated: {} header bytes",
            bytes.len()
        )));
    }
    if &bytes[..6] != DUMP_MAGIC {
        return Err(Error::Format("bad tensor dump magic".into()));
    }
    let mut shape = [0usize; 4];
    for (i, d) in shape.iter_mut().enumerate() {
        let o = 6 + 4 * i;
        *d = u32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]) as usize;
    }
    let n = numel(shape);
    let end = HEADER_LEN + n * 8;
    if bytes.len() < end {
        return Err(Error::Format(format!(
            "tensor dump truncated: need {} payload bytes, have {}",
            n * 8,
            bytes.len() - HEADER_LEN
        )));
    }
    let data = bytes[HEADER_LEN..end]
        .chunks_exact(8)
        .map(|c| {
            let mut b = [0u8; 8];
            b.copy_from_slice(c);
            f64::from_le_bytes(b) as Scalar
        })
        .collect();
    Ok((Tensor::new(shape, data)?, end))
}

/// Decodes a back-to-back sequence of dumps filling `bytes` exactly.
pub fn decode_tensors(mut bytes: &[u8]) -> Result<Vec<Tensor>> {
    let mut out = Vec::new();
    while !bytes.is_empty() {
        let (t, used) = decode_tensor(bytes)?;
        out.push(t);
        bytes = &bytes[used..];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let t = Tensor::new([1, 2, 1, 1], alloc::vec![1.5, -2.0]).unwrap();
        let mut buf = Vec::new();
        encode_tensor(&t, &mut buf);
        assert_eq!(&buf[..6], b"OVSRT1");
        assert_eq!(&buf[6..10], &1u32.to_le_bytes());
        assert_eq!(&buf[10..14], &2u32.to_le_bytes());
        assert_eq!(&buf[22..30], &1.5f64.to_le_bytes());
        assert_eq!(buf.len(), 22 + 16);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let t = Tensor::zeros([1, 1, 2, 2]);
        let mut buf = Vec::new();
        encode_tensor(&t, &mut buf);
        assert!(decode_tensor(&buf[..buf.len() - 1]).is_err());
        buf[0] = b'X';
        assert!(decode_tensor(&buf).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip(dims in proptest::array::uniform4(1usize..4), seed in any::<u64>()) {
            let mut s = seed;
            let t = Tensor::from_fn(dims, |_, _, _, _| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 11) as Scalar / (1u64 << 53) as Scalar - 0.5
            });
            let mut buf = Vec::new();
            encode_tensor(&t, &mut buf);
            encode_tensor(&t, &mut buf);
            let back = decode_tensors(&buf).unwrap();
            prop_assert_eq!(back.len(), 2);
            prop_assert_eq!(&back[0], &t);
            prop_assert_eq!(&back[1], &t);
        }
    }
}
