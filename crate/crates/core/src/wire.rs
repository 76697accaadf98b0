//! Bit-exact frame format for coded packets.
//!
//! All fields are packed big-endian, most significant bit first:
//!
//! ```text
//! magic    8   0xA7
//! version  4   1
//! mode     4   0 explicit-id, 1 compact, 2 rlnc
//! M       16   batch size
//! B       32   original payload length in bits
//! body         explicit: round(16), then M paddings of ⌈log2(r_max+1)⌉ bits
//!              compact:  round(16), group(16), rotation(16)
//!              rlnc:     q(8), then M coefficients of q bits
//! payload      B + r_max bits (triangular) or ⌈B/q⌉·q bits (rlnc)
//! ```
//!
//! The frame is zero-padded to a whole byte. A parser accepts only frames of
//! exactly that length with zero padding.

use bitvec::prelude::*;
use thiserror::Error;

use crate::analysis::ceil_log2;
use crate::codec::{Bits, CodedPacket};
use crate::gf::{Field, GfError};
use crate::ids::{IdError, TriId};
use crate::rlnc::{symbol_count, RlncCodedPacket};

pub const MAGIC: u8 = 0xA7;
pub const VERSION: u8 = 1;
/// magic, version, mode, M and B.
pub const FIXED_HEADER_BITS: u64 = 64;
/// batch size, round, group and rotation: what a receiver needs to rebuild
/// the id from a compact frame.
pub const COMPACT_INDEX_BITS: u64 = 64;
pub const COMPACT_HEADER_BITS: u64 = FIXED_HEADER_BITS + 48;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("frame is truncated")]
    Truncated,
    #[error("bad magic byte {0:#04x}")]
    BadMagic(u8),
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("unknown header mode {0}")]
    UnknownMode(u8),
    #[error("frame is {got} bytes, header implies {expected}")]
    LengthMismatch { expected: u64, got: u64 },
    #[error("non-zero tail padding")]
    NonZeroPadding,
    #[error("invalid id: {0}")]
    InvalidId(#[from] IdError),
    #[error("invalid field: {0}")]
    InvalidField(#[from] GfError),
    #[error("{field} = {value} does not fit the header")]
    FieldOverflow { field: &'static str, value: u64 },
    #[error("payload length must be at least one bit")]
    EmptyPayload,
    #[error("packet does not match its header: {0}")]
    Inconsistent(&'static str),
    #[error("header mode {0:?} cannot carry this packet")]
    ModeMismatch(HeaderMode),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HeaderMode {
    Explicit = 0,
    Compact = 1,
    Rlnc = 2,
}

impl HeaderMode {
    fn from_bits(v: u8) -> Result<Self, WireError> {
        match v {
            0 => Ok(HeaderMode::Explicit),
            1 => Ok(HeaderMode::Compact),
            2 => Ok(HeaderMode::Rlnc),
            _ => Err(WireError::UnknownMode(v)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Frame {
    Triangular(CodedPacket),
    Rlnc(RlncCodedPacket),
}

struct Writer {
    bits: Bits,
}

impl Writer {
    fn put(&mut self, value: u64, width: u32) {
        for k in (0..width).rev() {
            self.bits.push(value >> k & 1 == 1);
        }
    }
}

struct Reader<'a> {
    bits: &'a BitSlice<u8, Msb0>,
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, width: usize) -> Result<&BitSlice<u8, Msb0>, WireError> {
        let end = self.pos.checked_add(width).ok_or(WireError::Truncated)?;
        let out = self.bits.get(self.pos..end).ok_or(WireError::Truncated)?;
        self.pos = end;
        Ok(out)
    }

    fn get(&mut self, width: u32) -> Result<u64, WireError> {
        Ok(self
            .take(width as usize)?
            .iter()
            .by_vals()
            .fold(0u64, |acc, b| acc << 1 | b as u64))
    }
}

fn fits(field: &'static str, value: u64, width: u32) -> Result<u64, WireError> {
    if width < 64 && value >> width != 0 {
        return Err(WireError::FieldOverflow { field, value });
    }
    Ok(value)
}

fn padding_width(r_max: u64) -> u32 {
    ceil_log2(r_max + 1)
}

pub fn serialize(frame: &Frame, mode: HeaderMode) -> Result<Vec<u8>, WireError> {
    let mut w = Writer { bits: Bits::new() };
    w.put(MAGIC as u64, 8);
    w.put(VERSION as u64, 4);
    w.put(mode as u64, 4);
    match (frame, mode) {
        (Frame::Triangular(pkt), HeaderMode::Explicit | HeaderMode::Compact) => {
            let id = &pkt.id;
            let m = id.batch_size() as u64;
            if pkt.batch_bits == 0 {
                return Err(WireError::EmptyPayload);
            }
            if pkt.payload.len() as u64 != pkt.batch_bits as u64 + id.r_max() {
                return Err(WireError::Inconsistent("payload length"));
            }
            w.put(fits("M", m, 16)?, 16);
            w.put(fits("B", pkt.batch_bits as u64, 32)?, 32);
            w.put(fits("round", id.round(), 16)?, 16);
            if mode == HeaderMode::Explicit {
                let width = padding_width(id.r_max());
                for &r in id.padding() {
                    w.put(r, width);
                }
            } else {
                w.put(id.group() as u64, 16);
                w.put(id.rotation() as u64, 16);
            }
            w.bits.extend_from_bitslice(&pkt.payload);
        }
        (Frame::Rlnc(pkt), HeaderMode::Rlnc) => {
            let field = Field::new(pkt.q)?;
            let m = pkt.coefficients.len() as u64;
            if pkt.payload_bits == 0 {
                return Err(WireError::EmptyPayload);
            }
            if pkt.symbols.len() != symbol_count(pkt.payload_bits, pkt.q) {
                return Err(WireError::Inconsistent("symbol count"));
            }
            w.put(fits("M", m, 16)?, 16);
            w.put(fits("B", pkt.payload_bits as u64, 32)?, 32);
            w.put(pkt.q as u64, 8);
            for &c in pkt.coefficients.iter().chain(&pkt.symbols) {
                field.element(c)?;
                w.put(c as u64, pkt.q as u32);
            }
        }
        _ => return Err(WireError::ModeMismatch(mode)),
    }
    w.bits.set_uninitialized(false);
    Ok(w.bits.into_vec())
}

pub fn parse(bytes: &[u8]) -> Result<(HeaderMode, Frame), WireError> {
    let bits = bytes.view_bits::<Msb0>();
    let mut r = Reader { bits, pos: 0 };
    let magic = r.get(8)? as u8;
    if magic != MAGIC {
        return Err(WireError::BadMagic(magic));
    }
    let version = r.get(4)? as u8;
    if version != VERSION {
        return Err(WireError::BadVersion(version));
    }
    let mode = HeaderMode::from_bits(r.get(4)? as u8)?;
    let m = r.get(16)?;
    let b = r.get(32)?;
    if b == 0 {
        return Err(WireError::EmptyPayload);
    }

    let (body_bits, payload_bits) = match mode {
        HeaderMode::Explicit | HeaderMode::Compact => {
            if m < 2 {
                return Err(IdError::BatchTooSmall(m as usize).into());
            }
            let round = r.get(16)?;
            if round == 0 {
                return Err(IdError::ZeroSequence.into());
            }
            let r_max = round * (m - 1);
            let body = if mode == HeaderMode::Explicit {
                m * padding_width(r_max) as u64
            } else {
                32
            };
            (body, b + r_max)
        }
        HeaderMode::Rlnc => {
            let q = r.get(8)? as u8;
            Field::new(q)?;
            (m * q as u64, b.div_ceil(q as u64) * q as u64)
        }
    };
    let consumed = r.pos as u64;
    let total = consumed + body_bits + payload_bits;
    let expected = total.div_ceil(8);
    if expected != bytes.len() as u64 {
        if (bytes.len() as u64) < expected {
            return Err(WireError::Truncated);
        }
        return Err(WireError::LengthMismatch {
            expected,
            got: bytes.len() as u64,
        });
    }
    if bits[total as usize..].any() {
        return Err(WireError::NonZeroPadding);
    }

    // lengths are now known to fit in the buffer
    r.pos = FIXED_HEADER_BITS as usize;
    let frame = match mode {
        HeaderMode::Explicit | HeaderMode::Compact => {
            let m = m as usize;
            let round = r.get(16)?;
            let id = if mode == HeaderMode::Explicit {
                let width = padding_width(round * (m as u64 - 1));
                let padding = (0..m).map(|_| r.get(width)).collect::<Result<Vec<_>, _>>()?;
                let id = TriId::from_padding(padding)?;
                if id.round() != round {
                    return Err(WireError::Inconsistent("round field"));
                }
                id
            } else {
                let group = r.get(16)? as usize;
                let rotation = r.get(16)? as usize;
                TriId::from_parts(m, round, group, rotation)?
            };
            let payload = r.take(payload_bits as usize)?.to_bitvec();
            Frame::Triangular(CodedPacket {
                id,
                payload,
                batch_bits: b as usize,
            })
        }
        HeaderMode::Rlnc => {
            let q = r.get(8)? as u8;
            let coefficients = (0..m)
                .map(|_| r.get(q as u32).map(|v| v as u8))
                .collect::<Result<Vec<_>, _>>()?;
            let symbols = (0..payload_bits / q as u64)
                .map(|_| r.get(q as u32).map(|v| v as u8))
                .collect::<Result<Vec<_>, _>>()?;
            Frame::Rlnc(RlncCodedPacket {
                q,
                coefficients,
                symbols,
                payload_bits: b as usize,
            })
        }
    };
    Ok((mode, frame))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{encode, Packet};
    use crate::ids::id_at;
    use proptest::prelude::*;

    fn byte_batch(bytes: &[u8]) -> Vec<Packet> {
        bytes
            .iter()
            .enumerate()
            .map(|(i, &v)| Packet::new(i + 1, BitVec::from_element(v)))
            .collect()
    }

    #[test]
    fn compact_golden_bytes() {
        let id = id_at(4, 5).unwrap();
        assert_eq!(id.padding(), &[3, 0, 1, 2]);
        let pkt = encode(&byte_batch(&[0xFF, 0, 0, 0]), &id).unwrap();
        let bytes = serialize(&Frame::Triangular(pkt.clone()), HeaderMode::Compact).unwrap();
        // c1 shifted by 3 into an 11-bit payload: 000 11111111, then 5 pad bits
        let golden = [
            0xA7, 0x11, 0x00, 0x04, 0x00, 0x00, 0x00, 0x08, 0x00, 0x01, 0x00, 0x01, 0x00,
            0x01, 0x1F, 0xE0,
        ];
        assert_eq!(bytes, golden);
        let (mode, frame) = parse(&bytes).unwrap();
        assert_eq!(mode, HeaderMode::Compact);
        let Frame::Triangular(back) = frame else {
            panic!("wrong frame kind")
        };
        assert_eq!(back.id.padding(), &[3, 0, 1, 2]);
        assert_eq!(back, pkt);
    }

    #[test]
    fn explicit_header_layout() {
        let id = id_at(4, 13).unwrap(); // (0,2,4,6), r_max 6 -> 3-bit fields
        let pkt = encode(&byte_batch(&[0, 0, 0, 0]), &id).unwrap();
        let bytes = serialize(&Frame::Triangular(pkt), HeaderMode::Explicit).unwrap();
        // 64 + 16 + 4*3 + 14 = 106 bits
        assert_eq!(bytes.len(), 14);
        assert_eq!(&bytes[..2], &[0xA7, 0x10]);
        assert_eq!(&bytes[8..10], &[0x00, 0x02]);
        // 000 010 100 110
        assert_eq!(bytes[10], 0b0000_1010);
        assert_eq!(bytes[11] >> 4, 0b0110);
    }

    #[test]
    fn compact_header_is_fixed_size() {
        for m in [2usize, 4, 9, 30] {
            let batch: Vec<_> = (1..=m).map(|i| Packet::new(i, BitVec::repeat(false, 8))).collect();
            let pkt = encode(&batch, &id_at(m, 1).unwrap()).unwrap();
            let bytes = serialize(&Frame::Triangular(pkt), HeaderMode::Compact).unwrap();
            let payload = 8 + m as u64 - 1;
            assert_eq!(bytes.len() as u64, (COMPACT_HEADER_BITS + payload).div_ceil(8));
        }
        assert_eq!(COMPACT_HEADER_BITS, 112);
    }

    #[test]
    fn rlnc_frame() {
        let pkt = RlncCodedPacket {
            q: 8,
            coefficients: vec![1, 2, 3, 0xFE],
            symbols: vec![0xAB, 0xCD],
            payload_bits: 16,
        };
        let bytes = serialize(&Frame::Rlnc(pkt.clone()), HeaderMode::Rlnc).unwrap();
        assert_eq!(&bytes[8..], &[8, 1, 2, 3, 0xFE, 0xAB, 0xCD]);
        assert_eq!(parse(&bytes).unwrap(), (HeaderMode::Rlnc, Frame::Rlnc(pkt)));
    }

    #[test]
    fn error_kinds() {
        let pkt = encode(&byte_batch(&[1, 2, 3, 4]), &id_at(4, 2).unwrap()).unwrap();
        let good = serialize(&Frame::Triangular(pkt.clone()), HeaderMode::Compact).unwrap();
        assert_eq!(parse(&good[..good.len() - 1]), Err(WireError::Truncated));
        assert_eq!(parse(&good[..3]), Err(WireError::Truncated));
        let mut bad = good.clone();
        bad[0] = 0x00;
        assert_eq!(parse(&bad), Err(WireError::BadMagic(0)));
        let mut bad = good.clone();
        bad[1] = 0x21;
        assert_eq!(parse(&bad), Err(WireError::BadVersion(2)));
        let mut bad = good.clone();
        bad[1] = 0x13;
        assert_eq!(parse(&bad), Err(WireError::UnknownMode(3)));
        let mut bad = good.clone();
        bad[11] = 0x04; // group 4 with M = 4
        assert!(matches!(parse(&bad), Err(WireError::InvalidId(_))));
        let mut long = good.clone();
        long.push(0);
        assert!(matches!(parse(&long), Err(WireError::LengthMismatch { .. })));
        assert_eq!(
            serialize(&Frame::Triangular(pkt), HeaderMode::Rlnc),
            Err(WireError::ModeMismatch(HeaderMode::Rlnc))
        );
    }

    proptest! {
        #[test]
        fn triangular_round_trip(m in 2usize..12, a in 1u64..400, b in 1usize..80, seed: u64, compact: bool) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let batch: Vec<_> = (1..=m)
                .map(|i| Packet::new(i, (0..b).map(|_| rng.gen::<bool>()).collect()))
                .collect();
            let pkt = encode(&batch, &id_at(m, a).unwrap()).unwrap();
            let mode = if compact { HeaderMode::Compact } else { HeaderMode::Explicit };
            let bytes = serialize(&Frame::Triangular(pkt.clone()), mode).unwrap();
            prop_assert_eq!(parse(&bytes).unwrap(), (mode, Frame::Triangular(pkt)));
        }

        #[test]
        fn header_flips_never_panic(m in 2usize..6, a in 1u64..40, flip in 0usize..200) {
            let batch: Vec<_> = (1..=m).map(|i| Packet::new(i, BitVec::repeat(i % 2 == 0, 9))).collect();
            let pkt = encode(&batch, &id_at(m, a).unwrap()).unwrap();
            for mode in [HeaderMode::Explicit, HeaderMode::Compact] {
                let mut bytes = serialize(&Frame::Triangular(pkt.clone()), mode).unwrap();
                let bit = flip % (bytes.len() * 8);
                bytes[bit / 8] ^= 0x80 >> (bit % 8);
                if let Ok((_, Frame::Triangular(p))) = parse(&bytes) {
                    prop_assert_eq!(p.payload.len(), p.batch_bits + p.id.r_max() as usize);
                }
            }
        }
    }
}
