//! Shift-pad XOR encoding and bit-level peeling decoder.
//!
//! Bit 0 of a payload is the head (first transmitted) bit. Encoding packet
//! `m` with padding `r_m` places `r_m` zeros before its payload and
//! `r_max - r_m` zeros after it; the coded payload is the XOR of all padded
//! payloads and is `B + r_max` bits long.
//!
//! Each coded column is one XOR equation over the unknown original bits. The
//! decoder keeps, per equation, the XOR of its right-hand side with every
//! solved bit, the number of unknowns left and the XOR of the remaining
//! unknown indices, so a single-unknown equation names its unknown directly.
//! Solving a bit substitutes it into the one column of every received packet
//! that references it (column `i + r_m`), which is the whole of the work.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use bitvec::prelude::*;
use thiserror::Error;

use crate::ids::TriId;

pub type Bits = BitVec<u8, Msb0>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("payloads must be at least one bit long")]
    EmptyPayload,
    #[error("packet {index} has {got} bits, expected {expected}")]
    LengthMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("id is for batch size {id}, batch has {batch}")]
    BatchSizeMismatch { id: usize, batch: usize },
    #[error("packet indices must be exactly 1..={0}")]
    BadIndices(usize),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("coded payload for {id} has {got} bits, expected {expected}")]
    PayloadLength {
        id: String,
        expected: usize,
        got: usize,
    },
    #[error("contradiction: an equation of packet {seq} reduced to 1 = 0")]
    Contradiction { seq: u64 },
    #[error("decoder is unusable after an earlier contradiction")]
    Poisoned,
    #[error("insufficient packets: {distinct} distinct ids for a batch of {m}")]
    Insufficient { distinct: usize, m: usize },
    #[error("decoding stalled: {0}")]
    Stall(Box<Residual>),
}

/// One original packet. `index` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub index: usize,
    pub payload: Bits,
}

impl Packet {
    pub fn new(index: usize, payload: Bits) -> Self {
        Packet { index, payload }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedPacket {
    pub id: TriId,
    pub payload: Bits,
    /// Length `B` of the original payloads.
    pub batch_bits: usize,
}

fn check_batch(batch: &[Packet]) -> Result<usize, CodecError> {
    let first = batch.first().ok_or(CodecError::EmptyBatch)?;
    let b = first.payload.len();
    if b == 0 {
        return Err(CodecError::EmptyPayload);
    }
    let mut seen = vec![false; batch.len()];
    for p in batch {
        if p.payload.len() != b {
            return Err(CodecError::LengthMismatch {
                index: p.index,
                expected: b,
                got: p.payload.len(),
            });
        }
        if p.index == 0 || p.index > batch.len() || seen[p.index - 1] {
            return Err(CodecError::BadIndices(batch.len()));
        }
        seen[p.index - 1] = true;
    }
    Ok(b)
}

/// Encodes `batch` under `id`.
pub fn encode(batch: &[Packet], id: &TriId) -> Result<CodedPacket, CodecError> {
    let mut ops = 0;
    encode_counted(batch, id, &mut ops)
}

/// As [`encode`], adding one to `ops` per contributing bit XORed in.
pub fn encode_counted(
    batch: &[Packet],
    id: &TriId,
    ops: &mut u64,
) -> Result<CodedPacket, CodecError> {
    let b = check_batch(batch)?;
    if id.batch_size() != batch.len() {
        return Err(CodecError::BatchSizeMismatch {
            id: id.batch_size(),
            batch: batch.len(),
        });
    }
    let mut payload = bitvec![u8, Msb0; 0; b + id.r_max() as usize];
    for p in batch {
        let shift = id.padding()[p.index - 1] as usize;
        let dst = &mut payload[shift..shift + b];
        *dst ^= p.payload.as_bitslice();
        *ops += b as u64;
    }
    Ok(CodedPacket {
        id: id.clone(),
        payload,
        batch_bits: b,
    })
}

#[derive(Debug, Clone, Copy, Default)]
struct Equation {
    rhs: bool,
    unknowns: u32,
    var_xor: u32,
}

#[derive(Debug, Clone)]
struct Received {
    id: TriId,
    eqs: Vec<Equation>,
}

/// Result of one [`Decoder::push`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DecodeProgress {
    pub newly_solved_bits: usize,
    /// 1-based indices of every packet recovered so far.
    pub fully_decoded_packets: BTreeSet<usize>,
    pub complete: bool,
    /// The packet's id had already been pushed; nothing was added.
    pub redundant: bool,
}

/// An equation left with two or more unknowns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidualEquation {
    pub seq: u64,
    /// 0-based column within the coded payload.
    pub column: usize,
    /// Unknown bits as (1-based packet, 1-based bit).
    pub unknowns: Vec<(usize, usize)>,
    pub rhs: bool,
}

/// The unsolved part of a stalled system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Residual {
    pub ids: Vec<TriId>,
    pub unknown_bits: usize,
    pub equations: Vec<ResidualEquation>,
}

impl fmt::Display for Residual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} unknown bits and {} open equations remain for ids [",
            self.unknown_bits,
            self.equations.len()
        )?;
        for (i, id) in self.ids.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{id}")?;
        }
        f.write_str("]")
    }
}

/// Progressive peeling decoder for one batch.
///
/// After a [`DecodeError::Stall`] the decoder stays usable and further
/// packets may complete it. After a contradiction it is poisoned.
#[derive(Debug, Clone)]
pub struct Decoder {
    m: usize,
    b: usize,
    received: Vec<Received>,
    seen: HashSet<Vec<u64>>,
    uncoded: Vec<bool>,
    values: Vec<Option<bool>>,
    solved: usize,
    solved_per_packet: Vec<usize>,
    equations_solved: usize,
    queue: Vec<(usize, usize)>,
    ops: u64,
    poisoned: bool,
}

impl Decoder {
    pub fn new(m: usize, b: usize) -> Self {
        assert!(m >= 1 && b >= 1, "batch size and payload length must be positive");
        Decoder {
            m,
            b,
            received: Vec::new(),
            seen: HashSet::new(),
            uncoded: vec![false; m],
            values: vec![None; m * b],
            solved: 0,
            solved_per_packet: vec![0; m],
            equations_solved: 0,
            queue: Vec::new(),
            ops: 0,
            poisoned: false,
        }
    }

    pub fn batch_size(&self) -> usize {
        self.m
    }

    pub fn payload_bits(&self) -> usize {
        self.b
    }

    /// Number of distinct coded ids and uncoded packets accepted.
    pub fn distinct_received(&self) -> usize {
        self.received.len() + self.uncoded.iter().filter(|&&u| u).count()
    }

    pub fn is_complete(&self) -> bool {
        self.solved == self.m * self.b
    }

    pub fn solved_bits(&self) -> usize {
        self.solved
    }

    /// Bits solved through a single-unknown equation (as opposed to an
    /// uncoded packet).
    pub fn equations_solved(&self) -> usize {
        self.equations_solved
    }

    /// Substitution operations performed so far.
    pub fn ops(&self) -> u64 {
        self.ops
    }

    /// Value of bit `bit` (0-based) of packet `index` (1-based), if solved.
    pub fn bit(&self, index: usize, bit: usize) -> Option<bool> {
        self.values[(index - 1) * self.b + bit]
    }

    fn progress(&self, newly: usize, redundant: bool) -> DecodeProgress {
        DecodeProgress {
            newly_solved_bits: newly,
            fully_decoded_packets: self
                .solved_per_packet
                .iter()
                .enumerate()
                .filter(|&(_, &n)| n == self.b)
                .map(|(i, _)| i + 1)
                .collect(),
            complete: self.is_complete(),
            redundant,
        }
    }

    /// Adds a coded packet and peels to a fixpoint.
    pub fn push(&mut self, pkt: CodedPacket) -> Result<DecodeProgress, DecodeError> {
        let progress = self.absorb(pkt)?;
        if !progress.complete && !progress.redundant && self.distinct_received() >= self.m {
            return Err(DecodeError::Stall(Box::new(self.residual())));
        }
        Ok(progress)
    }

    /// As [`Decoder::push`], but an incomplete system is not an error.
    pub fn absorb(&mut self, pkt: CodedPacket) -> Result<DecodeProgress, DecodeError> {
        if self.poisoned {
            return Err(DecodeError::Poisoned);
        }
        if pkt.id.batch_size() != self.m {
            return Err(CodecError::BatchSizeMismatch {
                id: pkt.id.batch_size(),
                batch: self.m,
            }
            .into());
        }
        if pkt.batch_bits != self.b {
            return Err(CodecError::LengthMismatch {
                index: 0,
                expected: self.b,
                got: pkt.batch_bits,
            }
            .into());
        }
        let len = self.b + pkt.id.r_max() as usize;
        if pkt.payload.len() != len {
            return Err(DecodeError::PayloadLength {
                id: pkt.id.to_string(),
                expected: len,
                got: pkt.payload.len(),
            });
        }
        if !self.seen.insert(pkt.id.padding().to_vec()) {
            return Ok(self.progress(0, true));
        }
        let before = self.solved;

        let mut eqs: Vec<Equation> = pkt
            .payload
            .iter()
            .by_vals()
            .map(|rhs| Equation {
                rhs,
                ..Equation::default()
            })
            .collect();
        for (m, &shift) in pkt.id.padding().iter().enumerate() {
            let shift = shift as usize;
            for i in 0..self.b {
                let var = m * self.b + i;
                let eq = &mut eqs[shift + i];
                match self.values[var] {
                    Some(v) => {
                        eq.rhs ^= v;
                        self.ops += 1;
                    }
                    None => {
                        eq.unknowns += 1;
                        eq.var_xor ^= var as u32;
                    }
                }
            }
        }
        let slot = self.received.len();
        let seq = pkt.id.seq().get();
        for (col, eq) in eqs.iter().enumerate() {
            match eq.unknowns {
                0 if eq.rhs => {
                    self.poisoned = true;
                    return Err(DecodeError::Contradiction { seq });
                }
                1 => self.queue.push((slot, col)),
                _ => {}
            }
        }
        self.received.push(Received { id: pkt.id, eqs });
        self.peel()?;

        Ok(self.progress(self.solved - before, false))
    }

    /// Accepts an uncoded original packet; for `m = 1` this is the only
    /// way to complete a batch.
    pub fn push_uncoded(&mut self, pkt: &Packet) -> Result<DecodeProgress, DecodeError> {
        if self.poisoned {
            return Err(DecodeError::Poisoned);
        }
        if pkt.index == 0 || pkt.index > self.m {
            return Err(CodecError::BadIndices(self.m).into());
        }
        if pkt.payload.len() != self.b {
            return Err(CodecError::LengthMismatch {
                index: pkt.index,
                expected: self.b,
                got: pkt.payload.len(),
            }
            .into());
        }
        if std::mem::replace(&mut self.uncoded[pkt.index - 1], true) {
            return Ok(self.progress(0, true));
        }
        let before = self.solved;
        for (i, bit) in pkt.payload.iter().by_vals().enumerate() {
            let var = (pkt.index - 1) * self.b + i;
            match self.values[var] {
                Some(v) if v != bit => {
                    self.poisoned = true;
                    return Err(DecodeError::Contradiction { seq: 0 });
                }
                Some(_) => {}
                None => self.assign(var, bit)?,
            }
        }
        self.peel()?;
        Ok(self.progress(self.solved - before, false))
    }

    fn peel(&mut self) -> Result<(), DecodeError> {
        while let Some((slot, col)) = self.queue.pop() {
            let eq = self.received[slot].eqs[col];
            if eq.unknowns != 1 {
                continue;
            }
            self.equations_solved += 1;
            self.assign(eq.var_xor as usize, eq.rhs)?;
        }
        Ok(())
    }

    fn assign(&mut self, var: usize, value: bool) -> Result<(), DecodeError> {
        debug_assert!(self.values[var].is_none());
        self.values[var] = Some(value);
        self.solved += 1;
        self.solved_per_packet[var / self.b] += 1;
        let (m, i) = (var / self.b, var % self.b);
        for (slot, rec) in self.received.iter_mut().enumerate() {
            let col = i + rec.id.padding()[m] as usize;
            let eq = &mut rec.eqs[col];
            eq.rhs ^= value;
            eq.unknowns -= 1;
            eq.var_xor ^= var as u32;
            self.ops += 1;
            match eq.unknowns {
                0 if eq.rhs => {
                    self.poisoned = true;
                    return Err(DecodeError::Contradiction {
                        seq: rec.id.seq().get(),
                    });
                }
                1 => self.queue.push((slot, col)),
                _ => {}
            }
        }
        Ok(())
    }

    fn residual(&self) -> Residual {
        let mut equations = Vec::new();
        for rec in &self.received {
            for (col, eq) in rec.eqs.iter().enumerate() {
                if eq.unknowns < 2 {
                    continue;
                }
                let unknowns = rec
                    .id
                    .padding()
                    .iter()
                    .enumerate()
                    .filter_map(|(m, &shift)| {
                        let i = col.checked_sub(shift as usize)?;
                        (i < self.b && self.values[m * self.b + i].is_none())
                            .then_some((m + 1, i + 1))
                    })
                    .collect();
                equations.push(ResidualEquation {
                    seq: rec.id.seq().get(),
                    column: col,
                    unknowns,
                    rhs: eq.rhs,
                });
            }
        }
        Residual {
            ids: self.received.iter().map(|r| r.id.clone()).collect(),
            unknown_bits: self.m * self.b - self.solved,
            equations,
        }
    }

    /// The recovered batch, once complete.
    pub fn packets(&self) -> Option<Vec<Packet>> {
        if !self.is_complete() {
            return None;
        }
        Some(
            self.values
                .chunks(self.b)
                .enumerate()
                .map(|(m, bits)| {
                    Packet::new(m + 1, bits.iter().map(|v| v.expect("complete")).collect())
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeOutcome {
    pub packets: Vec<Packet>,
    pub ops: u64,
}

/// Decodes a whole set of coded packets; duplicates are ignored.
pub fn decode_all(m: usize, b: usize, pkts: &[CodedPacket]) -> Result<DecodeOutcome, DecodeError> {
    let distinct: HashSet<&[u64]> = pkts.iter().map(|p| p.id.padding()).collect();
    if distinct.len() < m {
        return Err(DecodeError::Insufficient {
            distinct: distinct.len(),
            m,
        });
    }
    let mut dec = Decoder::new(m, b);
    let mut last_stall = None;
    for p in pkts {
        match dec.push(p.clone()) {
            Ok(progress) if progress.complete => break,
            Ok(_) => {}
            Err(DecodeError::Stall(r)) => last_stall = Some(r),
            Err(e) => return Err(e),
        }
    }
    match dec.packets() {
        Some(packets) => Ok(DecodeOutcome {
            packets,
            ops: dec.ops(),
        }),
        None => Err(DecodeError::Stall(
            last_stall.unwrap_or_else(|| Box::new(dec.residual())),
        )),
    }
}
