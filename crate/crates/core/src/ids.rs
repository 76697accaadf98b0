//! Triangular coding coefficient ids.
//!
//! Every coded packet is identified by a padding vector `(r_1, ..., r_M)`:
//! packet `m` is shifted by `r_m` bits before being XORed into the coded
//! payload. The transmitter walks an unbounded, feedback-free sequence of such
//! vectors. A round of `M(M-1)` ids is split into `M` groups, one per position
//! of the zero entry; within a group the remaining values `1..M-1` rotate
//! rightward. Round `ρ` is the round-1 pattern scaled by `ρ`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IdError {
    #[error("batch size {0} is too small for coded ids (need at least 2)")]
    BatchTooSmall(usize),
    #[error("sequence numbers start at 1")]
    ZeroSequence,
    #[error("sequence number overflows for batch size {0}")]
    Overflow(usize),
    #[error("padding vector {0:?} is not part of the id sequence: {1}")]
    NotInSequence(Vec<u64>, &'static str),
}

/// 1-based position in the id sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SeqNumber(u64);

impl SeqNumber {
    pub fn new(a: u64) -> Result<Self, IdError> {
        if a == 0 {
            return Err(IdError::ZeroSequence);
        }
        Ok(SeqNumber(a))
    }

    pub fn get(self) -> u64 {
        self.0
    }
}

impl fmt::Display for SeqNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// One coefficient set `(r_1, ..., r_M)` together with its position in the
/// sequence (round, group, rotation).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TriId {
    r: Vec<u64>,
    round: u64,
    group: usize,
    rotation: usize,
}

fn ids_per_round(m: usize) -> Result<u64, IdError> {
    (m as u64)
        .checked_mul(m as u64 - 1)
        .ok_or(IdError::Overflow(m))
}

impl TriId {
    /// The `a`-th id of the sequence for batch size `m`.
    pub fn at(m: usize, a: SeqNumber) -> Result<TriId, IdError> {
        if m < 2 {
            return Err(IdError::BatchTooSmall(m));
        }
        let per_round = ids_per_round(m)?;
        let offset = a.0 - 1;
        let round = offset / per_round + 1;
        let within = offset % per_round;
        let group = (within / (m as u64 - 1)) as usize;
        let rotation = (within % (m as u64 - 1)) as usize;
        TriId::from_parts(m, round, group, rotation)
    }

    /// Builds the id for an explicit (round, group, rotation) triple.
    pub fn from_parts(
        m: usize,
        round: u64,
        group: usize,
        rotation: usize,
    ) -> Result<TriId, IdError> {
        if m < 2 {
            return Err(IdError::BatchTooSmall(m));
        }
        if round == 0 {
            return Err(IdError::ZeroSequence);
        }
        round
            .checked_mul(m as u64 - 1)
            .ok_or(IdError::Overflow(m))?;
        if group >= m || rotation >= m - 1 {
            let r = Vec::new();
            return Err(IdError::NotInSequence(r, "group or rotation out of range"));
        }
        let span = m - 1;
        let mut r = vec![0u64; m];
        for (i, pos) in (0..m).filter(|&p| p != group).enumerate() {
            let base = (i + span - rotation) % span + 1;
            r[pos] = round * base as u64;
        }
        Ok(TriId {
            r,
            round,
            group,
            rotation,
        })
    }

    /// Recovers an id from its padding vector, rejecting vectors the sequence
    /// never produces.
    pub fn from_padding(r: Vec<u64>) -> Result<TriId, IdError> {
        let m = r.len();
        if m < 2 {
            return Err(IdError::BatchTooSmall(m));
        }
        let mut zeros = r.iter().enumerate().filter(|(_, &v)| v == 0);
        let group = match (zeros.next(), zeros.next()) {
            (Some((g, _)), None) => g,
            (None, _) => return Err(IdError::NotInSequence(r, "no zero anchor")),
            _ => return Err(IdError::NotInSequence(r, "more than one zero entry")),
        };
        let span = m - 1;
        let r_max = *r.iter().max().expect("m >= 2");
        if r_max % span as u64 != 0 {
            return Err(IdError::NotInSequence(r, "maximum is not a multiple of M-1"));
        }
        let round = r_max / span as u64;
        let mut scaled = Vec::with_capacity(span);
        for (pos, &v) in r.iter().enumerate() {
            if pos == group {
                continue;
            }
            if v % round != 0 {
                return Err(IdError::NotInSequence(r, "entry not divisible by the round"));
            }
            scaled.push((v / round) as usize);
        }
        // value at non-anchored index i is ((i - t) mod (M-1)) + 1
        let rotation = (span - (scaled[0] - 1)) % span;
        let expected = TriId::from_parts(m, round, group, rotation)?;
        if expected.r != r {
            return Err(IdError::NotInSequence(r, "values are not a rotation of the base pattern"));
        }
        Ok(expected)
    }

    pub fn batch_size(&self) -> usize {
        self.r.len()
    }

    pub fn padding(&self) -> &[u64] {
        &self.r
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    /// Position of the zero entry.
    pub fn group(&self) -> usize {
        self.group
    }

    pub fn rotation(&self) -> usize {
        self.rotation
    }

    /// Largest padding, `round * (M - 1)`; the coded payload is this many bits
    /// longer than the originals.
    pub fn r_max(&self) -> u64 {
        self.round * (self.r.len() as u64 - 1)
    }

    pub fn seq(&self) -> SeqNumber {
        let m = self.r.len() as u64;
        SeqNumber(
            (self.round - 1) * m * (m - 1)
                + self.group as u64 * (m - 1)
                + self.rotation as u64
                + 1,
        )
    }
}

impl fmt::Display for TriId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, v) in self.r.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

pub fn id_at(m: usize, a: u64) -> Result<TriId, IdError> {
    TriId::at(m, SeqNumber::new(a)?)
}

/// Inverse of [`id_at`] on raw padding vectors.
pub fn seq_of(r: &[u64]) -> Result<SeqNumber, IdError> {
    TriId::from_padding(r.to_vec()).map(|id| id.seq())
}

/// The first `count` ids of the sequence.
pub fn ids_needed(m: usize, count: usize) -> Result<Vec<TriId>, IdError> {
    IdSequence::new(m)?.take(count).collect()
}

/// Unbounded iterator over the id sequence, starting at `a = 1`.
#[derive(Debug, Clone)]
pub struct IdSequence {
    m: usize,
    next: u64,
}

impl IdSequence {
    pub fn new(m: usize) -> Result<Self, IdError> {
        if m < 2 {
            return Err(IdError::BatchTooSmall(m));
        }
        Ok(IdSequence { m, next: 1 })
    }
}

impl Iterator for IdSequence {
    type Item = Result<TriId, IdError>;

    fn next(&mut self) -> Option<Self::Item> {
        let a = self.next;
        self.next = self.next.checked_add(1)?;
        Some(TriId::at(self.m, SeqNumber(a)))
    }
}
