//! Transmission schemes the simulator can drive, and the registry that
//! resolves them by name.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{alpha_required, LossProfile};
use crate::codec::{encode_counted, CodedPacket, Decoder, Packet};
use crate::ids::IdSequence;
use crate::rlnc::{rlnc_encode, RlncCodedPacket, RlncDecoder};

use super::SimError;

/// Shape of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSetup {
    pub m: usize,
    pub payload_bits: usize,
    pub receivers: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub encoder: u64,
    pub decoder: u64,
}

impl std::ops::AddAssign for OpCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.encoder += rhs.encoder;
        self.decoder += rhs.decoder;
    }
}

/// Options a factory may read.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SchemeParams {
    /// Field exponent for schemes over GF(2^q).
    pub q: Option<u8>,
}

/// A multicast transmission scheme.
pub trait Scheme: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    /// Value for the `q_alpha` column of a sweep row.
    fn sweep_param(&self, _m: usize, _profile: &LossProfile) -> String {
        String::new()
    }

    fn start(&self, setup: &TrialSetup, rng: &mut ChaCha8Rng) -> Result<Box<dyn Trial>, SimError>;
}

/// Transmitter plus receivers for one trial.
pub trait Trial {
    /// Produces the next packet on the channel.
    fn transmit(&mut self, rng: &mut ChaCha8Rng) -> Result<(), SimError>;

    /// Hands the current packet to `receiver`; true once it can decode.
    fn deliver(&mut self, receiver: usize) -> Result<bool, SimError>;

    fn ops(&self) -> OpCounts;

    /// Times a receiver held `M` or more distinct packets and still could
    /// not finish.
    fn stalls(&self) -> u64 {
        0
    }
}

pub type SchemeFactory = fn(&SchemeParams) -> Result<Box<dyn Scheme>, SimError>;

/// Name → factory table.
#[derive(Clone)]
pub struct SchemeRegistry {
    factories: BTreeMap<String, SchemeFactory>,
}

impl fmt::Debug for SchemeRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

impl Default for SchemeRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl SchemeRegistry {
    pub fn empty() -> Self {
        SchemeRegistry {
            factories: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        reg.register("triangular", |_| Ok(Box::new(TriangularScheme)));
        reg.register("rlnc", |params| {
            let q = params.q.unwrap_or(8);
            crate::gf::Field::new(q).map_err(|e| SimError::Config(e.to_string()))?;
            Ok(Box::new(RlncScheme { q, name: format!("rlnc(q={q})") }))
        });
        reg.register("arq-roundrobin", |_| Ok(Box::new(ArqScheme)));
        reg.register("oracle-perfect", |_| Ok(Box::new(OraclePerfect)));
        reg
    }

    pub fn register(&mut self, name: &str, factory: SchemeFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, name: &str, params: &SchemeParams) -> Result<Box<dyn Scheme>, SimError> {
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| SimError::UnknownScheme(name.to_string()))?;
        factory(params)
    }
}

fn random_batch(rng: &mut ChaCha8Rng, setup: &TrialSetup) -> Vec<Packet> {
    (1..=setup.m)
        .map(|i| {
            Packet::new(
                i,
                (0..setup.payload_bits).map(|_| rng.gen::<bool>()).collect(),
            )
        })
        .collect()
}

/// Ids in sequence order `a = 1, 2, ...`, no feedback.
#[derive(Debug)]
pub struct TriangularScheme;

impl Scheme for TriangularScheme {
    fn name(&self) -> &str {
        "triangular"
    }

    fn sweep_param(&self, m: usize, profile: &LossProfile) -> String {
        alpha_required(profile.max_loss(), profile.worst_count(), m)
            .map(|a| a.to_string())
            .unwrap_or_default()
    }

    fn start(&self, setup: &TrialSetup, rng: &mut ChaCha8Rng) -> Result<Box<dyn Trial>, SimError> {
        let batch = random_batch(rng, setup);
        let ids = if setup.m >= 2 {
            Some(IdSequence::new(setup.m).map_err(|e| SimError::Config(e.to_string()))?)
        } else {
            None
        };
        Ok(Box::new(TriangularTrial {
            batch,
            ids,
            current: None,
            decoders: vec![Decoder::new(setup.m, setup.payload_bits); setup.receivers],
            encoder_ops: 0,
            stalls: 0,
        }))
    }
}

struct TriangularTrial {
    batch: Vec<Packet>,
    /// `None` for single-packet batches, which go out uncoded.
    ids: Option<IdSequence>,
    current: Option<CodedPacket>,
    decoders: Vec<Decoder>,
    encoder_ops: u64,
    stalls: u64,
}

impl Trial for TriangularTrial {
    fn transmit(&mut self, _rng: &mut ChaCha8Rng) -> Result<(), SimError> {
        if let Some(ids) = &mut self.ids {
            let id = ids
                .next()
                .ok_or(SimError::Exhausted)?
                .map_err(|e| SimError::Scheme(e.to_string()))?;
            let pkt = encode_counted(&self.batch, &id, &mut self.encoder_ops)
                .map_err(|e| SimError::Scheme(e.to_string()))?;
            self.current = Some(pkt);
        }
        Ok(())
    }

    fn deliver(&mut self, receiver: usize) -> Result<bool, SimError> {
        let dec = &mut self.decoders[receiver];
        let result = match &self.current {
            Some(pkt) => dec.absorb(pkt.clone()),
            None => dec.push_uncoded(&self.batch[0]),
        };
        let progress = result.map_err(|e| SimError::Scheme(e.to_string()))?;
        if !progress.complete && !progress.redundant && dec.distinct_received() >= dec.batch_size() {
            self.stalls += 1;
        }
        Ok(progress.complete)
    }

    fn ops(&self) -> OpCounts {
        OpCounts {
            encoder: self.encoder_ops,
            decoder: self.decoders.iter().map(Decoder::ops).sum(),
        }
    }

    fn stalls(&self) -> u64 {
        self.stalls
    }
}

/// Fresh uniform coefficients over GF(2^q) every transmission.
#[derive(Debug)]
pub struct RlncScheme {
    q: u8,
    name: String,
}

impl Scheme for RlncScheme {
    fn name(&self) -> &str {
        &self.name
    }

    fn sweep_param(&self, _m: usize, _profile: &LossProfile) -> String {
        self.q.to_string()
    }

    fn start(&self, setup: &TrialSetup, rng: &mut ChaCha8Rng) -> Result<Box<dyn Trial>, SimError> {
        let batch = random_batch(rng, setup);
        let decoder = RlncDecoder::new(setup.m, setup.payload_bits, self.q)
            .map_err(|e| SimError::Config(e.to_string()))?;
        Ok(Box::new(RlncTrial {
            q: self.q,
            batch,
            current: None,
            decoders: vec![decoder; setup.receivers],
            encoder_ops: 0,
        }))
    }
}

struct RlncTrial {
    q: u8,
    batch: Vec<Packet>,
    current: Option<RlncCodedPacket>,
    decoders: Vec<RlncDecoder>,
    encoder_ops: u64,
}

impl Trial for RlncTrial {
    fn transmit(&mut self, rng: &mut ChaCha8Rng) -> Result<(), SimError> {
        let pkt = rlnc_encode(&self.batch, self.q, rng, &mut self.encoder_ops)
            .map_err(|e| SimError::Scheme(e.to_string()))?;
        self.current = Some(pkt);
        Ok(())
    }

    fn deliver(&mut self, receiver: usize) -> Result<bool, SimError> {
        let pkt = self.current.as_ref().ok_or(SimError::Exhausted)?;
        let dec = &mut self.decoders[receiver];
        dec.push(pkt).map_err(|e| SimError::Scheme(e.to_string()))?;
        Ok(dec.is_complete())
    }

    fn ops(&self) -> OpCounts {
        OpCounts {
            encoder: self.encoder_ops,
            decoder: self.decoders.iter().map(RlncDecoder::ops).sum(),
        }
    }
}

/// Uncoded packets repeated round-robin.
#[derive(Debug)]
pub struct ArqScheme;

impl Scheme for ArqScheme {
    fn name(&self) -> &str {
        "arq-roundrobin"
    }

    fn start(&self, setup: &TrialSetup, _rng: &mut ChaCha8Rng) -> Result<Box<dyn Trial>, SimError> {
        Ok(Box::new(ArqTrial {
            m: setup.m,
            next: 0,
            current: 0,
            held: vec![vec![false; setup.m]; setup.receivers],
            counts: vec![0; setup.receivers],
        }))
    }
}

struct ArqTrial {
    m: usize,
    next: usize,
    current: usize,
    held: Vec<Vec<bool>>,
    counts: Vec<usize>,
}

impl Trial for ArqTrial {
    fn transmit(&mut self, _rng: &mut ChaCha8Rng) -> Result<(), SimError> {
        self.current = self.next;
        self.next = (self.next + 1) % self.m;
        Ok(())
    }

    fn deliver(&mut self, receiver: usize) -> Result<bool, SimError> {
        if !std::mem::replace(&mut self.held[receiver][self.current], true) {
            self.counts[receiver] += 1;
        }
        Ok(self.counts[receiver] == self.m)
    }

    fn ops(&self) -> OpCounts {
        OpCounts::default()
    }
}

/// Every reception is innovative: a receiver finishes at its `M`-th.
#[derive(Debug)]
pub struct OraclePerfect;

impl Scheme for OraclePerfect {
    fn name(&self) -> &str {
        "oracle-perfect"
    }

    fn start(&self, setup: &TrialSetup, _rng: &mut ChaCha8Rng) -> Result<Box<dyn Trial>, SimError> {
        Ok(Box::new(OracleTrial {
            m: setup.m,
            counts: vec![0; setup.receivers],
        }))
    }
}

struct OracleTrial {
    m: usize,
    counts: Vec<usize>,
}

impl Trial for OracleTrial {
    fn transmit(&mut self, _rng: &mut ChaCha8Rng) -> Result<(), SimError> {
        Ok(())
    }

    fn deliver(&mut self, receiver: usize) -> Result<bool, SimError> {
        self.counts[receiver] += 1;
        Ok(self.counts[receiver] >= self.m)
    }

    fn ops(&self) -> OpCounts {
        OpCounts::default()
    }
}
