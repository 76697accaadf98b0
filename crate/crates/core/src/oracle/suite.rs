//! Exhaustive and sampled property checks over the id sequence.
//!
//! Each check walks id subsets of one batch size and records the first
//! failing subset it meets.

use bitvec::prelude::*;
use itertools::Itertools;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{bareiss_rank_i128, lambda_rank, BitMatrix};
use crate::codec::{CodedPacket, DecodeError, Decoder};
use crate::ids::{ids_needed, TriId};

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    /// Largest batch size walked exhaustively; larger ones are sampled.
    pub exhaustive_max: usize,
    pub samples: usize,
    pub seed: u64,
    pub payload_bits: Vec<usize>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            exhaustive_max: 5,
            samples: 100_000,
            seed: 0x5EED,
            payload_bits: vec![1, 7, 64],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: &'static str,
    pub m: usize,
    pub cases: u64,
    pub failures: u64,
    pub counterexample: Option<Vec<TriId>>,
}

impl Check {
    fn new(name: &'static str, m: usize) -> Self {
        Check {
            name,
            m,
            cases: 0,
            failures: 0,
            counterexample: None,
        }
    }

    fn record(&mut self, ok: bool, ids: impl FnOnce() -> Vec<TriId>) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            if self.counterexample.is_none() {
                self.counterexample = Some(ids());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn group(m: usize, round: u64, g: usize) -> Vec<TriId> {
    (0..m - 1)
        .map(|t| TriId::from_parts(m, round, g, t).expect("valid group"))
        .collect()
}

/// First `2 M (M-1)` ids: rounds 1 and 2.
pub fn pool(m: usize) -> Vec<TriId> {
    ids_needed(m, 2 * m * (m - 1)).expect("m >= 2")
}

/// Every complete round-1 group has λ-rank `M - 1`.
pub fn group_rank(m: usize) -> Check {
    let mut check = Check::new("group-rank", m);
    for g in 0..m {
        let set = group(m, 1, g);
        let ok = lambda_rank(&set).expect("valid ids") == m - 1;
        check.record(ok, || set.clone());
    }
    check
}

/// Every round-1 group plus one other id from rounds 1-2 has λ-rank `M`.
pub fn group_plus_one(m: usize) -> Check {
    let mut check = Check::new("group-plus-one", m);
    let all = pool(m);
    for g in 0..m {
        let set = group(m, 1, g);
        for probe in all.iter().filter(|id| !set.contains(id)) {
            let mut with = set.clone();
            with.push(probe.clone());
            let ok = lambda_rank(&with).expect("valid ids") == m;
            check.record(ok, || with.clone());
        }
    }
    check
}

/// Index subsets of `pool` with `1..=M` elements: all of them up to
/// `exhaustive_max`, otherwise `samples` random ones of size `2..=M`.
fn subsets(m: usize, pool_len: usize, cfg: &SuiteConfig) -> Box<dyn Iterator<Item = Vec<usize>>> {
    if m <= cfg.exhaustive_max {
        Box::new((1..=m).flat_map(move |n| (0..pool_len).combinations(n)))
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ m as u64);
        let samples = cfg.samples;
        Box::new((0..samples).map(move |_| {
            let n = rng.gen_range(2..=m);
            let mut idx = sample(&mut rng, pool_len, n).into_vec();
            idx.sort_unstable();
            idx
        }))
    }
}

fn lambda_rows(ids: &[&TriId]) -> Option<Vec<Vec<i128>>> {
    ids.iter()
        .map(|id| {
            let r_max = id.r_max();
            if r_max >= 126 {
                return None;
            }
            Some(id.padding().iter().map(|&r| 1i128 << (r_max - r)).collect())
        })
        .collect()
}

fn full_rank(ids: &[&TriId]) -> bool {
    let rank = match lambda_rows(ids).and_then(bareiss_rank_i128) {
        Some(rank) => rank,
        None => {
            let owned: Vec<TriId> = ids.iter().map(|&id| id.clone()).collect();
            lambda_rank(&owned).expect("valid ids")
        }
    };
    rank == ids.len()
}

/// Every subset of at most `M` pool ids has full λ-rank.
pub fn innovativeness(m: usize, cfg: &SuiteConfig) -> Check {
    let mut check = Check::new("innovativeness", m);
    let all = pool(m);
    for idx in subsets(m, all.len(), cfg) {
        let set: Vec<&TriId> = idx.iter().map(|&i| &all[i]).collect();
        check.record(full_rank(&set), || set.iter().map(|&id| id.clone()).collect());
    }
    check
}

/// Runs the peeling decoder on all-zero payloads. Returns whether it
/// finished and whether it ever reported a stall.
pub fn peel(m: usize, b: usize, ids: &[&TriId]) -> (bool, bool) {
    let mut dec = Decoder::new(m, b);
    let mut stalled = false;
    for &id in ids {
        let pkt = CodedPacket {
            id: id.clone(),
            payload: bitvec![u8, Msb0; 0; b + id.r_max() as usize],
            batch_bits: b,
        };
        match dec.push(pkt) {
            Ok(_) => {}
            Err(DecodeError::Stall(_)) => stalled = true,
            Err(e) => panic!("zero payloads cannot contradict: {e}"),
        }
    }
    (dec.is_complete(), stalled)
}

/// GF(2) elimination over the coded columns.
pub fn gf2_solvable(m: usize, b: usize, ids: &[&TriId]) -> bool {
    let rows: usize = ids.iter().map(|id| b + id.r_max() as usize).sum();
    if rows < m * b {
        return false;
    }
    let owned: Vec<TriId> = ids.iter().map(|&id| id.clone()).collect();
    BitMatrix::for_ids(m, b, &owned).expect("valid ids").rank() == m * b
}

/// Peeling success agrees with the GF(2) oracle on every subset and payload
/// length.
pub fn peeling_matches_oracle(m: usize, cfg: &SuiteConfig) -> Check {
    let mut check = Check::new("peeling-matches-oracle", m);
    let all = pool(m);
    for idx in subsets(m, all.len(), cfg) {
        let set: Vec<&TriId> = idx.iter().map(|&i| &all[i]).collect();
        for &b in &cfg.payload_bits {
            let ok = peel(m, b, &set).0 == gf2_solvable(m, b, &set);
            check.record(ok, || set.iter().map(|&id| id.clone()).collect());
        }
    }
    check
}

/// Every `M`-subset of the pool decodes fully without a stall.
pub fn any_m_decode(m: usize, cfg: &SuiteConfig) -> Check {
    let mut check = Check::new("any-m-decode", m);
    let all = pool(m);
    for idx in subsets(m, all.len(), cfg).filter(|idx| idx.len() == m) {
        let set: Vec<&TriId> = idx.iter().map(|&i| &all[i]).collect();
        for &b in &cfg.payload_bits {
            let (complete, stalled) = peel(m, b, &set);
            check.record(complete && !stalled, || {
                set.iter().map(|&id| id.clone()).collect()
            });
        }
    }
    check
}

/// The λ-rank checks for every batch size in `2..=m_max`.
pub fn run_suite(m_max: usize, cfg: &SuiteConfig) -> Vec<Check> {
    let mut out = Vec::new();
    for m in 2..=m_max {
        out.push(group_rank(m));
        out.push(group_plus_one(m));
        out.push(innovativeness(m, cfg));
    }
    out
}
