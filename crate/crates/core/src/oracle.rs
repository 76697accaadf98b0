//! Independent decodability oracles.
//!
//! [`lambda_rank`] treats shifting as multiplication by powers of two and
//! computes the exact rank of the integer coefficient matrix. [`bit_solvable`]
//! writes every coded column as a GF(2) row over the `M * B` unknown bits and
//! runs plain Gaussian elimination. Neither shares code with the peeling
//! decoder.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::ids::TriId;

pub mod suite;

/// Batch sizes beyond this are out of scope for the oracles.
pub const MAX_ORACLE_BATCH: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("no ids given")]
    Empty,
    #[error("ids mix batch sizes {0} and {1}")]
    MixedBatch(usize, usize),
    #[error("batch size {0} exceeds the oracle limit")]
    TooLarge(usize),
    #[error("ids do not form one complete group")]
    NotAGroup,
    #[error("probe {0} belongs to the group itself")]
    SameGroup(String),
    #[error("probe {0} shares the group's zero anchor; the condition does not apply")]
    NotApplicable(String),
}

fn common_batch(ids: &[TriId]) -> Result<usize, OracleError> {
    let m = ids.first().ok_or(OracleError::Empty)?.batch_size();
    if let Some(other) = ids.iter().find(|id| id.batch_size() != m) {
        return Err(OracleError::MixedBatch(m, other.batch_size()));
    }
    if m > MAX_ORACLE_BATCH {
        return Err(OracleError::TooLarge(m));
    }
    Ok(m)
}

/// Rows `λ_m = 2^(r_max - r_m)`, one per id, each with its own `r_max`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LambdaMatrix {
    rows: Vec<Vec<BigInt>>,
}

impl LambdaMatrix {
    pub fn from_ids(ids: &[TriId]) -> Result<Self, OracleError> {
        common_batch(ids)?;
        Ok(LambdaMatrix {
            rows: ids.iter().map(lambda_row).collect(),
        })
    }

    pub fn rows(&self) -> &[Vec<BigInt>] {
        &self.rows
    }

    /// Exact rank, using `i128` while intermediates fit.
    pub fn rank(&self) -> usize {
        let small: Option<Vec<Vec<i128>>> = self
            .rows
            .iter()
            .map(|row| row.iter().map(|v| i128::try_from(v).ok()).collect())
            .collect();
        small
            .and_then(bareiss_rank_i128)
            .unwrap_or_else(|| bareiss_rank_big(self.rows.clone()))
    }
}

pub fn lambda_row(id: &TriId) -> Vec<BigInt> {
    let r_max = id.r_max();
    id.padding()
        .iter()
        .map(|&r| BigInt::one() << (r_max - r))
        .collect()
}

/// Fraction-free elimination; `None` on `i128` overflow.
pub(crate) fn bareiss_rank_i128(mut a: Vec<Vec<i128>>) -> Option<usize> {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let mut prev: i128 = 1;
    let mut rank = 0;
    for col in 0..cols {
        let Some(p) = (rank..rows).find(|&r| a[r][col] != 0) else {
            continue;
        };
        a.swap(rank, p);
        let pivot = a[rank][col];
        for i in rank + 1..rows {
            let lead = a[i][col];
            for j in col + 1..cols {
                let x = pivot.checked_mul(a[i][j])?;
                let y = lead.checked_mul(a[rank][j])?;
                a[i][j] = x.checked_sub(y)? / prev;
            }
            a[i][col] = 0;
        }
        prev = pivot;
        rank += 1;
    }
    Some(rank)
}

fn bareiss_rank_big(mut a: Vec<Vec<BigInt>>) -> usize {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let mut prev = BigInt::one();
    let mut rank = 0;
    for col in 0..cols {
        let Some(p) = (rank..rows).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(rank, p);
        let pivot = a[rank][col].clone();
        for i in rank + 1..rows {
            let lead = a[i][col].clone();
            for j in col + 1..cols {
                let v = (&pivot * &a[i][j] - &lead * &a[rank][j]) / &prev;
                a[i][j] = v;
            }
            a[i][col] = BigInt::zero();
        }
        prev = pivot;
        rank += 1;
    }
    rank
}

/// Exact rank of the λ-matrix of `ids`.
pub fn lambda_rank(ids: &[TriId]) -> Result<usize, OracleError> {
    Ok(LambdaMatrix::from_ids(ids)?.rank())
}

/// Evaluates the determinant condition for `probe` against one complete
/// group.
///
/// Subtracting consecutive rows of a round-`ρ` group (upper times `2^ρ`)
/// leaves rows `A·c_anchor + C·c_j` with `A = 2^r_max (2^ρ - 1)` and
/// `C = 2^r_max - 1`. The probe is independent of them iff
/// `A · Σ_{j≠anchor} λ_j ≠ C · λ_anchor`. For round 1 this is
/// `2^(M-1) Σ λ_j ≠ (2^(M-1) - 1) λ_anchor`.
pub fn lemma2_condition(group: &[TriId], probe: &TriId) -> Result<bool, OracleError> {
    let m = common_batch(group)?;
    if probe.batch_size() != m {
        return Err(OracleError::MixedBatch(m, probe.batch_size()));
    }
    let first = &group[0];
    let (round, anchor) = (first.round(), first.group());
    let mut rotations: Vec<usize> = group
        .iter()
        .filter(|id| id.round() == round && id.group() == anchor)
        .map(TriId::rotation)
        .collect();
    rotations.sort_unstable();
    rotations.dedup();
    if group.len() != m - 1 || rotations.len() != m - 1 {
        return Err(OracleError::NotAGroup);
    }
    if probe.group() == anchor {
        if probe.round() == round {
            return Err(OracleError::SameGroup(probe.to_string()));
        }
        return Err(OracleError::NotApplicable(probe.to_string()));
    }

    let scale = BigInt::one() << first.r_max();
    let a = &scale * ((BigInt::one() << round) - 1u32);
    let c = &scale - 1u32;
    let lambda = lambda_row(probe);
    let rest: BigInt = lambda
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != anchor)
        .map(|(_, v)| v)
        .sum();
    Ok(a * rest != c * &lambda[anchor])
}

/// GF(2) rows over the `M * B` unknown bits; unknown `(m, i)` (0-based) is
/// column `m * B + i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMatrix {
    cols: usize,
    words: usize,
    rows: Vec<Vec<u64>>,
}

impl BitMatrix {
    pub fn new(cols: usize) -> Self {
        BitMatrix {
            cols,
            words: cols.div_ceil(64),
            rows: Vec::new(),
        }
    }

    /// One row per coded column of every id.
    pub fn for_ids(m: usize, b: usize, ids: &[TriId]) -> Result<Self, OracleError> {
        if !ids.is_empty() && common_batch(ids)? != m {
            return Err(OracleError::MixedBatch(m, ids[0].batch_size()));
        }
        let mut mat = BitMatrix::new(m * b);
        for id in ids {
            for col in 0..b + id.r_max() as usize {
                let mut row = vec![0u64; mat.words];
                for (k, &r) in id.padding().iter().enumerate() {
                    let r = r as usize;
                    if col >= r && col - r < b {
                        let var = k * b + col - r;
                        row[var / 64] |= 1 << (var % 64);
                    }
                }
                mat.rows.push(row);
            }
        }
        Ok(mat)
    }

    pub fn push_row(&mut self, set: &[usize]) {
        let mut row = vec![0u64; self.words];
        for &v in set {
            assert!(v < self.cols);
            row[v / 64] ^= 1 << (v % 64);
        }
        self.rows.push(row);
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    fn reduced(&self) -> (Vec<Vec<u64>>, Vec<usize>) {
        let mut rows = self.rows.clone();
        let mut pivots = Vec::new();
        let mut rank = 0;
        for col in 0..self.cols {
            let (w, bit) = (col / 64, 1u64 << (col % 64));
            let Some(p) = (rank..rows.len()).find(|&r| rows[r][w] & bit != 0) else {
                continue;
            };
            rows.swap(rank, p);
            let pivot = rows[rank].clone();
            for (i, row) in rows.iter_mut().enumerate() {
                if i != rank && row[w] & bit != 0 {
                    row.iter_mut().zip(&pivot).for_each(|(x, y)| *x ^= y);
                }
            }
            pivots.push(col);
            rank += 1;
        }
        rows.truncate(rank);
        (rows, pivots)
    }

    pub fn rank(&self) -> usize {
        self.reduced().1.len()
    }

    /// Number of unknowns whose value the rows pin down.
    pub fn determined(&self) -> usize {
        let (rows, _) = self.reduced();
        rows.iter()
            .filter(|row| row.iter().map(|w| w.count_ones()).sum::<u32>() == 1)
            .count()
    }
}

/// True iff the coded columns of `ids` determine all `M * B` bits.
pub fn bit_solvable(m: usize, b: usize, ids: &[TriId]) -> Result<bool, OracleError> {
    Ok(BitMatrix::for_ids(m, b, ids)?.rank() == m * b)
}

/// Count of original bits the coded columns of `ids` determine.
pub fn bit_determined(m: usize, b: usize, ids: &[TriId]) -> Result<usize, OracleError> {
    Ok(BitMatrix::for_ids(m, b, ids)?.determined())
}
