//! Expected transmission counts and per-packet header overhead.
//!
//! `expected_tx_exact` sums, over `n = 0, 1, ...`, the probability that at
//! least one receiver has fewer than `M` receptions after `n` transmissions.
//! `expected_tx_approx` keeps only the `k` worst receivers, all at loss `p`.
//! Both sums stop once the summand drops below `epsilon` with `n >= M`; the
//! summand is non-increasing in `n`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::format::real;
use crate::wire;

pub const DEFAULT_EPSILON: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("loss probability {0} outside [0, 1)")]
    BadProbability(f64),
    #[error("no receivers")]
    NoReceivers,
    #[error("unknown scheme '{0}'")]
    UnknownScheme(String),
    #[error("{0}")]
    Precondition(&'static str),
}

/// Per-receiver iid Bernoulli loss probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct LossProfile {
    probs: Vec<f64>,
}

impl LossProfile {
    pub fn new(probs: Vec<f64>) -> Result<Self, AnalysisError> {
        if probs.is_empty() {
            return Err(AnalysisError::NoReceivers);
        }
        if let Some(&p) = probs.iter().find(|p| !(0.0..1.0).contains(*p)) {
            return Err(AnalysisError::BadProbability(p));
        }
        Ok(LossProfile { probs })
    }

    pub fn homogeneous(p: f64, n: usize) -> Result<Self, AnalysisError> {
        LossProfile::new(vec![p; n])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn receivers(&self) -> usize {
        self.probs.len()
    }

    pub fn max_loss(&self) -> f64 {
        self.probs.iter().copied().fold(0.0, f64::max)
    }

    /// Number of receivers at the maximum loss.
    pub fn worst_count(&self) -> usize {
        let p = self.max_loss();
        self.probs.iter().filter(|&&x| x == p).count()
    }
}

/// `P(Bin(n, 1-p) < M)` for `n = 0, 1, ...`, by the pmf recurrence over
/// `i < M`.
struct ShortfallSeq {
    success: f64,
    pmf: Vec<f64>,
}

impl ShortfallSeq {
    fn new(p: f64, m: usize) -> Self {
        let mut pmf = vec![0.0; m];
        pmf[0] = 1.0;
        ShortfallSeq {
            success: 1.0 - p,
            pmf,
        }
    }

    fn current(&self) -> f64 {
        self.pmf.iter().sum::<f64>().min(1.0)
    }

    fn step(&mut self) {
        let (s, f) = (self.success, 1.0 - self.success);
        for i in (1..self.pmf.len()).rev() {
            self.pmf[i] = self.pmf[i] * f + self.pmf[i - 1] * s;
        }
        self.pmf[0] *= f;
    }
}

fn truncated_sum(groups: &[(f64, usize)], m: usize, epsilon: f64) -> f64 {
    let mut seqs: Vec<(ShortfallSeq, f64)> = groups
        .iter()
        .map(|&(p, k)| (ShortfallSeq::new(p, m), k as f64))
        .collect();
    let mut total = 0.0;
    let mut n = 0usize;
    loop {
        // 1 - prod_j (1 - c_j)^k_j, evaluated in log space
        let log_all_done: f64 = seqs
            .iter()
            .map(|(seq, k)| k * (-seq.current()).ln_1p())
            .sum();
        let term = -log_all_done.exp_m1();
        if n >= m && term < epsilon {
            return total;
        }
        total += term;
        n += 1;
        seqs.iter_mut().for_each(|(seq, _)| seq.step());
    }
}

/// Expected transmissions until every receiver of `profile` holds `m`
/// innovative packets.
pub fn expected_tx_exact(profile: &LossProfile, m: usize, epsilon: f64) -> Result<f64, AnalysisError> {
    if epsilon <= 0.0 {
        return Err(AnalysisError::Precondition("epsilon must be positive"));
    }
    if m == 0 {
        return Err(AnalysisError::Precondition("batch size must be positive"));
    }
    let groups: Vec<(f64, usize)> = profile.probs.iter().map(|&p| (p, 1)).collect();
    Ok(truncated_sum(&groups, m, epsilon))
}

/// The `k`-worst-receiver approximation with the default tolerance.
pub fn expected_tx_approx(p: f64, k: usize, m: usize) -> Result<f64, AnalysisError> {
    expected_tx_approx_eps(p, k, m, DEFAULT_EPSILON)
}

pub fn expected_tx_approx_eps(p: f64, k: usize, m: usize, epsilon: f64) -> Result<f64, AnalysisError> {
    if !(0.0..1.0).contains(&p) {
        return Err(AnalysisError::BadProbability(p));
    }
    if k == 0 {
        return Err(AnalysisError::NoReceivers);
    }
    if m == 0 {
        return Err(AnalysisError::Precondition("batch size must be positive"));
    }
    if epsilon <= 0.0 {
        return Err(AnalysisError::Precondition("epsilon must be positive"));
    }
    Ok(truncated_sum(&[(p, k)], m, epsilon))
}

/// Smallest round count `α` whose `α·M(M-1)` distinct ids cover the
/// expected transmission count (rounded up).
pub fn alpha_required(p: f64, k: usize, m: usize) -> Result<u64, AnalysisError> {
    if m < 2 {
        return Err(AnalysisError::Precondition("batch size must be at least 2"));
    }
    let needed = expected_tx_approx(p, k, m)?.ceil() as u64;
    let per_round = (m * (m - 1)) as u64;
    Ok(needed.div_ceil(per_round).max(1))
}

/// `⌈log2 x⌉` for `x >= 1`.
pub fn ceil_log2(x: u64) -> u32 {
    assert!(x >= 1);
    64 - (x - 1).leading_zeros()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OverheadScheme {
    Rlnc,
    Dlnc,
    Sparse,
    Xor,
    Triangular,
    TriangularCompact,
}

impl OverheadScheme {
    pub const ALL: [OverheadScheme; 6] = [
        OverheadScheme::Rlnc,
        OverheadScheme::Dlnc,
        OverheadScheme::Sparse,
        OverheadScheme::Xor,
        OverheadScheme::Triangular,
        OverheadScheme::TriangularCompact,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OverheadScheme::Rlnc => "rlnc",
            OverheadScheme::Dlnc => "dlnc",
            OverheadScheme::Sparse => "sparse",
            OverheadScheme::Xor => "xor",
            OverheadScheme::Triangular => "triangular",
            OverheadScheme::TriangularCompact => "triangular-compact",
        }
    }
}

impl fmt::Display for OverheadScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OverheadScheme {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OverheadScheme::ALL
            .into_iter()
            .find(|scheme| scheme.name() == s)
            .ok_or_else(|| AnalysisError::UnknownScheme(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverheadReport {
    pub scheme: OverheadScheme,
    pub bits: u64,
    pub m: usize,
    pub n: usize,
    pub q: u32,
    pub alpha: u64,
    /// `r_max = 1` makes the id-field term vanish.
    pub degenerate: bool,
}

/// Header overhead per coded packet, in bits.
///
/// The triangular row uses `r_max + M⌈log2 r_max⌉` with `r_max = α(M-1)`,
/// as in the published comparison; the wire format itself stores each
/// padding in `⌈log2(r_max+1)⌉` bits. The compact row is the padding plus
/// the fixed index fields of the compact frame.
pub fn overhead_bits(
    scheme: OverheadScheme,
    m: usize,
    n: usize,
    q: u32,
    alpha: u64,
) -> Result<OverheadReport, AnalysisError> {
    let mm = m as u64;
    let r_max = alpha * mm.saturating_sub(1);
    let mut degenerate = false;
    let bits = match scheme {
        OverheadScheme::Rlnc => {
            if q == 0 {
                return Err(AnalysisError::Precondition("q must be at least 1"));
            }
            mm * q as u64
        }
        OverheadScheme::Dlnc | OverheadScheme::Sparse => {
            if n < 2 {
                return Err(AnalysisError::Precondition("need at least 2 receivers"));
            }
            mm * ceil_log2(n as u64) as u64
        }
        OverheadScheme::Xor => mm,
        OverheadScheme::Triangular | OverheadScheme::TriangularCompact => {
            if m < 2 || alpha == 0 {
                return Err(AnalysisError::Precondition(
                    "triangular coding needs M >= 2 and alpha >= 1",
                ));
            }
            degenerate = r_max == 1;
            if scheme == OverheadScheme::Triangular {
                r_max + mm * ceil_log2(r_max) as u64
            } else {
                r_max + wire::COMPACT_INDEX_BITS
            }
        }
    };
    Ok(OverheadReport {
        scheme,
        bits,
        m,
        n,
        q,
        alpha,
        degenerate,
    })
}

/// Rows for every scheme at each batch size; the triangular rows use the
/// smallest sufficient `α` for `N` receivers at loss `p`.
pub fn overhead_sweep(
    m_values: &[usize],
    n: usize,
    p: f64,
    q: u32,
) -> Result<Vec<OverheadReport>, AnalysisError> {
    if m_values.is_empty() {
        return Err(AnalysisError::Precondition("empty batch-size range"));
    }
    let mut rows = Vec::with_capacity(m_values.len() * OverheadScheme::ALL.len());
    for &m in m_values {
        let alpha = alpha_required(p, n, m)?;
        for scheme in OverheadScheme::ALL {
            rows.push(overhead_bits(scheme, m, n, q, alpha)?);
        }
    }
    Ok(rows)
}

pub const OVERHEAD_CSV_HEADER: &str = "scheme,M,N,p,q,alpha,bits";

pub fn overhead_csv(rows: &[OverheadReport], p: f64) -> String {
    let mut out = String::from(OVERHEAD_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.scheme,
            r.m,
            r.n,
            real(p),
            r.q,
            r.alpha,
            r.bits
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lossless_is_exactly_m() {
        let profile = LossProfile::homogeneous(0.0, 6).unwrap();
        assert_eq!(expected_tx_exact(&profile, 9, DEFAULT_EPSILON).unwrap(), 9.0);
        assert_eq!(expected_tx_approx(0.0, 10, 7).unwrap(), 7.0);
    }

    #[test]
    fn geometric_mean() {
        let profile = LossProfile::new(vec![0.5]).unwrap();
        let exact = expected_tx_exact(&profile, 1, DEFAULT_EPSILON).unwrap();
        assert!((exact - 2.0).abs() < 1e-9);
        assert!((expected_tx_approx(0.5, 1, 1).unwrap() - 2.0).abs() < 1e-9);
        // 1 / (1 - p) in general
        for p in [0.1, 0.3, 0.77] {
            assert!((expected_tx_approx(p, 1, 1).unwrap() - 1.0 / (1.0 - p)).abs() < 1e-9);
        }
    }

    #[test]
    fn homogeneous_forms_agree() {
        for (p, n, m) in [(0.3, 10, 10), (0.8, 4, 3), (0.05, 7, 20)] {
            let exact = expected_tx_exact(&LossProfile::homogeneous(p, n).unwrap(), m, DEFAULT_EPSILON).unwrap();
            let approx = expected_tx_approx(p, n, m).unwrap();
            assert!((exact - approx).abs() < 1e-9, "{exact} vs {approx}");
        }
    }

    // max over k receivers of the negative-binomial completion time
    fn monte_carlo(p: f64, k: usize, m: usize, trials: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut total = 0u64;
        for _ in 0..trials {
            let mut worst = 0u64;
            for _ in 0..k {
                let (mut got, mut sent) = (0, 0u64);
                while got < m {
                    sent += 1;
                    if rng.gen::<f64>() >= p {
                        got += 1;
                    }
                }
                worst = worst.max(sent);
            }
            total += worst;
        }
        total as f64 / trials as f64
    }

    #[test]
    fn approx_matches_monte_carlo() {
        let analytic = expected_tx_approx(0.3, 10, 10).unwrap();
        let simulated = monte_carlo(0.3, 10, 10, 1_000_000, 11);
        assert!(
            (analytic - simulated).abs() / analytic < 0.005,
            "{analytic} vs {simulated}"
        );
    }

    #[test]
    fn monotone_on_grid() {
        let ps = [0.0, 0.1, 0.3, 0.5, 0.8];
        let ks = [1, 2, 5, 10, 100];
        let ms = [1, 2, 5, 10, 20];
        for &p in &ps {
            for &k in &ks {
                let mut prev = 0.0;
                for &m in &ms {
                    let g = expected_tx_approx(p, k, m).unwrap();
                    assert!(g >= prev - 1e-9);
                    assert!(g >= m as f64 / (1.0 - p) - 1e-9);
                    prev = g;
                }
            }
        }
        for &m in &ms {
            for &k in &ks {
                let series: Vec<f64> = ps.iter().map(|&p| expected_tx_approx(p, k, m).unwrap()).collect();
                assert!(series.windows(2).all(|w| w[1] >= w[0] - 1e-9));
            }
            for &p in &ps {
                let series: Vec<f64> = ks.iter().map(|&k| expected_tx_approx(p, k, m).unwrap()).collect();
                assert!(series.windows(2).all(|w| w[1] >= w[0] - 1e-9));
            }
        }
    }

    #[test]
    fn exact_dominates_worst_receiver_approximation() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let n = rng.gen_range(1..12);
            let probs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..0.9)).collect();
            let profile = LossProfile::new(probs).unwrap();
            let m = rng.gen_range(1..15);
            let exact = expected_tx_exact(&profile, m, DEFAULT_EPSILON).unwrap();
            let approx = expected_tx_approx(profile.max_loss(), profile.worst_count(), m).unwrap();
            assert!(exact >= approx - 1e-9);
        }
    }

    #[test]
    fn truncation_is_stable() {
        for &(p, k, m) in &[(0.3, 10, 10), (0.8, 100, 5), (0.5, 3, 1), (0.1, 2, 30)] {
            let a = expected_tx_approx_eps(p, k, m, 1e-12).unwrap();
            let b = expected_tx_approx_eps(p, k, m, 5e-13).unwrap();
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha_required(0.3, 10, 10).unwrap(), 1);
        assert_eq!(alpha_required(0.0, 1, 2).unwrap(), 1);
        assert_eq!(alpha_required(0.3, 10, 5).unwrap(), 1);
        assert!(alpha_required(0.3, 10, 1).is_err());
    }

    #[test]
    fn overhead_examples() {
        let tri = overhead_bits(OverheadScheme::Triangular, 10, 10, 8, 1).unwrap();
        assert_eq!(tri.bits, 9 + 10 * 4);
        assert_eq!(overhead_bits(OverheadScheme::Rlnc, 10, 10, 8, 1).unwrap().bits, 80);
        assert_eq!(overhead_bits(OverheadScheme::Dlnc, 10, 100, 8, 1).unwrap().bits, 70);
        assert_eq!(overhead_bits(OverheadScheme::Sparse, 10, 100, 8, 1).unwrap().bits, 70);
        assert_eq!(overhead_bits(OverheadScheme::Xor, 10, 100, 8, 1).unwrap().bits, 10);
        let degenerate = overhead_bits(OverheadScheme::Triangular, 2, 10, 8, 1).unwrap();
        assert_eq!(degenerate.bits, 1);
        assert!(degenerate.degenerate);
        let compact = overhead_bits(OverheadScheme::TriangularCompact, 10, 10, 8, 2).unwrap();
        assert_eq!(compact.bits, 18 + wire::COMPACT_INDEX_BITS);
        assert!(overhead_bits(OverheadScheme::Dlnc, 10, 1, 8, 1).is_err());
        assert_eq!(
            "fountain".parse::<OverheadScheme>(),
            Err(AnalysisError::UnknownScheme("fountain".into()))
        );
    }

    #[test]
    fn ceil_log2_values() {
        assert_eq!(
            [1u64, 2, 3, 4, 5, 8, 9, 64, 65].map(ceil_log2),
            [0, 1, 2, 2, 3, 3, 4, 6, 7]
        );
    }

    #[test]
    fn sweep_csv_shape() {
        let rows = overhead_sweep(&[5, 10], 10, 0.3, 8).unwrap();
        assert_eq!(rows.len(), 12);
        let csv = overhead_csv(&rows, 0.3);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(OVERHEAD_CSV_HEADER));
        assert_eq!(lines.next(), Some("rlnc,5,10,0.300000,8,1,40"));
        assert!(csv.ends_with('\n') && !csv.contains('\r'));
        assert!(overhead_sweep(&[], 10, 0.3, 8).is_err());
    }
}
