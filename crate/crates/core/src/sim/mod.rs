//! Monte Carlo multicast over independent Bernoulli erasure channels.
//!
//! Each trial runs a scheme until every receiver can decode. The simulator
//! watches decoder state directly; there is no feedback channel.
//!
//! Seeding: trial `i` seeds a ChaCha8 generator with `key ^ i`, where `key`
//! is the first output of a ChaCha8 generator seeded with `master_seed`.
//! Stream 0 of that seed drives the channel and stream 1 drives the scheme,
//! so schemes run under the same master seed see identical erasure patterns.
//! Trials may run in parallel; results are reduced in trial order.

mod config;
pub mod scheme;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::analysis::{expected_tx_approx, expected_tx_exact, LossProfile, DEFAULT_EPSILON};
use crate::format::real;

pub use config::parse_config;
pub use scheme::{OpCounts, Scheme, SchemeParams, SchemeRegistry, Trial, TrialSetup};

pub const CHANNEL_STREAM: u64 = 0;
pub const SCHEME_STREAM: u64 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("unknown scheme '{0}'")]
    UnknownScheme(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("scheme failure: {0}")]
    Scheme(String),
    #[error("scheme ran out of packets")]
    Exhausted,
    #[error("no configurations given")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub m: usize,
    pub payload_bits: usize,
    pub profile: LossProfile,
    pub scheme: String,
    pub params: SchemeParams,
    pub trials: usize,
    pub master_seed: u64,
    /// Per-trial transmission cap; `None` means 50·⌈𝒢⌉.
    pub max_tx: Option<u64>,
}

impl SimConfig {
    pub fn new(scheme: &str, m: usize, profile: LossProfile) -> Self {
        SimConfig {
            m,
            payload_bits: 16,
            profile,
            scheme: scheme.to_string(),
            params: SchemeParams::default(),
            trials: 1000,
            master_seed: 1,
            max_tx: None,
        }
    }

    pub fn with_q(mut self, q: u8) -> Self {
        self.params.q = Some(q);
        self
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    fn validate(&self) -> Result<(), SimError> {
        if self.m == 0 {
            return Err(SimError::Config("batch size must be positive".into()));
        }
        if self.payload_bits == 0 {
            return Err(SimError::Config("payload must be at least one bit".into()));
        }
        if self.trials == 0 {
            return Err(SimError::Config("need at least one trial".into()));
        }
        if matches!(self.max_tx, Some(cap) if cap < self.m as u64) {
            return Err(SimError::Config("max_tx must be at least M".into()));
        }
        Ok(())
    }

    pub fn analytic_bound(&self) -> f64 {
        expected_tx_approx(self.profile.max_loss(), self.profile.worst_count(), self.m)
            .expect("profile is validated")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialResult {
    /// Transmissions until every receiver decoded; `None` if the cap hit.
    pub transmissions: Option<u64>,
    /// Per receiver, the transmission index at which it could decode.
    pub completion: Vec<Option<u64>>,
    pub ops: OpCounts,
    pub stalls: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub scheme: String,
    pub m: usize,
    pub receivers: usize,
    pub max_loss: f64,
    pub trials: Vec<TrialResult>,
    /// T of every trial that finished, in trial order.
    pub t_values: Vec<u64>,
    pub aborted: usize,
    pub mean_t: f64,
    pub std_t: f64,
    /// Half-width of the normal 95% interval for the mean.
    pub ci95: f64,
    pub ops: OpCounts,
    pub stalls: u64,
    /// 𝒢 for the worst receivers.
    pub analytic_g: f64,
    /// ℒ for the full profile.
    pub analytic_exact: f64,
    pub max_tx: u64,
    pub warnings: Vec<String>,
}

fn trial_rngs(master_seed: u64, trial: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let seed = ChaCha8Rng::seed_from_u64(master_seed).next_u64() ^ trial;
    let mut channel = ChaCha8Rng::seed_from_u64(seed);
    channel.set_stream(CHANNEL_STREAM);
    let mut scheme = ChaCha8Rng::seed_from_u64(seed);
    scheme.set_stream(SCHEME_STREAM);
    (channel, scheme)
}

fn run_trial(
    scheme: &dyn Scheme,
    config: &SimConfig,
    max_tx: u64,
    index: u64,
) -> Result<TrialResult, SimError> {
    let (mut channel, mut rng) = trial_rngs(config.master_seed, index);
    let probs = config.profile.probs();
    let setup = TrialSetup {
        m: config.m,
        payload_bits: config.payload_bits,
        receivers: probs.len(),
    };
    let mut trial = scheme.start(&setup, &mut rng)?;
    let mut completion = vec![None; probs.len()];
    let mut remaining = probs.len();
    let mut transmissions = None;
    for tx in 1..=max_tx {
        trial.transmit(&mut rng)?;
        for (receiver, &p) in probs.iter().enumerate() {
            // one draw per receiver per transmission, finished or not
            let erased = channel.gen::<f64>() < p;
            if erased || completion[receiver].is_some() {
                continue;
            }
            if trial.deliver(receiver)? {
                completion[receiver] = Some(tx);
                remaining -= 1;
            }
        }
        if remaining == 0 {
            transmissions = Some(tx);
            break;
        }
    }
    Ok(TrialResult {
        transmissions,
        completion,
        ops: trial.ops(),
        stalls: trial.stalls(),
    })
}

pub fn run(config: &SimConfig, registry: &SchemeRegistry) -> Result<SimReport, SimError> {
    config.validate()?;
    let scheme = registry.build(&config.scheme, &config.params)?;
    let analytic_g = config.analytic_bound();
    let analytic_exact = expected_tx_exact(&config.profile, config.m, DEFAULT_EPSILON)
        .expect("profile is validated");
    let max_tx = config
        .max_tx
        .unwrap_or_else(|| 50 * analytic_g.ceil() as u64)
        .max(config.m as u64);

    let trials = (0..config.trials as u64)
        .into_par_iter()
        .map(|i| run_trial(scheme.as_ref(), config, max_tx, i))
        .collect::<Result<Vec<_>, _>>()?;

    let t_values: Vec<u64> = trials.iter().filter_map(|t| t.transmissions).collect();
    let aborted = trials.len() - t_values.len();
    let mut ops = OpCounts::default();
    let mut stalls = 0;
    for t in &trials {
        ops += t.ops;
        stalls += t.stalls;
    }
    let (mean_t, std_t) = mean_std(&t_values);
    let ci95 = if t_values.len() > 1 {
        1.96 * std_t / (t_values.len() as f64).sqrt()
    } else {
        f64::NAN
    };
    let mut warnings = Vec::new();
    if aborted > 0 {
        warnings.push(format!(
            "{aborted} trial(s) hit the {max_tx}-transmission cap and are excluded from the mean"
        ));
    }
    Ok(SimReport {
        scheme: scheme.name().to_string(),
        m: config.m,
        receivers: config.profile.receivers(),
        max_loss: config.profile.max_loss(),
        trials,
        t_values,
        aborted,
        mean_t,
        std_t,
        ci95,
        ops,
        stalls,
        analytic_g,
        analytic_exact,
        max_tx,
        warnings,
    })
}

fn mean_std(xs: &[u64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().map(|&x| x as f64).sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub const SWEEP_CSV_HEADER: &str = "scheme,M,N,p,q_alpha,mean_T,ci95,G,note";

fn sweep_row(config: &SimConfig, registry: &SchemeRegistry) -> String {
    let p = real(config.profile.max_loss());
    let n = config.profile.receivers();
    let result = registry
        .build(&config.scheme, &config.params)
        .and_then(|scheme| {
            let report = run(config, registry)?;
            Ok((scheme.sweep_param(config.m, &config.profile), report))
        });
    match result {
        Ok((param, report)) => {
            let note = if report.aborted > 0 {
                format!("aborted={}", report.aborted)
            } else {
                String::new()
            };
            format!(
                "{},{},{},{},{},{},{},{},{}",
                report.scheme,
                config.m,
                n,
                p,
                param,
                real(report.mean_t),
                real(report.ci95),
                real(report.analytic_g),
                note
            )
        }
        Err(e) => format!(
            "{},{},{},{},,,,,error: {}",
            config.scheme,
            config.m,
            n,
            p,
            e.to_string().replace(',', ";")
        ),
    }
}

/// Runs every configuration and renders one CSV row per entry, in order.
pub fn sweep(configs: &[SimConfig], registry: &SchemeRegistry) -> Result<String, SimError> {
    if configs.is_empty() {
        return Err(SimError::Empty);
    }
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for config in configs {
        out.push_str(&sweep_row(config, registry));
        out.push('\n');
    }
    Ok(out)
}
