//! Plain-text `key = value` simulation configs.
//!
//! ```text
//! # comment
//! scheme = rlnc
//! q = 8
//! m = 16
//! n = 10          # homogeneous receivers ...
//! p = 0.3
//! profile = 0.1,0.3,0.3   # ... or an explicit per-receiver list
//! trials = 10000
//! seed = 7
//! payload_bits = 16
//! max_tx = 5000
//! ```

use std::str::FromStr;

use crate::analysis::LossProfile;

use super::{SimConfig, SimError};

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T, SimError> {
    raw.parse()
        .map_err(|_| SimError::Config(format!("bad value '{raw}' for {key}")))
}

pub fn parse_config(text: &str) -> Result<SimConfig, SimError> {
    let mut cfg = SimConfig::new("", 0, LossProfile::homogeneous(0.0, 1).expect("valid"));
    let (mut n, mut p, mut profile) = (None, None, None);
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, raw) = line
            .split_once('=')
            .ok_or_else(|| SimError::Config(format!("line {}: expected key = value", lineno + 1)))?;
        let (key, raw) = (key.trim(), raw.trim());
        match key {
            "scheme" => cfg.scheme = raw.to_string(),
            "m" => cfg.m = value(key, raw)?,
            "b" | "payload_bits" => cfg.payload_bits = value(key, raw)?,
            "n" => n = Some(value::<usize>(key, raw)?),
            "p" => p = Some(value::<f64>(key, raw)?),
            "profile" => {
                profile = Some(
                    raw.split(',')
                        .map(|s| value::<f64>(key, s.trim()))
                        .collect::<Result<Vec<_>, _>>()?,
                )
            }
            "q" => cfg.params.q = Some(value(key, raw)?),
            "trials" => cfg.trials = value(key, raw)?,
            "seed" => cfg.master_seed = value(key, raw)?,
            "max_tx" => cfg.max_tx = Some(value(key, raw)?),
            _ => return Err(SimError::Config(format!("unknown key '{key}'"))),
        }
    }
    if cfg.scheme.is_empty() {
        return Err(SimError::Config("missing scheme".into()));
    }
    let probs = match (profile, n, p) {
        (Some(list), None, None) => list,
        (None, Some(n), Some(p)) => vec![p; n],
        (None, None, Some(p)) => vec![p],
        _ => {
            return Err(SimError::Config(
                "give either profile or n and p".into(),
            ))
        }
    };
    cfg.profile = LossProfile::new(probs).map_err(|e| SimError::Config(e.to_string()))?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_homogeneous_and_profile() {
        let cfg = parse_config("scheme = rlnc\nq=4\nm = 16 # batch\nn=10\np=0.3\ntrials=5\nseed=9\n").unwrap();
        assert_eq!(cfg.scheme, "rlnc");
        assert_eq!(cfg.params.q, Some(4));
        assert_eq!((cfg.m, cfg.trials, cfg.master_seed), (16, 5, 9));
        assert_eq!(cfg.profile.probs(), &[0.3; 10]);

        let cfg = parse_config("scheme=triangular\nm=4\nprofile=0.1, 0.5\nmax_tx=100").unwrap();
        assert_eq!(cfg.profile.probs(), &[0.1, 0.5]);
        assert_eq!(cfg.max_tx, Some(100));
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_config("scheme=triangular\nm=4\n").is_err());
        assert!(parse_config("m=4\np=0.1").is_err());
        assert!(parse_config("scheme=x\nm=four\np=0.1").is_err());
        assert!(parse_config("scheme=x\nm=4\np=1.0").is_err());
        assert!(parse_config("scheme=x\nm=4\np=0.1\ncolour=blue").is_err());
        assert!(parse_config("scheme=x\nm 4").is_err());
    }
}
