use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bitvec::prelude::*;
use clap::{Parser, Subcommand, ValueEnum};

use trinc::analysis::{
    alpha_required, expected_tx_approx, expected_tx_exact, overhead_csv, overhead_sweep,
    LossProfile, DEFAULT_EPSILON,
};
use trinc::codec::{encode, DecodeError, Decoder, Packet};
use trinc::format::real;
use trinc::ids::{id_at, IdSequence};
use trinc::sim::{self, parse_config, SchemeParams, SchemeRegistry, SimConfig};
use trinc::wire::{parse, serialize, Frame, HeaderMode};

const SEED_ENV: &str = "TRINC_SEED";

#[derive(Parser)]
#[command(name = "trinc", version, about = "Triangular network coding toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum IdFormat {
    Csv,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum FrameMode {
    Explicit,
    Compact,
}

#[derive(Subcommand)]
enum Command {
    /// List ids of the coefficient sequence
    Idgen {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        count: usize,
        #[arg(long, value_enum, default_value = "csv")]
        format: IdFormat,
    },
    /// Split a file into M packets and write the coded frame for one id
    Encode {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        seq: u64,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "compact")]
        mode: FrameMode,
    },
    /// Recover the original packets from coded frames
    Decode {
        #[arg(long)]
        m: usize,
        #[arg(long = "in", num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Expected transmissions to deliver M packets
    Bound {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        k: Option<usize>,
        /// Use the full heterogeneous sum over --profile
        #[arg(long, requires = "profile")]
        exact: bool,
        #[arg(long, value_delimiter = ',')]
        profile: Option<Vec<f64>>,
    },
    /// Smallest number of id rounds that covers the expected transmissions
    Alpha {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        k: usize,
    },
    /// Header overhead of every scheme over a range of batch sizes (CSV)
    Overhead {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 8)]
        q: u32,
        /// LO:HI:STEP, inclusive
        #[arg(long = "m-range")]
        m_range: String,
    },
    /// Monte Carlo multicast over erasure channels
    Simulate {
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        q: Option<u8>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 16)]
        payload_bits: usize,
        #[arg(long)]
        max_tx: Option<u64>,
        /// key = value config file; flags are ignored when given
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Check the rank and decodability properties up to a batch size
    Verify {
        #[arg(long = "m-max")]
        m_max: usize,
    },
}

enum Failure {
    Usage(String),
    Runtime(String),
}

type CliResult = Result<(), Failure>;

fn usage(msg: impl ToString) -> Failure {
    Failure::Usage(msg.to_string())
}

fn runtime(msg: impl ToString) -> Failure {
    Failure::Runtime(msg.to_string())
}

fn check_p(p: f64) -> Result<f64, Failure> {
    if !(0.0..1.0).contains(&p) {
        return Err(usage(format!("loss probability {p} must be in [0, 1)")));
    }
    Ok(p)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Idgen { m, count, format } => idgen(m, count, format),
        Command::Encode {
            m,
            seq,
            input,
            out,
            mode,
        } => encode_file(m, seq, &input, &out, mode),
        Command::Decode { m, input, out } => decode_files(m, &input, &out),
        Command::Bound {
            m,
            p,
            k,
            exact,
            profile,
        } => bound(m, p, k, exact, profile),
        Command::Alpha { m, p, k } => alpha(m, p, k),
        Command::Overhead { n, p, q, m_range } => overhead(n, p, q, &m_range),
        Command::Simulate {
            scheme,
            m,
            n,
            p,
            q,
            trials,
            seed,
            payload_bits,
            max_tx,
            config,
        } => simulate(SimArgs {
            scheme,
            m,
            n,
            p,
            q,
            trials,
            seed,
            payload_bits,
            max_tx,
            config,
        }),
        Command::Verify { m_max } => verify(m_max),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn idgen(m: usize, count: usize, format: IdFormat) -> CliResult {
    let seq = IdSequence::new(m).map_err(usage)?;
    if matches!(format, IdFormat::Csv) {
        println!("a,round,group,rotation,r");
    }
    for id in seq.take(count) {
        let id = id.map_err(runtime)?;
        match format {
            IdFormat::Csv => println!(
                "{},{},{},{},{}",
                id.seq(),
                id.round(),
                id.group(),
                id.rotation(),
                id
            ),
            IdFormat::Text => println!(
                "a={} round={} group={} rotation={} r={}",
                id.seq(),
                id.round(),
                id.group(),
                id.rotation(),
                id
            ),
        }
    }
    Ok(())
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

fn encode_file(m: usize, seq: u64, input: &Path, out: &Path, mode: FrameMode) -> CliResult {
    let id = id_at(m, seq).map_err(usage)?;
    let data = fs::read(input).map_err(|e| runtime(format!("{}: {e}", input.display())))?;
    let chunk = data.len().div_ceil(m).max(1);
    let batch: Vec<Packet> = (0..m)
        .map(|i| {
            let mut bytes = vec![0u8; chunk];
            let start = (i * chunk).min(data.len());
            let end = ((i + 1) * chunk).min(data.len());
            bytes[..end - start].copy_from_slice(&data[start..end]);
            Packet::new(i + 1, BitVec::from_vec(bytes))
        })
        .collect();
    let pkt = encode(&batch, &id).map_err(runtime)?;
    let mode = match mode {
        FrameMode::Explicit => HeaderMode::Explicit,
        FrameMode::Compact => HeaderMode::Compact,
    };
    let bytes = serialize(&Frame::Triangular(pkt), mode).map_err(runtime)?;
    fs::write(out, bytes).map_err(|e| runtime(format!("{}: {e}", out.display())))?;
    fs::write(sidecar(out), format!("original_len={}\n", data.len()))
        .map_err(|e| runtime(format!("{}: {e}", out.display())))?;
    Ok(())
}

fn read_original_len(frame: &Path) -> Option<usize> {
    let text = fs::read_to_string(sidecar(frame)).ok()?;
    text.lines()
        .find_map(|l| l.trim().strip_prefix("original_len="))
        .and_then(|v| v.trim().parse().ok())
}

fn decode_files(m: usize, inputs: &[PathBuf], out: &Path) -> CliResult {
    if m < 2 {
        return Err(usage("batch size must be at least 2"));
    }
    let mut decoder: Option<Decoder> = None;
    let mut stall = None;
    for path in inputs {
        let bytes = fs::read(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
        let (_, frame) = parse(&bytes).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
        let Frame::Triangular(pkt) = frame else {
            return Err(runtime(format!("{}: not a triangular frame", path.display())));
        };
        if pkt.id.batch_size() != m {
            return Err(runtime(format!(
                "{}: frame batch size {} does not match --m {m}",
                path.display(),
                pkt.id.batch_size()
            )));
        }
        let dec = decoder.get_or_insert_with(|| Decoder::new(m, pkt.batch_bits));
        match dec.push(pkt) {
            Ok(_) => {}
            Err(DecodeError::Stall(r)) => stall = Some(r),
            Err(e) => return Err(runtime(e)),
        }
    }
    let dec = decoder.ok_or_else(|| usage("no input frames"))?;
    let Some(packets) = dec.packets() else {
        if dec.distinct_received() < m {
            return Err(runtime(DecodeError::Insufficient {
                distinct: dec.distinct_received(),
                m,
            }));
        }
        let msg = stall.map_or_else(|| "decoding incomplete".to_string(), |r| format!("decoding stalled: {r}"));
        return Err(runtime(msg));
    };
    fs::create_dir_all(out).map_err(|e| runtime(format!("{}: {e}", out.display())))?;
    let mut joined = Vec::new();
    for p in &packets {
        let bytes = p.payload.clone().into_vec();
        fs::write(out.join(format!("packet_{}.bin", p.index)), &bytes).map_err(runtime)?;
        joined.extend_from_slice(&bytes);
    }
    if let Some(len) = inputs.iter().find_map(|p| read_original_len(p)) {
        joined.truncate(len);
    }
    fs::write(out.join("reconstructed.bin"), joined).map_err(runtime)?;
    println!("decoded {m} packets into {}", out.display());
    Ok(())
}

fn bound(m: usize, p: Option<f64>, k: Option<usize>, exact: bool, profile: Option<Vec<f64>>) -> CliResult {
    if m == 0 {
        return Err(usage("batch size must be positive"));
    }
    let value = if exact {
        let probs = profile.expect("clap enforces --profile");
        for &x in &probs {
            check_p(x)?;
        }
        let profile = LossProfile::new(probs).map_err(usage)?;
        expected_tx_exact(&profile, m, DEFAULT_EPSILON).map_err(runtime)?
    } else {
        let p = check_p(p.ok_or_else(|| usage("--p is required"))?)?;
        let k = k.ok_or_else(|| usage("--k is required"))?;
        if k == 0 {
            return Err(usage("--k must be positive"));
        }
        expected_tx_approx(p, k, m).map_err(runtime)?
    };
    println!("{}", real(value));
    Ok(())
}

fn alpha(m: usize, p: f64, k: usize) -> CliResult {
    let p = check_p(p)?;
    if m < 2 || k == 0 {
        return Err(usage("need --m >= 2 and --k >= 1"));
    }
    println!("{}", alpha_required(p, k, m).map_err(runtime)?);
    Ok(())
}

fn parse_range(spec: &str) -> Result<Vec<usize>, Failure> {
    let parts: Vec<usize> = spec
        .split(':')
        .map(|s| s.trim().parse().map_err(|_| usage(format!("bad range '{spec}'"))))
        .collect::<Result<_, _>>()?;
    let [lo, hi, step] = parts[..] else {
        return Err(usage("range must be LO:HI:STEP"));
    };
    if step == 0 || lo > hi || lo < 2 {
        return Err(usage("range needs 2 <= LO <= HI and STEP >= 1"));
    }
    Ok((lo..=hi).step_by(step).collect())
}

fn overhead(n: usize, p: f64, q: u32, m_range: &str) -> CliResult {
    let p = check_p(p)?;
    let ms = parse_range(m_range)?;
    if n < 2 || q == 0 {
        return Err(usage("need --n >= 2 and --q >= 1"));
    }
    let rows = overhead_sweep(&ms, n, p, q).map_err(runtime)?;
    print!("{}", overhead_csv(&rows, p));
    Ok(())
}

struct SimArgs {
    scheme: Option<String>,
    m: Option<usize>,
    n: Option<usize>,
    p: Option<f64>,
    q: Option<u8>,
    trials: usize,
    seed: Option<u64>,
    payload_bits: usize,
    max_tx: Option<u64>,
    config: Option<PathBuf>,
}

fn default_seed() -> Result<u64, Failure> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| usage(format!("{SEED_ENV} must be an unsigned integer"))),
        Err(_) => Ok(1),
    }
}

fn simulate(args: SimArgs) -> CliResult {
    let registry = SchemeRegistry::builtin();
    let config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
            parse_config(&text).map_err(usage)?
        }
        None => {
            let scheme = args.scheme.ok_or_else(|| usage("--scheme is required"))?;
            if registry.build(&scheme, &SchemeParams { q: args.q }).is_err() {
                let known: Vec<_> = registry.names().collect();
                return Err(usage(format!("unknown scheme '{scheme}' (known: {})", known.join(", "))));
            }
            let m = args.m.ok_or_else(|| usage("--m is required"))?;
            let n = args.n.ok_or_else(|| usage("--n is required"))?;
            let p = check_p(args.p.ok_or_else(|| usage("--p is required"))?)?;
            let profile = LossProfile::homogeneous(p, n).map_err(usage)?;
            SimConfig {
                m,
                payload_bits: args.payload_bits,
                profile,
                scheme,
                params: SchemeParams { q: args.q },
                trials: args.trials,
                master_seed: match args.seed {
                    Some(s) => s,
                    None => default_seed()?,
                },
                max_tx: args.max_tx,
            }
        }
    };
    let report = sim::run(&config, &registry).map_err(|e| match e {
        sim::SimError::Config(_) | sim::SimError::UnknownScheme(_) => usage(e),
        _ => runtime(e),
    })?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!("scheme,M,N,p,trials,mean_T,std_T,ci95,G,L,aborted,stalls,encoder_ops,decoder_ops");
    println!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        report.scheme,
        report.m,
        report.receivers,
        real(report.max_loss),
        report.trials.len(),
        real(report.mean_t),
        real(report.std_t),
        real(report.ci95),
        real(report.analytic_g),
        real(report.analytic_exact),
        report.aborted,
        report.stalls,
        report.ops.encoder,
        report.ops.decoder
    );
    Ok(())
}

fn verify(m_max: usize) -> CliResult {
    if !(2..=trinc::oracle::MAX_ORACLE_BATCH).contains(&m_max) {
        return Err(usage(format!(
            "--m-max must be in 2..={}",
            trinc::oracle::MAX_ORACLE_BATCH
        )));
    }
    let mut failed = false;
    let cfg = trinc::oracle::suite::SuiteConfig::default();
    for check in trinc::oracle::suite::run_suite(m_max, &cfg) {
        match &check.counterexample {
            None => println!("PASS {} M={} ({} cases)", check.name, check.m, check.cases),
            Some(ids) => {
                failed = true;
                let ids: Vec<String> = ids.iter().map(|id| id.to_string()).collect();
                println!(
                    "FAIL {} M={} ({} of {} cases) counterexample: {}",
                    check.name,
                    check.m,
                    check.failures,
                    check.cases,
                    ids.join(" ")
                );
            }
        }
    }
    if failed {
        return Err(runtime("verification failed"));
    }
    Ok(())
}
