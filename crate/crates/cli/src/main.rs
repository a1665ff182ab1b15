//! Runs the remote-transfer protocols, parameter sweeps and self-checks.
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spinchan::protocol::{
    protocol_discord_swap, protocol_known_qubit, protocol_unknown_qubit, protocol_unknown_qudit, ProtocolId,
    ProtocolTranscript,
};
use spinchan::spin::{HalfInteger, Vec3, MAX_TWICE_SPIN};
use spinchan::state::{s_min, BlochVector};
use spinchan::sweep::{run_sweep, AlphaRange, SpinMode, SpinRange, SweepSpec};
use spinchan::verify::{parse_scopes, verify, VerifyConfig};
use spinchan::Error;

const MAX_SPIN_ENV: &str = "SPINCHAN_MAX_SPIN_TWICE";

#[derive(Parser)]
#[command(name = "spinchan", version, about = "Separable spin-S channels for remote state transfer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one protocol and write its transcript as JSON
    Run(RunArgs),
    /// Sweep a parameter and write CSV
    Sweep {
        #[command(subcommand)]
        kind: SweepKind,
    },
    /// Run the verification suites (all, or one module scope)
    Verify {
        #[arg(default_value = "all")]
        scope: String,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Protocol: A (unknown qubit), B (known qubit), C (unknown qudit), D (swap)
    protocol: String,
    #[arg(long, allow_hyphen_values = true)]
    alpha: f64,
    /// Second channel parameter, protocol D only
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    /// `auto` (smallest separable spin) or `fixed:<2S>`
    #[arg(long, default_value = "auto")]
    spin: String,
    /// Polarisation vector x,y,z for protocols A and C
    #[arg(long, allow_hyphen_values = true, conflicts_with = "dir")]
    bloch: Option<String>,
    /// Measurement direction x,y,z for protocol B
    #[arg(long, allow_hyphen_values = true)]
    dir: Option<String>,
    #[arg(long)]
    seed: u64,
    /// Output path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SweepKind {
    /// Teleportation fidelity against α: columns alpha, spin_twice, fidelity_equivalent, fidelity_qubit
    Fidelity {
        /// start:stop:step
        #[arg(long, allow_hyphen_values = true)]
        alpha_range: String,
        #[arg(long, default_value = "auto")]
        spin: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Relative distance against S at fixed α: columns spin_twice, relative_distance, separable_flag
    Distance {
        /// start:stop as spin values, e.g. 1/2:25
        #[arg(long)]
        spin_range: String,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure with its exit code: 1 for failed verification, 2 for bad input.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Numerical(_) => 1,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

fn invalid(message: String) -> Failure {
    Failure { code: 2, message: format!("invalid-input: {message}") }
}

fn max_spin_twice() -> Result<u32, Failure> {
    match std::env::var(MAX_SPIN_ENV) {
        Err(_) => Ok(MAX_TWICE_SPIN),
        Ok(v) => match v.trim().parse::<u32>() {
            Ok(n) if n >= 1 => Ok(n.min(MAX_TWICE_SPIN)),
            _ => Err(invalid(format!("{MAX_SPIN_ENV} = '{v}' is not a positive integer"))),
        },
    }
}

fn parse_spin_mode(text: &str) -> Result<SpinMode, Failure> {
    if text == "auto" {
        return Ok(SpinMode::Auto);
    }
    let twice = text
        .strip_prefix("fixed:")
        .and_then(|t| t.parse::<u32>().ok())
        .ok_or_else(|| invalid(format!("--spin expects auto or fixed:<2S>, got '{text}'")))?;
    Ok(SpinMode::Fixed(HalfInteger::from_twice(twice)?))
}

fn parse_vec3(text: &str, flag: &str) -> Result<Vec3, Failure> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| invalid(format!("{flag} '{text}': {e}")))?;
    match parts[..] {
        [x, y, z] => Ok([x, y, z]),
        _ => Err(invalid(format!("{flag} expects three comma-separated numbers, got '{text}'"))),
    }
}

fn parse_spin_value(text: &str) -> Result<HalfInteger, Failure> {
    let value = match text.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n.trim().parse().map_err(|_| invalid(format!("bad spin '{text}'")))?;
            let d: f64 = d.trim().parse().map_err(|_| invalid(format!("bad spin '{text}'")))?;
            n / d
        }
        None => text.trim().parse().map_err(|_| invalid(format!("bad spin '{text}'")))?,
    };
    Ok(HalfInteger::from_f64(value)?)
}

fn parse_alpha_range(text: &str) -> Result<AlphaRange, Failure> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| invalid(format!("--alpha-range '{text}': {e}")))?;
    match parts[..] {
        [a, b, step] => Ok(AlphaRange::new(a, b, step)?),
        _ => Err(invalid(format!("--alpha-range expects start:stop:step, got '{text}'"))),
    }
}

fn parse_spin_range(text: &str) -> Result<SpinRange, Failure> {
    match text.split_once(':') {
        Some((a, b)) => Ok(SpinRange::new(parse_spin_value(a)?, parse_spin_value(b)?)?),
        None => Err(invalid(format!("--spin-range expects start:stop, got '{text}'"))),
    }
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure { code: 2, message: format!("io-error: cannot write {}: {e}", path.display()) }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn resolve_spin(mode: SpinMode, alpha: f64, max_twice: u32) -> Result<HalfInteger, Failure> {
    let s = match mode {
        SpinMode::Auto => s_min(alpha)?,
        SpinMode::Fixed(s) => s,
    };
    if s.twice() > max_twice {
        return Err(Error::Capacity { twice: s.twice(), max: max_twice }.into());
    }
    Ok(s)
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let protocol: ProtocolId = args.protocol.parse()?;
    let mode = parse_spin_mode(&args.spin)?;
    let max_twice = max_spin_twice()?;
    if args.beta.is_some() && protocol != ProtocolId::D {
        return Err(invalid("--beta applies to protocol D only".into()));
    }
    let needs_bloch = matches!(protocol, ProtocolId::A | ProtocolId::C);
    if args.bloch.is_some() && !needs_bloch {
        return Err(invalid(format!("--bloch does not apply to protocol {protocol}")));
    }
    if args.dir.is_some() && protocol != ProtocolId::B {
        return Err(invalid(format!("--dir does not apply to protocol {protocol}")));
    }
    let bloch = || -> Result<BlochVector, Failure> {
        let v = parse_vec3(args.bloch.as_deref().unwrap_or("0,0,1"), "--bloch")?;
        Ok(BlochVector::from_array(v)?)
    };
    let transcript: ProtocolTranscript = match protocol {
        ProtocolId::A => {
            let p = bloch()?;
            protocol_unknown_qubit(&p, args.alpha, resolve_spin(mode, args.alpha, max_twice)?, args.seed)?
        }
        ProtocolId::B => {
            let m = parse_vec3(args.dir.as_deref().unwrap_or("0,0,1"), "--dir")?;
            protocol_known_qubit(&m, args.alpha, resolve_spin(mode, args.alpha, max_twice)?, args.seed)?
        }
        ProtocolId::C => {
            let p = bloch()?;
            protocol_unknown_qudit(&p, args.alpha, resolve_spin(mode, args.alpha, max_twice)?, args.seed)?
        }
        ProtocolId::D => {
            let beta = args.beta.ok_or_else(|| invalid("protocol D requires --beta".into()))?;
            let worst = if args.alpha.abs() >= beta.abs() { args.alpha } else { beta };
            protocol_discord_swap(args.alpha, beta, resolve_spin(mode, worst, max_twice)?, args.seed)?
        }
    };
    let json = serde_json::to_string_pretty(&transcript).expect("transcript serializes");
    write_output(args.out.as_deref(), &(json + "\n"))?;
    if !transcript.verified() {
        return Err(Failure {
            code: 1,
            message: format!(
                "verification-failed: protocol {protocol} residual {:.3e} exceeds tolerance",
                transcript.max_residual()
            ),
        });
    }
    Ok(())
}

fn sweep(kind: SweepKind) -> Result<(), Failure> {
    let max_twice = max_spin_twice()?;
    let (spec, out) = match kind {
        SweepKind::Fidelity { alpha_range, spin, seed, out } => (
            SweepSpec::Fidelity { alphas: parse_alpha_range(&alpha_range)?, spin: parse_spin_mode(&spin)?, seed, max_twice },
            out,
        ),
        SweepKind::Distance { spin_range, alpha, out } => {
            (SweepSpec::Distance { spins: parse_spin_range(&spin_range)?, alpha, max_twice }, out)
        }
    };
    write_output(out.as_deref(), &run_sweep(&spec)?)
}

fn verify_scope(scope: &str) -> Result<(), Failure> {
    let scopes = parse_scopes(scope)?;
    let report = verify(&scopes, &VerifyConfig::default());
    print!("{}", report.render());
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failure { code: 1, message: format!("verification-failed: {} check(s) failed", report.failures().len()) })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Sweep { kind } => sweep(kind),
        Command::Verify { scope } => verify_scope(&scope),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
