//! Command-line front end. All results go to stdout as JSON, diagnostics to
//! stderr. Exit status: 0 when every requested check passes, 1 when a check
//! fails, 2 for usage and input errors. Node labels on the command line and
//! in output are 1-based.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::code::{
    choose_field, construct, invariant_violation, reconstruct_check, repair_random, witness_repair_check, CodeState,
    DEFAULT_MAX_ATTEMPTS,
};
use crate::connect::{connect_run, TraceStepJson};
use crate::error::Error;
use crate::exact6321::{build_exact_code, verify_exact_code};
use crate::mfhs::{HSet, Params};
use crate::sim::{simulate, Checks, FailurePolicy, FieldSpec, HelperPolicy, SimConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "lrrc", version, about = "Locally repairable regenerating codes at the MBR point")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Copy)]
struct ParamArgs {
    n: usize,
    k: usize,
    d: usize,
    r: usize,
}

impl ParamArgs {
    fn params(self) -> Result<Params, Error> {
        Params::new(self.n, self.k, self.d, self.r)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print derived parameters: M, alpha, beta and the family partition.
    Params(ParamArgs),
    /// Stream the members of H as JSON lines with a witness permutation.
    EnumerateH(ParamArgs),
    /// Randomly construct a code satisfying the rank invariant.
    Construct {
        #[command(flatten)]
        params: ParamArgs,
        /// Field modulus, or "auto" for the next prime above the bound.
        #[arg(long, default_value = "auto")]
        q: FieldSpec,
        #[arg(long, env = "LRRC_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_MAX_ATTEMPTS)]
        max_attempts: u32,
        /// Symbols per packet recorded in the state.
        #[arg(long, default_value_t = 1)]
        width: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Randomly repair one node of a stored code state.
    Repair {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        failed: usize,
        #[arg(long, value_delimiter = ',')]
        helpers: Vec<usize>,
        #[arg(long, env = "LRRC_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_MAX_ATTEMPTS)]
        max_attempts: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a stored code state. Without flags, runs invariant and reconstruction.
    Verify {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        invariant: bool,
        #[arg(long)]
        reconstruct: bool,
        /// Witness sweep over all of H; needs --failed and --helpers.
        #[arg(long, requires_all = ["failed", "helpers"])]
        witness: bool,
        #[arg(long)]
        failed: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        helpers: Option<Vec<usize>>,
    },
    /// Run the CONNECT procedure on one vector of H.
    Connect {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, value_delimiter = ',')]
        h: Vec<usize>,
        #[arg(long)]
        failed: usize,
        #[arg(long, value_delimiter = ',')]
        helpers: Vec<usize>,
    },
    /// Build (and optionally verify) the explicit (6,3,2,1) exact-repair code.
    #[command(name = "exact6321")]
    Exact6321 {
        #[arg(long, default_value_t = 7)]
        q: u64,
        #[arg(long)]
        verify: bool,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Run a failure/repair simulation.
    Simulate {
        /// n k d r; optional when --config is given.
        #[arg(num_args = 4, value_names = ["N", "K", "D", "R"])]
        params: Option<Vec<usize>>,
        /// JSON file in the SimConfig shape; flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        q: Option<FieldSpec>,
        #[arg(long, env = "LRRC_SEED")]
        seed: Option<u64>,
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long, value_parser = parse_failure_policy)]
        failure_policy: Option<FailurePolicy>,
        #[arg(long, value_parser = parse_helper_policy)]
        helper_policy: Option<HelperPolicy>,
        /// Comma list drawn from invariant, reconstruction, witness.
        #[arg(long, value_delimiter = ',')]
        checks: Option<Vec<String>>,
        #[arg(long)]
        max_attempts: Option<u32>,
        /// Write the final code state here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_failure_policy(s: &str) -> Result<FailurePolicy, String> {
    serde_json::from_value(json!(s)).map_err(|_| format!("unknown failure policy {s:?}"))
}

fn parse_helper_policy(s: &str) -> Result<HelperPolicy, String> {
    serde_json::from_value(json!(s)).map_err(|_| format!("unknown helper policy {s:?}"))
}

/// Failure modes of one invocation, mapped onto exit codes.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::ConstructionFailed(_)
            | Error::RepairFailed(_)
            | Error::InternalContradiction(_)
            | Error::RankDeficient { .. } => Failure::Check(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type CliResult = Result<bool, Failure>;

fn to_zero_based(labels: &[usize], n: usize) -> Result<Vec<usize>, Failure> {
    labels
        .iter()
        .map(|&l| {
            if (1..=n).contains(&l) {
                Ok(l - 1)
            } else {
                Err(Failure::Usage(format!("node label {l} outside 1..={n}")))
            }
        })
        .collect()
}

fn one_based(v: &[usize]) -> Vec<usize> {
    v.iter().map(|x| x + 1).collect()
}

fn emit<W: Write, T: Serialize>(out: &mut W, value: &T) -> Result<(), Failure> {
    let s = serde_json::to_string_pretty(value).map_err(|e| Failure::Usage(e.to_string()))?;
    writeln!(out, "{s}").map_err(|e| Failure::Usage(e.to_string()))
}

fn read_state(path: &Path) -> Result<CodeState, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let s = serde_json::to_string_pretty(value).map_err(|e| Failure::Usage(e.to_string()))?;
    std::fs::write(path, s + "\n").map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn dispatch<W: Write, E: Write>(command: Command, out: &mut W, err: &mut E) -> CliResult {
    match command {
        Command::Params(a) => {
            emit(out, &a.params()?)?;
            Ok(true)
        }
        Command::EnumerateH(a) => {
            let params = a.params()?;
            let hset = HSet::cached(&params)?;
            for (h, w) in hset.iter() {
                let line = json!({"h": h, "witness_perm": w.to_one_based()});
                writeln!(out, "{line}").map_err(|e| Failure::Usage(e.to_string()))?;
            }
            Ok(true)
        }
        Command::Construct {
            params,
            q,
            seed,
            max_attempts,
            width,
            out: path,
        } => {
            let params = params.params()?;
            let hset = HSet::cached(&params)?;
            let fixed = match q {
                FieldSpec::Auto => None,
                FieldSpec::Fixed(q) => Some(q),
            };
            let choice = choose_field(&params, &hset, fixed)?;
            if choice.below_bound {
                let _ = writeln!(
                    err,
                    "warning: q = {} is below the sufficient bound {}; construction may need retries or fail",
                    choice.q, choice.bound
                );
            }
            let built = construct(&params, choice.field(), &hset, seed, max_attempts)?;
            let state = built.state.with_width(width)?;
            let reconstruct = reconstruct_check(&state);
            if let Some(path) = &path {
                write_json(path, &state)?;
            }
            emit(
                out,
                &json!({
                    "params": params,
                    "q": choice.q,
                    "field_bound": choice.bound,
                    "below_bound": choice.below_bound,
                    "h_size": hset.len(),
                    "seed": seed,
                    "attempts": built.attempts,
                    "invariant": true,
                    "reconstruct": reconstruct,
                    "state": if path.is_some() { serde_json::Value::Null } else { serde_json::to_value(&state).expect("state serializes") },
                }),
            )?;
            Ok(reconstruct)
        }
        Command::Repair {
            state,
            failed,
            helpers,
            seed,
            max_attempts,
            out: path,
        } => {
            let state = read_state(&state)?;
            let n = state.params().n();
            let failed = to_zero_based(&[failed], n)?[0];
            let helpers = to_zero_based(&helpers, n)?;
            let hset = HSet::cached(state.params())?;
            let repaired = repair_random(&state, &hset, failed, &helpers, seed, max_attempts)?;
            let reconstruct = reconstruct_check(&repaired.state);
            if let Some(path) = &path {
                write_json(path, &repaired.state)?;
            }
            emit(
                out,
                &json!({
                    "failed": failed + 1,
                    "helpers": one_based(&helpers),
                    "seed": seed,
                    "attempts": repaired.attempts,
                    "invariant": true,
                    "reconstruct": reconstruct,
                    "state": if path.is_some() { serde_json::Value::Null } else { serde_json::to_value(&repaired.state).expect("state serializes") },
                }),
            )?;
            Ok(reconstruct)
        }
        Command::Verify {
            state,
            invariant,
            reconstruct,
            witness,
            failed,
            helpers,
        } => {
            let state = read_state(&state)?;
            let (run_inv, run_rec) = if invariant || reconstruct || witness {
                (invariant, reconstruct)
            } else {
                (true, true)
            };
            let hset = HSet::cached(state.params())?;
            let mut report = serde_json::Map::new();
            let mut pass = true;
            if run_inv {
                let violation = invariant_violation(&state, &hset);
                pass &= violation.is_none();
                report.insert("invariant".into(), json!(violation.is_none()));
                if let Some(h) = violation {
                    report.insert("invariant_violation".into(), json!(h));
                }
            }
            if run_rec {
                let ok = reconstruct_check(&state);
                pass &= ok;
                report.insert("reconstruct".into(), json!(ok));
            }
            if witness {
                let n = state.params().n();
                let failed = to_zero_based(&[failed.expect("clap enforces")], n)?[0];
                let helpers = to_zero_based(&helpers.expect("clap enforces"), n)?;
                let mut failures = Vec::new();
                for h in hset.members() {
                    if !witness_repair_check(&state, failed, &helpers, h, &hset)? {
                        failures.push(h.0.clone());
                    }
                }
                pass &= failures.is_empty();
                report.insert(
                    "witness".into(),
                    json!({"checked": hset.len(), "passed": hset.len() - failures.len(), "failures": failures}),
                );
            }
            report.insert("pass".into(), json!(pass));
            emit(out, &report)?;
            Ok(pass)
        }
        Command::Connect {
            params,
            h,
            failed,
            helpers,
        } => {
            let params = params.params()?;
            let n = params.n();
            let failed = to_zero_based(&[failed], n)?[0];
            let helpers = to_zero_based(&helpers, n)?;
            if h.len() != n {
                return Err(Failure::Usage(format!("--h needs {n} values, got {}", h.len())));
            }
            let outcome = connect_run(&params, &h, &helpers, failed)?;
            let trace: Vec<TraceStepJson> = outcome.trace.iter().map(TraceStepJson::from).collect();
            emit(
                out,
                &json!({
                    "h": h,
                    "failed": failed + 1,
                    "helpers": one_based(&helpers),
                    "h_prime": outcome.h_prime,
                    "incremented": one_based(&outcome.incremented),
                    "trace": trace,
                }),
            )?;
            Ok(true)
        }
        Command::Exact6321 { q, verify, emit: path } => {
            let code = build_exact_code(q)?;
            if let Some(path) = &path {
                write_json(path, &code.to_json())?;
            }
            if verify {
                let report = verify_exact_code(&code);
                emit(out, &report)?;
                Ok(report.pass)
            } else {
                emit(out, &code.to_json())?;
                Ok(true)
            }
        }
        Command::Simulate {
            params,
            config,
            q,
            seed,
            rounds,
            failure_policy,
            helper_policy,
            checks,
            max_attempts,
            out: path,
        } => {
            let mut cfg = match (&config, &params) {
                (Some(path), _) => {
                    let text =
                        std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
                    serde_json::from_str::<SimConfig>(&text)
                        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
                }
                (None, Some(p)) => SimConfig::new(Params::new(p[0], p[1], p[2], p[3])?, 0, 0),
                (None, None) => return Err(Failure::Usage("simulate needs n k d r or --config".into())),
            };
            if let (Some(_), Some(p)) = (&config, &params) {
                cfg.params = Params::new(p[0], p[1], p[2], p[3])?;
            }
            if let Some(q) = q {
                cfg.q = q;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(rounds) = rounds {
                cfg.rounds = rounds;
            }
            if let Some(p) = failure_policy {
                cfg.failure_policy = p;
            }
            if let Some(p) = helper_policy {
                cfg.helper_policy = p;
            }
            if let Some(m) = max_attempts {
                cfg.max_attempts = m;
            }
            if let Some(list) = checks {
                let mut c = Checks {
                    invariant: false,
                    reconstruction: false,
                    witness: false,
                };
                for name in list {
                    match name.as_str() {
                        "invariant" => c.invariant = true,
                        "reconstruction" | "reconstruct" => c.reconstruction = true,
                        "witness" => c.witness = true,
                        other => return Err(Failure::Usage(format!("unknown check {other:?}"))),
                    }
                }
                cfg.checks = c;
            }
            let report = simulate(&cfg)?;
            if let (Some(path), Some(state)) = (&path, &report.final_state) {
                write_json(path, state)?;
            }
            emit(out, &report)?;
            Ok(report.pass())
        }
    }
}

/// Parses `argv` (program name first) and runs one subcommand.
pub fn run_cli<I, T, W, E>(argv: I, out: &mut W, err: &mut E) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
    W: Write,
    E: Write,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            if e.use_stderr() {
                let _ = write!(err, "{e}");
            } else {
                let _ = write!(out, "{e}");
            }
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_CHECK_FAILED,
        Err(Failure::Check(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_CHECK_FAILED
        }
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
    }
}
