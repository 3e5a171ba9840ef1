//! Reproducible failure/repair experiments.
//!
//! A run constructs a code, then executes `rounds` failure/repair events
//! under the configured policies, checking the enabled properties after each
//! event. Everything except the wall-clock fields is a function of the
//! configuration and seed.

use std::collections::BTreeMap;
use std::time::Instant;

use itertools::Itertools;
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::code::{
    choose_field, construct, invariant_check, reconstruct_check, repair_random, witness_repair_check, CodeState,
    DEFAULT_MAX_ATTEMPTS,
};
use crate::error::{Error, Result};
use crate::mfhs::{HSet, Params};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailurePolicy {
    RoundRobin,
    UniformRandom,
    /// Every node is failed and repaired from the current state each round;
    /// the round-robin one is committed.
    AdversarialSweep,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HelperPolicy {
    UniformRandom,
    /// Every `d`-subset of the helper universe must admit a repair; one of
    /// them (rotating with the round) is committed.
    ExhaustivePerFailure,
}

/// Field modulus: a fixed prime or `"auto"` (next prime at or above the
/// sufficient bound).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "serde_json::Value", into = "serde_json::Value")]
pub enum FieldSpec {
    Auto,
    Fixed(u64),
}

impl TryFrom<serde_json::Value> for FieldSpec {
    type Error = Error;

    fn try_from(v: serde_json::Value) -> Result<Self> {
        match &v {
            serde_json::Value::String(s) => s.parse(),
            serde_json::Value::Number(n) => n
                .as_u64()
                .map(FieldSpec::Fixed)
                .ok_or_else(|| Error::Malformed(format!("bad modulus {n}"))),
            _ => Err(Error::Malformed(format!("q must be \"auto\" or an integer, got {v}"))),
        }
    }
}

impl From<FieldSpec> for serde_json::Value {
    fn from(f: FieldSpec) -> Self {
        match f {
            FieldSpec::Auto => "auto".into(),
            FieldSpec::Fixed(q) => q.into(),
        }
    }
}

impl std::str::FromStr for FieldSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(FieldSpec::Auto);
        }
        s.parse()
            .map(FieldSpec::Fixed)
            .map_err(|_| Error::Malformed(format!("q must be \"auto\" or an integer, got {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Checks {
    pub invariant: bool,
    pub reconstruction: bool,
    pub witness: bool,
}

impl Default for Checks {
    fn default() -> Self {
        Self {
            invariant: true,
            reconstruction: true,
            witness: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: Params,
    #[serde(default = "auto")]
    pub q: FieldSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub rounds: usize,
    #[serde(default = "round_robin")]
    pub failure_policy: FailurePolicy,
    #[serde(default = "uniform_helpers")]
    pub helper_policy: HelperPolicy,
    #[serde(default)]
    pub checks: Checks,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
}

fn auto() -> FieldSpec {
    FieldSpec::Auto
}
fn round_robin() -> FailurePolicy {
    FailurePolicy::RoundRobin
}
fn uniform_helpers() -> HelperPolicy {
    HelperPolicy::UniformRandom
}
fn default_attempts() -> u32 {
    DEFAULT_MAX_ATTEMPTS
}

impl SimConfig {
    pub fn new(params: Params, seed: u64, rounds: usize) -> Self {
        Self {
            params,
            q: FieldSpec::Auto,
            seed,
            rounds,
            failure_policy: FailurePolicy::RoundRobin,
            helper_policy: HelperPolicy::UniformRandom,
            checks: Checks::default(),
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CheckResults {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invariant: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reconstruction: Option<bool>,
    /// Members of `H` whose witness repair was checked / passed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessTally>,
}

impl CheckResults {
    pub fn pass(&self) -> bool {
        self.invariant != Some(false)
            && self.reconstruction != Some(false)
            && self.witness.as_ref().is_none_or(|w| w.passed == w.checked)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct WitnessTally {
    pub checked: usize,
    pub passed: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConstructionRecord {
    pub attempts: u32,
    pub checks: CheckResults,
}

/// One failure/repair event; node labels are 1-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    pub failed: usize,
    pub helpers: Vec<usize>,
    /// Attempts used by the committed repair.
    pub attempts: u32,
    /// Repairs attempted this round, including sweep candidates.
    pub candidate_repairs: usize,
    pub checks: CheckResults,
    pub pass: bool,
    pub wall_time_us: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Aggregate {
    pub rounds_passed: usize,
    pub repairs: usize,
    pub attempts: u64,
    pub retries: u64,
    /// attempts-per-repair -> count
    pub retry_histogram: BTreeMap<u32, usize>,
    /// Rejected attempts over all attempts.
    pub empirical_repair_failure_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimFailure {
    pub round: usize,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimReport {
    pub version: String,
    pub config: SimConfig,
    pub q: u64,
    pub field_bound: u64,
    pub below_bound: bool,
    pub h_size: usize,
    pub construction: ConstructionRecord,
    pub rounds: Vec<RoundRecord>,
    pub aggregate: Aggregate,
    pub failure: Option<SimFailure>,
    /// Final code state; not rendered into the JSON report.
    #[serde(skip)]
    pub final_state: Option<CodeState>,
}

impl SimReport {
    /// True when construction and every round passed and nothing aborted.
    pub fn pass(&self) -> bool {
        self.failure.is_none()
            && self.construction.checks.pass()
            && self.rounds.len() == self.config.rounds
            && self.aggregate.rounds_passed == self.rounds.len()
    }

    /// Zeroes wall-clock fields so reports can be compared byte for byte.
    pub fn strip_timing(&mut self) {
        for r in &mut self.rounds {
            r.wall_time_us = 0;
        }
    }
}

fn run_checks(state: &CodeState, hset: &HSet, checks: Checks) -> CheckResults {
    CheckResults {
        invariant: checks.invariant.then(|| invariant_check(state, hset)),
        reconstruction: checks.reconstruction.then(|| reconstruct_check(state)),
        witness: None,
    }
}

fn witness_sweep(state: &CodeState, hset: &HSet, failed: usize, helpers: &[usize]) -> WitnessTally {
    let passed = hset
        .members()
        .iter()
        .filter(|h| witness_repair_check(state, failed, helpers, h, hset).unwrap_or(false))
        .count();
    WitnessTally {
        checked: hset.len(),
        passed,
    }
}

struct Tally {
    repairs: usize,
    attempts: u64,
    histogram: BTreeMap<u32, usize>,
}

impl Tally {
    fn record(&mut self, attempts: u32) {
        self.repairs += 1;
        self.attempts += attempts as u64;
        *self.histogram.entry(attempts).or_default() += 1;
    }
}

fn attempts_of(err: &Error) -> Option<u32> {
    match err {
        Error::RepairFailed(n) => Some(*n),
        _ => None,
    }
}

pub fn simulate(config: &SimConfig) -> Result<SimReport> {
    let params = &config.params;
    let hset = HSet::cached(params)?;
    let fixed = match config.q {
        FieldSpec::Auto => None,
        FieldSpec::Fixed(q) => Some(q),
    };
    let choice = choose_field(params, &hset, fixed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let built = construct(params, choice.field(), &hset, rng.next_u64(), config.max_attempts)?;
    let mut state = built.state;
    let construction = ConstructionRecord {
        attempts: built.attempts,
        checks: run_checks(&state, &hset, config.checks),
    };

    let n = params.n();
    let mut tally = Tally {
        repairs: 0,
        attempts: 0,
        histogram: BTreeMap::new(),
    };
    let mut rounds = Vec::with_capacity(config.rounds);
    let mut failure = None;

    'rounds: for round in 0..config.rounds {
        let started = Instant::now();
        let committed_failed = match config.failure_policy {
            FailurePolicy::RoundRobin | FailurePolicy::AdversarialSweep => round % n,
            FailurePolicy::UniformRandom => rng.random_range(0..n),
        };
        let failures: Vec<usize> = match config.failure_policy {
            FailurePolicy::AdversarialSweep => (0..n).collect(),
            _ => vec![committed_failed],
        };

        let mut committed = None;
        let mut candidates = 0;
        for failed in failures {
            let universe = params.helper_universe(failed);
            let subsets: Vec<Vec<usize>> = universe.iter().copied().combinations(params.d()).collect();
            let (tried, commit_idx): (Vec<usize>, usize) = match config.helper_policy {
                HelperPolicy::UniformRandom => {
                    let i = rng.random_range(0..subsets.len());
                    (vec![i], i)
                }
                HelperPolicy::ExhaustivePerFailure => ((0..subsets.len()).collect(), round % subsets.len()),
            };
            for i in tried {
                let helpers = &subsets[i];
                candidates += 1;
                match repair_random(&state, &hset, failed, helpers, rng.next_u64(), config.max_attempts) {
                    Ok(rep) => {
                        tally.record(rep.attempts);
                        if failed == committed_failed && i == commit_idx {
                            committed = Some(rep);
                        }
                    }
                    Err(e) => {
                        if let Some(a) = attempts_of(&e) {
                            tally.attempts += a as u64;
                        }
                        failure = Some(SimFailure {
                            round,
                            error: format!("node {} with helpers {:?}: {e}", failed + 1, helpers.iter().map(|h| h + 1).collect::<Vec<_>>()),
                        });
                        break 'rounds;
                    }
                }
            }
        }

        let rep = committed.expect("the committed candidate is always attempted");
        let witness = config
            .checks
            .witness
            .then(|| witness_sweep(&state, &hset, rep.plan.failed, &sorted(&rep.plan.helpers)));
        state = rep.state;
        let mut checks = run_checks(&state, &hset, config.checks);
        checks.witness = witness;
        let pass = checks.pass();
        rounds.push(RoundRecord {
            round,
            failed: rep.plan.failed + 1,
            helpers: sorted(&rep.plan.helpers).iter().map(|h| h + 1).collect(),
            attempts: rep.attempts,
            candidate_repairs: candidates,
            checks,
            pass,
            wall_time_us: started.elapsed().as_micros() as u64,
        });
    }

    let rejected = tally.attempts - tally.repairs as u64;
    let aggregate = Aggregate {
        rounds_passed: rounds.iter().filter(|r| r.pass).count(),
        repairs: tally.repairs,
        attempts: tally.attempts,
        retries: rejected,
        retry_histogram: tally.histogram,
        empirical_repair_failure_rate: if tally.attempts == 0 {
            0.0
        } else {
            rejected as f64 / tally.attempts as f64
        },
    };
    Ok(SimReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        q: choice.q,
        field_bound: choice.bound,
        below_bound: choice.below_bound,
        h_size: hset.len(),
        construction,
        rounds,
        aggregate,
        failure,
        final_state: Some(state),
    })
}

fn sorted(v: &[usize]) -> Vec<usize> {
    let mut v = v.to_vec();
    v.sort_unstable();
    v
}
