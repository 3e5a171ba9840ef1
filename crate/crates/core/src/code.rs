//! Linear code state, the rank invariant over `H`, random construction and
//! random functional repair.
//!
//! Node `i` stores the `d` packets `Xᵀ Q_i`, where `X` is the `M x W` file
//! and `Q_i` an `M x d` coding matrix. The invariant requires that for every
//! `h ∈ H` the column selection `[Q_1 E_{h_1} | … | Q_n E_{h_n}]` has full
//! column rank; for members with `Σh = M` this is a nonzero determinant.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::connect::{connect_run, validate_helpers};
use crate::error::{Error, Result};
use crate::galois::{next_prime, FieldConfig, FieldMatrix};
use crate::mfhs::{HSet, Params};

/// Default retry budget for construction and repair.
pub const DEFAULT_MAX_ATTEMPTS: u32 = 16;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "StateRepr", into = "StateRepr")]
pub struct CodeState {
    params: Params,
    field: FieldConfig,
    width: usize,
    coding: Vec<FieldMatrix>,
}

#[derive(Serialize, Deserialize)]
struct StateRepr {
    params: Params,
    q: u64,
    #[serde(rename = "W")]
    width: usize,
    #[serde(rename = "Q")]
    coding: Vec<FieldMatrix>,
}

impl From<CodeState> for StateRepr {
    fn from(s: CodeState) -> Self {
        StateRepr {
            params: s.params,
            q: s.field.modulus(),
            width: s.width,
            coding: s.coding,
        }
    }
}

impl TryFrom<StateRepr> for CodeState {
    type Error = Error;

    fn try_from(r: StateRepr) -> Result<Self> {
        let field = FieldConfig::new(r.q)?;
        CodeState::new(r.params, field, r.width, r.coding)
    }
}

impl CodeState {
    pub fn new(params: Params, field: FieldConfig, width: usize, coding: Vec<FieldMatrix>) -> Result<Self> {
        if coding.len() != params.n() {
            return Err(Error::DimensionMismatch(format!(
                "{} coding matrices for n = {}",
                coding.len(),
                params.n()
            )));
        }
        for (i, q) in coding.iter().enumerate() {
            if q.field() != field {
                return Err(Error::FieldMismatch(field.modulus(), q.field().modulus()));
            }
            if (q.rows(), q.cols()) != (params.file_size(), params.d()) {
                return Err(Error::DimensionMismatch(format!(
                    "Q_{} is {}x{}, expected {}x{}",
                    i + 1,
                    q.rows(),
                    q.cols(),
                    params.file_size(),
                    params.d()
                )));
            }
        }
        if width == 0 {
            return Err(Error::Malformed("packet width must be positive".into()));
        }
        Ok(Self {
            params,
            field,
            width,
            coding,
        })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn field(&self) -> FieldConfig {
        self.field
    }

    /// Symbols per packet.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn with_width(mut self, width: usize) -> Result<Self> {
        if width == 0 {
            return Err(Error::Malformed("packet width must be positive".into()));
        }
        self.width = width;
        Ok(self)
    }

    pub fn coding(&self) -> &[FieldMatrix] {
        &self.coding
    }

    /// Coding matrix of `node` (0-based).
    pub fn q(&self, node: usize) -> &FieldMatrix {
        &self.coding[node]
    }

    /// `[Q_1 E_{h_1} | … | Q_n E_{h_n}]`.
    pub fn column_selection(&self, h: &[usize]) -> Result<FieldMatrix> {
        if h.len() != self.params.n() {
            return Err(Error::LengthMismatch(h.len(), self.params.n()));
        }
        let parts = self
            .coding
            .iter()
            .zip(h)
            .map(|(q, &x)| q.select_columns(x))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&FieldMatrix> = parts.iter().collect();
        FieldMatrix::hstack(self.field, self.params.file_size(), &refs)
    }
}

/// `n d M |H| + 1`: the smallest modulus the degree argument covers.
pub fn required_field_size(params: &Params, hset: &HSet) -> u64 {
    (params.n() * params.d() * params.file_size() * hset.len()) as u64 + 1
}

/// A chosen field together with how it compares to the sufficient bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FieldChoice {
    pub q: u64,
    pub bound: u64,
    /// Set when a user-supplied modulus falls below `bound`.
    pub below_bound: bool,
}

impl FieldChoice {
    pub fn field(&self) -> FieldConfig {
        FieldConfig::new(self.q).expect("FieldChoice only holds primes")
    }
}

/// `None` picks the smallest prime at or above the bound; an explicit
/// modulus is accepted even when smaller, with `below_bound` set.
pub fn choose_field(params: &Params, hset: &HSet, q: Option<u64>) -> Result<FieldChoice> {
    let bound = required_field_size(params, hset);
    match q {
        None => Ok(FieldChoice {
            q: next_prime(bound),
            bound,
            below_bound: false,
        }),
        Some(q) => {
            FieldConfig::new(q)?;
            Ok(FieldChoice {
                q,
                bound,
                below_bound: q < bound,
            })
        }
    }
}

/// First member of `H` (heaviest first) whose selection is rank deficient.
pub fn invariant_violation<'a>(state: &CodeState, hset: &'a HSet) -> Option<&'a [usize]> {
    hset.by_weight_desc()
        .find(|h| {
            let sel = state.column_selection(h).expect("members have length n");
            sel.rank() < h.weight()
        })
        .map(|h| &h.0[..])
}

pub fn invariant_check(state: &CodeState, hset: &HSet) -> bool {
    invariant_violation(state, hset).is_none()
}

/// Every `k` nodes jointly span the whole file space.
pub fn reconstruct_check(state: &CodeState) -> bool {
    use itertools::Itertools;
    let p = state.params();
    (0..p.n()).combinations(p.k()).all(|subset| {
        let parts: Vec<&FieldMatrix> = subset.iter().map(|&i| state.q(i)).collect();
        FieldMatrix::hstack(state.field(), p.file_size(), &parts)
            .map(|m| m.rank() == p.file_size())
            .unwrap_or(false)
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Construction {
    pub state: CodeState,
    pub attempts: u32,
}

/// Samples all `Q_i` uniformly until the invariant holds.
pub fn construct(
    params: &Params,
    field: FieldConfig,
    hset: &HSet,
    seed: u64,
    max_attempts: u32,
) -> Result<Construction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m, d) = (params.file_size(), params.d());
    for attempt in 1..=max_attempts {
        let coding = (0..params.n())
            .map(|_| FieldMatrix::random(field, m, d, &mut rng))
            .collect();
        let state = CodeState::new(params.clone(), field, 1, coding)?;
        if invariant_check(&state, hset) {
            return Ok(Construction {
                state,
                attempts: attempt,
            });
        }
    }
    Err(Error::ConstructionFailed(max_attempts))
}

/// One repair event: `Q'_failed = [Q_{x_1} b_1 | … | Q_{x_d} b_d] Z`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RepairPlan {
    pub failed: usize,
    pub helpers: Vec<usize>,
    /// `b_i`, each `d x 1`.
    pub combine: Vec<FieldMatrix>,
    /// `Z`, `d x d`.
    pub mix: FieldMatrix,
}

impl RepairPlan {
    /// Coding matrix the newcomer ends up with.
    pub fn regenerate(&self, state: &CodeState) -> Result<FieldMatrix> {
        let p = state.params();
        validate_helpers(p, self.failed, &self.helpers)?;
        if self.combine.len() != self.helpers.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} combination vectors for {} helpers",
                self.combine.len(),
                self.helpers.len()
            )));
        }
        let received = self
            .helpers
            .iter()
            .zip(&self.combine)
            .map(|(&x, b)| state.q(x).mul(b))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&FieldMatrix> = received.iter().collect();
        FieldMatrix::hstack(state.field(), p.file_size(), &refs)?.mul(&self.mix)
    }

    /// The state with `Q_failed` replaced; every other node is untouched.
    pub fn apply(&self, state: &CodeState) -> Result<CodeState> {
        let fresh = self.regenerate(state)?;
        let mut coding = state.coding.clone();
        coding[self.failed] = fresh;
        Ok(CodeState { coding, ..state.clone() })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Repair {
    pub state: CodeState,
    pub plan: RepairPlan,
    pub attempts: u32,
}

/// Random functional repair: uniform `b_i` and `Z`, resampled until the
/// invariant holds on the updated state.
pub fn repair_random(
    state: &CodeState,
    hset: &HSet,
    failed: usize,
    helpers: &[usize],
    seed: u64,
    max_attempts: u32,
) -> Result<Repair> {
    let p = state.params();
    validate_helpers(p, failed, helpers)?;
    let field = state.field();
    let d = p.d();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 1..=max_attempts {
        let plan = RepairPlan {
            failed,
            helpers: helpers.to_vec(),
            combine: (0..d).map(|_| FieldMatrix::random(field, d, 1, &mut rng)).collect(),
            mix: FieldMatrix::random(field, d, d, &mut rng),
        };
        let next = plan.apply(state)?;
        if invariant_check(&next, hset) {
            return Ok(Repair {
                state: next,
                plan,
                attempts: attempt,
            });
        }
    }
    Err(Error::RepairFailed(max_attempts))
}

/// The deterministic repair that certifies the invariant factor for `h` is a
/// nonzero polynomial: CONNECT yields `h'` and the incremented helpers
/// `s_1..s_{h_failed}`; `b_j` picks column `h'_{s_j}` of `Q_{s_j}` and `Z = I`.
pub fn witness_plan(state: &CodeState, failed: usize, helpers: &[usize], h: &[usize]) -> Result<RepairPlan> {
    let p = state.params();
    let outcome = connect_run(p, h, helpers, failed)?;
    let field = state.field();
    let d = p.d();
    let mut ordered = outcome.incremented.clone();
    let mut rest: Vec<usize> = helpers.iter().copied().filter(|x| !ordered.contains(x)).collect();
    rest.sort_unstable();
    ordered.extend(rest);
    let combine = ordered
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            // 1-based column h'_x is 0-based column h_x
            let col = if j < outcome.incremented.len() { h[x] } else { 0 };
            FieldMatrix::unit(field, d, col)
        })
        .collect();
    Ok(RepairPlan {
        failed,
        helpers: ordered,
        combine,
        mix: FieldMatrix::identity(field, d),
    })
}

/// Applies [`witness_plan`] and checks the selection for `h` has full rank.
pub fn witness_repair_check(
    state: &CodeState,
    failed: usize,
    helpers: &[usize],
    h: &[usize],
    hset: &HSet,
) -> Result<bool> {
    if !hset.contains(h) {
        return Err(Error::HNotMember(h.to_vec()));
    }
    let plan = witness_plan(state, failed, helpers, h)?;
    let repaired = plan.apply(state)?;
    let sel = repaired.column_selection(h)?;
    Ok(sel.rank() == h.iter().sum::<usize>())
}

/// Packets held by each node: `Xᵀ Q_i`, a `W x d` matrix whose columns are
/// the node's `d` packets.
pub fn encode(state: &CodeState, file: &FieldMatrix) -> Result<Vec<FieldMatrix>> {
    if file.rows() != state.params().file_size() {
        return Err(Error::DimensionMismatch(format!(
            "file has {} rows, expected M = {}",
            file.rows(),
            state.params().file_size()
        )));
    }
    let xt = file.transpose();
    state.coding.iter().map(|q| xt.mul(q)).collect()
}

/// Recovers `X` from the packets of `nodes`.
pub fn decode(state: &CodeState, nodes: &[usize], packets: &[FieldMatrix]) -> Result<FieldMatrix> {
    let p = state.params();
    if nodes.len() != packets.len() {
        return Err(Error::LengthMismatch(nodes.len(), packets.len()));
    }
    if nodes.is_empty() {
        return Err(Error::RankDeficient {
            rank: 0,
            needed: p.file_size(),
        });
    }
    if let Some(&bad) = nodes.iter().find(|&&i| i >= p.n()) {
        return Err(Error::OutOfRange { index: bad, max: p.n() - 1 });
    }
    let width = packets[0].rows();
    let coding: Vec<&FieldMatrix> = nodes.iter().map(|&i| state.q(i)).collect();
    // Xᵀ [Q_S] = [packets]  <=>  [Q_S]ᵀ X = [packets]ᵀ
    let system = FieldMatrix::hstack(state.field(), p.file_size(), &coding)?.transpose();
    let received: Vec<&FieldMatrix> = packets.iter().collect();
    let rhs = FieldMatrix::hstack(state.field(), width, &received)?.transpose();
    system.solve(&rhs)
}
