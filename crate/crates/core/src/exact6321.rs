//! Explicit exact-repair code for `(n, k, d, r) = (6, 3, 2, 1)`.
//!
//! `M = 4`, `α = 2`, `β = 1`. Family 1 is nodes 1–3, family 2 nodes 4–6
//! (0-based `0..3` and `3..6` here). The code starts from a systematic (6,4)
//! MDS generator `G = [I₄ | u ū]` with `u = (a₁, a₂, b₁, b₂)ᵀ` and
//! `ū = (ā₁, ā₂, b̄₁, b̄₂)ᵀ`:
//!
//! ```text
//! Q1 = [e1 e2]   Q2 = [e3 e4]   Q3 = [u ū]
//! Q4 = [(a,0) (0,b)]   Q5 = [(ā,0) (0,b̄)]   Q6 = [(a+ā,0) (0,b+b̄)]
//! ```
//!
//! Any two nodes of one family hold four independent coding vectors, so any
//! three nodes reconstruct. Every node is repaired exactly from two nodes of
//! the other family, one packet each, with one node of that family
//! unavailable.

use itertools::Itertools;
use serde::Serialize;

use crate::code::CodeState;
use crate::error::{Error, Result};
use crate::galois::{FieldConfig, FieldMatrix};
use crate::mfhs::Params;

const N1: usize = 0;
const N2: usize = 1;
const N3: usize = 2;
const N4: usize = 3;
const N5: usize = 4;
const N6: usize = 5;

const NODES: usize = 6;
const FILE_SIZE: usize = 4;

fn family(node: usize) -> usize {
    node / 3
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactCode {
    field: FieldConfig,
    generator: FieldMatrix,
    a: [u64; 2],
    a_bar: [u64; 2],
    b: [u64; 2],
    b_bar: [u64; 2],
    coding: Vec<FieldMatrix>,
}

/// How the newcomer regenerates one node: each helper sends one linear
/// combination of its two packets, and the two received packets are mixed
/// by `combine` (`[v₁ v₂] · combine = Q_failed`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RepairRule {
    pub failed: usize,
    pub unavailable: usize,
    /// `(helper, coefficients over its two stored packets)`.
    pub helper_sends: Vec<(usize, [u64; 2])>,
    pub combine: FieldMatrix,
}

impl RepairRule {
    pub fn helpers(&self) -> Vec<usize> {
        self.helper_sends.iter().map(|&(h, _)| h).collect()
    }
}

/// Builds the code from a Reed–Solomon systematic generator over GF(q),
/// evaluation points `0..6`.
pub fn build_exact_code(q: u64) -> Result<ExactCode> {
    let field = FieldConfig::new(q)?;
    if q < 7 {
        return Err(Error::FieldTooSmall(q));
    }
    let mut vandermonde = FieldMatrix::zeros(field, FILE_SIZE, NODES);
    for point in 0..NODES {
        for row in 0..FILE_SIZE {
            vandermonde.set(row, point, field.pow(point as u64, row as u64));
        }
    }
    let generator = vandermonde.select_columns(FILE_SIZE)?.inverse()?.mul(&vandermonde)?;
    let u = generator.column(4);
    let u_bar = generator.column(5);
    let code = ExactCode::from_coefficients(
        field,
        [u[0], u[1]],
        [u_bar[0], u_bar[1]],
        [u[2], u[3]],
        [u_bar[2], u_bar[3]],
    );
    if code.generator != generator {
        return Err(Error::InternalContradiction("generator is not systematic".into()));
    }
    if let Some(problem) = code.structural_problem() {
        return Err(Error::InternalContradiction(problem));
    }
    Ok(code)
}

impl ExactCode {
    /// Assembles `G` and `Q₁…Q₆` from raw coefficients without checking
    /// any of the code's conditions.
    pub fn from_coefficients(field: FieldConfig, a: [u64; 2], a_bar: [u64; 2], b: [u64; 2], b_bar: [u64; 2]) -> Self {
        let [a, a_bar, b, b_bar] = [a, a_bar, b, b_bar].map(|v| v.map(|x| field.reduce(x)));
        let m = |cols: [[u64; 4]; 2]| {
            let mut q = FieldMatrix::zeros(field, FILE_SIZE, 2);
            for (c, col) in cols.iter().enumerate() {
                for (r, &v) in col.iter().enumerate() {
                    q.set(r, c, v);
                }
            }
            q
        };
        let sum = |x: [u64; 2], y: [u64; 2]| [field.add(x[0], y[0]), field.add(x[1], y[1])];
        let (a_sum, b_sum) = (sum(a, a_bar), sum(b, b_bar));
        let u = [a[0], a[1], b[0], b[1]];
        let u_bar = [a_bar[0], a_bar[1], b_bar[0], b_bar[1]];
        let coding = vec![
            m([[1, 0, 0, 0], [0, 1, 0, 0]]),
            m([[0, 0, 1, 0], [0, 0, 0, 1]]),
            m([u, u_bar]),
            m([[a[0], a[1], 0, 0], [0, 0, b[0], b[1]]]),
            m([[a_bar[0], a_bar[1], 0, 0], [0, 0, b_bar[0], b_bar[1]]]),
            m([[a_sum[0], a_sum[1], 0, 0], [0, 0, b_sum[0], b_sum[1]]]),
        ];
        let id = FieldMatrix::identity(field, FILE_SIZE);
        let parity = FieldMatrix::hstack(field, FILE_SIZE, &[&coding[N3]]).expect("4 rows");
        let generator = FieldMatrix::hstack(field, FILE_SIZE, &[&id, &parity]).expect("4 rows");
        Self {
            field,
            generator,
            a,
            a_bar,
            b,
            b_bar,
            coding,
        }
    }

    pub fn field(&self) -> FieldConfig {
        self.field
    }

    pub fn generator(&self) -> &FieldMatrix {
        &self.generator
    }

    pub fn coding(&self) -> &[FieldMatrix] {
        &self.coding
    }

    pub fn q(&self, node: usize) -> &FieldMatrix {
        &self.coding[node]
    }

    pub fn params() -> Params {
        Params::new(6, 3, 2, 1).expect("(6,3,2,1) is in scope")
    }

    pub fn to_code_state(&self) -> CodeState {
        CodeState::new(Self::params(), self.field, 1, self.coding.clone()).expect("shapes are fixed")
    }

    fn pair_independent(&self, x: [u64; 2], y: [u64; 2]) -> bool {
        let f = self.field;
        f.sub(f.mul(x[0], y[1]), f.mul(x[1], y[0])) != 0
    }

    /// First violated build-time condition, if any.
    fn structural_problem(&self) -> Option<String> {
        for cols in (0..NODES).combinations(FILE_SIZE) {
            if self.select_generator_columns(&cols).rank() < FILE_SIZE {
                return Some(format!("generator columns {cols:?} are dependent"));
            }
        }
        if !self.pair_independent(self.a, self.a_bar) {
            return Some("(a1,a2) and (ā1,ā2) are dependent".into());
        }
        if !self.pair_independent(self.b, self.b_bar) {
            return Some("(b1,b2) and (b̄1,b̄2) are dependent".into());
        }
        None
    }

    fn select_generator_columns(&self, cols: &[usize]) -> FieldMatrix {
        let mut out = FieldMatrix::zeros(self.field, FILE_SIZE, cols.len());
        for (j, &c) in cols.iter().enumerate() {
            for r in 0..FILE_SIZE {
                out.set(r, j, self.generator.get(r, c));
            }
        }
        out
    }

    /// Repair recipe for `failed` while `unavailable` cannot help.
    ///
    /// When `unavailable` is in the failed node's own family it does not
    /// restrict the helpers; the recipe for the last node of the other
    /// family being unavailable is used.
    pub fn repair_rule(&self, failed: usize, unavailable: usize) -> Result<RepairRule> {
        if failed >= NODES || unavailable >= NODES || failed == unavailable {
            return Err(Error::InvalidPair(failed, unavailable));
        }
        let f = self.field;
        let effective = if family(unavailable) == family(failed) {
            if family(failed) == 0 {
                N6
            } else {
                N3
            }
        } else {
            unavailable
        };
        let neg1 = f.neg(1);
        let mat = |rows: [[u64; 2]; 2]| {
            FieldMatrix::new(f, 2, 2, vec![rows[0][0], rows[0][1], rows[1][0], rows[1][1]]).expect("residues")
        };
        let identity = FieldMatrix::identity(f, 2);

        let (helper_sends, combine) = match failed {
            N4 | N5 | N6 => {
                // Q_failed = [(α,0) (0,β)]; node 3 turns (α,β) out of u, ū
                let sum = |x: [u64; 2], y: [u64; 2]| [f.add(x[0], y[0]), f.add(x[1], y[1])];
                let (alpha, beta, from_node3) = match failed {
                    N4 => (self.a, self.b, [1, 0]),
                    N5 => (self.a_bar, self.b_bar, [0, 1]),
                    _ => (sum(self.a, self.a_bar), sum(self.b, self.b_bar), [1, 1]),
                };
                match effective {
                    // P1 from node 1, P2 from node 2
                    N3 => (vec![(N1, alpha), (N2, beta)], identity),
                    // P1 = node3 − node2, P2 = node2
                    N1 => (vec![(N2, beta), (N3, from_node3)], mat([[neg1, 1], [1, 0]])),
                    // P1 = node1, P2 = node3 − node1
                    N2 => (vec![(N1, alpha), (N3, from_node3)], mat([[1, neg1], [0, 1]])),
                    _ => unreachable!("helper family of a family-2 node is 1..3"),
                }
            }
            _ => {
                let helpers: Vec<usize> = [N4, N5, N6].into_iter().filter(|&x| x != effective).collect();
                // coefficients each helper applies to its own two packets
                let send = match failed {
                    N1 => [1, 0],
                    N2 => [0, 1],
                    _ => [1, 1],
                };
                let received = |x: usize| -> [u64; 2] {
                    match failed {
                        N1 => [self.q(x).get(0, 0), self.q(x).get(1, 0)],
                        N2 => [self.q(x).get(2, 1), self.q(x).get(3, 1)],
                        // P1 + P2 of node 4/5/6 is u, ū, u + ū in the basis (u, ū)
                        _ => match x {
                            N4 => [1, 0],
                            N5 => [0, 1],
                            _ => [1, 1],
                        },
                    }
                };
                let (k0, k1) = (received(helpers[0]), received(helpers[1]));
                let coefficients = mat([[k0[0], k1[0]], [k0[1], k1[1]]]);
                let combine = coefficients.inverse()?;
                (helpers.into_iter().map(|x| (x, send)).collect(), combine)
            }
        };
        Ok(RepairRule {
            failed,
            unavailable,
            helper_sends,
            combine,
        })
    }

    /// Packets of every node: `Xᵀ Q_i`, each `W x 2`.
    pub fn encode(&self, file: &FieldMatrix) -> Result<Vec<FieldMatrix>> {
        if file.rows() != FILE_SIZE {
            return Err(Error::DimensionMismatch(format!("file has {} rows, expected 4", file.rows())));
        }
        let xt = file.transpose();
        self.coding.iter().map(|q| xt.mul(q)).collect()
    }

    /// Regenerates the failed node's two packets from its helpers' stored
    /// packets.
    pub fn exact_repair(&self, stored: &[FieldMatrix], failed: usize, unavailable: usize) -> Result<FieldMatrix> {
        let rule = self.repair_rule(failed, unavailable)?;
        if stored.len() != NODES {
            return Err(Error::LengthMismatch(stored.len(), NODES));
        }
        let width = stored[rule.helper_sends[0].0].rows();
        let received = rule
            .helper_sends
            .iter()
            .map(|&(x, coef)| {
                let c = FieldMatrix::column_vector(self.field, &coef)?;
                stored[x].mul(&c)
            })
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&FieldMatrix> = received.iter().collect();
        FieldMatrix::hstack(self.field, width, &refs)?.mul(&rule.combine)
    }

    /// JSON form: generator, coding matrices and the full rule table with
    /// 1-based node labels.
    pub fn to_json(&self) -> serde_json::Value {
        let rules: Vec<serde_json::Value> = (0..NODES)
            .cartesian_product(0..NODES)
            .filter(|(f, u)| f != u)
            .map(|(f, u)| match self.repair_rule(f, u) {
                Ok(rule) => serde_json::json!({
                    "failed": f + 1,
                    "unavailable": u + 1,
                    "sends": rule.helper_sends.iter().map(|(h, c)| serde_json::json!({"helper": h + 1, "coefficients": c})).collect::<Vec<_>>(),
                    "combine": rule.combine,
                }),
                Err(e) => serde_json::json!({"failed": f + 1, "unavailable": u + 1, "error": e.to_string()}),
            })
            .collect();
        serde_json::json!({
            "q": self.field.modulus(),
            "params": Self::params(),
            "G": self.generator,
            "Q": self.coding,
            "rules": rules,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RankEntry {
    pub nodes: Vec<usize>,
    pub rank: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RepairEntry {
    pub failed: usize,
    pub unavailable: usize,
    pub helpers: Vec<usize>,
    pub packets_sent: usize,
    pub exact_files: usize,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Outcome of [`verify_exact_code`]; node labels are 1-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExactReport {
    pub q: u64,
    /// Column 4-subsets of `G`.
    pub mds: Vec<RankEntry>,
    pub family_pairs: Vec<RankEntry>,
    pub reconstruction: Vec<RankEntry>,
    pub repairs: Vec<RepairEntry>,
    pub regenerations: usize,
    pub regenerations_exact: usize,
    pub pass: bool,
}

pub fn verify_exact_code(code: &ExactCode) -> ExactReport {
    let f = code.field;
    let one = |v: &[usize]| v.iter().map(|x| x + 1).collect::<Vec<_>>();
    let rank_entry = |nodes: Vec<usize>, m: FieldMatrix| {
        let rank = m.rank();
        RankEntry {
            nodes,
            rank,
            pass: rank == FILE_SIZE,
        }
    };
    let stack = |nodes: &[usize]| {
        let parts: Vec<&FieldMatrix> = nodes.iter().map(|&i| code.q(i)).collect();
        FieldMatrix::hstack(f, FILE_SIZE, &parts).expect("4 rows")
    };

    let mds = (0..NODES)
        .combinations(FILE_SIZE)
        .map(|cols| rank_entry(one(&cols), code.select_generator_columns(&cols)))
        .collect::<Vec<_>>();
    let family_pairs = [[N1, N2, N3], [N4, N5, N6]]
        .iter()
        .flat_map(|fam| fam.iter().copied().combinations(2))
        .map(|pair| rank_entry(one(&pair), stack(&pair)))
        .collect::<Vec<_>>();
    let reconstruction = (0..NODES)
        .combinations(3)
        .map(|triple| rank_entry(one(&triple), stack(&triple)))
        .collect::<Vec<_>>();

    let basis: Vec<FieldMatrix> = (0..FILE_SIZE).map(|i| FieldMatrix::unit(f, FILE_SIZE, i)).collect();
    let stored: Vec<Vec<FieldMatrix>> = basis
        .iter()
        .map(|x| code.encode(x).expect("basis files are 4 x 1"))
        .collect();
    let mut repairs = Vec::new();
    for (failed, unavailable) in (0..NODES).cartesian_product(0..NODES).filter(|(a, b)| a != b) {
        let rule = match code.repair_rule(failed, unavailable) {
            Ok(rule) => rule,
            Err(e) => {
                repairs.push(RepairEntry {
                    failed: failed + 1,
                    unavailable: unavailable + 1,
                    helpers: vec![],
                    packets_sent: 0,
                    exact_files: 0,
                    pass: false,
                    error: Some(e.to_string()),
                });
                continue;
            }
        };
        let helpers = rule.helpers();
        let well_formed = helpers.len() == 2
            && helpers[0] != helpers[1]
            && helpers.iter().all(|&h| family(h) != family(failed))
            && (family(unavailable) == family(failed) || !helpers.contains(&unavailable));
        let exact_files = stored
            .iter()
            .filter(|packets| {
                code.exact_repair(packets, failed, unavailable)
                    .is_ok_and(|regen| regen == packets[failed])
            })
            .count();
        repairs.push(RepairEntry {
            failed: failed + 1,
            unavailable: unavailable + 1,
            helpers: one(&helpers),
            packets_sent: rule.helper_sends.len(),
            exact_files,
            pass: well_formed && exact_files == basis.len(),
            error: None,
        });
    }

    let regenerations = repairs.len() * basis.len();
    let regenerations_exact = repairs.iter().map(|r| r.exact_files).sum();
    let pass = mds.iter().chain(&family_pairs).chain(&reconstruction).all(|e| e.pass)
        && repairs.iter().all(|r| r.pass);
    ExactReport {
        q: f.modulus(),
        mds,
        family_pairs,
        reconstruction,
        repairs,
        regenerations,
        regenerations_exact,
        pass,
    }
}
