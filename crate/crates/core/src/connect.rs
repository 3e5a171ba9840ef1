//! The CONNECT procedure.
//!
//! Given `h ∈ H`, a failed node and its `d` helpers, CONNECT moves the failed
//! node's `h` value onto helpers one unit at a time and returns `h'` with
//! `h'[failed] = 0`. The resulting vector is the witness used to show that a
//! random repair keeps the rank invariant alive. Each step is checked as it
//! runs: the current `h` must stay sorted along the maintained permutation and
//! be majorized by that permutation's truncated scores.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mfhs::{h_membership, majorizes, score_vectors, sorted_along, HVector, Params, Perm};

/// Snapshot of CONNECT after iteration `t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConnectState {
    pub t: usize,
    pub h: HVector,
    /// Helpers not yet incremented, ascending.
    pub remaining: Vec<usize>,
    pub perm: Perm,
    /// `classes[g]` holds the nodes whose current value is `g`.
    pub classes: Vec<Vec<usize>>,
}

impl ConnectState {
    fn new(params: &Params, t: usize, h: HVector, remaining: Vec<usize>, perm: Perm) -> Self {
        let classes = (0..=params.d())
            .map(|g| (0..h.len()).filter(|&m| h[m] == g).collect())
            .collect();
        Self {
            t,
            h,
            remaining,
            perm,
            classes,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConnectOutcome {
    pub h_prime: HVector,
    /// Helpers in the order they were incremented.
    pub incremented: Vec<usize>,
    pub trace: Vec<ConnectState>,
}

/// 1-based view of a trace step, for reports.
#[derive(Clone, Debug, Serialize)]
pub struct TraceStepJson {
    pub t: usize,
    pub h: Vec<usize>,
    pub remaining_helpers: Vec<usize>,
    pub perm: Vec<usize>,
    pub classes: Vec<Vec<usize>>,
}

impl From<&ConnectState> for TraceStepJson {
    fn from(s: &ConnectState) -> Self {
        let one = |v: &[usize]| v.iter().map(|x| x + 1).collect::<Vec<_>>();
        Self {
            t: s.t,
            h: s.h.0.clone(),
            remaining_helpers: one(&s.remaining),
            perm: s.perm.to_one_based(),
            classes: s.classes.iter().map(|c| one(c)).collect(),
        }
    }
}

/// Checks that `helpers` are `d` distinct nodes outside the failed node's family.
pub fn validate_helpers(params: &Params, failed: usize, helpers: &[usize]) -> Result<()> {
    if failed >= params.n() {
        return Err(Error::InvalidHelpers(format!("failed node {failed} out of range")));
    }
    if helpers.len() != params.d() {
        return Err(Error::InvalidHelpers(format!(
            "expected {} helpers, got {}",
            params.d(),
            helpers.len()
        )));
    }
    for (i, &x) in helpers.iter().enumerate() {
        if x >= params.n() {
            return Err(Error::InvalidHelpers(format!("node {x} out of range")));
        }
        if params.layout().same_family(x, failed) {
            return Err(Error::InvalidHelpers(format!(
                "node {x} shares a family with failed node {failed}"
            )));
        }
        if helpers[..i].contains(&x) {
            return Err(Error::InvalidHelpers(format!("node {x} listed twice")));
        }
    }
    Ok(())
}

fn check_member(params: &Params, h: &[usize]) -> Result<()> {
    if h_membership(params, h).member {
        Ok(())
    } else {
        Err(Error::HNotMember(h.to_vec()))
    }
}

fn majorized_along(params: &Params, h: &[usize], perm: &Perm) -> bool {
    majorizes(&score_vectors(params, perm).c, h).expect("lengths agree")
}

/// Step 1: sort by descending `h`; inside each class helpers come first,
/// then ascending node index.
pub fn initial_perm(params: &Params, h: &[usize], helpers: &[usize], failed: usize) -> Result<Perm> {
    check_member(params, h)?;
    validate_helpers(params, failed, helpers)?;
    Ok(sorted_with_helpers_first(h, helpers))
}

fn sorted_with_helpers_first(h: &[usize], helpers: &[usize]) -> Perm {
    let mut order: Vec<usize> = (0..h.len()).collect();
    order.sort_by_key(|&m| (std::cmp::Reverse(h[m]), !helpers.contains(&m), m));
    Perm::new(order).expect("sorted indices form a permutation")
}

/// Step 3a: the remaining helper with the smallest value, earliest position
/// breaking ties.
pub fn step_select(state: &ConnectState) -> Result<usize> {
    state
        .remaining
        .iter()
        .copied()
        .min_by_key(|&x| (state.h[x], state.perm.pos(x)))
        .ok_or(Error::EmptyHelperPool)
}

/// Step 3c: restores sortedness after `x` was incremented and `failed`
/// decremented.
///
/// Realized as a stable sort by descending value over the previous order.
/// Every node other than `failed` must keep its relative order; a violation
/// is reported as `InternalContradiction`.
pub fn step_resort(prev: &Perm, h: &[usize], failed: usize, x: usize) -> Result<Perm> {
    let mut order = prev.order().to_vec();
    order.sort_by_key(|&m| std::cmp::Reverse(h[m]));
    let next = Perm::new(order).expect("reordering keeps a permutation");
    let kept_prev = prev.order().iter().filter(|&&m| m != failed);
    let kept_next = next.order().iter().filter(|&&m| m != failed);
    if !kept_prev.eq(kept_next) {
        return Err(Error::InternalContradiction(format!(
            "re-sorting after incrementing node {x} reorders nodes other than the failed node: {:?} -> {:?}",
            prev.order(),
            next.order()
        )));
    }
    if next.pos(failed) < prev.pos(failed) {
        return Err(Error::InternalContradiction(format!(
            "failed node {failed} moved to an earlier position"
        )));
    }
    debug_assert!(sorted_along(h, &next));
    Ok(next)
}

/// Runs CONNECT end to end, checking every intermediate invariant.
pub fn connect_run(params: &Params, h: &[usize], helpers: &[usize], failed: usize) -> Result<ConnectOutcome> {
    let perm = initial_perm(params, h, helpers, failed)?;
    if !majorized_along(params, h, &perm) {
        return Err(Error::InternalContradiction(format!(
            "initial permutation {:?} does not majorize h={h:?}",
            perm.order()
        )));
    }
    let mut remaining = helpers.to_vec();
    remaining.sort_unstable();
    let mut state = ConnectState::new(params, 0, HVector(h.to_vec()), remaining, perm);
    let mut trace = vec![state.clone()];
    let mut incremented = Vec::with_capacity(h[failed]);

    for t in 1..=h[failed] {
        let x = step_select(&state)?;
        if state.h[x] >= params.d() {
            return Err(Error::InternalContradiction(format!(
                "step {t}: selected helper {x} already holds h = d"
            )));
        }
        let mut next_h = state.h.clone();
        next_h.0[x] += 1;
        next_h.0[failed] -= 1;
        let perm = step_resort(&state.perm, &next_h, failed, x)?;
        if !majorized_along(params, &next_h, &perm) {
            return Err(Error::InternalContradiction(format!(
                "step {t}: c({:?}) does not majorize h={:?}",
                perm.order(),
                next_h.0
            )));
        }
        let remaining = state.remaining.iter().copied().filter(|&m| m != x).collect();
        incremented.push(x);
        state = ConnectState::new(params, t, next_h, remaining, perm);
        trace.push(state.clone());
    }

    let h_prime = state.h;
    if !h_membership(params, &h_prime).member {
        return Err(Error::InternalContradiction(format!("output {:?} is not in H", h_prime.0)));
    }
    Ok(ConnectOutcome {
        h_prime,
        incremented,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> Params {
        Params::new(6, 4, 3, 1).unwrap()
    }

    #[test]
    fn initial_perm_worked_case() {
        let p = params();
        let perm = initial_perm(&p, &[3, 2, 2, 0, 0, 0], &[2, 3, 4], 0).unwrap();
        assert_eq!(perm.to_one_based(), vec![1, 3, 2, 4, 5, 6]);
    }

    #[test]
    fn initial_perm_ties_and_no_ties() {
        let p = params();
        let perm = initial_perm(&p, &[0; 6], &[5, 2, 4], 0).unwrap();
        assert_eq!(perm.order(), &[2, 4, 5, 0, 1, 3]);
        // distinct values: order is forced
        let h = [0, 0, 3, 2, 1, 0];
        let perm = initial_perm(&p, &h, &[2, 3, 4], 0).unwrap();
        assert_eq!(&perm.order()[..3], &[2, 3, 4]);
    }

    #[test]
    fn initial_perm_rejects_non_members() {
        let p = params();
        assert_eq!(
            initial_perm(&p, &[3, 3, 3, 0, 0, 0], &[2, 3, 4], 0),
            Err(Error::HNotMember(vec![3, 3, 3, 0, 0, 0]))
        );
        assert!(matches!(
            initial_perm(&p, &[0; 6], &[1, 3, 4], 0),
            Err(Error::InvalidHelpers(_))
        ));
    }

    #[test]
    fn select_rules() {
        let p = params();
        let h = HVector(vec![3, 2, 2, 0, 0, 0]);
        let perm = Perm::from_one_based(&[1, 3, 2, 4, 5, 6]).unwrap();
        let state = ConnectState::new(&p, 0, h.clone(), vec![2, 3, 4], perm.clone());
        assert_eq!(step_select(&state).unwrap(), 3);
        let single = ConnectState::new(&p, 0, h.clone(), vec![2], perm.clone());
        assert_eq!(step_select(&single).unwrap(), 2);
        let tied = ConnectState::new(&p, 0, HVector(vec![0; 6]), vec![5, 3, 4], perm.clone());
        assert_eq!(step_select(&tied).unwrap(), 3);
        let empty = ConnectState::new(&p, 0, h, vec![], perm);
        assert_eq!(step_select(&empty), Err(Error::EmptyHelperPool));
    }

    #[test]
    fn resort_cases() {
        // t = 1 of the worked run: values already sorted, nothing moves
        let prev = Perm::from_one_based(&[1, 3, 2, 4, 5, 6]).unwrap();
        let next = step_resort(&prev, &[2, 2, 2, 1, 0, 0], 0, 3).unwrap();
        assert_eq!(next, prev);
        // failed node drops to zero and falls behind every positive value
        let prev = Perm::from_one_based(&[1, 2, 3, 4, 5, 6]).unwrap();
        let next = step_resort(&prev, &[0, 1, 1, 1, 0, 0], 0, 3).unwrap();
        assert_eq!(next.to_one_based(), vec![2, 3, 4, 1, 5, 6]);
        // an increment that must jump over a same-class node is a contradiction
        let prev = Perm::from_one_based(&[1, 2, 3, 4, 5, 6]).unwrap();
        assert!(matches!(
            step_resort(&prev, &[2, 1, 1, 2, 0, 0], 0, 3),
            Err(Error::InternalContradiction(_))
        ));
    }

    #[test]
    fn worked_run() {
        let p = params();
        let out = connect_run(&p, &[3, 2, 2, 0, 0, 0], &[2, 3, 4], 0).unwrap();
        assert_eq!(out.h_prime.0, vec![0, 2, 3, 1, 1, 0]);
        assert_eq!(out.incremented, vec![3, 4, 2]);
        assert_eq!(out.trace.len(), 4);
        assert_eq!(out.trace[1].h.0, vec![2, 2, 2, 1, 0, 0]);
        assert_eq!(out.trace[2].h.0, vec![1, 2, 2, 1, 1, 0]);
        assert_eq!(out.trace[2].perm.to_one_based(), vec![3, 2, 1, 4, 5, 6]);
        assert_eq!(out.trace[3].remaining, Vec::<usize>::new());
        assert_eq!(out.trace[0].classes[3], vec![0]);
    }

    #[test]
    fn zero_iterations() {
        let p = params();
        let h = [0, 3, 2, 2, 0, 0];
        let out = connect_run(&p, &h, &[2, 3, 4], 0).unwrap();
        assert_eq!(out.h_prime.0, h.to_vec());
        assert!(out.incremented.is_empty());
        assert_eq!(out.trace.len(), 1);
    }

    #[test]
    fn trace_json_is_one_based() {
        let p = params();
        let out = connect_run(&p, &[3, 2, 2, 0, 0, 0], &[2, 3, 4], 0).unwrap();
        let j = TraceStepJson::from(&out.trace[0]);
        assert_eq!(j.perm, vec![1, 3, 2, 4, 5, 6]);
        assert_eq!(j.remaining_helpers, vec![3, 4, 5]);
    }
}
