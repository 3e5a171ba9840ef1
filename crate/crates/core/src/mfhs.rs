//! Combinatorics of family helper selection at the MBR point.
//!
//! Nodes are 0-based internally (`0..n`); families are consecutive blocks of
//! `f = n - d - r` nodes. A permutation lists nodes in "arrival" order and
//! every arriving node is credited `(d - z)^+` packets, where `z` counts the
//! earlier nodes that sit outside its family.

use std::collections::HashMap;
use std::ops::Deref;
use std::sync::{Arc, Mutex, OnceLock};

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest candidate space `h_enumerate` will scan.
pub const MAX_CANDIDATES: u128 = 10_000_000;

/// Above this node count the file size is computed from family patterns
/// rather than from all `n!` permutations.
const EXHAUSTIVE_FILE_SIZE_MAX_N: usize = 8;

/// Partition of the nodes into families of equal size.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FamilyLayout {
    n: usize,
    family_size: usize,
}

impl FamilyLayout {
    pub fn new(n: usize, family_size: usize) -> Self {
        Self { n, family_size }
    }

    #[inline]
    pub fn family_of(&self, node: usize) -> usize {
        node / self.family_size
    }

    pub fn family_count(&self) -> usize {
        self.n / self.family_size
    }

    pub fn members(&self, family: usize) -> std::ops::Range<usize> {
        family * self.family_size..(family + 1) * self.family_size
    }

    #[inline]
    pub fn same_family(&self, a: usize, b: usize) -> bool {
        self.family_of(a) == self.family_of(b)
    }

    /// Permissible helpers of `node`: everyone outside its family.
    pub fn helper_universe(&self, node: usize) -> Vec<usize> {
        (0..self.n).filter(|&m| !self.same_family(m, node)).collect()
    }
}

/// Code parameters `(n, k, d, r)` with the derived MBR quantities.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "ParamsRepr", try_from = "ParamsRepr")]
pub struct Params {
    n: usize,
    k: usize,
    d: usize,
    r: usize,
    file_size: usize,
    layout: FamilyLayout,
}

impl Params {
    pub fn new(n: usize, k: usize, d: usize, r: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::OutOfScope(format!("need 1 <= k <= n, got k={k}, n={n}")));
        }
        if d == 0 {
            return Err(Error::OutOfScope("need d >= 1".into()));
        }
        if d + r + 2 > n {
            return Err(Error::OutOfScope(format!(
                "family size n-d-r must be at least 2 (n={n}, d={d}, r={r})"
            )));
        }
        let f = n - d - r;
        if !n.is_multiple_of(f) {
            return Err(Error::OutOfScope(format!(
                "n mod (n-d-r) = {n} mod {f} != 0 (incomplete family)"
            )));
        }
        let layout = FamilyLayout::new(n, f);
        let file_size = compute_file_size(n, k, d, f);
        debug_assert!(file_size >= d);
        Ok(Self {
            n,
            k,
            d,
            r,
            file_size,
            layout,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }
    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }
    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }
    #[inline]
    pub fn r(&self) -> usize {
        self.r
    }
    /// File size `M` in packets.
    #[inline]
    pub fn file_size(&self) -> usize {
        self.file_size
    }
    /// Storage per node; `d` packets at the MBR point.
    #[inline]
    pub fn alpha(&self) -> usize {
        self.d
    }
    /// Per-helper repair traffic; one packet at the MBR point.
    #[inline]
    pub fn beta(&self) -> usize {
        1
    }
    #[inline]
    pub fn family_size(&self) -> usize {
        self.layout.family_size
    }
    pub fn layout(&self) -> &FamilyLayout {
        &self.layout
    }
    pub fn helper_universe(&self, node: usize) -> Vec<usize> {
        self.layout.helper_universe(node)
    }
    pub fn families(&self) -> Vec<Vec<usize>> {
        (0..self.layout.family_count())
            .map(|f| self.layout.members(f).collect())
            .collect()
    }
}

/// JSON shape of [`Params`]. Derived fields are optional on input and must
/// agree with the recomputed values when present.
#[derive(Serialize, Deserialize)]
struct ParamsRepr {
    n: usize,
    k: usize,
    d: usize,
    r: usize,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    file_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    families: Option<Vec<Vec<usize>>>,
}

impl From<Params> for ParamsRepr {
    fn from(p: Params) -> Self {
        let families = p
            .families()
            .into_iter()
            .map(|fam| fam.into_iter().map(|v| v + 1).collect())
            .collect();
        ParamsRepr {
            n: p.n,
            k: p.k,
            d: p.d,
            r: p.r,
            file_size: Some(p.file_size),
            alpha: Some(p.alpha()),
            beta: Some(p.beta()),
            families: Some(families),
        }
    }
}

impl TryFrom<ParamsRepr> for Params {
    type Error = Error;

    fn try_from(r: ParamsRepr) -> Result<Self> {
        let p = Params::new(r.n, r.k, r.d, r.r)?;
        let expected = ParamsRepr::from(p.clone());
        let mismatch = |name: &str| Error::Malformed(format!("{name} disagrees with (n,k,d,r)"));
        if r.file_size.is_some_and(|m| Some(m) != expected.file_size) {
            return Err(mismatch("M"));
        }
        if r.alpha.is_some_and(|a| Some(a) != expected.alpha) {
            return Err(mismatch("alpha"));
        }
        if r.beta.is_some_and(|b| Some(b) != expected.beta) {
            return Err(mismatch("beta"));
        }
        if r.families.is_some() && r.families != expected.families {
            return Err(mismatch("families"));
        }
        Ok(p)
    }
}

/// A node permutation with its inverse position map.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Perm {
    order: Vec<usize>,
    pos: Vec<usize>,
}

impl Perm {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut pos = vec![usize::MAX; n];
        for (i, &node) in order.iter().enumerate() {
            if node >= n || pos[node] != usize::MAX {
                return Err(Error::Malformed(format!("{order:?} is not a permutation of 0..{n}")));
            }
            pos[node] = i;
        }
        Ok(Self { order, pos })
    }

    /// From 1-based node labels, as written in the examples and on the CLI.
    pub fn from_one_based(labels: &[usize]) -> Result<Self> {
        let order = labels
            .iter()
            .map(|&l| l.checked_sub(1).ok_or_else(|| Error::Malformed("node labels start at 1".into())))
            .collect::<Result<Vec<_>>>()?;
        Self::new(order)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            order: (0..n).collect(),
            pos: (0..n).collect(),
        }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.order.iter().map(|v| v + 1).collect()
    }

    /// Node at position `i`.
    #[inline]
    pub fn at(&self, i: usize) -> usize {
        self.order[i]
    }

    /// Position of `node`.
    #[inline]
    pub fn pos(&self, node: usize) -> usize {
        self.pos[node]
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Exchanges positions `i` and `i + 1`.
    pub fn swapped(&self, i: usize) -> Perm {
        let mut order = self.order.clone();
        order.swap(i, i + 1);
        let mut pos = self.pos.clone();
        pos[order[i]] = i;
        pos[order[i + 1]] = i + 1;
        Perm { order, pos }
    }
}

/// Per-position scores `b(π)` and their truncation `c(π)` summing to `M`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub b: Vec<usize>,
    pub c: Vec<usize>,
}

/// `z_i`: earlier nodes outside the family of the node at position `i`.
fn out_of_family_counts(layout: &FamilyLayout, order: &[usize]) -> Vec<usize> {
    let mut seen = vec![0usize; layout.family_count()];
    order
        .iter()
        .enumerate()
        .map(|(i, &node)| {
            let fam = layout.family_of(node);
            let z = i - seen[fam];
            seen[fam] += 1;
            z
        })
        .collect()
}

fn b_scores(layout: &FamilyLayout, d: usize, order: &[usize]) -> Vec<usize> {
    out_of_family_counts(layout, order)
        .into_iter()
        .map(|z| d.saturating_sub(z))
        .collect()
}

/// Truncates `b` at the shortest prefix reaching `m` and zeroes the rest.
fn truncate_scores(b: &[usize], m: usize) -> Vec<usize> {
    let mut remaining = m;
    b.iter()
        .map(|&v| {
            let take = v.min(remaining);
            remaining -= take;
            take
        })
        .collect()
}

pub fn score_vectors(params: &Params, perm: &Perm) -> ScoreVector {
    let b = b_scores(&params.layout, params.d, perm.order());
    let c = truncate_scores(&b, params.file_size);
    ScoreVector { b, c }
}

fn compute_file_size(n: usize, k: usize, d: usize, f: usize) -> usize {
    if n <= EXHAUSTIVE_FILE_SIZE_MAX_N {
        file_size_exhaustive(n, k, d, f)
    } else {
        file_size_by_pattern(n, k, d, f)
    }
}

/// Minimum over all `n!` arrival orders of the first `k` scores.
pub fn file_size_exhaustive(n: usize, k: usize, d: usize, f: usize) -> usize {
    let layout = FamilyLayout::new(n, f);
    (0..n)
        .permutations(n)
        .map(|order| b_scores(&layout, d, &order).iter().take(k).sum::<usize>())
        .min()
        .unwrap_or(0)
}

/// Same minimum, enumerating only the family-label sequence of the first `k`
/// arrivals up to relabeling of families (restricted growth strings).
pub fn file_size_by_pattern(n: usize, k: usize, d: usize, f: usize) -> usize {
    fn walk(
        depth: usize,
        k: usize,
        d: usize,
        f: usize,
        families: usize,
        counts: &mut Vec<usize>,
        acc: usize,
        best: &mut usize,
    ) {
        if acc >= *best {
            return;
        }
        if depth == k {
            *best = acc;
            return;
        }
        let used = counts.len();
        for fam in 0..(used + 1).min(families) {
            if fam == used {
                counts.push(0);
            }
            if counts[fam] < f {
                let z = depth - counts[fam];
                counts[fam] += 1;
                walk(depth + 1, k, d, f, families, counts, acc + d.saturating_sub(z), best);
                counts[fam] -= 1;
            }
            if fam == used {
                counts.pop();
            }
        }
    }
    let mut best = usize::MAX;
    walk(0, k, d, f, n / f, &mut Vec::new(), 0, &mut best);
    best
}

/// Weak majorization: every prefix of the sorted-descending `a` dominates the
/// matching prefix of sorted-descending `b`.
pub fn majorizes(a: &[usize], b: &[usize]) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let sa = a.iter().copied().sorted_unstable_by(|x, y| y.cmp(x));
    let sb = b.iter().copied().sorted_unstable_by(|x, y| y.cmp(x));
    let (mut pa, mut pb) = (0usize, 0usize);
    for (x, y) in sa.zip(sb) {
        pa += x;
        pb += y;
        if pa < pb {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn is_nonincreasing(v: &[usize]) -> bool {
    v.windows(2).all(|w| w[0] >= w[1])
}

/// A node-indexed integer vector, a candidate member of `H`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HVector(pub Vec<usize>);

impl HVector {
    pub fn weight(&self) -> usize {
        self.0.iter().sum()
    }
}

impl Deref for HVector {
    type Target = [usize];
    fn deref(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for HVector {
    fn from(v: Vec<usize>) -> Self {
        HVector(v)
    }
}

/// Whether `h` is nonincreasing along `perm`.
pub fn sorted_along(h: &[usize], perm: &Perm) -> bool {
    perm.order().windows(2).all(|w| h[w[0]] >= h[w[1]])
}

/// The sorting permutation used for membership decisions: descending `h`,
/// ties by ascending node index.
pub fn canonical_sorting_perm(h: &[usize]) -> Perm {
    let order = (0..h.len()).sorted_by(|&a, &b| h[b].cmp(&h[a]).then(a.cmp(&b))).collect();
    Perm::new(order).expect("sorted indices form a permutation")
}

/// Every permutation along which `h` is nonincreasing (all orderings inside
/// each class of equal values).
pub fn sorting_perms(h: &[usize]) -> impl Iterator<Item = Perm> + '_ {
    let classes: Vec<Vec<usize>> = (0..h.len())
        .sorted_by(|&a, &b| h[b].cmp(&h[a]).then(a.cmp(&b)))
        .chunk_by(|&node| h[node])
        .into_iter()
        .map(|(_, nodes)| nodes.collect())
        .collect();
    classes
        .into_iter()
        .map(|class| {
            let len = class.len();
            class.into_iter().permutations(len).collect::<Vec<_>>()
        })
        .multi_cartesian_product()
        .map(|parts| Perm::new(parts.concat()).expect("class orderings form a permutation"))
}

/// How `h_membership` searches for a witness permutation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MembershipMode {
    /// Canonical sorting permutation when `f = 2`, every sorting permutation otherwise.
    Auto,
    /// Only the canonical sorting permutation.
    Canonical,
    /// Every sorting permutation.
    Exhaustive,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MembershipResult {
    pub member: bool,
    pub witness: Option<Perm>,
}

fn witnesses(params: &Params, h: &[usize], perm: &Perm) -> bool {
    let sv = score_vectors(params, perm);
    majorizes(&sv.c, h).expect("lengths agree")
}

pub fn h_membership(params: &Params, h: &[usize]) -> MembershipResult {
    h_membership_with(params, h, MembershipMode::Auto)
}

pub fn h_membership_with(params: &Params, h: &[usize], mode: MembershipMode) -> MembershipResult {
    let reject = MembershipResult {
        member: false,
        witness: None,
    };
    if h.len() != params.n || h.iter().any(|&v| v > params.d) {
        return reject;
    }
    let canonical = match mode {
        MembershipMode::Auto => params.family_size() == 2,
        MembershipMode::Canonical => true,
        MembershipMode::Exhaustive => false,
    };
    let found = if canonical {
        Some(canonical_sorting_perm(h)).filter(|p| witnesses(params, h, p))
    } else {
        sorting_perms(h).find(|p| witnesses(params, h, p))
    };
    MembershipResult {
        member: found.is_some(),
        witness: found,
    }
}

/// The enumerated set `H` for one parameter set.
#[derive(Clone, Debug)]
pub struct HSet {
    params: Params,
    members: Vec<HVector>,
    witnesses: Vec<Perm>,
    index: HashMap<HVector, usize>,
    by_weight_desc: Vec<usize>,
}

impl HSet {
    /// Enumerated once per parameter set and shared afterwards.
    pub fn cached(params: &Params) -> Result<Arc<HSet>> {
        static CACHE: OnceLock<Mutex<HashMap<Params, Arc<HSet>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(hit) = cache.lock().expect("cache poisoned").get(params) {
            return Ok(Arc::clone(hit));
        }
        let set = Arc::new(h_enumerate(params)?);
        cache
            .lock()
            .expect("cache poisoned")
            .insert(params.clone(), Arc::clone(&set));
        Ok(set)
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Members in lexicographic order.
    pub fn members(&self) -> &[HVector] {
        &self.members
    }

    pub fn iter(&self) -> impl Iterator<Item = (&HVector, &Perm)> {
        self.members.iter().zip(&self.witnesses)
    }

    /// Members ordered by total weight, heaviest first.
    pub fn by_weight_desc(&self) -> impl Iterator<Item = &HVector> {
        self.by_weight_desc.iter().map(|&i| &self.members[i])
    }

    pub fn contains(&self, h: &[usize]) -> bool {
        self.index.contains_key(&HVector(h.to_vec()))
    }

    pub fn witness(&self, h: &[usize]) -> Option<&Perm> {
        self.index.get(&HVector(h.to_vec())).map(|&i| &self.witnesses[i])
    }
}

/// Scans `[0, d]^n` in lexicographic order and keeps the members of `H`.
pub fn h_enumerate(params: &Params) -> Result<HSet> {
    let (n, d) = (params.n, params.d);
    let space = (d as u128 + 1).checked_pow(n as u32).unwrap_or(u128::MAX);
    if space > MAX_CANDIDATES {
        return Err(Error::TooLarge(space));
    }
    let mut members = Vec::new();
    let mut witnesses = Vec::new();
    for h in (0..n).map(|_| 0..=d).multi_cartesian_product() {
        let res = h_membership(params, &h);
        if let Some(w) = res.witness {
            members.push(HVector(h));
            witnesses.push(w);
        }
    }
    let index = members.iter().cloned().enumerate().map(|(i, h)| (h, i)).collect();
    let by_weight_desc = (0..members.len())
        .sorted_by_key(|&i| std::cmp::Reverse(members[i].weight()))
        .collect();
    Ok(HSet {
        params: params.clone(),
        members,
        witnesses,
        index,
        by_weight_desc,
    })
}

/// Whether `c(π') ⪰ h` still holds after exchanging the equal-valued nodes
/// at positions `i` and `i + 1` of a sorting permutation with `c(π) ⪰ h`.
pub fn swap_preserves(params: &Params, h: &[usize], perm: &Perm, i: usize) -> Result<bool> {
    if params.family_size() != 2 {
        return Err(Error::PreconditionViolated(format!(
            "swap argument needs family size 2, got {}",
            params.family_size()
        )));
    }
    if h.len() != params.n || perm.len() != params.n {
        return Err(Error::LengthMismatch(h.len(), params.n));
    }
    if i + 1 >= params.n {
        return Err(Error::OutOfRange {
            index: i,
            max: params.n - 2,
        });
    }
    if !sorted_along(h, perm) {
        return Err(Error::PreconditionViolated("h is not sorted along the permutation".into()));
    }
    if h[perm.at(i)] != h[perm.at(i + 1)] {
        return Err(Error::PreconditionViolated(format!(
            "positions {i} and {} carry different h values",
            i + 1
        )));
    }
    if !witnesses(params, h, perm) {
        return Err(Error::PreconditionViolated("c(π) does not majorize h".into()));
    }
    Ok(witnesses(params, h, &perm.swapped(i)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: usize, k: usize, d: usize, r: usize) -> Params {
        Params::new(n, k, d, r).unwrap()
    }

    #[test]
    fn file_sizes() {
        let a = p(6, 4, 3, 1);
        assert_eq!((a.file_size(), a.alpha(), a.beta()), (7, 3, 1));
        let b = p(6, 3, 2, 1);
        assert_eq!((b.file_size(), b.alpha()), (4, 2));
        assert_eq!(p(4, 2, 1, 1).file_size(), 1);
    }

    #[test]
    fn file_size_paths_agree() {
        for (n, d, r) in [(4, 1, 1), (6, 3, 1), (6, 2, 1), (6, 2, 2), (8, 5, 1), (8, 4, 0), (8, 2, 2)] {
            let f = n - d - r;
            for k in 1..=n {
                assert_eq!(
                    file_size_exhaustive(n, k, d, f),
                    file_size_by_pattern(n, k, d, f),
                    "({n},{k},{d},{r})"
                );
            }
        }
        // beyond the exhaustive cut-off
        assert!(p(10, 5, 7, 1).file_size() >= 7);
    }

    #[test]
    fn scope_errors() {
        assert!(matches!(Params::new(7, 4, 3, 1), Err(Error::OutOfScope(_))));
        assert!(matches!(Params::new(6, 4, 4, 1), Err(Error::OutOfScope(_))));
        assert!(matches!(Params::new(6, 0, 3, 1), Err(Error::OutOfScope(_))));
        assert!(matches!(Params::new(6, 7, 3, 1), Err(Error::OutOfScope(_))));
        assert!(matches!(Params::new(6, 4, 0, 1), Err(Error::OutOfScope(_))));
    }

    #[test]
    fn layout() {
        let a = p(6, 3, 2, 1);
        assert_eq!(a.families(), vec![vec![0, 1, 2], vec![3, 4, 5]]);
        assert_eq!(a.helper_universe(0), vec![3, 4, 5]);
        let b = p(6, 4, 3, 1);
        for node in 0..6 {
            assert_eq!(b.helper_universe(node).len(), b.d() + b.r());
        }
    }

    #[test]
    fn worked_score_vectors() {
        let a = p(6, 4, 3, 1);
        let sv = score_vectors(&a, &Perm::from_one_based(&[2, 3, 4, 1, 5, 6]).unwrap());
        assert_eq!(sv.b, vec![3, 2, 2, 1, 0, 0]);
        assert_eq!(sv.c, vec![3, 2, 2, 0, 0, 0]);
        let sv = score_vectors(&a, &Perm::identity(6));
        assert_eq!(sv.b, vec![3, 3, 1, 1, 0, 0]);
        assert_eq!(sv.c, vec![3, 3, 1, 0, 0, 0]);
    }

    #[test]
    fn majorization_examples() {
        let a = [3, 2, 2, 0, 0, 0];
        assert!(majorizes(&a, &a).unwrap());
        assert!(majorizes(&a, &[2, 2, 2, 1, 0, 0]).unwrap());
        assert!(!majorizes(&a, &[3, 3, 1, 0, 0, 0]).unwrap());
        assert_eq!(majorizes(&a, &[1]), Err(Error::LengthMismatch(6, 1)));
    }

    #[test]
    fn membership_examples() {
        let a = p(6, 4, 3, 1);
        assert!(h_membership(&a, &[0; 6]).member);
        assert!(!h_membership(&a, &[3, 3, 3, 0, 0, 0]).member);
        assert!(!h_membership_with(&a, &[3, 3, 3, 0, 0, 0], MembershipMode::Exhaustive).member);
        assert!(!h_membership(&a, &[4, 0, 0, 0, 0, 0]).member);
        assert!(!h_membership(&a, &[0; 5]).member);
        let perm = Perm::from_one_based(&[2, 3, 4, 1, 5, 6]).unwrap();
        let sv = score_vectors(&a, &perm);
        let mut h = vec![0; 6];
        for (i, &node) in perm.order().iter().enumerate() {
            h[node] = sv.c[i];
        }
        let res = h_membership(&a, &h);
        assert!(res.member);
        assert!(sorted_along(&h, res.witness.as_ref().unwrap()));
    }

    #[test]
    fn sorting_perm_generation() {
        let h = [2, 0, 2, 1, 0, 0];
        let all: Vec<_> = sorting_perms(&h).collect();
        assert_eq!(all.len(), 2 * 6);
        assert!(all.iter().all(|p| sorted_along(&h, p)));
        assert_eq!(canonical_sorting_perm(&h).order(), &[0, 2, 3, 1, 4, 5]);
        assert_eq!(sorting_perms(&[0; 6]).count(), 720);
    }

    #[test]
    fn enumeration_basics() {
        let a = p(6, 4, 3, 1);
        let set = h_enumerate(&a).unwrap();
        assert!(set.members().windows(2).all(|w| w[0] < w[1]));
        assert!(set.members().iter().all(|h| h.iter().all(|&v| v <= 3)));
        assert!(set.contains(&[0; 6]));
        assert!(set.members().iter().all(|h| h.weight() <= a.file_size()));
        let heaviest = set.by_weight_desc().next().unwrap();
        assert_eq!(heaviest.weight(), 7);
        assert!(matches!(h_enumerate(&p(12, 4, 9, 1)), Err(Error::TooLarge(_))));
    }

    #[test]
    fn swap_preconditions() {
        let a = p(6, 4, 3, 1);
        let h = [3, 2, 2, 0, 0, 0];
        let perm = canonical_sorting_perm(&h);
        assert!(matches!(swap_preserves(&a, &h, &perm, 0), Err(Error::PreconditionViolated(_))));
        assert!(swap_preserves(&a, &h, &perm, 1).unwrap());
        assert!(swap_preserves(&a, &h, &perm, 4).unwrap());
        assert!(matches!(swap_preserves(&a, &h, &perm, 5), Err(Error::OutOfRange { .. })));
        let b = p(6, 3, 2, 1);
        assert!(matches!(
            swap_preserves(&b, &[0; 6], &Perm::identity(6), 0),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn params_json() {
        let a = p(6, 4, 3, 1);
        let v = serde_json::to_value(&a).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"n":6,"k":4,"d":3,"r":1,"M":7,"alpha":3,"beta":1,"families":[[1,2],[3,4],[5,6]]})
        );
        assert_eq!(serde_json::from_value::<Params>(v).unwrap(), a);
        let bare: Params = serde_json::from_str(r#"{"n":6,"k":3,"d":2,"r":1}"#).unwrap();
        assert_eq!(bare.file_size(), 4);
        assert!(serde_json::from_str::<Params>(r#"{"n":6,"k":3,"d":2,"r":1,"M":5}"#).is_err());
        assert!(serde_json::from_str::<Params>(r#"{"n":7,"k":3,"d":2,"r":1}"#).is_err());
    }

    #[test]
    fn perm_parsing() {
        assert!(Perm::new(vec![0, 0, 1]).is_err());
        assert!(Perm::from_one_based(&[0, 1]).is_err());
        let p = Perm::from_one_based(&[2, 3, 1]).unwrap();
        assert_eq!(p.order(), &[1, 2, 0]);
        assert_eq!(p.pos(0), 2);
        assert_eq!(p.to_one_based(), vec![2, 3, 1]);
        let s = p.swapped(0);
        assert_eq!(s.order(), &[2, 1, 0]);
        assert_eq!((s.pos(2), s.pos(1)), (0, 1));
    }
}
