//! Prime-field arithmetic and a small dense-matrix kernel.
//!
//! Elements are canonical residues in `[0, q)` stored as `u64`; products go
//! through `u128` so any 64-bit prime modulus is supported. Everything here is
//! exact, so pivot choice during elimination only affects speed.

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The prime field GF(q).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FieldConfig {
    q: u64,
}

impl FieldConfig {
    pub fn new(q: u64) -> Result<Self> {
        if q < 2 {
            return Err(Error::ModulusTooSmall(q));
        }
        if !is_prime(q) {
            return Err(Error::NotPrime(q));
        }
        Ok(Self { q })
    }

    #[inline]
    pub fn modulus(&self) -> u64 {
        self.q
    }

    #[inline]
    pub fn reduce(&self, v: u64) -> u64 {
        v % self.q
    }

    /// Maps a signed integer onto its canonical residue.
    pub fn from_i64(&self, v: i64) -> u64 {
        (v as i128).rem_euclid(self.q as i128) as u64
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let (s, overflow) = a.overflowing_add(b);
        if overflow || s >= self.q {
            s.wrapping_sub(self.q)
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            self.q - (b - a)
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.q as u128) as u64
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1 % self.q;
        base %= self.q;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self, a: u64) -> Option<u64> {
        if a.is_multiple_of(self.q) {
            None
        } else {
            Some(self.pow(a, self.q - 2))
        }
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        rng.random_range(0..self.q)
    }
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin; the first twelve prime bases are exact for
/// every 64-bit input.
pub fn is_prime(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &BASES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Smallest prime `>= n`.
pub fn next_prime(n: u64) -> u64 {
    let mut c = n.max(2);
    while !is_prime(c) {
        c += 1;
    }
    c
}

/// Dense row-major matrix over a prime field.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct FieldMatrix {
    rows: usize,
    cols: usize,
    field: FieldConfig,
    entries: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    q: u64,
    entries: Vec<u64>,
}

impl From<FieldMatrix> for MatrixRepr {
    fn from(m: FieldMatrix) -> Self {
        MatrixRepr {
            rows: m.rows,
            cols: m.cols,
            q: m.field.q,
            entries: m.entries,
        }
    }
}

impl TryFrom<MatrixRepr> for FieldMatrix {
    type Error = Error;

    fn try_from(r: MatrixRepr) -> Result<Self> {
        let field = FieldConfig::new(r.q)?;
        FieldMatrix::new(field, r.rows, r.cols, r.entries)
    }
}

impl FieldMatrix {
    /// Builds a matrix from row-major entries, rejecting non-canonical values.
    pub fn new(field: FieldConfig, rows: usize, cols: usize, entries: Vec<u64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        if let Some(&bad) = entries.iter().find(|&&e| e >= field.q) {
            return Err(Error::Malformed(format!(
                "entry {bad} is not a residue mod {}",
                field.q
            )));
        }
        Ok(Self {
            rows,
            cols,
            field,
            entries,
        })
    }

    /// Builds from signed rows, reducing every entry.
    pub fn from_rows(field: FieldConfig, rows: &[Vec<i64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        let entries = rows.iter().flatten().map(|&v| field.from_i64(v)).collect();
        Self::new(field, rows.len(), cols, entries)
    }

    pub fn zeros(field: FieldConfig, rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            field,
            entries: vec![0; rows * cols],
        }
    }

    pub fn identity(field: FieldConfig, n: usize) -> Self {
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            m.entries[i * n + i] = 1 % field.q;
        }
        m
    }

    /// Column vector from residues.
    pub fn column_vector(field: FieldConfig, values: &[u64]) -> Result<Self> {
        Self::new(field, values.len(), 1, values.to_vec())
    }

    /// Unit column vector `e_index` of the given length.
    pub fn unit(field: FieldConfig, len: usize, index: usize) -> Self {
        let mut m = Self::zeros(field, len, 1);
        m.entries[index] = 1 % field.q;
        m
    }

    pub fn random<R: Rng + ?Sized>(field: FieldConfig, rows: usize, cols: usize, rng: &mut R) -> Self {
        let entries = (0..rows * cols).map(|_| field.random(rng)).collect();
        Self {
            rows,
            cols,
            field,
            entries,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn field(&self) -> FieldConfig {
        self.field
    }

    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u64 {
        self.entries[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u64) {
        self.entries[r * self.cols + c] = self.field.reduce(v);
    }

    pub fn column(&self, c: usize) -> Vec<u64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&e| e == 0)
    }

    fn same_field(&self, other: &FieldMatrix) -> Result<()> {
        if self.field != other.field {
            return Err(Error::FieldMismatch(self.field.q, other.field.q));
        }
        Ok(())
    }

    pub fn transpose(&self) -> FieldMatrix {
        let mut t = FieldMatrix::zeros(self.field, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.entries[c * self.rows + r] = self.get(r, c);
            }
        }
        t
    }

    /// Exact product `self * rhs`.
    pub fn mul(&self, rhs: &FieldMatrix) -> Result<FieldMatrix> {
        self.same_field(rhs)?;
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let f = self.field;
        let mut out = FieldMatrix::zeros(f, self.rows, rhs.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.get(i, l);
                if a == 0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    let idx = i * rhs.cols + j;
                    out.entries[idx] = f.add(out.entries[idx], f.mul(a, rhs.get(l, j)));
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, rhs: &FieldMatrix) -> Result<FieldMatrix> {
        self.same_field(rhs)?;
        if (self.rows, self.cols) != (rhs.rows, rhs.cols) {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} plus {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let f = self.field;
        let entries = self
            .entries
            .iter()
            .zip(&rhs.entries)
            .map(|(&a, &b)| f.add(a, b))
            .collect();
        Ok(FieldMatrix { entries, ..*self })
    }

    /// Horizontal concatenation. All parts must share the row count.
    pub fn hstack(field: FieldConfig, rows: usize, parts: &[&FieldMatrix]) -> Result<FieldMatrix> {
        let cols: usize = parts.iter().map(|p| p.cols).sum();
        let mut out = FieldMatrix::zeros(field, rows, cols);
        let mut offset = 0;
        for p in parts {
            if p.field != field {
                return Err(Error::FieldMismatch(field.q, p.field.q));
            }
            if p.rows != rows {
                return Err(Error::DimensionMismatch(format!(
                    "hstack part has {} rows, expected {rows}",
                    p.rows
                )));
            }
            for r in 0..rows {
                for c in 0..p.cols {
                    out.entries[r * cols + offset + c] = p.get(r, c);
                }
            }
            offset += p.cols;
        }
        Ok(out)
    }

    /// The first `x` columns, in order (the selection `Q E_x`).
    pub fn select_columns(&self, x: usize) -> Result<FieldMatrix> {
        if x > self.cols {
            return Err(Error::OutOfRange {
                index: x,
                max: self.cols,
            });
        }
        let mut out = FieldMatrix::zeros(self.field, self.rows, x);
        for r in 0..self.rows {
            for c in 0..x {
                out.entries[r * x + c] = self.get(r, c);
            }
        }
        Ok(out)
    }

    /// Forward elimination in place. Returns the pivot columns and the
    /// determinant multiplier accumulated from row swaps and pivots.
    fn eliminate(&mut self, reduce_above: bool) -> (Vec<usize>, u64) {
        let f = self.field;
        let mut pivots = Vec::new();
        let mut det = 1 % f.q;
        let mut row = 0;
        for col in 0..self.cols {
            if row == self.rows {
                break;
            }
            let Some(p) = (row..self.rows).find(|&r| self.get(r, col) != 0) else {
                continue;
            };
            if p != row {
                for c in 0..self.cols {
                    self.entries.swap(row * self.cols + c, p * self.cols + c);
                }
                det = f.neg(det);
            }
            let pivot = self.get(row, col);
            det = f.mul(det, pivot);
            let inv = f.inv(pivot).expect("pivot is nonzero");
            for c in col..self.cols {
                let idx = row * self.cols + c;
                self.entries[idx] = f.mul(self.entries[idx], inv);
            }
            let start = if reduce_above { 0 } else { row + 1 };
            for r in start..self.rows {
                if r == row {
                    continue;
                }
                let factor = self.get(r, col);
                if factor == 0 {
                    continue;
                }
                for c in col..self.cols {
                    let v = f.mul(factor, self.get(row, c));
                    let idx = r * self.cols + c;
                    self.entries[idx] = f.sub(self.entries[idx], v);
                }
            }
            pivots.push(col);
            row += 1;
        }
        (pivots, det)
    }

    pub fn rank(&self) -> usize {
        let mut work = self.clone();
        work.eliminate(false).0.len()
    }

    pub fn det(&self) -> Result<u64> {
        if self.rows != self.cols {
            return Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let mut work = self.clone();
        let (pivots, det) = work.eliminate(false);
        Ok(if pivots.len() == self.rows { det } else { 0 })
    }

    pub fn inverse(&self) -> Result<FieldMatrix> {
        if self.rows != self.cols {
            return Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        let id = FieldMatrix::identity(self.field, n);
        let mut aug = FieldMatrix::hstack(self.field, n, &[self, &id])?;
        let (pivots, _) = aug.eliminate(true);
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return Err(Error::Singular);
        }
        let mut out = FieldMatrix::zeros(self.field, n, n);
        for r in 0..n {
            for c in 0..n {
                out.entries[r * n + c] = aug.get(r, n + c);
            }
        }
        Ok(out)
    }

    /// Solves `self * x = rhs` for a matrix with full column rank and a
    /// consistent right-hand side.
    pub fn solve(&self, rhs: &FieldMatrix) -> Result<FieldMatrix> {
        self.same_field(rhs)?;
        if self.rows != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "system has {} equations, rhs has {} rows",
                self.rows, rhs.rows
            )));
        }
        let n = self.cols;
        let mut aug = FieldMatrix::hstack(self.field, self.rows, &[self, rhs])?;
        let (pivots, _) = aug.eliminate(true);
        let rank = pivots.iter().take_while(|&&c| c < n).count();
        if rank < n {
            return Err(Error::RankDeficient { rank, needed: n });
        }
        if pivots.len() > n {
            return Err(Error::Malformed("inconsistent linear system".into()));
        }
        let w = rhs.cols;
        let mut x = FieldMatrix::zeros(self.field, n, w);
        for r in 0..n {
            for c in 0..w {
                x.entries[r * w + c] = aug.get(r, n + c);
            }
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gf(q: u64) -> FieldConfig {
        FieldConfig::new(q).unwrap()
    }

    fn trial_division(n: u64) -> bool {
        n >= 2 && (2..).take_while(|i| i * i <= n).all(|i| !n.is_multiple_of(i))
    }

    #[test]
    fn primality_matches_trial_division() {
        for n in 0..5000 {
            assert_eq!(is_prime(n), trial_division(n), "n={n}");
        }
        assert!(trial_division(1_000_003));
        assert!(FieldConfig::new(1_000_003).is_ok());
        assert_eq!(FieldConfig::new(6), Err(Error::NotPrime(6)));
        assert_eq!(FieldConfig::new(1), Err(Error::ModulusTooSmall(1)));
        assert_eq!(gf(7).modulus(), 7);
    }

    #[test]
    fn large_prime_arithmetic() {
        let p = 18_446_744_073_709_551_557; // largest 64-bit prime
        let f = gf(p);
        assert_eq!(f.add(p - 1, p - 1), p - 2);
        let a = 123_456_789_012_345;
        assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
        assert_eq!(next_prime(90), 97);
    }

    #[test]
    fn small_products() {
        let f = gf(7);
        let a = FieldMatrix::from_rows(f, &[vec![2, 3]]).unwrap();
        let b = FieldMatrix::from_rows(f, &[vec![4], vec![5]]).unwrap();
        assert_eq!(a.mul(&b).unwrap().entries(), &[2]);

        let m = FieldMatrix::from_rows(f, &[vec![1, 2, 3], vec![4, 5, 6], vec![0, 6, 1]]).unwrap();
        assert_eq!(FieldMatrix::identity(f, 3).mul(&m).unwrap(), m);
        assert!(FieldMatrix::zeros(f, 2, 3).mul(&m).unwrap().is_zero());
    }

    #[test]
    fn mul_errors() {
        let a = FieldMatrix::zeros(gf(7), 2, 3);
        let b = FieldMatrix::zeros(gf(7), 2, 3);
        assert!(matches!(a.mul(&b), Err(Error::DimensionMismatch(_))));
        let c = FieldMatrix::zeros(gf(11), 3, 3);
        assert_eq!(a.mul(&c), Err(Error::FieldMismatch(7, 11)));
    }

    #[test]
    fn rank_and_det() {
        let f = gf(7);
        assert_eq!(FieldMatrix::identity(f, 4).rank(), 4);
        let dup = FieldMatrix::from_rows(f, &[vec![1, 2, 3], vec![1, 2, 3], vec![0, 1, 0]]).unwrap();
        assert!(dup.rank() < 3);
        assert_eq!(dup.det().unwrap(), 0);
        assert_eq!(FieldMatrix::identity(f, 5).det().unwrap(), 1);

        let m = FieldMatrix::from_rows(gf(5), &[vec![1, 2], vec![3, 4]]).unwrap();
        // cofactor expansion: 1*4 - 2*3 = -2 = 3 mod 5
        assert_eq!(m.det().unwrap(), gf(5).from_i64(4 - 2 * 3));
        assert_eq!(m.det().unwrap(), 3);
        assert!(matches!(
            FieldMatrix::zeros(f, 2, 3).det(),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn select_columns_edges() {
        let f = gf(7);
        let m = FieldMatrix::from_rows(f, &[vec![1, 2, 3], vec![4, 5, 6]]).unwrap();
        let empty = m.select_columns(0).unwrap();
        assert_eq!((empty.rows(), empty.cols()), (2, 0));
        assert_eq!(m.select_columns(3).unwrap(), m);
        assert_eq!(m.select_columns(1).unwrap().entries(), &[1, 4]);
        assert!(matches!(m.select_columns(4), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn inverse_and_solve() {
        let f = gf(11);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut seen = 0;
        while seen < 20 {
            let a = FieldMatrix::random(f, 4, 4, &mut rng);
            if a.det().unwrap() == 0 {
                assert_eq!(a.inverse(), Err(Error::Singular));
                continue;
            }
            seen += 1;
            let inv = a.inverse().unwrap();
            assert_eq!(a.mul(&inv).unwrap(), FieldMatrix::identity(f, 4));
            let x = FieldMatrix::random(f, 4, 3, &mut rng);
            let b = a.mul(&x).unwrap();
            assert_eq!(a.solve(&b).unwrap(), x);
        }
        // tall full-column-rank system
        let a = FieldMatrix::from_rows(f, &[vec![1, 0], vec![0, 1], vec![1, 1]]).unwrap();
        let x = FieldMatrix::from_rows(f, &[vec![3], vec![5]]).unwrap();
        assert_eq!(a.solve(&a.mul(&x).unwrap()).unwrap(), x);
        let thin = FieldMatrix::from_rows(f, &[vec![1, 2], vec![2, 4]]).unwrap();
        assert!(matches!(
            thin.solve(&FieldMatrix::zeros(f, 2, 1)),
            Err(Error::RankDeficient { rank: 1, needed: 2 })
        ));
    }

    #[test]
    fn json_form() {
        let m = FieldMatrix::from_rows(gf(7), &[vec![1, 2], vec![3, 4]]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"rows":2,"cols":2,"q":7,"entries":[1,2,3,4]}"#);
        assert_eq!(serde_json::from_str::<FieldMatrix>(&s).unwrap(), m);
        assert!(serde_json::from_str::<FieldMatrix>(r#"{"rows":1,"cols":1,"q":7,"entries":[9]}"#).is_err());
        assert!(serde_json::from_str::<FieldMatrix>(r#"{"rows":1,"cols":1,"q":8,"entries":[1]}"#).is_err());
    }

    #[test]
    fn det_nonzero_iff_full_rank() {
        let f = gf(5);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n = rng.random_range(1..6);
            let a = FieldMatrix::random(f, n, n, &mut rng);
            assert_eq!(a.det().unwrap() != 0, a.rank() == n);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn matrix(q: u64, rows: usize, cols: usize) -> impl Strategy<Value = FieldMatrix> {
            proptest::collection::vec(0..q, rows * cols)
                .prop_map(move |e| FieldMatrix::new(FieldConfig::new(q).unwrap(), rows, cols, e).unwrap())
        }

        proptest! {
            #[test]
            fn mul_is_associative(a in matrix(13, 3, 4), b in matrix(13, 4, 2), c in matrix(13, 2, 5)) {
                let left = a.mul(&b).unwrap().mul(&c).unwrap();
                let right = a.mul(&b.mul(&c).unwrap()).unwrap();
                prop_assert_eq!(left, right);
            }

            #[test]
            fn selection_rank_bound(a in matrix(7, 4, 5), x in 0usize..=5) {
                let sel = a.select_columns(x).unwrap();
                prop_assert!(sel.rank() <= a.rank().min(x));
            }

            #[test]
            fn det_matches_rank(a in matrix(3, 4, 4)) {
                prop_assert_eq!(a.det().unwrap() != 0, a.rank() == 4);
            }
        }
    }
}
