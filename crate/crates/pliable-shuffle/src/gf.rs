//! Arithmetic and linear algebra over prime fields GF(q).
//!
//! Everything here is exact modular arithmetic; there are no tolerances.
//! The default field for all coding schemes is GF(2), where row reduction
//! runs on packed 64-bit words. General prime q is kept for the brute-force
//! solver and experimentation.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GfError {
    #[error("{0} is not prime")]
    NotPrime(u32),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("inconsistent linear system")]
    Inconsistent,
    #[error("target unknown is not uniquely determined")]
    NotUnique,
}

fn is_prime(q: u32) -> bool {
    if q < 2 {
        return false;
    }
    let mut d = 2u64;
    let q = q as u64;
    while d * d <= q {
        if q % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// A prime field GF(q). Cheap to copy; all element ops go through this.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Field {
    q: u32,
}

impl Field {
    pub fn new(q: u32) -> Result<Self, GfError> {
        if !is_prime(q) {
            return Err(GfError::NotPrime(q));
        }
        Ok(Field { q })
    }

    pub fn gf2() -> Self {
        Field { q: 2 }
    }

    pub fn modulus(&self) -> u32 {
        self.q
    }

    #[inline]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        (a + b) % self.q
    }

    #[inline]
    pub fn sub(&self, a: u32, b: u32) -> u32 {
        (a + self.q - b) % self.q
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        ((a as u64 * b as u64) % self.q as u64) as u32
    }

    /// Multiplicative inverse by Fermat's little theorem; panics on zero.
    pub fn inv(&self, a: u32) -> u32 {
        assert!(a % self.q != 0, "zero has no inverse");
        self.pow(a, self.q - 2)
    }

    fn pow(&self, mut base: u32, mut e: u32) -> u32 {
        let mut acc = 1u32;
        base %= self.q;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }
}

/// Dense row-major matrix over GF(q).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GfMatrix {
    field: Field,
    rows: usize,
    cols: usize,
    data: Vec<u32>,
}

impl GfMatrix {
    pub fn zero(field: Field, rows: usize, cols: usize) -> Self {
        GfMatrix {
            field,
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(field: Field, n: usize) -> Self {
        let mut m = Self::zero(field, n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_rows(field: Field, rows: &[Vec<u32>]) -> Result<Self, GfError> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(GfError::DimensionMismatch("ragged rows".into()));
        }
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            for &v in row {
                data.push(v % field.modulus());
            }
        }
        Ok(GfMatrix {
            field,
            rows: r,
            cols: c,
            data,
        })
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u32 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u32) {
        self.data[r * self.cols + c] = v % self.field.modulus();
    }

    pub fn column(&self, c: usize) -> Vec<u32> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn row_slice(&self, r: usize) -> &[u32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Stack `other` below `self`; column counts must agree.
    pub fn vstack(&self, other: &GfMatrix) -> Result<GfMatrix, GfError> {
        if self.cols != other.cols || self.field != other.field {
            return Err(GfError::DimensionMismatch("vstack".into()));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(GfMatrix {
            field: self.field,
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    /// Matrix-vector product over GF(q).
    pub fn mul_vec(&self, v: &[u32]) -> Result<Vec<u32>, GfError> {
        if v.len() != self.cols {
            return Err(GfError::DimensionMismatch(format!(
                "mul_vec: {} cols vs vector of length {}",
                self.cols,
                v.len()
            )));
        }
        let f = self.field;
        Ok((0..self.rows)
            .map(|r| {
                let mut acc = 0u32;
                for c in 0..self.cols {
                    acc = f.add(acc, f.mul(self.get(r, c), v[c]));
                }
                acc
            })
            .collect())
    }

    /// Row rank via Gaussian elimination.
    pub fn rank(&self) -> usize {
        if self.field.modulus() == 2 {
            return rank_gf2(self.rows, self.cols, |r, c| self.get(r, c));
        }
        let mut m = self.clone();
        m.rref_in_place().len()
    }

    /// In-place reduced row echelon form; returns the pivot column of each
    /// pivot row, in row order.
    pub fn rref_in_place(&mut self) -> Vec<usize> {
        let f = self.field;
        let mut pivots = Vec::new();
        let mut pr = 0;
        for pc in 0..self.cols {
            let Some(sel) = (pr..self.rows).find(|&r| self.get(r, pc) != 0) else {
                continue;
            };
            if sel != pr {
                for c in 0..self.cols {
                    let tmp = self.get(sel, c);
                    let v = self.get(pr, c);
                    self.set(sel, c, v);
                    self.set(pr, c, tmp);
                }
            }
            let inv = f.inv(self.get(pr, pc));
            for c in 0..self.cols {
                let v = f.mul(self.get(pr, c), inv);
                self.set(pr, c, v);
            }
            for r in 0..self.rows {
                if r != pr && self.get(r, pc) != 0 {
                    let factor = self.get(r, pc);
                    for c in 0..self.cols {
                        let v = f.sub(self.get(r, c), f.mul(factor, self.get(pr, c)));
                        self.set(r, c, v);
                    }
                }
            }
            pivots.push(pc);
            pr += 1;
            if pr == self.rows {
                break;
            }
        }
        pivots
    }
}

/// Rank of a 0/1 matrix over GF(2) using packed words.
fn rank_gf2(rows: usize, cols: usize, get: impl Fn(usize, usize) -> u32) -> usize {
    let words = cols.div_ceil(64).max(1);
    let mut packed: Vec<Vec<u64>> = (0..rows)
        .map(|r| {
            let mut w = vec![0u64; words];
            for c in 0..cols {
                if get(r, c) & 1 == 1 {
                    w[c / 64] |= 1 << (c % 64);
                }
            }
            w
        })
        .collect();
    let mut rank = 0;
    for c in 0..cols {
        let (wi, bit) = (c / 64, 1u64 << (c % 64));
        let Some(sel) = (rank..rows).find(|&r| packed[r][wi] & bit != 0) else {
            continue;
        };
        packed.swap(rank, sel);
        for r in 0..rows {
            if r != rank && packed[r][wi] & bit != 0 {
                let (head, tail) = packed.split_at_mut(rank.max(r));
                let (a, b) = if r > rank {
                    (&head[rank], &mut tail[0])
                } else {
                    (&tail[0], &mut head[r])
                };
                for w in 0..words {
                    b[w] ^= a[w];
                }
            }
        }
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}

/// Row-reduce the submatrix of `a` given by `col_idx` over GF(2) and report,
/// per selected column, whether the corresponding unit vector lies in the
/// row space (pivot column whose pivot row touches no other column). These
/// are exactly the columns outside the span of the others.
pub fn independent_columns_gf2(a: &GfMatrix, col_idx: &[usize]) -> Vec<bool> {
    debug_assert_eq!(a.field.modulus(), 2);
    let rows = a.rows;
    let cols = col_idx.len();
    let words = cols.div_ceil(64).max(1);
    let mut packed: Vec<Vec<u64>> = (0..rows)
        .map(|r| {
            let mut w = vec![0u64; words];
            for (k, &c) in col_idx.iter().enumerate() {
                if a.get(r, c) & 1 == 1 {
                    w[k / 64] |= 1 << (k % 64);
                }
            }
            w
        })
        .collect();
    let mut pivot_row_of_col: Vec<Option<usize>> = vec![None; cols];
    let mut rank = 0;
    for c in 0..cols {
        let (wi, bit) = (c / 64, 1u64 << (c % 64));
        let Some(sel) = (rank..rows).find(|&r| packed[r][wi] & bit != 0) else {
            continue;
        };
        packed.swap(rank, sel);
        for r in 0..rows {
            if r != rank && packed[r][wi] & bit != 0 {
                let (head, tail) = packed.split_at_mut(rank.max(r));
                let (src, dst) = if r > rank {
                    (&head[rank], &mut tail[0])
                } else {
                    (&tail[0], &mut head[r])
                };
                for w in 0..words {
                    dst[w] ^= src[w];
                }
            }
        }
        pivot_row_of_col[c] = Some(rank);
        rank += 1;
        if rank == rows {
            break;
        }
    }
    (0..cols)
        .map(|c| match pivot_row_of_col[c] {
            None => false,
            Some(pr) => {
                // Pivot row must be exactly the unit vector e_c.
                let mut ones = 0u32;
                for w in 0..words {
                    ones += packed[pr][w].count_ones();
                }
                ones == 1
            }
        })
        .collect()
}

/// Same predicate as [`independent_columns_gf2`] for general prime q.
pub fn independent_columns(a: &GfMatrix, col_idx: &[usize]) -> Vec<bool> {
    if a.field.modulus() == 2 {
        return independent_columns_gf2(a, col_idx);
    }
    let rows: Vec<Vec<u32>> = (0..a.rows)
        .map(|r| col_idx.iter().map(|&c| a.get(r, c)).collect())
        .collect();
    let mut sub = GfMatrix::from_rows(a.field, &rows).expect("rectangular");
    let pivots = sub.rref_in_place();
    (0..col_idx.len())
        .map(|c| {
            pivots.iter().position(|&pc| pc == c).is_some_and(|pr| {
                (0..col_idx.len()).all(|c2| c2 == c || sub.get(pr, c2) == 0)
            })
        })
        .collect()
}

/// Is `v` a GF(q)-linear combination of the columns of `cols`?
pub fn in_span(v: &[u32], cols: &GfMatrix) -> Result<bool, GfError> {
    if v.len() != cols.rows {
        return Err(GfError::DimensionMismatch(format!(
            "in_span: vector of length {} vs {} rows",
            v.len(),
            cols.rows
        )));
    }
    let base = cols.rank();
    let mut aug_rows: Vec<Vec<u32>> = (0..cols.rows)
        .map(|r| {
            let mut row: Vec<u32> = cols.row_slice(r).to_vec();
            row.push(v[r] % cols.field.modulus());
            row
        })
        .collect();
    if aug_rows.is_empty() {
        aug_rows = vec![];
    }
    let aug = GfMatrix::from_rows(cols.field, &aug_rows)?;
    Ok(aug.rank() == base)
}

/// Solve `a_sub * b = x` for the unknown at `target_col`, assuming the caller
/// has checked that the target column lies outside the span of the others.
/// Simulates client-side decoding of a single message.
pub fn solve_for(a_sub: &GfMatrix, x: &[u32], target_col: usize) -> Result<u32, GfError> {
    if x.len() != a_sub.rows {
        return Err(GfError::DimensionMismatch(format!(
            "solve_for: rhs of length {} vs {} rows",
            x.len(),
            a_sub.rows
        )));
    }
    if target_col >= a_sub.cols {
        return Err(GfError::DimensionMismatch("target column out of range".into()));
    }
    let q = a_sub.field.modulus();
    let rows: Vec<Vec<u32>> = (0..a_sub.rows)
        .map(|r| {
            let mut row = a_sub.row_slice(r).to_vec();
            row.push(x[r] % q);
            row
        })
        .collect();
    let mut aug = GfMatrix::from_rows(a_sub.field, &rows)?;
    let pivots = aug.rref_in_place();
    let rhs = a_sub.cols;
    // A row 0 = nonzero signals a corrupted transmission.
    if pivots.contains(&rhs) {
        return Err(GfError::Inconsistent);
    }
    let Some(pr) = pivots.iter().position(|&pc| pc == target_col) else {
        return Err(GfError::NotUnique);
    };
    // Any free-column coefficient in the pivot row makes the target ambiguous.
    for c in 0..rhs {
        if c != target_col && aug.get(pr, c) != 0 {
            return Err(GfError::NotUnique);
        }
    }
    Ok(aug.get(pr, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gf2() -> Field {
        Field::gf2()
    }

    #[test]
    fn field_rejects_composite_modulus() {
        assert_eq!(Field::new(4), Err(GfError::NotPrime(4)));
        assert_eq!(Field::new(1), Err(GfError::NotPrime(1)));
        assert!(Field::new(7).is_ok());
    }

    #[test]
    fn rank_identity_and_zero() {
        assert_eq!(GfMatrix::identity(gf2(), 2).rank(), 2);
        assert_eq!(GfMatrix::zero(gf2(), 3, 3).rank(), 0);
    }

    #[test]
    fn rank_dependent_rows() {
        let m = GfMatrix::from_rows(gf2(), &[vec![1, 1], vec![1, 1]]).unwrap();
        assert_eq!(m.rank(), 1);
    }

    #[test]
    fn rank_gf3() {
        let f = Field::new(3).unwrap();
        let m = GfMatrix::from_rows(f, &[vec![1, 2], vec![1, 1]]).unwrap();
        assert_eq!(m.rank(), 2);
        let m = GfMatrix::from_rows(f, &[vec![1, 2], vec![2, 1]]).unwrap();
        assert_eq!(m.rank(), 1);
    }

    #[test]
    fn span_membership() {
        let cols = GfMatrix::from_rows(gf2(), &[vec![1], vec![0]]).unwrap();
        assert!(in_span(&[0, 0], &cols).unwrap());
        assert!(in_span(&[1, 0], &cols).unwrap());
        let cols = GfMatrix::from_rows(gf2(), &[vec![0], vec![1]]).unwrap();
        assert!(!in_span(&[1, 0], &cols).unwrap());
        assert!(in_span(&[1, 0], &cols).is_ok());
        assert!(in_span(&[1], &cols).is_err());
    }

    #[test]
    fn solve_scalar() {
        let a = GfMatrix::from_rows(gf2(), &[vec![1]]).unwrap();
        assert_eq!(solve_for(&a, &[1], 0), Ok(1));
    }

    #[test]
    fn solve_two_columns() {
        // Columns (1,0) and (1,1); x computed from b = (1,0).
        let a = GfMatrix::from_rows(gf2(), &[vec![1, 1], vec![0, 1]]).unwrap();
        let x = a.mul_vec(&[1, 0]).unwrap();
        assert_eq!(solve_for(&a, &x, 0), Ok(1));
    }

    #[test]
    fn solve_ambiguous_identical_columns() {
        let a = GfMatrix::from_rows(gf2(), &[vec![1, 1]]).unwrap();
        assert_eq!(solve_for(&a, &[1], 0), Err(GfError::NotUnique));
    }

    #[test]
    fn solve_inconsistent() {
        let a = GfMatrix::from_rows(gf2(), &[vec![1], vec![1]]).unwrap();
        assert_eq!(solve_for(&a, &[1, 0], 0), Err(GfError::Inconsistent));
    }

    #[test]
    fn independent_columns_matches_in_span() {
        // Exhaustive cross-check on small random GF(2) matrices.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let rows = rng.gen_range(1..=5);
            let cols = rng.gen_range(1..=5);
            let data: Vec<Vec<u32>> = (0..rows)
                .map(|_| (0..cols).map(|_| rng.gen_range(0..2)).collect())
                .collect();
            let m = GfMatrix::from_rows(gf2(), &data).unwrap();
            let idx: Vec<usize> = (0..cols).collect();
            let flags = independent_columns(&m, &idx);
            for c in 0..cols {
                let others: Vec<usize> = (0..cols).filter(|&j| j != c).collect();
                let sub_rows: Vec<Vec<u32>> = (0..rows)
                    .map(|r| others.iter().map(|&j| m.get(r, j)).collect())
                    .collect();
                let sub = GfMatrix::from_rows(gf2(), &sub_rows).unwrap();
                let expect = !in_span(&m.column(c), &sub).unwrap();
                assert_eq!(flags[c], expect, "col {c} of {data:?}");
            }
        }
    }
}
