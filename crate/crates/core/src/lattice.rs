//! Exact integer linear algebra over ℤ.
//!
//! Lattice vectors are **rows** throughout: a sublattice of ℤ^k is the row span
//! of an integer matrix with `k` columns. The one place a matrix acts on a
//! vector is a torus automorphism `A ∈ GL(k, ℤ)`, which acts on column vectors,
//! `v ↦ A·v` (see [`IntMatrix::apply`]).
//!
//! All arithmetic is arbitrary precision. The Smith elimination used by
//! [`snf_diagonal`] and [`is_direct_summand`] first runs over checked `i64`
//! and falls back to [`BigInt`] on overflow, which keeps the hot validity
//! checks allocation-free without giving up exactness.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LatticeError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix must have at least one column")]
    NoColumns,
    #[error("cannot saturate the zero lattice")]
    ZeroInput,
    #[error("vector {0} is not primitive")]
    NotPrimitive(String),
}

/// Dense integer matrix, row-major.
///
/// Zero rows are allowed (the rank-0 lattice); zero columns are not.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<BigInt>) -> Result<Self, LatticeError> {
        if cols == 0 {
            return Err(LatticeError::NoColumns);
        }
        if data.len() != rows * cols {
            return Err(LatticeError::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(cols > 0, "matrix must have at least one column");
        Self { rows, cols, data: vec![BigInt::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = BigInt::one();
        }
        m
    }

    /// Builds a matrix with `cols` columns from big-integer rows.
    pub fn from_rows(cols: usize, rows: Vec<Vec<BigInt>>) -> Result<Self, LatticeError> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * cols);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != cols {
                return Err(LatticeError::DimensionMismatch(format!(
                    "row {i} has length {}, expected {cols}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        Self::new(n, cols, data)
    }

    /// Convenience constructor from small-integer rows. Panics on ragged input.
    pub fn from_i64_rows<R: AsRef<[i64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let rows = rows
            .iter()
            .map(|r| r.as_ref().iter().map(|&x| BigInt::from(x)).collect())
            .collect();
        Self::from_rows(cols, rows).expect("ragged or empty matrix literal")
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[BigInt] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_vecs(&self) -> Vec<Vec<BigInt>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn to_i64_rows(&self) -> Option<Vec<Vec<i64>>> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.to_i64()).collect())
            .collect()
    }

    /// Panics on a matrix with zero rows, whose transpose has no columns.
    pub fn transpose(&self) -> Self {
        assert!(self.rows > 0, "cannot transpose a matrix with zero rows");
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j).clone());
            }
        }
        Self { rows: self.cols, cols: self.rows, data }
    }

    pub fn mul(&self, other: &IntMatrix) -> Result<IntMatrix, LatticeError> {
        if self.cols != other.rows {
            return Err(LatticeError::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = IntMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.get(i, l);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(l, j);
                }
            }
        }
        Ok(out)
    }

    /// `A·v` for a column vector `v`.
    pub fn apply(&self, v: &[BigInt]) -> Result<Vec<BigInt>, LatticeError> {
        if v.len() != self.cols {
            return Err(LatticeError::DimensionMismatch(format!(
                "vector of length {} against {} columns",
                v.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Determinant by fraction-free (Bareiss) elimination.
    pub fn determinant(&self) -> Result<BigInt, LatticeError> {
        if self.rows != self.cols {
            return Err(LatticeError::DimensionMismatch("determinant of a non-square matrix".into()));
        }
        let n = self.rows;
        let mut a = self.row_vecs();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for p in 0..n {
            if a[p][p].is_zero() {
                match (p + 1..n).find(|&i| !a[i][p].is_zero()) {
                    Some(i) => {
                        a.swap(p, i);
                        sign = -sign;
                    }
                    None => return Ok(BigInt::zero()),
                }
            }
            for i in p + 1..n {
                for j in p + 1..n {
                    let v = &a[i][j] * &a[p][p] - &a[i][p] * &a[p][j];
                    a[i][j] = v / &prev;
                }
            }
            prev = a[p][p].clone();
        }
        Ok(sign * if n == 0 { BigInt::one() } else { a[n - 1][n - 1].clone() })
    }
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", format_vector(self.row(i)))?;
        }
        write!(f, "]")
    }
}

pub fn format_vector(v: &[BigInt]) -> String {
    let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("({})", parts.join(","))
}

/// Flips the sign of `v` so that its first nonzero entry is positive.
pub fn canonical_sign(v: &mut [BigInt]) {
    if let Some(first) = v.iter().find(|x| !x.is_zero()) {
        if first.is_negative() {
            for x in v.iter_mut() {
                *x = -std::mem::take(x);
            }
        }
    }
}

pub fn vector_gcd(v: &[BigInt]) -> BigInt {
    v.iter().fold(BigInt::zero(), |g, x| g.gcd(x))
}

/// A primitive vector of ℤ^k up to sign: the weight of a circle subgroup.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PrimitiveVector {
    coords: Vec<BigInt>,
}

impl PrimitiveVector {
    pub fn new(mut coords: Vec<BigInt>) -> Result<Self, LatticeError> {
        if vector_gcd(&coords) != BigInt::one() {
            return Err(LatticeError::NotPrimitive(format_vector(&coords)));
        }
        canonical_sign(&mut coords);
        Ok(Self { coords })
    }

    pub fn from_i64s(coords: &[i64]) -> Result<Self, LatticeError> {
        Self::new(coords.iter().map(|&x| BigInt::from(x)).collect())
    }

    pub fn coords(&self) -> &[BigInt] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn into_coords(self) -> Vec<BigInt> {
        self.coords
    }
}

impl fmt::Debug for PrimitiveVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format_vector(&self.coords))
    }
}

impl fmt::Display for PrimitiveVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format_vector(&self.coords))
    }
}

/// A subtorus of T^k, stored as the Hermite basis of a saturated sublattice.
///
/// Equality of canonical bases is equality of subtori.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Subtorus {
    ambient: usize,
    basis: Vec<Vec<BigInt>>,
}

impl Subtorus {
    pub fn trivial(ambient: usize) -> Self {
        Self { ambient, basis: Vec::new() }
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn basis(&self) -> &[Vec<BigInt>] {
        &self.basis
    }

    /// Basis as an `n × k` matrix (zero rows for the trivial subtorus).
    pub fn basis_matrix(&self) -> IntMatrix {
        IntMatrix::from_rows(self.ambient, self.basis.clone()).expect("consistent basis")
    }

    /// Whether `other` is a subtorus of `self`.
    pub fn contains(&self, other: &Subtorus) -> bool {
        if other.ambient != self.ambient {
            return false;
        }
        if other.rank() == 0 {
            return true;
        }
        let mut rows = self.basis.clone();
        rows.extend(other.basis.iter().cloned());
        // self is saturated, so rational containment is integral containment
        rank_of_rows(self.ambient, &rows) == self.rank()
    }
}

impl fmt::Debug for Subtorus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Subtorus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.basis.iter().map(|r| format_vector(r)).collect();
        write!(f, "<{}>", parts.join(","))
    }
}

// ---------------------------------------------------------------------------
// Generic elimination core
// ---------------------------------------------------------------------------
mod elim {
    use super::*;

    /// Integer arithmetic that reports overflow instead of wrapping.
    pub(super) trait Zint: Clone + Ord + fmt::Debug {
        fn zero() -> Self;
        fn one() -> Self;
        fn is_zero(&self) -> bool;
        fn add(&self, o: &Self) -> Option<Self>;
        fn sub(&self, o: &Self) -> Option<Self>;
        fn mul(&self, o: &Self) -> Option<Self>;
        fn div_trunc(&self, o: &Self) -> Option<Self>;
        fn abs(&self) -> Option<Self>;
        fn neg(&self) -> Option<Self>;
    }

    impl Zint for i64 {
        fn zero() -> Self {
            0
        }
        fn one() -> Self {
            1
        }
        fn is_zero(&self) -> bool {
            *self == 0
        }
        fn add(&self, o: &Self) -> Option<Self> {
            self.checked_add(*o)
        }
        fn sub(&self, o: &Self) -> Option<Self> {
            self.checked_sub(*o)
        }
        fn mul(&self, o: &Self) -> Option<Self> {
            self.checked_mul(*o)
        }
        fn div_trunc(&self, o: &Self) -> Option<Self> {
            self.checked_div(*o)
        }
        fn abs(&self) -> Option<Self> {
            self.checked_abs()
        }
        fn neg(&self) -> Option<Self> {
            self.checked_neg()
        }
    }

    impl Zint for BigInt {
        fn zero() -> Self {
            Zero::zero()
        }
        fn one() -> Self {
            One::one()
        }
        fn is_zero(&self) -> bool {
            Zero::is_zero(self)
        }
        fn add(&self, o: &Self) -> Option<Self> {
            Some(self + o)
        }
        fn sub(&self, o: &Self) -> Option<Self> {
            Some(self - o)
        }
        fn mul(&self, o: &Self) -> Option<Self> {
            Some(self * o)
        }
        fn div_trunc(&self, o: &Self) -> Option<Self> {
            Some(self / o)
        }
        fn abs(&self) -> Option<Self> {
            Some(Signed::abs(self))
        }
        fn neg(&self) -> Option<Self> {
            Some(-self)
        }
    }

    /// Receives the elementary operations performed by [`smith_core`].
    pub(super) trait Tracker<T> {
        fn swap_rows(&mut self, _i: usize, _j: usize) {}
        /// row_i += q * row_j
        fn add_row(&mut self, _i: usize, _j: usize, _q: &T) {}
        fn negate_row(&mut self, _i: usize) {}
        fn swap_cols(&mut self, _i: usize, _j: usize) {}
        /// col_j += q * col_i
        fn add_col(&mut self, _i: usize, _j: usize, _q: &T) {}
    }

    pub(super) struct NoTrack;
    impl<T> Tracker<T> for NoTrack {}

    /// Tracks `L`, `L⁻¹`, `R`, `R⁻¹` with `L·M·R = D`.
    pub(super) struct Transforms {
        pub(super) left: Vec<Vec<BigInt>>,
        pub(super) left_inv: Vec<Vec<BigInt>>,
        pub(super) right: Vec<Vec<BigInt>>,
        pub(super) right_inv: Vec<Vec<BigInt>>,
    }

    pub(super) fn identity_rows(n: usize) -> Vec<Vec<BigInt>> {
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { <BigInt as One>::one() } else { <BigInt as Zero>::zero() }).collect())
            .collect()
    }

    impl Tracker<BigInt> for Transforms {
        fn swap_rows(&mut self, i: usize, j: usize) {
            self.left.swap(i, j);
            for row in self.left_inv.iter_mut() {
                row.swap(i, j);
            }
        }
        fn add_row(&mut self, i: usize, j: usize, q: &BigInt) {
            let rj = self.left[j].clone();
            for (a, b) in self.left[i].iter_mut().zip(&rj) {
                *a += q * b;
            }
            for row in self.left_inv.iter_mut() {
                let v = q * &row[i];
                row[j] -= v;
            }
        }
        fn negate_row(&mut self, i: usize) {
            for a in self.left[i].iter_mut() {
                *a = -std::mem::take(a);
            }
            for row in self.left_inv.iter_mut() {
                row[i] = -std::mem::take(&mut row[i]);
            }
        }
        fn swap_cols(&mut self, i: usize, j: usize) {
            for row in self.right.iter_mut() {
                row.swap(i, j);
            }
            self.right_inv.swap(i, j);
        }
        fn add_col(&mut self, i: usize, j: usize, q: &BigInt) {
            for row in self.right.iter_mut() {
                let v = q * &row[i];
                row[j] += v;
            }
            let rj = self.right_inv[j].clone();
            for (a, b) in self.right_inv[i].iter_mut().zip(&rj) {
                *a -= q * b;
            }
        }
    }

    fn add_row_multiple<T: Zint>(a: &mut [Vec<T>], i: usize, j: usize, q: &T) -> Option<()> {
        for c in 0..a[i].len() {
            let v = a[i][c].add(&q.mul(&a[j][c])?)?;
            a[i][c] = v;
        }
        Some(())
    }

    fn add_col_multiple<T: Zint>(a: &mut [Vec<T>], i: usize, j: usize, q: &T) -> Option<()> {
        for row in a.iter_mut() {
            let v = row[j].add(&q.mul(&row[i])?)?;
            row[j] = v;
        }
        Some(())
    }

    /// In-place Smith elimination. On return `a` is diagonal with nonnegative
    /// entries, each dividing the next. `None` signals arithmetic overflow.
    pub(super) fn smith_core<T: Zint, K: Tracker<T>>(a: &mut [Vec<T>], track: &mut K) -> Option<()> {
        let rows = a.len();
        let cols = if rows == 0 { 0 } else { a[0].len() };
        for t in 0..rows.min(cols) {
            // pivot: entry of least absolute value in the trailing block
            let mut best: Option<(T, usize, usize)> = None;
            for (i, row) in a.iter().enumerate().skip(t) {
                for (j, x) in row.iter().enumerate().skip(t) {
                    if !x.is_zero() {
                        let ax = x.abs()?;
                        if best.as_ref().is_none_or(|(b, _, _)| ax < *b) {
                            best = Some((ax, i, j));
                        }
                    }
                }
            }
            let Some((_, pi, pj)) = best else { break };
            if pi != t {
                a.swap(pi, t);
                track.swap_rows(pi, t);
            }
            if pj != t {
                for row in a.iter_mut() {
                    row.swap(pj, t);
                }
                track.swap_cols(pj, t);
            }
            loop {
                let mut restart = false;
                for i in t + 1..rows {
                    if a[i][t].is_zero() {
                        continue;
                    }
                    let q = a[i][t].div_trunc(&a[t][t])?.neg()?;
                    add_row_multiple(a, i, t, &q)?;
                    track.add_row(i, t, &q);
                    if !a[i][t].is_zero() {
                        a.swap(i, t);
                        track.swap_rows(i, t);
                        restart = true;
                    }
                }
                if restart {
                    continue;
                }
                for j in t + 1..cols {
                    if a[t][j].is_zero() {
                        continue;
                    }
                    let q = a[t][j].div_trunc(&a[t][t])?.neg()?;
                    add_col_multiple(a, t, j, &q)?;
                    track.add_col(t, j, &q);
                    if !a[t][j].is_zero() {
                        for row in a.iter_mut() {
                            row.swap(j, t);
                        }
                        track.swap_cols(j, t);
                        restart = true;
                    }
                }
                if restart {
                    continue;
                }
                // divisibility of the trailing block by the pivot
                let mut offender = None;
                'scan: for i in t + 1..rows {
                    for j in t + 1..cols {
                        if a[i][j].is_zero() {
                            continue;
                        }
                        let q = a[i][j].div_trunc(&a[t][t])?;
                        if !a[i][j].sub(&q.mul(&a[t][t])?)?.is_zero() {
                            offender = Some(i);
                            break 'scan;
                        }
                    }
                }
                match offender {
                    Some(i) => {
                        // row_t += row_i brings a non-multiple into row t
                        add_row_multiple(a, t, i, &T::one())?;
                        track.add_row(t, i, &T::one());
                    }
                    None => break,
                }
            }
            if a[t][t] < T::zero() {
                for x in a[t].iter_mut() {
                    *x = x.neg()?;
                }
                track.negate_row(t);
            }
        }
        Some(())
    }
}

use elim::{identity_rows, smith_core, NoTrack, Transforms};

fn small_rows(rows: &[Vec<BigInt>]) -> Option<Vec<Vec<i64>>> {
    const LIMIT: i64 = 1 << 40;
    rows.iter()
        .map(|r| {
            r.iter()
                .map(|x| x.to_i64().filter(|v| v.abs() < LIMIT))
                .collect::<Option<Vec<i64>>>()
        })
        .collect()
}

fn smith_diagonal_of_rows(rows: &[Vec<BigInt>], cols: usize) -> Vec<BigInt> {
    let n = rows.len().min(cols);
    if let Some(mut small) = small_rows(rows) {
        if smith_core(&mut small, &mut NoTrack).is_some() {
            return (0..n).map(|i| BigInt::from(small[i][i])).collect();
        }
    }
    let mut big = rows.to_vec();
    smith_core(&mut big, &mut NoTrack).expect("bigint arithmetic cannot overflow");
    (0..n).map(|i| big[i][i].clone()).collect()
}

fn rank_of_rows(cols: usize, rows: &[Vec<BigInt>]) -> usize {
    smith_diagonal_of_rows(rows, cols).iter().filter(|d| !d.is_zero()).count()
}

/// Smith decomposition `left · m · right = diag`, with the inverses of both
/// transforms. All four transforms are unimodular.
#[derive(Clone, Debug)]
pub struct SmithDecomposition {
    pub diagonal: Vec<BigInt>,
    pub left: IntMatrix,
    pub left_inv: IntMatrix,
    pub right: IntMatrix,
    pub right_inv: IntMatrix,
}

impl SmithDecomposition {
    pub fn rank(&self) -> usize {
        self.diagonal.iter().filter(|d| !d.is_zero()).count()
    }
}

pub fn smith_decomposition(m: &IntMatrix) -> SmithDecomposition {
    let mut a = m.row_vecs();
    let mut track = Transforms {
        left: identity_rows(m.rows),
        left_inv: identity_rows(m.rows),
        right: identity_rows(m.cols),
        right_inv: identity_rows(m.cols),
    };
    smith_core(&mut a, &mut track).expect("bigint arithmetic cannot overflow");
    let n = m.rows.min(m.cols);
    let square = |rows: Vec<Vec<BigInt>>, n: usize| -> IntMatrix {
        if n == 0 {
            // only reachable for an empty row dimension
            return IntMatrix { rows: 0, cols: 1, data: Vec::new() };
        }
        IntMatrix::from_rows(n, rows).expect("square transform")
    };
    SmithDecomposition {
        diagonal: (0..n).map(|i| a[i][i].clone()).collect(),
        left: square(track.left, m.rows),
        left_inv: square(track.left_inv, m.rows),
        right: square(track.right, m.cols),
        right_inv: square(track.right_inv, m.cols),
    }
}

/// Diagonal of the Smith normal form: `min(rows, cols)` nonnegative entries,
/// each dividing the next (zeros last).
pub fn snf_diagonal(m: &IntMatrix) -> Vec<BigInt> {
    smith_diagonal_of_rows(&m.row_vecs(), m.cols)
}

/// Row-style Hermite normal form.
///
/// Upper echelon, positive pivots, entries above each pivot reduced into
/// `[0, pivot)`, zero rows dropped. The result has the same ℤ-row span as `m`
/// and depends only on that span.
pub fn hnf(m: &IntMatrix) -> IntMatrix {
    let mut a = m.row_vecs();
    let rows = a.len();
    let mut r = 0;
    for c in 0..m.cols {
        if r == rows {
            break;
        }
        loop {
            let pivot = (r..rows)
                .filter(|&i| !a[i][c].is_zero())
                .min_by(|&i, &j| a[i][c].abs().cmp(&a[j][c].abs()).then(i.cmp(&j)));
            let Some(p) = pivot else { break };
            a.swap(r, p);
            let mut clean = true;
            for i in r + 1..rows {
                if a[i][c].is_zero() {
                    continue;
                }
                let q = a[i][c].div_floor(&a[r][c]);
                let (head, tail) = a.split_at_mut(i);
                for (x, y) in tail[0].iter_mut().zip(&head[r]) {
                    *x -= &q * y;
                }
                clean &= a[i][c].is_zero();
            }
            if clean {
                break;
            }
        }
        if r < rows && !a[r][c].is_zero() {
            if a[r][c].is_negative() {
                for x in a[r].iter_mut() {
                    *x = -std::mem::take(x);
                }
            }
            for i in 0..r {
                let q = a[i][c].div_floor(&a[r][c]);
                if q.is_zero() {
                    continue;
                }
                let (head, tail) = a.split_at_mut(r);
                for (x, y) in head[i].iter_mut().zip(&tail[0]) {
                    *x -= &q * y;
                }
            }
            r += 1;
        }
    }
    a.truncate(r);
    IntMatrix::from_rows(m.cols, a).expect("hnf keeps the column count")
}

/// Whether the rows of `b` are independent and span a direct summand of ℤ^k.
pub fn is_direct_summand(b: &IntMatrix) -> bool {
    rows_form_direct_summand(&b.row_vecs(), b.cols)
}

pub(crate) fn rows_form_direct_summand(rows: &[Vec<BigInt>], cols: usize) -> bool {
    if rows.len() > cols {
        return false;
    }
    smith_diagonal_of_rows(rows, cols).iter().all(|d| d.is_one())
}

/// Small-integer variant used by validity scans; `None` if arithmetic overflowed.
pub(crate) fn small_rows_form_direct_summand(rows: &[&[i64]], cols: usize) -> Option<bool> {
    if rows.len() > cols {
        return Some(false);
    }
    let mut a: Vec<Vec<i64>> = rows.iter().map(|r| r.to_vec()).collect();
    smith_core(&mut a, &mut NoTrack)?;
    Some((0..rows.len()).all(|i| a[i][i] == 1))
}

/// The subtorus whose lattice is the saturation of the row span of `b`.
pub fn saturate(b: &IntMatrix) -> Result<Subtorus, LatticeError> {
    let sd = smith_decomposition(b);
    let r = sd.rank();
    if r == 0 {
        return Err(LatticeError::ZeroInput);
    }
    // b = L⁻¹·D·R⁻¹, so the first r rows of R⁻¹ span the saturation
    let top = IntMatrix::from_rows(b.cols, sd.right_inv.row_vecs()[..r].to_vec())?;
    Ok(Subtorus { ambient: b.cols, basis: hnf(&top).row_vecs() })
}

/// Subtorus generated by a set of vectors; the empty set gives the trivial one.
pub fn subtorus_of(ambient: usize, vectors: &[Vec<BigInt>]) -> Result<Subtorus, LatticeError> {
    if vectors.is_empty() || vectors.iter().all(|v| v.iter().all(|x| x.is_zero())) {
        return Ok(Subtorus::trivial(ambient));
    }
    saturate(&IntMatrix::from_rows(ambient, vectors.to_vec())?)
}

/// Inverse of a unimodular matrix, or `None` if `m` is not in GL(n, ℤ).
pub fn unimodular_inverse(m: &IntMatrix) -> Option<IntMatrix> {
    if m.rows != m.cols {
        return None;
    }
    let sd = smith_decomposition(m);
    if !sd.diagonal.iter().all(|d| d.is_one()) {
        return None;
    }
    // L·M·R = I  ⇒  M⁻¹ = R·L
    Some(sd.right.mul(&sd.left).expect("square transforms"))
}

/// Result of [`solve_unimodular`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnimodularSolution {
    pub matrix: IntMatrix,
    /// `false` when the source vectors span a proper sublattice, so other
    /// matrices agreeing on that span exist.
    pub unique: bool,
}

fn check_vectors(vs: &[PrimitiveVector], k: usize, what: &str) -> Result<(), LatticeError> {
    for v in vs {
        if v.dim() != k {
            return Err(LatticeError::DimensionMismatch(format!(
                "{what} vector {v} has length {}, expected {k}",
                v.dim()
            )));
        }
    }
    Ok(())
}

fn matches_up_to_sign(image: &[BigInt], target: &[BigInt]) -> bool {
    image == target || image.iter().zip(target).all(|(a, b)| *a == -b)
}

/// Every `A ∈ GL(k, ℤ)` with `A·src_i = ±dst_i` for all `i`, one per
/// admissible sign pattern (up to the global sign `A ↦ -A`).
///
/// When `src` does not span ℚ^k each returned matrix is one representative of
/// its class; they all agree on the span of `src`.
pub fn unimodular_candidates(
    src: &[PrimitiveVector],
    dst: &[PrimitiveVector],
    k: usize,
) -> Result<Vec<IntMatrix>, LatticeError> {
    if src.len() != dst.len() {
        return Err(LatticeError::DimensionMismatch(format!(
            "{} source vectors against {} targets",
            src.len(),
            dst.len()
        )));
    }
    if k == 0 {
        return Err(LatticeError::NoColumns);
    }
    check_vectors(src, k, "source")?;
    check_vectors(dst, k, "target")?;

    // greedy maximal independent subset, in input order
    let mut picked: Vec<usize> = Vec::new();
    let mut rows: Vec<Vec<BigInt>> = Vec::new();
    for (i, v) in src.iter().enumerate() {
        rows.push(v.coords().to_vec());
        if rank_of_rows(k, &rows) == rows.len() {
            picked.push(i);
        } else {
            rows.pop();
        }
    }
    let r = picked.len();
    if r == 0 {
        return Ok(vec![IntMatrix::identity(k)]);
    }
    let src_rows = IntMatrix::from_rows(k, rows)?;
    let sd = smith_decomposition(&src_rows);
    // S = E·W with W the top r rows of R⁻¹ and E = L⁻¹·diag(d)
    let mut out: Vec<IntMatrix> = Vec::new();
    for pattern in 0u64..(1u64 << (r - 1)) {
        let signed: Vec<Vec<BigInt>> = picked
            .iter()
            .enumerate()
            .map(|(j, &i)| {
                let flip = j > 0 && (pattern >> (j - 1)) & 1 == 1;
                dst[i].coords().iter().map(|x| if flip { -x } else { x.clone() }).collect()
            })
            .collect();
        let target = IntMatrix::from_rows(k, signed)?;
        // W' = E⁻¹·D = diag(1/d)·L·D
        let ld = sd.left.mul(&target)?;
        let mut w_img = Vec::with_capacity(r);
        let mut integral = true;
        for j in 0..r {
            let d = &sd.diagonal[j];
            let row: Vec<BigInt> = ld.row(j).to_vec();
            if row.iter().any(|x| !x.is_multiple_of(d)) {
                integral = false;
                break;
            }
            w_img.push(row.into_iter().map(|x| x / d).collect::<Vec<_>>());
        }
        if !integral || !rows_form_direct_summand(&w_img, k) {
            continue;
        }
        // complete W' to a unimodular Q whose first r rows are W'
        let w_img_m = IntMatrix::from_rows(k, w_img.clone())?;
        let sd_img = smith_decomposition(&w_img_m);
        let mut q_rows = w_img;
        q_rows.extend(sd_img.right_inv.row_vecs()[r..].iter().cloned());
        let q = IntMatrix::from_rows(k, q_rows)?;
        // P = R⁻¹ has W on top; B = P⁻¹·Q = R·Q satisfies W·B = W'
        let b = sd.right.mul(&q)?;
        let a = b.transpose();
        let consistent = src.iter().zip(dst).all(|(s, d)| {
            a.apply(s.coords()).is_ok_and(|img| matches_up_to_sign(&img, d.coords()))
        });
        if consistent && !out.contains(&a) {
            out.push(a);
        }
    }
    Ok(out)
}

/// Finds `A ∈ GL(k, ℤ)` with `A·src_i = ±dst_i`, matrices acting on column
/// vectors. Returns `None` if no such matrix exists.
pub fn solve_unimodular(
    src: &[PrimitiveVector],
    dst: &[PrimitiveVector],
    k: usize,
) -> Result<Option<UnimodularSolution>, LatticeError> {
    let rank = if src.is_empty() {
        0
    } else {
        rank_of_rows(k, &src.iter().map(|v| v.coords().to_vec()).collect::<Vec<_>>())
    };
    let mut cands = unimodular_candidates(src, dst, k)?;
    Ok(if cands.is_empty() {
        None
    } else {
        Some(UnimodularSolution { matrix: cands.swap_remove(0), unique: rank == k })
    })
}
