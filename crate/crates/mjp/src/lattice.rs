//! Exact integer linear algebra for reaction-count lattices.
//!
//! Path updates that keep the states at both interval endpoints fixed may only
//! change the vector of per-reaction event totals by elements of the kernel
//! lattice `{z : A z = 0}` of the jump matrix.  Updates that move the state at
//! one free endpoint need the larger lattice obtained after deleting the row
//! of the species that is allowed to change.  Both are computed here from a
//! column-style Hermite normal form `H = A U` with `U` unimodular:
//!
//! 1. there are pivot rows `i_1 < ... < i_s` with `H[i_j][j] != 0`,
//! 2. every entry above a pivot is zero,
//! 3. columns `s+1..r` are zero, and
//! 4. `floor(H[i_j][l] / H[i_j][j]) = 0` for `l < j` (entries left of a pivot
//!    are reduced; pivots are normalized positive here, so those entries lie
//!    in `[0, pivot)`).
//!
//! Since the trailing columns of `H` vanish, the corresponding columns of `U`
//! form a basis of the kernel lattice.  Linearly dependent rows are tolerated:
//! a row that reduces to zero over the active columns simply produces no
//! pivot.  All arithmetic is checked and overflow reported as an error, never
//! wrapped.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LatticeError {
    #[error("integer overflow during lattice computation")]
    Overflow,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

pub type Result<T> = std::result::Result<T, LatticeError>;

/// Dense row-major integer matrix.
#[derive(Clone, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = IntMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    /// Builds a matrix from rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == ncols), "ragged rows");
        IntMatrix { rows: nrows, cols: ncols, data: rows.concat() }
    }

    /// Builds a matrix from columns.
    pub fn from_cols(cols: &[Vec<i64>]) -> Self {
        let ncols = cols.len();
        let nrows = cols.first().map_or(0, Vec::len);
        assert!(cols.iter().all(|c| c.len() == nrows), "ragged columns");
        let mut m = IntMatrix::zeros(nrows, ncols);
        for (j, col) in cols.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: i64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn col(&self, j: usize) -> Vec<i64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn row(&self, i: usize) -> &[i64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn delete_row(&self, i: usize) -> IntMatrix {
        assert!(i < self.rows, "row index out of range");
        let mut data = Vec::with_capacity((self.rows - 1) * self.cols);
        for k in 0..self.rows {
            if k != i {
                data.extend_from_slice(self.row(k));
            }
        }
        IntMatrix { rows: self.rows - 1, cols: self.cols, data }
    }

    /// Checked matrix product.
    pub fn mul(&self, rhs: &IntMatrix) -> Result<IntMatrix> {
        if self.cols != rhs.rows {
            return Err(LatticeError::Dimension(format!(
                "{}x{} * {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = IntMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for j in 0..rhs.cols {
                let mut acc: i64 = 0;
                for k in 0..self.cols {
                    let term = self
                        .get(i, k)
                        .checked_mul(rhs.get(k, j))
                        .ok_or(LatticeError::Overflow)?;
                    acc = acc.checked_add(term).ok_or(LatticeError::Overflow)?;
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    /// Checked matrix-vector product.
    pub fn mul_vec(&self, v: &[i64]) -> Result<Vec<i64>> {
        if self.cols != v.len() {
            return Err(LatticeError::Dimension(format!(
                "{}x{} * vec[{}]",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![0i64; self.rows];
        for i in 0..self.rows {
            let mut acc: i64 = 0;
            for k in 0..self.cols {
                let term = self.get(i, k).checked_mul(v[k]).ok_or(LatticeError::Overflow)?;
                acc = acc.checked_add(term).ok_or(LatticeError::Overflow)?;
            }
            out[i] = acc;
        }
        Ok(out)
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            let (x, y) = (self.get(i, a), self.get(i, b));
            self.set(i, a, y);
            self.set(i, b, x);
        }
    }

    fn negate_col(&mut self, j: usize) -> Result<()> {
        for i in 0..self.rows {
            let v = self.get(i, j).checked_neg().ok_or(LatticeError::Overflow)?;
            self.set(i, j, v);
        }
        Ok(())
    }

    /// Column operation `col[target] += q * col[source]` with overflow checks.
    fn add_col_multiple(&mut self, target: usize, source: usize, q: i64) -> Result<()> {
        for i in 0..self.rows {
            let term = q.checked_mul(self.get(i, source)).ok_or(LatticeError::Overflow)?;
            let v = self.get(i, target).checked_add(term).ok_or(LatticeError::Overflow)?;
            self.set(i, target, v);
        }
        Ok(())
    }
}

impl std::fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "IntMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// Result of a column-style Hermite reduction `H = A U`.
pub struct Hnf {
    pub h: IntMatrix,
    pub u: IntMatrix,
    /// `(row, col)` positions of the pivots, in column order.
    pub pivots: Vec<(usize, usize)>,
}

/// Computes the column-style Hermite normal form `H = A U`.
///
/// `U` is unimodular and accumulated by applying every column operation to an
/// identity matrix.  Rows of `A` need not be linearly independent; dependent
/// rows produce no pivot.
pub fn hermite_normal_form(a: &IntMatrix) -> Result<Hnf> {
    let (p, r) = (a.rows(), a.cols());
    let mut h = a.clone();
    let mut u = IntMatrix::identity(r);
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut j = 0usize;

    for i in 0..p {
        if j >= r {
            break;
        }
        // Euclidean reduction of row i over the active columns j..r: repeatedly
        // move the smallest nonzero entry to column j and divide the others by
        // it until only column j can be nonzero in this row.
        loop {
            let mut best: Option<(usize, i64)> = None;
            for l in j..r {
                let v = h.get(i, l);
                if v != 0 && best.map_or(true, |(_, bv)| v.abs() < bv.abs()) {
                    best = Some((l, v));
                }
            }
            let Some((lmin, _)) = best else { break };
            h.swap_cols(j, lmin);
            u.swap_cols(j, lmin);
            let piv = h.get(i, j);
            let mut clean = true;
            for l in (j + 1)..r {
                let v = h.get(i, l);
                if v == 0 {
                    continue;
                }
                let q = v / piv;
                if q != 0 {
                    h.add_col_multiple(l, j, -q)?;
                    u.add_col_multiple(l, j, -q)?;
                }
                if h.get(i, l) != 0 {
                    clean = false;
                }
            }
            if clean {
                break;
            }
        }
        if h.get(i, j) != 0 {
            if h.get(i, j) < 0 {
                h.negate_col(j)?;
                u.negate_col(j)?;
            }
            pivots.push((i, j));
            j += 1;
        }
    }

    // Reduce entries left of each pivot into [0, pivot).
    for &(pi, pj) in &pivots {
        let piv = h.get(pi, pj);
        for l in 0..pj {
            let q = h.get(pi, l).div_euclid(piv);
            if q != 0 {
                h.add_col_multiple(l, pj, -q)?;
                u.add_col_multiple(l, pj, -q)?;
            }
        }
    }

    Ok(Hnf { h, u, pivots })
}

/// Basis of the kernel lattice `{z : A z = 0}`, one basis vector per column.
///
/// The basis is read off as the trailing columns of the unimodular factor of
/// the Hermite normal form; the number of columns equals `cols(A)` minus the
/// rank of `A`.
pub fn kernel_basis(a: &IntMatrix) -> Result<IntMatrix> {
    let hnf = hermite_normal_form(a)?;
    let s = hnf.pivots.len();
    let cols: Vec<Vec<i64>> = (s..a.cols()).map(|j| hnf.u.col(j)).collect();
    if cols.is_empty() {
        return Ok(IntMatrix::zeros(a.cols(), 0));
    }
    Ok(IntMatrix::from_cols(&cols))
}

/// Basis of the kernel lattice of `A` with row `j` deleted.
///
/// The returned basis is adapted to the boundary-move construction: the
/// columns of `kernel_basis(A)` come first, followed by one generator of the
/// quotient (a vector that changes species `j` by the smallest achievable
/// amount while leaving every other species unchanged).  When deleting the
/// row does not enlarge the kernel there is no such generator and the plain
/// kernel basis is returned.
pub fn kernel_basis_excluding_row(a: &IntMatrix, j: usize) -> Result<IntMatrix> {
    assert!(j < a.rows(), "row index out of range");
    let sub = a.delete_row(j);
    let w = kernel_basis(&sub)?;
    let v = kernel_basis(a)?;
    if w.cols() == v.cols() {
        // Row j is rationally dependent on the remaining rows, so the two
        // kernels coincide as lattices.
        return Ok(v);
    }
    debug_assert_eq!(w.cols(), v.cols() + 1);

    // The deleted row maps ker(A_minus_j) onto g * Z; combine basis vectors by
    // the extended euclidean algorithm to realize the generator g.
    let row = a.row(j);
    let mut g: i64 = 0;
    let mut combo = vec![0i64; w.cols()];
    for l in 0..w.cols() {
        let phi = dot_checked(row, &w.col(l))?;
        if phi == 0 {
            continue;
        }
        if g == 0 {
            g = phi;
            combo = vec![0; w.cols()];
            combo[l] = 1;
        } else {
            let (gg, s, t) = ext_gcd(g, phi);
            for c in combo.iter_mut() {
                *c = c.checked_mul(s).ok_or(LatticeError::Overflow)?;
            }
            combo[l] = combo[l].checked_add(t).ok_or(LatticeError::Overflow)?;
            g = gg;
        }
    }
    debug_assert_ne!(g, 0);

    let mut wstar = w.mul_vec(&combo)?;
    if g < 0 {
        for x in wstar.iter_mut() {
            *x = x.checked_neg().ok_or(LatticeError::Overflow)?;
        }
    }
    let mut cols: Vec<Vec<i64>> = (0..v.cols()).map(|l| v.col(l)).collect();
    cols.push(wstar);
    Ok(IntMatrix::from_cols(&cols))
}

fn dot_checked(a: &[i64], b: &[i64]) -> Result<i64> {
    let mut acc: i64 = 0;
    for (x, y) in a.iter().zip(b) {
        let term = x.checked_mul(*y).ok_or(LatticeError::Overflow)?;
        acc = acc.checked_add(term).ok_or(LatticeError::Overflow)?;
    }
    Ok(acc)
}

/// Extended euclidean algorithm: returns `(g, s, t)` with `s*a + t*b = g > 0`.
fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    let (mut r0, mut r1) = (a, b);
    let (mut s0, mut s1) = (1i64, 0i64);
    let (mut t0, mut t1) = (0i64, 1i64);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 < 0 {
        (-r0, -s0, -t0)
    } else {
        (r0, s0, t0)
    }
}

/// Rank over the rationals, by fraction-free (Bareiss) elimination in i128.
pub fn rank(a: &IntMatrix) -> Result<usize> {
    let (p, r) = (a.rows(), a.cols());
    let mut m: Vec<i128> = a.data.iter().map(|&x| x as i128).collect();
    let idx = |i: usize, j: usize| i * r + j;
    let mut rank = 0usize;
    let mut prev: i128 = 1;
    let mut row = 0usize;
    for col in 0..r {
        if row >= p {
            break;
        }
        let Some(pr) = (row..p).find(|&i| m[idx(i, col)] != 0) else { continue };
        if pr != row {
            for j in 0..r {
                m.swap(idx(row, j), idx(pr, j));
            }
        }
        for i in (row + 1)..p {
            for jj in (col + 1)..r {
                let lhs = m[idx(row, col)]
                    .checked_mul(m[idx(i, jj)])
                    .ok_or(LatticeError::Overflow)?;
                let rhs = m[idx(i, col)]
                    .checked_mul(m[idx(row, jj)])
                    .ok_or(LatticeError::Overflow)?;
                m[idx(i, jj)] = lhs.checked_sub(rhs).ok_or(LatticeError::Overflow)? / prev;
            }
            m[idx(i, col)] = 0;
        }
        prev = m[idx(row, col)];
        row += 1;
        rank += 1;
    }
    Ok(rank)
}

/// Exact determinant of a square matrix (Bareiss).
pub fn determinant(a: &IntMatrix) -> Result<i128> {
    if a.rows() != a.cols() {
        return Err(LatticeError::Dimension(format!("{}x{} not square", a.rows(), a.cols())));
    }
    let n = a.rows();
    if n == 0 {
        return Ok(1);
    }
    let mut m: Vec<i128> = a.data.iter().map(|&x| x as i128).collect();
    let idx = |i: usize, j: usize| i * n + j;
    let mut prev: i128 = 1;
    let mut sign: i128 = 1;
    for k in 0..n {
        let Some(pr) = (k..n).find(|&i| m[idx(i, k)] != 0) else { return Ok(0) };
        if pr != k {
            for j in 0..n {
                m.swap(idx(k, j), idx(pr, j));
            }
            sign = -sign;
        }
        for i in (k + 1)..n {
            for j in (k + 1)..n {
                let lhs = m[idx(k, k)].checked_mul(m[idx(i, j)]).ok_or(LatticeError::Overflow)?;
                let rhs = m[idx(i, k)].checked_mul(m[idx(k, j)]).ok_or(LatticeError::Overflow)?;
                m[idx(i, j)] = lhs.checked_sub(rhs).ok_or(LatticeError::Overflow)? / prev;
            }
            m[idx(i, k)] = 0;
        }
        prev = m[idx(k, k)];
    }
    Ok(sign * m[idx(n - 1, n - 1)])
}

/// Solves `A x = b` over the integers via the Hermite form; `None` when no
/// integer solution exists.
pub fn integer_solve(a: &IntMatrix, b: &[i64]) -> Result<Option<Vec<i64>>> {
    if b.len() != a.rows() {
        return Err(LatticeError::Dimension(format!(
            "solve {}x{} with rhs[{}]",
            a.rows(),
            a.cols(),
            b.len()
        )));
    }
    let hnf = hermite_normal_form(a)?;
    let mut y = vec![0i64; a.cols()];
    for &(pi, pj) in &hnf.pivots {
        let mut acc = b[pi] as i128;
        for l in 0..pj {
            acc -= hnf.h.get(pi, l) as i128 * y[l] as i128;
        }
        let piv = hnf.h.get(pi, pj) as i128;
        if acc % piv != 0 {
            return Ok(None);
        }
        y[pj] = i64::try_from(acc / piv).map_err(|_| LatticeError::Overflow)?;
    }
    let hy = hnf.h.mul_vec(&y)?;
    if hy != b {
        return Ok(None);
    }
    Ok(Some(hnf.u.mul_vec(&y)?))
}

/// Whether the columns of `v` and `w` generate the same lattice (both
/// inclusions checked by integer linear solves).
pub fn same_lattice(v: &IntMatrix, w: &IntMatrix) -> Result<bool> {
    if v.rows() != w.rows() {
        return Err(LatticeError::Dimension(format!(
            "lattices in Z^{} vs Z^{}",
            v.rows(),
            w.rows()
        )));
    }
    for j in 0..w.cols() {
        if integer_solve(v, &w.col(j))?.is_none() {
            return Ok(false);
        }
    }
    for j in 0..v.cols() {
        if integer_solve(w, &v.col(j))?.is_none() {
            return Ok(false);
        }
    }
    Ok(true)
}
