//! Dense symmetric linear algebra on index-set blocks.
//!
//! Empty index sets are legal everywhere: they produce `0 x k` blocks, the
//! inverse of an empty matrix is empty, and a Schur complement with an empty
//! conditioning set is just the kept block.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::error::{GgmError, Result};
use crate::graph::Graph;

/// Relative eigenvalue cutoff for pseudoinverses and numerical rank.
pub const REL_TOL: f64 = 1e-10;

/// Absolute asymmetry accepted when reading a matrix from text.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Dense symmetric matrix. Entries `(i, j)` and `(j, i)` are always equal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Accepts `m` if it is square and symmetric within `tol`, then averages
    /// the two triangles so that the result is exactly symmetric.
    pub fn from_matrix(m: DMatrix<f64>, tol: f64) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(GgmError::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        for j in 0..m.ncols() {
            for i in 0..j {
                if !((m[(i, j)] - m[(j, i)]).abs() <= tol) {
                    return Err(GgmError::NotSymmetric { row: i, col: j });
                }
            }
        }
        let mut m = m;
        symmetrize(&mut m);
        Ok(SymMatrix(m))
    }

    /// Symmetrizes without validation.
    pub fn symmetrized(mut m: DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "matrix must be square");
        symmetrize(&mut m);
        SymMatrix(m)
    }

    pub fn from_row_slice(d: usize, values: &[f64]) -> Result<Self> {
        if values.len() != d * d {
            return Err(GgmError::DimensionMismatch { expected: d * d, found: values.len() });
        }
        SymMatrix::from_matrix(DMatrix::from_row_slice(d, d, values), 0.0)
    }

    pub fn identity(d: usize) -> Self {
        SymMatrix(DMatrix::identity(d, d))
    }

    pub fn zeros(d: usize) -> Self {
        SymMatrix(DMatrix::zeros(d, d))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let d = diag.len();
        let mut m = DMatrix::zeros(d, d);
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        SymMatrix(m)
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Writes `v` at both `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.0[(i, j)] = v;
        self.0[(j, i)] = v;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.order()).map(|i| self.0[(i, i)]).collect()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Callers must write both triangles.
    pub(crate) fn matrix_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.0
    }

    /// Principal block on `set`.
    pub fn principal(&self, set: &[usize]) -> SymMatrix {
        SymMatrix(gather(&self.0, set, set))
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// `D M D` for the diagonal matrix `D = diag(scale)`.
    pub fn scale_both(&self, scale: &[f64]) -> SymMatrix {
        let d = self.order();
        SymMatrix(DMatrix::from_fn(d, d, |i, j| scale[i] * self.0[(i, j)] * scale[j]))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or(GgmError::Parse { line: 0, message: "empty matrix file".into() })?;
        let d: usize = header
            .parse()
            .map_err(|e| GgmError::Parse { line: hline, message: format!("bad order `{header}`: {e}") })?;
        if d == 0 {
            return Err(GgmError::Parse { line: hline, message: "order must be positive".into() });
        }
        let mut values = Vec::with_capacity(d * d);
        let mut rows = 0;
        for (line, l) in lines {
            if rows == d {
                return Err(GgmError::Parse { line, message: format!("more than {d} rows") });
            }
            let before = values.len();
            for tok in l.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|e| GgmError::Parse { line, message: format!("bad value `{tok}`: {e}") })?;
                if !v.is_finite() {
                    return Err(GgmError::Parse { line, message: format!("non-finite value `{tok}`") });
                }
                values.push(v);
            }
            if values.len() - before != d {
                return Err(GgmError::Parse { line, message: format!("expected {d} values, found {}", values.len() - before) });
            }
            rows += 1;
        }
        if rows != d {
            return Err(GgmError::Parse { line: 0, message: format!("expected {d} rows, found {rows}") });
        }
        SymMatrix::from_matrix(DMatrix::from_row_slice(d, d, &values), SYMMETRY_TOL)
    }

    /// Text form: the order on the first line, then one row per line. Values
    /// use the shortest representation that round-trips.
    pub fn to_text(&self) -> String {
        let d = self.order();
        let mut s = format!("{d}\n");
        for i in 0..d {
            for j in 0..d {
                if j > 0 {
                    s.push(' ');
                }
                let _ = write!(s, "{}", self.0[(i, j)]);
            }
            s.push('\n');
        }
        s
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        SymMatrix::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let d = m.nrows();
    for j in 0..d {
        for i in 0..j {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Strictly increasing vertex indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GgmError::UnsortedIndexSet);
        }
        Ok(IndexSet(indices))
    }

    pub fn all(d: usize) -> Self {
        IndexSet((0..d).collect())
    }

    /// `0..d` minus this set. Panics if an index is `>= d`.
    pub fn complement(&self, d: usize) -> IndexSet {
        let mut mask = vec![true; d];
        self.0.iter().for_each(|&i| mask[i] = false);
        IndexSet((0..d).filter(|&i| mask[i]).collect())
    }

    pub fn check_within(&self, d: usize) -> Result<()> {
        match self.0.last() {
            Some(&i) if i >= d => Err(GgmError::IndexOutOfRange { index: i, order: d }),
            _ => Ok(()),
        }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Deref for IndexSet {
    type Target = [usize];
    fn deref(&self) -> &[usize] {
        &self.0
    }
}

pub(crate) fn gather(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// The `rows x cols` block of `m`, in the given orders.
pub fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> Result<DMatrix<f64>> {
    for &i in rows {
        if i >= m.nrows() {
            return Err(GgmError::IndexOutOfRange { index: i, order: m.nrows() });
        }
    }
    for &j in cols {
        if j >= m.ncols() {
            return Err(GgmError::IndexOutOfRange { index: j, order: m.ncols() });
        }
    }
    Ok(gather(m, rows, cols))
}

fn factor(m: &DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(GgmError::NonFiniteResult);
    }
    Cholesky::new(m.clone()).ok_or(GgmError::NotPositiveDefinite)
}

/// Solves `M X = B` by Cholesky factorization.
pub fn pd_solve(m: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() != b.nrows() {
        return Err(GgmError::DimensionMismatch { expected: m.nrows(), found: b.nrows() });
    }
    if m.nrows() == 0 {
        return Ok(b.clone());
    }
    Ok(factor(m)?.solve(b))
}

pub fn pd_inverse(m: &SymMatrix) -> Result<SymMatrix> {
    Ok(SymMatrix::symmetrized(pd_inverse_raw(m.matrix())?))
}

pub(crate) fn pd_inverse_raw(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let mut inv = factor(m)?.inverse();
    symmetrize(&mut inv);
    Ok(inv)
}

/// True when `m` admits a Cholesky factorization.
pub fn is_pd(m: &SymMatrix) -> bool {
    m.order() == 0 || factor(m.matrix()).is_ok()
}

/// Moore-Penrose pseudoinverse of a positive semidefinite matrix.
pub fn gen_inverse(m: &SymMatrix) -> Result<SymMatrix> {
    Ok(SymMatrix::symmetrized(gen_inverse_raw(m.matrix())?))
}

pub(crate) fn gen_inverse_raw(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = m.nrows();
    if d == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(GgmError::NonFiniteResult);
    }
    let eig = SymmetricEigen::new(m.clone());
    let lmax = eig.eigenvalues.max();
    let lmin = eig.eigenvalues.min();
    if lmax <= 0.0 {
        if lmin < 0.0 {
            return Err(GgmError::NegativeEigenvalue(lmin));
        }
        return Ok(DMatrix::zeros(d, d));
    }
    let cut = REL_TOL * lmax;
    if lmin < -cut {
        return Err(GgmError::NegativeEigenvalue(lmin));
    }
    let q = &eig.eigenvectors;
    let mut out = DMatrix::zeros(d, d);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > cut {
            let col = q.column(k);
            out += (&col * col.transpose()) / lam;
        }
    }
    symmetrize(&mut out);
    Ok(out)
}

/// `M_kk - M_kc (M_cc)^{-1} M_ck` with `c` the complement of `keep`.
pub fn schur(m: &SymMatrix, keep: &IndexSet) -> Result<SymMatrix> {
    keep.check_within(m.order())?;
    let c = keep.complement(m.order());
    let mkk = gather(m.matrix(), keep, keep);
    let mck = gather(m.matrix(), &c, keep);
    let x = pd_solve(&gather(m.matrix(), &c, &c), &mck)?;
    Ok(SymMatrix::symmetrized(mkk - mck.transpose() * x))
}

/// As [`schur`], with the pseudoinverse of `M_cc`.
pub fn schur_psd(m: &SymMatrix, keep: &IndexSet) -> Result<SymMatrix> {
    keep.check_within(m.order())?;
    let c = keep.complement(m.order());
    let mkk = gather(m.matrix(), keep, keep);
    let mck = gather(m.matrix(), &c, keep);
    let ginv = gen_inverse_raw(&gather(m.matrix(), &c, &c))?;
    Ok(SymMatrix::symmetrized(mkk - mck.transpose() * ginv * mck))
}

/// Largest absolute entry.
pub fn max_abs_dev(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Zeroes the off-diagonal entries at non-edges of `g`.
pub fn pattern_project(a: &SymMatrix, g: &Graph) -> Result<SymMatrix> {
    let d = a.order();
    if g.d() != d {
        return Err(GgmError::DimensionMismatch { expected: d, found: g.d() });
    }
    let mut out = SymMatrix::from_diagonal(&a.diagonal());
    for &(u, v) in g.edges() {
        out.set(u, v, a.get(u, v));
    }
    Ok(out)
}

/// Maximum column sum norm `max_j sum_i |A_ij|`.
pub fn max_colsum(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn logdet_pd(m: &SymMatrix) -> Result<f64> {
    logdet_pd_raw(m.matrix())
}

pub(crate) fn logdet_pd_raw(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let l = factor(m)?;
    Ok(2.0 * l.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

/// Eigenvalues in ascending order.
pub fn eigenvalues(m: &SymMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.matrix().clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_eig(m: &SymMatrix) -> f64 {
    eigenvalues(m).first().copied().unwrap_or(f64::INFINITY)
}

/// Number of eigenvalues above `REL_TOL * lambda_max`.
pub fn rank_tol(m: &SymMatrix) -> usize {
    let ev = eigenvalues(m);
    let lmax = ev.last().copied().unwrap_or(0.0);
    if lmax <= 0.0 {
        return 0;
    }
    ev.iter().filter(|&&l| l > REL_TOL * lmax).count()
}
