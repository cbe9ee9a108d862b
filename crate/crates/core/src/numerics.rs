//! Small linear-algebra kernel.
//!
//! The symmetric tridiagonal eigensolver is an implicit-shift QL iteration.
//! Dense solves, QR and singular values are delegated to `nalgebra`.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

const MAX_QL_SWEEPS: usize = 60;

/// Relative threshold below which a singular value counts as zero.
pub const RANK_TOL: f64 = 1e-8;

/// Above this row count the null space is taken from a pivoted QR instead of an SVD.
pub const SVD_NULLSPACE_LIMIT: usize = 512;

/// Symmetric tridiagonal matrix stored by its diagonal and first off-diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTridiag {
    diag: Vec<f64>,
    offdiag: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::InvalidInput("tridiagonal matrix must have dim >= 1".into()));
        }
        if offdiag.len() + 1 != diag.len() {
            return Err(Error::InvalidInput(format!(
                "off-diagonal length {} does not match dim {}",
                offdiag.len(),
                diag.len()
            )));
        }
        Ok(Self { diag, offdiag })
    }

    /// Zero diagonal with the given off-diagonal (Jacobi matrices of symmetric weights).
    pub fn zero_diagonal(offdiag: Vec<f64>) -> Self {
        let diag = vec![0.0; offdiag.len() + 1];
        Self { diag, offdiag }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
        }
        for (i, &e) in self.offdiag.iter().enumerate() {
            m[(i, i + 1)] = e;
            m[(i + 1, i)] = e;
        }
        m
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(x.len(), n);
        let mut y: Vec<f64> = self.diag.iter().zip(x).map(|(d, x)| d * x).collect();
        for (i, &e) in self.offdiag.iter().enumerate() {
            y[i] += e * x[i + 1];
            y[i + 1] += e * x[i];
        }
        y
    }

    /// Max-row-sum norm, used to scale residual checks.
    pub fn norm_inf(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i].abs();
                if i > 0 {
                    s += self.offdiag[i - 1].abs();
                }
                if i + 1 < n {
                    s += self.offdiag[i].abs();
                }
                s
            })
            .fold(0.0, f64::max)
    }
}

/// Eigenvalues ascending with matching orthonormal eigenvector columns.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Largest `||A x_k - lambda_k x_k||` over all pairs.
    pub fn max_residual(&self, m: &SymTridiag) -> f64 {
        (0..self.dim())
            .map(|k| {
                let x: Vec<f64> = self.eigenvectors.column(k).iter().copied().collect();
                let ax = m.mul_vec(&x);
                ax.iter()
                    .zip(&x)
                    .map(|(a, x)| (a - self.eigenvalues[k] * x).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// Implicit QL sweeps on `(d, e)`; `e[i]` couples rows `i` and `i + 1` and `e[n-1]`
/// is scratch. When `z` is given its columns are rotated along (column-major, `n*n`).
fn ql_implicit(d: &mut [f64], e: &mut [f64], mut z: Option<&mut [f64]>) -> Result<()> {
    let n = d.len();
    if n == 1 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_SWEEPS {
                return Err(Error::EigenNoConvergence { index: l, iterations: iter });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0_f64, 1.0_f64, 0.0_f64);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    let (left, right) = z.split_at_mut((i + 1) * n);
                    let zi = &mut left[i * n..];
                    let zj = &mut right[..n];
                    for (a, b) in zi.iter_mut().zip(zj.iter_mut()) {
                        let f = *b;
                        *b = s * *a + c * f;
                        *a = c * *a - s * f;
                    }
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

fn tridiag_work(m: &SymTridiag) -> (Vec<f64>, Vec<f64>) {
    let d = m.diag.clone();
    let mut e = m.offdiag.clone();
    e.push(0.0);
    (d, e)
}

/// Eigenvalues only, ascending.
pub fn symtridiag_eigenvalues(m: &SymTridiag) -> Result<Vec<f64>> {
    let (mut d, mut e) = tridiag_work(m);
    ql_implicit(&mut d, &mut e, None)?;
    d.sort_by(|a, b| a.total_cmp(b));
    Ok(d)
}

/// Full eigendecomposition. Each eigenvector is normalized and its
/// largest-magnitude component made positive.
pub fn symtridiag_eig(m: &SymTridiag) -> Result<EigenDecomposition> {
    let n = m.dim();
    let (mut d, mut e) = tridiag_work(m);
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    ql_implicit(&mut d, &mut e, Some(&mut z))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let eigenvalues = order.iter().map(|&k| d[k]).collect();
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let src = &z[k * n..(k + 1) * n];
        let norm = src.iter().map(|x| x * x).sum::<f64>().sqrt();
        let sign = sign_of_largest(src);
        for (row, &x) in src.iter().enumerate() {
            eigenvectors[(row, col)] = sign * x / norm;
        }
    }
    Ok(EigenDecomposition { eigenvalues, eigenvectors })
}

/// `+1` when the largest-magnitude entry (first one on ties) is non-negative.
pub fn sign_of_largest(v: &[f64]) -> f64 {
    let mut best = 0.0_f64;
    let mut sign = 1.0;
    for &x in v {
        if x.abs() > best {
            best = x.abs();
            sign = if x < 0.0 { -1.0 } else { 1.0 };
        }
    }
    sign
}

/// Unit vector spanning the null space of an `N x (N+1)` matrix of rank `N`.
///
/// Sign fixed so that the largest-magnitude entry is positive.
pub fn nullspace_1d(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    let (rows, cols) = m.shape();
    if cols != rows + 1 {
        return Err(Error::InvalidInput(format!(
            "null space extraction expects N x (N+1), got {rows} x {cols}"
        )));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let mut u = if rows <= SVD_NULLSPACE_LIMIT {
        nullspace_svd(m)?
    } else {
        nullspace_qr(m)?
    };
    let sign = sign_of_largest(u.as_slice());
    u *= sign / u.norm();
    Ok(u)
}

fn nullspace_svd(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    let (rows, cols) = m.shape();
    // Pad to square so that the full right singular basis is produced.
    let mut sq = DMatrix::zeros(cols, cols);
    sq.view_mut((0, 0), (rows, cols)).copy_from(m);
    let svd = nalgebra::SVD::try_new(sq, false, true, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Inconsistent("SVD did not converge".into()))?;
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
    let largest = sv[order[cols - 1]];
    if rows > 0 {
        let second = sv[order[1]];
        if !(second > RANK_TOL * largest) {
            return Err(Error::RankDeficient(format!(
                "null space dimension exceeds one (sigma_min/sigma_max = {:e})",
                second / largest
            )));
        }
    }
    let v_t = svd.v_t.expect("requested right singular vectors");
    Ok(v_t.row(order[0]).transpose())
}

fn nullspace_qr(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    let (rows, cols) = m.shape();
    let mut sq = DMatrix::zeros(cols, cols);
    sq.view_mut((0, 0), (cols, rows)).copy_from(&m.transpose());
    let qr = nalgebra::linalg::ColPivQR::new(sq);
    let r = qr.r();
    let r00 = r[(0, 0)].abs();
    let rlast = r[(rows - 1, rows - 1)].abs();
    if !(rlast > RANK_TOL * r00) {
        return Err(Error::RankDeficient(format!(
            "pivoted QR: |r_nn|/|r_11| = {:e}",
            rlast / r00
        )));
    }
    let q = qr.q();
    Ok(q.column(cols - 1).into_owned())
}

/// Solve `A x = b` by LU with partial pivoting.
pub fn solve_dense(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if !a.is_square() || a.nrows() != b.len() {
        return Err(Error::InvalidInput(format!(
            "solve expects square system, got {:?} with rhs {}",
            a.shape(),
            b.len()
        )));
    }
    let lu = a.clone().lu();
    let scale = a.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let u = lu.u();
    let min_pivot = u.diagonal().iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    if scale == 0.0 || min_pivot <= f64::EPSILON * scale {
        return Err(Error::Singular { cond: cond_estimate(a) });
    }
    match lu.solve(b) {
        Some(x) if x.iter().all(|v| v.is_finite()) => Ok(x),
        _ => Err(Error::Singular { cond: cond_estimate(a) }),
    }
}

/// Thin QR factorization.
pub fn qr(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = m.clone().qr();
    (qr.q(), qr.r())
}

/// Ratio of extreme singular values; `+inf` for numerically singular input.
pub fn cond_estimate(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return f64::INFINITY;
    }
    let sv = match nalgebra::SVD::try_new(m.clone(), false, false, f64::EPSILON, 10_000) {
        Some(svd) => svd.singular_values,
        None => return f64::INFINITY,
    };
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let dim = m.nrows().max(m.ncols()) as f64;
    if max == 0.0 || min <= dim * f64::EPSILON * max {
        f64::INFINITY
    } else {
        max / min
    }
}
