use nalgebra::DMatrix;

use super::EdgeCount;
use crate::numerics::{symtridiag_eig, SymTridiag};
use crate::orthopoly::{gauss_rule, Family, OrthonormalBasis, QuadratureRule};
use crate::{Error, Result};

/// Orthogonality of the balanced transform is checked in full up to this size
/// and on a band of rows above it.
const FULL_ORTHO_CHECK: usize = 1024;
const ORTHO_TOL: f64 = 1e-9;

/// Moment-space layer problem for one family, `2N` velocities and `n` edges.
#[derive(Clone, Debug)]
pub struct LayerOperator {
    pub basis: OrthonormalBasis,
    pub rule: QuadratureRule,
    pub n_edges: EdgeCount,
    /// `2(N-1)` square, zero diagonal, off-diagonal `alpha_3 .. alpha_{2N-1}`.
    pub a22: SymTridiag,
    /// Positive eigenvalues of `a22`, ascending.
    pub lambda_plus: Vec<f64>,
    /// Eigenvectors of `a22` for `lambda_plus`, one per column.
    pub r2_plus: DMatrix<f64>,
    /// Balanced transform, entry `(k, i) = sqrt(w_i) P_k(v_i)`.
    pub s_hat: DMatrix<f64>,
    /// `2N x (N+1)`, maps `(D, C, gamma)` to the node moments.
    pub t_matrix: DMatrix<f64>,
    /// `(I_hat, -I)`.
    pub b1: DMatrix<f64>,
    /// `(I_hat, (n-1) I)`, or `(0, I)` for infinitely many edges.
    pub b2: DMatrix<f64>,
}

/// Builds the layer operator from an explicit basis and rule.
pub fn build_layer(basis: &OrthonormalBasis, rule: &QuadratureRule, n_edges: EdgeCount) -> Result<LayerOperator> {
    if basis.family != rule.family {
        return Err(Error::InvalidInput(format!(
            "basis family {} does not match rule family {}",
            basis.family, rule.family
        )));
    }
    let n_half = rule.half();
    if n_half < 2 {
        return Err(Error::InvalidInput(format!("N must be >= 2, got {n_half}")));
    }
    let n_edges = n_edges.validate()?;
    let family = basis.family;
    let dim = 2 * (n_half - 1);

    let a22 = SymTridiag::zero_diagonal((3..2 * n_half).map(|k| basis.alpha(k)).collect());
    let eig = symtridiag_eig(&a22)?;
    let positive: Vec<usize> = (0..dim).filter(|&k| eig.eigenvalues[k] > 0.0).collect();
    if positive.len() != n_half - 1 {
        return Err(Error::Inconsistent(format!(
            "A22 has {} positive eigenvalues, expected {}",
            positive.len(),
            n_half - 1
        )));
    }
    let lambda_plus: Vec<f64> = positive.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut r2_plus = DMatrix::zeros(dim, n_half - 1);
    for (col, &k) in positive.iter().enumerate() {
        r2_plus.set_column(col, &eig.eigenvectors.column(k));
    }

    let s_hat = rule.balanced_transform();
    check_orthogonal(&s_hat)?;

    let t_matrix = boundary_matrix(family, basis, &r2_plus);
    let (b1, b2) = coupling_operators(n_half, n_edges);

    Ok(LayerOperator {
        basis: basis.clone(),
        rule: rule.clone(),
        n_edges,
        a22,
        lambda_plus,
        r2_plus,
        s_hat,
        t_matrix,
        b1,
        b2,
    })
}

fn check_orthogonal(s: &DMatrix<f64>) -> Result<()> {
    let n = s.nrows();
    let rows: Vec<usize> = if n <= FULL_ORTHO_CHECK {
        (0..n).collect()
    } else {
        (0..8).chain(n / 2 - 4..n / 2 + 4).chain(n - 8..n).collect()
    };
    let mut worst = 0.0_f64;
    for &i in &rows {
        let ri = s.row(i);
        for j in 0..n {
            let dot = ri.dot(&s.row(j));
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - target).abs());
        }
    }
    if worst > ORTHO_TOL {
        return Err(Error::Inconsistent(format!(
            "discrete orthonormality violated by {worst:e}; quadrature rule is not usable"
        )));
    }
    Ok(())
}

/// `T = [[T11, T12], [0, R2+]]` for the column order `(D, C, gamma_1..gamma_{N-1})`.
fn boundary_matrix(family: Family, basis: &OrthonormalBasis, r2_plus: &DMatrix<f64>) -> DMatrix<f64> {
    let dim = r2_plus.nrows();
    let n_half = dim / 2 + 1;
    let (a1, a2) = (basis.alpha(1), basis.alpha(2));
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut t = DMatrix::zeros(2 * n_half, n_half + 1);
    t[(0, 0)] = inv_sqrt2;
    t[(1, 1)] = match family {
        Family::Legendre => inv_sqrt2 / a1,
        Family::Hermite => inv_sqrt2,
    };
    // g_0 = D / sqrt(2) - (alpha_2 / alpha_1) g_2; the ratio is sqrt(2) for Hermite.
    let ratio = a2 / a1;
    for j in 0..n_half - 1 {
        t[(0, 2 + j)] = -ratio * r2_plus[(0, j)];
    }
    t.view_mut((2, 2), (dim, n_half - 1)).copy_from(r2_plus);
    t
}

fn coupling_operators(n_half: usize, n_edges: EdgeCount) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut b1 = DMatrix::zeros(n_half, 2 * n_half);
    let mut b2 = DMatrix::zeros(n_half, 2 * n_half);
    for k in 0..n_half {
        // Row k pairs velocity v_{N+1+k} with its mirror v_{N-k} (1-based).
        b1[(k, n_half - 1 - k)] = 1.0;
        b1[(k, n_half + k)] = -1.0;
        match n_edges {
            EdgeCount::Finite(n) => {
                b2[(k, n_half - 1 - k)] = 1.0;
                b2[(k, n_half + k)] = (n - 1) as f64;
            }
            EdgeCount::Infinite => b2[(k, n_half + k)] = 1.0,
        }
    }
    (b1, b2)
}

impl LayerOperator {
    /// Layer operator with a freshly built basis and Gauss rule of `2 * n_half` nodes.
    pub fn new(family: Family, n_half: usize, n_edges: EdgeCount) -> Result<Self> {
        if n_half < 2 {
            return Err(Error::InvalidInput(format!("N must be >= 2, got {n_half}")));
        }
        let basis = OrthonormalBasis::new(family, 2 * n_half);
        let rule = gauss_rule(family, 2 * n_half)?;
        build_layer(&basis, &rule, n_edges)
    }

    /// Same layer with a different edge count; only the coupling operator changes.
    pub fn with_edge_count(&self, n_edges: EdgeCount) -> Result<Self> {
        let n_edges = n_edges.validate()?;
        let (b1, b2) = coupling_operators(self.half(), n_edges);
        Ok(Self { n_edges, b1, b2, ..self.clone() })
    }

    pub fn family(&self) -> Family {
        self.basis.family
    }

    /// `N`, half the number of discrete velocities.
    pub fn half(&self) -> usize {
        self.rule.half()
    }

    /// Wave speed of the limit equation.
    pub fn wave_speed(&self) -> f64 {
        self.basis.a
    }

    /// Weights of the positive velocities, the diagonal of `W`.
    pub fn weight_w(&self) -> &[f64] {
        &self.rule.weights[self.half()..]
    }

    /// Factor `c` in `rho(0) = D - c e_1^T R2+ gamma`.
    pub fn rho_layer_factor(&self) -> f64 {
        self.basis.alpha(2) * std::f64::consts::SQRT_2 / self.basis.alpha(1)
    }

    /// Full moment transport matrix `A` (the `2N` Jacobi matrix).
    pub fn transport_matrix(&self) -> SymTridiag {
        SymTridiag::zero_diagonal((1..2 * self.half()).map(|k| self.basis.alpha(k)).collect())
    }

    /// `S^{-1} T` in balanced form, i.e. `S_hat^T T`. Row `i` differs from the
    /// raw product by the factor `1 / sqrt(w_i)`.
    pub fn node_trace_matrix(&self) -> DMatrix<f64> {
        self.s_hat.tr_mul(&self.t_matrix)
    }

    /// `B S_hat^T T` for an arbitrary coupling operator `b`.
    pub fn coupling_matrix_for(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        b * self.node_trace_matrix()
    }

    /// `M = B2 S^{-1} T` in balanced form (`N x (N+1)`).
    pub fn coupling_matrix(&self) -> DMatrix<f64> {
        self.coupling_matrix_for(&self.b2)
    }

    /// `R_inf = [[R1+, -A11^{-1} A12 R2+], [0, R2+]]` with `R1+ = (1, 1)^T`.
    pub fn r_infinity(&self) -> DMatrix<f64> {
        let n_half = self.half();
        let dim = 2 * (n_half - 1);
        let ratio = self.basis.alpha(2) / self.basis.alpha(1);
        let mut r = DMatrix::zeros(2 * n_half, n_half);
        r[(0, 0)] = 1.0;
        r[(1, 0)] = 1.0;
        for j in 0..n_half - 1 {
            r[(0, 1 + j)] = -ratio * self.r2_plus[(0, j)];
        }
        r.view_mut((2, 1), (dim, n_half - 1)).copy_from(&self.r2_plus);
        r
    }

    /// Raw transform `S` with entries `P_k(v_i)`; representable only for moderate Hermite sizes.
    pub fn s_matrix(&self) -> DMatrix<f64> {
        self.rule.raw_transform()
    }

    /// Flip the sign of stable eigenvectors; `signs[j]` multiplies column `j`.
    pub fn with_flipped_signs(&self, signs: &[f64]) -> Self {
        assert_eq!(signs.len(), self.half() - 1);
        let mut out = self.clone();
        for (j, &s) in signs.iter().enumerate() {
            out.r2_plus.column_mut(j).scale_mut(s);
        }
        out.t_matrix = boundary_matrix(self.family(), &self.basis, &out.r2_plus);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    #[test]
    fn legendre_n2_closed_form() {
        let op = LayerOperator::new(Family::Legendre, 2, EdgeCount::Finite(3)).unwrap();
        let a3 = 3.0 / 35f64.sqrt();
        assert_eq!(op.a22.dim(), 2);
        assert_abs_diff_eq!(op.a22.offdiag()[0], a3, epsilon = 1e-15);
        assert_eq!(op.a22.diag(), &[0.0, 0.0]);
        assert_eq!(op.lambda_plus.len(), 1);
        assert_abs_diff_eq!(op.lambda_plus[0], a3, epsilon = 1e-15);
    }

    #[test]
    fn hermite_n2_closed_form() {
        let op = LayerOperator::new(Family::Hermite, 2, EdgeCount::Finite(3)).unwrap();
        assert_abs_diff_eq!(op.lambda_plus[0], 1.5f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn rejects_small_inputs() {
        assert!(LayerOperator::new(Family::Legendre, 1, EdgeCount::Finite(3)).is_err());
        assert!(LayerOperator::new(Family::Legendre, 3, EdgeCount::Finite(1)).is_err());
        let basis = OrthonormalBasis::new(Family::Hermite, 8);
        let rule = gauss_rule(Family::Legendre, 8).unwrap();
        assert!(build_layer(&basis, &rule, EdgeCount::Finite(3)).is_err());
    }

    #[test]
    fn a22_matches_tridiagonal_layout() {
        for fam in [Family::Legendre, Family::Hermite] {
            let op = LayerOperator::new(fam, 7, EdgeCount::Finite(4)).unwrap();
            let expected: Vec<f64> = (3..14).map(|k| fam.alpha(k)).collect();
            assert_eq!(op.a22.offdiag(), expected.as_slice());
            assert!(op.a22.diag().iter().all(|&d| d == 0.0));
        }
    }

    #[test]
    fn t_blocks() {
        let op = LayerOperator::new(Family::Legendre, 5, EdgeCount::Finite(3)).unwrap();
        let (a1, a2) = (Family::Legendre.alpha(1), Family::Legendre.alpha(2));
        let t = &op.t_matrix;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(t[(0, 0)], s, epsilon = 1e-15);
        assert_abs_diff_eq!(t[(1, 1)], s / a1, epsilon = 1e-15);
        assert_eq!(t[(0, 1)], 0.0);
        assert_eq!(t[(1, 0)], 0.0);
        for j in 0..4 {
            assert_abs_diff_eq!(t[(0, 2 + j)], -(a2 / a1) * op.r2_plus[(0, j)], epsilon = 1e-15);
            assert_eq!(t[(1, 2 + j)], 0.0);
        }
        assert_eq!(t.view((2, 2), (8, 4)).into_owned(), op.r2_plus);

        let op = LayerOperator::new(Family::Hermite, 5, EdgeCount::Finite(3)).unwrap();
        let t = &op.t_matrix;
        assert_abs_diff_eq!(t[(1, 1)], s, epsilon = 1e-15);
        for j in 0..4 {
            assert_abs_diff_eq!(t[(0, 2 + j)], -2f64.sqrt() * op.r2_plus[(0, j)], epsilon = 1e-14);
        }
        assert_abs_diff_eq!(op.rho_layer_factor(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn t_has_full_column_rank() {
        for fam in [Family::Legendre, Family::Hermite] {
            let op = LayerOperator::new(fam, 12, EdgeCount::Finite(3)).unwrap();
            let sv = op.t_matrix.clone().singular_values();
            let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(min > 1e-3, "{fam}: smallest singular value of T is {min}");
        }
    }

    #[test]
    fn coupling_operator_layout() {
        let op = LayerOperator::new(Family::Legendre, 3, EdgeCount::Finite(4)).unwrap();
        #[rustfmt::skip]
        let b2 = DMatrix::from_row_slice(3, 6, &[
            0.0, 0.0, 1.0, 3.0, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0, 3.0, 0.0,
            1.0, 0.0, 0.0, 0.0, 0.0, 3.0,
        ]);
        assert_eq!(op.b2, b2);
        assert_eq!(op.b1.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0, 1.0, -1.0, 0.0, 0.0]);
        let inf = op.with_edge_count(EdgeCount::Infinite).unwrap();
        assert_eq!(inf.b2.columns(0, 3).abs().max(), 0.0);
        assert_eq!(inf.b2.columns(3, 3).into_owned(), DMatrix::identity(3, 3));
    }

    /// S diag(W, W) S^T = I; raw for Legendre, balanced for Hermite.
    #[test]
    fn transform_orthogonality() {
        let op = LayerOperator::new(Family::Legendre, 30, EdgeCount::Finite(3)).unwrap();
        let s = op.s_matrix();
        let w = DMatrix::from_diagonal(&DVector::from_vec(op.rule.weights.clone()));
        let err = (&s * w * s.transpose() - DMatrix::identity(60, 60)).abs().max();
        assert!(err < 1e-9);
        let op = LayerOperator::new(Family::Hermite, 50, EdgeCount::Finite(3)).unwrap();
        let err = (&op.s_hat * op.s_hat.transpose() - DMatrix::identity(100, 100)).abs().max();
        assert!(err < 1e-9);
    }

    #[test]
    fn rho_consistency_with_t_legendre() {
        // sqrt(2) * (T x)_0 equals D - c e_1^T R2+ gamma for any x.
        let op = LayerOperator::new(Family::Legendre, 9, EdgeCount::Finite(3)).unwrap();
        let x = DVector::from_fn(10, |i, _| (i as f64 * 0.37).sin() + 0.1);
        let g = &op.t_matrix * &x;
        let gamma = x.rows(2, 8);
        let g2 = op.r2_plus.row(0).transpose().dot(&gamma);
        let rho = x[0] - op.rho_layer_factor() * g2;
        assert_abs_diff_eq!(2f64.sqrt() * g[0], rho, epsilon = 1e-12);
    }

    #[test]
    fn spectrum_paired_and_distinct() {
        for fam in [Family::Legendre, Family::Hermite] {
            for n_half in [2, 5, 20, 50] {
                let op = LayerOperator::new(fam, n_half, EdgeCount::Finite(3)).unwrap();
                let ev = crate::numerics::symtridiag_eigenvalues(&op.a22).unwrap();
                let m = ev.len();
                let norm = op.a22.norm_inf();
                for k in 0..m {
                    assert!((ev[k] + ev[m - 1 - k]).abs() < 1e-10);
                }
                assert!(ev.windows(2).all(|w| w[1] - w[0] > 1e-12 * norm));
                assert!(ev.iter().all(|&l| l != 0.0));
            }
        }
    }
}
