//! Orthonormal polynomial families and their Gauss rules.
//!
//! Both families satisfy the symmetric three-term recursion
//! `v P_k = alpha_{k+1} P_{k+1} + alpha_k P_{k-1}` with `P_{-1} = 0`:
//!
//! * Legendre on `[-1, 1]` with unit weight: `alpha_k = k / sqrt((2k-1)(2k+1))`,
//!   `P_0 = 1/sqrt(2)`;
//! * Hermite on the real line with weight `exp(-v^2)`: `alpha_k = sqrt(k/2)`,
//!   `P_0 = pi^(-1/4)`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::numerics::{symtridiag_eigenvalues, SymTridiag};
use crate::{Error, Result};

/// Rescale threshold for the running recursion in [`normalized_values`].
const RESCALE_AT: f64 = 1e150;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    Legendre,
    Hermite,
}

impl Family {
    /// Recursion coefficient `alpha_k`, `k >= 1`.
    pub fn alpha(self, k: usize) -> f64 {
        debug_assert!(k >= 1);
        let k = k as f64;
        match self {
            Family::Legendre => k / ((2.0 * k - 1.0) * (2.0 * k + 1.0)).sqrt(),
            Family::Hermite => (k / 2.0).sqrt(),
        }
    }

    /// Value of the constant polynomial `P_0`.
    pub fn p0(self) -> f64 {
        match self {
            Family::Legendre => std::f64::consts::FRAC_1_SQRT_2,
            Family::Hermite => PI.powf(-0.25),
        }
    }

    /// Total mass of the weight measure.
    pub fn weight_mass(self) -> f64 {
        match self {
            Family::Legendre => 2.0,
            Family::Hermite => PI.sqrt(),
        }
    }

    /// Wave speed of the limiting wave equation.
    pub fn wave_speed(self) -> f64 {
        match self {
            Family::Legendre => self.alpha(1),
            Family::Hermite => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Legendre => "legendre",
            Family::Hermite => "hermite",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "legendre" => Ok(Family::Legendre),
            "hermite" => Ok(Family::Hermite),
            other => Err(Error::InvalidInput(format!("unknown family '{other}'"))),
        }
    }
}

/// A family truncated at `max_degree`, with its recursion table cached.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthonormalBasis {
    pub family: Family,
    pub max_degree: usize,
    /// `alpha[k - 1] = alpha_k` for `k = 1..=max_degree`.
    pub alpha: Vec<f64>,
    pub a: f64,
    pub p0: f64,
}

impl OrthonormalBasis {
    pub fn new(family: Family, max_degree: usize) -> Self {
        Self {
            family,
            max_degree,
            alpha: recursion_coeffs(family, max_degree),
            a: family.wave_speed(),
            p0: family.p0(),
        }
    }

    /// `alpha_k`, falling back to the closed form beyond the cached table.
    pub fn alpha(&self, k: usize) -> f64 {
        self.alpha.get(k.wrapping_sub(1)).copied().unwrap_or_else(|| self.family.alpha(k))
    }

    /// `P_0(v), ..., P_{count-1}(v)` by forward recursion.
    pub fn eval_all(&self, v: f64, count: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(count);
        if count == 0 {
            return out;
        }
        out.push(self.p0);
        if count == 1 {
            return out;
        }
        out.push(v * self.p0 / self.alpha(1));
        for k in 1..count - 1 {
            let next = (v * out[k] - self.alpha(k) * out[k - 1]) / self.alpha(k + 1);
            out.push(next);
        }
        out
    }
}

/// `alpha_1, ..., alpha_k` of the family.
pub fn recursion_coeffs(family: Family, k: usize) -> Vec<f64> {
    (1..=k).map(|j| family.alpha(j)).collect()
}

/// Orthonormal polynomial `P_k` at `v`.
pub fn eval_poly(basis: &OrthonormalBasis, k: usize, v: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = basis.p0;
    for j in 0..k {
        let a_prev = if j == 0 { 0.0 } else { basis.alpha(j) };
        let next = (v * cur - a_prev * prev) / basis.alpha(j + 1);
        prev = cur;
        cur = next;
    }
    cur
}

/// Unit vector proportional to `(P_0(v), ..., P_{count-1}(v))` together with
/// `ln sum_k P_k(v)^2`.
///
/// The recursion is rescaled on the fly, so entries far below the largest one
/// may flush to zero but nothing overflows. At a Gauss node the returned vector
/// is the normalized Jacobi eigenvector, i.e. `sqrt(w) * P_k(v)`.
pub fn normalized_values(family: Family, v: f64, count: usize) -> (Vec<f64>, f64) {
    assert!(count >= 1);
    let mut p = Vec::with_capacity(count);
    p.push(family.p0());
    let mut log_scale = 0.0;
    for k in 0..count - 1 {
        let a_prev = if k == 0 { 0.0 } else { family.alpha(k) };
        let prev = if k == 0 { 0.0 } else { p[k - 1] };
        let next = (v * p[k] - a_prev * prev) / family.alpha(k + 1);
        p.push(next);
        if next.abs() > RESCALE_AT {
            for x in p.iter_mut() {
                *x /= RESCALE_AT;
            }
            log_scale += RESCALE_AT.ln();
        }
    }
    let sum_sq: f64 = p.iter().map(|x| x * x).sum();
    let norm = sum_sq.sqrt();
    for x in p.iter_mut() {
        *x /= norm;
    }
    (p, sum_sq.ln() + 2.0 * log_scale)
}

/// Symmetric Gauss rule with `2N` nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub family: Family,
    /// Ascending, `nodes[2N-1-i] = -nodes[i]`.
    pub nodes: Vec<f64>,
    /// Standard weights: they sum to the mass of the weight measure.
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn two_n(&self) -> usize {
        self.nodes.len()
    }

    /// Half the node count, `N`.
    pub fn half(&self) -> usize {
        self.nodes.len() / 2
    }

    /// `int p(v) w(v) dv` approximated by the rule.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&v, &w)| w * f(v)).sum()
    }

    /// Balanced transform: entry `(k, i)` is `sqrt(w_i) P_k(v_i)`, `0 <= k < 2N`.
    ///
    /// Orthogonal by construction; `S^{-1} = diag(w) S^T` in the raw form
    /// becomes `S_hat^{-1} = S_hat^T` here.
    pub fn balanced_transform(&self) -> DMatrix<f64> {
        let n2 = self.two_n();
        let mut s = DMatrix::zeros(n2, n2);
        for (i, &v) in self.nodes.iter().enumerate() {
            let (col, _) = normalized_values(self.family, v, n2);
            for (k, x) in col.into_iter().enumerate() {
                s[(k, i)] = x;
            }
        }
        s
    }

    /// Raw transform with entries `P_k(v_i)`. Overflows for large Hermite rules.
    pub fn raw_transform(&self) -> DMatrix<f64> {
        let basis = OrthonormalBasis::new(self.family, self.two_n());
        let n2 = self.two_n();
        let mut s = DMatrix::zeros(n2, n2);
        for (i, &v) in self.nodes.iter().enumerate() {
            for (k, x) in basis.eval_all(v, n2).into_iter().enumerate() {
                s[(k, i)] = x;
            }
        }
        s
    }
}

/// Gauss rule with `two_n` nodes by the Golub–Welsch construction.
///
/// Nodes are the eigenvalues of the Jacobi matrix (zero diagonal, off-diagonal
/// `alpha_1..alpha_{2N-1}`). The weight of a node is `mu_0` times the squared
/// first component of its normalized eigenvector; that eigenvector is the
/// recursion vector `(P_k(v_i))_k`, so the weight is `1 / sum_k P_k(v_i)^2`,
/// evaluated in log scale to keep tiny Hermite weights accurate.
pub fn gauss_rule(family: Family, two_n: usize) -> Result<QuadratureRule> {
    if two_n < 2 || two_n % 2 != 0 {
        return Err(Error::InvalidInput(format!(
            "quadrature size must be even and >= 2, got {two_n}"
        )));
    }
    let jacobi = SymTridiag::zero_diagonal(recursion_coeffs(family, two_n - 1));
    let raw = symtridiag_eigenvalues(&jacobi)?;

    let mut nodes = vec![0.0; two_n];
    for i in 0..two_n {
        nodes[i] = 0.5 * (raw[i] - raw[two_n - 1 - i]);
    }
    let half = two_n / 2;
    if !(nodes[half - 1] < 0.0 && nodes[half] > 0.0) {
        return Err(Error::Inconsistent("Gauss rule has a node at the origin".into()));
    }

    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&v| {
            let (_, log_sum) = normalized_values(family, v, two_n);
            (-log_sum).exp()
        })
        .collect();
    for i in 0..half {
        let w = 0.5 * (weights[i] + weights[two_n - 1 - i]);
        weights[i] = w;
        weights[two_n - 1 - i] = w;
    }
    Ok(QuadratureRule { family, nodes, weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn recursion_coefficient_examples() {
        assert_abs_diff_eq!(recursion_coeffs(Family::Legendre, 1)[0], 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(recursion_coeffs(Family::Hermite, 2)[1], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(recursion_coeffs(Family::Legendre, 3)[2], 3.0 / 35f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn basis_constants() {
        let l = OrthonormalBasis::new(Family::Legendre, 10);
        assert_abs_diff_eq!(l.a, 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(l.p0, 1.0 / 2f64.sqrt(), epsilon = 1e-15);
        let h = OrthonormalBasis::new(Family::Hermite, 10);
        assert_eq!(h.a, 1.0);
        assert_abs_diff_eq!(h.p0, PI.powf(-0.25), epsilon = 1e-15);
    }

    #[test]
    fn alphas_monotone_toward_limit() {
        // Legendre: k / sqrt(4k^2 - 1) > 1/2, decreasing to 1/2 from above.
        let l = recursion_coeffs(Family::Legendre, 200);
        assert!(l.windows(2).all(|w| w[0] > w[1]));
        assert!(l.iter().all(|&a| a > 0.5));
        assert!(l[199] - 0.5 < 1e-5);
        let h = recursion_coeffs(Family::Hermite, 200);
        assert!(h.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn eval_poly_examples() {
        let l = OrthonormalBasis::new(Family::Legendre, 4);
        assert_abs_diff_eq!(eval_poly(&l, 2, 0.0), -(5.0f64 / 8.0).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(eval_poly(&l, 1, 0.0), 0.0, epsilon = 1e-15);
        let h = OrthonormalBasis::new(Family::Hermite, 4);
        assert_abs_diff_eq!(eval_poly(&h, 1, 1.0), 2f64.sqrt() * PI.powf(-0.25), epsilon = 1e-14);
    }

    #[test]
    fn eval_poly_matches_closed_forms() {
        let l = OrthonormalBasis::new(Family::Legendre, 4);
        let h = OrthonormalBasis::new(Family::Hermite, 5);
        for &v in &[-0.9, -0.3, 0.2, 0.77] {
            assert_abs_diff_eq!(eval_poly(&l, 2, v), (5.0f64 / 8.0).sqrt() * (3.0 * v * v - 1.0), epsilon = 1e-14);
            // sqrt(2) P_2 = 2 v^2 P_0 - P_0
            let p0 = h.p0;
            assert_abs_diff_eq!(2f64.sqrt() * eval_poly(&h, 2, v), 2.0 * v * v * p0 - p0, epsilon = 1e-14);
            // sqrt(3/2) P_4 = v^4 P_0 - 3/sqrt(2) P_2 - 3/4 P_0
            let rhs = v.powi(4) * p0 - 3.0 / 2f64.sqrt() * eval_poly(&h, 2, v) - 0.75 * p0;
            assert_abs_diff_eq!(1.5f64.sqrt() * eval_poly(&h, 4, v), rhs, epsilon = 1e-14);
            let all = h.eval_all(v, 6);
            for k in 0..6 {
                assert_abs_diff_eq!(all[k], eval_poly(&h, k, v), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn two_point_rules() {
        let r = gauss_rule(Family::Legendre, 2).unwrap();
        assert_abs_diff_eq!(r.nodes[1], 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.nodes[0], -1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.weights[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.weights[1], 1.0, epsilon = 1e-14);

        let r = gauss_rule(Family::Hermite, 2).unwrap();
        assert_abs_diff_eq!(r.nodes[1], 1.0 / 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.weights[0], PI.sqrt() / 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.weights[1], PI.sqrt() / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn invalid_sizes() {
        assert!(gauss_rule(Family::Legendre, 0).is_err());
        assert!(gauss_rule(Family::Legendre, 3).is_err());
        assert!("chebyshev".parse::<Family>().is_err());
        assert_eq!("Hermite".parse::<Family>().unwrap(), Family::Hermite);
    }

    #[test]
    fn second_moment_legendre() {
        for n in 1..=40 {
            let r = gauss_rule(Family::Legendre, 2 * n).unwrap();
            assert_relative_eq!(r.integrate(|v| v * v), 2.0 / 3.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn symmetry_and_no_zero_node() {
        for fam in [Family::Legendre, Family::Hermite] {
            for n in [1, 2, 5, 17, 50] {
                let r = gauss_rule(fam, 2 * n).unwrap();
                for i in 0..2 * n {
                    assert_eq!(r.nodes[i], -r.nodes[2 * n - 1 - i]);
                    assert_eq!(r.weights[i], r.weights[2 * n - 1 - i]);
                    assert!(r.weights[i] > 0.0);
                }
                assert!(r.nodes[n - 1] < 0.0 && r.nodes[n] > 0.0);
                assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    /// Even moments against the analytic values, relative error 1e-12.
    #[test]
    fn even_moments_exact() {
        fn double_factorial(m: usize) -> f64 {
            // (2m-1)!!
            (1..=m).map(|j| (2 * j - 1) as f64).product()
        }
        for n in [1usize, 3, 8, 20, 50] {
            let lr = gauss_rule(Family::Legendre, 2 * n).unwrap();
            let hr = gauss_rule(Family::Hermite, 2 * n).unwrap();
            for m in 0..=(2 * n - 1) {
                let exact_l = 2.0 / (2 * m + 1) as f64;
                assert_relative_eq!(lr.integrate(|v| v.powi(2 * m as i32)), exact_l, max_relative = 1e-12);
                // Keep the Hermite check in the range where v^{2m} stays representable.
                if m <= 2 * n - 1 {
                    let exact_h = PI.sqrt() * double_factorial(m) / 2f64.powi(m as i32);
                    assert_relative_eq!(hr.integrate(|v| v.powi(2 * m as i32)), exact_h, max_relative = 1e-12);
                }
            }
        }
    }

    fn orthonormality_error(rule: &QuadratureRule) -> f64 {
        let s = rule.balanced_transform();
        let g = &s * s.transpose();
        (g - DMatrix::identity(rule.two_n(), rule.two_n())).abs().max()
    }

    #[test]
    fn discrete_orthonormality_up_to_n50() {
        for fam in [Family::Legendre, Family::Hermite] {
            for n in [1, 2, 7, 25, 50] {
                let r = gauss_rule(fam, 2 * n).unwrap();
                let err = orthonormality_error(&r);
                assert!(err < 1e-10, "{fam} N={n}: {err:e}");
            }
        }
    }

    #[test]
    fn raw_orthonormality_with_weights() {
        // Sum_i w_i P_j(v_i) P_k(v_i) in the raw form, where it is representable.
        for (fam, n) in [(Family::Legendre, 50), (Family::Hermite, 20)] {
            let r = gauss_rule(fam, 2 * n).unwrap();
            let s = r.raw_transform();
            let w = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(r.weights.clone()));
            let g = &s * w * s.transpose();
            let err = (g - DMatrix::identity(2 * n, 2 * n)).abs().max();
            assert!(err < 1e-10, "{fam} N={n}: {err:e}");
        }
    }

    #[test]
    fn weights_sum_to_measure_mass() {
        for fam in [Family::Legendre, Family::Hermite] {
            let r = gauss_rule(fam, 64).unwrap();
            assert_relative_eq!(r.weights.iter().sum::<f64>(), fam.weight_mass(), max_relative = 1e-13);
        }
    }
}
