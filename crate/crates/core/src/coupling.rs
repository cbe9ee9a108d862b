//! Macroscopic coupling for the wave equation `rho_t + q_x = 0`, `q_t + a^2 rho_x = 0`
//! at a node with `n` edges.
//!
//! The node state `U = (rho_1, ..., rho_n, q_1, ..., q_n)` solves `B U = b` with
//! flux balance, equality of `rho + delta q` across edges and the incoming
//! characteristics `q_i - a rho_i = r_minus_i`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::layer::EdgeCount;
use crate::numerics::{cond_estimate, solve_dense};
use crate::orthopoly::Family;
use crate::{Error, Result};

const SINGULAR_TOL: f64 = 1e-12;

/// Closed-form approximation of `delta`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    HalfFlux,
    HalfMoment,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::HalfFlux => "halfflux",
            Method::HalfMoment => "halfmoment",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "halfflux" => Ok(Method::HalfFlux),
            "halfmoment" => Ok(Method::HalfMoment),
            _ => Err(Error::InvalidInput(format!("unknown method '{s}'"))),
        }
    }
}

/// Approximate `delta` from half-flux or half-moment closures.
pub fn approx_delta(family: Family, n: EdgeCount, method: Method) -> f64 {
    let r = match n {
        EdgeCount::Finite(n) => (n as f64 - 2.0) / n as f64,
        EdgeCount::Infinite => 1.0,
    };
    let sqrt_2pi = (2.0 * std::f64::consts::PI).sqrt();
    let sqrt3 = 3f64.sqrt();
    match (family, method) {
        (Family::Legendre, Method::HalfFlux) => 2.0 * r,
        (Family::Legendre, Method::HalfMoment) => r * (9.0 / sqrt3 + 4.0 * r) / (4.0 / sqrt3 + 2.0 * r),
        (Family::Hermite, Method::HalfFlux) => std::f64::consts::PI.sqrt() * r / std::f64::consts::SQRT_2,
        (Family::Hermite, Method::HalfMoment) => r * (4.0 + r * sqrt_2pi) / (sqrt_2pi + 2.0 * r),
    }
}

/// Coupling system `B U = b` of the wave equation at a node.
#[derive(Clone, Debug, PartialEq)]
pub struct MacroCoupling {
    pub n: usize,
    pub a: f64,
    pub delta: f64,
    /// `2n x 2n`, acting on `(rho_1..rho_n, q_1..q_n)`.
    pub matrix_b: DMatrix<f64>,
}

impl MacroCoupling {
    pub fn new(n: usize, a: f64, delta: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!("a node needs at least 2 edges, got {n}")));
        }
        if !(a > 0.0) || !a.is_finite() || !delta.is_finite() {
            return Err(Error::InvalidInput(format!("need finite a > 0 and finite delta, got a = {a}, delta = {delta}")));
        }
        let mut b = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            b[(0, n + i)] = 1.0;
        }
        for r in 1..n {
            let (i, j) = (r - 1, r);
            b[(r, i)] = 1.0;
            b[(r, j)] = -1.0;
            b[(r, n + i)] = delta;
            b[(r, n + j)] = -delta;
        }
        for i in 0..n {
            b[(n + i, i)] = -a;
            b[(n + i, n + i)] = 1.0;
        }
        Ok(Self { n, a, delta, matrix_b: b })
    }

    /// `(-1)^(n-1) n a (1 + a delta)^(n-1)`.
    pub fn determinant(&self) -> f64 {
        let sign = if self.n % 2 == 1 { 1.0 } else { -1.0 };
        sign * self.n as f64 * self.a * (1.0 + self.a * self.delta).powi(self.n as i32 - 1)
    }

    /// Right-hand side `(0, ..., 0, r_minus)`.
    pub fn rhs(&self, r_minus: &[f64]) -> Result<DVector<f64>> {
        if r_minus.len() != self.n {
            return Err(Error::InvalidInput(format!("expected {} characteristic values, got {}", self.n, r_minus.len())));
        }
        let mut b = DVector::zeros(2 * self.n);
        b.rows_mut(self.n, self.n).copy_from_slice(r_minus);
        Ok(b)
    }

    /// Node values `(rho_i(0), q_i(0))` per edge.
    pub fn solve(&self, r_minus: &[f64]) -> Result<Vec<(f64, f64)>> {
        if (1.0 + self.a * self.delta).abs() <= SINGULAR_TOL * (1.0 + (self.a * self.delta).abs()) {
            return Err(Error::Singular { cond: cond_estimate(&self.matrix_b) });
        }
        let b = self.rhs(r_minus)?;
        let u = solve_dense(&self.matrix_b, &b)?;
        let n = self.n;
        let out: Vec<(f64, f64)> = (0..n).map(|i| (u[i], u[n + i])).collect();

        let scale = r_minus.iter().fold(1.0_f64, |m, r| m.max(r.abs()));
        let flux: f64 = out.iter().map(|p| p.1).sum();
        let inv: Vec<f64> = out.iter().map(|(r, q)| r + self.delta * q).collect();
        let inv_scale = inv.iter().fold(scale, |m, v| m.max(v.abs()));
        if flux.abs() > 1e-10 * scale || inv.iter().any(|v| (v - inv[0]).abs() > 1e-10 * inv_scale) {
            return Err(Error::Inconsistent(format!("macroscopic node solve violated balance: flux {flux:e}")));
        }
        Ok(out)
    }
}

/// Node Riemann solve for the wave equation with coupling coefficient `delta`.
pub fn macro_node_solve(n: usize, a: f64, delta: f64, r_minus: &[f64]) -> Result<Vec<(f64, f64)>> {
    MacroCoupling::new(n, a, delta)?.solve(r_minus)
}
