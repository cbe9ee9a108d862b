use std::ops::RangeInclusive;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{EdgeCount, LayerOperator};
use crate::numerics::cond_estimate;
use crate::orthopoly::Family;
use crate::{Error, Result};

/// Condition numbers above this count as not invertible.
pub const COND_LIMIT: f64 = 1e12;

/// Outcome for one `(N, n)` pair.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditRow {
    pub n_half: usize,
    pub n_edges: usize,
    /// Condition of `B1 S^{-1} R_inf` (two-edge interface problem).
    pub cond_b1: f64,
    /// Condition of `B2 S^{-1} R_inf` (symmetric node problem).
    pub cond_b2: f64,
    pub invertible: bool,
    /// Largest eigenvalue of `y^T A y` restricted to `ker(B2 S^{-1})`; `None` for `n = 2`.
    pub dissipation: Option<f64>,
}

impl AuditRow {
    pub fn dissipative(&self) -> Option<bool> {
        self.dissipation.map(|d| d < 0.0)
    }

    pub fn passed(&self) -> bool {
        self.invertible && self.dissipative() != Some(false)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditReport {
    pub family: Family,
    pub rows: Vec<AuditRow>,
}

impl AuditReport {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(AuditRow::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AuditRow> {
        self.rows.iter().filter(|r| !r.passed())
    }
}

/// Checks unique solvability of the half-space problems for every `N` and
/// finite `n` in the given ranges.
pub fn wellposedness_audit(
    family: Family,
    n_range: RangeInclusive<usize>,
    edge_range: RangeInclusive<usize>,
) -> Result<AuditReport> {
    if n_range.is_empty() || edge_range.is_empty() {
        return Err(Error::InvalidInput("audit ranges must be non-empty".into()));
    }
    if *n_range.start() < 2 || *edge_range.start() < 2 {
        return Err(Error::InvalidInput("audit needs N >= 2 and n >= 2".into()));
    }
    let rows: Vec<Vec<AuditRow>> = n_range
        .into_par_iter()
        .map(|n_half| {
            let op = LayerOperator::new(family, n_half, EdgeCount::Finite(2))?;
            let trace = op.s_hat.tr_mul(&op.r_infinity());
            let cond_b1 = cond_estimate(&(&op.b1 * &trace));
            let a = op.transport_matrix().to_dense();
            edge_range
                .clone()
                .map(|n| {
                    let op = op.with_edge_count(EdgeCount::Finite(n))?;
                    let cond_b2 = cond_estimate(&(&op.b2 * &trace));
                    let dissipation = (n >= 3).then(|| max_dissipation(&op, &a));
                    Ok(AuditRow {
                        n_half,
                        n_edges: n,
                        cond_b1,
                        cond_b2,
                        invertible: cond_b1 < COND_LIMIT && cond_b2 < COND_LIMIT,
                        dissipation,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(AuditReport { family, rows: rows.into_iter().flatten().collect() })
}

/// Basis of `ker(B2 S^{-1})` in moment space, one column per velocity pair.
pub(crate) fn kernel_basis(op: &LayerOperator) -> DMatrix<f64> {
    let n_half = op.half();
    let n = op.n_edges.finite().expect("finite edge count") as f64;
    let mut f = DMatrix::zeros(2 * n_half, n_half);
    for k in 0..n_half {
        f[(n_half + k, k)] = -1.0;
        f[(n_half - 1 - k, k)] = n - 1.0;
    }
    &op.s_hat * f
}

fn max_dissipation(op: &LayerOperator, a: &DMatrix<f64>) -> f64 {
    let k = kernel_basis(op);
    let q = k.tr_mul(&(a * &k));
    let q = (&q + q.transpose()) * 0.5;
    q.symmetric_eigenvalues().max()
}
