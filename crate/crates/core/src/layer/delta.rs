use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{EdgeCount, LayerOperator};
use crate::numerics::nullspace_1d;
use crate::orthopoly::Family;
use crate::{Error, Result};

/// Relative agreement required between the null-space and elimination routes.
pub const ROUTE_AGREEMENT_TOL: f64 = 1e-8;

/// Coefficient of the invariant `D + delta C` together with the chain and,
/// for sweeps, the convergence history.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingResult {
    pub family: Family,
    pub n_edges: EdgeCount,
    pub n_half: usize,
    pub delta: f64,
    /// `delta_1 .. delta_{N-1}` of `C + delta_1 gamma_1`, `gamma_{k-1} + delta_k gamma_k`.
    /// Entries may be non-finite where the null vector has underflowed.
    pub chain: Vec<f64>,
    /// `(N, delta(N))`, ascending in `N`.
    pub history: Vec<(usize, f64)>,
    /// `(N, log10 |delta(N) - delta(N-1)|)` for every `N` with a nonzero difference.
    pub increments: Vec<(usize, f64)>,
}

impl CouplingResult {
    /// True when the increments strictly decrease for all `N >= from`.
    pub fn increments_decreasing_from(&self, from: usize) -> bool {
        let tail: Vec<f64> = self.increments.iter().filter(|(n, _)| *n >= from).map(|&(_, e)| e).collect();
        tail.windows(2).all(|w| w[1] < w[0])
    }

    /// Fraction of consecutive increment pairs beyond `from` that decrease.
    pub fn decreasing_fraction_from(&self, from: usize) -> f64 {
        let tail: Vec<f64> = self.increments.iter().filter(|(n, _)| *n >= from).map(|&(_, e)| e).collect();
        if tail.len() < 2 {
            return 1.0;
        }
        let down = tail.windows(2).filter(|w| w[1] < w[0]).count();
        down as f64 / (tail.len() - 1) as f64
    }
}

/// `delta` and chain from the null vector of `M`.
pub fn delta_from_nullspace(m: &DMatrix<f64>) -> Result<(f64, Vec<f64>)> {
    let u = nullspace_1d(m)?;
    Ok(ratios(&u))
}

fn ratios(u: &DVector<f64>) -> (f64, Vec<f64>) {
    let delta = -u[0] / u[1];
    let chain = (1..u.len() - 1).map(|k| -u[k] / u[k + 1]).collect();
    (delta, chain)
}

/// Row reduction of `M` to unit form with partial pivoting. The columns are
/// eliminated from the last to the second, leaving rows `x_j + c_j x_0 = 0`.
/// When that leading block is singular (`delta = 0`, or a vanishing `C`
/// column for two edges) another column is taken as the free one.
pub fn delta_by_elimination(m: &DMatrix<f64>) -> Result<(f64, Vec<f64>)> {
    let rows = m.nrows();
    if m.ncols() != rows + 1 || rows == 0 {
        return Err(Error::InvalidInput(format!("expected an N x (N+1) matrix, got {}x{}", rows, m.ncols())));
    }
    let mut last_err = None;
    for free in [0, 1, rows] {
        match gauss_jordan(m, free, (0..=rows).rev().filter(|&c| c != free)) {
            Ok(x) => return Ok(ratios(&x)),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

/// Solution of `M x = 0` with `x[free] = 1`, pivoting on `order`.
fn gauss_jordan(m: &DMatrix<f64>, free: usize, order: impl Iterator<Item = usize>) -> Result<DVector<f64>> {
    let rows = m.nrows();
    let mut a = m.clone();
    let scale = a.amax();
    let mut pivot_row_of = vec![usize::MAX; rows + 1];
    let mut used = vec![false; rows];
    for col in order {
        let (p, pv) = (0..rows)
            .filter(|&r| !used[r])
            .map(|r| (r, a[(r, col)].abs()))
            .fold((usize::MAX, -1.0), |best, c| if c.1 > best.1 { c } else { best });
        if pv <= 1e3 * f64::EPSILON * scale * rows as f64 {
            return Err(Error::RankDeficient(format!("zero pivot in column {col} during elimination")));
        }
        used[p] = true;
        pivot_row_of[col] = p;
        let prow = a.row(p) / a[(p, col)];
        a.set_row(p, &prow);
        for r in 0..rows {
            let f = a[(r, col)];
            if r != p && f != 0.0 {
                let updated = a.row(r) - &prow * f;
                a.set_row(r, &updated);
            }
        }
    }
    let mut x = DVector::zeros(rows + 1);
    for col in 0..=rows {
        x[col] = if col == free { 1.0 } else { -a[(pivot_row_of[col], free)] };
    }
    Ok(x)
}

fn check_routes(primary: f64, oracle: f64) -> Result<()> {
    let gap = (primary - oracle).abs();
    if !(gap <= ROUTE_AGREEMENT_TOL * primary.abs().max(1.0)) {
        return Err(Error::Inconsistent(format!(
            "delta extraction routes disagree: null space {primary}, elimination {oracle}"
        )));
    }
    Ok(())
}

/// `delta` for a single layer operator, cross-checked against elimination.
pub fn compute_delta(op: &LayerOperator) -> Result<CouplingResult> {
    let m = op.coupling_matrix();
    let (delta, chain) = delta_from_nullspace(&m)?;
    let (oracle, _) = delta_by_elimination(&m)?;
    check_routes(delta, oracle)?;
    if !delta.is_finite() {
        return Err(Error::Inconsistent(format!("non-finite delta {delta}")));
    }
    let n_half = op.half();
    Ok(CouplingResult {
        family: op.family(),
        n_edges: op.n_edges,
        n_half,
        delta,
        chain,
        history: vec![(n_half, delta)],
        increments: Vec::new(),
    })
}

/// `delta(N)` for every `N` in `n_min..=n_max`, evaluated in parallel.
/// The returned chain belongs to `n_max`.
pub fn delta_sweep(family: Family, n_edges: EdgeCount, n_min: usize, n_max: usize) -> Result<CouplingResult> {
    if n_min < 2 {
        return Err(Error::InvalidInput(format!("sweep must start at N >= 2, got {n_min}")));
    }
    if n_max < n_min {
        return Err(Error::InvalidInput(format!("empty sweep range {n_min}..={n_max}")));
    }
    let n_edges = n_edges.validate()?;
    let results: Vec<CouplingResult> = (n_min..=n_max)
        .into_par_iter()
        .map(|n| LayerOperator::new(family, n, n_edges).and_then(|op| compute_delta(&op)))
        .collect::<Result<_>>()?;
    let history: Vec<(usize, f64)> = results.iter().map(|r| (r.n_half, r.delta)).collect();
    let increments = history
        .windows(2)
        .filter_map(|w| {
            let d = (w[1].1 - w[0].1).abs();
            (d > 0.0).then(|| (w[1].0, d.log10()))
        })
        .collect();
    let last = results.into_iter().last().expect("non-empty sweep");
    Ok(CouplingResult { history, increments, ..last })
}
