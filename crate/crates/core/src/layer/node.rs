use nalgebra::{DMatrix, DVector};

use super::{compute_delta, EdgeCount, LayerOperator};
use crate::numerics::{cond_estimate, solve_dense};
use crate::orthopoly::Family;
use crate::{Error, Result};

const BALANCE_TOL: f64 = 1e-10;
const INVARIANT_TOL: f64 = 1e-9;
const RESIDUAL_TOL: f64 = 1e-9;

/// Layer coefficients and derived traces on one edge at the node.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeState {
    pub d: f64,
    pub c: f64,
    pub gamma: Vec<f64>,
    /// Density at the node, `rho(x = 0)`.
    pub rho0: f64,
    /// Full moment vector `G(0) = T (D, C, gamma)`, length `2N`.
    pub moments: Vec<f64>,
}

impl EdgeState {
    /// Flux at the node; equals `C`.
    pub fn flux(&self) -> f64 {
        self.c
    }
}

/// Solution of the coupled symmetric node problem.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeState {
    pub family: Family,
    pub n_half: usize,
    pub delta: f64,
    pub edges: Vec<EdgeState>,
    /// Condition estimate of the assembled system.
    pub cond: f64,
}

impl NodeState {
    /// `D_i + delta C_i` on every edge.
    pub fn invariants(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.d + self.delta * e.c).collect()
    }
}

/// Solves for `(D, C, gamma)` on every edge of a symmetric node with `n` edges,
/// given the incoming characteristics `r_minus_i = C_i - a D_i`.
pub fn node_solve(op: &LayerOperator, r_minus: &[f64]) -> Result<NodeState> {
    let n = match op.n_edges {
        EdgeCount::Finite(n) => n,
        EdgeCount::Infinite => {
            return Err(Error::InvalidInput("node solve needs a finite number of edges".into()))
        }
    };
    if r_minus.len() != n {
        return Err(Error::InvalidInput(format!("expected {n} characteristic values, got {}", r_minus.len())));
    }
    if r_minus.iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidInput("characteristic data must be finite".into()));
    }
    let n_half = op.half();
    let width = n_half + 1;
    let dim = n * width;
    let m = op.coupling_matrix();
    let a = op.wave_speed();

    let mut sys = DMatrix::zeros(dim, dim);
    let mut rhs = DVector::zeros(dim);
    let mut row = 0;
    for i in 0..n - 1 {
        for k in 0..n_half {
            for j in 0..width {
                sys[(row, i * width + j)] = m[(k, j)];
                sys[(row, (i + 1) * width + j)] = -m[(k, j)];
            }
            row += 1;
        }
    }
    for i in 0..n {
        sys[(row, i * width + 1)] = 1.0;
    }
    row += 1;
    for k in 0..n_half - 1 {
        for i in 0..n {
            for j in 0..n_half - 1 {
                sys[(row, i * width + 2 + j)] = op.r2_plus[(2 * k + 1, j)];
            }
        }
        row += 1;
    }
    for (i, &r) in r_minus.iter().enumerate() {
        sys[(row, i * width)] = -a;
        sys[(row, i * width + 1)] = 1.0;
        rhs[row] = r;
        row += 1;
    }
    debug_assert_eq!(row, dim);

    let x = solve_dense(&sys, &rhs)?;
    let residual = (&sys * &x - &rhs).amax();
    let data = rhs.amax().max(1.0);
    if residual > RESIDUAL_TOL * data * sys.amax().max(1.0) * x.amax().max(1.0) {
        return Err(Error::Inconsistent(format!("node system residual {residual:e}")));
    }

    let factor = op.rho_layer_factor();
    let edges: Vec<EdgeState> = (0..n)
        .map(|i| {
            let xi = x.rows(i * width, width).into_owned();
            let gamma: Vec<f64> = xi.iter().skip(2).copied().collect();
            let g2 = op.r2_plus.row(0).transpose().dot(&xi.rows(2, n_half - 1));
            EdgeState {
                d: xi[0],
                c: xi[1],
                rho0: xi[0] - factor * g2,
                moments: (&op.t_matrix * &xi).iter().copied().collect(),
                gamma,
            }
        })
        .collect();

    let delta = compute_delta(op)?.delta;
    let state = NodeState { family: op.family(), n_half, delta, edges, cond: cond_estimate(&sys) };
    check_node_state(op, &state, data)?;
    Ok(state)
}

fn check_node_state(op: &LayerOperator, state: &NodeState, data: f64) -> Result<()> {
    let flux: f64 = state.edges.iter().map(|e| e.c).sum();
    if flux.abs() > BALANCE_TOL * data {
        return Err(Error::Inconsistent(format!("flux balance violated: sum C = {flux:e}")));
    }
    let inv = state.invariants();
    let scale = inv.iter().fold(data, |m, v| m.max(v.abs()));
    if inv.iter().any(|v| (v - inv[0]).abs() > INVARIANT_TOL * scale) {
        return Err(Error::Inconsistent(format!("D + delta C differs across edges: {inv:?}")));
    }
    for k in 0..state.n_half - 1 {
        let odd: f64 = state
            .edges
            .iter()
            .map(|e| e.gamma.iter().enumerate().map(|(j, g)| op.r2_plus[(2 * k + 1, j)] * g).sum::<f64>())
            .sum();
        if odd.abs() > INVARIANT_TOL * data {
            return Err(Error::Inconsistent(format!("odd moment {k} not balanced: {odd:e}")));
        }
    }
    Ok(())
}

/// Samples the distribution at the node on one edge from the Hermite
/// expansion `f(v) = exp(-s^2) P_0 sum_k sigma_k g_k P_k(s)`, `s = v / sqrt(2)`.
/// With `filter`, `sigma_k = 1 - k / (2N)` for `k >= 2`; otherwise `sigma_k = 1`.
pub fn reconstruct_distribution(state: &NodeState, edge: usize, v_samples: &[f64], filter: bool) -> Result<Vec<f64>> {
    if state.family != Family::Hermite {
        return Err(Error::InvalidInput("distribution reconstruction is available for Hermite only".into()));
    }
    let e = state
        .edges
        .get(edge)
        .ok_or_else(|| Error::InvalidInput(format!("edge {edge} out of range ({} edges)", state.edges.len())))?;
    let two_n = e.moments.len();
    let sigma: Vec<f64> = (0..two_n)
        .map(|k| if filter && k >= 2 { 1.0 - k as f64 / two_n as f64 } else { 1.0 })
        .collect();
    let basis = crate::orthopoly::OrthonormalBasis::new(Family::Hermite, two_n);
    Ok(v_samples
        .iter()
        .map(|&v| {
            let s = v * std::f64::consts::FRAC_1_SQRT_2;
            let p = basis.eval_all(s, two_n);
            let sum: f64 = (0..two_n).map(|k| sigma[k] * e.moments[k] * p[k]).sum();
            (-s * s).exp() * basis.p0 * sum
        })
        .collect())
}
