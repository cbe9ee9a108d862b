//! Kinetic node layer in moment space.
//!
//! On every edge the stationary layer is written in the moments
//! `G = (g_0, g_1, g_2, ..., g_{2N-1})` of the discrete distribution. The
//! conserved part gives `q = C` and `rho + c * g_2 = D`; the remaining moments
//! `g = (g_2, ..., g_{2N-1})` solve `d/dx (A22 g) = -g` and stay bounded only on
//! the span of the eigenvectors of `A22` with positive eigenvalues. At the node
//! the trace is therefore `G(0) = T (D, C, gamma)`. Inserting this into the
//! symmetric kinetic coupling yields a rank-`N` system whose null vector
//! encodes the coefficient `delta` of the macroscopic invariant `D + delta C`.

use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

mod audit;
mod delta;
mod node;
mod operator;

pub use audit::{wellposedness_audit, AuditReport, AuditRow, COND_LIMIT};
pub use delta::{
    compute_delta, delta_by_elimination, delta_from_nullspace, delta_sweep, CouplingResult, ROUTE_AGREEMENT_TOL,
};
pub use node::{node_solve, reconstruct_distribution, EdgeState, NodeState};
pub use operator::{build_layer, LayerOperator};

/// Number of edges at the node; `Infinite` is the limit of the rescaled
/// coupling operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeCount {
    Finite(usize),
    Infinite,
}

impl EdgeCount {
    pub fn finite(self) -> Option<usize> {
        match self {
            EdgeCount::Finite(n) => Some(n),
            EdgeCount::Infinite => None,
        }
    }

    pub(crate) fn validate(self) -> Result<Self> {
        match self {
            EdgeCount::Finite(n) if n < 2 => {
                Err(Error::InvalidInput(format!("a node needs at least 2 edges, got {n}")))
            }
            other => Ok(other),
        }
    }
}

impl fmt::Display for EdgeCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeCount::Finite(n) => write!(f, "{n}"),
            EdgeCount::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for EdgeCount {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(EdgeCount::Infinite),
            other => other
                .parse::<usize>()
                .map_err(|_| Error::InvalidInput(format!("invalid edge count '{s}'")))
                .and_then(|n| EdgeCount::Finite(n).validate()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_count_parsing() {
        assert_eq!("3".parse::<EdgeCount>().unwrap(), EdgeCount::Finite(3));
        assert_eq!("inf".parse::<EdgeCount>().unwrap(), EdgeCount::Infinite);
        assert_eq!("Infinity".parse::<EdgeCount>().unwrap(), EdgeCount::Infinite);
        assert!("1".parse::<EdgeCount>().is_err());
        assert!("x".parse::<EdgeCount>().is_err());
        assert_eq!(EdgeCount::Infinite.to_string(), "inf");
    }
}
