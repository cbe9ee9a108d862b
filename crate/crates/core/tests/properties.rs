use kinnet::layer::{compute_delta, delta_from_nullspace, delta_sweep, node_solve, EdgeCount, LayerOperator};
use kinnet::netsim::{compare_runs, kinetic_simulate, macro_simulate, spectral_delta, NetworkConfig};
use kinnet::Family;
use proptest::prelude::*;

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![Just(Family::Legendre), Just(Family::Hermite)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn delta_ignores_eigenvector_signs(fam in family(), n_half in 2usize..30, n in 2usize..8, seed in any::<u64>()) {
        let op = LayerOperator::new(fam, n_half, EdgeCount::Finite(n)).unwrap();
        let signs: Vec<f64> = (0..n_half - 1).map(|j| if (seed >> (j % 64)) & 1 == 1 { -1.0 } else { 1.0 }).collect();
        let a = compute_delta(&op).unwrap().delta;
        let b = compute_delta(&op.with_flipped_signs(&signs)).unwrap().delta;
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn delta_invariant_under_scaling(fam in family(), n_half in 2usize..30, n in 3usize..8, c in 1e-3f64..1e3) {
        let op = LayerOperator::new(fam, n_half, EdgeCount::Finite(n)).unwrap();
        let (a, _) = delta_from_nullspace(&op.coupling_matrix()).unwrap();
        let (b, _) = delta_from_nullspace(&op.coupling_matrix_for(&(&op.b2 * c))).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs());
    }

    #[test]
    fn node_solve_satisfies_all_equation_classes(
        fam in family(),
        n_half in 2usize..25,
        r in proptest::collection::vec(-3.0f64..3.0, 2..6),
    ) {
        let op = LayerOperator::new(fam, n_half, EdgeCount::Finite(r.len())).unwrap();
        let state = node_solve(&op, &r).unwrap();
        let a = op.wave_speed();
        let flux: f64 = state.edges.iter().map(|e| e.c).sum();
        prop_assert!(flux.abs() < 1e-10 * 3.0);
        let inv = state.invariants();
        for (e, (edge, r)) in state.edges.iter().zip(&r).enumerate() {
            prop_assert!((edge.c - a * edge.d - r).abs() < 1e-9 * 3.0, "characteristic on edge {}", e);
            prop_assert!((inv[e] - inv[0]).abs() < 1e-9 * inv[0].abs().max(3.0));
        }
        for k in 0..n_half - 1 {
            let odd: f64 = state.edges.iter().map(|e| {
                e.gamma.iter().enumerate().map(|(j, g)| op.r2_plus[(2 * k + 1, j)] * g).sum::<f64>()
            }).sum();
            prop_assert!(odd.abs() < 1e-9 * 3.0);
        }
    }
}

#[test]
fn positive_delta_for_three_or_more_edges() {
    for fam in [Family::Legendre, Family::Hermite] {
        for n in [3, 4, 10] {
            for n_half in [2, 10, 40] {
                let op = LayerOperator::new(fam, n_half, EdgeCount::Finite(n)).unwrap();
                assert!(compute_delta(&op).unwrap().delta > 0.0);
            }
        }
    }
}

#[test]
fn legendre_infinite_sweep_converges() {
    let sweep = delta_sweep(Family::Legendre, EdgeCount::Infinite, 2, 100).unwrap();
    assert!((sweep.delta - 2.1313).abs() < 5e-4);
    assert!(sweep.decreasing_fraction_from(10) > 0.95);
    let last = sweep.increments.last().unwrap().1;
    let early = sweep.increments.iter().find(|(n, _)| *n == 10).unwrap().1;
    assert!(last < early - 1.0);
}

#[test]
fn smaller_epsilon_reduces_mismatch() {
    let cutoff = 0.05;
    let mut errs = Vec::new();
    for eps in [1e-2, 5e-3] {
        let mut config = NetworkConfig::symmetric(Family::Hermite, 8, eps, vec![(1.0, 0.0), (0.0, 0.0), (2.0, 0.0)]);
        config.dx = 2e-3;
        config.edge_lengths = vec![0.3; 3];
        let kin = kinetic_simulate(&config, &[]).unwrap();
        let mac = macro_simulate(&config, spectral_delta(&config).unwrap(), &[]).unwrap();
        let kin_rho: Vec<Vec<f64>> = (0..3).map(|e| kin.field.density(e)).collect();
        let report = compare_runs(&kin_rho, &mac.field.rho, config.dx, cutoff).unwrap();
        errs.push(report.iter().map(|e| e.l1).sum::<f64>());
    }
    assert!(errs[1] < errs[0], "{errs:?}");
}

#[test]
fn macro_mass_is_conserved() {
    let config = NetworkConfig::symmetric(Family::Legendre, 4, 1e-2, vec![(1.0, 0.0), (0.0, 0.0), (2.0, 0.0), (0.5, 0.0)]);
    let run = macro_simulate(&config, 0.73, &[0.05]).unwrap();
    assert!((run.final_mass - run.initial_mass - run.boundary_inflow).abs() <= 1e-10 * run.initial_mass);
    assert_eq!(run.snapshots.len(), 1);
}
