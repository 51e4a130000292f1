mod common;

use gridcascade::case_io::{parse_case, Network};
use gridcascade::fixtures::load_case;
use gridcascade::power_flow::{
    ac_power_flow, build_b_matrix, dc_power_flow, find_islands, total_losses, AcOptions,
};
use proptest::prelude::*;

fn case(name: &str) -> Network {
    load_case(name).unwrap()
}

/// Reference AC solution of the IEEE 14-bus case (|V| pu, angle rad),
/// computed independently with a polar Newton solver at 1e-12 tolerance.
const IEEE14_REFERENCE: [(f64, f64); 14] = [
    (1.06, 0.0),
    (1.045, -0.08696258580158339),
    (1.01, -0.2220948915681027),
    (1.017670853691765, -0.17999407949370594),
    (1.0195138598190607, -0.1531326386141936),
    (1.07, -0.2482023385414455),
    (1.061519532490939, -0.23316948436482846),
    (1.09, -0.23316948436482848),
    (1.055931720636972, -0.2607263819810346),
    (1.050984624999848, -0.2634973918039439),
    (1.0569065185403654, -0.2581450528645736),
    (1.0551885631971034, -0.26311858654409465),
    (1.0503817136285951, -0.26452692440917663),
    (1.0355299458535663, -0.27983988812901267),
];

#[test]
fn ieee14_matches_reference_solution() {
    let net = case("ieee14");
    let sol = ac_power_flow(&net, None, &AcOptions::default()).unwrap();
    assert!(sol.converged);
    assert!(sol.iterations <= 10, "took {} iterations", sol.iterations);
    for (i, &(v, th)) in IEEE14_REFERENCE.iter().enumerate() {
        assert!(
            (sol.v[i] - v).abs() < 1e-8,
            "bus {} V {} vs {v}",
            i + 1,
            sol.v[i]
        );
        assert!((sol.theta[i] - th).abs() < 1e-8, "bus {} angle", i + 1);
    }
    // slack output of the reference solve, 232.393 MW
    assert!((sol.p_inj[0] - 2.323932723578983).abs() < 1e-7);
}

#[test]
fn three_bus_triangle_b_matrix() {
    let net = case("case3bus");
    let rb = build_b_matrix(&net).unwrap();
    assert_eq!(rb.buses, vec![0, 1]);
    let expect = [[20.0, -10.0], [-10.0, 20.0]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((rb.matrix[(i, j)] - expect[i][j]).abs() < 1e-12);
        }
    }
    assert!(rb.matrix.is_symmetric(0.0));
}

#[test]
fn three_bus_superposition_flows() {
    // +1 at bus 1 (A), -1 at bus 2 (B), slack bus 3 (C) balanced at zero
    let mut net = case("case3bus");
    net.generators[0].p_dispatch = 1.0;
    net.generators[1].p_dispatch = 0.0;
    let sol = dc_power_flow(&net).unwrap();
    // branches: 1-2, 1-3, 3-2
    assert!((sol.branch_flow_p[0] - 2.0 / 3.0).abs() < 1e-12);
    assert!((sol.branch_flow_p[1] - 1.0 / 3.0).abs() < 1e-12);
    assert!((sol.branch_flow_p[2] - 1.0 / 3.0).abs() < 1e-12);
    assert!(sol.p_inj[2].abs() < 1e-12);
}

#[test]
fn zero_injection_gives_zero_angles() {
    let mut net = case("ieee14");
    net.generators.iter_mut().for_each(|g| g.p_dispatch = 0.0);
    net.loads.iter_mut().for_each(|l| l.served_fraction = 0.0);
    let sol = dc_power_flow(&net).unwrap();
    assert!(sol.theta.iter().all(|&t| t == 0.0));
    assert!(sol.branch_flow_p.iter().all(|&f| f == 0.0));
}

#[test]
fn ac_balance_and_warm_start() {
    for name in ["ieee14", "ieee30", "ieee118"] {
        let net = case(name);
        let cold = ac_power_flow(&net, None, &AcOptions::default()).unwrap();
        assert!(cold.converged, "{name}");
        let gen: f64 = cold.p_inj.iter().sum::<f64>();
        // Σ injections = losses (generation minus load)
        assert!((gen - total_losses(&net, &cold)).abs() < 1e-6, "{name}");
        let warm = ac_power_flow(&net, Some(&cold), &AcOptions::default()).unwrap();
        assert!(warm.converged);
        assert!(warm.iterations <= 1);
        for i in 0..net.n_buses() {
            assert!((warm.v[i] - cold.v[i]).abs() < 1e-7);
            assert!((warm.theta[i] - cold.theta[i]).abs() < 1e-7);
        }
        let again = ac_power_flow(&net, None, &AcOptions::default()).unwrap();
        assert_eq!(again, cold, "{name}: not deterministic");
    }
}

#[test]
fn island_reports() {
    let net = case("ieee14");
    let r = find_islands(&net);
    assert_eq!(r.components.len(), 1);
    assert_eq!(r.energized, vec![true]);

    let mut tri = case("case3bus");
    tri.branches[0].in_service = false;
    assert_eq!(find_islands(&tri).components.len(), 1);
}

#[test]
fn two_bus_ac_matches_gauss_seidel() {
    let net = parse_case(
        "mpc.baseMVA = 100;
mpc.bus = [1 3 0 0 0 0 1 1 0 0 1 1.1 0.9; 2 1 50 20 0 0 1 1 0 0 1 1.1 0.9];
mpc.gen = [1 0 0 100 -100 1 100 1 200 0];
mpc.branch = [1 2 0.01 0.1 0 0 0 0 0 0 1 -360 360];
mpc.gencost = [2 0 0 2 10 0];",
    )
    .unwrap();
    let sol = ac_power_flow(&net, None, &AcOptions::default()).unwrap();
    assert!(sol.converged);
    let gs = common::gauss_seidel(&net, 1e-14, 10_000).unwrap();
    for i in 0..2 {
        assert!((sol.v[i] - gs[i].norm()).abs() < 1e-8);
        assert!((sol.theta[i] - gs[i].arg()).abs() < 1e-8);
    }
}

#[test]
fn ieee14_matches_gauss_seidel() {
    let net = case("ieee14");
    let sol = ac_power_flow(&net, None, &AcOptions::default()).unwrap();
    let gs = common::gauss_seidel(&net, 1e-13, 200_000).unwrap();
    for i in 0..net.n_buses() {
        assert!((sol.v[i] - gs[i].norm()).abs() < 1e-7, "bus {}", i + 1);
        assert!((sol.theta[i] - gs[i].arg()).abs() < 1e-7, "bus {}", i + 1);
    }
}

#[test]
fn dc_kcl_on_fixtures() {
    for name in ["case2bus", "case3bus", "ieee14", "ieee30", "ieee118"] {
        let net = case(name);
        let sol = dc_power_flow(&net).unwrap();
        let r = common::dc_kcl_residual(&net, &sol);
        assert!(r < 1e-9, "{name}: residual {r:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dc_kcl_holds_for_any_dispatch_and_surviving_outage(
        name in prop::sample::select(vec!["ieee14", "ieee30", "ieee118"]),
        scale in prop::collection::vec(0.0f64..1.0, 54),
        served in 0.0f64..=1.0,
        outage in 0usize..186,
    ) {
        let mut net = case(name);
        for (g, s) in net.generators.iter_mut().zip(&scale) {
            g.p_dispatch = g.p_max * s;
        }
        for l in net.loads.iter_mut() {
            l.served_fraction = served;
        }
        let k = outage % net.n_branches();
        net.branches[k].in_service = false;
        prop_assume!(find_islands(&net).components.len() == 1);
        let sol = dc_power_flow(&net).unwrap();
        prop_assert!(common::dc_kcl_residual(&net, &sol) < 1e-9);
        prop_assert_eq!(sol.branch_flow_p[k], 0.0);
        let again = dc_power_flow(&net).unwrap();
        prop_assert_eq!(again, sol);
    }
}
