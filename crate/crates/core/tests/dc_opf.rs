use gridcascade::cascade_env::ACTION_VALUES;
use gridcascade::case_io::Network;
use gridcascade::dc_opf::{
    build_opf, check_dispatch, compute_ptdf, solve_lp, solve_opf, DispatchStatus, LpStatus,
};
use gridcascade::fixtures::load_case;
use gridcascade::harness::synth_limits;
use gridcascade::power_flow::{dc_flows_for_injections, find_islands, FlowModel};
use gridcascade::LinearProgram;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn case(name: &str) -> Network {
    load_case(name).unwrap()
}

/// Exhaustive search over the generator output of a one-line, one-load case.
fn two_bus_grid_oracle(net: &Network, limit: f64) -> f64 {
    let g = &net.generators[0];
    let l = &net.loads[0];
    let mut best = f64::INFINITY;
    let steps = ((g.p_max - g.p_min) / 1e-3).round() as usize;
    for k in 0..=steps {
        let pg = g.p_min + k as f64 * 1e-3;
        let pl = -pg;
        if pl < l.p_demand - 1e-12 || pl > 0.0 || pg.abs() > limit + 1e-12 {
            continue;
        }
        best = best.min(g.cost_coeff * pg + l.shed_cost * (pl - l.p_demand));
    }
    best
}

#[test]
fn two_bus_hand_cases() {
    let net = case("case2bus");
    for (limit, expect, shed) in [(1.0, 10.0, 0.0), (0.8, 28.0, 0.2)] {
        let d = solve_opf(&net, &[limit]).unwrap();
        assert_eq!(d.status, DispatchStatus::Optimal);
        let oracle = two_bus_grid_oracle(&net, limit);
        assert!(
            (d.objective - expect).abs() < 1e-9,
            "limit {limit}: {}",
            d.objective
        );
        assert!((oracle - expect).abs() < 1e-9, "oracle {oracle}");
        assert!((d.shed_total - shed).abs() < 1e-9);
        assert!((d.gen_dispatch[0] - limit).abs() < 1e-9);
    }
    let model = build_opf(&net, &[0.8]).unwrap();
    assert_eq!(model.lp.n_vars(), 2);
    assert_eq!(model.lp.eq_rows.len(), 1);
    assert_eq!(model.lp.ineq_rows.len(), 2);
}

#[test]
fn must_run_surplus_is_infeasible() {
    let mut net = case("case2bus");
    net.generators[0].p_min = 1.5;
    let d = solve_opf(&net, &[5.0]).unwrap();
    assert_eq!(d.status, DispatchStatus::Infeasible);
    assert!(d.objective.is_nan());
}

#[test]
fn ptdf_examples() {
    let net = case("case2bus");
    let a = compute_ptdf(&net, 1).unwrap();
    assert_eq!(a.entries[(0, 0)], 0.0);
    assert!((a.entries[(0, 1)] + 1.0).abs() < 1e-15);

    let tri = case("case3bus");
    let a = compute_ptdf(&tri, 3).unwrap();
    // branch 0 joins buses 1 and 2
    assert!((a.entries[(0, 0)] - 1.0 / 3.0).abs() < 1e-12);
    assert!((a.entries[(1, 0)] - 2.0 / 3.0).abs() < 1e-12);
    for l in 0..3 {
        assert_eq!(a.entries[(l, 2)], 0.0);
    }
}

fn random_balanced(rng: &mut ChaCha8Rng, net: &Network) -> Vec<f64> {
    let slack = net.slack_index().unwrap();
    let mut p: Vec<f64> = (0..net.n_buses())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    p[slack] = 0.0;
    p[slack] = -p.iter().sum::<f64>();
    p
}

#[test]
fn ptdf_reproduces_dc_flows() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for name in ["case2bus", "case3bus", "ieee14", "ieee30", "ieee118"] {
        let net = case(name);
        let a = compute_ptdf(&net, net.slack_id().unwrap()).unwrap();
        let slack = net.slack_index().unwrap();
        for j in 0..a.entries.rows() {
            assert_eq!(a.entries[(j, slack)], 0.0);
        }
        for _ in 0..100 {
            let p = random_balanced(&mut rng, &net);
            let via_ptdf = a.flows(&p);
            let via_pf = dc_flows_for_injections(&net, &p).unwrap();
            for (x, y) in via_ptdf.iter().zip(&via_pf) {
                assert!((x - y).abs() < 1e-8, "{name}: {x} vs {y}");
            }
        }
    }
}

fn ieee14_stressed() -> Network {
    synth_limits(&case("ieee14"), 1.3, FlowModel::Dc).unwrap()
}

/// Independent audit of an optimal dispatch against all three constraint families.
fn certificate(net: &Network, limits: &[f64], gens: &[f64], loads: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    let idx = net.bus_index();
    let mut p = vec![0.0; net.n_buses()];
    for (g, &x) in net.generators.iter().zip(gens) {
        worst = worst.max(g.p_min - x).max(x - g.p_max);
        p[idx[&g.bus]] += x;
    }
    for (l, &x) in net.loads.iter().zip(loads) {
        worst = worst.max(l.p_demand - x).max(x);
        p[idx[&l.bus]] += x;
    }
    worst = worst.max(p.iter().sum::<f64>().abs());
    let a = compute_ptdf(net, net.slack_id().unwrap()).unwrap();
    for (f, &lim) in a.flows(&p).iter().zip(limits) {
        if lim > 0.0 {
            worst = worst.max(f.abs() - lim);
        }
    }
    worst
}

#[test]
fn objective_is_monotone_in_the_action() {
    let net = ieee14_stressed();
    let mut previous: Option<f64> = None;
    for a in ACTION_VALUES {
        let limits: Vec<f64> = net.branches.iter().map(|b| a * b.rating).collect();
        let d = solve_opf(&net, &limits).unwrap();
        assert_eq!(d.status, DispatchStatus::Optimal, "scale {a}");
        assert!(certificate(&net, &limits, &d.gen_dispatch, &d.load_dispatch) < 1e-9);
        assert!(check_dispatch(&net, &limits, &d, 1e-9).is_empty());
        if let Some(prev) = previous {
            assert!(d.objective <= prev, "scale {a}: {} > {prev}", d.objective);
        }
        previous = Some(d.objective);
    }
}

#[test]
fn cost_scaling_keeps_the_dispatch() {
    for name in ["case2bus", "case3bus", "ieee14"] {
        let net = if name == "ieee14" {
            ieee14_stressed()
        } else {
            case(name)
        };
        let limits: Vec<f64> = net.branches.iter().map(|b| 0.9 * b.rating).collect();
        let base = solve_opf(&net, &limits).unwrap();
        for k in [0.25, 0.5, 2.0, 8.0, 3.0, 0.7] {
            let mut scaled = net.clone();
            scaled.generators.iter_mut().for_each(|g| g.cost_coeff *= k);
            scaled.loads.iter_mut().for_each(|l| l.shed_cost *= k);
            let d = solve_opf(&scaled, &limits).unwrap();
            assert_eq!(d.status, base.status);
            for (x, y) in d.gen_dispatch.iter().zip(&base.gen_dispatch) {
                assert!((x - y).abs() < 1e-9, "{name} ×{k}");
            }
            for (x, y) in d.load_dispatch.iter().zip(&base.load_dispatch) {
                assert!((x - y).abs() < 1e-9, "{name} ×{k}");
            }
            assert!(
                (d.objective - k * base.objective).abs() < 1e-9 * base.objective.abs().max(1.0)
            );
        }
    }
}

/// Solve a small square system by Gaussian elimination with partial pivoting.
fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-10 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Minimum over all feasible vertices, found by trying every choice of
/// `n` active constraints. `None` when no vertex is feasible.
fn vertex_oracle(lp: &LinearProgram) -> Option<f64> {
    let n = lp.n_vars();
    // every constraint as a row and rhs of an equation when active
    let mut cands: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        cands.push((e.clone(), lp.lower[i]));
        cands.push((e, lp.upper[i]));
    }
    for (r, &b) in lp.ineq_rows.iter().zip(&lp.ineq_rhs) {
        cands.push((r.clone(), b));
    }
    let fixed: Vec<(Vec<f64>, f64)> = lp
        .eq_rows
        .iter()
        .cloned()
        .zip(lp.eq_rhs.iter().copied())
        .collect();
    let free = n - fixed.len();
    let mut best: Option<f64> = None;
    let m = cands.len();
    let mut pick = vec![0usize; free];
    fn next(pick: &mut [usize], m: usize) -> bool {
        let k = pick.len();
        for i in (0..k).rev() {
            if pick[i] < m - k + i {
                pick[i] += 1;
                for j in i + 1..k {
                    pick[j] = pick[j - 1] + 1;
                }
                return true;
            }
        }
        false
    }
    for (i, p) in pick.iter_mut().enumerate() {
        *p = i;
    }
    loop {
        let rows: Vec<(Vec<f64>, f64)> = fixed
            .iter()
            .cloned()
            .chain(pick.iter().map(|&i| cands[i].clone()))
            .collect();
        let (a, b): (Vec<Vec<f64>>, Vec<f64>) = rows.into_iter().unzip();
        if let Some(x) = solve_small(a, b) {
            if lp.max_violation(&x) < 1e-9 {
                let obj = lp.objective_at(&x);
                best = Some(best.map_or(obj, |v: f64| v.min(obj)));
            }
        }
        if free == 0 || !next(&mut pick, m) {
            break;
        }
    }
    best
}

fn grid_oracle(lp: &LinearProgram, step: f64) -> Option<f64> {
    let n = lp.n_vars();
    let counts: Vec<usize> = (0..n)
        .map(|i| ((lp.upper[i] - lp.lower[i]) / step).floor() as usize + 1)
        .collect();
    let mut best: Option<f64> = None;
    let mut k = vec![0usize; n];
    loop {
        let x: Vec<f64> = (0..n).map(|i| lp.lower[i] + k[i] as f64 * step).collect();
        if lp.max_violation(&x) <= 0.0 {
            let obj = lp.objective_at(&x);
            best = Some(best.map_or(obj, |v: f64| v.min(obj)));
        }
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            k[i] += 1;
            if k[i] < counts[i] {
                break;
            }
            k[i] = 0;
            i += 1;
        }
    }
}

fn small_lp(
    max_vars: usize,
    max_width: f64,
    with_eq: bool,
) -> impl Strategy<Value = LinearProgram> {
    (1..=max_vars).prop_flat_map(move |n| {
        let coef = || prop::collection::vec(-2.0f64..2.0, n);
        (
            prop::collection::vec((-2.0f64..0.0, 0.2f64..max_width), n),
            prop::collection::vec(-3.0f64..3.0, n),
            prop::collection::vec((coef(), -1.0f64..2.0), 0..=2),
            prop::collection::vec((coef(), -1.0f64..1.0), 0..=usize::from(with_eq && n > 1)),
        )
            .prop_map(|(bounds, c, le, eq)| {
                let lower = bounds.iter().map(|b| b.0).collect();
                let upper = bounds.iter().map(|b| b.0 + b.1).collect();
                let mut lp = LinearProgram::new(lower, upper, c);
                for (r, b) in le {
                    lp.add_le(r, b);
                }
                for (r, b) in eq {
                    lp.add_eq(r, b);
                }
                lp
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn simplex_matches_vertex_enumeration(lp in small_lp(3, 3.0, true)) {
        let sol = solve_lp(&lp);
        match vertex_oracle(&lp) {
            None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
            Some(best) => {
                prop_assert_eq!(sol.status, LpStatus::Optimal);
                prop_assert!((sol.objective - best).abs() < 1e-7, "{} vs {}", sol.objective, best);
                prop_assert!(lp.max_violation(&sol.x) < 1e-9);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simplex_matches_grid_search(lp in small_lp(2, 1.0, false)) {
        let sol = solve_lp(&lp);
        if let Some(best) = grid_oracle(&lp, 1e-3) {
            prop_assert_eq!(sol.status, LpStatus::Optimal);
            prop_assert!(sol.objective <= best + 1e-9);
            prop_assert!(best - sol.objective < 1e-2, "{} vs grid {}", sol.objective, best);
        }
    }

    #[test]
    fn wider_limits_never_cost_more(
        beta in 1.1f64..2.0,
        outage in 0usize..20,
        i in 0usize..10,
        j in 0usize..10,
    ) {
        let mut net = synth_limits(&case("ieee14"), beta, FlowModel::Dc).unwrap();
        net.branches[outage].in_service = false;
        prop_assume!(find_islands(&net).components.len() == 1);
        let (lo, hi) = (ACTION_VALUES[i.min(j)], ACTION_VALUES[i.max(j)]);
        let solve = |a: f64| {
            let limits: Vec<f64> = net.branches.iter().map(|b| a * b.rating).collect();
            let d = solve_opf(&net, &limits).unwrap();
            if d.status.is_optimal() {
                prop_assert!(certificate(&net, &limits, &d.gen_dispatch, &d.load_dispatch) < 1e-9);
            }
            Ok(d)
        };
        let d_lo = solve(lo)?;
        let d_hi = solve(hi)?;
        if d_lo.status.is_optimal() {
            prop_assert!(d_hi.status.is_optimal());
            prop_assert!(d_hi.objective <= d_lo.objective + 1e-9);
        }
    }
}
