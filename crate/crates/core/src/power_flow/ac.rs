use num_complex::Complex64;

use crate::case_io::{BusRole, Network};
use crate::linalg::{Lu, Matrix};

use super::{base_ratings, branch_loading, find_islands, PowerFlowError, PowerFlowSolution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcOptions {
    /// Largest allowed |mismatch| in pu.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for AcOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 20,
        }
    }
}

/// Branch two-port admittances (yff, yft, ytf, ytt) of the π model with tap.
fn branch_admittance(r: f64, x: f64, b: f64, tap: f64) -> [Complex64; 4] {
    let ys = Complex64::new(r, x).inv();
    let ych = Complex64::new(0.0, b / 2.0);
    let t = tap;
    [(ys + ych) / (t * t), -ys / t, -ys / t, ys + ych]
}

struct Ybus {
    g: Matrix<f64>,
    b: Matrix<f64>,
}

fn build_ybus(net: &Network) -> Ybus {
    let n = net.n_buses();
    let idx = net.bus_index();
    let mut g = Matrix::zeros(n, n);
    let mut b = Matrix::zeros(n, n);
    let mut add = |i: usize, j: usize, y: Complex64| {
        g[(i, j)] += y.re;
        b[(i, j)] += y.im;
    };
    for br in net.branches.iter().filter(|b| b.in_service) {
        let f = idx[&br.from_bus];
        let t = idx[&br.to_bus];
        let [yff, yft, ytf, ytt] = branch_admittance(br.r, br.x, br.b, br.tap_ratio);
        add(f, f, yff);
        add(f, t, yft);
        add(t, f, ytf);
        add(t, t, ytt);
    }
    for (i, bus) in net.buses.iter().enumerate() {
        add(i, i, Complex64::new(bus.gs, bus.bs));
    }
    Ybus { g, b }
}

fn injections(y: &Ybus, v: &[f64], th: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = v.len();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for i in 0..n {
        let (gi, bi) = (y.g.row(i), y.b.row(i));
        let (mut pi, mut qi) = (0.0, 0.0);
        for k in 0..n {
            if gi[k] == 0.0 && bi[k] == 0.0 {
                continue;
            }
            let (s, c) = (th[i] - th[k]).sin_cos();
            pi += v[k] * (gi[k] * c + bi[k] * s);
            qi += v[k] * (gi[k] * s - bi[k] * c);
        }
        p[i] = v[i] * pi;
        q[i] = v[i] * qi;
    }
    (p, q)
}

/// Newton-Raphson AC power flow in polar coordinates.
///
/// Pv buses without an in-service generator are solved as pq. Reactive
/// limits are not enforced. Non-convergence is reported through
/// `converged = false`, not as an error.
pub fn ac_power_flow(
    net: &Network,
    start: Option<&PowerFlowSolution>,
    opts: &AcOptions,
) -> Result<PowerFlowSolution, PowerFlowError> {
    let n = net.n_buses();
    let slack = net.slack_index().ok_or(PowerFlowError::NoSlack)?;
    let islands = find_islands(net);
    if islands.components.len() > 1 {
        return Err(PowerFlowError::Islanded {
            components: islands.components.len(),
        });
    }
    if let Some(s) = start {
        if s.v.len() != n || s.theta.len() != n {
            return Err(PowerFlowError::StartMismatch {
                expected: n,
                got: s.v.len(),
            });
        }
    }
    let idx = net.bus_index();
    let mut has_gen = vec![false; n];
    let mut p_spec = vec![0.0; n];
    let mut q_spec = vec![0.0; n];
    for g in net.generators.iter().filter(|g| g.in_service) {
        has_gen[idx[&g.bus]] = true;
        p_spec[idx[&g.bus]] += g.p_dispatch;
    }
    for l in &net.loads {
        p_spec[idx[&l.bus]] += l.p_served();
        q_spec[idx[&l.bus]] += l.q_served();
    }
    let holds_v: Vec<bool> = net
        .buses
        .iter()
        .enumerate()
        .map(|(i, b)| i == slack || (b.role == BusRole::Pv && has_gen[i]))
        .collect();
    let ang: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
    let mag: Vec<usize> = (0..n).filter(|&i| !holds_v[i]).collect();
    let mut col_ang = vec![usize::MAX; n];
    let mut col_mag = vec![usize::MAX; n];
    for (k, &i) in ang.iter().enumerate() {
        col_ang[i] = k;
    }
    for (k, &i) in mag.iter().enumerate() {
        col_mag[i] = ang.len() + k;
    }
    let dim = ang.len() + mag.len();

    let mut v: Vec<f64> = net
        .buses
        .iter()
        .enumerate()
        .map(|(i, b)| if holds_v[i] { b.v_setpoint } else { 1.0 })
        .collect();
    let mut th = vec![0.0; n];
    if let Some(s) = start {
        for i in 0..n {
            if !holds_v[i] && s.v[i] > 0.0 {
                v[i] = s.v[i];
            }
            if i != slack {
                th[i] = s.theta[i];
            }
        }
    }

    let y = build_ybus(net);
    let mut iterations = 0;
    let mut converged = false;
    loop {
        let (p, q) = injections(&y, &v, &th);
        let mut mis = vec![0.0; dim];
        for &i in &ang {
            mis[col_ang[i]] = p_spec[i] - p[i];
        }
        for &i in &mag {
            mis[col_mag[i]] = q_spec[i] - q[i];
        }
        let worst = mis.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if !worst.is_finite() {
            break;
        }
        if worst < opts.tolerance {
            converged = true;
            break;
        }
        if iterations >= opts.max_iterations {
            break;
        }
        let mut jac = Matrix::zeros(dim, dim);
        for i in 0..n {
            let (ra, rm) = (col_ang[i], col_mag[i]);
            if ra == usize::MAX && rm == usize::MAX {
                continue;
            }
            let (gi, bi) = (y.g.row(i), y.b.row(i));
            for k in 0..n {
                if k != i && gi[k] == 0.0 && bi[k] == 0.0 {
                    continue;
                }
                let (ca, cm) = (col_ang[k], col_mag[k]);
                let (dpdt, dpdv, dqdt, dqdv) = if k == i {
                    (
                        -q[i] - bi[i] * v[i] * v[i],
                        p[i] / v[i] + gi[i] * v[i],
                        p[i] - gi[i] * v[i] * v[i],
                        q[i] / v[i] - bi[i] * v[i],
                    )
                } else {
                    let (s, c) = (th[i] - th[k]).sin_cos();
                    let a = gi[k] * s - bi[k] * c;
                    let bb = gi[k] * c + bi[k] * s;
                    (v[i] * v[k] * a, v[i] * bb, -v[i] * v[k] * bb, v[i] * a)
                };
                if ra != usize::MAX {
                    if ca != usize::MAX {
                        jac[(ra, ca)] = dpdt;
                    }
                    if cm != usize::MAX {
                        jac[(ra, cm)] = dpdv;
                    }
                }
                if rm != usize::MAX {
                    if ca != usize::MAX {
                        jac[(rm, ca)] = dqdt;
                    }
                    if cm != usize::MAX {
                        jac[(rm, cm)] = dqdv;
                    }
                }
            }
        }
        let Ok(lu) = Lu::factor(jac) else { break };
        let dx = lu.solve(&mis);
        for &i in &ang {
            th[i] += dx[col_ang[i]];
        }
        for &i in &mag {
            v[i] += dx[col_mag[i]];
        }
        iterations += 1;
    }

    let (p, q) = injections(&y, &v, &th);
    let m = net.n_branches();
    let mut flow_p = vec![0.0; m];
    let mut flow_s = vec![0.0; m];
    for (l, br) in net.branches.iter().enumerate() {
        if !br.in_service {
            continue;
        }
        let (f, t) = (idx[&br.from_bus], idx[&br.to_bus]);
        let vf = Complex64::from_polar(v[f], th[f]);
        let vt = Complex64::from_polar(v[t], th[t]);
        let [yff, yft, ytf, ytt] = branch_admittance(br.r, br.x, br.b, br.tap_ratio);
        let sf = vf * (yff * vf + yft * vt).conj();
        let st = vt * (ytf * vf + ytt * vt).conj();
        flow_p[l] = sf.re;
        flow_s[l] = sf.norm().max(st.norm());
    }
    let mut sol = PowerFlowSolution {
        converged,
        iterations,
        v,
        theta: th,
        p_inj: p,
        q_inj: q,
        branch_flow_p: flow_p,
        branch_flow_mva: flow_s,
        loading: Vec::new(),
    };
    sol.loading = branch_loading(&sol, &base_ratings(net));
    Ok(sol)
}

/// Total active losses (series and shunt) of a solved network.
pub fn total_losses(net: &Network, sol: &PowerFlowSolution) -> f64 {
    let idx = net.bus_index();
    let mut loss = 0.0;
    for br in net.branches.iter().filter(|b| b.in_service) {
        let (f, t) = (idx[&br.from_bus], idx[&br.to_bus]);
        let vf = Complex64::from_polar(sol.v[f], sol.theta[f]);
        let vt = Complex64::from_polar(sol.v[t], sol.theta[t]);
        let [yff, yft, ytf, ytt] = branch_admittance(br.r, br.x, br.b, br.tap_ratio);
        let sf = vf * (yff * vf + yft * vt).conj();
        let st = vt * (ytf * vf + ytt * vt).conj();
        loss += sf.re + st.re;
    }
    for (i, b) in net.buses.iter().enumerate() {
        loss += b.gs * sol.v[i] * sol.v[i];
    }
    loss
}
