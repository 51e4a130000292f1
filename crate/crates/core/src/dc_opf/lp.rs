//! Dense bounded-variable two-phase primal simplex.
//!
//! Every variable carries finite-or-infinite bounds that are handled
//! implicitly (nonbasic variables sit at a bound), so only the general
//! constraints become tableau rows.

use std::fmt;

use crate::scalar::Scalar;

/// `min c·x + offset  s.t.  E x = e,  G x ≤ g,  l ≤ x ≤ u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram<T> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub objective: Vec<T>,
    pub objective_offset: T,
    pub eq_rows: Vec<Vec<T>>,
    pub eq_rhs: Vec<T>,
    pub ineq_rows: Vec<Vec<T>>,
    pub ineq_rhs: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    pub x: Vec<T>,
    pub objective: T,
    pub iterations: usize,
    /// Whether Bland's rule had to be switched on.
    pub used_bland: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    /// Degenerate pivots tolerated before switching to Bland's rule.
    pub bland_after: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50_000,
            bland_after: 1000,
        }
    }
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>, objective: Vec<T>) -> Self {
        assert_eq!(lower.len(), upper.len());
        assert_eq!(lower.len(), objective.len());
        Self {
            lower,
            upper,
            objective,
            objective_offset: T::zero(),
            eq_rows: Vec::new(),
            eq_rhs: Vec::new(),
            ineq_rows: Vec::new(),
            ineq_rhs: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_eq(&mut self, row: Vec<T>, rhs: T) {
        assert_eq!(row.len(), self.n_vars());
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
    }

    pub fn add_le(&mut self, row: Vec<T>, rhs: T) {
        assert_eq!(row.len(), self.n_vars());
        self.ineq_rows.push(row);
        self.ineq_rhs.push(rhs);
    }

    pub fn objective_at(&self, x: &[T]) -> T {
        dot(&self.objective, x) + self.objective_offset
    }

    /// Largest violation of any bound or constraint at `x`.
    pub fn max_violation(&self, x: &[T]) -> T {
        let mut worst = T::zero();
        for ((&v, &l), &u) in x.iter().zip(&self.lower).zip(&self.upper) {
            worst = worst.max(l - v).max(v - u);
        }
        for (row, &b) in self.eq_rows.iter().zip(&self.eq_rhs) {
            worst = worst.max((dot(row, x) - b).abs());
        }
        for (row, &b) in self.ineq_rows.iter().zip(&self.ineq_rhs) {
            worst = worst.max(dot(row, x) - b);
        }
        worst
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

impl<T: Scalar> fmt::Display for LinearProgram<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let term = |f: &mut fmt::Formatter<'_>, row: &[T]| -> fmt::Result {
            let mut first = true;
            for (j, &a) in row.iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                if first {
                    write!(f, "{a} x{j}")?;
                } else if a < T::zero() {
                    write!(f, " - {} x{j}", -a)?;
                } else {
                    write!(f, " + {a} x{j}")?;
                }
                first = false;
            }
            if first {
                write!(f, "0")?;
            }
            Ok(())
        };
        write!(f, "minimize ")?;
        term(f, &self.objective)?;
        writeln!(f, " + {}", self.objective_offset)?;
        writeln!(f, "subject to")?;
        for (i, (row, b)) in self.eq_rows.iter().zip(&self.eq_rhs).enumerate() {
            write!(f, "  e{i}: ")?;
            term(f, row)?;
            writeln!(f, " = {b}")?;
        }
        for (i, (row, b)) in self.ineq_rows.iter().zip(&self.ineq_rhs).enumerate() {
            write!(f, "  g{i}: ")?;
            term(f, row)?;
            writeln!(f, " <= {b}")?;
        }
        writeln!(f, "bounds")?;
        for (j, (l, u)) in self.lower.iter().zip(&self.upper).enumerate() {
            writeln!(f, "  {l} <= x{j} <= {u}")?;
        }
        Ok(())
    }
}

struct Tableau<T> {
    /// m × ncols, holds B⁻¹A.
    t: Vec<T>,
    ncols: usize,
    /// Shifted upper bounds (lower bounds are all zero after shifting).
    upper: Vec<T>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    at_upper: Vec<bool>,
    beta: Vec<T>,
    /// Columns of the starting basis, which hold B⁻¹ throughout.
    init_cols: Vec<usize>,
    rhs: Vec<T>,
    iterations: usize,
    degenerate: usize,
    bland: bool,
}

enum Phase {
    Done,
    Unbounded,
    IterationLimit,
}

impl<T: Scalar> Tableau<T> {
    fn m(&self) -> usize {
        self.basis.len()
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> T {
        self.t[i * self.ncols + j]
    }

    fn refresh_beta(&mut self) {
        let m = self.m();
        for i in 0..m {
            let mut v = T::zero();
            for (r, &c) in self.init_cols.iter().enumerate() {
                v += self.at(i, c) * self.rhs[r];
            }
            for j in 0..self.ncols {
                if !self.is_basic[j] && self.at_upper[j] {
                    v -= self.at(i, j) * self.upper[j];
                }
            }
            self.beta[i] = v;
        }
    }

    fn reduced_costs(&self, cost: &[T]) -> Vec<T> {
        let mut d = cost.to_vec();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb == T::zero() {
                continue;
            }
            let row = &self.t[i * self.ncols..(i + 1) * self.ncols];
            for (dj, &a) in d.iter_mut().zip(row) {
                *dj -= cb * a;
            }
        }
        d
    }

    fn pivot(&mut self, r: usize, q: usize, d: &mut [T]) {
        let n = self.ncols;
        let p = self.at(r, q);
        for j in 0..n {
            self.t[r * n + j] /= p;
        }
        self.t[r * n + q] = T::one();
        for i in 0..self.m() {
            if i == r {
                continue;
            }
            let f = self.t[i * n + q];
            if f == T::zero() {
                continue;
            }
            for j in 0..n {
                let v = self.t[r * n + j];
                if v != T::zero() {
                    self.t[i * n + j] -= f * v;
                }
            }
            self.t[i * n + q] = T::zero();
        }
        let f = d[q];
        if f != T::zero() {
            for j in 0..n {
                d[j] -= f * self.t[r * n + j];
            }
            d[q] = T::zero();
        }
    }

    fn run(&mut self, cost: &[T], opts: &SimplexOptions) -> Phase {
        let mut d = self.reduced_costs(cost);
        let scale = cost.iter().fold(T::one(), |m, c| m.max(c.abs()));
        let dtol = T::feas_tol() * scale;
        let ptol = T::pivot_tol();
        let ftol = T::feas_tol();
        loop {
            if self.iterations >= opts.max_iterations {
                return Phase::IterationLimit;
            }
            // entering column
            let mut enter = None;
            let mut best = T::zero();
            for j in 0..self.ncols {
                if self.is_basic[j] || self.upper[j] <= ftol {
                    continue;
                }
                let eligible = if self.at_upper[j] {
                    d[j] > dtol
                } else {
                    d[j] < -dtol
                };
                if !eligible {
                    continue;
                }
                if self.bland {
                    enter = Some(j);
                    break;
                }
                if d[j].abs() > best {
                    best = d[j].abs();
                    enter = Some(j);
                }
            }
            let Some(q) = enter else {
                return Phase::Done;
            };
            let dir = if self.at_upper[q] {
                -T::one()
            } else {
                T::one()
            };

            // ratio test: smallest step, ties broken by pivot size or Bland
            let mut limits: Vec<(usize, T, bool, T)> = Vec::new(); // (row, limit, to upper, |alpha|)
            let mut step = T::infinity();
            for i in 0..self.m() {
                let alpha = dir * self.at(i, q);
                let (lim, to_upper) = if alpha > ptol {
                    ((self.beta[i] / alpha).max(T::zero()), false)
                } else if alpha < -ptol && self.upper[self.basis[i]].is_finite() {
                    (
                        ((self.upper[self.basis[i]] - self.beta[i]) / -alpha).max(T::zero()),
                        true,
                    )
                } else {
                    continue;
                };
                step = step.min(lim);
                limits.push((i, lim, to_upper, alpha.abs()));
            }
            let mut leave: Option<(usize, bool)> = None;
            let mut leave_key = (T::zero(), usize::MAX);
            for &(i, lim, to_upper, a) in &limits {
                if lim > step + ftol {
                    continue;
                }
                let b = self.basis[i];
                let wins = match leave {
                    None => true,
                    Some(_) if self.bland => b < leave_key.1,
                    Some(_) => a > leave_key.0 || (a == leave_key.0 && b < leave_key.1),
                };
                if wins {
                    leave = Some((i, to_upper));
                    leave_key = (a, b);
                }
            }
            let flip = self.upper[q];
            if leave.is_none() && !flip.is_finite() {
                return Phase::Unbounded;
            }
            self.iterations += 1;
            if flip.is_finite() && (leave.is_none() || flip <= step) {
                // bound flip, no basis change
                for i in 0..self.m() {
                    let a = self.at(i, q);
                    self.beta[i] -= dir * flip * a;
                }
                self.at_upper[q] = !self.at_upper[q];
                continue;
            }
            let (r, to_upper) = leave.expect("leaving row");
            if step <= ftol {
                self.degenerate += 1;
                if self.degenerate >= opts.bland_after {
                    self.bland = true;
                }
            }
            for i in 0..self.m() {
                let a = self.at(i, q);
                self.beta[i] -= dir * step * a;
            }
            let entering_value = if self.at_upper[q] {
                self.upper[q] - step
            } else {
                step
            };
            let out = self.basis[r];
            self.is_basic[out] = false;
            self.at_upper[out] = to_upper;
            self.pivot(r, q, &mut d);
            self.basis[r] = q;
            self.is_basic[q] = true;
            self.at_upper[q] = false;
            self.beta[r] = entering_value;
        }
    }
}

/// Solve with default options.
pub fn solve_lp<T: Scalar>(lp: &LinearProgram<T>) -> LpSolution<T> {
    solve_lp_with(lp, &SimplexOptions::default())
}

pub fn solve_lp_with<T: Scalar>(lp: &LinearProgram<T>, opts: &SimplexOptions) -> LpSolution<T> {
    let n = lp.n_vars();
    let failed = |status, iterations, used_bland| LpSolution {
        status,
        x: vec![T::zero(); n],
        objective: T::nan(),
        iterations,
        used_bland,
    };
    for (&l, &u) in lp.lower.iter().zip(&lp.upper) {
        if !l.is_finite() {
            // shifting needs finite lower bounds
            return failed(LpStatus::Unbounded, 0, false);
        }
        if l > u + T::feas_tol() {
            return failed(LpStatus::Infeasible, 0, false);
        }
    }
    let n_eq = lp.eq_rows.len();
    let n_le = lp.ineq_rows.len();
    let m = n_eq + n_le;

    // rows: equalities then inequalities, rhs shifted by the lower bounds
    let mut rows: Vec<Vec<T>> = Vec::with_capacity(m);
    let mut rhs: Vec<T> = Vec::with_capacity(m);
    for (row, &b) in lp
        .eq_rows
        .iter()
        .chain(&lp.ineq_rows)
        .zip(lp.eq_rhs.iter().chain(&lp.ineq_rhs))
    {
        rows.push(row.clone());
        rhs.push(b - dot(row, &lp.lower));
    }
    // columns: structural | slacks (one per inequality) | artificials
    let slack0 = n;
    let art0 = n + n_le;
    let mut needs_art = vec![false; m];
    let mut sign = vec![T::one(); m];
    for i in 0..m {
        let is_le = i >= n_eq;
        if rhs[i] < T::zero() {
            sign[i] = -T::one();
        }
        needs_art[i] = !is_le || rhs[i] < T::zero();
    }
    let n_art = needs_art.iter().filter(|&&a| a).count();
    let ncols = art0 + n_art;
    let mut t = vec![T::zero(); m * ncols];
    let mut basis = vec![0; m];
    let mut upper = Vec::with_capacity(ncols);
    upper.extend(lp.lower.iter().zip(&lp.upper).map(|(&l, &u)| u - l));
    upper.extend(std::iter::repeat(T::infinity()).take(n_le + n_art));
    let mut art = art0;
    for i in 0..m {
        let s = sign[i];
        for j in 0..n {
            t[i * ncols + j] = s * rows[i][j];
        }
        if i >= n_eq {
            t[i * ncols + slack0 + (i - n_eq)] = s;
        }
        rhs[i] = s * rhs[i];
        if needs_art[i] {
            t[i * ncols + art] = T::one();
            basis[i] = art;
            art += 1;
        } else {
            basis[i] = slack0 + (i - n_eq);
        }
    }
    let mut is_basic = vec![false; ncols];
    for &b in &basis {
        is_basic[b] = true;
    }
    let mut tab = Tableau {
        t,
        ncols,
        upper,
        init_cols: basis.clone(),
        basis,
        is_basic,
        at_upper: vec![false; ncols],
        beta: rhs.clone(),
        rhs,
        iterations: 0,
        degenerate: 0,
        bland: false,
    };

    if n_art > 0 {
        let mut c1 = vec![T::zero(); ncols];
        for c in c1.iter_mut().skip(art0) {
            *c = T::one();
        }
        match tab.run(&c1, opts) {
            Phase::Done => {}
            Phase::IterationLimit => {
                return failed(LpStatus::IterationLimit, tab.iterations, tab.bland)
            }
            Phase::Unbounded => return failed(LpStatus::Infeasible, tab.iterations, tab.bland),
        }
        tab.refresh_beta();
        let infeas = tab
            .basis
            .iter()
            .zip(&tab.beta)
            .filter(|(&b, _)| b >= art0)
            .fold(T::zero(), |s, (_, &v)| s + v);
        if infeas > T::infeas_tol() {
            return failed(LpStatus::Infeasible, tab.iterations, tab.bland);
        }
        // artificials are pinned to zero from here on
        for j in art0..ncols {
            tab.upper[j] = T::zero();
            tab.at_upper[j] = false;
        }
    }

    let mut c2 = vec![T::zero(); ncols];
    c2[..n].copy_from_slice(&lp.objective);
    let status = match tab.run(&c2, opts) {
        Phase::Done => LpStatus::Optimal,
        Phase::Unbounded => LpStatus::Unbounded,
        Phase::IterationLimit => LpStatus::IterationLimit,
    };
    if status != LpStatus::Optimal {
        return failed(status, tab.iterations, tab.bland);
    }
    tab.refresh_beta();
    let mut y = vec![T::zero(); ncols];
    for j in 0..ncols {
        if !tab.is_basic[j] && tab.at_upper[j] {
            y[j] = tab.upper[j];
        }
    }
    for (i, &b) in tab.basis.iter().enumerate() {
        y[b] = tab.beta[i];
    }
    let x: Vec<T> = (0..n)
        .map(|j| {
            let v = y[j] + lp.lower[j];
            // snap round-off back inside the box
            v.max(lp.lower[j]).min(lp.upper[j])
        })
        .collect();
    LpSolution {
        status,
        objective: lp.objective_at(&x),
        x,
        iterations: tab.iterations,
        used_bland: tab.bland,
    }
}
