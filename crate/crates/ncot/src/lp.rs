//! Dense two-phase primal simplex for equality-form linear programs.
//!
//! Solves `min cᵀx  s.t.  Ax = b, x ≥ 0` and returns primal solutions, dual
//! multipliers (one per equality row) and infeasibility / unboundedness
//! certificates. The basis is refactorized from the original data on every
//! iteration, so accumulated pivot drift never enters the reported solution.
//!
//! Anti-cycling: entering variables are picked by Dantzig pricing while the
//! objective is making progress and by Bland's smallest-index rule during
//! degenerate stretches, which restores the finite-termination guarantee.
//! Both rules are deterministic, so identical inputs produce identical bases.
//!
//! Inputs are rescaled so that max |A entry| = 1 before pivoting and the
//! solution is unscaled on exit.

use crate::error::Error;

/// Equality-form linear program. All variables are implicitly ≥ 0.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    /// Minimization objective, length `var_count`.
    pub objective: Vec<f64>,
    /// Constraint matrix, row-major, `constraint_count × var_count`.
    pub eq_matrix: Vec<f64>,
    /// Right-hand side, length `constraint_count`.
    pub eq_rhs: Vec<f64>,
    pub var_count: usize,
    pub constraint_count: usize,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, eq_matrix: Vec<f64>, eq_rhs: Vec<f64>) -> Result<Self, Error> {
        let var_count = objective.len();
        let constraint_count = eq_rhs.len();
        if var_count == 0 {
            return Err(Error::DimensionMismatch {
                context: "LinearProgram objective",
                expected: 1,
                got: 0,
            });
        }
        if eq_matrix.len() != var_count * constraint_count {
            return Err(Error::DimensionMismatch {
                context: "LinearProgram matrix",
                expected: var_count * constraint_count,
                got: eq_matrix.len(),
            });
        }
        for (i, v) in objective.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: "LP objective",
                    index: i,
                });
            }
        }
        for (i, v) in eq_matrix.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: "LP matrix",
                    index: i,
                });
            }
        }
        for (i, v) in eq_rhs.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: "LP rhs",
                    index: i,
                });
            }
        }
        Ok(Self {
            objective,
            eq_matrix,
            eq_rhs,
            var_count,
            constraint_count,
        })
    }

    #[inline]
    fn a(&self, i: usize, j: usize) -> f64 {
        self.eq_matrix[i * self.var_count + j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of a simplex run.
///
/// For `Optimal`, `primal`/`dual` satisfy `A x = b`, `Aᵀy ≤ c` and
/// `cᵀx = bᵀy` within the solver tolerances. For `Infeasible`, `dual` holds a
/// Farkas certificate (`Aᵀy ≤ 0`, `bᵀy > 0`). For `Unbounded`, `ray` holds a
/// direction `d ≥ 0` with `Ad = 0` and `cᵀd < 0`.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    pub dual: Vec<f64>,
    pub objective_value: f64,
    pub ray: Option<Vec<f64>>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Feasibility tolerance on the scaled system.
    pub feas_tol: f64,
    /// Reduced-cost tolerance on the scaled system.
    pub opt_tol: f64,
    /// Hard pivot cap; `None` picks a size-dependent default.
    pub max_iters: Option<usize>,
    /// Log the pivot trajectory through `log::trace!`.
    pub trace: bool,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-9,
            opt_tol: 1e-9,
            max_iters: None,
            trace: false,
        }
    }
}

/// Pivot eligibility threshold on scaled data.
const PIVOT_TOL: f64 = 1e-9;
/// Consecutive non-improving pivots before Bland's rule takes over.
const STALL_LIMIT: usize = 50;

pub fn solve_lp(lp: &LinearProgram, opts: &SimplexOptions) -> Result<LpSolution, Error> {
    let m = lp.constraint_count;
    let n = lp.var_count;

    if m == 0 {
        // No constraints: minimum of cᵀx over x ≥ 0.
        if lp.objective.iter().any(|&c| c < 0.0) {
            let ray: Vec<f64> = lp
                .objective
                .iter()
                .map(|&c| if c < 0.0 { 1.0 } else { 0.0 })
                .collect();
            return Ok(LpSolution {
                status: LpStatus::Unbounded,
                primal: vec![0.0; n],
                dual: vec![],
                objective_value: f64::NEG_INFINITY,
                ray: Some(ray),
                iterations: 0,
            });
        }
        return Ok(LpSolution {
            status: LpStatus::Optimal,
            primal: vec![0.0; n],
            dual: vec![],
            objective_value: 0.0,
            ray: None,
            iterations: 0,
        });
    }

    let mut ws = Workspace::build(lp);
    let max_iters = opts.max_iters.unwrap_or((2000 + 100 * m + n).max(5000));

    // Phase 1: minimize the sum of artificials from the all-artificial basis.
    let phase1_cost: Vec<f64> = (0..n + m).map(|j| if j < n { 0.0 } else { 1.0 }).collect();
    let p1 = ws.run(&phase1_cost, max_iters, opts)?;
    let mut iterations = p1.iterations;
    match p1.outcome {
        Outcome::Optimal => {}
        // Phase 1 is bounded below by zero, so this cannot trigger.
        Outcome::Unbounded { .. } => return Err(Error::Internal("phase 1 unbounded".into())),
    }
    let infeas_gate = opts.feas_tol * (1.0 + ws.b.iter().map(|v| v.abs()).sum::<f64>());
    if ws.phase_objective(&phase1_cost) > infeas_gate {
        // Farkas certificate: y with Aᵀy ≤ 0 and bᵀy > 0, from phase-1 duals.
        let y = ws.duals(&phase1_cost)?;
        let dual = ws.unscale_duals(&y, 1.0);
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            primal: vec![0.0; n],
            dual,
            objective_value: f64::NAN,
            ray: None,
            iterations,
        });
    }
    ws.expel_artificials()?;

    // Phase 2: the real objective. Artificial columns stay blocked.
    let mut phase2_cost = vec![0.0; n + m];
    phase2_cost[..n].copy_from_slice(&ws.c_scaled);
    let p2 = ws.run(&phase2_cost, max_iters.saturating_sub(iterations), opts)?;
    iterations += p2.iterations;

    match p2.outcome {
        Outcome::Optimal => {
            let (primal, dual) = ws.extract_solution(&phase2_cost)?;
            let objective_value = lp.objective.iter().zip(&primal).map(|(c, x)| c * x).sum();
            Ok(LpSolution {
                status: LpStatus::Optimal,
                primal,
                dual,
                objective_value,
                ray: None,
                iterations,
            })
        }
        Outcome::Unbounded {
            entering,
            direction,
        } => {
            let mut ray = vec![0.0; n];
            if entering < n {
                ray[entering] = 1.0;
            }
            for (row, &bi) in ws.basis.iter().enumerate() {
                if bi < n {
                    ray[bi] = -direction[row];
                }
            }
            for r in ray.iter_mut() {
                if r.abs() < PIVOT_TOL {
                    *r = 0.0;
                }
            }
            let (primal, dual) = ws.extract_solution(&phase2_cost)?;
            Ok(LpSolution {
                status: LpStatus::Unbounded,
                primal,
                dual,
                objective_value: f64::NEG_INFINITY,
                ray: Some(ray),
                iterations,
            })
        }
    }
}

enum Outcome {
    Optimal,
    Unbounded {
        entering: usize,
        direction: Vec<f64>,
    },
}

struct RunResult {
    outcome: Outcome,
    iterations: usize,
}

/// Scaled problem data plus the current basis.
struct Workspace {
    m: usize,
    n: usize,
    /// Scaled, sign-fixed matrix, row-major m×n.
    a: Vec<f64>,
    /// Scaled, sign-fixed rhs (≥ 0 entrywise).
    b: Vec<f64>,
    /// Scaled objective.
    c_scaled: Vec<f64>,
    row_sign: Vec<f64>,
    a_scale: f64,
    c_scale: f64,
    /// Basis column indices; artificial i is column n + i.
    basis: Vec<usize>,
    /// Artificials may never re-enter once expelled; real columns are free.
    blocked: Vec<bool>,
    // Scratch reused across iterations.
    lu: Vec<f64>,
    lu_pivots: Vec<usize>,
    x_basic: Vec<f64>,
}

impl Workspace {
    fn build(lp: &LinearProgram) -> Self {
        let m = lp.constraint_count;
        let n = lp.var_count;
        let a_scale = lp
            .eq_matrix
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let c_scale = lp
            .objective
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
            .max(f64::MIN_POSITIVE);

        let mut row_sign = vec![1.0; m];
        let mut a = vec![0.0; m * n];
        let mut b = vec![0.0; m];
        for i in 0..m {
            let s = if lp.eq_rhs[i] < 0.0 { -1.0 } else { 1.0 };
            row_sign[i] = s;
            b[i] = s * lp.eq_rhs[i] / a_scale;
            for j in 0..n {
                a[i * n + j] = s * lp.a(i, j) / a_scale;
            }
        }
        let c_scaled: Vec<f64> = lp.objective.iter().map(|v| v / c_scale).collect();
        let basis: Vec<usize> = (n..n + m).collect();
        let mut blocked = vec![false; n + m];
        for flag in blocked.iter_mut().take(n + m).skip(n) {
            *flag = true;
        }
        Self {
            m,
            n,
            a,
            b,
            c_scaled,
            row_sign,
            a_scale,
            c_scale,
            basis,
            blocked,
            lu: vec![0.0; m * m],
            lu_pivots: vec![0; m],
            x_basic: vec![0.0; m],
        }
    }

    #[inline]
    fn col_entry(&self, row: usize, col: usize) -> f64 {
        if col < self.n {
            self.a[row * self.n + col]
        } else if col - self.n == row {
            1.0
        } else {
            0.0
        }
    }

    fn factorize(&mut self) -> Result<(), Error> {
        let m = self.m;
        for row in 0..m {
            for (k, &col) in self.basis.iter().enumerate() {
                self.lu[row * m + k] = self.col_entry(row, col);
            }
        }
        lu_factor(&mut self.lu, m, &mut self.lu_pivots)
    }

    fn solve_basis(&self, rhs: &mut [f64]) {
        lu_solve(&self.lu, self.m, &self.lu_pivots, rhs);
    }

    fn solve_basis_t(&self, rhs: &mut [f64]) {
        lu_solve_transpose(&self.lu, self.m, &self.lu_pivots, rhs);
    }

    fn refresh_basics(&mut self) {
        let mut x = self.b.clone();
        self.solve_basis(&mut x);
        self.x_basic = x;
    }

    fn phase_objective(&self, cost: &[f64]) -> f64 {
        self.basis
            .iter()
            .zip(&self.x_basic)
            .map(|(&j, &x)| cost[j] * x.max(0.0))
            .sum()
    }

    fn duals(&self, cost: &[f64]) -> Result<Vec<f64>, Error> {
        let mut y: Vec<f64> = self.basis.iter().map(|&j| cost[j]).collect();
        self.solve_basis_t(&mut y);
        Ok(y)
    }

    fn unscale_duals(&self, y: &[f64], obj_scale: f64) -> Vec<f64> {
        y.iter()
            .zip(&self.row_sign)
            .map(|(v, s)| v * s * obj_scale / self.a_scale)
            .collect()
    }

    /// One simplex phase. The basis must be feasible on entry.
    fn run(
        &mut self,
        cost: &[f64],
        max_iters: usize,
        opts: &SimplexOptions,
    ) -> Result<RunResult, Error> {
        let m = self.m;
        let n = self.n;
        let mut bland = false;
        let mut stall = 0usize;
        let mut last_obj = f64::INFINITY;

        for iter in 0..max_iters.max(1) {
            self.factorize()?;
            self.refresh_basics();
            let obj = self.phase_objective(cost);
            if obj < last_obj - 1e-12 * (1.0 + last_obj.abs()) {
                stall = 0;
                bland = false;
            } else {
                stall += 1;
                if stall > STALL_LIMIT {
                    bland = true;
                }
            }
            last_obj = obj;

            let y = self.duals(cost)?;
            let mut in_basis = vec![false; n + m];
            for &j in &self.basis {
                in_basis[j] = true;
            }

            let mut entering: Option<usize> = None;
            let mut best_red = -opts.opt_tol;
            for j in 0..n {
                if in_basis[j] || self.blocked[j] {
                    continue;
                }
                let mut red = cost[j];
                for (i, &yi) in y.iter().enumerate() {
                    red -= yi * self.a[i * n + j];
                }
                if red < -opts.opt_tol {
                    if bland {
                        entering = Some(j);
                        break;
                    }
                    if red < best_red {
                        best_red = red;
                        entering = Some(j);
                    }
                }
            }

            let e = match entering {
                Some(e) => e,
                None => {
                    return Ok(RunResult {
                        outcome: Outcome::Optimal,
                        iterations: iter,
                    })
                }
            };

            let mut direction: Vec<f64> = (0..m).map(|i| self.col_entry(i, e)).collect();
            self.solve_basis(&mut direction);

            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for (row, &d) in direction.iter().enumerate() {
                if d <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.x_basic[row].max(0.0) / d;
                match leave {
                    None => {
                        leave = Some(row);
                        best_ratio = ratio;
                    }
                    Some(l) => {
                        let tol = 1e-10 * (1.0 + best_ratio.abs());
                        if ratio < best_ratio - tol {
                            leave = Some(row);
                            best_ratio = ratio;
                        } else if ratio <= best_ratio + tol && self.basis[row] < self.basis[l] {
                            // Bland tie-break among (near-)equal ratios.
                            leave = Some(row);
                            best_ratio = best_ratio.min(ratio);
                        }
                    }
                }
            }
            let l = match leave {
                Some(l) => l,
                None => {
                    return Ok(RunResult {
                        outcome: Outcome::Unbounded {
                            entering: e,
                            direction,
                        },
                        iterations: iter,
                    })
                }
            };

            if opts.trace || log::log_enabled!(log::Level::Trace) {
                log::trace!(
                    "pivot {iter}: enter x{e}, leave x{} (row {l}), obj {obj:.12e}, bland {bland}",
                    self.basis[l]
                );
            }
            self.basis[l] = e;
        }
        Err(Error::IterationLimit { limit: max_iters })
    }

    /// Pivot zero-level artificials out of the basis where a real column is
    /// available; rows with no such column are redundant and keep their
    /// artificial pinned at zero (it is blocked from ever re-entering).
    fn expel_artificials(&mut self) -> Result<(), Error> {
        let m = self.m;
        let n = self.n;
        for row in 0..m {
            if self.basis[row] < n {
                continue;
            }
            self.factorize()?;
            // e_rowᵀ B⁻¹ A gives the tableau row of this artificial.
            let mut w = vec![0.0; m];
            w[row] = 1.0;
            self.solve_basis_t(&mut w);
            let mut in_basis = vec![false; n];
            for &j in &self.basis {
                if j < n {
                    in_basis[j] = true;
                }
            }
            let mut replacement = None;
            for j in 0..n {
                if in_basis[j] {
                    continue;
                }
                let mut t = 0.0;
                for (i, &wi) in w.iter().enumerate() {
                    t += wi * self.a[i * n + j];
                }
                if t.abs() > 1e-7 {
                    replacement = Some(j);
                    break;
                }
            }
            if let Some(j) = replacement {
                self.basis[row] = j;
            }
        }
        Ok(())
    }

    fn extract_solution(&mut self, cost: &[f64]) -> Result<(Vec<f64>, Vec<f64>), Error> {
        self.factorize()?;
        self.refresh_basics();
        let mut primal = vec![0.0; self.n];
        for (row, &j) in self.basis.iter().enumerate() {
            if j < self.n {
                primal[j] = self.x_basic[row].max(0.0);
            }
        }
        let y = self.duals(cost)?;
        let dual = self.unscale_duals(&y, self.c_scale);
        Ok((primal, dual))
    }
}

/// In-place LU with partial pivoting; `pivots[k]` records the row swapped
/// into position k.
fn lu_factor(a: &mut [f64], n: usize, pivots: &mut [usize]) -> Result<(), Error> {
    for k in 0..n {
        let mut p = k;
        let mut best = a[k * n + k].abs();
        for r in k + 1..n {
            let v = a[r * n + k].abs();
            if v > best {
                best = v;
                p = r;
            }
        }
        if best < 1e-13 {
            return Err(Error::SingularBasis);
        }
        pivots[k] = p;
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
        }
        let inv = 1.0 / a[k * n + k];
        for r in k + 1..n {
            let f = a[r * n + k] * inv;
            a[r * n + k] = f;
            if f != 0.0 {
                for j in k + 1..n {
                    a[r * n + j] -= f * a[k * n + j];
                }
            }
        }
    }
    Ok(())
}

fn lu_solve(lu: &[f64], n: usize, pivots: &[usize], rhs: &mut [f64]) {
    for k in 0..n {
        rhs.swap(k, pivots[k]);
    }
    for k in 1..n {
        let mut acc = rhs[k];
        for j in 0..k {
            acc -= lu[k * n + j] * rhs[j];
        }
        rhs[k] = acc;
    }
    for k in (0..n).rev() {
        let mut acc = rhs[k];
        for j in k + 1..n {
            acc -= lu[k * n + j] * rhs[j];
        }
        rhs[k] = acc / lu[k * n + k];
    }
}

/// Solve Bᵀy = rhs using the factors of B.
fn lu_solve_transpose(lu: &[f64], n: usize, pivots: &[usize], rhs: &mut [f64]) {
    // B = P⁻¹LU, so Bᵀ = UᵀLᵀP: forward with Uᵀ, back with Lᵀ, undo swaps.
    for k in 0..n {
        let mut acc = rhs[k];
        for j in 0..k {
            acc -= lu[j * n + k] * rhs[j];
        }
        rhs[k] = acc / lu[k * n + k];
    }
    for k in (0..n).rev() {
        let mut acc = rhs[k];
        for j in k + 1..n {
            acc -= lu[j * n + k] * rhs[j];
        }
        rhs[k] = acc;
    }
    for k in (0..n).rev() {
        rhs.swap(k, pivots[k]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(c: Vec<f64>, a: Vec<Vec<f64>>, b: Vec<f64>) -> LpSolution {
        let n = c.len();
        let flat: Vec<f64> = a.into_iter().flatten().collect();
        assert_eq!(flat.len(), n * b.len());
        let lp = LinearProgram::new(c, flat, b).unwrap();
        solve_lp(&lp, &SimplexOptions::default()).unwrap()
    }

    #[test]
    fn forced_by_nonnegativity() {
        let sol = solve(vec![1.0, 0.0], vec![vec![1.0, 1.0]], vec![1.0]);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.primal[0]).abs() < 1e-12);
        assert!((sol.primal[1] - 1.0).abs() < 1e-12);
        assert!(sol.objective_value.abs() < 1e-12);
    }

    #[test]
    fn negative_rhs_is_infeasible() {
        let sol = solve(vec![0.0], vec![vec![1.0]], vec![-1.0]);
        assert_eq!(sol.status, LpStatus::Infeasible);
        // Farkas direction: Aᵀy ≤ 0 with bᵀy > 0.
        let y = sol.dual[0];
        assert!(y <= 1e-12);
        assert!(-y > 1e-12);
    }

    #[test]
    fn unbounded_with_negative_cost() {
        // min -x1 s.t. x1 - x2 = 0: ray (1,1).
        let sol = solve(vec![-1.0, 0.0], vec![vec![1.0, -1.0]], vec![0.0]);
        assert_eq!(sol.status, LpStatus::Unbounded);
        let ray = sol.ray.unwrap();
        assert!(ray[0] > 0.5 && (ray[0] - ray[1]).abs() < 1e-9);
    }

    #[test]
    fn primal_dual_gap_and_residual() {
        // 2x3 transportation polytope with distinct costs.
        let c = vec![0.3, 0.7, 0.1, 0.9, 0.2, 0.5];
        let a = vec![
            vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0],
            vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0, 1.0, 0.0],
        ];
        let b = vec![0.6, 0.4, 0.5, 0.2];
        let sol = solve(c.clone(), a.clone(), b.clone());
        assert_eq!(sol.status, LpStatus::Optimal);
        // Refeasibility.
        for (i, row) in a.iter().enumerate() {
            let lhs: f64 = row.iter().zip(&sol.primal).map(|(r, x)| r * x).sum();
            assert!((lhs - b[i]).abs() <= 1e-9 * (1.0 + b[i].abs()));
        }
        // Strong duality.
        let by: f64 = b.iter().zip(&sol.dual).map(|(bi, yi)| bi * yi).sum();
        assert!((sol.objective_value - by).abs() <= 1e-8 * (1.0 + sol.objective_value.abs()));
        // Dual feasibility.
        for j in 0..c.len() {
            let ay: f64 = a.iter().zip(&sol.dual).map(|(row, y)| row[j] * y).sum();
            assert!(ay <= c[j] + 1e-8);
        }
    }

    #[test]
    fn determinism() {
        let c = vec![0.3, 0.7, 0.1, 0.9, 0.2, 0.5];
        let a = vec![
            vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0],
            vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        ];
        let b = vec![0.6, 0.4, 0.5];
        let s1 = solve(c.clone(), a.clone(), b.clone());
        let s2 = solve(c, a, b);
        assert_eq!(s1.primal, s2.primal);
        assert_eq!(s1.dual, s2.dual);
        assert_eq!(s1.iterations, s2.iterations);
    }

    #[test]
    fn redundant_row_is_tolerated() {
        // Second row duplicates the first.
        let sol = solve(
            vec![1.0, 2.0],
            vec![vec![1.0, 1.0], vec![1.0, 1.0]],
            vec![1.0, 1.0],
        );
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective_value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_instance_terminates() {
        // Beale's classical cycling example; Bland fallback must terminate.
        // min -3/4 x1 + 150 x2 - 1/50 x3 + 6 x4 over the slack-extended system.
        let c = vec![-0.75, 150.0, -0.02, 6.0, 0.0, 0.0, 0.0];
        let a = vec![
            vec![0.25, -60.0, -1.0 / 25.0, 9.0, 1.0, 0.0, 0.0],
            vec![0.5, -90.0, -1.0 / 50.0, 3.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        ];
        let b = vec![0.0, 0.0, 1.0];
        let sol = solve(c, a, b);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective_value - (-0.05)).abs() < 1e-9);
    }

    #[test]
    fn scaling_handles_wide_magnitudes() {
        // Same geometry as forced_by_nonnegativity but scaled by 1e6.
        let sol = solve(vec![1e6, 0.0], vec![vec![1e6, 1e6]], vec![1e6]);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.primal[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn iteration_cap_surfaces_as_an_error() {
        let lp = LinearProgram::new(
            vec![0.3, 0.7, 0.1, 0.9],
            vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0],
            vec![0.5, 0.5],
        )
        .unwrap();
        let opts = SimplexOptions {
            max_iters: Some(1),
            ..SimplexOptions::default()
        };
        assert!(matches!(
            solve_lp(&lp, &opts),
            Err(Error::IterationLimit { limit: 1 })
        ));
    }
}
