//! Shared test fixtures: an exhaustive vertex-enumeration oracle for small
//! equality-form LPs, seeded random instance generators, and a quantile
//! oracle for monotone 1-d maps. The oracle never touches the simplex path
//! it is used to check.

#![allow(dead_code)]

use ncot::lp::LinearProgram;
use ncot::market::{Edge, MarketGraph, Portfolio, PriceVector, TargetProportions};
use ncot::measure::{CostMatrix, DiscreteMeasure, MassChangeMatrix};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleOutcome {
    Optimal(f64),
    Infeasible,
}

/// Brute-force minimum of cᵀx over {Ax = b, x ≥ 0} by enumerating every
/// basic solution: first the independent rows of A are identified (equality
/// systems like transportation polytopes are routinely rank-deficient), then
/// every column subset of that size is solved densely and kept when
/// nonnegative and consistent with the full system. Bounded polytopes always
/// expose their optimum this way.
pub fn enumerate_vertices_min(lp: &LinearProgram) -> OracleOutcome {
    let m = lp.constraint_count;
    let n = lp.var_count;
    let scale = 1.0
        + lp.eq_matrix.iter().fold(0.0f64, |a, v| a.max(v.abs()))
        + lp.eq_rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));

    // Row echelon on [A | b] to find independent rows and catch an
    // inconsistent dependency outright.
    let mut mat: Vec<f64> = Vec::with_capacity(m * (n + 1));
    for i in 0..m {
        mat.extend_from_slice(&lp.eq_matrix[i * n..(i + 1) * n]);
        mat.push(lp.eq_rhs[i]);
    }
    let w = n + 1;
    let mut row_of: Vec<usize> = (0..m).collect();
    let mut rank = 0usize;
    for col in 0..n {
        if rank == m {
            break;
        }
        let mut p = rank;
        let mut best = mat[rank * w + col].abs();
        for r in rank + 1..m {
            let v = mat[r * w + col].abs();
            if v > best {
                best = v;
                p = r;
            }
        }
        if best <= 1e-10 * scale {
            continue;
        }
        if p != rank {
            for j in 0..w {
                mat.swap(rank * w + j, p * w + j);
            }
            row_of.swap(rank, p);
        }
        let inv = 1.0 / mat[rank * w + col];
        for r in rank + 1..m {
            let f = mat[r * w + col] * inv;
            if f != 0.0 {
                for j in col..w {
                    mat[r * w + j] -= f * mat[rank * w + j];
                }
            }
        }
        rank += 1;
    }
    for r in rank..m {
        if mat[r * w + n].abs() > 1e-8 * scale {
            return OracleOutcome::Infeasible;
        }
    }
    let pivot_rows: Vec<usize> = row_of[..rank].to_vec();
    if rank > n {
        return OracleOutcome::Infeasible;
    }

    let mut best: Option<f64> = None;
    let mut subset: Vec<usize> = (0..rank).collect();
    loop {
        if let Some(x_s) = solve_square_subset(lp, &pivot_rows, &subset) {
            if x_s.iter().all(|&v| v >= -1e-9) {
                // Verify against every row, including the dependent ones.
                let mut x = vec![0.0; n];
                for (&j, &v) in subset.iter().zip(&x_s) {
                    x[j] = v.max(0.0);
                }
                let feasible = (0..m).all(|i| {
                    let lhs: f64 = subset.iter().map(|&j| lp.eq_matrix[i * n + j] * x[j]).sum();
                    (lhs - lp.eq_rhs[i]).abs() <= 1e-7 * scale
                });
                if feasible {
                    let value: f64 = subset.iter().map(|&j| lp.objective[j] * x[j]).sum();
                    best = Some(best.map_or(value, |b: f64| b.min(value)));
                }
            }
        }
        if !next_combination(&mut subset, n) {
            break;
        }
    }
    match best {
        Some(v) => OracleOutcome::Optimal(v),
        None => OracleOutcome::Infeasible,
    }
}

fn solve_square_subset(lp: &LinearProgram, rows: &[usize], cols: &[usize]) -> Option<Vec<f64>> {
    let r = rows.len();
    let mut a = vec![0.0; r * r];
    for (k, &j) in cols.iter().enumerate() {
        for (ri, &i) in rows.iter().enumerate() {
            a[ri * r + k] = lp.eq_matrix[i * lp.var_count + j];
        }
    }
    let mut x: Vec<f64> = rows.iter().map(|&i| lp.eq_rhs[i]).collect();
    // Gaussian elimination with partial pivoting; near-singular bases are
    // skipped (the vertex reappears under another basis).
    for k in 0..r {
        let mut p = k;
        let mut bestpiv = a[k * r + k].abs();
        for q in k + 1..r {
            let v = a[q * r + k].abs();
            if v > bestpiv {
                bestpiv = v;
                p = q;
            }
        }
        if bestpiv < 1e-10 {
            return None;
        }
        if p != k {
            for j in 0..r {
                a.swap(k * r + j, p * r + j);
            }
            x.swap(k, p);
        }
        let inv = 1.0 / a[k * r + k];
        for q in k + 1..r {
            let f = a[q * r + k] * inv;
            if f != 0.0 {
                for j in k..r {
                    a[q * r + j] -= f * a[k * r + j];
                }
                x[q] -= f * x[k];
            }
        }
    }
    for k in (0..r).rev() {
        let mut acc = x[k];
        for j in k + 1..r {
            acc -= a[k * r + j] * x[j];
        }
        x[k] = acc / a[k * r + k];
    }
    Some(x)
}

fn next_combination(subset: &mut [usize], n: usize) -> bool {
    let k = subset.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if subset[i] < n - k + i {
            subset[i] += 1;
            for j in i + 1..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Strictly positive weights on the simplex.
pub fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    for v in w.iter_mut() {
        *v /= total;
    }
    w
}

pub struct RandomInstance {
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
    pub cost: CostMatrix,
    pub mass: MassChangeMatrix,
}

/// Random transport instance with ≤ 6 source and target points. Larger
/// shapes get a sparse admissibility mask (each row covered) so the oracle's
/// enumeration stays small; the LP then has at most ~19 variables.
pub fn random_ncot_instance(rng: &mut ChaCha8Rng) -> RandomInstance {
    let n_s = rng.gen_range(2..=6usize);
    let n_t = rng.gen_range(2..=6usize);
    let mu = DiscreteMeasure::indexed(random_simplex(rng, n_s)).unwrap();
    let nu = DiscreteMeasure::indexed(random_simplex(rng, n_t)).unwrap();
    let cost_rows: Vec<Vec<f64>> = (0..n_s)
        .map(|_| (0..n_t).map(|_| rng.gen_range(0.0..1.0)).collect())
        .collect();
    let mass_rows: Vec<Vec<f64>> = (0..n_s)
        .map(|_| (0..n_t).map(|_| rng.gen_range(0.2..1.8)).collect())
        .collect();

    let max_vars = 18usize;
    let cost = if n_s * n_t <= max_vars {
        CostMatrix::dense(cost_rows).unwrap()
    } else {
        let mut mask = vec![vec![false; n_t]; n_s];
        let mut kept = 0usize;
        for (i, row) in mask.iter_mut().enumerate() {
            row[i % n_t] = true;
            kept += 1;
        }
        let mut extras: Vec<(usize, usize)> = (0..n_s)
            .flat_map(|i| (0..n_t).map(move |j| (i, j)))
            .collect();
        // Fisher–Yates under the seeded rng keeps the suite reproducible.
        for i in (1..extras.len()).rev() {
            let j = rng.gen_range(0..=i);
            extras.swap(i, j);
        }
        for (i, j) in extras {
            if kept >= max_vars {
                break;
            }
            if !mask[i][j] {
                mask[i][j] = true;
                kept += 1;
            }
        }
        CostMatrix::masked(cost_rows, mask).unwrap()
    };
    RandomInstance {
        mu,
        nu,
        cost,
        mass: MassChangeMatrix::dense(mass_rows).unwrap(),
    }
}

pub struct RandomMarket {
    pub market: MarketGraph,
    pub q: PriceVector,
    pub portfolio: Portfolio,
    pub target: TargetProportions,
}

/// Complete consistent market over 2..=6 assets with mild spreads, a random
/// long-only portfolio of positive value, and a random target.
pub fn random_market(rng: &mut ChaCha8Rng) -> RandomMarket {
    let n = rng.gen_range(2..=6usize);
    let mut q = vec![1.0];
    for _ in 1..n {
        q.push(rng.gen_range(-0.7..0.7f64).exp());
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let spread: f64 = rng.gen_range(0.0..0.08);
                edges.push(Edge {
                    from: i,
                    to: j,
                    price: q[i] / q[j] * (-spread).exp(),
                });
            }
        }
    }
    let market = MarketGraph::new(n, edges).unwrap();
    let q = PriceVector::new(q).unwrap();
    let mut units: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
    units[rng.gen_range(0..n)] += 0.5;
    let portfolio = Portfolio::new(units).unwrap();
    let mut nu = random_simplex(rng, n);
    if rng.gen_bool(0.3) && n > 2 {
        // Occasionally retire an asset entirely.
        let drop = rng.gen_range(0..n);
        let freed = nu[drop];
        nu[drop] = 0.0;
        let remaining: f64 = 1.0 - freed;
        for v in nu.iter_mut() {
            *v /= remaining;
        }
    }
    let target = TargetProportions::new(nu).unwrap();
    RandomMarket {
        market,
        q,
        portfolio,
        target,
    }
}

/// Monotone (quantile-matching) assignment between two weighted 1-d
/// sequences, defined only when no source cell straddles a target boundary
/// beyond `tol` — the aligned case used by the grid demos.
pub fn monotone_aligned_map(mu_w: &[f64], nu_w: &[f64], tol: f64) -> Option<Vec<usize>> {
    let mut assignment = Vec::with_capacity(mu_w.len());
    let mut j = 0usize;
    let mut nu_remaining = *nu_w.first()?;
    for &w in mu_w {
        while nu_remaining <= tol && j + 1 < nu_w.len() {
            j += 1;
            nu_remaining = nu_w[j];
        }
        if w > nu_remaining + tol {
            return None;
        }
        assignment.push(j);
        nu_remaining -= w;
    }
    Some(assignment)
}
