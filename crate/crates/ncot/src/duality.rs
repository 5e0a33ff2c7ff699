//! Dual potentials for non-conservative transport.
//!
//! A pair (φ, ψ) is admissible when
//!
//! ```text
//!   c(i,j) ≥ φ(i) + (ψ(j) − ⟨ψ, ν⟩) · m(i,j)   on every admissible pair,
//! ```
//!
//! and the dual value is ⟨φ, μ⟩. The roles of φ and ψ are not symmetric: ψ
//! is defined up to an additive shift and is kept ν-mean-zero here. The
//! authoritative optimality certificate always comes from the LP dual
//! multipliers; the alternating transform ascent is offered as a research
//! path and certifies its own fixed points by exhibiting a feasible plan on
//! the tight set.
//!
//! All operations require m strictly positive on admissible pairs (entries
//! below [`MASS_FLOOR`] are rejected: the transform divides by m).

use crate::error::Error;
use crate::lp::{solve_lp, LinearProgram, LpStatus, SimplexOptions};
use crate::measure::{CostMatrix, DiscreteMeasure, MassChangeMatrix};
use crate::solver::NcotSolution;

/// Smallest mass-change factor the dual theory accepts.
pub const MASS_FLOOR: f64 = 1e-9;
/// ⟨ψ, ν⟩ is kept below this after normalization.
pub const PSI_MEAN_TOL: f64 = 1e-10;

/// An admissible dual pair with ν-mean-zero ψ.
#[derive(Debug, Clone)]
pub struct DualPotentials {
    /// Per source point, in units of cost.
    pub phi: Vec<f64>,
    /// Per target point, in units of cost per unit mass change.
    pub psi: Vec<f64>,
    /// Cached ⟨ψ, ν⟩ of the stored ψ.
    pub psi_nu_mean: f64,
}

impl DualPotentials {
    /// Builds the pair from raw vectors, shifting ψ to ν-mean zero.
    pub fn normalized(phi: Vec<f64>, psi: Vec<f64>, nu: &DiscreteMeasure) -> Result<Self, Error> {
        if psi.len() != nu.len() {
            return Err(Error::DimensionMismatch {
                context: "psi vs nu",
                expected: nu.len(),
                got: psi.len(),
            });
        }
        let mean = inner(&psi, &nu.weights);
        let psi: Vec<f64> = psi.iter().map(|v| v - mean).collect();
        let psi_nu_mean = inner(&psi, &nu.weights);
        Ok(Self {
            phi,
            psi,
            psi_nu_mean,
        })
    }

    /// Dual objective ⟨φ, μ⟩.
    pub fn objective(&self, mu: &DiscreteMeasure) -> f64 {
        inner(&self.phi, &mu.weights)
    }

    /// Largest violation of the admissibility inequality over admissible
    /// pairs; ≤ 0 means the pair is admissible.
    pub fn admissibility_violation(&self, cost: &CostMatrix, mass: &MassChangeMatrix) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for (i, j) in cost.admissible_pairs() {
            let lhs = self.phi[i] + (self.psi[j] - self.psi_nu_mean) * mass.factor(i, j);
            worst = worst.max(lhs - cost.cost(i, j));
        }
        worst
    }
}

fn inner(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_mass_floor(cost: &CostMatrix, mass: &MassChangeMatrix) -> Result<(), Error> {
    for (i, j) in cost.admissible_pairs() {
        let v = mass.factor(i, j);
        if v < MASS_FLOOR {
            return Err(Error::MassChangeTooSmall {
                row: i,
                col: j,
                value: v,
                floor: MASS_FLOOR,
            });
        }
    }
    Ok(())
}

/// Dual potentials read off the LP multipliers of a solved instance: the
/// source-row multipliers are φ, the target-row multipliers are ψ after
/// shifting to ν-mean zero. The shift preserves admissibility because the
/// inequality only sees ψ − ⟨ψ, ν⟩ and the raw mean is nonnegative at an
/// LP optimum (it is the reduced cost of the Z column).
pub fn potentials_from_lp(
    solution: &NcotSolution,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<DualPotentials, Error> {
    let expected = mu.len() + nu.len();
    if solution.lp_dual.len() != expected {
        return Err(Error::DimensionMismatch {
            context: "LP dual vector",
            expected,
            got: solution.lp_dual.len(),
        });
    }
    let phi = solution.lp_dual[..mu.len()].to_vec();
    let psi = solution.lp_dual[mu.len()..].to_vec();
    DualPotentials::normalized(phi, psi, nu)
}

/// The generalized c-transform:
/// φ(i) = min over admissible j of [c(i,j) − (ψ(j) − ⟨ψ,ν⟩) m(i,j)].
/// Ties resolve to the lowest index, which does not affect the value.
pub fn generalized_c_transform(
    psi: &[f64],
    cost: &CostMatrix,
    mass: &MassChangeMatrix,
    nu: &DiscreteMeasure,
) -> Result<Vec<f64>, Error> {
    check_mass_floor(cost, mass)?;
    if psi.len() != nu.len() {
        return Err(Error::DimensionMismatch {
            context: "psi vs nu",
            expected: nu.len(),
            got: psi.len(),
        });
    }
    let mean = inner(psi, &nu.weights);
    let mut phi = Vec::with_capacity(cost.n_source);
    for i in 0..cost.n_source {
        let mut best = f64::INFINITY;
        let mut seen = false;
        for j in 0..cost.n_target {
            if !cost.admissible(i, j) {
                continue;
            }
            seen = true;
            let v = cost.cost(i, j) - (psi[j] - mean) * mass.factor(i, j);
            if v < best {
                best = v;
            }
        }
        if !seen {
            return Err(Error::EmptyRow { row: i });
        }
        phi.push(best);
    }
    Ok(phi)
}

/// Result of the k-shift normalization.
#[derive(Debug, Clone)]
pub struct Normalization {
    /// The nonnegative shift applied to φ.
    pub k: f64,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

/// Finds k ≥ 0 with Σ_j ν_j · min_i [(c(i,j) − φ(i) − k)/m(i,j)] = 0 and
/// returns (φ + k, ψ̄) with ψ̄(j) the inner minimum at the root.
///
/// The integrand is a ν-average of minima of strictly decreasing affine
/// functions of k, so it is continuous and strictly decreasing and bisection
/// is safe; the root exists precisely when the k = 0 value is nonnegative,
/// which holds whenever φ is one half of an admissible pair.
pub fn normalize_psi(
    phi: &[f64],
    cost: &CostMatrix,
    mass: &MassChangeMatrix,
    nu: &DiscreteMeasure,
) -> Result<Normalization, Error> {
    check_mass_floor(cost, mass)?;
    if phi.len() != cost.n_source {
        return Err(Error::DimensionMismatch {
            context: "phi vs cost rows",
            expected: cost.n_source,
            got: phi.len(),
        });
    }
    // min_i (c − φ − k)/m per column; +∞ when the column has no admissible
    // pair (such columns must carry no ν-mass).
    let col_min = |j: usize, k: f64| -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..cost.n_source {
            if cost.admissible(i, j) {
                let v = (cost.cost(i, j) - phi[i] - k) / mass.factor(i, j);
                best = best.min(v);
            }
        }
        best
    };
    for j in 0..cost.n_target {
        if nu.weights[j] > 0.0 && col_min(j, 0.0) == f64::INFINITY {
            return Err(Error::PreconditionViolated {
                what: format!("target {j} has positive weight but no admissible pair"),
            });
        }
    }
    let g = |k: f64| -> f64 {
        (0..cost.n_target)
            .filter(|&j| nu.weights[j] > 0.0)
            .map(|j| nu.weights[j] * col_min(j, k))
            .sum()
    };

    let scale =
        1.0 + cost.max_cost().unwrap_or(0.0).abs() + phi.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let g0 = g(0.0);
    if g0 < -1e-12 * scale {
        return Err(Error::BracketFailure {
            detail: format!("ν-integral of min (c − φ)/m is negative ({g0}); φ is not admissible"),
        });
    }
    let sup_m = mass.max_over(cost).unwrap_or(1.0);
    let mut k = 0.0;
    if g0 > 0.0 {
        let mut lo = 0.0;
        let mut hi = g0 * sup_m + 1e-12 * scale;
        let mut guard = 0;
        while g(hi) > 0.0 {
            hi *= 2.0;
            guard += 1;
            if guard > 64 {
                return Err(Error::BracketFailure {
                    detail: "could not bracket the normalization shift".into(),
                });
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * (1.0 + hi) {
                break;
            }
        }
        k = 0.5 * (lo + hi);
    }

    let phi_bar: Vec<f64> = phi.iter().map(|v| v + k).collect();
    let mut psi_bar: Vec<f64> = (0..cost.n_target)
        .map(|j| {
            let v = col_min(j, k);
            if v == f64::INFINITY {
                0.0
            } else {
                v
            }
        })
        .collect();
    // Exact recentering; the residual mean from bisection is O(eps) anyway.
    let mean = inner(&psi_bar, &nu.weights);
    for v in psi_bar.iter_mut() {
        *v -= mean;
    }
    Ok(Normalization {
        k,
        phi: phi_bar,
        psi: psi_bar,
    })
}

/// Outcome of the alternating-transform ascent.
#[derive(Debug, Clone)]
pub struct DualAscent {
    pub potentials: DualPotentials,
    /// True when the iteration stabilized *and* the stationary pair is a
    /// certified maximizer: its tight set supports a feasible plan, which
    /// forces ⟨φ, μ⟩ to equal the primal optimum. Plain stalls at
    /// non-optimal fixed points report false.
    pub converged: bool,
    /// ⟨φ, μ⟩ after each sweep.
    pub history: Vec<f64>,
}

/// Alternates the generalized c-transform and the k-normalization from
/// ψ₀ ≡ 0 until successive dual values change by less than `tol` or
/// `max_iters` sweeps. The output is admissible regardless of the flag.
pub fn dual_ascent(
    cost: &CostMatrix,
    mass: &MassChangeMatrix,
    nu: &DiscreteMeasure,
    mu: &DiscreteMeasure,
    max_iters: usize,
    tol: f64,
) -> Result<DualAscent, Error> {
    check_mass_floor(cost, mass)?;
    let mut psi = vec![0.0; nu.len()];
    let mut history = Vec::new();
    let mut potentials = None;
    let mut stationary = false;
    for _ in 0..max_iters.max(1) {
        let phi = generalized_c_transform(&psi, cost, mass, nu)?;
        let norm = normalize_psi(&phi, cost, mass, nu)?;
        psi = norm.psi.clone();
        let value = inner(&norm.phi, &mu.weights);
        let prev = history.last().copied();
        history.push(value);
        potentials = Some(DualPotentials {
            phi: norm.phi,
            psi: norm.psi,
            psi_nu_mean: 0.0,
        });
        if let Some(p) = prev {
            if (value - p).abs() < tol {
                stationary = true;
                break;
            }
        }
    }
    let potentials = potentials.expect("at least one sweep runs");
    let converged = stationary && tight_set_supports_feasible_plan(&potentials, cost, mass, mu, nu);
    Ok(DualAscent {
        potentials,
        converged,
        history,
    })
}

/// Whether some feasible plan lives on the tight set of `pot`. By
/// complementary slackness this certifies that `pot` maximizes the dual and
/// the plan minimizes the primal.
fn tight_set_supports_feasible_plan(
    pot: &DualPotentials,
    cost: &CostMatrix,
    mass: &MassChangeMatrix,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> bool {
    let scale = 1.0 + cost.max_cost().unwrap_or(0.0).abs();
    let tight = tight_support(pot, cost, mass, nu, 1e-8 * scale);
    if tight.pairs.is_empty() {
        return false;
    }
    let n_vars = tight.pairs.len() + 1;
    let n_rows = mu.len() + nu.len();
    let mut matrix = vec![0.0; n_rows * n_vars];
    for (k, pair) in tight.pairs.iter().enumerate() {
        let (i, j) = (pair.source, pair.target);
        matrix[i * n_vars + k] = 1.0;
        matrix[(mu.len() + j) * n_vars + k] = mass.factor(i, j);
    }
    for j in 0..nu.len() {
        matrix[(mu.len() + j) * n_vars + (n_vars - 1)] = -nu.weights[j];
    }
    let mut rhs = vec![0.0; n_rows];
    rhs[..mu.len()].copy_from_slice(&mu.weights);
    let lp = match LinearProgram::new(vec![0.0; n_vars], matrix, rhs) {
        Ok(lp) => lp,
        Err(_) => return false,
    };
    match solve_lp(&lp, &SimplexOptions::default()) {
        Ok(sol) => sol.status == LpStatus::Optimal,
        Err(_) => false,
    }
}

/// Numeric strong-duality certificate.
#[derive(Debug, Clone)]
pub struct DualityCertificate {
    /// optimal_value − ⟨φ, μ⟩; nonnegative up to solver noise.
    pub gap: f64,
    /// Positive part of the worst admissibility violation.
    pub max_violation: f64,
    /// gap ≤ 1e-6 · (1 + |value|).
    pub accepted: bool,
}

/// Checks admissibility and measures the duality gap of a solved instance
/// against a candidate dual pair.
pub fn certify_duality(
    solution: &NcotSolution,
    pot: &DualPotentials,
    mu: &DiscreteMeasure,
    cost: &CostMatrix,
    mass: &MassChangeMatrix,
) -> Result<DualityCertificate, Error> {
    let violation = pot.admissibility_violation(cost, mass);
    let scale = 1.0 + cost.max_cost().unwrap_or(0.0).abs();
    if violation > 1e-9 * scale {
        return Err(Error::InadmissiblePotentials { violation });
    }
    let gap = solution.optimal_value - pot.objective(mu);
    if gap < -1e-8 * (1.0 + solution.optimal_value.abs()) {
        return Err(Error::Internal(format!(
            "dual value exceeds the primal optimum (gap {gap}); weak duality violated"
        )));
    }
    let accepted = gap <= 1e-6 * (1.0 + solution.optimal_value.abs());
    Ok(DualityCertificate {
        gap,
        max_violation: violation.max(0.0),
        accepted,
    })
}

/// A pair where the admissibility inequality is tight.
#[derive(Debug, Clone, Copy)]
pub struct TightPair {
    pub source: usize,
    pub target: usize,
    /// Whether the target minimizes f_i(·) = c(i,·) − (ψ − ⟨ψ,ν⟩) m(i,·).
    pub minimizes_f: bool,
    /// Whether the source minimizes g_j(·) = (c(·,j) − φ(·)) / m(·,j).
    pub minimizes_g: bool,
}

/// Pairs with |c − φ − (ψ − ⟨ψ,ν⟩) m| ≤ tol. The support of every optimal
/// plan is contained in this set once the duality gap closes.
#[derive(Debug, Clone)]
pub struct TightSupportSet {
    pub pairs: Vec<TightPair>,
}

impl TightSupportSet {
    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.pairs.iter().any(|p| p.source == i && p.target == j)
    }
}

pub fn tight_support(
    pot: &DualPotentials,
    cost: &CostMatrix,
    mass: &MassChangeMatrix,
    nu: &DiscreteMeasure,
    tol: f64,
) -> TightSupportSet {
    let mean = inner(&pot.psi, &nu.weights);
    let f = |i: usize, j: usize| cost.cost(i, j) - (pot.psi[j] - mean) * mass.factor(i, j);
    let g = |i: usize, j: usize| (cost.cost(i, j) - pot.phi[i]) / mass.factor(i, j);

    let mut row_min = vec![f64::INFINITY; cost.n_source];
    let mut col_min = vec![f64::INFINITY; cost.n_target];
    for (i, j) in cost.admissible_pairs() {
        row_min[i] = row_min[i].min(f(i, j));
        col_min[j] = col_min[j].min(g(i, j));
    }

    let mut pairs = Vec::new();
    for (i, j) in cost.admissible_pairs() {
        let slack = cost.cost(i, j) - pot.phi[i] - (pot.psi[j] - mean) * mass.factor(i, j);
        if slack.abs() <= tol {
            pairs.push(TightPair {
                source: i,
                target: j,
                minimizes_f: f(i, j) <= row_min[i] + tol,
                minimizes_g: g(i, j) <= col_min[j] + tol,
            });
        }
    }
    TightSupportSet { pairs }
}

/// Uniform bound K with |φ|, |ψ| ≤ K for normalized optimal pairs, computed
/// from sup c, inf c and the extremes of m over the admissible pairs.
pub fn uniform_bound(cost: &CostMatrix, mass: &MassChangeMatrix) -> Result<f64, Error> {
    check_mass_floor(cost, mass)?;
    let sup_c = cost.max_cost().ok_or(Error::EmptyRow { row: 0 })?;
    let inf_c = cost.min_cost().unwrap();
    let inf_m = mass.min_over(cost).unwrap();
    let sup_m = mass.max_over(cost).unwrap();
    let spread = (sup_c - inf_c) / inf_m;
    // φ ≤ sup c, ψ ∈ ±spread, φ ≥ inf c − spread·sup m.
    Ok(sup_c.abs().max(spread).max((inf_c - spread * sup_m).abs()))
}
