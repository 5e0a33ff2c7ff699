//! Exact LP formulation and solution of the non-conservative transport
//! problem, plus the fixed-retained-mass variant.
//!
//! Variables are the admissible plan entries π(i,j) together with the
//! retained mass Z. Constraints:
//!
//! ```text
//!   (a)  Σ_j π(i,j)              = μ_i   for every source i
//!   (b)  Σ_i m(i,j) π(i,j) − ν_j Z = 0   for every target j
//! ```
//!
//! The identity Z = Σ m π is implied by summing (b) over j, since Σ ν_j = 1;
//! it is not a separate constraint. With m ≡ 1 the (b) rows collapse to the
//! standard second-marginal conditions and Z is forced to 1, recovering the
//! classical Kantorovich linear program.

use crate::error::Error;
use crate::lp::{solve_lp, LinearProgram, LpStatus, SimplexOptions};
use crate::measure::{CostMatrix, DiscreteMeasure, MassChangeMatrix, TransportPlan};

/// Optimal plan with its value, retained mass, and raw LP dual multipliers
/// (source rows first, then target rows).
#[derive(Debug, Clone)]
pub struct NcotSolution {
    pub plan: TransportPlan,
    pub optimal_value: f64,
    pub retained_mass: f64,
    pub lp_dual: Vec<f64>,
}

/// Value of the plan variable Z below which the solution is flagged as
/// degenerate (the normalization of the second marginal loses meaning).
const DEGENERATE_Z: f64 = 1e-10;

fn validate_shapes(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostMatrix,
    mass: &MassChangeMatrix,
) -> Result<(), Error> {
    if cost.n_source != mu.len() || cost.n_target != nu.len() {
        return Err(Error::DimensionMismatch {
            context: "cost matrix vs measures",
            expected: mu.len() * nu.len(),
            got: cost.n_source * cost.n_target,
        });
    }
    if mass.n_source != mu.len() || mass.n_target != nu.len() {
        return Err(Error::DimensionMismatch {
            context: "mass-change matrix vs measures",
            expected: mu.len() * nu.len(),
            got: mass.n_source * mass.n_target,
        });
    }
    for i in 0..mu.len() {
        if !(0..nu.len()).any(|j| cost.admissible(i, j)) {
            return Err(Error::EmptyRow { row: i });
        }
    }
    Ok(())
}

/// Builds the LP over the admissible pairs and Z. Returns the program and
/// the variable layout: `pairs[k]` is the (source, target) pair of variable
/// k, and the final variable is Z.
pub fn build_ncot_lp(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostMatrix,
    mass: &MassChangeMatrix,
) -> Result<(LinearProgram, Vec<(usize, usize)>), Error> {
    validate_shapes(mu, nu, cost, mass)?;
    let pairs: Vec<(usize, usize)> = cost.admissible_pairs().collect();
    let n_vars = pairs.len() + 1;
    let n_rows = mu.len() + nu.len();
    let z_col = pairs.len();

    let mut objective = vec![0.0; n_vars];
    for (k, &(i, j)) in pairs.iter().enumerate() {
        objective[k] = cost.cost(i, j);
    }

    let mut matrix = vec![0.0; n_rows * n_vars];
    for (k, &(i, j)) in pairs.iter().enumerate() {
        matrix[i * n_vars + k] = 1.0;
        matrix[(mu.len() + j) * n_vars + k] = mass.factor(i, j);
    }
    for j in 0..nu.len() {
        matrix[(mu.len() + j) * n_vars + z_col] = -nu.weights[j];
    }

    let mut rhs = vec![0.0; n_rows];
    rhs[..mu.len()].copy_from_slice(&mu.weights);

    let lp = LinearProgram::new(objective, matrix, rhs)?;
    Ok((lp, pairs))
}

fn plan_from_primal(
    primal: &[f64],
    pairs: &[(usize, usize)],
    n_source: usize,
    n_target: usize,
    mass: &MassChangeMatrix,
) -> TransportPlan {
    let mut entries = vec![0.0; n_source * n_target];
    for (k, &(i, j)) in pairs.iter().enumerate() {
        entries[i * n_target + j] = primal[k];
    }
    let retained: f64 = pairs
        .iter()
        .enumerate()
        .map(|(k, &(i, j))| primal[k] * mass.factor(i, j))
        .sum();
    TransportPlan::from_flat(entries, n_source, n_target, retained)
}

/// Solves the non-conservative Kantorovich problem.
pub fn solve_ncot(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostMatrix,
    mass: &MassChangeMatrix,
) -> Result<NcotSolution, Error> {
    let (lp, pairs) = build_ncot_lp(mu, nu, cost, mass)?;
    let sol = solve_lp(&lp, &SimplexOptions::default())?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(Error::Infeasible),
        LpStatus::Unbounded => return Err(Error::Unbounded),
    }
    let plan = plan_from_primal(&sol.primal, &pairs, mu.len(), nu.len(), mass);
    if plan.retained_mass <= DEGENERATE_Z {
        log::warn!(
            "optimal retained mass Z = {} is numerically degenerate",
            plan.retained_mass
        );
    }
    let retained_mass = plan.retained_mass;
    Ok(NcotSolution {
        plan,
        optimal_value: sol.objective_value,
        retained_mass,
        lp_dual: sol.dual,
    })
}

/// Solves the variant with the retained mass pinned to a given Z: the second
/// marginal constraint becomes Σ_i m(i,j) π(i,j) = Z ν_j with Z no longer a
/// variable. This is the semi-coupling problem in which the second coupling
/// is forced to be m·π through the degenerate cost's infinite branch.
pub fn solve_fixed_mass(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    z: f64,
    cost: &CostMatrix,
    mass: &MassChangeMatrix,
) -> Result<f64, Error> {
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::PreconditionViolated {
            what: format!("fixed retained mass must be positive, got {z}"),
        });
    }
    validate_shapes(mu, nu, cost, mass)?;
    let pairs: Vec<(usize, usize)> = cost.admissible_pairs().collect();
    let n_vars = pairs.len();
    let n_rows = mu.len() + nu.len();

    let mut objective = vec![0.0; n_vars];
    for (k, &(i, j)) in pairs.iter().enumerate() {
        objective[k] = cost.cost(i, j);
    }
    let mut matrix = vec![0.0; n_rows * n_vars];
    for (k, &(i, j)) in pairs.iter().enumerate() {
        matrix[i * n_vars + k] = 1.0;
        matrix[(mu.len() + j) * n_vars + k] = mass.factor(i, j);
    }
    let mut rhs = vec![0.0; n_rows];
    rhs[..mu.len()].copy_from_slice(&mu.weights);
    for j in 0..nu.len() {
        rhs[mu.len() + j] = z * nu.weights[j];
    }

    let lp = LinearProgram::new(objective, matrix, rhs)?;
    let sol = solve_lp(&lp, &SimplexOptions::default())?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective_value),
        LpStatus::Infeasible => Err(Error::Infeasible),
        LpStatus::Unbounded => Err(Error::Unbounded),
    }
}

/// One grid entry of a retained-mass sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepPoint {
    pub z: f64,
    /// None when the problem is infeasible at this Z.
    pub value: Option<f64>,
}

/// Evaluates the fixed-mass problem over a grid of Z values. The minimum
/// over feasible entries upper-bounds the free-Z optimum and matches it when
/// the grid contains the optimal Z.
pub fn sweep_mass_scales(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostMatrix,
    mass: &MassChangeMatrix,
    grid: &[f64],
) -> Result<Vec<SweepPoint>, Error> {
    if grid.is_empty() {
        return Err(Error::PreconditionViolated {
            what: "Z grid must be nonempty".into(),
        });
    }
    grid.iter()
        .map(|&z| match solve_fixed_mass(mu, nu, z, cost, mass) {
            Ok(value) => Ok(SweepPoint {
                z,
                value: Some(value),
            }),
            Err(Error::Infeasible) => Ok(SweepPoint { z, value: None }),
            Err(e) => Err(e),
        })
        .collect()
}

/// Classical Kantorovich LP on the same data (hard marginal constraints,
/// no mass change, no Z variable). Used by the conservation-reduction
/// checks and as the k = 0 reference for the map demos.
pub fn solve_classical_kantorovich(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostMatrix,
) -> Result<NcotSolution, Error> {
    let mass = MassChangeMatrix::conservative(mu.len(), nu.len());
    validate_shapes(mu, nu, cost, &mass)?;
    let pairs: Vec<(usize, usize)> = cost.admissible_pairs().collect();
    let n_vars = pairs.len();
    let n_rows = mu.len() + nu.len();

    let mut objective = vec![0.0; n_vars];
    for (k, &(i, j)) in pairs.iter().enumerate() {
        objective[k] = cost.cost(i, j);
    }
    let mut matrix = vec![0.0; n_rows * n_vars];
    for (k, &(i, j)) in pairs.iter().enumerate() {
        matrix[i * n_vars + k] = 1.0;
        matrix[(mu.len() + j) * n_vars + k] = 1.0;
    }
    let mut rhs = vec![0.0; n_rows];
    rhs[..mu.len()].copy_from_slice(&mu.weights);
    rhs[mu.len()..].copy_from_slice(&nu.weights);

    let lp = LinearProgram::new(objective, matrix, rhs)?;
    let sol = solve_lp(&lp, &SimplexOptions::default())?;
    match sol.status {
        LpStatus::Optimal => {
            let plan = plan_from_primal(&sol.primal, &pairs, mu.len(), nu.len(), &mass);
            let retained_mass = plan.retained_mass;
            Ok(NcotSolution {
                plan,
                optimal_value: sol.objective_value,
                retained_mass,
                lp_dual: sol.dual,
            })
        }
        LpStatus::Infeasible => Err(Error::Infeasible),
        LpStatus::Unbounded => Err(Error::Unbounded),
    }
}
