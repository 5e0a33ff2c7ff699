//! Measures, costs, mass-change factors, and transport plans.
//!
//! A plan π between a source measure μ and a target measure ν is feasible
//! when its first marginal is μ and its m-weighted second marginal is
//! proportional to ν:
//!
//! ```text
//!   Σ_j π(i,j) = μ_i          Σ_i m(i,j) π(i,j) = ν_j · Z,   Z = Σ m π.
//! ```
//!
//! Infinite costs never appear as numbers; inadmissible pairs are carried by
//! the cost mask and excluded as variables downstream. Zero entries of m are
//! allowed here (leaky transport with cutoff) — the duality module imposes
//! its own strictly positive floor.

use crate::error::Error;
use serde::{Deserialize, Serialize};

/// Weight-sum tolerance when validating a probability measure.
pub const PROBABILITY_TOL: f64 = 1e-12;
/// Default residual tolerance for plan feasibility checks.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// A support point: an opaque label or a coordinate in ℝⁿ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Point {
    Label(String),
    Coord(Vec<f64>),
}

/// Weighted point masses. Always a probability measure here (μ and ν both
/// are); weights may be zero but must sum to one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Point>, weights: Vec<f64>) -> Result<Self, Error> {
        if points.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                context: "measure points vs weights",
                expected: points.len(),
                got: weights.len(),
            });
        }
        for (i, w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(Error::NonFinite {
                    context: "measure weights",
                    index: i,
                });
            }
            if *w < 0.0 {
                return Err(Error::NegativeEntry {
                    context: "measure weights",
                    index: i,
                    value: *w,
                });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_TOL {
            return Err(Error::NotProbability {
                sum,
                tol: PROBABILITY_TOL,
            });
        }
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                if points[i] == points[j] {
                    return Err(Error::DuplicatePoint {
                        first: i,
                        second: j,
                    });
                }
            }
        }
        Ok(Self { points, weights })
    }

    /// Measure over anonymous indexed points, for purely combinatorial use.
    pub fn indexed(weights: Vec<f64>) -> Result<Self, Error> {
        let points = (0..weights.len())
            .map(|i| Point::Label(i.to_string()))
            .collect();
        Self::new(points, weights)
    }

    /// Measure on a 1-d grid.
    pub fn on_line(xs: Vec<f64>, weights: Vec<f64>) -> Result<Self, Error> {
        let points = xs.into_iter().map(|x| Point::Coord(vec![x])).collect();
        Self::new(points, weights)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Coordinates of every point, when all points carry coordinates.
    pub fn coords(&self) -> Option<Vec<&[f64]>> {
        self.points
            .iter()
            .map(|p| match p {
                Point::Coord(c) => Some(c.as_slice()),
                Point::Label(_) => None,
            })
            .collect()
    }
}

/// Pairwise transport costs with an admissibility mask. Masked-out pairs
/// carry no finite entry and are excluded as LP variables downstream.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    pub n_source: usize,
    pub n_target: usize,
    entries: Vec<f64>,
    mask: Vec<bool>,
}

impl CostMatrix {
    pub fn dense(rows: Vec<Vec<f64>>) -> Result<Self, Error> {
        let n_source = rows.len();
        let n_target = rows.first().map_or(0, |r| r.len());
        let mask = vec![true; n_source * n_target];
        Self::build(rows, mask, n_source, n_target)
    }

    pub fn masked(rows: Vec<Vec<f64>>, mask_rows: Vec<Vec<bool>>) -> Result<Self, Error> {
        let n_source = rows.len();
        let n_target = rows.first().map_or(0, |r| r.len());
        if mask_rows.len() != n_source {
            return Err(Error::DimensionMismatch {
                context: "cost mask rows",
                expected: n_source,
                got: mask_rows.len(),
            });
        }
        let mut mask = Vec::with_capacity(n_source * n_target);
        for r in &mask_rows {
            if r.len() != n_target {
                return Err(Error::DimensionMismatch {
                    context: "cost mask cols",
                    expected: n_target,
                    got: r.len(),
                });
            }
            mask.extend_from_slice(r);
        }
        Self::build(rows, mask, n_source, n_target)
    }

    fn build(
        rows: Vec<Vec<f64>>,
        mask: Vec<bool>,
        n_source: usize,
        n_target: usize,
    ) -> Result<Self, Error> {
        let mut entries = vec![0.0; n_source * n_target];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_target {
                return Err(Error::DimensionMismatch {
                    context: "cost matrix row",
                    expected: n_target,
                    got: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                let idx = i * n_target + j;
                if mask[idx] {
                    if !v.is_finite() {
                        return Err(Error::NonFinite {
                            context: "cost matrix",
                            index: idx,
                        });
                    }
                    entries[idx] = v;
                }
            }
        }
        Ok(Self {
            n_source,
            n_target,
            entries,
            mask,
        })
    }

    #[inline]
    pub fn admissible(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.n_target + j]
    }

    /// Cost of an admissible pair. Masked-out pairs must not be queried.
    #[inline]
    pub fn cost(&self, i: usize, j: usize) -> f64 {
        debug_assert!(self.admissible(i, j));
        self.entries[i * self.n_target + j]
    }

    pub fn admissible_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n_target = self.n_target;
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(move |(idx, _)| (idx / n_target, idx % n_target))
    }

    /// Largest finite cost; None when everything is masked out.
    pub fn max_cost(&self) -> Option<f64> {
        self.admissible_pairs()
            .map(|(i, j)| self.cost(i, j))
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
    }

    pub fn min_cost(&self) -> Option<f64> {
        self.admissible_pairs()
            .map(|(i, j)| self.cost(i, j))
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.min(v))))
    }
}

/// Pairwise retained-mass multipliers m(i, j) ≥ 0.
#[derive(Debug, Clone)]
pub struct MassChangeMatrix {
    pub n_source: usize,
    pub n_target: usize,
    entries: Vec<f64>,
}

impl MassChangeMatrix {
    pub fn dense(rows: Vec<Vec<f64>>) -> Result<Self, Error> {
        let n_source = rows.len();
        let n_target = rows.first().map_or(0, |r| r.len());
        let mut entries = Vec::with_capacity(n_source * n_target);
        for row in &rows {
            if row.len() != n_target {
                return Err(Error::DimensionMismatch {
                    context: "mass-change row",
                    expected: n_target,
                    got: row.len(),
                });
            }
            for &v in row {
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        context: "mass-change matrix",
                        index: entries.len(),
                    });
                }
                if v < 0.0 {
                    return Err(Error::NegativeEntry {
                        context: "mass-change matrix",
                        index: entries.len(),
                        value: v,
                    });
                }
                entries.push(v);
            }
        }
        Ok(Self {
            n_source,
            n_target,
            entries,
        })
    }

    /// m ≡ 1: classical mass-conserving transport.
    pub fn conservative(n_source: usize, n_target: usize) -> Self {
        Self {
            n_source,
            n_target,
            entries: vec![1.0; n_source * n_target],
        }
    }

    #[inline]
    pub fn factor(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n_target + j]
    }

    /// Smallest factor over the admissible pairs of `mask`.
    pub fn min_over(&self, mask: &CostMatrix) -> Option<f64> {
        mask.admissible_pairs()
            .map(|(i, j)| self.factor(i, j))
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.min(v))))
    }

    pub fn max_over(&self, mask: &CostMatrix) -> Option<f64> {
        mask.admissible_pairs()
            .map(|(i, j)| self.factor(i, j))
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
    }
}

/// Nonnegative transport plan together with its retained mass Z = Σ m π.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub n_source: usize,
    pub n_target: usize,
    entries: Vec<f64>,
    pub retained_mass: f64,
}

impl TransportPlan {
    pub fn new(rows: Vec<Vec<f64>>, m: &MassChangeMatrix) -> Result<Self, Error> {
        let n_source = rows.len();
        let n_target = rows.first().map_or(0, |r| r.len());
        if m.n_source != n_source || m.n_target != n_target {
            return Err(Error::DimensionMismatch {
                context: "plan vs mass-change",
                expected: m.n_source * m.n_target,
                got: n_source * n_target,
            });
        }
        let mut entries = Vec::with_capacity(n_source * n_target);
        for row in &rows {
            if row.len() != n_target {
                return Err(Error::DimensionMismatch {
                    context: "plan row",
                    expected: n_target,
                    got: row.len(),
                });
            }
            for &v in row {
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        context: "transport plan",
                        index: entries.len(),
                    });
                }
                if v < 0.0 {
                    return Err(Error::NegativeEntry {
                        context: "transport plan",
                        index: entries.len(),
                        value: v,
                    });
                }
                entries.push(v);
            }
        }
        let retained_mass = entries
            .iter()
            .enumerate()
            .map(|(idx, &p)| p * m.entries[idx])
            .sum();
        Ok(Self {
            n_source,
            n_target,
            entries,
            retained_mass,
        })
    }

    pub(crate) fn from_flat(
        entries: Vec<f64>,
        n_source: usize,
        n_target: usize,
        retained_mass: f64,
    ) -> Self {
        Self {
            n_source,
            n_target,
            entries,
            retained_mass,
        }
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n_target + j]
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().sum()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n_target..(i + 1) * self.n_target]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_source).map(|i| self.row(i).to_vec()).collect()
    }

    /// Σ c π over the plan; pairs outside the cost mask must carry no mass.
    pub fn transport_cost(&self, c: &CostMatrix) -> f64 {
        let mut total = 0.0;
        for i in 0..self.n_source {
            for j in 0..self.n_target {
                let p = self.entry(i, j);
                if p > 0.0 {
                    total += p * c.cost(i, j);
                }
            }
        }
        total
    }
}

/// Residuals of a plan against the constraint set.
#[derive(Debug, Clone)]
pub struct FeasibilityReport {
    /// |Σ_j π(i,j) − μ_i| per source point.
    pub row_residuals: Vec<f64>,
    /// |Σ_i m(i,j) π(i,j) − ν_j Z| per target point, with Z recomputed.
    pub col_residuals: Vec<f64>,
    pub retained_mass: f64,
    /// Discrepancy between the stored and the recomputed retained mass.
    pub retained_mass_error: f64,
    pub total_mass_error: f64,
    pub is_feasible: bool,
}

impl FeasibilityReport {
    pub fn max_residual(&self) -> f64 {
        let r = self.row_residuals.iter().cloned().fold(0.0, f64::max);
        let c = self.col_residuals.iter().cloned().fold(0.0, f64::max);
        r.max(c)
    }
}

pub fn check_plan_feasibility(
    plan: &TransportPlan,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    m: &MassChangeMatrix,
    tol: f64,
) -> Result<FeasibilityReport, Error> {
    if plan.n_source != mu.len() {
        return Err(Error::DimensionMismatch {
            context: "plan rows vs mu",
            expected: mu.len(),
            got: plan.n_source,
        });
    }
    if plan.n_target != nu.len() {
        return Err(Error::DimensionMismatch {
            context: "plan cols vs nu",
            expected: nu.len(),
            got: plan.n_target,
        });
    }
    if m.n_source != plan.n_source || m.n_target != plan.n_target {
        return Err(Error::DimensionMismatch {
            context: "plan vs mass-change",
            expected: plan.n_source * plan.n_target,
            got: m.n_source * m.n_target,
        });
    }

    let (row_sums, weighted_cols) = classical_marginals(plan, m);
    let z: f64 = weighted_cols.iter().sum();
    let row_residuals: Vec<f64> = row_sums
        .iter()
        .zip(&mu.weights)
        .map(|(s, w)| (s - w).abs())
        .collect();
    let col_residuals: Vec<f64> = weighted_cols
        .iter()
        .zip(&nu.weights)
        .map(|(s, w)| (s - w * z).abs())
        .collect();
    let retained_mass_error = (z - plan.retained_mass).abs();
    let total_mass_error = (plan.total_mass() - 1.0).abs();
    let is_feasible = row_residuals.iter().all(|r| *r <= tol)
        && col_residuals.iter().all(|r| *r <= tol)
        && retained_mass_error <= tol
        && total_mass_error <= tol;
    Ok(FeasibilityReport {
        row_residuals,
        col_residuals,
        retained_mass: z,
        retained_mass_error,
        total_mass_error,
        is_feasible,
    })
}

/// First marginal and raw m-weighted column sums of a plan.
pub fn classical_marginals(plan: &TransportPlan, m: &MassChangeMatrix) -> (Vec<f64>, Vec<f64>) {
    let mut rows = vec![0.0; plan.n_source];
    let mut cols = vec![0.0; plan.n_target];
    for i in 0..plan.n_source {
        for j in 0..plan.n_target {
            let p = plan.entry(i, j);
            rows[i] += p;
            cols[j] += p * m.factor(i, j);
        }
    }
    (rows, cols)
}

/// The product-style feasible plan μ ⊗ ν̃, where ν̃ reweights ν by the
/// reciprocal of the effective column mass Σ_i m(i,j) μ_i.
pub fn feasible_product_plan(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    m: &MassChangeMatrix,
) -> Result<TransportPlan, Error> {
    if m.n_source != mu.len() || m.n_target != nu.len() {
        return Err(Error::DimensionMismatch {
            context: "mass-change vs measures",
            expected: mu.len() * nu.len(),
            got: m.n_source * m.n_target,
        });
    }
    let mut tilde = vec![0.0; nu.len()];
    for (j, t) in tilde.iter_mut().enumerate() {
        let col_mass: f64 = (0..mu.len()).map(|i| m.factor(i, j) * mu.weights[i]).sum();
        if nu.weights[j] > 0.0 {
            if col_mass <= 0.0 {
                return Err(Error::DegenerateMass { col: j });
            }
            *t = nu.weights[j] / col_mass;
        }
    }
    let norm: f64 = tilde.iter().sum();
    if norm <= 0.0 {
        return Err(Error::Internal("product plan has zero total weight".into()));
    }
    let n_target = nu.len();
    let mut entries = vec![0.0; mu.len() * n_target];
    for i in 0..mu.len() {
        for j in 0..n_target {
            entries[i * n_target + j] = mu.weights[i] * tilde[j] / norm;
        }
    }
    let retained_mass = entries
        .iter()
        .enumerate()
        .map(|(idx, &p)| p * m.factor(idx / n_target, idx % n_target))
        .sum();
    Ok(TransportPlan::from_flat(
        entries,
        mu.len(),
        n_target,
        retained_mass,
    ))
}
