//! Deterministic transport maps: extraction from plans and pointwise
//! solution of the characteristic equations.
//!
//! A plan is a (primal) map when every source row concentrates its mass on a
//! single target; the dual map is the column-wise analogue and carries the
//! reweighted measure λ(j) ∝ ν_j / m(S(j), j). On grids, potentials are
//! differentiated by central differences (one-sided at the boundary) and the
//! characteristic equations pin the target of each source point:
//!
//! * quadratic leaky regime, c = ½|x−y|², m = 1 − (k/2)|x−y|²:
//!   `(x − y)(1 − kφ(x)) = m(x,y) ∇φ(x)`, solved in closed form;
//! * perturbative regime, c = h(|x−y|), m = exp(−k d(|x−y|)):
//!   `F(z) = h'(z) + k d'(z)(h(z) − φ(x)) = |∇φ(x)|`, solved by bisection
//!   (F is strictly increasing for k under the regime threshold).

use crate::error::Error;
use crate::measure::{DiscreteMeasure, MassChangeMatrix, TransportPlan};

/// Bisection tolerance on the scalar step length z.
const Z_TOL: f64 = 1e-12;

/// Source-indexed assignment; None on rows that carry no mass.
#[derive(Debug, Clone)]
pub struct TransportMap {
    pub assignment: Vec<Option<usize>>,
}

impl TransportMap {
    pub fn target(&self, i: usize) -> Option<usize> {
        self.assignment.get(i).copied().flatten()
    }
}

#[derive(Debug, Clone)]
pub enum MapExtraction {
    Map(TransportMap),
    /// Rows whose mass splits across several targets beyond tolerance.
    NotAMap {
        split_rows: Vec<usize>,
    },
}

/// Reads a map off a plan: every row with mass > tol must hold at least
/// (1 − tol) of that mass in a single column.
pub fn extract_map_from_plan(plan: &TransportPlan, tol: f64) -> MapExtraction {
    let mut assignment = vec![None; plan.n_source];
    let mut split_rows = Vec::new();
    for i in 0..plan.n_source {
        let row = plan.row(i);
        let mass: f64 = row.iter().sum();
        if mass <= tol {
            continue;
        }
        let (best, best_val) =
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bj, bv), (j, &v)| {
                    if v > bv {
                        (j, v)
                    } else {
                        (bj, bv)
                    }
                });
        if best_val >= (1.0 - tol) * mass {
            assignment[i] = Some(best);
        } else {
            split_rows.push(i);
        }
    }
    if split_rows.is_empty() {
        MapExtraction::Map(TransportMap { assignment })
    } else {
        MapExtraction::NotAMap { split_rows }
    }
}

/// Target-indexed backward assignment with its weight measure λ.
#[derive(Debug, Clone)]
pub struct DualTransportMap {
    pub assignment: Vec<Option<usize>>,
    /// λ(j) ∝ ν_j / m(S(j), j), normalized to total mass 1.
    pub lambda: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum DualMapExtraction {
    Map(DualTransportMap),
    NotAMap { split_cols: Vec<usize> },
}

pub fn extract_dual_map_from_plan(
    plan: &TransportPlan,
    mass: &MassChangeMatrix,
    nu: &DiscreteMeasure,
    tol: f64,
) -> Result<DualMapExtraction, Error> {
    if nu.len() != plan.n_target {
        return Err(Error::DimensionMismatch {
            context: "plan cols vs nu",
            expected: plan.n_target,
            got: nu.len(),
        });
    }
    let mut assignment = vec![None; plan.n_target];
    let mut split_cols = Vec::new();
    for j in 0..plan.n_target {
        let col: Vec<f64> = (0..plan.n_source).map(|i| plan.entry(i, j)).collect();
        let col_mass: f64 = col.iter().sum();
        if col_mass <= tol {
            continue;
        }
        let (best, best_val) =
            col.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                    if v > bv {
                        (i, v)
                    } else {
                        (bi, bv)
                    }
                });
        if best_val >= (1.0 - tol) * col_mass {
            assignment[j] = Some(best);
        } else {
            split_cols.push(j);
        }
    }
    if !split_cols.is_empty() {
        return Ok(DualMapExtraction::NotAMap { split_cols });
    }
    let mut lambda = vec![0.0; plan.n_target];
    for (j, l) in lambda.iter_mut().enumerate() {
        if let Some(i) = assignment[j] {
            let m = mass.factor(i, j);
            if m <= 0.0 {
                return Err(Error::MassChangeTooSmall {
                    row: i,
                    col: j,
                    value: m,
                    floor: 0.0,
                });
            }
            *l = nu.weights[j] / m;
        }
    }
    let total: f64 = lambda.iter().sum();
    if total > 0.0 {
        for l in lambda.iter_mut() {
            *l /= total;
        }
    }
    Ok(DualMapExtraction::Map(DualTransportMap {
        assignment,
        lambda,
    }))
}

/// A potential sampled on a 1-d or 2-d grid with finite-difference
/// gradients: central in the interior, one-sided at the boundary.
#[derive(Debug, Clone)]
pub struct GridPotential {
    points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    gradients: Vec<Vec<f64>>,
    boundary: Vec<bool>,
}

impl GridPotential {
    pub fn line(xs: &[f64], values: Vec<f64>) -> Result<Self, Error> {
        let n = xs.len();
        if values.len() != n {
            return Err(Error::DimensionMismatch {
                context: "grid values",
                expected: n,
                got: values.len(),
            });
        }
        if n < 2 {
            return Err(Error::PreconditionViolated {
                what: "grid needs at least two points".into(),
            });
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::PreconditionViolated {
                what: "grid coordinates must be strictly increasing".into(),
            });
        }
        let mut gradients = Vec::with_capacity(n);
        for i in 0..n {
            let g = if i == 0 {
                (values[1] - values[0]) / (xs[1] - xs[0])
            } else if i == n - 1 {
                (values[n - 1] - values[n - 2]) / (xs[n - 1] - xs[n - 2])
            } else {
                (values[i + 1] - values[i - 1]) / (xs[i + 1] - xs[i - 1])
            };
            gradients.push(vec![g]);
        }
        let boundary = (0..n).map(|i| i == 0 || i == n - 1).collect();
        Ok(Self {
            points: xs.iter().map(|&x| vec![x]).collect(),
            values,
            gradients,
            boundary,
        })
    }

    /// Row-major lattice: `values[ix * ys.len() + iy]` sits at (xs[ix], ys[iy]).
    pub fn lattice(xs: &[f64], ys: &[f64], values: Vec<f64>) -> Result<Self, Error> {
        let (nx, ny) = (xs.len(), ys.len());
        if values.len() != nx * ny {
            return Err(Error::DimensionMismatch {
                context: "lattice values",
                expected: nx * ny,
                got: values.len(),
            });
        }
        if nx < 2 || ny < 2 {
            return Err(Error::PreconditionViolated {
                what: "lattice needs at least two points per axis".into(),
            });
        }
        let diff = |coords: &[f64], vals: &dyn Fn(usize) -> f64, i: usize, n: usize| -> f64 {
            if i == 0 {
                (vals(1) - vals(0)) / (coords[1] - coords[0])
            } else if i == n - 1 {
                (vals(n - 1) - vals(n - 2)) / (coords[n - 1] - coords[n - 2])
            } else {
                (vals(i + 1) - vals(i - 1)) / (coords[i + 1] - coords[i - 1])
            }
        };
        let mut points = Vec::with_capacity(nx * ny);
        let mut gradients = Vec::with_capacity(nx * ny);
        let mut boundary = Vec::with_capacity(nx * ny);
        for ix in 0..nx {
            for iy in 0..ny {
                points.push(vec![xs[ix], ys[iy]]);
                let along_x = |i: usize| values[i * ny + iy];
                let along_y = |i: usize| values[ix * ny + i];
                gradients.push(vec![diff(xs, &along_x, ix, nx), diff(ys, &along_y, iy, ny)]);
                boundary.push(ix == 0 || ix == nx - 1 || iy == 0 || iy == ny - 1);
            }
        }
        Ok(Self {
            points,
            values,
            gradients,
            boundary,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn gradient(&self, i: usize) -> &[f64] {
        &self.gradients[i]
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solves the quadratic leaky characteristic equation at one point and
/// returns the target y. With a = (k/2)|∇φ|² and b = 1 − kφ(x), the step z
/// solves 1 − a z² = b z; the admissible root (the one keeping m(x,y) > 0)
/// is z = (−b + √(b² + 4a)) / (2a), and y = x − z ∇φ(x).
pub fn quadratic_leaky_map_solve(
    x: &[f64],
    phi_x: f64,
    grad_phi_x: &[f64],
    k: f64,
) -> Result<Vec<f64>, Error> {
    if grad_phi_x.len() != x.len() {
        return Err(Error::DimensionMismatch {
            context: "gradient vs point",
            expected: x.len(),
            got: grad_phi_x.len(),
        });
    }
    if k < 0.0 {
        return Err(Error::PreconditionViolated {
            what: format!("leak rate k must be nonnegative, got {k}"),
        });
    }
    let b = 1.0 - k * phi_x;
    if b <= 0.0 {
        return Err(Error::PreconditionViolated {
            what: format!("1 − k·φ(x) must be positive (got {b})"),
        });
    }
    let grad_norm_sq: f64 = grad_phi_x.iter().map(|g| g * g).sum();
    if grad_norm_sq == 0.0 {
        return Ok(x.to_vec());
    }
    let a = 0.5 * k * grad_norm_sq;
    let z = if a == 0.0 {
        1.0 / b
    } else {
        (-b + (b * b + 4.0 * a).sqrt()) / (2.0 * a)
    };
    let residual = (1.0 - a * z * z - b * z).abs();
    if residual > 1e-10 {
        return Err(Error::Internal(format!(
            "characteristic-equation residual {residual} exceeds 1e-10"
        )));
    }
    let m_xy = 1.0 - a * z * z;
    if m_xy <= 0.0 {
        return Err(Error::PreconditionViolated {
            what: format!("selected root leaves m(x,y) = {m_xy} ≤ 0; k too large for the domain"),
        });
    }
    Ok(x.iter()
        .zip(grad_phi_x)
        .map(|(xi, gi)| xi - z * gi)
        .collect())
}

/// A smooth scalar profile t ↦ f(t) on [0, ∞) with its first and second
/// derivatives, generating costs c = h(|x−y|) or losses m = exp(−k d(|x−y|)).
pub trait ScalarCurve {
    fn value(&self, t: f64) -> f64;
    fn slope(&self, t: f64) -> f64;
    fn curvature(&self, t: f64) -> f64;
}

/// t ↦ t², the workhorse profile for both h and d.
#[derive(Debug, Clone, Copy)]
pub struct Quadratic;

impl ScalarCurve for Quadratic {
    fn value(&self, t: f64) -> f64 {
        t * t
    }
    fn slope(&self, t: f64) -> f64 {
        2.0 * t
    }
    fn curvature(&self, _t: f64) -> f64 {
        2.0
    }
}

/// Sufficient leak-rate threshold ε / (2 sup |h|) under which the
/// perturbative solver's F is strictly increasing, with ε estimated as the
/// smallest of h'/d' and h''/d'' over a sample of (0, diameter]. This is the
/// proof's sufficient bound and may be conservative.
pub fn perturbative_threshold(
    h: &dyn ScalarCurve,
    d: &dyn ScalarCurve,
    diameter: f64,
    samples: usize,
) -> f64 {
    let n = samples.max(8);
    let mut eps = f64::INFINITY;
    let mut sup_h = 0.0f64;
    for t in 1..=n {
        let z = diameter * t as f64 / n as f64;
        sup_h = sup_h.max(h.value(z).abs());
        let ds = d.slope(z);
        if ds > 1e-15 {
            eps = eps.min(h.slope(z) / ds);
        }
        let dc = d.curvature(z);
        if dc > 1e-15 {
            eps = eps.min(h.curvature(z) / dc);
        }
    }
    if sup_h == 0.0 {
        return f64::INFINITY;
    }
    eps / (2.0 * sup_h)
}

/// Solves the perturbative characteristic equation
/// F(z) = h'(z) + k d'(z)(h(z) − φ(x)) = |∇φ(x)| by bisection on
/// [0, diameter] and returns y = x − z ∇φ/|∇φ|.
pub fn perturbative_map_solve(
    x: &[f64],
    phi_x: f64,
    grad_phi_x: &[f64],
    h: &dyn ScalarCurve,
    d: &dyn ScalarCurve,
    k: f64,
    diameter: f64,
) -> Result<Vec<f64>, Error> {
    if grad_phi_x.len() != x.len() {
        return Err(Error::DimensionMismatch {
            context: "gradient vs point",
            expected: x.len(),
            got: grad_phi_x.len(),
        });
    }
    if k < 0.0 || diameter <= 0.0 {
        return Err(Error::PreconditionViolated {
            what: "k must be nonnegative and the diameter positive".into(),
        });
    }
    let g = norm(grad_phi_x);
    if g == 0.0 {
        return Ok(x.to_vec());
    }
    let f = |z: f64| h.slope(z) + k * d.slope(z) * (h.value(z) - phi_x);
    if f(diameter) < g {
        return Err(Error::BracketFailure {
            detail: format!(
                "|∇φ| = {g} exceeds F(diameter) = {}; target would leave the domain",
                f(diameter)
            ),
        });
    }
    let mut lo = 0.0;
    let mut hi = diameter;
    while hi - lo > Z_TOL {
        let mid = 0.5 * (lo + hi);
        if f(mid) < g {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let z = 0.5 * (lo + hi);
    Ok(x.iter()
        .zip(grad_phi_x)
        .map(|(xi, gi)| xi - z * gi / g)
        .collect())
}

/// Deviation of the normalized m-weighted pushforward of μ under T from ν.
#[derive(Debug, Clone)]
pub struct PushforwardReport {
    /// Total-variation distance ½ Σ |T♯(mμ)/Z − ν|.
    pub total_variation: f64,
    /// Largest single-point deviation.
    pub max_deviation: f64,
    pub retained_mass: f64,
}

pub fn map_pushforward_check(
    map: &TransportMap,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    mass: &MassChangeMatrix,
) -> Result<PushforwardReport, Error> {
    if map.assignment.len() != mu.len() {
        return Err(Error::DimensionMismatch {
            context: "map vs mu",
            expected: mu.len(),
            got: map.assignment.len(),
        });
    }
    let mut pushed = vec![0.0; nu.len()];
    let mut z = 0.0;
    for (i, target) in map.assignment.iter().enumerate() {
        if mu.weights[i] <= 0.0 {
            continue;
        }
        let j = target.ok_or_else(|| Error::PreconditionViolated {
            what: format!("map undefined on source point {i} with positive mass"),
        })?;
        let w = mu.weights[i] * mass.factor(i, j);
        pushed[j] += w;
        z += w;
    }
    if z <= 0.0 {
        return Err(Error::Internal("pushforward retained no mass".into()));
    }
    let mut tv = 0.0;
    let mut max_dev = 0.0f64;
    for (p, w) in pushed.iter().zip(&nu.weights) {
        let d = (p / z - w).abs();
        tv += d;
        max_dev = max_dev.max(d);
    }
    Ok(PushforwardReport {
        total_variation: 0.5 * tv,
        max_deviation: max_dev,
        retained_mass: z,
    })
}
