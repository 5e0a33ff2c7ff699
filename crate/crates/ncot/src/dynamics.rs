//! Desk-scale verification of the dynamic formulation.
//!
//! Particles start at the source points, follow straight lines to their map
//! targets, and carry the m-weighted mass of their origin. For the
//! straight-line flow the velocity is time-constant per particle, so the
//! kinetic cost Σ ∫ |v|^a dμ dt collapses to Σ_x μ_x |T(x) − x|^a with no
//! quadrature error — the static transport cost of the map plan. Any other
//! admissible flow costs at least as much (Jensen), and the Eulerian mass
//! balance dM/dt = Σ μ_x ∇_y m(x, X(t,x)) · v(t,x) is checked with central
//! differences in time.
//!
//! The Lagrangian particle form keeps X⁻¹(t, ·) available for free (each
//! particle remembers its origin), so the source term needs no inversion.

use crate::error::Error;
use crate::maps::TransportMap;
use crate::measure::DiscreteMeasure;

/// A mass-change factor evaluated off-grid, as required along trajectories.
pub trait MassChangeField {
    fn factor(&self, x: &[f64], y: &[f64]) -> f64;

    /// Gradient in the destination argument by central finite differences.
    fn grad_dest(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut grad = Vec::with_capacity(y.len());
        let mut probe = y.to_vec();
        for i in 0..y.len() {
            let h = 6e-6 * (1.0 + y[i].abs());
            probe[i] = y[i] + h;
            let up = self.factor(x, &probe);
            probe[i] = y[i] - h;
            let down = self.factor(x, &probe);
            probe[i] = y[i];
            grad.push((up - down) / (2.0 * h));
        }
        grad
    }
}

/// m ≡ 1.
#[derive(Debug, Clone, Copy)]
pub struct Conservative;

impl MassChangeField for Conservative {
    fn factor(&self, _x: &[f64], _y: &[f64]) -> f64 {
        1.0
    }
}

/// m(x, y) = max{0, 1 − (k/2)|x − y|²}: uniform-rate loss with cutoff.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticLeaky {
    pub k: f64,
}

impl MassChangeField for QuadraticLeaky {
    fn factor(&self, x: &[f64], y: &[f64]) -> f64 {
        (1.0 - 0.5 * self.k * dist_sq(x, y)).max(0.0)
    }
}

/// m(x, y) = exp(−(k/2)|x − y|²): loss proportional to the remaining mass.
#[derive(Debug, Clone, Copy)]
pub struct ExpQuadraticLeaky {
    pub k: f64,
}

impl MassChangeField for ExpQuadraticLeaky {
    fn factor(&self, x: &[f64], y: &[f64]) -> f64 {
        (-0.5 * self.k * dist_sq(x, y)).exp()
    }
}

fn dist_sq(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn dist(x: &[f64], y: &[f64]) -> f64 {
    dist_sq(x, y).sqrt()
}

/// Straight-line Lagrangian flow of a transport map: X(t, x) = x + t(T(x) − x).
#[derive(Debug, Clone)]
pub struct FlowField {
    sources: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
    weights: Vec<f64>,
    /// Cost exponent a ≥ 1 in |v|^a.
    pub exponent: f64,
    /// Strictly increasing, from 0 to 1.
    pub time_grid: Vec<f64>,
}

impl FlowField {
    /// Builds the flow from a map between coordinate-carrying measures. Only
    /// source points with positive mass become particles; the map must cover
    /// all of them.
    pub fn straight_line(
        map: &TransportMap,
        mu: &DiscreteMeasure,
        nu: &DiscreteMeasure,
        exponent: f64,
        time_grid: Vec<f64>,
    ) -> Result<Self, Error> {
        if exponent < 1.0 {
            return Err(Error::PreconditionViolated {
                what: format!("cost exponent must be ≥ 1, got {exponent}"),
            });
        }
        validate_time_grid(&time_grid)?;
        let src = mu.coords().ok_or_else(|| Error::PreconditionViolated {
            what: "source measure carries no coordinates".into(),
        })?;
        let tgt = nu.coords().ok_or_else(|| Error::PreconditionViolated {
            what: "target measure carries no coordinates".into(),
        })?;
        let mut sources = Vec::new();
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        for (i, &w) in mu.weights.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            let j = map.target(i).ok_or_else(|| Error::PreconditionViolated {
                what: format!("map undefined on source point {i} with positive mass"),
            })?;
            sources.push(src[i].to_vec());
            targets.push(tgt[j].to_vec());
            weights.push(w);
        }
        Ok(Self {
            sources,
            targets,
            weights,
            exponent,
            time_grid,
        })
    }

    pub fn particle_count(&self) -> usize {
        self.weights.len()
    }

    pub fn position(&self, particle: usize, t: f64) -> Vec<f64> {
        self.sources[particle]
            .iter()
            .zip(&self.targets[particle])
            .map(|(x, y)| x + t * (y - x))
            .collect()
    }

    /// Velocity is T(x) − x, independent of time.
    pub fn velocity(&self, particle: usize) -> Vec<f64> {
        self.sources[particle]
            .iter()
            .zip(&self.targets[particle])
            .map(|(x, y)| y - x)
            .collect()
    }
}

fn validate_time_grid(grid: &[f64]) -> Result<(), Error> {
    let ok = grid.len() >= 2
        && grid.first() == Some(&0.0)
        && grid.last() == Some(&1.0)
        && grid.windows(2).all(|w| w[1] > w[0]);
    if ok {
        Ok(())
    } else {
        Err(Error::PreconditionViolated {
            what: "time grid must increase strictly from 0 to 1".into(),
        })
    }
}

/// Uniform grid with `steps` intervals on [0, 1].
pub fn uniform_time_grid(steps: usize) -> Vec<f64> {
    let steps = steps.max(1);
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}

/// Particle positions and m-weighted masses at one time.
#[derive(Debug, Clone)]
pub struct DensitySnapshot {
    pub t: f64,
    pub positions: Vec<Vec<f64>>,
    /// μ_x · m(x, X(t, x)) per particle.
    pub weights: Vec<f64>,
    pub total_mass: f64,
}

/// Evaluates the flow on its time grid, weighting each trajectory by the
/// mass-change factor between its origin and its current position.
pub fn straight_line_flow(flow: &FlowField, m: &dyn MassChangeField) -> Vec<DensitySnapshot> {
    flow.time_grid
        .iter()
        .map(|&t| {
            let positions: Vec<Vec<f64>> = (0..flow.particle_count())
                .map(|p| flow.position(p, t))
                .collect();
            let weights: Vec<f64> = positions
                .iter()
                .zip(&flow.sources)
                .zip(&flow.weights)
                .map(|((pos, src), w)| w * m.factor(src, pos))
                .collect();
            let total_mass = weights.iter().sum();
            DensitySnapshot {
                t,
                positions,
                weights,
                total_mass,
            }
        })
        .collect()
}

/// Kinetic cost of the straight-line flow. The velocity is constant per
/// particle, so the time integral is exact: Σ_x μ_x |T(x) − x|^a.
pub fn kinetic_cost(flow: &FlowField) -> f64 {
    (0..flow.particle_count())
        .map(|p| {
            let v = dist(&flow.sources[p], &flow.targets[p]);
            flow.weights[p] * v.powf(flow.exponent)
        })
        .sum()
}

/// A piecewise-linear multi-segment flow, for exercising the lower bound
/// with deliberately suboptimal trajectories.
#[derive(Debug, Clone)]
pub struct PiecewiseFlow {
    /// Strictly increasing knot times from 0 to 1.
    pub knot_times: Vec<f64>,
    /// `paths[p][k]` is the position of particle p at knot k.
    pub paths: Vec<Vec<Vec<f64>>>,
    pub weights: Vec<f64>,
    pub exponent: f64,
}

impl PiecewiseFlow {
    /// Σ_p w_p Σ_seg |Δx/Δt|^a Δt, exact per linear segment.
    pub fn cost(&self) -> f64 {
        let mut total = 0.0;
        for (path, w) in self.paths.iter().zip(&self.weights) {
            for k in 0..self.knot_times.len() - 1 {
                let dt = self.knot_times[k + 1] - self.knot_times[k];
                let speed = dist(&path[k + 1], &path[k]) / dt;
                total += w * speed.powf(self.exponent) * dt;
            }
        }
        total
    }
}

/// Checks the Jensen direction: any flow whose endpoint realizes an
/// admissible target distribution costs at least the static optimum.
///
/// Endpoints must land on target points (within `pos_tol`); their m-weighted
/// pushforward must reproduce ν within `tv_tol` in total variation.
pub fn jensen_lower_bound_check(
    flow: &PiecewiseFlow,
    m: &dyn MassChangeField,
    nu: &DiscreteMeasure,
    static_value: f64,
    pos_tol: f64,
    tv_tol: f64,
) -> Result<bool, Error> {
    let tgt = nu.coords().ok_or_else(|| Error::PreconditionViolated {
        what: "target measure carries no coordinates".into(),
    })?;
    let mut pushed = vec![0.0; nu.len()];
    let mut z = 0.0;
    for (path, w) in flow.paths.iter().zip(&flow.weights) {
        let start = path.first().expect("nonempty path");
        let end = path.last().expect("nonempty path");
        let (j, d) = tgt
            .iter()
            .enumerate()
            .map(|(j, t)| (j, dist(end, t)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty target");
        if d > pos_tol {
            return Err(Error::EndpointInfeasible { deviation: d });
        }
        let mass = w * m.factor(start, end);
        pushed[j] += mass;
        z += mass;
    }
    if z <= 0.0 {
        return Err(Error::EndpointInfeasible {
            deviation: f64::INFINITY,
        });
    }
    let tv: f64 = pushed
        .iter()
        .zip(&nu.weights)
        .map(|(p, w)| (p / z - w).abs())
        .sum::<f64>()
        * 0.5;
    if tv > tv_tol {
        return Err(Error::EndpointInfeasible { deviation: tv });
    }
    Ok(flow.cost() >= static_value - 1e-9)
}

/// Residuals of d/dt M(t) against the Lagrangian source term at interior
/// grid times.
#[derive(Debug, Clone)]
pub struct MassBalanceReport {
    pub times: Vec<f64>,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
}

/// Compares the central-difference derivative of the retained mass
/// M(t) = Σ μ_x m(x, X(t,x)) with the source integral
/// Σ μ_x ∇_y m(x, X(t,x)) · v(t,x) — the particle form of the Eulerian
/// source σ = ϱ ∇ log m · v.
pub fn mass_balance_check(flow: &FlowField, m: &dyn MassChangeField) -> MassBalanceReport {
    let grid = &flow.time_grid;
    let mass_at = |t: f64| -> f64 {
        (0..flow.particle_count())
            .map(|p| flow.weights[p] * m.factor(&flow.sources[p], &flow.position(p, t)))
            .sum()
    };
    let source_at = |t: f64| -> f64 {
        (0..flow.particle_count())
            .map(|p| {
                let pos = flow.position(p, t);
                let grad = m.grad_dest(&flow.sources[p], &pos);
                let v = flow.velocity(p);
                flow.weights[p] * grad.iter().zip(&v).map(|(g, vi)| g * vi).sum::<f64>()
            })
            .sum()
    };
    let masses: Vec<f64> = grid.iter().map(|&t| mass_at(t)).collect();
    let mut times = Vec::new();
    let mut residuals = Vec::new();
    let mut max_residual = 0.0f64;
    for j in 1..grid.len() - 1 {
        let dm = (masses[j + 1] - masses[j - 1]) / (grid[j + 1] - grid[j - 1]);
        let r = (dm - source_at(grid[j])).abs();
        times.push(grid[j]);
        residuals.push(r);
        max_residual = max_residual.max(r);
    }
    MassBalanceReport {
        times,
        residuals,
        max_residual,
    }
}
