//! Built-in demo instances.
//!
//! The workhorse is a 1-d leaky-transport grid: cell centers on [0, 1], a
//! smooth strictly positive source profile on the left block of cells, and a
//! target equal to the source shifted right by a whole number of cells. Along
//! the shift every pair moves the same distance, so the mass-change factor is
//! constant on the matched pairs and the same ν works for every leak rate k;
//! the monotone cell-to-cell shift is then the optimal plan, which gives the
//! map and flow demos an exactly known answer to stand on.

use crate::error::Error;
use crate::measure::{CostMatrix, DiscreteMeasure, MassChangeMatrix};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A grid transport instance with coordinates attached.
#[derive(Debug, Clone)]
pub struct GridInstance {
    /// Source cell centers (support of μ).
    pub xs: Vec<f64>,
    /// Target cell centers (support of ν).
    pub ys: Vec<f64>,
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
    pub cost: CostMatrix,
    pub mass: MassChangeMatrix,
    /// Leak rate of m = 1 − (k/2)|x−y|².
    pub k: f64,
    pub cell_width: f64,
    /// The common transport distance of the matched pairs.
    pub shift: f64,
}

/// Scaling of the quadratic cost |x−y|².
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadraticCost {
    /// ½|x−y|², the convention of the characteristic-equation solver.
    Half,
    /// |x−y|², the dynamic-formulation convention with exponent a = 2.
    Plain,
}

/// Builds the shifted leaky grid: `n_cells` cells on [0, 1], target equal to
/// the source shifted right by `shift_cells`, quadratic cost and quadratic
/// leaky mass change with rate `k`. The seed perturbs the source profile
/// (deterministically); seed 0 is the canonical demo.
pub fn leaky_shift_instance(
    n_cells: usize,
    k: f64,
    shift_cells: usize,
    cost_scale: QuadraticCost,
    seed: u64,
) -> Result<GridInstance, Error> {
    if n_cells < 4 {
        return Err(Error::InvalidInput("grid needs at least 4 cells".into()));
    }
    if shift_cells == 0 || shift_cells >= n_cells {
        return Err(Error::InvalidInput(format!(
            "shift must lie strictly between 0 and {n_cells} cells"
        )));
    }
    if !(0.0..2.0).contains(&k) {
        return Err(Error::InvalidInput(format!(
            "leak rate k = {k} leaves no positive mass-change factor on [0, 1]"
        )));
    }
    let h = 1.0 / n_cells as f64;
    let support = n_cells - shift_cells;
    let xs: Vec<f64> = (0..support).map(|i| (i as f64 + 0.5) * h).collect();
    let ys: Vec<f64> = (0..support)
        .map(|i| ((i + shift_cells) as f64 + 0.5) * h)
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amplitude: f64 = rng.gen_range(0.2..0.6);
    let frequency: f64 = if rng.gen_bool(0.5) { 1.0 } else { 2.0 };
    let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let mut weights: Vec<f64> = (0..support)
        .map(|i| {
            let t = i as f64 / (support - 1) as f64;
            1.0 + amplitude * (std::f64::consts::TAU * frequency * t + phase).sin()
        })
        .collect();
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }

    let mu = DiscreteMeasure::on_line(xs.clone(), weights.clone())?;
    let nu = DiscreteMeasure::on_line(ys.clone(), weights)?;

    let scale = match cost_scale {
        QuadraticCost::Half => 0.5,
        QuadraticCost::Plain => 1.0,
    };
    let mut cost_rows = vec![vec![0.0; support]; support];
    let mut mass_rows = vec![vec![0.0; support]; support];
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in ys.iter().enumerate() {
            let d2 = (x - y) * (x - y);
            cost_rows[i][j] = scale * d2;
            let m = 1.0 - 0.5 * k * d2;
            if m <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "k = {k} drives m(x,y) to {m} at distance {}",
                    d2.sqrt()
                )));
            }
            mass_rows[i][j] = m;
        }
    }
    Ok(GridInstance {
        xs,
        ys,
        mu,
        nu,
        cost: CostMatrix::dense(cost_rows)?,
        mass: MassChangeMatrix::dense(mass_rows)?,
        k,
        cell_width: h,
        shift: shift_cells as f64 * h,
    })
}
