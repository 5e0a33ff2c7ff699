//! JSON schemas and CSV import/export for the toolkit's file interfaces.
//!
//! Numbers are serialized with the shortest decimal representation that
//! round-trips to the same binary value, so emitting and re-reading a report
//! reproduces identical numbers bit for bit.

use crate::duality::{DualPotentials, DualityCertificate, TightSupportSet};
use crate::dynamics::DensitySnapshot;
use crate::error::Error;
use crate::maps::{DualTransportMap, TransportMap};
use crate::market::{Edge, MarketGraph, Portfolio, TargetProportions};
use crate::measure::{CostMatrix, DiscreteMeasure, MassChangeMatrix, Point, TransportPlan};
use crate::solver::{NcotSolution, SweepPoint};
use serde::{Deserialize, Serialize};

/// A transport instance as stored on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceJson {
    pub mu: MeasureJson,
    pub nu: MeasureJson,
    pub cost: Vec<Vec<f64>>,
    pub mass_change: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Vec<Vec<bool>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureJson {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl From<&DiscreteMeasure> for MeasureJson {
    fn from(m: &DiscreteMeasure) -> Self {
        Self {
            points: m.points.clone(),
            weights: m.weights.clone(),
        }
    }
}

/// Validated instance ready for the solver.
pub struct Instance {
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
    pub cost: CostMatrix,
    pub mass: MassChangeMatrix,
}

pub fn parse_instance(text: &str) -> Result<Instance, Error> {
    let raw: InstanceJson = serde_json::from_str(text)
        .map_err(|e| Error::InvalidInput(format!("instance JSON: {e}")))?;
    instance_from_json(raw)
}

pub fn instance_from_json(raw: InstanceJson) -> Result<Instance, Error> {
    let mu = DiscreteMeasure::new(raw.mu.points, raw.mu.weights)?;
    let nu = DiscreteMeasure::new(raw.nu.points, raw.nu.weights)?;
    let cost = match raw.mask {
        Some(mask) => CostMatrix::masked(raw.cost, mask)?,
        None => CostMatrix::dense(raw.cost)?,
    };
    let mass = MassChangeMatrix::dense(raw.mass_change)?;
    Ok(Instance { mu, nu, cost, mass })
}

pub fn instance_to_json(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostMatrix,
    mass: &MassChangeMatrix,
) -> InstanceJson {
    let n_t = nu.len();
    let cost_rows: Vec<Vec<f64>> = (0..mu.len())
        .map(|i| {
            (0..n_t)
                .map(|j| {
                    if cost.admissible(i, j) {
                        cost.cost(i, j)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let mask_rows: Vec<Vec<bool>> = (0..mu.len())
        .map(|i| (0..n_t).map(|j| cost.admissible(i, j)).collect())
        .collect();
    let all_open = mask_rows.iter().flatten().all(|&b| b);
    let mass_rows: Vec<Vec<f64>> = (0..mu.len())
        .map(|i| (0..n_t).map(|j| mass.factor(i, j)).collect())
        .collect();
    InstanceJson {
        mu: MeasureJson::from(mu),
        nu: MeasureJson::from(nu),
        cost: cost_rows,
        mass_change: mass_rows,
        mask: if all_open { None } else { Some(mask_rows) },
    }
}

/// Solver output: {"plan": [[...]], "Z": ..., "value": ..., "status": ...}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionJson {
    pub plan: Vec<Vec<f64>>,
    #[serde(rename = "Z")]
    pub z: f64,
    pub value: f64,
    pub status: String,
}

impl SolutionJson {
    pub fn from_solution(sol: &NcotSolution) -> Self {
        Self {
            plan: sol.plan.rows(),
            z: sol.retained_mass,
            value: sol.optimal_value,
            status: "optimal".to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialsJson {
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    /// Normalization shift applied to φ (0 when read off LP duals).
    pub k: f64,
}

impl PotentialsJson {
    pub fn from_potentials(pot: &DualPotentials, k: f64) -> Self {
        Self {
            phi: pot.phi.clone(),
            psi: pot.psi.clone(),
            k,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateJson {
    pub gap: f64,
    pub max_violation: f64,
    pub accepted: bool,
    /// Pairs where the dual inequality is tight.
    pub tight_pairs: Vec<(usize, usize)>,
}

impl CertificateJson {
    pub fn new(cert: &DualityCertificate, tight: &TightSupportSet) -> Self {
        Self {
            gap: cert.gap,
            max_violation: cert.max_violation,
            accepted: cert.accepted,
            tight_pairs: tight.pairs.iter().map(|p| (p.source, p.target)).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapJson {
    /// Target index per source point; null off the support.
    pub assignment: Vec<Option<usize>>,
    pub direction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
}

impl MapJson {
    pub fn primal(map: &TransportMap) -> Self {
        Self {
            assignment: map.assignment.clone(),
            direction: "primal".into(),
            lambda: None,
        }
    }

    pub fn dual(map: &DualTransportMap) -> Self {
        Self {
            assignment: map.assignment.clone(),
            direction: "dual".into(),
            lambda: Some(map.lambda.clone()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPointJson {
    pub z: f64,
    /// null when the fixed-mass problem is infeasible at this z.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepJson {
    pub points: Vec<SweepPointJson>,
    pub min_value: Option<f64>,
    pub ncot_value: f64,
    #[serde(rename = "Z_star")]
    pub z_star: f64,
}

impl SweepJson {
    pub fn new(points: &[SweepPoint], ncot_value: f64, z_star: f64) -> Self {
        let min_value = points
            .iter()
            .filter_map(|p| p.value)
            .fold(None, |acc: Option<f64>, v| {
                Some(acc.map_or(v, |a| a.min(v)))
            });
        Self {
            points: points
                .iter()
                .map(|p| SweepPointJson {
                    z: p.z,
                    value: p.value,
                })
                .collect(),
            min_value,
            ncot_value,
            z_star,
        }
    }
}

/// Market file: {"n": N, "edges": [{"from": i, "to": j, "price": P}]}.
/// Assets are indexed from 0; asset 0 is the numeraire convention used by
/// the pricing and rebalancing commands.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarketJson {
    pub n: usize,
    pub edges: Vec<Edge>,
}

pub fn parse_market(text: &str) -> Result<MarketGraph, Error> {
    let raw: MarketJson =
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("market JSON: {e}")))?;
    MarketGraph::new(raw.n, raw.edges)
}

pub fn market_to_json(market: &MarketGraph) -> MarketJson {
    MarketJson {
        n: market.n,
        edges: market.edges.clone(),
    }
}

pub fn parse_portfolio(text: &str) -> Result<Portfolio, Error> {
    #[derive(Deserialize)]
    struct Raw {
        units: Vec<f64>,
    }
    let raw: Raw = serde_json::from_str(text)
        .map_err(|e| Error::InvalidInput(format!("portfolio JSON: {e}")))?;
    Portfolio::new(raw.units)
}

pub fn parse_target(text: &str) -> Result<TargetProportions, Error> {
    #[derive(Deserialize)]
    struct Raw {
        nu: Vec<f64>,
    }
    let raw: Raw =
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("target JSON: {e}")))?;
    TargetProportions::new(raw.nu)
}

/// One executable leg of a trade report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowJson {
    pub from: usize,
    pub to: usize,
    pub amount: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RebalanceJson {
    pub flows: Vec<FlowJson>,
    pub cost: f64,
    pub post_units: Vec<f64>,
    pub post_proportions: Vec<f64>,
    pub portfolio_value: f64,
    pub transport_value: f64,
    #[serde(rename = "Z")]
    pub z: f64,
    pub certificate_gap: f64,
}

/// Plan rows serialized for reports.
pub fn plan_rows(plan: &TransportPlan) -> Vec<Vec<f64>> {
    plan.rows()
}

/// Matrix CSV: a header row of target labels, then numeric rows.
pub fn matrix_from_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), Error> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidInput("CSV is empty".into()))?;
    let labels: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let row: Result<Vec<f64>, Error> = line
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidInput(format!("CSV row {}: {e}", lineno + 2)))
            })
            .collect();
        let row = row?;
        if row.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "CSV row {} has {} fields, header has {}",
                lineno + 2,
                row.len(),
                labels.len()
            )));
        }
        rows.push(row);
    }
    Ok((labels, rows))
}

pub fn matrix_to_csv(labels: &[String], rows: &[Vec<f64>]) -> String {
    let mut out = labels.join(",");
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Snapshot CSV: t, particle id, one column per coordinate, weight.
pub fn snapshots_to_csv(snapshots: &[DensitySnapshot]) -> String {
    let dim = snapshots
        .first()
        .and_then(|s| s.positions.first())
        .map_or(1, |p| p.len());
    let mut out = String::from("t,particle");
    for d in 0..dim {
        out.push_str(&format!(",x{d}"));
    }
    out.push_str(",weight\n");
    for snap in snapshots {
        for (p, (pos, w)) in snap.positions.iter().zip(&snap.weights).enumerate() {
            out.push_str(&format!("{}", snap.t));
            out.push_str(&format!(",{p}"));
            for c in pos {
                out.push_str(&format!(",{c}"));
            }
            out.push_str(&format!(",{w}\n"));
        }
    }
    out
}
