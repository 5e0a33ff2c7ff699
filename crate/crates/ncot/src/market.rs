//! Market graphs and optimal portfolio rebalancing.
//!
//! A market is a directed priced graph: an edge (i, j) trades one unit of
//! asset i into P(i, j) units of asset j. No arbitrage means every directed
//! cycle has price product ≤ 1, which is exactly the absence of negative
//! cycles under the weights w = −log P, so Bellman–Ford both detects
//! arbitrage and constructs consistent prices q (P(i,j) ≤ q_i/q_j on every
//! edge, q from exponentiated shortest-path distances).
//!
//! Rebalancing a long-only portfolio x to target value proportions ν at
//! lowest cost reduces to a non-conservative transport problem on the asset
//! set: μ_i = q_i x_i / v is the current value distribution, the cost
//! c(i,j) = 1 − (q_j/q_i) P(i,j) is the proportional value lost on the edge,
//! and m(i,j) = (q_j/q_i) P(i,j) is the proportion of value preserved (so
//! c + m = 1 on edges and c(i,i) = 0, m(i,i) = 1). Trades and plans convert
//! into each other by ξ(i,j) = (v/q_i) π(i,j) off the diagonal, and the
//! trade cost satisfies C(ξ) = v · Σ c π.

use crate::duality::{certify_duality, potentials_from_lp, DualityCertificate};
use crate::error::Error;
use crate::measure::{CostMatrix, DiscreteMeasure, MassChangeMatrix, TransportPlan};
use crate::solver::{solve_ncot, NcotSolution};
use serde::{Deserialize, Serialize};

/// Relative slack used when comparing logarithmic path lengths; cycles
/// within this tolerance of break-even count as arbitrage-free.
const LOG_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub price: f64,
}

/// Directed priced graph over assets 0..n. P(i,i) = 1 implicitly; pairs
/// without an edge cannot be traded directly.
#[derive(Debug, Clone)]
pub struct MarketGraph {
    pub n: usize,
    pub edges: Vec<Edge>,
    /// Dense price lookup, 0.0 where no edge exists.
    prices: Vec<f64>,
}

impl MarketGraph {
    pub fn new(n: usize, edges: Vec<Edge>) -> Result<Self, Error> {
        if n == 0 {
            return Err(Error::InvalidInput(
                "market needs at least one asset".into(),
            ));
        }
        let mut prices = vec![0.0; n * n];
        for (idx, e) in edges.iter().enumerate() {
            if e.from >= n || e.to >= n {
                return Err(Error::InvalidInput(format!(
                    "edge {idx} references asset outside 0..{n}"
                )));
            }
            if e.from == e.to {
                return Err(Error::InvalidInput(format!(
                    "edge {idx} is a self-loop; P(i,i) = 1 is implicit"
                )));
            }
            if !(e.price.is_finite() && e.price > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "edge {idx} has non-positive price {}",
                    e.price
                )));
            }
            if prices[e.from * n + e.to] != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "duplicate edge ({}, {})",
                    e.from, e.to
                )));
            }
            prices[e.from * n + e.to] = e.price;
        }
        Ok(Self { n, edges, prices })
    }

    /// Star-shaped market around numeraire 0: asset i sells for `bids[i-1]`
    /// units of the numeraire and costs `asks[i-1]` units to buy.
    pub fn star(bids: &[f64], asks: &[f64]) -> Result<Self, Error> {
        if bids.len() != asks.len() {
            return Err(Error::DimensionMismatch {
                context: "star market bid/ask",
                expected: bids.len(),
                got: asks.len(),
            });
        }
        let n = bids.len() + 1;
        let mut edges = Vec::new();
        for (i, (&b, &a)) in bids.iter().zip(asks).enumerate() {
            edges.push(Edge {
                from: i + 1,
                to: 0,
                price: b,
            });
            edges.push(Edge {
                from: 0,
                to: i + 1,
                price: 1.0 / a,
            });
        }
        Self::new(n, edges)
    }

    /// Quoted price of a directed pair; None when the pair is not tradable.
    pub fn price(&self, from: usize, to: usize) -> Option<f64> {
        if from == to {
            return Some(1.0);
        }
        let p = self.prices[from * self.n + to];
        if p > 0.0 {
            Some(p)
        } else {
            None
        }
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        from != to && self.prices[from * self.n + to] > 0.0
    }
}

/// Connectivity of the undirected support graph.
pub fn check_connectivity(market: &MarketGraph) -> bool {
    let n = market.n;
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for e in &market.edges {
            let next = if e.from == u && !seen[e.to] {
                Some(e.to)
            } else if e.to == u && !seen[e.from] {
                Some(e.from)
            } else {
                None
            };
            if let Some(v) = next {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen.iter().all(|&s| s)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArbitrageCheck {
    NoArbitrage,
    /// A directed cycle whose price product exceeds 1, as an edge list.
    Cycle(Vec<(usize, usize)>),
}

impl ArbitrageCheck {
    pub fn is_arbitrage_free(&self) -> bool {
        matches!(self, ArbitrageCheck::NoArbitrage)
    }
}

/// Bellman–Ford on w = −log P from a virtual source attached to every
/// vertex. A relaxable edge after n−1 rounds exposes a negative cycle, i.e.
/// a cycle with price product > 1; the concrete cycle is returned.
pub fn detect_arbitrage(market: &MarketGraph) -> ArbitrageCheck {
    let n = market.n;
    let mut dist = vec![0.0f64; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let weight = |e: &Edge| -e.price.ln();

    let mut touched = None;
    for round in 0..n {
        let mut improved = false;
        for e in &market.edges {
            let cand = dist[e.from] + weight(e);
            if cand < dist[e.to] - LOG_TOL * (1.0 + dist[e.to].abs()) {
                dist[e.to] = cand;
                pred[e.to] = Some(e.from);
                improved = true;
                if round == n - 1 {
                    touched = Some(e.to);
                }
            }
        }
        if !improved {
            return ArbitrageCheck::NoArbitrage;
        }
    }
    let Some(mut v) = touched else {
        return ArbitrageCheck::NoArbitrage;
    };
    // Walk predecessors n times to land inside the cycle, then collect it.
    for _ in 0..n {
        v = pred[v].expect("relaxed vertex has a predecessor");
    }
    let start = v;
    let mut vertices = vec![start];
    let mut u = pred[start].expect("cycle vertex has a predecessor");
    while u != start {
        vertices.push(u);
        u = pred[u].expect("cycle vertex has a predecessor");
    }
    vertices.reverse();
    let mut cycle = Vec::with_capacity(vertices.len());
    let mut product = 1.0;
    for i in 0..vertices.len() {
        let from = vertices[i];
        let to = vertices[(i + 1) % vertices.len()];
        product *= market.price(from, to).expect("cycle follows edges");
        cycle.push((from, to));
    }
    if product > 1.0 + LOG_TOL {
        ArbitrageCheck::Cycle(cycle)
    } else {
        log::warn!("discarded numerically marginal cycle with product {product}");
        ArbitrageCheck::NoArbitrage
    }
}

/// Price product along an edge list.
pub fn cycle_price_product(market: &MarketGraph, cycle: &[(usize, usize)]) -> Option<f64> {
    cycle
        .iter()
        .try_fold(1.0, |acc, &(i, j)| market.price(i, j).map(|p| acc * p))
}

/// Positive per-asset values with q_0 = 1, consistent with the market:
/// P(i,j) ≤ q_i / q_j on every edge.
#[derive(Debug, Clone)]
pub struct PriceVector {
    pub q: Vec<f64>,
    /// log q, kept alongside so consistency scans can run in log space
    /// exactly as Bellman–Ford left them.
    pub log_q: Vec<f64>,
}

impl PriceVector {
    pub fn new(q: Vec<f64>) -> Result<Self, Error> {
        if q.is_empty() || (q[0] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(
                "price vector must start with the numeraire value 1".into(),
            ));
        }
        for (i, v) in q.iter().enumerate() {
            if !(v.is_finite() && *v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "price vector entry {i} must be positive, got {v}"
                )));
            }
        }
        let log_q = q.iter().map(|v| v.ln()).collect();
        Ok(Self { q, log_q })
    }

    /// Worst violation of log P(i,j) ≤ log q_i − log q_j over the edges;
    /// ≤ 0 means the vector is consistent.
    pub fn consistency_violation(&self, market: &MarketGraph) -> f64 {
        market
            .edges
            .iter()
            .map(|e| e.price.ln() - (self.log_q[e.from] - self.log_q[e.to]))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_consistent(&self, market: &MarketGraph) -> bool {
        self.consistency_violation(market) <= LOG_TOL
    }
}

/// Shortest-path Bellman–Ford under w = −log P. `source = None` attaches a
/// virtual source to every vertex (distances all start at zero).
fn bellman_ford(
    market: &MarketGraph,
    source: Option<usize>,
    reversed: bool,
) -> Result<(Vec<f64>, Vec<Option<usize>>), Error> {
    let n = market.n;
    let mut dist = match source {
        Some(s) => {
            let mut d = vec![f64::INFINITY; n];
            d[s] = 0.0;
            d
        }
        None => vec![0.0; n],
    };
    let mut pred: Vec<Option<usize>> = vec![None; n];
    for round in 0..n {
        let mut improved = false;
        for e in &market.edges {
            let (from, to) = if reversed {
                (e.to, e.from)
            } else {
                (e.from, e.to)
            };
            if dist[from].is_infinite() {
                continue;
            }
            let cand = dist[from] - e.price.ln();
            let relax = if dist[to].is_infinite() {
                true
            } else {
                cand < dist[to] - LOG_TOL * (1.0 + dist[to].abs())
            };
            if relax {
                if round == n - 1 {
                    return Err(Error::ArbitragePresent);
                }
                dist[to] = cand;
                pred[to] = Some(from);
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    Ok((dist, pred))
}

/// Consistent prices from shortest-path distances out of the numeraire
/// (q_i = exp φ_i, φ = distances under −log P). When some asset cannot be
/// reached by directed trades from asset 0, the virtual-source distances
/// are used instead and shifted so q_0 = 1; both satisfy every edge
/// inequality whenever no arbitrage exists.
pub fn consistent_prices(market: &MarketGraph) -> Result<PriceVector, Error> {
    let (dist, _) = bellman_ford(market, Some(0), false)?;
    let phi = if dist.iter().all(|d| d.is_finite()) {
        dist
    } else {
        let (all, _) = bellman_ford(market, None, false)?;
        let base = all[0];
        all.into_iter().map(|d| d - base).collect()
    };
    let q = phi.iter().map(|p| p.exp()).collect();
    let pv = PriceVector::new(q)?;
    debug_assert!(pv.is_consistent(market));
    Ok(pv)
}

/// Long-only holdings in units per asset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Portfolio {
    pub units: Vec<f64>,
}

impl Portfolio {
    pub fn new(units: Vec<f64>) -> Result<Self, Error> {
        for (i, u) in units.iter().enumerate() {
            if !u.is_finite() {
                return Err(Error::NonFinite {
                    context: "portfolio units",
                    index: i,
                });
            }
            if *u < 0.0 {
                return Err(Error::NegativeEntry {
                    context: "portfolio units",
                    index: i,
                    value: *u,
                });
            }
        }
        Ok(Self { units })
    }

    pub fn value(&self, q: &PriceVector) -> f64 {
        self.units.iter().zip(&q.q).map(|(u, p)| u * p).sum()
    }

    /// Value proportions q_i x_i / v.
    pub fn proportions(&self, q: &PriceVector) -> Result<Vec<f64>, Error> {
        let v = self.value(q);
        if v <= 0.0 {
            return Err(Error::ZeroValuePortfolio);
        }
        Ok(self
            .units
            .iter()
            .zip(&q.q)
            .map(|(u, p)| u * p / v)
            .collect())
    }
}

/// Target value proportions on the simplex.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetProportions {
    pub nu: Vec<f64>,
}

impl TargetProportions {
    pub fn new(nu: Vec<f64>) -> Result<Self, Error> {
        for (i, v) in nu.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: "target proportions",
                    index: i,
                });
            }
            if *v < 0.0 {
                return Err(Error::NegativeEntry {
                    context: "target proportions",
                    index: i,
                    value: *v,
                });
            }
        }
        let sum: f64 = nu.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::NotProbability { sum, tol: 1e-9 });
        }
        Ok(Self { nu })
    }
}

/// Nonnegative edge flows ξ(i, j) in units of the source asset; zero on the
/// diagonal and off the edge set.
#[derive(Debug, Clone)]
pub struct Trade {
    pub n: usize,
    flows: Vec<f64>,
}

impl Trade {
    pub fn zero(n: usize) -> Self {
        Self {
            n,
            flows: vec![0.0; n * n],
        }
    }

    #[inline]
    pub fn flow(&self, from: usize, to: usize) -> f64 {
        self.flows[from * self.n + to]
    }

    pub fn add_flow(&mut self, from: usize, to: usize, amount: f64) {
        debug_assert_ne!(from, to);
        self.flows[from * self.n + to] += amount;
    }

    pub fn total_flow(&self) -> f64 {
        self.flows.iter().sum()
    }

    pub fn nonzero_flows(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.n;
        self.flows
            .iter()
            .enumerate()
            .filter(|(_, &f)| f != 0.0)
            .map(move |(idx, &f)| (idx / n, idx % n, f))
    }

    /// Admissibility against a market: nonnegative and supported on edges.
    pub fn validate(&self, market: &MarketGraph) -> Result<(), Error> {
        if self.n != market.n {
            return Err(Error::DimensionMismatch {
                context: "trade vs market",
                expected: market.n,
                got: self.n,
            });
        }
        for (i, j, f) in self.nonzero_flows() {
            if f < 0.0 {
                return Err(Error::NegativeEntry {
                    context: "trade flows",
                    index: i * self.n + j,
                    value: f,
                });
            }
            if !market.has_edge(i, j) {
                return Err(Error::PreconditionViolated {
                    what: format!("trade uses non-tradable pair ({i}, {j})"),
                });
            }
        }
        Ok(())
    }
}

/// Change in units per asset: Δx_i = Σ_j P(j,i) ξ(j,i) − Σ_j ξ(i,j).
pub fn trade_delta(trade: &Trade, market: &MarketGraph) -> Vec<f64> {
    let n = market.n;
    let mut delta = vec![0.0; n];
    for (i, j, f) in trade.nonzero_flows() {
        let p = market.price(i, j).unwrap_or(0.0);
        delta[j] += p * f;
        delta[i] -= f;
    }
    delta
}

/// Cost of a trade under consistent prices:
/// C(ξ) = Σ_{(i,j)∈E} (q_i − q_j P(i,j)) ξ(i,j) ≥ 0.
pub fn trade_cost(trade: &Trade, q: &PriceVector, market: &MarketGraph) -> f64 {
    let mut cost = 0.0;
    for (i, j, f) in trade.nonzero_flows() {
        let p = market.price(i, j).unwrap_or(0.0);
        cost += (q.q[i] - q.q[j] * p) * f;
    }
    // Consistency makes every term nonnegative; trim float dust.
    if cost < 0.0 && cost > -1e-12 {
        0.0
    } else {
        cost
    }
}

/// Post-trade position z on a star market, together with the purchase trade
/// realizing it, from a money pot held entirely in the numeraire.
///
/// Solves (diag q + ν (P_a − q)ᵀ) z = pot · ν through the rank-one update in
/// closed form: z = pot · D⁻¹ν / (1 + (P_a − q)ᵀ D⁻¹ ν) with D = diag q.
/// Since z ∝ ν/q, the post-trade value proportions are exactly ν.
pub fn star_feasible_trade(
    money_pot_value: f64,
    nu: &TargetProportions,
    ask_prices: &[f64],
    q: &PriceVector,
) -> Result<(Vec<f64>, Trade), Error> {
    let n = q.q.len();
    if nu.nu.len() != n || ask_prices.len() != n {
        return Err(Error::DimensionMismatch {
            context: "star trade inputs",
            expected: n,
            got: nu.nu.len().min(ask_prices.len()),
        });
    }
    if !(money_pot_value.is_finite() && money_pot_value > 0.0) {
        return Err(Error::PreconditionViolated {
            what: format!("money pot value must be positive, got {money_pot_value}"),
        });
    }
    for i in 0..n {
        if ask_prices[i] < q.q[i] * (1.0 - 1e-12) {
            return Err(Error::PreconditionViolated {
                what: format!(
                    "ask price {} of asset {i} undercuts its consistent value {}",
                    ask_prices[i], q.q[i]
                ),
            });
        }
    }
    let d_inv_nu: Vec<f64> = nu.nu.iter().zip(&q.q).map(|(v, p)| v / p).collect();
    let denom: f64 = 1.0
        + ask_prices
            .iter()
            .zip(&q.q)
            .zip(&d_inv_nu)
            .map(|((a, p), dn)| (a - p) * dn)
            .sum::<f64>();
    let z: Vec<f64> = d_inv_nu
        .iter()
        .map(|dn| money_pot_value * dn / denom)
        .collect();
    for (i, v) in z.iter().enumerate() {
        if *v < 0.0 {
            return Err(Error::NegativeComponent {
                index: i,
                value: *v,
            });
        }
    }
    let mut trade = Trade::zero(n);
    for i in 1..n {
        let units_sold = ask_prices[i] * z[i];
        if units_sold > 0.0 {
            trade.add_flow(0, i, units_sold);
        }
    }
    Ok((z, trade))
}

/// Fixed liquidation/purchase paths: shortest paths under −log P, reusing
/// the Bellman–Ford trees (toward the numeraire on the reversed graph and
/// away from it on the forward graph).
struct NumerairePaths {
    to_numeraire_next: Vec<Option<usize>>,
    from_numeraire_pred: Vec<Option<usize>>,
}

fn numeraire_paths(market: &MarketGraph) -> Result<NumerairePaths, Error> {
    let (_, rev_pred) = bellman_ford(market, Some(0), true)?;
    let (_, fwd_pred) = bellman_ford(market, Some(0), false)?;
    Ok(NumerairePaths {
        to_numeraire_next: rev_pred,
        from_numeraire_pred: fwd_pred,
    })
}

/// Directed path i → 0 as an edge list, following the reversed-graph tree.
fn path_to_numeraire(
    paths: &NumerairePaths,
    mut i: usize,
    n: usize,
) -> Result<Vec<(usize, usize)>, Error> {
    let mut hops = Vec::new();
    while i != 0 {
        let next = paths.to_numeraire_next[i].ok_or(Error::Unreachable { vertex: i })?;
        hops.push((i, next));
        i = next;
        if hops.len() > n {
            return Err(Error::Internal("liquidation path cycles".into()));
        }
    }
    Ok(hops)
}

/// Directed path 0 → i as an edge list, following the forward tree.
fn path_from_numeraire(
    paths: &NumerairePaths,
    i: usize,
    n: usize,
) -> Result<Vec<(usize, usize)>, Error> {
    let mut hops = Vec::new();
    let mut v = i;
    while v != 0 {
        let prev = paths.from_numeraire_pred[v].ok_or(Error::Unreachable { vertex: v })?;
        hops.push((prev, v));
        v = prev;
        if hops.len() > n {
            return Err(Error::Internal("purchase path cycles".into()));
        }
    }
    hops.reverse();
    Ok(hops)
}

fn push_along(
    trade: &mut Trade,
    market: &MarketGraph,
    hops: &[(usize, usize)],
    amount: f64,
) -> f64 {
    let mut units = amount;
    for &(u, v) in hops {
        trade.add_flow(u, v, units);
        units *= market.price(u, v).expect("path follows edges");
    }
    units
}

/// Feasible (not optimal) rebalancing on a general market: liquidate every
/// position into a money pot along fixed paths, then buy the target
/// proportions on the induced hypothetical star market.
pub fn general_feasible_trade(
    market: &MarketGraph,
    x: &Portfolio,
    nu: &TargetProportions,
    q: &PriceVector,
) -> Result<Trade, Error> {
    let n = market.n;
    if x.units.len() != n || nu.nu.len() != n || q.q.len() != n {
        return Err(Error::DimensionMismatch {
            context: "rebalance inputs",
            expected: n,
            got: x.units.len(),
        });
    }
    let paths = numeraire_paths(market)?;
    let mut trade = Trade::zero(n);

    // Stage 1: everything into the numeraire.
    let mut pot = x.units[0];
    for i in 1..n {
        if x.units[i] > 0.0 {
            let hops = path_to_numeraire(&paths, i, n)?;
            pot += push_along(&mut trade, market, &hops, x.units[i]);
        }
    }
    if pot <= 0.0 {
        return Err(Error::ZeroValuePortfolio);
    }

    // Stage 2: hypothetical star market with path-product prices. Assets
    // that are not purchased keep a placeholder ask equal to their value.
    let mut asks = vec![1.0; n];
    let mut purchase_hops: Vec<Option<Vec<(usize, usize)>>> = vec![None; n];
    for i in 1..n {
        if nu.nu[i] > 0.0 {
            let hops = path_from_numeraire(&paths, i, n)?;
            let product: f64 = hops
                .iter()
                .map(|&(u, v)| market.price(u, v).expect("path follows edges"))
                .product();
            asks[i] = 1.0 / product;
            purchase_hops[i] = Some(hops);
        } else {
            asks[i] = q.q[i];
        }
    }
    let (_, star_trade) = star_feasible_trade(pot, nu, &asks, q)?;

    // Convert hypothetical single-hop purchases back to edge flows.
    for i in 1..n {
        let units = star_trade.flow(0, i);
        if units > 0.0 {
            let hops = purchase_hops[i]
                .as_ref()
                .expect("purchased asset has a path");
            push_along(&mut trade, market, hops, units);
        }
    }
    trade.validate(market)?;
    Ok(trade)
}

/// A rebalancing problem expressed as a non-conservative transport instance.
#[derive(Debug, Clone)]
pub struct NcotInstance {
    pub mu: DiscreteMeasure,
    pub cost: CostMatrix,
    pub mass: MassChangeMatrix,
    /// Portfolio value v = Σ q_k x_k.
    pub portfolio_value: f64,
}

/// Builds μ, c, m from a market snapshot: μ_i = q_i x_i / v, and on edges
/// c(i,j) = 1 − (q_j/q_i) P(i,j), m(i,j) = (q_j/q_i) P(i,j); the diagonal
/// holds c = 0, m = 1 and all other pairs are masked out.
pub fn rebalance_to_ncot(
    market: &MarketGraph,
    x: &Portfolio,
    q: &PriceVector,
) -> Result<NcotInstance, Error> {
    let n = market.n;
    if x.units.len() != n || q.q.len() != n {
        return Err(Error::DimensionMismatch {
            context: "portfolio vs market",
            expected: n,
            got: x.units.len(),
        });
    }
    let v = x.value(q);
    if v <= 0.0 {
        return Err(Error::ZeroValuePortfolio);
    }
    let weights: Vec<f64> = x.units.iter().zip(&q.q).map(|(u, p)| u * p / v).collect();
    let total: f64 = weights.iter().sum();
    let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let mu = DiscreteMeasure::indexed(weights)?;

    let mut cost_rows = vec![vec![0.0; n]; n];
    let mut mask_rows = vec![vec![false; n]; n];
    let mut mass_rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        mask_rows[i][i] = true;
        mass_rows[i][i] = 1.0;
        for j in 0..n {
            if i != j {
                if let Some(p) = market.price(i, j) {
                    let retained = q.q[j] / q.q[i] * p;
                    mask_rows[i][j] = true;
                    // Consistency keeps this in [0, 1); trim float dust.
                    cost_rows[i][j] = (1.0 - retained).max(0.0);
                    mass_rows[i][j] = retained;
                }
            }
        }
    }
    Ok(NcotInstance {
        mu,
        cost: CostMatrix::masked(cost_rows, mask_rows)?,
        mass: MassChangeMatrix::dense(mass_rows)?,
        portfolio_value: v,
    })
}

/// Plan → trade: ξ(i,j) = (v/q_i) π(i,j) off the diagonal.
pub fn plan_to_trade(plan: &TransportPlan, q: &PriceVector, v: f64) -> Trade {
    let n = plan.n_source;
    let mut trade = Trade::zero(n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let p = plan.entry(i, j);
                if p > 0.0 {
                    trade.add_flow(i, j, v / q.q[i] * p);
                }
            }
        }
    }
    trade
}

/// Trade → plan: π(i,j) = (q_i/v) ξ(i,j) off the diagonal and
/// π(i,i) = (q_i/v)(x_i − Σ_{k≠i} ξ(i,k)). Fails when the trade sells more
/// of an asset than the portfolio holds.
pub fn trade_to_plan(
    market: &MarketGraph,
    trade: &Trade,
    x: &Portfolio,
    q: &PriceVector,
) -> Result<TransportPlan, Error> {
    let n = market.n;
    let v = x.value(q);
    if v <= 0.0 {
        return Err(Error::ZeroValuePortfolio);
    }
    let instance = rebalance_to_ncot(market, x, q)?;
    let mut rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        let sold: f64 = (0..n).filter(|&k| k != i).map(|k| trade.flow(i, k)).sum();
        let diag = q.q[i] / v * (x.units[i] - sold);
        if diag < -1e-12 {
            return Err(Error::DiagonalNegative {
                index: i,
                value: diag,
            });
        }
        rows[i][i] = diag.max(0.0);
        for j in 0..n {
            if i != j {
                rows[i][j] = q.q[i] / v * trade.flow(i, j);
            }
        }
    }
    TransportPlan::new(rows, &instance.mass)
}

/// Outcome of an optimal rebalance: the trade, the post-trade holdings, the
/// realized cost, the underlying transport solution, and its duality
/// certificate.
#[derive(Debug, Clone)]
pub struct RebalanceOutcome {
    pub trade: Trade,
    pub post: Portfolio,
    pub cost: f64,
    pub ncot: NcotSolution,
    pub certificate: DualityCertificate,
}

/// Solves the rebalancing problem through its transport formulation and
/// converts the optimal plan back into an executable trade.
pub fn optimal_rebalance(
    market: &MarketGraph,
    x: &Portfolio,
    nu: &TargetProportions,
    q: &PriceVector,
) -> Result<RebalanceOutcome, Error> {
    if !check_connectivity(market) {
        return Err(Error::PreconditionViolated {
            what: "market graph is not connected".into(),
        });
    }
    if !detect_arbitrage(market).is_arbitrage_free() {
        return Err(Error::ArbitragePresent);
    }
    if !q.is_consistent(market) {
        return Err(Error::PreconditionViolated {
            what: format!(
                "price vector is inconsistent with the market (violation {})",
                q.consistency_violation(market)
            ),
        });
    }
    let instance = rebalance_to_ncot(market, x, q)?;
    let nu_measure = DiscreteMeasure::indexed(nu.nu.clone())?;
    let ncot = match solve_ncot(&instance.mu, &nu_measure, &instance.cost, &instance.mass) {
        Ok(s) => s,
        Err(Error::Infeasible) => {
            return Err(Error::PreconditionViolated {
                what: "target proportions cannot be reached with direct trades".into(),
            })
        }
        Err(e) => return Err(e),
    };
    let v = instance.portfolio_value;
    let trade = plan_to_trade(&ncot.plan, q, v);
    trade.validate(market)?;

    let delta = trade_delta(&trade, market);
    let post_units: Vec<f64> = x
        .units
        .iter()
        .zip(&delta)
        .map(|(u, d)| {
            let units = u + d;
            if units < 0.0 && units > -1e-9 {
                0.0
            } else {
                units
            }
        })
        .collect();
    let post = Portfolio::new(post_units)?;

    let cost = trade_cost(&trade, q, market);
    let expected = v * ncot.optimal_value;
    if (cost - expected).abs() > 1e-8 * (1.0 + expected.abs()) {
        return Err(Error::Internal(format!(
            "trade cost {cost} disagrees with v × transport value {expected}"
        )));
    }
    let proportions = post.proportions(q)?;
    let worst = proportions
        .iter()
        .zip(&nu.nu)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if worst > 1e-7 {
        return Err(Error::Internal(format!(
            "post-trade proportions miss the target by {worst}"
        )));
    }

    let potentials = potentials_from_lp(&ncot, &instance.mu, &nu_measure)?;
    let certificate = certify_duality(
        &ncot,
        &potentials,
        &instance.mu,
        &instance.cost,
        &instance.mass,
    )?;
    Ok(RebalanceOutcome {
        trade,
        post,
        cost,
        ncot,
        certificate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_asset_market() -> MarketGraph {
        MarketGraph::new(
            2,
            vec![
                Edge {
                    from: 0,
                    to: 1,
                    price: 0.5,
                },
                Edge {
                    from: 1,
                    to: 0,
                    price: 1.6,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn connectivity_cases() {
        let single = MarketGraph::new(1, vec![]).unwrap();
        assert!(check_connectivity(&single));
        let split = MarketGraph::new(
            3,
            vec![Edge {
                from: 0,
                to: 1,
                price: 1.0,
            }],
        )
        .unwrap();
        assert!(!check_connectivity(&split));
        let star = MarketGraph::star(&[0.9, 0.8], &[1.0, 0.9]).unwrap();
        assert!(check_connectivity(&star));
    }

    #[test]
    fn arbitrage_detection() {
        // Cycle product 0.5 · 1.6 = 0.8 ≤ 1: fine.
        assert!(detect_arbitrage(&two_asset_market()).is_arbitrage_free());

        // 0.8 · 1.5 = 1.2 > 1: a concrete cycle comes back.
        let bad = MarketGraph::new(
            2,
            vec![
                Edge {
                    from: 0,
                    to: 1,
                    price: 0.8,
                },
                Edge {
                    from: 1,
                    to: 0,
                    price: 1.5,
                },
            ],
        )
        .unwrap();
        match detect_arbitrage(&bad) {
            ArbitrageCheck::Cycle(cycle) => {
                let product = cycle_price_product(&bad, &cycle).unwrap();
                assert!(product > 1.0 + 1e-12, "product {product}");
                assert_eq!(cycle.len(), 2);
            }
            ArbitrageCheck::NoArbitrage => panic!("planted cycle missed"),
        }

        // Exact break-even round trip is the boundary of no-arbitrage.
        let boundary = MarketGraph::new(
            2,
            vec![
                Edge {
                    from: 0,
                    to: 1,
                    price: 0.5,
                },
                Edge {
                    from: 1,
                    to: 0,
                    price: 2.0,
                },
            ],
        )
        .unwrap();
        assert!(detect_arbitrage(&boundary).is_arbitrage_free());
    }

    #[test]
    fn consistent_prices_two_asset() {
        let market = two_asset_market();
        let q = consistent_prices(&market).unwrap();
        assert!((q.q[0] - 1.0).abs() < 1e-15);
        assert!((q.q[1] - 2.0).abs() < 1e-12);
        // P(0,1) = 0.5 ≤ q0/q1 = 0.5 (tight) and P(1,0) = 1.6 ≤ q1/q0 = 2.
        assert!(q.is_consistent(&market));
        assert!(0.5 <= q.q[0] / q.q[1] + 1e-15);
        assert!(1.6 <= q.q[1] / q.q[0] + 1e-15);
    }

    #[test]
    fn consistent_prices_on_star_lie_in_the_spread() {
        let bids = [0.9, 1.4];
        let asks = [1.0, 1.5];
        let market = MarketGraph::star(&bids, &asks).unwrap();
        let q = consistent_prices(&market).unwrap();
        for i in 0..2 {
            assert!(
                q.q[i + 1] >= bids[i] - 1e-12 && q.q[i + 1] <= asks[i] + 1e-12,
                "q = {:?}",
                q.q
            );
        }
        let single = MarketGraph::new(1, vec![]).unwrap();
        let q1 = consistent_prices(&single).unwrap();
        assert_eq!(q1.q, vec![1.0]);
    }

    #[test]
    fn arbitrage_blocks_pricing() {
        let bad = MarketGraph::new(
            2,
            vec![
                Edge {
                    from: 0,
                    to: 1,
                    price: 0.8,
                },
                Edge {
                    from: 1,
                    to: 0,
                    price: 1.5,
                },
            ],
        )
        .unwrap();
        assert!(matches!(
            consistent_prices(&bad),
            Err(Error::ArbitragePresent)
        ));
    }

    #[test]
    fn trade_delta_cases() {
        let market = two_asset_market();
        let zero = Trade::zero(2);
        assert_eq!(trade_delta(&zero, &market), vec![0.0, 0.0]);

        // Sell one unit of asset 1 at P(1,0) = 1.6... use a 0.9-price variant.
        let m2 = MarketGraph::new(
            2,
            vec![
                Edge {
                    from: 1,
                    to: 0,
                    price: 0.9,
                },
                Edge {
                    from: 0,
                    to: 1,
                    price: 1.0,
                },
            ],
        )
        .unwrap();
        let mut sell = Trade::zero(2);
        sell.add_flow(1, 0, 1.0);
        assert_eq!(trade_delta(&sell, &m2), vec![0.9, -1.0]);

        // A round trip burns value when the spread is positive.
        let mut round = Trade::zero(2);
        round.add_flow(0, 1, 1.0);
        round.add_flow(1, 0, 0.5); // what the first leg bought back out
        let market = two_asset_market();
        let delta = trade_delta(&round, &market);
        assert!(delta[0] < 0.0 - 1e-12 || delta[1] > 0.0);
        assert!((delta[0] - (0.5 * 1.6 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn trade_cost_cases() {
        let m2 = MarketGraph::new(
            2,
            vec![
                Edge {
                    from: 1,
                    to: 0,
                    price: 0.9,
                },
                Edge {
                    from: 0,
                    to: 1,
                    price: 1.0 / 1.05,
                },
            ],
        )
        .unwrap();
        let q = consistent_prices(&m2).unwrap();
        let zero = Trade::zero(2);
        assert_eq!(trade_cost(&zero, &q, &m2), 0.0);

        // q1 = 1.05 under the from-0 construction (tight on the ask edge),
        // so buying costs nothing and selling pays the spread.
        let mut sell = Trade::zero(2);
        sell.add_flow(1, 0, 1.0);
        let c = trade_cost(&sell, &q, &m2);
        assert!((c - (q.q[1] - 0.9)).abs() < 1e-12);

        let mut buy = Trade::zero(2);
        buy.add_flow(0, 1, 1.0);
        assert!(trade_cost(&buy, &q, &m2).abs() < 1e-12);
    }

    #[test]
    fn star_trade_matches_hand_solution() {
        // Two assets, q = (1,1), ask = 1.1, ν = (1/2, 1/2), pot 1:
        // z = (10/21, 10/21), ξ(0,1) = 11/21, cost 1/21.
        let q = PriceVector::new(vec![1.0, 1.0]).unwrap();
        let nu = TargetProportions::new(vec![0.5, 0.5]).unwrap();
        let (z, trade) = star_feasible_trade(1.0, &nu, &[1.0, 1.1], &q).unwrap();
        assert!((z[0] - 10.0 / 21.0).abs() < 1e-12);
        assert!((z[1] - 10.0 / 21.0).abs() < 1e-12);
        assert!((trade.flow(0, 1) - 11.0 / 21.0).abs() < 1e-12);
        let cost = 1.0 - (z[0] * 1.0 + z[1] * 1.0);
        assert!((cost - 1.0 / 21.0).abs() < 1e-12);
        // Proportions are exact.
        let total: f64 = z.iter().zip(&q.q).map(|(zi, qi)| zi * qi).sum();
        for (zi, (qi, ni)) in z.iter().zip(q.q.iter().zip(&nu.nu)) {
            assert!((zi * qi / total - ni).abs() < 1e-15);
        }
    }

    #[test]
    fn star_trade_degenerate_cases() {
        // No spread: z_i = ν_i / q_i and zero cost.
        let q = PriceVector::new(vec![1.0, 2.0]).unwrap();
        let nu = TargetProportions::new(vec![0.25, 0.75]).unwrap();
        let (z, _) = star_feasible_trade(1.0, &nu, &[1.0, 2.0], &q).unwrap();
        assert!((z[0] - 0.25).abs() < 1e-15);
        assert!((z[1] - 0.375).abs() < 1e-15);

        // All-numeraire target buys nothing.
        let nu0 = TargetProportions::new(vec![1.0, 0.0]).unwrap();
        let (z0, trade0) = star_feasible_trade(2.0, &nu0, &[1.0, 2.2], &q).unwrap();
        assert!((z0[0] - 2.0).abs() < 1e-15);
        assert_eq!(z0[1], 0.0);
        assert_eq!(trade0.total_flow(), 0.0);
    }

    #[test]
    fn general_feasible_trade_reaches_target() {
        // Triangle market with consistent prices and mild spreads.
        let q = PriceVector::new(vec![1.0, 2.0, 4.0]).unwrap();
        let mut edges = Vec::new();
        for i in 0..3usize {
            for j in 0..3usize {
                if i != j {
                    edges.push(Edge {
                        from: i,
                        to: j,
                        price: q.q[i] / q.q[j] * 0.98,
                    });
                }
            }
        }
        let market = MarketGraph::new(3, edges).unwrap();
        let x = Portfolio::new(vec![1.0, 0.0, 0.0]).unwrap();
        let nu = TargetProportions::new(vec![1.0 / 3.0; 3]).unwrap();
        let trade = general_feasible_trade(&market, &x, &nu, &q).unwrap();
        let delta = trade_delta(&trade, &market);
        let post = Portfolio::new(
            x.units
                .iter()
                .zip(&delta)
                .map(|(u, d)| (u + d).max(0.0))
                .collect(),
        )
        .unwrap();
        let props = post.proportions(&q).unwrap();
        for (p, n) in props.iter().zip(&nu.nu) {
            assert!((p - n).abs() < 1e-9, "proportions {props:?}");
        }
    }

    #[test]
    fn zero_spread_rebalance_is_free_even_with_churn() {
        // With tight prices every edge costs nothing, so the money-pot
        // construction may churn but the trade is free and feasible even
        // when the portfolio already matches the target.
        let q = PriceVector::new(vec![1.0, 2.0]).unwrap();
        let market = MarketGraph::new(
            2,
            vec![
                Edge {
                    from: 0,
                    to: 1,
                    price: 0.5,
                },
                Edge {
                    from: 1,
                    to: 0,
                    price: 2.0,
                },
            ],
        )
        .unwrap();
        let x = Portfolio::new(vec![0.5, 0.25]).unwrap();
        let nu = TargetProportions::new(x.proportions(&q).unwrap()).unwrap();
        let trade = general_feasible_trade(&market, &x, &nu, &q).unwrap();
        assert!(trade.total_flow() > 0.0, "money-pot route round-trips");
        assert!(trade_cost(&trade, &q, &market).abs() < 1e-12);
        let delta = trade_delta(&trade, &market);
        let post = Portfolio::new(
            x.units
                .iter()
                .zip(&delta)
                .map(|(u, d)| (u + d).max(0.0))
                .collect(),
        )
        .unwrap();
        let props = post.proportions(&q).unwrap();
        for (p, n) in props.iter().zip(&nu.nu) {
            assert!((p - n).abs() < 1e-9);
        }
    }

    #[test]
    fn general_trade_reduces_to_star_on_star_markets() {
        let market = MarketGraph::star(&[0.9, 1.3], &[1.0, 1.5]).unwrap();
        let q = consistent_prices(&market).unwrap();
        let nu = TargetProportions::new(vec![0.2, 0.5, 0.3]).unwrap();
        let pot = 3.0;
        let x = Portfolio::new(vec![pot, 0.0, 0.0]).unwrap();
        let general = general_feasible_trade(&market, &x, &nu, &q).unwrap();
        let asks = [
            1.0,
            1.0 / market.price(0, 1).unwrap(),
            1.0 / market.price(0, 2).unwrap(),
        ];
        let (_, star) = star_feasible_trade(pot, &nu, &asks, &q).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!((general.flow(i, j) - star.flow(i, j)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn ncot_reduction_matches_definitions() {
        let market = two_asset_market();
        let q = consistent_prices(&market).unwrap();
        let x = Portfolio::new(vec![1.0, 1.0]).unwrap();
        let inst = rebalance_to_ncot(&market, &x, &q).unwrap();
        // c + m = 1 on edges, c ≥ 0, m ≤ 1 under consistency.
        for i in 0..2 {
            for j in 0..2 {
                if inst.cost.admissible(i, j) {
                    let c = inst.cost.cost(i, j);
                    let m = inst.mass.factor(i, j);
                    assert!((c + m - 1.0).abs() < 1e-12);
                    assert!(c >= 0.0 && m <= 1.0 + 1e-12);
                }
            }
        }
        // c(1,0) = 1 − (q0/q1) P(1,0) = 1 − 0.8 = 0.2.
        assert!((inst.cost.cost(1, 0) - 0.2).abs() < 1e-12);
        // x = e0 gives μ = e0.
        let x0 = Portfolio::new(vec![2.0, 0.0]).unwrap();
        let inst0 = rebalance_to_ncot(&market, &x0, &q).unwrap();
        assert_eq!(inst0.mu.weights, vec![1.0, 0.0]);
    }

    #[test]
    fn rebalance_to_current_proportions_is_free() {
        let market = two_asset_market();
        let q = consistent_prices(&market).unwrap();
        let x = Portfolio::new(vec![1.0, 0.5]).unwrap();
        let nu = TargetProportions::new(x.proportions(&q).unwrap()).unwrap();
        let outcome = optimal_rebalance(&market, &x, &nu, &q).unwrap();
        assert!(outcome.cost.abs() < 1e-12);
        assert!(outcome.trade.total_flow().abs() < 1e-12);
        assert!(outcome.certificate.accepted);
    }

    #[test]
    fn optimal_cost_beats_the_money_pot_route() {
        // Star market, current position all in the numeraire: the optimal
        // cost is at most the star feasible-trade cost 1/21.
        let market = MarketGraph::star(&[0.95], &[1.1]).unwrap();
        let q = PriceVector::new(vec![1.0, 1.0]).unwrap();
        assert!(q.is_consistent(&market));
        let x = Portfolio::new(vec![1.0, 0.0]).unwrap();
        let nu = TargetProportions::new(vec![0.5, 0.5]).unwrap();
        let outcome = optimal_rebalance(&market, &x, &nu, &q).unwrap();
        assert!(outcome.cost <= 1.0 / 21.0 + 1e-12);
        let props = outcome.post.proportions(&q).unwrap();
        assert!((props[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn plan_trade_round_trip() {
        let market = two_asset_market();
        let q = consistent_prices(&market).unwrap();
        let x = Portfolio::new(vec![1.0, 0.75]).unwrap();
        let nu = TargetProportions::new(vec![0.7, 0.3]).unwrap();
        let outcome = optimal_rebalance(&market, &x, &nu, &q).unwrap();
        let plan = trade_to_plan(&market, &outcome.trade, &x, &q).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    (plan.entry(i, j) - outcome.ncot.plan.entry(i, j)).abs() < 1e-12,
                    "entry ({i},{j})"
                );
            }
        }
        // Cost identity C(ξ) = v · Σ c π.
        let inst = rebalance_to_ncot(&market, &x, &q).unwrap();
        let lhs = trade_cost(&outcome.trade, &q, &market);
        let rhs = inst.portfolio_value * plan.transport_cost(&inst.cost);
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn zero_trade_gives_diagonal_plan() {
        let market = two_asset_market();
        let q = consistent_prices(&market).unwrap();
        let x = Portfolio::new(vec![1.0, 0.5]).unwrap();
        let plan = trade_to_plan(&market, &Trade::zero(2), &x, &q).unwrap();
        let mu = x.proportions(&q).unwrap();
        for i in 0..2 {
            assert!((plan.entry(i, i) - mu[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn overselling_is_rejected() {
        let market = two_asset_market();
        let q = consistent_prices(&market).unwrap();
        let x = Portfolio::new(vec![0.1, 0.1]).unwrap();
        let mut trade = Trade::zero(2);
        trade.add_flow(0, 1, 1.0);
        assert!(matches!(
            trade_to_plan(&market, &trade, &x, &q),
            Err(Error::DiagonalNegative { index: 0, .. })
        ));
    }
}
