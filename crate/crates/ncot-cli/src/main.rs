//! Batch front end: instance I/O, solver invocation, certificates, and
//! report emission.
//!
//! Reports are JSON; `--pretty` renders a human-readable table instead and
//! is never the machine format. Exit status: 0 on success, 1 on domain
//! errors (infeasible targets, arbitrage where forbidden) with a
//! machine-readable error JSON, 2 on malformed input. Set `NCOT_LOG` for
//! solver logging.

use clap::{Parser, Subcommand};
use ncot::duality::{certify_duality, potentials_from_lp, tight_support};
use ncot::dynamics::{
    kinetic_cost, mass_balance_check, straight_line_flow, uniform_time_grid, FlowField,
    PiecewiseFlow, QuadraticLeaky,
};
use ncot::error::Error;
use ncot::instances::{leaky_shift_instance, GridInstance, QuadraticCost};
use ncot::io;
use ncot::maps::{
    extract_dual_map_from_plan, extract_map_from_plan, map_pushforward_check,
    quadratic_leaky_map_solve, DualMapExtraction, GridPotential, MapExtraction,
};
use ncot::market::{
    consistent_prices, cycle_price_product, detect_arbitrage, optimal_rebalance, ArbitrageCheck,
};
use ncot::solver::{solve_ncot, sweep_mass_scales};
use serde::Serialize;
use serde_json::json;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "ncot",
    about = "Non-conservative optimal transport and portfolio rebalancing",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Input file(s). `rebalance` takes one combined file or three files in
    /// the order market, portfolio, target.
    #[arg(long, global = true)]
    input: Vec<PathBuf>,

    /// Report destination; stdout when omitted.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Feasibility tolerance for plan and map extraction checks.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol_feas: f64,

    /// Acceptance tolerance for the duality-gap certificate.
    #[arg(long, global = true, default_value_t = 1e-6)]
    tol_gap: f64,

    /// Seed for generated demo instances.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Render a human-readable table instead of JSON.
    #[arg(long, global = true)]
    pretty: bool,

    /// Retained-mass grid for ot-sweep: "lo:hi:count" or "z1,z2,...".
    /// Defaults to 101 points of spacing 1e-3 bracketing the optimal Z.
    #[arg(long, global = true)]
    z_grid: Option<String>,

    /// Leak rate for generated grid demos.
    #[arg(long, global = true, default_value_t = 0.05)]
    k: f64,

    /// Cell count for generated grid demos.
    #[arg(long, global = true)]
    grid_size: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Scan a market for arbitrage cycles.
    CheckArbitrage,
    /// Construct a consistent price vector for an arbitrage-free market.
    Prices,
    /// Optimal portfolio rebalance with duality certificate.
    Rebalance,
    /// Solve a transport instance.
    OtSolve,
    /// Solve and certify via dual potentials.
    OtDual,
    /// Extract primal/dual maps; with --grid-size, run the leaky-grid demo
    /// including the characteristic-equation map.
    OtMaps,
    /// Straight-line flow demo: snapshots CSV plus a summary report.
    OtDynamics,
    /// Sweep the fixed-retained-mass problem over a Z grid.
    OtSweep,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("NCOT_LOG")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = if e.is_input_error() {
                "input"
            } else {
                "domain"
            };
            let report = json!({ "error": e.to_string(), "kind": kind });
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
            if e.is_input_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    match cli.command {
        Command::CheckArbitrage => check_arbitrage(cli),
        Command::Prices => prices(cli),
        Command::Rebalance => rebalance(cli),
        Command::OtSolve => ot_solve(cli),
        Command::OtDual => ot_dual(cli),
        Command::OtMaps => ot_maps(cli),
        Command::OtDynamics => ot_dynamics(cli),
        Command::OtSweep => ot_sweep(cli),
    }
}

fn read_input(cli: &Cli, index: usize) -> Result<String, Error> {
    let path = cli
        .input
        .get(index)
        .ok_or_else(|| Error::InvalidInput(format!("missing input file #{}", index + 1)))?;
    fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))
}

fn emit<T: Serialize>(cli: &Cli, report: &T, pretty: String) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Internal(format!("serialization: {e}")))?;
    match (&cli.output, cli.pretty) {
        (Some(path), _) => {
            fs::write(path, &text).map_err(|e| {
                Error::InvalidInput(format!("cannot write {}: {e}", path.display()))
            })?;
            if cli.pretty {
                print!("{pretty}");
            }
        }
        (None, true) => print!("{pretty}"),
        (None, false) => println!("{text}"),
    }
    Ok(())
}

fn check_arbitrage(cli: &Cli) -> Result<(), Error> {
    let market = io::parse_market(&read_input(cli, 0)?)?;
    match detect_arbitrage(&market) {
        ArbitrageCheck::NoArbitrage => {
            let report = json!({ "status": "no-arbitrage" });
            emit(cli, &report, "no arbitrage\n".into())
        }
        ArbitrageCheck::Cycle(cycle) => {
            let product = cycle_price_product(&market, &cycle);
            let report = json!({
                "status": "arbitrage",
                "cycle": cycle,
                "price_product": product,
            });
            let mut pretty = String::from("arbitrage cycle:\n");
            for (i, j) in &cycle {
                pretty.push_str(&format!("  {i} -> {j}\n"));
            }
            if let Some(p) = product {
                pretty.push_str(&format!("price product {p}\n"));
            }
            emit(cli, &report, pretty)
        }
    }
}

fn prices(cli: &Cli) -> Result<(), Error> {
    let market = io::parse_market(&read_input(cli, 0)?)?;
    let q = consistent_prices(&market)?;
    let report = json!({
        "q": q.q,
        "consistent": q.is_consistent(&market),
    });
    let mut pretty = String::from("asset  value\n");
    for (i, v) in q.q.iter().enumerate() {
        pretty.push_str(&format!("{i:>5}  {v}\n"));
    }
    emit(cli, &report, pretty)
}

fn rebalance(cli: &Cli) -> Result<(), Error> {
    let (market, portfolio, target) = match cli.input.len() {
        1 => {
            let text = read_input(cli, 0)?;
            let raw: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| Error::InvalidInput(format!("combined JSON: {e}")))?;
            let get = |key: &str| -> Result<String, Error> {
                raw.get(key)
                    .map(|v| v.to_string())
                    .ok_or_else(|| Error::InvalidInput(format!("combined JSON lacks \"{key}\"")))
            };
            (
                io::parse_market(&get("market")?)?,
                io::parse_portfolio(&get("portfolio")?)?,
                io::parse_target(&get("target")?)?,
            )
        }
        3 => (
            io::parse_market(&read_input(cli, 0)?)?,
            io::parse_portfolio(&read_input(cli, 1)?)?,
            io::parse_target(&read_input(cli, 2)?)?,
        ),
        n => {
            return Err(Error::InvalidInput(format!(
                "rebalance needs 1 combined or 3 separate inputs, got {n}"
            )))
        }
    };
    let q = consistent_prices(&market)?;
    let outcome = optimal_rebalance(&market, &portfolio, &target, &q)?;
    let flows: Vec<io::FlowJson> = outcome
        .trade
        .nonzero_flows()
        .map(|(from, to, amount)| io::FlowJson { from, to, amount })
        .collect();
    let report = io::RebalanceJson {
        flows,
        cost: outcome.cost,
        post_units: outcome.post.units.clone(),
        post_proportions: outcome.post.proportions(&q)?,
        portfolio_value: portfolio.value(&q),
        transport_value: outcome.ncot.optimal_value,
        z: outcome.ncot.retained_mass,
        certificate_gap: outcome.certificate.gap,
    };
    let mut pretty = format!("cost {}\nfrom  to  amount\n", outcome.cost);
    for f in &report.flows {
        pretty.push_str(&format!("{:>4}  {:>2}  {}\n", f.from, f.to, f.amount));
    }
    emit(cli, &report, pretty)
}

fn load_instance(cli: &Cli) -> Result<io::Instance, Error> {
    io::parse_instance(&read_input(cli, 0)?)
}

fn ot_solve(cli: &Cli) -> Result<(), Error> {
    let inst = load_instance(cli)?;
    let sol = solve_ncot(&inst.mu, &inst.nu, &inst.cost, &inst.mass)?;
    let report = io::SolutionJson::from_solution(&sol);
    let pretty = format!(
        "value {}\nretained mass {}\n",
        sol.optimal_value, sol.retained_mass
    );
    emit(cli, &report, pretty)
}

fn ot_dual(cli: &Cli) -> Result<(), Error> {
    let inst = load_instance(cli)?;
    let sol = solve_ncot(&inst.mu, &inst.nu, &inst.cost, &inst.mass)?;
    let pot = potentials_from_lp(&sol, &inst.mu, &inst.nu)?;
    let cert = certify_duality(&sol, &pot, &inst.mu, &inst.cost, &inst.mass)?;
    let tight = tight_support(&pot, &inst.cost, &inst.mass, &inst.nu, 1e-7);
    let accepted = cert.accepted && cert.gap <= cli.tol_gap * (1.0 + sol.optimal_value.abs());
    let report = json!({
        "solution": io::SolutionJson::from_solution(&sol),
        "potentials": io::PotentialsJson::from_potentials(&pot, 0.0),
        "certificate": io::CertificateJson::new(&cert, &tight),
    });
    let pretty = format!(
        "value {}\ngap {}\ncertificate accepted: {accepted}\n",
        sol.optimal_value, cert.gap
    );
    emit(cli, &report, pretty)
}

fn grid_demo(cli: &Cli, cost: QuadraticCost) -> Result<GridInstance, Error> {
    let n = cli.grid_size.ok_or_else(|| {
        Error::InvalidInput("this demo needs --grid-size (or provide --input)".into())
    })?;
    leaky_shift_instance(n, cli.k, n / 4, cost, cli.seed)
}

fn ot_maps(cli: &Cli) -> Result<(), Error> {
    let (inst, grid_data) = if cli.input.is_empty() {
        let g = grid_demo(cli, QuadraticCost::Half)?;
        (
            io::Instance {
                mu: g.mu.clone(),
                nu: g.nu.clone(),
                cost: g.cost.clone(),
                mass: g.mass.clone(),
            },
            Some(g),
        )
    } else {
        (load_instance(cli)?, None)
    };
    let sol = solve_ncot(&inst.mu, &inst.nu, &inst.cost, &inst.mass)?;
    let tol = cli.tol_feas.max(1e-9);
    let primal = extract_map_from_plan(&sol.plan, tol);
    let dual = extract_dual_map_from_plan(&sol.plan, &inst.mass, &inst.nu, tol)?;

    let mut report = serde_json::Map::new();
    report.insert("value".into(), json!(sol.optimal_value));
    report.insert("Z".into(), json!(sol.retained_mass));
    let mut pretty = format!("value {}\n", sol.optimal_value);
    match &primal {
        MapExtraction::Map(map) => {
            let push = map_pushforward_check(map, &inst.mu, &inst.nu, &inst.mass)?;
            report.insert("primal_map".into(), json!(io::MapJson::primal(map)));
            report.insert(
                "pushforward".into(),
                json!({
                    "total_variation": push.total_variation,
                    "max_deviation": push.max_deviation,
                }),
            );
            pretty.push_str(&format!(
                "primal map extracted; pushforward TV {}\n",
                push.total_variation
            ));
        }
        MapExtraction::NotAMap { split_rows } => {
            report.insert("primal_map".into(), json!({ "split_rows": split_rows }));
            pretty.push_str(&format!("plan is not a map; split rows {split_rows:?}\n"));
        }
    }
    match &dual {
        DualMapExtraction::Map(map) => {
            report.insert("dual_map".into(), json!(io::MapJson::dual(map)));
        }
        DualMapExtraction::NotAMap { split_cols } => {
            report.insert("dual_map".into(), json!({ "split_cols": split_cols }));
        }
    }

    if let Some(g) = grid_data {
        // Characteristic-equation map from the LP-dual potential on the grid.
        let pot = potentials_from_lp(&sol, &inst.mu, &inst.nu)?;
        let grid = GridPotential::line(&g.xs, pot.phi.clone())?;
        let mut targets = Vec::with_capacity(g.xs.len());
        for i in 0..g.xs.len() {
            let y = quadratic_leaky_map_solve(grid.point(i), pot.phi[i], grid.gradient(i), g.k)?;
            targets.push(y[0]);
        }
        let cell_error = match &primal {
            MapExtraction::Map(map) => {
                let mut worst = 0.0f64;
                for i in 0..g.xs.len() {
                    if grid.is_boundary(i) {
                        continue;
                    }
                    if let Some(j) = map.target(i) {
                        worst = worst.max((targets[i] - g.ys[j]).abs());
                    }
                }
                Some(worst / g.cell_width)
            }
            MapExtraction::NotAMap { .. } => None,
        };
        report.insert(
            "characteristic_map".into(),
            json!({
                "targets": targets,
                "cell_error": cell_error,
            }),
        );
        if let Some(e) = cell_error {
            pretty.push_str(&format!(
                "characteristic map within {e} cells of the plan map\n"
            ));
        }
    }
    emit(cli, &serde_json::Value::Object(report), pretty)
}

fn ot_dynamics(cli: &Cli) -> Result<(), Error> {
    let g = grid_demo(cli, QuadraticCost::Plain)?;
    let out = cli.output.clone().ok_or_else(|| {
        Error::InvalidInput("ot-dynamics writes a snapshot CSV and needs --output".into())
    })?;
    let sol = solve_ncot(&g.mu, &g.nu, &g.cost, &g.mass)?;
    let map = match extract_map_from_plan(&sol.plan, 1e-9) {
        MapExtraction::Map(map) => map,
        MapExtraction::NotAMap { split_rows } => {
            return Err(Error::PreconditionViolated {
                what: format!("optimal plan is not a map (split rows {split_rows:?})"),
            })
        }
    };
    let m_field = QuadraticLeaky { k: g.k };
    let flow = FlowField::straight_line(&map, &g.mu, &g.nu, 2.0, uniform_time_grid(64))?;
    let snaps = straight_line_flow(&flow, &m_field);
    let kinetic = kinetic_cost(&flow);
    let balance = mass_balance_check(&flow, &m_field);

    // A deliberately suboptimal two-segment detour for the lower bound.
    let detour = {
        let mut paths = Vec::new();
        let mut weights = Vec::new();
        for (i, &w) in g.mu.weights.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            let x = g.xs[i];
            let y = g.ys[map.target(i).expect("map is total")];
            paths.push(vec![vec![x], vec![0.5 * (x + y) + 0.1], vec![y]]);
            weights.push(w);
        }
        PiecewiseFlow {
            knot_times: vec![0.0, 0.5, 1.0],
            paths,
            weights,
            exponent: 2.0,
        }
    };

    let csv = io::snapshots_to_csv(&snaps);
    let csv_path = out.with_extension("snapshots.csv");
    fs::write(&csv_path, csv)
        .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", csv_path.display())))?;

    let report = json!({
        "static_value": sol.optimal_value,
        "kinetic_cost": kinetic,
        "dynamic_static_gap": (kinetic - sol.optimal_value).abs(),
        "detour_cost": detour.cost(),
        "mass_balance_max_residual": balance.max_residual,
        "final_mass": snaps.last().map(|s| s.total_mass),
        "snapshots_csv": csv_path.display().to_string(),
    });
    let pretty = format!(
        "static value {}\nkinetic cost {}\nsnapshots written to {}\n",
        sol.optimal_value,
        kinetic,
        csv_path.display()
    );
    emit(cli, &report, pretty)
}

fn parse_z_grid(spec: &str) -> Result<Vec<f64>, Error> {
    let bad = |m: &str| Error::InvalidInput(format!("--z-grid {spec}: {m}"));
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected lo:hi:count"));
        }
        let lo: f64 = parts[0].parse().map_err(|_| bad("bad lo"))?;
        let hi: f64 = parts[1].parse().map_err(|_| bad("bad hi"))?;
        let count: usize = parts[2].parse().map_err(|_| bad("bad count"))?;
        if count < 2 || hi <= lo || lo <= 0.0 {
            return Err(bad("need 0 < lo < hi and count ≥ 2"));
        }
        Ok((0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect())
    } else {
        spec.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| bad("bad entry"))
                    .and_then(|z| {
                        if z > 0.0 {
                            Ok(z)
                        } else {
                            Err(bad("entries must be positive"))
                        }
                    })
            })
            .collect()
    }
}

/// 101 points of spacing ≤ 1e-3 centered on z_star, all positive.
fn default_z_grid(z_star: f64) -> Vec<f64> {
    let step = (1e-3f64).min(z_star / 100.0);
    (0..=100)
        .map(|i| z_star + (i as f64 - 50.0) * step)
        .collect()
}

fn ot_sweep(cli: &Cli) -> Result<(), Error> {
    let inst = load_instance(cli)?;
    let sol = solve_ncot(&inst.mu, &inst.nu, &inst.cost, &inst.mass)?;
    let grid = match &cli.z_grid {
        Some(spec) => parse_z_grid(spec)?,
        None => default_z_grid(sol.retained_mass),
    };
    let sweep = sweep_mass_scales(&inst.mu, &inst.nu, &inst.cost, &inst.mass, &grid)?;
    let report = io::SweepJson::new(&sweep, sol.optimal_value, sol.retained_mass);
    let mut pretty = format!(
        "ncot value {} at Z* = {}\n      Z        value\n",
        sol.optimal_value, sol.retained_mass
    );
    for p in &report.points {
        match p.value {
            Some(v) => pretty.push_str(&format!("{:>9.6}  {v}\n", p.z)),
            None => pretty.push_str(&format!("{:>9.6}  infeasible\n", p.z)),
        }
    }
    emit(cli, &report, pretty)
}
