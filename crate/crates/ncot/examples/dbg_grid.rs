use ncot::duality::potentials_from_lp;
use ncot::instances::{leaky_shift_instance, QuadraticCost};
use ncot::maps::{extract_map_from_plan, quadratic_leaky_map_solve, GridPotential, MapExtraction};
use ncot::solver::solve_ncot;
use std::time::Instant;

fn main() {
    for &k in &[0.0, 0.01, 0.05, 0.1] {
        let t0 = Instant::now();
        let inst = leaky_shift_instance(64, k, 16, QuadraticCost::Half, 0).unwrap();
        let sol = solve_ncot(&inst.mu, &inst.nu, &inst.cost, &inst.mass).unwrap();
        let solve_time = t0.elapsed();
        let n = inst.mu.len();

        // How close is the plan to the exact shift?
        let mut max_off = 0.0f64;
        let mut split = 0;
        for i in 0..n {
            let row = sol.plan.row(i);
            for (j, &v) in row.iter().enumerate() {
                if j != i {
                    max_off = max_off.max(v);
                }
            }
            let mass: f64 = row.iter().sum();
            if row[i] < (1.0 - 1e-6) * mass {
                split += 1;
            }
        }
        let extract = match extract_map_from_plan(&sol.plan, 1e-6) {
            MapExtraction::Map(_) => "map".to_string(),
            MapExtraction::NotAMap { split_rows } => format!("split rows {:?}", split_rows),
        };

        // Characteristic map from LP duals.
        let pot = potentials_from_lp(&sol, &inst.mu, &inst.nu).unwrap();
        let grid = GridPotential::line(&inst.xs, pot.phi.clone()).unwrap();
        let mut max_char_err = 0.0f64;
        let mut worst = (0usize, 0.0f64);
        let mut pre_fail = 0;
        for i in 0..n {
            if grid.is_boundary(i) {
                continue;
            }
            match quadratic_leaky_map_solve(grid.point(i), pot.phi[i], grid.gradient(i), k) {
                Ok(y) => {
                    let y_plan = inst.ys[i];
                    let err = (y[0] - y_plan).abs();
                    if err > max_char_err {
                        max_char_err = err;
                        worst = (i, err);
                    }
                }
                Err(_) => pre_fail += 1,
            }
        }
        println!(
            "k={k:<5} value={:.6e} Z={:.6} max_off={max_off:.2e} splits={split} extract={extract} char_err={max_char_err:.3e} (cell {h:.3e}) worst@{}:{:.2e} prefail={pre_fail} iters? time={solve_time:?}",
            sol.optimal_value,
            sol.retained_mass,
            worst.0,
            worst.1,
            h = inst.cell_width,
        );
    }
}
