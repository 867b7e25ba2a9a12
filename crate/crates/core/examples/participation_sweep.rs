//! Diagonal design across participation rates; extension keeps the cost non-increasing.

use infodesign::{load_scenario, optimize_diagonal, sweep_nu, extend_policy, SweepMode};

fn main() -> infodesign::Result<()> {
    let sc = load_scenario(concat!(env!("CARGO_MANIFEST_DIR"), "/data/two_link_bpr.scn"))?;
    let grid = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
    for p in sweep_nu(&sc, &grid, SweepMode::Diagonal, 30, 0)? {
        match p.solution {
            Ok(sol) => println!(
                "nu = {:.1}: cost {:.4}{}",
                p.nu,
                sol.cost,
                p.extended_from.map_or(String::new(), |f| format!(" (extended from nu = {f})"))
            ),
            Err(e) => println!("nu = {:.1}: failed: {e}", p.nu),
        }
    }

    // A policy designed for nu = 0.5 keeps its cost when more travelers participate.
    let base = optimize_diagonal(&sc, 0.5, 30, 0)?;
    let ext = extend_policy(&sc, &base, 0.9)?;
    println!("designed at 0.5: {:.6}; extended to 0.9: {:.6}", base.cost, ext.cost);
    Ok(())
}
