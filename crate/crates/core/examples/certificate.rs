//! Lower bound from the diagonal moment relaxation and the single atom it certifies.

use infodesign::{build_diagonal_sdp, load_scenario, optimize_diagonal, solve_moment_sdp};

fn main() -> infodesign::Result<()> {
    let sc = load_scenario(concat!(env!("CARGO_MANIFEST_DIR"), "/data/two_link_affine.scn"))?;
    for nu in [0.25, 1.0] {
        let program = build_diagonal_sdp(&sc, nu)?;
        let sol = solve_moment_sdp(&program)?;
        let design = optimize_diagonal(&sc, nu, 30, 0)?;
        println!(
            "nu = {nu}: bound {:.6} (gap {:.1e}), multistart {:.6}",
            sol.value, sol.relative_gap, design.cost
        );
        if let Some(tms) = &sol.tms {
            println!("  moment matrix: {:?}, largest eigenvalues {:.3e} and {:.3e}", tms.verdict, tms.eigenvalues[0], tms.eigenvalues[1]);
        }
        match sol.extracted_point() {
            Some(point) => println!("  atom {point:.4?}, violation {:.1e}", program.dirac_violation(&[point.to_vec()])),
            None => println!("  no single atom"),
        }
    }
    Ok(())
}
