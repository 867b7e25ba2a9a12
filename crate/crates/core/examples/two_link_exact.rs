//! Exact two-route bound for non-affine latencies, and the fixed-flow relaxation it refines.

use infodesign::moments::solve_moment_sdp;
use infodesign::{build_gpm_fixed_y, load_scenario, optimize_private, two_link_univariate_sdp};

fn main() -> infodesign::Result<()> {
    let sc = load_scenario(concat!(env!("CARGO_MANIFEST_DIR"), "/data/two_link_bpr.scn"))?;
    let y = [0.0, 0.0];
    let exact = two_link_univariate_sdp(&sc, &y, 1.0)?;
    let relaxed = solve_moment_sdp(&build_gpm_fixed_y(&sc, &y)?)?;
    let local = optimize_private(&sc, 1.0, 2, 40, 0)?;
    println!("univariate bound {:.6}", exact.value);
    println!("fixed-flow relaxation {:.6}", relaxed.value);
    println!("two-atom multistart {:.6}", local.cost);
    for (state, m) in sc.states().iter().zip(&exact.moments) {
        println!("  {state}: moments of x_1 {m:.4?}");
    }
    Ok(())
}
