//! Optimal public signals compared with full and no information.

use infodesign::{canonical_policy, evaluate_public, load_scenario, optimize_public, CanonicalKind};

fn main() -> infodesign::Result<()> {
    let sc = load_scenario(concat!(env!("CARGO_MANIFEST_DIR"), "/data/wheatstone_quadratic.scn"))?;
    let s = sc.num_states();
    let full = canonical_policy(CanonicalKind::FullInformation, s, s)?;
    let none = canonical_policy(CanonicalKind::NoInformation, s, 1)?;
    for nu in [0.25, 0.5, 1.0] {
        let best = optimize_public(&sc, nu, 2, 40, 0)?;
        println!(
            "nu = {nu}: optimal public {:.4}, full information {:.4}, no information {:.4}",
            best.cost,
            evaluate_public(&sc, &full, nu)?,
            evaluate_public(&sc, &none, nu)?
        );
        println!("  message matrix {:.3?}", best.weights);
    }
    Ok(())
}
