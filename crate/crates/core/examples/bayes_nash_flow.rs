//! Prior equilibrium, equilibria under the two canonical public policies, and the first best.

use infodesign::{bne_indirect, canonical_policy, evaluate_public, first_best, load_scenario, prior_equilibrium, CanonicalKind};

fn main() -> infodesign::Result<()> {
    let sc = load_scenario(concat!(env!("CARGO_MANIFEST_DIR"), "/data/two_link_affine.scn"))?;
    let prior = prior_equilibrium(&sc)?;
    println!("prior equilibrium y = {:.4?} (kkt residual {:.1e})", prior.y(), prior.kkt_residual);

    let full = canonical_policy(CanonicalKind::FullInformation, sc.num_states(), sc.num_states())?;
    for nu in [0.25, 0.5, 1.0] {
        let eq = bne_indirect(&sc, &full, nu)?;
        println!(
            "full information, nu = {nu}: atoms {:.4?}, y = {:.4?}, cost {:.4}",
            eq.atoms(),
            eq.y(),
            evaluate_public(&sc, &full, nu)?
        );
    }

    let fb = first_best(&sc)?;
    for (state, flow) in sc.states().iter().zip(&fb.flows) {
        println!("first best in {state}: {:.4?}", flow.values());
    }
    println!("first-best cost {:.4}", fb.cost);
    Ok(())
}
