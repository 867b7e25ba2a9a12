//! Atomic and diagonal private design, with the posteriors the optimal policy induces.

use infodesign::{load_scenario, optimize_diagonal, optimize_private, posteriors, AtomicPrivatePolicy};

fn main() -> infodesign::Result<()> {
    let sc = load_scenario(concat!(env!("CARGO_MANIFEST_DIR"), "/data/two_link_affine.scn"))?;
    let nu = 0.5;
    let diag = optimize_diagonal(&sc, nu, 50, 1)?;
    let atomic = optimize_private(&sc, nu, 3, 50, 1)?;
    println!("diagonal cost {:.4}, atomic (3 atoms) cost {:.4}", diag.cost, atomic.cost);
    println!("diagonal atoms {:.3?}", diag.atom_values());
    println!("non-participants {:.3?}", diag.y.values());

    let policy = AtomicPrivatePolicy::new(atomic.atom_values(), atomic.weights.clone(), nu)?;
    let post = posteriors(&sc, &policy)?;
    println!("posteriors per atom: {post:?}");
    Ok(())
}
