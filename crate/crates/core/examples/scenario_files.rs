//! Load the bundled scenarios and evaluate route latencies at a sample flow.

use infodesign::{load_scenario, scenario_digest};

fn main() -> infodesign::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    for name in ["two_link_affine", "two_link_bpr", "wheatstone_affine", "wheatstone_quadratic"] {
        let sc = load_scenario(format!("{dir}/{name}.scn"))?;
        println!(
            "{name}: {} states, {} links, {} routes, degree {}, demand {}",
            sc.num_states(),
            sc.num_links(),
            sc.num_routes(),
            sc.degree(),
            sc.demand()
        );
        println!("  sha256 {}", scenario_digest(&sc));
        let even = vec![sc.demand() / sc.num_routes() as f64; sc.num_routes()];
        for (w, state) in sc.states().iter().enumerate() {
            let lat = sc.route_latency(w, &even)?;
            println!("  {state}: latencies {lat:.3?}, total {:.3}", sc.state_total_latency(w, &even)?);
        }
    }
    Ok(())
}
