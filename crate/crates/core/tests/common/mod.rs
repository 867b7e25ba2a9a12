#![allow(dead_code)]

use infodesign::{load_scenario, RoutingScenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const INSTANCES: [&str; 4] = ["two_link_affine", "two_link_bpr", "wheatstone_affine", "wheatstone_quadratic"];

pub fn scenario(name: &str) -> RoutingScenario {
    load_scenario(format!("{}/data/{name}.scn", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

/// Two states, two parallel links, affine latencies with coefficients in the ranges of the
/// bundled two-link instance: free-flow times in [5, 25], slopes in [1, 4], demand 5.
pub fn random_affine(seed: u64) -> RoutingScenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p: f64 = rng.gen_range(0.2..0.8);
    let latency = (0..2)
        .map(|_| (0..2).map(|_| vec![rng.gen_range(5.0..25.0), rng.gen_range(1.0..4.0)]).collect())
        .collect();
    RoutingScenario::parallel(vec![p, 1.0 - p], latency, 5.0).unwrap()
}

/// A solution block as published: atoms as columns (`routes x m`), message or
/// recommendation weights (`states x m`) and the non-participant flow.
pub struct PublishedBlock {
    pub instance: &'static str,
    pub public: bool,
    pub nu: f64,
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

fn columns(rows: &[&[f64]]) -> Vec<Vec<f64>> {
    let m = rows[0].len();
    (0..m).map(|k| rows.iter().map(|r| r[k]).collect()).collect()
}

const I: [[f64; 2]; 2] = [[1.0, 0.0], [0.0, 1.0]];
const N: [[f64; 2]; 2] = [[1.0, 0.0], [1.0, 0.0]];

fn block(instance: &'static str, public: bool, nu: f64, x: &[&[f64]], w: [[f64; 2]; 2], y: &[f64]) -> PublishedBlock {
    PublishedBlock {
        instance,
        public,
        nu,
        atoms: columns(x),
        weights: w.iter().map(|r| r.to_vec()).collect(),
        y: y.to_vec(),
    }
}

/// Every optimal private and public block listed for the four instances.
pub fn published_blocks() -> Vec<PublishedBlock> {
    let a = "two_link_affine";
    let b = "two_link_bpr";
    let wa = "wheatstone_affine";
    let wq = "wheatstone_quadratic";
    vec![
        block(a, true, 0.25, &[&[1.25, 0.0], &[0.0, 1.25]], I, &[3.23, 0.52]),
        block(a, true, 0.5, &[&[2.06, 2.06], &[0.44, 0.44]], N, &[2.11, 0.39]),
        block(a, true, 0.75, &[&[3.75, 0.0], &[0.0, 3.75]], N, &[0.42, 0.83]),
        block(a, true, 1.0, &[&[4.17, 0.2], &[0.83, 4.8]], N, &[0.0, 0.0]),
        block(a, false, 0.25, &[&[0.32, 0.0], &[0.93, 1.25]], I, &[3.75, 0.0]),
        block(a, false, 0.5, &[&[1.58, 0.37], &[0.92, 2.13]], I, &[2.5, 0.0]),
        block(a, false, 0.75, &[&[2.83, 1.62], &[0.92, 2.13]], I, &[1.25, 0.0]),
        block(a, false, 1.0, &[&[4.08, 2.87], &[0.92, 2.13]], I, &[0.0, 0.0]),
        block(b, true, 0.25, &[&[1.25, 0.0], &[0.0, 1.25]], I, &[3.75, 0.0]),
        block(b, true, 0.5, &[&[2.5, 0.0], &[0.0, 2.5]], I, &[2.5, 0.0]),
        block(b, true, 0.75, &[&[3.75, 0.0], &[0.0, 3.75]], I, &[1.25, 0.0]),
        block(b, true, 1.0, &[&[5.0, 2.08], &[0.0, 2.92]], [[0.87, 0.13], [0.0, 1.0]], &[0.0, 0.0]),
        block(b, false, 0.25, &[&[0.99, 0.0], &[0.26, 1.25]], I, &[3.75, 0.0]),
        block(b, false, 0.5, &[&[2.24, 0.0], &[0.26, 2.5]], I, &[2.5, 0.0]),
        block(b, false, 0.75, &[&[3.49, 0.76], &[0.26, 2.99]], I, &[1.25, 0.0]),
        block(b, false, 1.0, &[&[4.74, 2.01], &[0.26, 2.99]], I, &[0.0, 0.0]),
        block(wa, true, 0.25, &[&[0.0, 0.625], &[0.625, 0.0], &[0.0, 0.0]], I, &[1.53, 0.34, 0.0]),
        block(wa, true, 0.5, &[&[0.0, 1.25], &[1.25, 0.0], &[0.0, 0.0]], I, &[1.23, 0.02, 0.0]),
        block(wa, true, 0.75, &[&[0.0, 1.875], &[1.875, 0.0], &[0.0, 0.0]], I, &[0.625, 0.0, 0.0]),
        block(wa, true, 1.0, &[&[0.08, 2.5], &[2.42, 0.0], &[0.0, 0.0]], I, &[0.0, 0.0, 0.0]),
        block(wa, false, 0.25, &[&[0.02, 0.61], &[0.61, 0.02], &[0.0, 0.0]], I, &[1.53, 0.34, 0.0]),
        block(wa, false, 0.5, &[&[0.0, 1.25], &[1.25, 0.0], &[0.0, 0.0]], I, &[1.25, 0.0, 0.0]),
        block(wa, false, 0.75, &[&[0.14, 1.87], &[1.73, 0.0], &[0.0, 0.0]], I, &[0.63, 0.0, 0.0]),
        block(wa, false, 1.0, &[&[0.76, 2.5], &[1.74, 0.0], &[0.0, 0.0]], I, &[0.0, 0.0, 0.0]),
        block(wq, true, 0.25, &[&[0.0, 0.0], &[0.0, 0.625], &[0.625, 0.0]], I, &[1.521, 0.354, 0.0]),
        block(wq, true, 0.5, &[&[0.0, 0.017], &[0.0, 1.233], &[1.25, 0.0]], I, &[1.25, 0.0, 0.0]),
        block(wq, true, 0.75, &[&[0.16, 0.642], &[0.0, 1.233], &[1.715, 0.0]], I, &[0.625, 0.0, 0.0]),
        block(wq, true, 1.0, &[&[0.785, 1.267], &[0.0, 1.233], &[1.715, 0.0]], I, &[0.0, 0.0, 0.0]),
        block(wq, false, 0.25, &[&[0.0, 0.0], &[0.0, 0.625], &[0.625, 0.0]], I, &[1.521, 0.354, 0.0]),
        block(wq, false, 0.5, &[&[0.025, 0.04], &[0.108, 1.21], &[1.117, 0.0]], I, &[1.25, 0.0, 0.0]),
        block(wq, false, 0.75, &[&[0.653, 0.664], &[0.104, 1.211], &[1.118, 0.0]], I, &[0.625, 0.0, 0.0]),
        block(wq, false, 1.0, &[&[1.277, 1.29], &[0.108, 1.21], &[1.115, 0.0]], I, &[0.0, 0.0, 0.0]),
    ]
}
