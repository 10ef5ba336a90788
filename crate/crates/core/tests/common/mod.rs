//! Random model generators shared by the integration and acceptance tests.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tree_ising::tree::binary_tree_edges;
use tree_ising::{alpha_bounds, build_tree, MeanParamIsing, TreeTopology};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform random recursive tree with shuffled vertex indices.
pub fn random_topology(rng: &mut ChaCha8Rng, d: usize) -> TreeTopology {
    let mut perm: Vec<usize> = (0..d).collect();
    perm.shuffle(rng);
    let edges: Vec<(usize, usize)> = (1..d)
        .map(|v| (perm[rng.random_range(0..v)], perm[v]))
        .collect();
    build_tree(d, &edges).unwrap()
}

/// Draw `alpha` from the inner 98% of the admissible interval.
pub fn random_alpha(rng: &mut ChaCha8Rng, qu: f64, qv: f64) -> f64 {
    let (lo, hi) = alpha_bounds(qu, qv).unwrap();
    lo + (hi - lo) * (0.01 + 0.98 * rng.random::<f64>())
}

/// Random tree, marginals in `[0.05, 0.95]`, random root.
pub fn random_model(rng: &mut ChaCha8Rng, d: usize) -> MeanParamIsing {
    let topo = random_topology(rng, d);
    let q: Vec<f64> = (0..d).map(|_| rng.random_range(0.05..0.95)).collect();
    let alpha = topo
        .edges()
        .iter()
        .map(|e| random_alpha(rng, q[e.u], q[e.v]))
        .collect();
    let root = rng.random_range(0..d);
    MeanParamIsing::new(topo.root_at(root).unwrap(), q, alpha).unwrap()
}

/// Random tree with one common marginal `q` and correlations in `(0, 1)`.
pub fn random_common_q_model(rng: &mut ChaCha8Rng, d: usize, q: f64) -> MeanParamIsing {
    let topo = random_topology(rng, d);
    let alpha = (0..d - 1).map(|_| rng.random_range(0.01..0.99)).collect();
    MeanParamIsing::new(topo.root_at(0).unwrap(), vec![q; d], alpha).unwrap()
}

/// The 7-vertex binary tree with common `q` and `alpha = 0.7`.
pub fn study_model(q: f64) -> MeanParamIsing {
    let rt = build_tree(7, &binary_tree_edges(7))
        .unwrap()
        .root_at(0)
        .unwrap();
    MeanParamIsing::homogeneous(rt, q, 0.7).unwrap()
}
