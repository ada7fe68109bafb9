//! Random map generators for tests and benchmarks.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::model::{Controllability, Factor, FcmGraph, Influence, Sign, Strength};

const SIGNS: [Sign; 3] = [Sign::Positive, Sign::Negative, Sign::Neutral];
const STRENGTHS: [Strength; 3] = [Strength::Weak, Strength::Medium, Strength::Strong];

fn factor_id(i: usize, n: usize) -> String {
    let width = n.saturating_sub(1).to_string().len();
    format!("f{i:0width$}")
}

fn factors<R: Rng>(n: usize, rng: &mut R) -> Vec<Factor> {
    (0..n)
        .map(|i| {
            let id = factor_id(i, n);
            let level = *Controllability::ALL.choose(rng).expect("non-empty");
            Factor::new(id.clone(), id, level)
        })
        .collect()
}

fn influence<R: Rng>(s: usize, t: usize, n: usize, rng: &mut R) -> Influence {
    Influence::new(
        factor_id(s, n),
        factor_id(t, n),
        *SIGNS.choose(rng).expect("non-empty"),
        *STRENGTHS.choose(rng).expect("non-empty"),
    )
}

/// Erdős–Rényi digraph without self-loops: each ordered pair gets an edge
/// with probability `p`. Labels, signs and strengths are random.
pub fn random_digraph<R: Rng>(n: usize, p: f64, rng: &mut R) -> FcmGraph {
    let mut edges = Vec::new();
    for s in 0..n {
        for t in 0..n {
            if s != t && rng.random_bool(p) {
                edges.push(influence(s, t, n, rng));
            }
        }
    }
    FcmGraph::new(factors(n, rng), edges).expect("generated graph is valid")
}

/// `edges` distinct random non-loop edges over `n` nodes.
pub fn random_sparse<R: Rng>(n: usize, edges: usize, rng: &mut R) -> FcmGraph {
    assert!(n >= 2 && edges <= n * (n - 1));
    let mut chosen = std::collections::BTreeSet::new();
    while chosen.len() < edges {
        let s = rng.random_range(0..n);
        let t = rng.random_range(0..n);
        if s != t {
            chosen.insert((s, t));
        }
    }
    let list = chosen.into_iter().map(|(s, t)| influence(s, t, n, rng)).collect();
    FcmGraph::new(factors(n, rng), list).expect("generated graph is valid")
}
