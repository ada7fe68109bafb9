use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::FcmGraph;

const SAMPLES: usize = 3;
const RELATIVE_TOLERANCE: f64 = 1e-9;
const SEED: u64 = 0x5eed_c0de;

/// Generic rank of the controllability matrix `[B, AB, ..., A^(N-1) B]`
/// for inputs attached to `config`. `A` keeps the sign pattern of the
/// transposed adjacency with magnitudes drawn uniformly from [0.5, 1.5];
/// the best of three independent draws is returned. Full rank `N` means the
/// map is structurally controllable from these drivers.
pub fn structural_controllability_rank(graph: &FcmGraph, config: &[String]) -> Result<usize> {
    structural_controllability_rank_with_rng(graph, config, &mut ChaCha8Rng::seed_from_u64(SEED))
}

pub fn structural_controllability_rank_with_rng<R: Rng>(
    graph: &FcmGraph,
    config: &[String],
    rng: &mut R,
) -> Result<usize> {
    if config.is_empty() {
        return Err(Error::EmptyConfig);
    }
    let drivers = config
        .iter()
        .map(|id| graph.index_of(id).ok_or_else(|| Error::UnknownFactor(id.clone())))
        .collect::<Result<Vec<usize>>>()?;
    let n = graph.len();
    let edges: Vec<(usize, usize, f64)> = graph
        .edge_indices()
        .into_iter()
        .zip(graph.influences())
        .map(|((s, t), inf)| (s, t, inf.sign.factor()))
        .collect();

    let mut input = DMatrix::zeros(n, drivers.len());
    for (col, &row) in drivers.iter().enumerate() {
        input[(row, col)] = 1.0;
    }

    let mut best = 0;
    for _ in 0..SAMPLES {
        let mut a = DMatrix::zeros(n, n);
        for &(s, t, sign) in &edges {
            a[(t, s)] = sign * rng.random_range(0.5..=1.5);
        }
        let k = drivers.len();
        let mut krylov = DMatrix::zeros(n, n * k);
        let mut block = input.clone();
        for step in 0..n {
            krylov.columns_mut(step * k, k).copy_from(&block);
            block = &a * block;
        }
        best = best.max(numeric_rank(krylov));
        if best == n {
            break;
        }
    }
    Ok(best)
}

fn numeric_rank(m: DMatrix<f64>) -> usize {
    let sv = m.singular_values();
    let top = sv.iter().copied().fold(0.0_f64, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RELATIVE_TOLERANCE * top).count()
}
