//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scsar::engine::ClusterAssignment;
use scsar::likelihood::ModelFamily;
use scsar::synthesis::{self, ClusterParams, SyntheticGraph, SyntheticSpec};
use scsar::{Dataset, SpatialWeights};

pub const LN_2PI: f64 = 1.837_877_066_409_345_3;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Erdos-Renyi graph with at least one edge.
pub fn random_graph(n: usize, prob: f64, rng: &mut ChaCha8Rng) -> SpatialWeights {
    loop {
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < prob {
                    pairs.push((i, j));
                }
            }
        }
        if !pairs.is_empty() {
            return SpatialWeights::from_index_pairs(n, pairs).unwrap();
        }
    }
}

pub fn random_coords(n: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    (0..n).map(|_| [rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0]).collect()
}

/// Single-regime data on a symmetrised kNN graph over random points.
pub fn single_regime(
    n: usize,
    n_cov: usize,
    family: ModelFamily,
    param: f64,
    knn: usize,
    seed: u64,
) -> (Dataset, SpatialWeights) {
    let mut r = rng(seed);
    let coords = random_coords(n, &mut r);
    let (w, _) = SpatialWeights::from_knn(&coords, knn).unwrap();
    let p = n_cov + 1;
    let len = if family == ModelFamily::Slx { 2 * p - 1 } else { p };
    let theta: Vec<f64> = (0..len).map(|_| r.random::<f64>() * 4.0 - 2.0).collect();
    let spec = SyntheticSpec {
        graph: SyntheticGraph::Explicit { w, coords },
        partition: Some(ClusterAssignment::uniform(n, 1)),
        clusters: vec![ClusterParams {
            family,
            spatial_param: param,
            theta,
            sigma: 0.5 + r.random::<f64>(),
        }],
        n_covariates: n_cov,
        seed: seed.wrapping_mul(31).wrapping_add(7),
    };
    let s = synthesis::generate(&spec).unwrap();
    (s.dataset, s.weights)
}

/// OLS through the normal equations.
pub fn ols_normal_equations(y: &[f64], x: &DMatrix<f64>) -> Vec<f64> {
    let xtx = x.transpose() * x;
    let xty = x.transpose() * DVector::from_column_slice(y);
    let chol = xtx.cholesky().expect("full rank design");
    chol.solve(&xty).iter().copied().collect()
}

pub fn dense_logdet(w: &SpatialWeights, rho: f64) -> f64 {
    let n = w.n();
    let m = DMatrix::<f64>::identity(n, n) - w.to_dense() * rho;
    m.lu().determinant().abs().ln()
}

pub fn gaussian_loglik(e: &[f64], sigma2: f64) -> f64 {
    let n = e.len() as f64;
    let rss: f64 = e.iter().map(|v| v * v).sum();
    -0.5 * n * (LN_2PI + sigma2.ln()) - rss / (2.0 * sigma2)
}

/// Gini on a 0-100 scale from individual values by mean absolute
/// difference, with the n/(n-1) correction.
pub fn brute_gini(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let mut s = 0.0;
    for a in values {
        for b in values {
            s += (a - b).abs();
        }
    }
    s / (2.0 * n * n * mean) * n / (n - 1.0) * 100.0
}

/// Expands classes into identical farms.
pub fn expand_classes(counts: &[u64], outputs: &[f64]) -> Vec<f64> {
    counts
        .iter()
        .zip(outputs)
        .flat_map(|(&c, &t)| std::iter::repeat_n(if c > 0 { t / c as f64 } else { 0.0 }, c as usize))
        .collect()
}

/// ARI by enumerating all unit pairs.
pub fn pair_counting_ari(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let (mut both, mut only_a, mut only_b, mut neither) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => both += 1.0,
                (true, false) => only_a += 1.0,
                (false, true) => only_b += 1.0,
                (false, false) => neither += 1.0,
            }
        }
    }
    let total = both + only_a + only_b + neither;
    let sa = both + only_a;
    let sb = both + only_b;
    let expected = sa * sb / total;
    let max = 0.5 * (sa + sb);
    if max == expected {
        1.0
    } else {
        (both - expected) / (max - expected)
    }
}

/// Gini from individual values via the sorted-rank identity, with the
/// n/(n-1) correction. O(n log n), for large expansions.
pub fn sorted_gini(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let total: f64 = v.iter().sum();
    let weighted: f64 = v.iter().enumerate().map(|(i, x)| (2.0 * (i as f64 + 1.0) - n - 1.0) * x).sum();
    weighted / (n * total) * n / (n - 1.0) * 100.0
}
