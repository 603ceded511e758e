mod common;

use scsar::engine::ClusterAssignment;
use scsar::likelihood::ModelFamily;
use scsar::synthesis::{self, adjusted_rand_index, lattice_bands, ClusterParams, SyntheticGraph, SyntheticSpec};
use scsar::SpatialWeights;

use common::*;

fn params(family: ModelFamily) -> Vec<ClusterParams> {
    let param = if family.has_spatial_param() { 0.08 } else { 0.0 };
    let theta = |a: f64| if family == ModelFamily::Slx { vec![a, 1.0, -0.5] } else { vec![a, 1.0] };
    vec![
        ClusterParams { family, spatial_param: param, theta: theta(1.0), sigma: 0.4 },
        ClusterParams { family, spatial_param: -param, theta: theta(-1.0), sigma: 0.7 },
    ]
}

#[test]
fn cross_cluster_edges_carry_no_signal() {
    for family in ModelFamily::ALL {
        let full = SpatialWeights::lattice(6, 6);
        let truth = lattice_bands(6, 6, 2).unwrap();
        let within = SpatialWeights::from_index_pairs(36, full.edges().filter(|&(i, j)| truth.label(i) == truth.label(j))).unwrap();
        let coords: Vec<[f64; 2]> = (0..36).map(|i| [(i % 6) as f64, (i / 6) as f64]).collect();
        let spec = |w: SpatialWeights| SyntheticSpec {
            graph: SyntheticGraph::Explicit { w, coords: coords.clone() },
            partition: Some(truth.clone()),
            clusters: params(family),
            n_covariates: 1,
            seed: 9,
        };
        let a = synthesis::generate(&spec(full.clone())).unwrap();
        let b = synthesis::generate(&spec(within)).unwrap();
        assert_eq!(a.dataset.y(), b.dataset.y(), "{family}");
        assert_eq!(a.noise, b.noise);
    }
}

#[test]
fn generation_is_deterministic() {
    let spec = SyntheticSpec {
        graph: SyntheticGraph::Lattice { rows: 5, cols: 8 },
        partition: None,
        clusters: params(ModelFamily::Sem),
        n_covariates: 1,
        seed: 1,
    };
    let a = synthesis::generate(&spec).unwrap();
    let b = synthesis::generate(&spec).unwrap();
    assert_eq!(a.dataset, b.dataset);
    assert_eq!(a.truth, b.truth);
}

#[test]
fn halves_against_single_label() {
    let truth: Vec<usize> = (0..100).map(|i| usize::from(i >= 50)).collect();
    let est = vec![0; 100];
    let ari = adjusted_rand_index(&truth, &est).unwrap();
    assert!((ari - pair_counting_ari(&truth, &est)).abs() < 1e-12);
    assert_eq!(ari, 0.0);
    let t = ClusterAssignment::new(truth, 2).unwrap();
    assert_eq!(synthesis::score_recovery(&t, &t).unwrap(), 1.0);
}
