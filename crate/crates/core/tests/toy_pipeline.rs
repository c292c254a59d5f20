use std::sync::OnceLock;

use disc_core::data_io::{load_sigma_csv, load_vectors_csv};
use disc_core::spectral::{disc_multi_graphs, disc_pair_graphs, leading_eigenvectors};
use disc_core::synth::{generate, Problem, ToyOutput, ToySpec};
use disc_core::{
    build_graph, cluster_features, disc_multi, disc_pair, generalized_cut_vectors, meta_features,
    save_result, significance_elbow, DifferentialResult, FeatureGraph, KernelSpec, Mat,
};

struct Toy1 {
    toy: ToyOutput,
    ga: FeatureGraph,
    gb: FeatureGraph,
    va: DifferentialResult,
    vb: DifferentialResult,
}

fn toy1() -> &'static Toy1 {
    static CELL: OnceLock<Toy1> = OnceLock::new();
    CELL.get_or_init(|| {
        let toy = generate(&ToySpec::new(Problem::NewlyConnected)).unwrap();
        let k = KernelSpec::default();
        let ga = build_graph(&toy.datasets[0], &k).unwrap();
        let gb = build_graph(&toy.datasets[1], &k).unwrap();
        let (va, vb) = disc_pair_graphs(&ga, &gb, 20, 20, 10).unwrap();
        Toy1 { toy, ga, gb, va, vb }
    })
}

fn support(v: &Mat<f64>, cols: usize, threshold: f64) -> Vec<usize> {
    (0..v.nrows())
        .filter(|&i| (0..cols).any(|j| v[(i, j)].abs() > threshold))
        .collect()
}

#[test]
fn eigenvalues_are_real_and_bounded() {
    let t = toy1();
    for g in [&t.ga, &t.gb] {
        let b = leading_eigenvectors(g, 20).unwrap();
        assert_eq!(b.eigenvalues().len(), 20);
        for &l in b.eigenvalues() {
            assert!(l.is_finite() && (-1.0 - 1e-12..=1.0 + 1e-12).contains(&l), "{l}");
        }
        assert!((b.eigenvalues()[0] - 1.0).abs() < 1e-10);
    }
}

#[test]
fn top_supports_are_disjoint() {
    let t = toy1();
    let sa = support(t.va.vectors(), 2, 0.05);
    let sb = support(t.vb.vectors(), 2, 0.05);
    let shared: Vec<usize> = sa.iter().copied().filter(|i| sb.contains(i)).collect();
    assert!(shared.is_empty(), "{} features in both top-2 supports: {shared:?}", shared.len());
}

#[test]
fn off_block_loadings_are_the_projected_out_noise_mean() {
    // V_A lies in the range of Q_B, and B's leading eigenvectors span the
    // indicator of its 150-feature noise cluster (features 1-100 and 151-200).
    // The block-sum direction 1_{151-200} minus its mean over that cluster has
    // entries -(1/3)/sqrt(100/3) on features 1-100.
    let t = toy1();
    let tail = (1.0f64 / 3.0) / (100.0f64 / 3.0).sqrt();
    for v in [t.va.vectors(), t.vb.vectors()] {
        let mean_abs = |j: usize| (0..100).map(|i| v[(i, j)].abs()).sum::<f64>() / 100.0;
        let big = mean_abs(0).max(mean_abs(1));
        assert!((big - tail).abs() < 0.1 * tail, "tail {big:.4} vs {tail:.4}");
        let sa = support(v, 2, tail * 1.25);
        assert!(sa.iter().all(|&i| i >= 150));
    }
    let sa = support(t.va.vectors(), 2, tail * 1.25);
    let sb = support(t.vb.vectors(), 2, tail * 1.25);
    assert!(sa.iter().all(|i| (150..200).contains(i)) && sb.iter().all(|i| (200..250).contains(i)));
}

#[test]
fn elbow_of_toy_significance_is_two() {
    let t = toy1();
    assert_eq!(significance_elbow(t.va.significance()), 2);
    assert_eq!(significance_elbow(t.vb.significance()), 2);
}

#[test]
fn two_dataset_multi_matches_pair() {
    let t = toy1();
    let multi = disc_multi_graphs(&[t.ga.clone(), t.gb.clone()], &[20, 20], 10).unwrap();
    for (m, pair) in multi.results.iter().zip([&t.va, &t.vb]) {
        for (x, y) in m.significance().iter().zip(pair.significance()) {
            assert!((x - y).abs() <= 1e-10);
        }
        for j in 0..2 {
            for i in 0..250 {
                assert!((m.vectors()[(i, j)] - pair.vectors()[(i, j)]).abs() <= 1e-10);
            }
        }
    }
    assert_eq!(multi.dropped, vec![0, 0]);
}

#[test]
fn identical_inputs_give_identical_significance() {
    let x = &toy1().toy.datasets[0];
    let (a, b) = disc_pair(x, x, 20, 20, 10, &KernelSpec::default()).unwrap();
    assert_eq!(a.significance(), b.significance());
    let three = disc_multi(&[x.clone(), x.clone(), x.clone()], &[5, 5, 5], 4, &KernelSpec::default()).unwrap();
    let s0 = three.results[0].significance();
    for r in &three.results[1..] {
        assert_eq!(r.significance(), s0);
    }
}

fn cut_mass(a: &FeatureGraph, b: &FeatureGraph, on: std::ops::Range<usize>) -> f64 {
    let cut = generalized_cut_vectors(a, b, 1e-3, 2).unwrap();
    let v = &cut.vectors;
    let total: f64 = (0..250).map(|i| v[(i, 0)] * v[(i, 0)]).sum();
    on.map(|i| v[(i, 0)] * v[(i, 0)]).sum::<f64>() / total
}

#[test]
fn generalized_cut_agrees_with_differential_support() {
    // Large eigenvalues of (L_X + eps I)^-1 L_Y favour vectors that are smooth on
    // Y's graph and rough on X's, so the target graph goes in the inverted slot.
    let t = toy1();
    let b_target = cut_mass(&t.gb, &t.ga, 200..250);
    let a_target = cut_mass(&t.ga, &t.gb, 150..200);
    assert!(b_target >= 0.8, "B-specific mass {b_target:.3}");
    assert!(a_target >= 0.8, "A-specific mass {a_target:.3}");
}

#[test]
fn clusters_of_toy_loadings_isolate_the_two_groups() {
    // The 151-200 block holds two independent correlated groups, so k = 3 splits
    // it in two rather than keeping it whole.
    let t = toy1();
    let v = Mat::from_fn(250, 2, |i, j| t.va.vectors()[(i, j)]);
    let c = cluster_features(&v, 3, 0).unwrap();
    let members = c.members();
    let covered: usize = members
        .iter()
        .filter(|m| m.iter().all(|i| (150..200).contains(i)))
        .map(Vec::len)
        .sum();
    assert!(covered >= 45, "{members:?}");
    let biggest = members.iter().map(Vec::len).max().unwrap();
    assert!(biggest >= 195, "background cluster has {biggest} features");
}

#[test]
fn meta_feature_variance_comes_from_the_specific_block() {
    let t = toy1();
    let x = &t.toy.datasets[1];
    let v1 = Mat::from_fn(250, 1, |i, _| t.vb.vectors()[(i, 0)]);
    let v_block = Mat::from_fn(250, 1, |i, _| if (200..250).contains(&i) { v1[(i, 0)] } else { 0.0 });
    let var = |m: &Mat<f64>| {
        let n = m.nrows() as f64;
        let mean = (0..m.nrows()).map(|i| m[(i, 0)]).sum::<f64>() / n;
        (0..m.nrows()).map(|i| (m[(i, 0)] - mean).powi(2)).sum::<f64>() / n
    };
    let full = var(&meta_features(x, &v1).unwrap());
    let block = var(&meta_features(x, &v_block).unwrap());
    assert!(block / full >= 0.9, "block share {:.3}", block / full);
}

#[test]
fn saved_results_round_trip() {
    let t = toy1();
    let dir = tempfile::tempdir().unwrap();
    save_result(&t.va, t.toy.datasets[0].feature_ids(), dir.path(), "a").unwrap();
    let (ids, v) = load_vectors_csv(dir.path().join("v_a.csv")).unwrap();
    assert_eq!(ids, t.toy.datasets[0].feature_ids());
    assert_eq!(&v, t.va.vectors());
    let sigma = load_sigma_csv(dir.path().join("sigma_a.csv")).unwrap();
    assert_eq!(sigma, t.va.significance());
}

#[test]
fn split_both_flags_both_sides() {
    let toy = generate(&ToySpec::new(Problem::SplitBoth).with_n(4000)).unwrap();
    let (a, b) = disc_pair(&toy.datasets[0], &toy.datasets[1], 20, 20, 4, &KernelSpec::default()).unwrap();
    for (res, gt) in [(&a, &toy.ground_truth[0]), (&b, &toy.ground_truth[1])] {
        let v = res.vectors();
        let on: f64 = gt.iter().map(|&i| v[(i, 0)] * v[(i, 0)]).sum();
        assert!(on >= 0.8, "first vector mass {on:.3}");
    }
}
