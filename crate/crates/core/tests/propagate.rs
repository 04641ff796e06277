mod common;

use common::*;
use lmssc::graph::laplacian_from_affinity;
use lmssc::propagate::{
    argmax_rows, gfhf_baseline, harmonic_solve, knn_gaussian_affinity, Bandwidth, KnnGraphConfig,
    KnnRule,
};
use lmssc::{one_hot, Error};
use nalgebra::DMatrix;
use rand::Rng;

#[test]
fn harmonic_matches_dense_solve() {
    let mut rng = rng(20);
    for _ in 0..50 {
        let n = rng.random_range(3..=50);
        let l = rng.random_range(1..n);
        let c = rng.random_range(2..5);
        let a = random_connected_affinity(&mut rng, n, 0.1);
        let lap = laplacian_from_affinity(&a);
        let labels: Vec<usize> = (0..l).map(|_| rng.random_range(0..c)).collect();
        let y = one_hot(&labels, c);
        let sol = harmonic_solve(&lap, &y).unwrap();
        assert!(sol.ridge.is_none());
        let f = &sol.labels.scores;
        assert_eq!(f.rows(0, l), y);
        let fu = f.rows(l, n - l).into_owned();
        assert!((&fu - dense_harmonic(&dense_laplacian(&a), &y)).amax() <= 1e-8);
        assert!((&lap.matrix * f).rows(l, n - l).amax() <= 1e-8);
        for row in fu.row_iter() {
            assert!(row.iter().all(|&x| (-1e-12..=1.0 + 1e-12).contains(&x)));
            assert!((row.sum() - 1.0).abs() <= 1e-6);
        }
    }
}

#[test]
fn path_midpoint_is_exactly_half() {
    let a = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0]);
    let y = one_hot(&[0, 1], 2);
    let f = harmonic_solve(&laplacian_from_affinity(&a), &y)
        .unwrap()
        .labels
        .scores;
    assert_eq!(f[(2, 0)], 0.5);
    assert_eq!(f[(2, 1)], 0.5);
}

#[test]
fn stranded_nodes_are_listed() {
    let mut a = random_block_affinity(&mut rng(21), &[4], 0.5);
    a = a.resize(6, 6, 0.0);
    a[(4, 5)] = 1.0;
    a[(5, 4)] = 1.0;
    let err = harmonic_solve(&laplacian_from_affinity(&a), &one_hot(&[0, 1], 2)).unwrap_err();
    match err {
        Error::DisconnectedUnlabeled { nodes } => assert_eq!(nodes, vec![4, 5]),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn argmax_breaks_ties_low() {
    let f = DMatrix::from_row_slice(2, 3, &[0.2, 0.4, 0.4, 0.5, 0.1, 0.4]);
    assert_eq!(argmax_rows(&f), vec![1, 0]);
}

#[test]
fn knn_graph_is_symmetric_with_zero_diagonal() {
    let mut rng = rng(22);
    let x = random_matrix(&mut rng, 3, 25, 0.0, 1.0);
    for rule in [KnnRule::Union, KnnRule::Mutual] {
        let cfg = KnnGraphConfig {
            k: 4,
            rule,
            bandwidth: Bandwidth::Median,
        };
        let a = knn_gaussian_affinity(&x, &cfg).unwrap();
        assert_eq!(a, a.transpose());
        assert!(a.diagonal().iter().all(|&v| v == 0.0));
        assert!(a.iter().all(|&v| (0.0..=1.0).contains(&v)));
        for i in 0..25 {
            let deg = a.row(i).iter().filter(|&&v| v > 0.0).count();
            match rule {
                KnnRule::Union => assert!(deg >= 4),
                KnnRule::Mutual => assert!(deg <= 4),
            }
        }
    }
}

#[test]
fn gfhf_separates_distant_blobs() {
    let mut rng = rng(23);
    let n = 40;
    let x = DMatrix::from_fn(2, n, |r, j| {
        let center = if j % 2 == 0 { 0.0 } else { 10.0 };
        center
            + if r == 0 {
                rng.random_range(-1.0..1.0)
            } else {
                0.0
            }
    });
    // Storage order: samples 0 and 1 labeled.
    let truth: Vec<usize> = (0..n).map(|j| j % 2).collect();
    let out = gfhf_baseline(
        &x,
        &truth[..2],
        2,
        &KnnGraphConfig {
            k: 5,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(out.predictions, truth[2..].to_vec());
}
