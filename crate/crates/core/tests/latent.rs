mod common;

use common::*;
use lmssc::graph::laplacian_from_affinity;
use lmssc::latent::{
    nnls_gram, nnls_row, update_shared_factor, update_view_factors, SylvesterSystem,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

#[test]
fn nnls_matches_support_enumeration() {
    let mut rng = rng(10);
    for _ in 0..50 {
        let r = rng.random_range(1..=8);
        let n = rng.random_range(r + 1..r + 15);
        let h = random_matrix(&mut rng, r, n, -1.0, 1.0);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..2.0)).collect();
        let w = DVector::from_vec(nnls_row(&x, &h).unwrap());
        let gram = &h * h.transpose();
        let c = &h * DVector::from_column_slice(&x);
        let oracle = nnls_oracle(&gram, &c);
        assert!((&w - &oracle).amax() <= 1e-8, "{w} vs {oracle}");
        assert!(nnls_kkt_residual(&gram, &c, &w) <= 1e-8);
    }
}

#[test]
fn nnls_with_rank_deficient_gram_stays_optimal() {
    // Duplicate rows in H make the Gram matrix singular.
    let mut rng = rng(11);
    for _ in 0..10 {
        let base = random_matrix(&mut rng, 3, 12, 0.0, 1.0);
        let h = DMatrix::from_fn(4, 12, |i, j| base[(i.min(2), j)]);
        let x: Vec<f64> = (0..12).map(|_| rng.random_range(0.0..2.0)).collect();
        let w = DVector::from_vec(nnls_row(&x, &h).unwrap());
        let gram = &h * h.transpose();
        let c = &h * DVector::from_column_slice(&x);
        let oracle = nnls_oracle(&gram, &c);
        let gap = quadratic_value(&gram, &c, &w) - quadratic_value(&gram, &c, &oracle);
        assert!(gap <= 1e-9, "objective gap {gap}");
        assert!(w.iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn nnls_gram_zero_rhs_is_zero() {
    let g = DMatrix::identity(3, 3);
    assert_eq!(
        nnls_gram(&g, &DVector::zeros(3)).unwrap(),
        DVector::zeros(3)
    );
}

#[test]
fn view_factors_match_row_solves() {
    let mut rng = rng(12);
    let h = random_matrix(&mut rng, 3, 10, 0.0, 1.0);
    let views = vec![
        random_matrix(&mut rng, 4, 10, 0.0, 2.0),
        random_matrix(&mut rng, 2, 10, -1.0, 1.0),
    ];
    let w = update_view_factors(&views, &h).unwrap();
    for (x, wv) in views.iter().zip(&w) {
        assert_eq!(wv.shape(), (x.nrows(), 3));
        for i in 0..x.nrows() {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            let single = nnls_row(&row, &h).unwrap();
            for k in 0..3 {
                assert!((wv[(i, k)] - single[k]).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn view_factor_dimension_mismatch_names_the_view() {
    let h = DMatrix::zeros(2, 5);
    let views = vec![DMatrix::zeros(3, 5), DMatrix::zeros(3, 4)];
    let err = update_view_factors(&views, &h).unwrap_err();
    assert!(err.to_string().contains("view 1"), "{err}");
}

#[test]
fn sylvester_residual_is_small() {
    let mut rng = rng(13);
    for _ in 0..50 {
        let r = rng.random_range(1..=8);
        let n = rng.random_range(2..=30);
        let m = random_matrix(&mut rng, r + 2, r, 0.0, 1.0);
        let a = m.transpose() * m;
        let lap = laplacian_from_affinity(&random_connected_affinity(&mut rng, n, 0.2));
        let sys = SylvesterSystem {
            a,
            scale: rng.random_range(0.01..10.0),
            laplacian: lap.matrix,
            rhs: random_matrix(&mut rng, r, n, -5.0, 5.0),
        };
        let h = update_shared_factor(&sys).unwrap();
        let res = sys.residual(&h);
        assert!(res <= 1e-8 * sys.rhs.norm().max(1.0), "residual {res}");
    }
}

#[test]
fn sylvester_matches_kronecker_solve() {
    // vec(AH + βHL) = (I ⊗ A + β Lᵀ ⊗ I) vec(H)
    let mut rng = rng(14);
    let (r, n) = (3, 5);
    let m = random_matrix(&mut rng, 4, r, 0.0, 1.0);
    let a = m.transpose() * m;
    let lap = laplacian_from_affinity(&random_connected_affinity(&mut rng, n, 0.5)).matrix;
    let beta = 0.7;
    let b = random_matrix(&mut rng, r, n, -1.0, 1.0);
    let sys = SylvesterSystem {
        a: a.clone(),
        scale: beta,
        laplacian: lap.clone(),
        rhs: b.clone(),
    };
    let h = update_shared_factor(&sys).unwrap();
    let big = DMatrix::from_fn(r * n, r * n, |p, q| {
        let (i, j) = (p % r, p / r);
        let (k, l) = (q % r, q / r);
        let mut v = 0.0;
        if j == l {
            v += a[(i, k)];
        }
        if i == k {
            v += beta * lap[(l, j)];
        }
        v
    });
    let vec_h = big
        .lu()
        .solve(&DVector::from_column_slice(b.as_slice()))
        .unwrap();
    let dense = DMatrix::from_column_slice(r, n, vec_h.as_slice());
    assert!((&h - dense).amax() <= 1e-10);
}

#[test]
fn singular_factor_gram_is_ridged() {
    // All-zero W gives A = 0; with L = 0 the ridge keeps the solve defined.
    let sys = SylvesterSystem {
        a: DMatrix::zeros(2, 2),
        scale: 1.0,
        laplacian: DMatrix::zeros(3, 3),
        rhs: DMatrix::zeros(2, 3),
    };
    assert_eq!(update_shared_factor(&sys).unwrap(), DMatrix::zeros(2, 3));
}
