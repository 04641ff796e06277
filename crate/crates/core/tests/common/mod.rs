//! Brute-force reference implementations and random instance generators
//! shared by the integration tests.
#![allow(dead_code)]

use lmssc::data::{generate_synthetic, make_split, SyntheticSpec};
use lmssc::{permute_labeled_first, MultiViewDataset};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    lo: f64,
    hi: f64,
) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

/// Projection onto the probability simplex by trying every support set:
/// on support `P` the KKT point is `v_P − θ` with `θ = (Σ v_P − 1)/|P|`.
/// The feasible candidate closest to `v` wins.
pub fn simplex_qp_oracle(v: &[f64]) -> Vec<f64> {
    let m = v.len();
    assert!(m <= 16, "exhaustive oracle is exponential");
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << m) {
        let support: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let theta = (support.iter().map(|&i| v[i]).sum::<f64>() - 1.0) / support.len() as f64;
        let mut s = vec![0.0; m];
        let mut feasible = true;
        for &i in &support {
            s[i] = v[i] - theta;
            if s[i] < -1e-14 {
                feasible = false;
            }
        }
        if !feasible {
            continue;
        }
        let dist: f64 = s.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(d, _)| dist < *d) {
            best = Some((dist, s));
        }
    }
    best.expect("some support is always feasible").1
}

/// `wᵀGw − 2cᵀw`, the NNLS objective up to a constant.
pub fn quadratic_value(gram: &DMatrix<f64>, c: &DVector<f64>, w: &DVector<f64>) -> f64 {
    (w.transpose() * gram * w)[(0, 0)] - 2.0 * c.dot(w)
}

/// NNLS by enumerating all `2^r` passive sets, solving each unconstrained
/// subproblem with LU and keeping the best feasible one.
pub fn nnls_oracle(gram: &DMatrix<f64>, c: &DVector<f64>) -> DVector<f64> {
    let r = c.len();
    assert!(r <= 12, "exhaustive oracle is exponential");
    let mut best = DVector::zeros(r);
    let mut best_val = 0.0;
    for mask in 1u32..(1 << r) {
        let p: Vec<usize> = (0..r).filter(|i| mask & (1 << i) != 0).collect();
        let g = DMatrix::from_fn(p.len(), p.len(), |a, b| gram[(p[a], p[b])]);
        let rhs = DVector::from_fn(p.len(), |a, _| c[p[a]]);
        let Some(sol) = g.lu().solve(&rhs) else {
            continue;
        };
        if sol.iter().any(|&x| x < 0.0) {
            continue;
        }
        let mut w = DVector::zeros(r);
        for (a, &i) in p.iter().enumerate() {
            w[i] = sol[a];
        }
        let val = quadratic_value(gram, c, &w);
        if val < best_val {
            best_val = val;
            best = w;
        }
    }
    best
}

/// Largest violation of the NNLS optimality conditions at `w`.
pub fn nnls_kkt_residual(gram: &DMatrix<f64>, c: &DVector<f64>, w: &DVector<f64>) -> f64 {
    let g = gram * w - c;
    let mut worst: f64 = 0.0;
    for i in 0..w.len() {
        worst = worst.max((-w[i]).max(0.0));
        worst = worst.max((-g[i]).max(0.0));
        worst = worst.max((w[i] * g[i]).abs());
    }
    worst
}

/// Squared distances between columns by an explicit triple loop.
pub fn naive_sq_dist(points: &DMatrix<f64>) -> DMatrix<f64> {
    let n = points.ncols();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..points.nrows() {
                let diff = points[(k, i)] - points[(k, j)];
                acc += diff * diff;
            }
            d[(i, j)] = acc;
        }
    }
    d
}

/// `½ Σ_ij a_ij ‖m_i − m_j‖²` over columns of `m`, with `a = (S + Sᵀ)/2`.
pub fn naive_smoothness(s: &DMatrix<f64>, m_cols: &DMatrix<f64>) -> f64 {
    let n = s.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let a = 0.5 * (s[(i, j)] + s[(j, i)]);
            let mut d = 0.0;
            for k in 0..m_cols.nrows() {
                let diff = m_cols[(k, i)] - m_cols[(k, j)];
                d += diff * diff;
            }
            acc += a * d;
        }
    }
    0.5 * acc
}

/// The full objective assembled entry by entry.
#[allow(clippy::too_many_arguments)]
pub fn naive_objective(
    views: &[DMatrix<f64>],
    w: &[DMatrix<f64>],
    h: &DMatrix<f64>,
    s: &DMatrix<f64>,
    f: &DMatrix<f64>,
    beta: f64,
    gamma: f64,
    alpha: f64,
) -> f64 {
    let mut rec = 0.0;
    for (x, wv) in views.iter().zip(w) {
        for i in 0..x.nrows() {
            for j in 0..x.ncols() {
                let mut pred = 0.0;
                for k in 0..h.nrows() {
                    pred += wv[(i, k)] * h[(k, j)];
                }
                rec += (x[(i, j)] - pred).powi(2);
            }
        }
    }
    let mut s_norm = 0.0;
    for x in s.iter() {
        s_norm += x * x;
    }
    rec + beta * (naive_smoothness(s, h) + alpha * s_norm)
        + gamma * naive_smoothness(s, &f.transpose())
}

/// Dense `L = D − A` for a symmetric affinity.
pub fn dense_laplacian(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            a.row(i).sum() - a[(i, i)]
        } else {
            -a[(i, j)]
        }
    })
}

/// `F_u` from the full LU solve of `L_uu F_u = −L_ul Y_l`.
pub fn dense_harmonic(l_full: &DMatrix<f64>, y_l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l_full.nrows();
    let l = y_l.nrows();
    let u = n - l;
    let luu = l_full.view((l, l), (u, u)).into_owned();
    let lul = l_full.view((l, 0), (u, l)).into_owned();
    luu.lu()
        .solve(&(-(lul * y_l)))
        .expect("L_uu is nonsingular")
}

/// Random symmetric affinity on `n` nodes that is connected: a random
/// spanning path plus independent extra edges with probability `p`.
pub fn random_connected_affinity(rng: &mut ChaCha8Rng, n: usize, p: f64) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    for w in order.windows(2) {
        let x = rng.random_range(0.1..1.0);
        a[(w[0], w[1])] = x;
        a[(w[1], w[0])] = x;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(p) {
                let x = rng.random_range(0.1..1.0);
                a[(i, j)] = x;
                a[(j, i)] = x;
            }
        }
    }
    a
}

/// Block-diagonal affinity with `blocks` connected random blocks and
/// node labels shuffled.
pub fn random_block_affinity(rng: &mut ChaCha8Rng, sizes: &[usize], p: f64) -> DMatrix<f64> {
    let n: usize = sizes.iter().sum();
    let mut a = DMatrix::zeros(n, n);
    let mut start = 0;
    for &size in sizes {
        let block = random_connected_affinity(rng, size, p);
        a.view_mut((start, start), (size, size)).copy_from(&block);
        start += size;
    }
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    DMatrix::from_fn(n, n, |i, j| a[(perm[i], perm[j])])
}

/// The planted benchmark configuration, split at `rate`.
pub fn planted(data_seed: u64, rate: f64, split_seed: u64) -> MultiViewDataset {
    let spec = SyntheticSpec {
        rng_seed: data_seed,
        ..SyntheticSpec::default()
    };
    let raw = generate_synthetic(&spec).unwrap().raw;
    let mask = make_split(&raw.labels, raw.class_count, rate, split_seed).unwrap();
    permute_labeled_first(&raw.views, &raw.labels, raw.class_count, &mask).unwrap()
}

/// A smaller planted problem for tests that fit many times.
pub fn small_planted(seed: u64, n: usize, rate: f64) -> MultiViewDataset {
    let spec = SyntheticSpec {
        n_samples: n,
        n_classes: 3,
        latent_dim: 3,
        view_dims: vec![8, 6],
        rng_seed: seed,
        ..SyntheticSpec::default()
    };
    let raw = generate_synthetic(&spec).unwrap().raw;
    let mask = make_split(&raw.labels, raw.class_count, rate, seed).unwrap();
    permute_labeled_first(&raw.views, &raw.labels, raw.class_count, &mask).unwrap()
}
