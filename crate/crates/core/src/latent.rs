//! Latent-factor subproblems: nonnegative view factors and the shared
//! representation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::types::Laplacian;

/// Ridge added to `Σ_v (W^v)ᵀ W^v` when it is numerically singular.
pub const SYLVESTER_RIDGE: f64 = 1e-10;

/// Smallest eigenvalue of `Σ_v (W^v)ᵀ W^v` below which the ridge is applied.
pub const SYLVESTER_RIDGE_TRIGGER: f64 = 1e-12;

/// Nonnegative least squares in Gram form:
/// `min_{w ≥ 0} ½ wᵀ G w − cᵀ w` with `G = H Hᵀ` and `c = H x`.
///
/// Lawson–Hanson active set. Each basis change (a coordinate entering or
/// leaving the passive set) counts as one swap; the solve fails after
/// `10·r` swaps.
pub fn nnls_gram(gram: &DMatrix<f64>, c: &DVector<f64>) -> Result<DVector<f64>> {
    let r = c.len();
    assert_eq!(gram.shape(), (r, r), "gram matrix must be r x r");
    let scale = c.amax().max(gram.amax()).max(1.0);
    let tol = 1e-13 * scale;
    let cap = 10 * r.max(1);

    let mut w = DVector::zeros(r);
    let mut passive = vec![false; r];
    // Coordinates that failed to enter at the current iterate.
    let mut blocked = vec![false; r];
    let mut swaps = 0usize;

    loop {
        let neg_grad = c - gram * &w;
        let entering = (0..r)
            .filter(|&j| !passive[j] && !blocked[j] && neg_grad[j] > tol)
            .max_by(|&a, &b| neg_grad[a].total_cmp(&neg_grad[b]));
        let Some(j) = entering else { break };

        passive[j] = true;
        swaps += 1;
        if swaps > cap {
            return Err(Error::MaxIterations { swaps });
        }

        let mut first = true;
        loop {
            let z = solve_passive(gram, c, &passive);
            if first && z[j] <= 0.0 {
                // Numerically unable to move along j from here.
                passive[j] = false;
                blocked[j] = true;
                break;
            }
            first = false;
            if (0..r).all(|k| !passive[k] || z[k] > 0.0) {
                w = z;
                blocked.iter_mut().for_each(|b| *b = false);
                break;
            }
            let mut step = f64::INFINITY;
            let mut leaving = j;
            for k in (0..r).filter(|&k| passive[k] && z[k] <= 0.0) {
                let t = w[k] / (w[k] - z[k]);
                if t < step {
                    step = t;
                    leaving = k;
                }
            }
            w += (z - &w) * step;
            w[leaving] = 0.0;
            for k in 0..r {
                if passive[k] && w[k] <= 0.0 {
                    passive[k] = false;
                    w[k] = 0.0;
                    swaps += 1;
                }
            }
            blocked.iter_mut().for_each(|b| *b = false);
            if swaps > cap {
                return Err(Error::MaxIterations { swaps });
            }
        }
    }
    Ok(w)
}

/// Unconstrained minimizer over the passive coordinates, zero elsewhere.
fn solve_passive(gram: &DMatrix<f64>, c: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let idx: Vec<usize> = (0..passive.len()).filter(|&k| passive[k]).collect();
    let sub = gram.select_rows(&idx).select_columns(&idx);
    let rhs = DVector::from_iterator(idx.len(), idx.iter().map(|&k| c[k]));
    let sol = match sub.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => sub
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .expect("SVD with both factors always solves"),
    };
    let mut z = DVector::zeros(passive.len());
    for (pos, &k) in idx.iter().enumerate() {
        z[k] = sol[pos];
    }
    z
}

/// `min_{w ≥ 0} ‖x − wH‖²` for a row vector `x` of length `N` and `H` of
/// size `r × N`.
pub fn nnls_row(x: &[f64], h: &DMatrix<f64>) -> Result<Vec<f64>> {
    if x.len() != h.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "row has {} entries, H has {} columns",
            x.len(),
            h.ncols()
        )));
    }
    let gram = h * h.transpose();
    let c = h * DVector::from_column_slice(x);
    Ok(nnls_gram(&gram, &c)?.iter().copied().collect())
}

/// Row-wise NNLS for every view: row `i` of `W^v` solves
/// `min_{w ≥ 0} ‖X^v_{i,:} − w H‖²`.
pub fn update_view_factors(views: &[DMatrix<f64>], h: &DMatrix<f64>) -> Result<Vec<DMatrix<f64>>> {
    let r = h.nrows();
    let gram = h * h.transpose();
    views
        .iter()
        .enumerate()
        .map(|(v, x)| {
            if x.ncols() != h.ncols() {
                return Err(Error::DimensionMismatch(format!(
                    "view {v} has {} samples, H has {}",
                    x.ncols(),
                    h.ncols()
                )));
            }
            // Row i of X·Hᵀ is (H xᵢᵀ)ᵀ.
            let rhs = x * h.transpose();
            let solve = |i: usize| {
                nnls_gram(&gram, &rhs.row(i).transpose())
                    .map_err(|e| e.context(format!("view {v}, row {i}")))
            };

            #[cfg(feature = "parallel")]
            let rows: Vec<DVector<f64>> = {
                use rayon::prelude::*;
                (0..x.nrows())
                    .into_par_iter()
                    .map(solve)
                    .collect::<Result<_>>()?
            };
            #[cfg(not(feature = "parallel"))]
            let rows: Vec<DVector<f64>> = (0..x.nrows()).map(solve).collect::<Result<_>>()?;

            Ok(DMatrix::from_fn(x.nrows(), r, |i, k| rows[i][k]))
        })
        .collect()
}

/// `A·H + β·H·L = B` with `A = Σ_v (W^v)ᵀ W^v` and `B = Σ_v (W^v)ᵀ X^v`.
#[derive(Debug, Clone)]
pub struct SylvesterSystem {
    pub a: DMatrix<f64>,
    pub scale: f64,
    pub laplacian: DMatrix<f64>,
    pub rhs: DMatrix<f64>,
}

impl SylvesterSystem {
    pub fn assemble(
        views: &[DMatrix<f64>],
        factors: &[DMatrix<f64>],
        beta: f64,
        laplacian: &Laplacian,
    ) -> Result<Self> {
        let (Some(w0), Some(x0)) = (factors.first(), views.first()) else {
            return Err(Error::DimensionMismatch("no views".into()));
        };
        if views.len() != factors.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} views but {} factors",
                views.len(),
                factors.len()
            )));
        }
        let r = w0.ncols();
        let mut a = DMatrix::zeros(r, r);
        let mut rhs = DMatrix::zeros(r, x0.ncols());
        for (x, w) in views.iter().zip(factors) {
            a += w.transpose() * w;
            rhs += w.transpose() * x;
        }
        // Exact symmetry for the per-column Cholesky solves.
        let a = (&a + a.transpose()) * 0.5;
        Ok(Self {
            a,
            scale: beta,
            laplacian: laplacian.matrix.clone(),
            rhs,
        })
    }

    /// `‖A·H + β·H·L − B‖_F`.
    pub fn residual(&self, h: &DMatrix<f64>) -> f64 {
        (&self.a * h + h * &self.laplacian * self.scale - &self.rhs).norm()
    }
}

/// Solves the Sylvester system through the eigendecomposition `L = UΛUᵀ`:
/// with `H̃ = HU` and `B̃ = BU`, column `j` satisfies
/// `(A + βλ_j I) h̃_j = b̃_j`.
pub fn update_shared_factor(sys: &SylvesterSystem) -> Result<DMatrix<f64>> {
    let r = sys.a.nrows();
    let n = sys.laplacian.nrows();
    if sys.a.ncols() != r || sys.rhs.shape() != (r, n) || sys.laplacian.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "A is {:?}, B is {:?}, L is {:?}",
            sys.a.shape(),
            sys.rhs.shape(),
            sys.laplacian.shape()
        )));
    }
    if !(sys.scale >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "scale must be nonnegative, got {}",
            sys.scale
        )));
    }

    let mut a = sys.a.clone();
    let min_eig = a.clone().symmetric_eigenvalues().min();
    if min_eig < SYLVESTER_RIDGE_TRIGGER {
        for k in 0..r {
            a[(k, k)] += SYLVESTER_RIDGE;
        }
    }

    let eig = sys.laplacian.clone().symmetric_eigen();
    let u = &eig.eigenvectors;
    let rhs_t = &sys.rhs * u;
    let mut h_t = DMatrix::zeros(r, n);
    for j in 0..n {
        let mut m = a.clone();
        let shift = sys.scale * eig.eigenvalues[j];
        for k in 0..r {
            m[(k, k)] += shift;
        }
        let b = rhs_t.column(j).into_owned();
        let col = match m.clone().cholesky() {
            Some(ch) => ch.solve(&b),
            None => m.lu().solve(&b).ok_or_else(|| {
                Error::SingularSystem(format!("shifted system for eigenvalue {j} is singular"))
            })?,
        };
        h_t.set_column(j, &col);
    }
    Ok(h_t * u.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_basis_returns_nonnegative_input() {
        let h = DMatrix::identity(4, 4);
        let w = nnls_row(&[1.0, 2.0, 0.5, 3.0], &h).unwrap();
        assert_eq!(w, vec![1.0, 2.0, 0.5, 3.0]);
    }

    #[test]
    fn identity_basis_clamps_negatives() {
        let h = DMatrix::identity(4, 4);
        let w = nnls_row(&[1.0, -2.0, 0.5, -0.1], &h).unwrap();
        assert_eq!(w, vec![1.0, 0.0, 0.5, 0.0]);
    }

    #[test]
    fn identity_basis_gives_positive_part_of_views() {
        let h = DMatrix::identity(3, 3);
        let x = DMatrix::from_row_slice(2, 3, &[1.0, -1.0, 2.0, -3.0, 0.0, 4.0]);
        let w = update_view_factors(std::slice::from_ref(&x), &h).unwrap();
        assert_eq!(w[0], x.map(|v| v.max(0.0)));
    }

    #[test]
    fn zero_scale_reduces_to_linear_solve() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let b = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, -1.0, 0.0, 1.0]);
        let l = DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0]);
        let sys = SylvesterSystem {
            a: a.clone(),
            scale: 0.0,
            laplacian: l,
            rhs: b.clone(),
        };
        let h = update_shared_factor(&sys).unwrap();
        let expected = a.try_inverse().unwrap() * b;
        assert!((h - expected).amax() < 1e-12);
    }

    #[test]
    fn zero_laplacian_reduces_to_linear_solve() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let sys = SylvesterSystem {
            a: a.clone(),
            scale: 5.0,
            laplacian: DMatrix::zeros(2, 2),
            rhs: b.clone(),
        };
        let h = update_shared_factor(&sys).unwrap();
        assert!((h - a.try_inverse().unwrap() * b).amax() < 1e-12);
    }

    #[test]
    fn mismatched_dimensions_are_reported() {
        let sys = SylvesterSystem {
            a: DMatrix::identity(2, 2),
            scale: 1.0,
            laplacian: DMatrix::zeros(3, 3),
            rhs: DMatrix::zeros(2, 4),
        };
        assert!(matches!(
            update_shared_factor(&sys),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
