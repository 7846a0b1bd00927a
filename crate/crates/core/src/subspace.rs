//! PCA-based covariate dimensionality reduction with sample splitting.
//!
//! Covariates that live near a low-dimensional linear subspace are projected
//! onto the top principal components of a sample covariance before kernel
//! weighting. An optional random split keeps the rows used to estimate the
//! subspace disjoint from the rows used for weighting.

use crate::kernel::{nw_weights, KernelError, KernelSpec, WeightVector};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SubspaceError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {residual:e})")]
    EigenNonConvergence { sweeps: usize, residual: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Disjoint index sets: `fit_indices` estimate the subspace, `weight_indices`
/// carry the kernel weights.
#[derive(Debug, Clone)]
pub struct SplitIndices {
    pub weight_indices: Vec<usize>,
    pub fit_indices: Vec<usize>,
    pub seed: u64,
}

impl SplitIndices {
    pub fn n_weight(&self) -> usize {
        self.weight_indices.len()
    }

    pub fn n_fit(&self) -> usize {
        self.fit_indices.len()
    }
}

/// Estimated projection basis with the full eigenvalue list of the sample
/// covariance it came from.
#[derive(Debug, Clone)]
pub struct SubspaceModel {
    basis: Array2<f64>,
    eigenvalues: Vec<f64>,
    mean: Array1<f64>,
}

impl SubspaceModel {
    /// Rows are the orthonormal basis vectors, shape (p', p).
    pub fn basis(&self) -> ArrayView2<'_, f64> {
        self.basis.view()
    }

    /// All eigenvalues of the covariance, nonincreasing, clamped at zero.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn mean(&self) -> ArrayView1<'_, f64> {
        self.mean.view()
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Gap between the retained and first discarded eigenvalue, the quantity
    /// entering the Davis-Kahan style bounds. Zero when every direction is kept.
    pub fn spectral_gap(&self) -> f64 {
        let p_prime = self.intrinsic_dim();
        if p_prime < self.eigenvalues.len() {
            self.eigenvalues[p_prime - 1] - self.eigenvalues[p_prime]
        } else {
            0.0
        }
    }
}

/// Randomly partitions `{0..n}` into weight indices (size round(alpha*n)) and
/// fit indices. Deterministic for a given seed.
pub fn split_sample(n: usize, alpha: f64, seed: u64) -> Result<SplitIndices, SubspaceError> {
    if n < 2 {
        return Err(SubspaceError::InvalidInput(format!(
            "need at least 2 samples to split, got {n}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SubspaceError::InvalidInput(format!(
            "split fraction must lie in (0,1), got {alpha}"
        )));
    }
    let n_weight = (alpha * n as f64).round() as usize;
    if n_weight == 0 || n_weight == n {
        return Err(SubspaceError::InvalidInput(format!(
            "split fraction {alpha} leaves an empty part for n={n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut weight_indices = order[..n_weight].to_vec();
    let mut fit_indices = order[n_weight..].to_vec();
    weight_indices.sort_unstable();
    fit_indices.sort_unstable();
    Ok(SplitIndices {
        weight_indices,
        fit_indices,
        seed,
    })
}

/// Sample covariance with 1/m normalization, and the row mean.
/// The output is symmetrized to absorb floating-point asymmetry.
pub fn sample_covariance(
    rows: ArrayView2<'_, f64>,
) -> Result<(Array2<f64>, Array1<f64>), SubspaceError> {
    let m = rows.nrows();
    let p = rows.ncols();
    if m == 0 {
        return Err(SubspaceError::InvalidInput("no rows".into()));
    }
    let mut mean = Array1::zeros(p);
    for row in rows.rows() {
        mean = mean + row;
    }
    mean.mapv_inplace(|v| v / m as f64);
    let mut cov = Array2::zeros((p, p));
    for row in rows.rows() {
        let centered = &row - &mean;
        for i in 0..p {
            for j in i..p {
                cov[[i, j]] += centered[i] * centered[j];
            }
        }
    }
    for i in 0..p {
        for j in i..p {
            let v = cov[[i, j]] / m as f64;
            cov[[i, j]] = v;
            cov[[j, i]] = v;
        }
    }
    Ok((cov, mean))
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns (eigenvalues, eigenvectors as columns), unsorted.
/// The off-diagonal tolerance is 1e-12 relative to the Frobenius norm.
fn jacobi_eigen(matrix: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>), SubspaceError> {
    let p = matrix.nrows();
    let mut a = matrix.clone();
    let mut v = Array2::eye(p);
    let frob: f64 = matrix.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-12 * frob.max(f64::MIN_POSITIVE);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0f64;
        for i in 0..p {
            for j in (i + 1)..p {
                off += a[[i, j]] * a[[i, j]];
            }
        }
        let off = (2.0 * off).sqrt();
        if off <= tol {
            let eigenvalues = (0..p).map(|i| a[[i, i]]).collect();
            return Ok((eigenvalues, v));
        }
        for i in 0..p {
            for j in (i + 1)..p {
                let apq = a[[i, j]];
                if apq == 0.0 {
                    continue;
                }
                let theta = 0.5 * (a[[j, j]] - a[[i, i]]) / apq;
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..p {
                    let aki = a[[k, i]];
                    let akj = a[[k, j]];
                    a[[k, i]] = c * aki - s * akj;
                    a[[k, j]] = s * aki + c * akj;
                }
                for k in 0..p {
                    let aik = a[[i, k]];
                    let ajk = a[[j, k]];
                    a[[i, k]] = c * aik - s * ajk;
                    a[[j, k]] = s * aik + c * ajk;
                }
                for k in 0..p {
                    let vki = v[[k, i]];
                    let vkj = v[[k, j]];
                    v[[k, i]] = c * vki - s * vkj;
                    v[[k, j]] = s * vki + c * vkj;
                }
            }
        }
    }
    let mut off = 0.0f64;
    for i in 0..p {
        for j in (i + 1)..p {
            off += a[[i, j]] * a[[i, j]];
        }
    }
    Err(SubspaceError::EigenNonConvergence {
        sweeps: JACOBI_MAX_SWEEPS,
        residual: (2.0 * off).sqrt(),
    })
}

/// Top `p_prime` eigenvectors of a symmetric matrix as rows of the basis,
/// with the full nonincreasing eigenvalue list. The returned model has a zero
/// mean; use [`fit_subspace`] to center on data.
pub fn top_eigvecs(sigma: &Array2<f64>, p_prime: usize) -> Result<SubspaceModel, SubspaceError> {
    let p = sigma.nrows();
    if sigma.ncols() != p {
        return Err(SubspaceError::InvalidInput("matrix must be square".into()));
    }
    if p_prime == 0 || p_prime > p {
        return Err(SubspaceError::InvalidInput(format!(
            "need 1 <= p' <= {p}, got {p_prime}"
        )));
    }
    let asym = (&sigma.t().to_owned() - sigma)
        .iter()
        .map(|x| x.abs())
        .fold(0.0f64, f64::max);
    if asym > 1e-8 {
        return Err(SubspaceError::InvalidInput(format!(
            "matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }
    let (raw_eigenvalues, vectors) = jacobi_eigen(sigma)?;
    // Nonincreasing by value; ties fall back to ascending original index.
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| {
        raw_eigenvalues[j]
            .partial_cmp(&raw_eigenvalues[i])
            .unwrap()
            .then(i.cmp(&j))
    });
    let eigenvalues: Vec<f64> = order
        .iter()
        .map(|&i| {
            let ev = raw_eigenvalues[i];
            if ev < 0.0 && ev >= -1e-10 {
                0.0
            } else {
                ev
            }
        })
        .collect();
    let mut basis = Array2::zeros((p_prime, p));
    for (r, &idx) in order.iter().take(p_prime).enumerate() {
        let col = vectors.column(idx);
        // Sign convention: largest-magnitude entry is positive.
        let mut lead = 0usize;
        for k in 0..p {
            if col[k].abs() > col[lead].abs() {
                lead = k;
            }
        }
        let sign = if col[lead] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..p {
            basis[[r, k]] = sign * col[k];
        }
    }
    Ok(SubspaceModel {
        basis,
        eigenvalues,
        mean: Array1::zeros(p),
    })
}

/// Estimates a subspace from data rows: sample covariance, top eigenvectors,
/// and the row mean used for centering projections.
pub fn fit_subspace(
    rows: ArrayView2<'_, f64>,
    p_prime: usize,
) -> Result<SubspaceModel, SubspaceError> {
    let (cov, mean) = sample_covariance(rows)?;
    let mut model = top_eigvecs(&cov, p_prime)?;
    model.mean = mean;
    Ok(model)
}

/// Centered projection U (gamma - mean).
pub fn project(model: &SubspaceModel, gamma: ArrayView1<'_, f64>) -> Array1<f64> {
    assert_eq!(
        gamma.len(),
        model.ambient_dim(),
        "projection dimension mismatch"
    );
    let centered = &gamma - &model.mean;
    model.basis.dot(&centered)
}

/// NW weights computed in the projected space: both the query and each
/// covariate row are projected before kernel evaluation. `spec.dim` must
/// equal the model's intrinsic dimension.
pub fn reduced_nw_weights(
    spec: &KernelSpec,
    model: &SubspaceModel,
    covariates: ArrayView2<'_, f64>,
    gamma: ArrayView1<'_, f64>,
) -> Result<WeightVector, SubspaceError> {
    if spec.dim() != model.intrinsic_dim() {
        return Err(SubspaceError::InvalidInput(format!(
            "kernel dimension {} does not match intrinsic dimension {}",
            spec.dim(),
            model.intrinsic_dim()
        )));
    }
    let n = covariates.nrows();
    let mut projected = Array2::zeros((n, model.intrinsic_dim()));
    for (i, row) in covariates.rows().into_iter().enumerate() {
        projected.row_mut(i).assign(&project(model, row));
    }
    let rho = project(model, gamma);
    Ok(nw_weights(spec, projected.view(), rho.view())?)
}
