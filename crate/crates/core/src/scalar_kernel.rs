//! Scalar kernels on `(L²)^p` and their Gram matrices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{argument, Result};
use crate::function_space::{l2p_distance_sq, FunctionalObservation};
use crate::linalg::Matrix;

pub use crate::linalg::{sym_eigen, GramEigen};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    /// `exp(−d² / 2σ²)`
    Gaussian,
    /// `exp(−d / σ)`
    LaplacianL2,
}

impl std::str::FromStr for KernelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "laplacian-l2" | "laplacian" => Ok(Self::LaplacianL2),
            other => Err(format!(
                "unknown kernel '{other}' (expected gaussian or laplacian-l2)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarKernelParams {
    pub kind: KernelKind,
    pub sigma: f64,
}

impl ScalarKernelParams {
    pub fn new(kind: KernelKind, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(argument(format!(
                "kernel bandwidth must be positive, got {sigma}"
            )));
        }
        Ok(Self { kind, sigma })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(KernelKind::Gaussian, sigma)
    }

    /// Kernel value as a function of the squared `(L²)^p` distance.
    #[inline]
    pub fn from_distance_sq(&self, d2: f64) -> f64 {
        match self.kind {
            KernelKind::Gaussian => (-d2 / (2.0 * self.sigma * self.sigma)).exp(),
            KernelKind::LaplacianL2 => (-d2.max(0.0).sqrt() / self.sigma).exp(),
        }
    }
}

pub fn eval_scalar_kernel(
    a: &FunctionalObservation,
    b: &FunctionalObservation,
    params: &ScalarKernelParams,
) -> Result<f64> {
    Ok(params.from_distance_sq(l2p_distance_sq(a, b)?))
}

/// Pairwise squared distances; symmetric with an exactly zero diagonal.
pub fn distance_matrix(data: &[FunctionalObservation]) -> Result<Matrix> {
    let n = data.len();
    if n == 0 {
        return Err(argument("cannot build a Gram matrix from no observations"));
    }
    for obs in &data[1..] {
        data[0].ensure_compatible(obs)?;
    }
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| l2p_distance_sq(&data[i], &data[j]))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut d = Matrix::zeros(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + 1 + off;
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    Ok(d)
}

pub fn gram_from_distances(d2: &Matrix, params: &ScalarKernelParams) -> Matrix {
    let n = d2.rows();
    let mut g = Matrix::zeros(n, n);
    for i in 0..n {
        g[(i, i)] = params.from_distance_sq(d2[(i, i)]);
        for j in (i + 1)..n {
            let v = params.from_distance_sq(d2[(i, j)]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// `𝒢_ij = G(x_i, x_j)`, upper triangle computed and mirrored.
pub fn gram_matrix(data: &[FunctionalObservation], params: &ScalarKernelParams) -> Result<Matrix> {
    Ok(gram_from_distances(&distance_matrix(data)?, params))
}

/// Rows are query points, columns are reference points.
pub fn cross_kernel(
    queries: &[FunctionalObservation],
    reference: &[FunctionalObservation],
    params: &ScalarKernelParams,
) -> Result<Matrix> {
    let rows: Vec<Vec<f64>> = queries
        .par_iter()
        .map(|q| {
            reference
                .iter()
                .map(|r| eval_scalar_kernel(q, r, params))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, reference.len()));
    }
    Matrix::from_rows(&rows)
}

/// Median of the off-diagonal pairwise distances (not squared).
///
/// Falls back to 1.0 when there are fewer than two points or all points coincide.
pub fn median_distance(d2: &Matrix) -> f64 {
    let n = d2.rows();
    let mut dists: Vec<f64> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| d2[(i, j)].max(0.0).sqrt())
        .collect();
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(f64::total_cmp);
    let mid = dists.len() / 2;
    let med = if dists.len().is_multiple_of(2) {
        0.5 * (dists[mid - 1] + dists[mid])
    } else {
        dists[mid]
    };
    if med > 0.0 {
        med
    } else {
        1.0
    }
}
