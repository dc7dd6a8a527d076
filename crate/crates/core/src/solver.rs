//! Spectral solve of `(𝒢 ⊗ T + λI) β = y` and representer-expansion prediction.
//!
//! With `𝒢 = Σ_i α_i v_i v_iᵀ` and `T w_j = δ_j w_j`, the block operator has
//! eigenpairs `θ_ij = α_i δ_j` and `z_ij = v_i ⊗ w_j`, where the `a`-th block
//! of `z_ij` is the function `v_i[a] w_j`. Only the first `k` eigenfunctions
//! of `T` are retained; on the orthogonal complement the truncated operator
//! is zero, so that part of `y` is divided by `λ` alone:
//!
//! ```text
//! β = Σ_ij (θ_ij + λ)⁻¹ ⟨z_ij, y⟩ z_ij + λ⁻¹ (y − Σ_ij ⟨z_ij, y⟩ z_ij)
//! ```
//!
//! The eigenfunctions `z_ij` are never materialized; every inner product
//! against them goes through the factors `v_i` and `w_j`.

use std::sync::Arc;

use crate::error::{argument, structural, Error, Result};
use crate::function_space::{l2_inner, FunctionalObservation, Grid, SampledFunction};
use crate::integral_operator::{dense_t_matrix, OperatorEigen, OperatorKind};
use crate::linalg::{lu_solve, sym_eigen, GramEigen, Matrix};
use crate::scalar_kernel::{eval_scalar_kernel, gram_matrix, ScalarKernelParams};

/// Largest `n · m` accepted by [`brute_force_solve`].
pub const BRUTE_FORCE_MAX_ORDER: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizationConfig {
    pub lambda: f64,
    pub k: usize,
}

impl RegularizationConfig {
    pub fn new(lambda: f64, k: usize) -> Result<Self> {
        check_lambda(lambda)?;
        if k == 0 {
            return Err(argument("truncation level k must be at least 1"));
        }
        Ok(Self { lambda, k })
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(argument(format!("lambda must be positive, got {lambda}")));
    }
    Ok(())
}

/// Eigensystem of `𝒦 = 𝒢 ⊗ T` kept in factored form.
#[derive(Debug, Clone)]
pub struct KroneckerEigen {
    gram: GramEigen,
    op: Arc<OperatorEigen>,
    /// `θ[i * k + j] = α_i δ_j`
    theta: Vec<f64>,
    raw_alpha_min: f64,
}

impl KroneckerEigen {
    /// Negative eigenvalues of `𝒢` are clamped to zero here.
    pub fn new(gram: &GramEigen, op: Arc<OperatorEigen>) -> Self {
        let raw_alpha_min = gram.alpha.iter().copied().fold(f64::INFINITY, f64::min);
        let gram = gram.clamped();
        let theta = gram
            .alpha
            .iter()
            .flat_map(|&a| op.delta().iter().map(move |&d| a * d))
            .collect();
        Self {
            gram,
            op,
            theta,
            raw_alpha_min,
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.gram.n()
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.op.k()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Flat eigen-index to `(i, j)`: gram eigenvector `i`, operator eigenfunction `j`.
    #[inline]
    pub fn index(&self, flat: usize) -> (usize, usize) {
        (flat / self.k(), flat % self.k())
    }

    pub fn gram(&self) -> &GramEigen {
        &self.gram
    }

    pub fn operator(&self) -> &Arc<OperatorEigen> {
        &self.op
    }

    /// Block `a` of `z_ij`, i.e. `v_i[a] w_j`.
    pub fn eigenfunction_block(&self, flat: usize, a: usize) -> SampledFunction {
        let (i, j) = self.index(flat);
        self.op.eigenfunctions()[j].scaled(self.gram.vectors[(a, i)])
    }

    fn check_labels(&self, yv: &[SampledFunction]) -> Result<()> {
        if yv.len() != self.n() {
            return Err(structural(format!(
                "{} label functions for {} training inputs",
                yv.len(),
                self.n()
            )));
        }
        let grid = self.op.grid();
        if let Some(bad) = yv.iter().position(|y| y.grid() != grid) {
            return Err(structural(format!(
                "label {bad} has {} points, model grid has {}",
                yv[bad].grid().len(),
                grid.len()
            )));
        }
        Ok(())
    }

    /// `⟨z_ij, y⟩` for every flat index, plus the per-input projections `⟨w_j, y_a⟩`.
    fn coefficients(&self, yv: &[SampledFunction]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let (n, k) = (self.n(), self.k());
        let proj: Vec<Vec<f64>> = yv.iter().map(|y| self.op.project(y.values())).collect();
        let mut c = vec![0.0; n * k];
        for i in 0..n {
            for j in 0..k {
                c[i * k + j] = (0..n).map(|a| self.gram.vectors[(a, i)] * proj[a][j]).sum();
            }
        }
        (c, proj)
    }

    /// The expansion coefficients `(θ_ij + λ)⁻¹ ⟨z_ij, y⟩`.
    pub fn spectral_coefficients(&self, yv: &[SampledFunction], lambda: f64) -> Result<Vec<f64>> {
        check_lambda(lambda)?;
        self.check_labels(yv)?;
        let (c, _) = self.coefficients(yv);
        Ok(c.iter()
            .zip(&self.theta)
            .map(|(c, t)| c / (t + lambda))
            .collect())
    }

    pub fn diagnostics(&self, yv: &[SampledFunction], lambda: f64) -> SpectralDiagnostics {
        SpectralDiagnostics {
            alpha_max: self.gram.alpha.first().copied().unwrap_or(0.0),
            alpha_min: self.raw_alpha_min,
            clamped: self.gram.alpha.iter().filter(|&&a| a == 0.0).count(),
            mu: self.op.mu().to_vec(),
            delta: self.op.delta().to_vec(),
            discarded_energy_ratio: self.op.discarded_energy_ratio(yv),
            tail_bound: self.op.tail_bound(lambda),
        }
    }
}

/// Spectral summary reported after training.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SpectralDiagnostics {
    pub alpha_max: f64,
    /// Smallest eigenvalue of `𝒢` before clamping.
    pub alpha_min: f64,
    /// Number of eigenvalues of `𝒢` clamped to zero.
    pub clamped: usize,
    pub mu: Vec<f64>,
    pub delta: Vec<f64>,
    pub discarded_energy_ratio: f64,
    /// `δ_{k+1} / λ`
    pub tail_bound: f64,
}

/// Solves `(𝒦 + λI) β = y` through the factored eigensystem.
pub fn solve_beta(
    yv: &[SampledFunction],
    ke: &KroneckerEigen,
    lambda: f64,
) -> Result<Vec<SampledFunction>> {
    check_lambda(lambda)?;
    ke.check_labels(yv)?;
    let (n, k) = (ke.n(), ke.k());
    let grid = ke.op.grid();
    let (c, proj) = ke.coefficients(yv);
    let scaled: Vec<f64> = c
        .iter()
        .zip(&ke.theta)
        .map(|(c, t)| c / (t + lambda))
        .collect();

    let ws = ke.op.eigenfunctions();
    let inv_lambda = 1.0 / lambda;
    let mut beta = Vec::with_capacity(n);
    for (a, y) in yv.iter().enumerate() {
        // weight of w_j in β_a: Σ_i v_i[a] s_ij − ⟨w_j, y_a⟩ / λ
        let mut values: Vec<f64> = y.values().iter().map(|v| v * inv_lambda).collect();
        for (j, w) in ws.iter().enumerate() {
            let spectral: f64 = (0..n)
                .map(|i| ke.gram.vectors[(a, i)] * scaled[i * k + j])
                .sum();
            let coef = spectral - proj[a][j] * inv_lambda;
            if coef == 0.0 {
                continue;
            }
            for (b, wv) in values.iter_mut().zip(w.values()) {
                *b += coef * wv;
            }
        }
        beta.push(SampledFunction::from_raw(grid, values));
    }
    Ok(beta)
}

/// `f*(x) = Σ_j G(x, x_j) T β_j`.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    inputs: Arc<Vec<FunctionalObservation>>,
    beta: Vec<SampledFunction>,
    t_beta: Vec<SampledFunction>,
    lambda: f64,
    params: ScalarKernelParams,
    op: Arc<OperatorEigen>,
}

impl TrainedModel {
    pub fn new(
        inputs: Arc<Vec<FunctionalObservation>>,
        beta: Vec<SampledFunction>,
        lambda: f64,
        params: ScalarKernelParams,
        op: Arc<OperatorEigen>,
    ) -> Result<Self> {
        check_lambda(lambda)?;
        if beta.len() != inputs.len() {
            return Err(structural(format!(
                "{} coefficient functions for {} inputs",
                beta.len(),
                inputs.len()
            )));
        }
        let grid = op.grid();
        if beta.iter().any(|b| b.grid() != grid) || inputs.iter().any(|x| x.grid() != grid) {
            return Err(structural(
                "model inputs and coefficients must share the operator grid",
            ));
        }
        let t_beta = beta.iter().map(|b| op.apply(b)).collect();
        Ok(Self {
            inputs,
            beta,
            t_beta,
            lambda,
            params,
            op,
        })
    }

    pub fn inputs(&self) -> &Arc<Vec<FunctionalObservation>> {
        &self.inputs
    }

    pub fn beta(&self) -> &[SampledFunction] {
        &self.beta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn params(&self) -> &ScalarKernelParams {
        &self.params
    }

    pub fn operator(&self) -> &Arc<OperatorEigen> {
        &self.op
    }

    pub fn grid(&self) -> Grid {
        self.op.grid()
    }

    pub fn p(&self) -> usize {
        self.inputs[0].p()
    }

    pub fn predict(&self, x: &FunctionalObservation) -> Result<SampledFunction> {
        let row = self
            .inputs
            .iter()
            .map(|xj| eval_scalar_kernel(x, xj, &self.params))
            .collect::<Result<Vec<_>>>()?;
        self.predict_from_kernel_row(&row)
    }

    /// Prediction from precomputed `G(x, x_j)` values.
    pub fn predict_from_kernel_row(&self, row: &[f64]) -> Result<SampledFunction> {
        if row.len() != self.t_beta.len() {
            return Err(structural(format!(
                "kernel row of length {} for {} training inputs",
                row.len(),
                self.t_beta.len()
            )));
        }
        let grid = self.grid();
        let mut out = vec![0.0; grid.len()];
        for (g, tb) in row.iter().zip(&self.t_beta) {
            for (o, v) in out.iter_mut().zip(tb.values()) {
                *o += g * v;
            }
        }
        Ok(SampledFunction::from_raw(grid, out))
    }
}

/// Builds the Gram matrix and both eigensystems, then solves for `β`.
pub fn train(
    inputs: Arc<Vec<FunctionalObservation>>,
    yv: &[SampledFunction],
    params: ScalarKernelParams,
    config: RegularizationConfig,
    kind: OperatorKind,
) -> Result<TrainedModel> {
    let grid = inputs
        .first()
        .ok_or_else(|| argument("no training inputs"))?
        .grid();
    let gram = sym_eigen(&gram_matrix(&inputs, &params)?)?;
    let op = Arc::new(OperatorEigen::build(kind, config.k, grid)?);
    let ke = KroneckerEigen::new(&gram, op.clone());
    let beta = solve_beta(yv, &ke, config.lambda)?;
    TrainedModel::new(inputs, beta, config.lambda, params, op)
}

/// `‖f*‖²` in the function-valued RKHS: `Σ_ij G(x_i, x_j) ⟨T β_i, β_j⟩`.
pub fn rkhs_norm_sq(model: &TrainedModel) -> Result<f64> {
    let gram = gram_matrix(&model.inputs, &model.params)?;
    let n = model.beta.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += gram[(i, j)] * l2_inner(&model.t_beta[i], &model.beta[j])?;
        }
    }
    Ok(total)
}

/// Tikhonov objective `Σ ‖y_i − f*(x_i)‖² + λ ‖f*‖²` on the training set.
pub fn objective(model: &TrainedModel, yv: &[SampledFunction]) -> Result<f64> {
    if yv.len() != model.inputs.len() {
        return Err(structural("one label function per training input required"));
    }
    let mut loss = 0.0;
    for (x, y) in model.inputs.iter().zip(yv) {
        let mut r = model.predict(x)?;
        r.axpy(-1.0, y)?;
        loss += l2_inner(&r, &r)?;
    }
    Ok(loss + model.lambda * rkhs_norm_sq(model)?)
}

/// The dense `(n·m) × (n·m)` matrix `𝒢 ⊗ D + λI`.
pub fn kronecker_system(gram: &Matrix, grid: Grid, lambda: f64) -> Matrix {
    let mut a = gram.kron(&dense_t_matrix(grid));
    for i in 0..a.rows() {
        a[(i, i)] += lambda;
    }
    a
}

/// Dense oracle: assembles `𝒢 ⊗ D + λI` and solves it by LU.
pub fn brute_force_solve(
    yv: &[SampledFunction],
    data: &[FunctionalObservation],
    params: &ScalarKernelParams,
    lambda: f64,
    grid: Grid,
) -> Result<Vec<SampledFunction>> {
    check_lambda(lambda)?;
    let (n, m) = (data.len(), grid.len());
    if n * m > BRUTE_FORCE_MAX_ORDER {
        return Err(argument(format!(
            "dense system of order {} exceeds the limit {BRUTE_FORCE_MAX_ORDER}",
            n * m
        )));
    }
    if yv.len() != n {
        return Err(structural(format!("{} labels for {n} inputs", yv.len())));
    }
    if yv.iter().any(|y| y.grid() != grid) || data.iter().any(|x| x.grid() != grid) {
        return Err(structural("inputs and labels must live on the given grid"));
    }
    let gram = gram_matrix(data, params)?;
    let system = kronecker_system(&gram, grid, lambda);
    let rhs: Vec<f64> = yv.iter().flat_map(|y| y.values().iter().copied()).collect();
    let sol = lu_solve(&system, &rhs)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(
            "dense solve produced non-finite values".into(),
        ));
    }
    Ok(sol
        .chunks(m)
        .map(|c| SampledFunction::from_raw(grid, c.to_vec()))
        .collect())
}
