//! Numerical self-checks, each reporting a measured error against a bound.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{argument, Result};
use crate::function_space::{l2_inner, FunctionalObservation, Grid, SampledFunction};
use crate::integral_operator::{
    apply_t_quadrature, dense_t_matrix, operator_eigensystem, root_function,
};
use crate::linalg::{sym_eigen, Matrix};
use crate::scalar_kernel::{
    distance_matrix, eval_scalar_kernel, gram_matrix, median_distance, ScalarKernelParams,
};
use crate::solver::{brute_force_solve, solve_beta, KroneckerEigen, TrainedModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub k: usize,
    pub lambda: f64,
    pub instances: usize,
    pub seed: u64,
    /// Grid size for the spectral check.
    pub spectral_m: usize,
    /// Number of eigenpairs covered by the spectral check.
    pub spectral_pairs: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            n: 3,
            m: 31,
            p: 2,
            k: 20,
            lambda: 1.0,
            instances: 10,
            seed: 0,
            spectral_m: 401,
            spectral_pairs: 5,
        }
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0
            || self.p == 0
            || self.k == 0
            || self.instances == 0
            || self.spectral_pairs == 0
        {
            return Err(argument("verify sizes must be positive"));
        }
        if self.m < 2 || self.spectral_m < 2 {
            return Err(argument("verify grids need at least 2 points"));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(argument("verify lambda must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub passed: bool,
}

impl CheckResult {
    fn at_most(name: &str, measured: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            bound,
            passed: measured <= bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_text(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(5);
        let mut out = String::new();
        for c in &self.checks {
            writeln!(
                out,
                "{:<4} {:<width$}  measured {:>11.3e}  bound {:>9.1e}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.measured,
                c.bound
            )
            .unwrap();
        }
        out
    }
}

/// A smooth random curve: a few Fourier modes with Gaussian coefficients.
pub fn random_curve(rng: &mut ChaCha8Rng, grid: Grid) -> SampledFunction {
    let coeffs: Vec<(f64, f64)> = (0..4)
        .map(|_| {
            (
                StandardNormal.sample(&mut *rng),
                StandardNormal.sample(&mut *rng),
            )
        })
        .collect();
    SampledFunction::from_fn(grid, |t| {
        coeffs
            .iter()
            .enumerate()
            .map(|(q, (a, b))| {
                let w = std::f64::consts::PI * q as f64 * t;
                (a * w.cos() + b * w.sin()) / (1.0 + q as f64)
            })
            .sum()
    })
}

/// Random observations with `±` Heaviside labels.
pub fn random_instance(
    seed: u64,
    n: usize,
    m: usize,
    p: usize,
) -> Result<(Vec<FunctionalObservation>, Vec<SampledFunction>)> {
    let grid = Grid::new(m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n)
        .map(|_| FunctionalObservation::new((0..p).map(|_| random_curve(&mut rng, grid)).collect()))
        .collect::<Result<Vec<_>>>()?;
    let labels = (0..n)
        .map(|_| {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            SampledFunction::from_fn(grid, |t| if t >= 0.5 { sign } else { 0.0 })
        })
        .collect();
    Ok((data, labels))
}

fn rel_l2(a: &SampledFunction, b: &SampledFunction) -> f64 {
    let mut d = a.clone();
    d.axpy(-1.0, b).expect("shared grid");
    d.norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Worst relative L² gap between the spectral solve and the dense oracle.
pub fn oracle_discrepancy(seed: u64, cfg: &VerifyConfig) -> Result<f64> {
    let (data, labels) = random_instance(seed, cfg.n, cfg.m, cfg.p)?;
    let grid = data[0].grid();
    let params = ScalarKernelParams::gaussian(median_distance(&distance_matrix(&data)?))?;
    let op = Arc::new(operator_eigensystem(cfg.k, grid)?);
    let ke = KroneckerEigen::new(&sym_eigen(&gram_matrix(&data, &params)?)?, op);
    let fast = solve_beta(&labels, &ke, cfg.lambda)?;
    let dense = brute_force_solve(&labels, &data, &params, cfg.lambda, grid)?;
    Ok(fast
        .iter()
        .zip(&dense)
        .map(|(a, b)| rel_l2(a, b))
        .fold(0.0, f64::max))
}

/// `max_i ‖T w_i − δ_i w_i‖ / δ_i` and `max_i |g(μ_i)|`.
pub fn spectral_errors(m: usize, pairs: usize) -> Result<(f64, f64)> {
    let grid = Grid::new(m)?;
    let op = operator_eigensystem(pairs, grid)?;
    let mut worst = 0.0f64;
    for (w, &d) in op.eigenfunctions().iter().zip(op.delta()) {
        let mut r = apply_t_quadrature(w);
        r.axpy(-d, w)?;
        worst = worst.max(r.norm() / d);
    }
    let residual = op
        .mu()
        .iter()
        .map(|&mu| root_function(mu).abs())
        .fold(0.0, f64::max);
    Ok((worst, residual))
}

/// `−min eig / max eig` of `𝒢 ⊗ S`, where `S = W^½ E W^½` is the
/// symmetric form of the quadrature operator; nonpositive when PSD.
pub fn block_gram_negativity(seed: u64, cfg: &VerifyConfig) -> Result<f64> {
    let (data, _) = random_instance(seed, cfg.n, cfg.m, cfg.p)?;
    let grid = data[0].grid();
    let params = ScalarKernelParams::gaussian(median_distance(&distance_matrix(&data)?))?;
    let gram = gram_matrix(&data, &params)?;
    let d = dense_t_matrix(grid);
    let sw: Vec<f64> = grid.weights().iter().map(|w| w.sqrt()).collect();
    // D = E W, so W^½ D W^-½ = W^½ E W^½
    let s = Matrix::from_fn(grid.len(), grid.len(), |a, b| sw[a] * d[(a, b)] / sw[b]);
    let s = Matrix::from_fn(s.rows(), s.cols(), |a, b| 0.5 * (s[(a, b)] + s[(b, a)]));
    let e = sym_eigen(&gram.kron(&s))?;
    let max = e.alpha[0];
    let min = *e.alpha.last().expect("nonempty");
    Ok(-min / max)
}

/// Relative gap in `Σ_j G(x, x_j) ⟨β_j, T y⟩ = ⟨f(x), y⟩`.
pub fn reproducing_gap(seed: u64, cfg: &VerifyConfig) -> Result<f64> {
    let (data, _) = random_instance(seed, cfg.n, cfg.m, cfg.p)?;
    let grid = data[0].grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let beta: Vec<_> = (0..cfg.n).map(|_| random_curve(&mut rng, grid)).collect();
    let params = ScalarKernelParams::gaussian(1.0)?;
    let op = Arc::new(operator_eigensystem(cfg.k, grid)?);
    let f = TrainedModel::new(Arc::new(data.clone()), beta.clone(), cfg.lambda, params, op)?;
    let x = FunctionalObservation::new((0..cfg.p).map(|_| random_curve(&mut rng, grid)).collect())?;
    let y = random_curve(&mut rng, grid);
    let ty = apply_t_quadrature(&y);
    let mut gram_side = 0.0;
    for (xj, bj) in data.iter().zip(&beta) {
        gram_side += eval_scalar_kernel(&x, xj, &params)? * l2_inner(bj, &ty)?;
    }
    let eval_side = l2_inner(&f.predict(&x)?, &y)?;
    Ok((gram_side - eval_side).abs() / eval_side.abs().max(f64::MIN_POSITIVE))
}

/// Largest `|⟨f, g⟩| / (‖f‖ ‖g‖)` over random pairs.
pub fn cauchy_schwarz_ratio(seed: u64, m: usize, pairs: usize) -> Result<f64> {
    let grid = Grid::new(m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..pairs {
        let f = random_curve(&mut rng, grid);
        // every fourth pair is parallel, where the bound is tight
        let g = if i % 4 == 0 {
            f.scaled(-2.5)
        } else {
            random_curve(&mut rng, grid)
        };
        worst = worst.max(l2_inner(&f, &g)?.abs() / (f.norm() * g.norm()));
    }
    Ok(worst)
}

pub fn run_verify(cfg: &VerifyConfig) -> Result<VerifyReport> {
    cfg.validate()?;
    let seeds: Vec<u64> = (0..cfg.instances as u64).map(|i| cfg.seed + i).collect();
    let mut oracle = 0.0f64;
    let mut psd = f64::NEG_INFINITY;
    let mut reproducing = 0.0f64;
    for &s in &seeds {
        oracle = oracle.max(oracle_discrepancy(s, cfg)?);
        psd = psd.max(block_gram_negativity(s, cfg)?);
        reproducing = reproducing.max(reproducing_gap(s, cfg)?);
    }
    let (spectral, root) = spectral_errors(cfg.spectral_m, cfg.spectral_pairs)?;
    let cs = cauchy_schwarz_ratio(cfg.seed, cfg.m, 200)?;
    Ok(VerifyReport {
        checks: vec![
            CheckResult::at_most("spectral solve vs dense oracle (rel L2)", oracle, 1e-3),
            CheckResult::at_most("eigenpair residual |Tw - dw|/d", spectral, 1e-3),
            CheckResult::at_most("root residual |g(mu)|", root, 1e-12),
            CheckResult::at_most("block Gram -min eig / max eig", psd, 1e-8),
            CheckResult::at_most("reproducing property (rel)", reproducing, 1e-6),
            CheckResult::at_most("Cauchy-Schwarz |<f,g>|/(|f||g|)", cs, 1.0 + 1e-12),
        ],
    })
}
