//! The integral operator `(T y)(t) = ∫₀¹ e^{−|t−s|} y(s) ds`.
//!
//! `T` is compact, self-adjoint and positive. Its eigenvalues are
//! `δ = 2 / (1 + μ²)` with eigenfunctions `μ cos(μ t) + sin(μ t)`, where `μ`
//! runs over the positive solutions of `cot μ = ½ (μ − 1/μ)`. There is
//! exactly one solution in each interval `((i−1)π, iπ)`.
//!
//! The roots are found by bisection on
//! `g(μ) = 2μ cos μ − (μ² − 1) sin μ`, which has the same positive roots as
//! the cotangent equation but no poles.

use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};
use crate::function_space::{l2_inner_slices, Grid, SampledFunction};
use crate::linalg::Matrix;

use std::f64::consts::PI;

const BISECTION_MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    /// The exponential integral operator.
    #[default]
    Exponential,
    /// `T = I`; the separable kernel degenerates to `G(x, x') I`.
    Identity,
}

impl std::str::FromStr for OperatorKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "exponential" => Ok(Self::Exponential),
            "identity" => Ok(Self::Identity),
            other => Err(format!(
                "unknown operator '{other}' (expected exponential or identity)"
            )),
        }
    }
}

/// `g(μ) = 2μ cos μ − (μ² − 1) sin μ`.
#[inline]
pub fn root_function(mu: f64) -> f64 {
    2.0 * mu * mu.cos() - (mu * mu - 1.0) * mu.sin()
}

/// `cot μ − ½ (μ − 1/μ)`.
#[inline]
pub fn cot_residual(mu: f64) -> f64 {
    1.0 / mu.tan() - 0.5 * (mu - 1.0 / mu)
}

/// Bracket holding the `i`-th positive root (1-based).
pub fn root_bracket(i: usize) -> (f64, f64) {
    assert!(i >= 1);
    // g(μ) ≈ 3μ near zero, so the trivial root at μ = 0 is excluded
    let lo = if i == 1 { 1e-6 } else { (i - 1) as f64 * PI };
    (lo, i as f64 * PI)
}

fn bisect(i: usize) -> Result<f64> {
    let (mut lo, mut hi) = root_bracket(i);
    let mut g_lo = root_function(lo);
    let g_hi = root_function(hi);
    if g_lo == 0.0 {
        return Ok(lo);
    }
    if g_hi == 0.0 {
        return Ok(hi);
    }
    if g_lo.signum() == g_hi.signum() {
        return Err(Error::Numeric(format!(
            "root {i} not bracketed in ({lo}, {hi}): g(lo) = {g_lo:e}, g(hi) = {g_hi:e}"
        )));
    }
    let mut g_hi = g_hi;
    for _ in 0..BISECTION_MAX_ITERATIONS {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let g_mid = root_function(mid);
        if g_mid == 0.0 {
            return Ok(mid);
        }
        if g_mid.signum() == g_lo.signum() {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
            g_hi = g_mid;
        }
    }
    Ok(if g_lo.abs() <= g_hi.abs() { lo } else { hi })
}

/// The `k` smallest positive roots of `cot μ = ½ (μ − 1/μ)`, ascending.
pub fn find_mu_roots(k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(argument("need at least one root"));
    }
    (1..=k).map(bisect).collect()
}

/// Truncated eigensystem of the output operator, sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorEigen {
    kind: OperatorKind,
    grid: Grid,
    mu: Vec<f64>,
    delta: Vec<f64>,
    w: Vec<SampledFunction>,
    /// First discarded eigenvalue, 0 when nothing is discarded.
    next_delta: f64,
}

impl OperatorEigen {
    #[inline]
    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.delta.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn eigenfunctions(&self) -> &[SampledFunction] {
        &self.w
    }

    pub fn next_delta(&self) -> f64 {
        self.next_delta
    }

    /// Bound `δ_{k+1} / λ` on the gain any discarded mode can receive.
    pub fn tail_bound(&self, lambda: f64) -> f64 {
        self.next_delta / lambda
    }

    /// Identity operator with the point-mass basis `e_a / √w_a`, `k = m`.
    pub fn identity(grid: Grid) -> Self {
        let m = grid.len();
        let w = (0..m)
            .map(|a| {
                let mut v = vec![0.0; m];
                v[a] = 1.0 / grid.weight(a).sqrt();
                SampledFunction::from_raw(grid, v)
            })
            .collect();
        Self {
            kind: OperatorKind::Identity,
            grid,
            mu: Vec::new(),
            delta: vec![1.0; m],
            w,
            next_delta: 0.0,
        }
    }

    pub fn build(kind: OperatorKind, k: usize, grid: Grid) -> Result<Self> {
        match kind {
            OperatorKind::Exponential => operator_eigensystem(k, grid),
            OperatorKind::Identity => Ok(Self::identity(grid)),
        }
    }

    /// Rebuilds an exponential eigensystem from stored roots.
    pub(crate) fn from_roots(mu: Vec<f64>, next_mu: f64, grid: Grid) -> Self {
        let delta = mu.iter().map(|&m| eigenvalue(m)).collect();
        let w = mu.iter().map(|&m| eigenfunction(m, grid)).collect();
        Self {
            kind: OperatorKind::Exponential,
            grid,
            mu,
            delta,
            w,
            next_delta: eigenvalue(next_mu),
        }
    }

    /// Applies the operator itself (not its truncation).
    pub fn apply(&self, y: &SampledFunction) -> SampledFunction {
        match self.kind {
            OperatorKind::Exponential => apply_t_quadrature(y),
            OperatorKind::Identity => y.clone(),
        }
    }

    /// Coefficients `⟨w_j, y⟩` for every retained eigenfunction.
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        self.w
            .iter()
            .map(|w| l2_inner_slices(self.grid, w.values(), y))
            .collect()
    }

    /// `y − Σ_j ⟨w_j, y⟩ w_j`.
    pub fn residual(&self, y: &[f64]) -> Vec<f64> {
        let coeffs = self.project(y);
        let mut r = y.to_vec();
        for (c, w) in coeffs.iter().zip(&self.w) {
            for (ri, wi) in r.iter_mut().zip(w.values()) {
                *ri -= c * wi;
            }
        }
        r
    }

    /// Fraction of `Σ‖y_i‖²` lying outside the retained eigenfunctions.
    pub fn discarded_energy_ratio(&self, ys: &[SampledFunction]) -> f64 {
        let mut total = 0.0;
        let mut lost = 0.0;
        for y in ys {
            total += l2_inner_slices(self.grid, y.values(), y.values());
            let r = self.residual(y.values());
            lost += l2_inner_slices(self.grid, &r, &r);
        }
        if total > 0.0 {
            lost / total
        } else {
            0.0
        }
    }
}

#[inline]
fn eigenvalue(mu: f64) -> f64 {
    2.0 / (1.0 + mu * mu)
}

fn eigenfunction(mu: f64, grid: Grid) -> SampledFunction {
    let raw = SampledFunction::from_fn(grid, |t| mu * (mu * t).cos() + (mu * t).sin());
    let norm = raw.norm();
    raw.scaled(1.0 / norm)
}

/// First `k` eigenpairs of `T`, eigenfunctions normalized on `grid`.
pub fn operator_eigensystem(k: usize, grid: Grid) -> Result<OperatorEigen> {
    let mut mu = find_mu_roots(k + 1)?;
    let next_mu = mu.pop().expect("k + 1 >= 2 roots");
    Ok(OperatorEigen::from_roots(mu, next_mu, grid))
}

/// `e^{−d h}` for every index distance `d` on the grid.
fn decay_table(grid: Grid) -> Vec<f64> {
    let h = grid.spacing();
    (0..grid.len()).map(|d| (-(d as f64) * h).exp()).collect()
}

/// Trapezoid discretization of `T` applied to `y`.
pub fn apply_t_quadrature(y: &SampledFunction) -> SampledFunction {
    let grid = y.grid();
    let m = grid.len();
    let table = decay_table(grid);
    let weights = grid.weights();
    let yv = y.values();
    let out = (0..m)
        .map(|a| {
            (0..m)
                .map(|b| (table[a.abs_diff(b)] * weights[b]) * yv[b])
                .sum()
        })
        .collect();
    SampledFunction::from_raw(grid, out)
}

/// `D[a][b] = e^{−|t_a − t_b|} w_b`; `D y` reproduces [`apply_t_quadrature`].
pub fn dense_t_matrix(grid: Grid) -> Matrix {
    let table = decay_table(grid);
    let weights = grid.weights();
    Matrix::from_fn(grid.len(), grid.len(), |a, b| {
        table[a.abs_diff(b)] * weights[b]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function_space::l2_inner;
    use crate::linalg::sym_eigen;
    use proptest::prelude::*;

    /// Plain bisection on floats until the bracket is narrower than 1e-15.
    fn oracle_first_root() -> f64 {
        let (mut lo, mut hi) = (1e-3, PI);
        while hi - lo > 1e-15 {
            let mid = 0.5 * (lo + hi);
            if root_function(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Frozen from `oracle_first_root`.
    const MU_1: f64 = 1.306_542_374_188_806_5;

    #[test]
    fn first_root_regression() {
        assert!((oracle_first_root() - MU_1).abs() < 1e-14);
        let mu = find_mu_roots(1).unwrap();
        assert!((mu[0] - MU_1).abs() < 1e-14);
        assert!(mu[0] > 0.0 && mu[0] < PI);
    }

    #[test]
    fn one_root_per_interval() {
        let mu = find_mu_roots(3).unwrap();
        for (i, &m) in mu.iter().enumerate() {
            let (lo, hi) = ((i as f64) * PI, (i + 1) as f64 * PI);
            assert!(m > lo && m < hi);
            // exactly one sign change of g on a fine scan of the open interval
            let steps = 2000;
            let scan: Vec<f64> = (1..steps)
                .map(|s| root_function(lo + (hi - lo) * s as f64 / steps as f64))
                .collect();
            let changes = scan
                .windows(2)
                .filter(|w| w[0].signum() != w[1].signum())
                .count();
            assert_eq!(changes, 1, "interval {i}");
        }
        assert!(mu.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn eigenvalues_in_range() {
        let e = operator_eigensystem(12, Grid::new(33).unwrap()).unwrap();
        for &d in e.delta() {
            assert!(d > 0.0 && d < 2.0);
        }
        assert!(e.delta().windows(2).all(|w| w[0] > w[1]));
        assert!(e.next_delta() < *e.delta().last().unwrap());
    }

    #[test]
    fn root_residuals() {
        let mu = find_mu_roots(20).unwrap();
        for (i, &m) in mu.iter().enumerate() {
            assert!(
                cot_residual(m).abs() <= 1e-10,
                "root {}: {:e}",
                i + 1,
                cot_residual(m)
            );
            let g = root_function(m).abs();
            if i < 8 {
                assert!(g <= 1e-12, "root {}: |g| = {g:e}", i + 1);
            }
            // no neighbouring double does better
            let up = f64::from_bits(m.to_bits() + 1);
            let down = f64::from_bits(m.to_bits() - 1);
            assert!(g <= root_function(up).abs() && g <= root_function(down).abs());
            // |g| is within the float floor |g'(μ)| · ulp(μ)
            let dg = (3.0 - m * m) * m.cos() - 4.0 * m * m.sin();
            let ulp = up - m;
            assert!(
                g <= 1e-12f64.max(dg.abs() * ulp),
                "root {}: |g| = {g:e}",
                i + 1
            );
        }
    }

    #[test]
    fn zero_k_rejected() {
        assert!(find_mu_roots(0).is_err());
    }

    #[test]
    fn eigenfunctions_normalized() {
        let e = operator_eigensystem(8, Grid::new(401).unwrap()).unwrap();
        for w in e.eigenfunctions() {
            assert!((w.norm() - 1.0).abs() <= 1e-8);
        }
        let ws = e.eigenfunctions();
        let mut worst = 0.0f64;
        for i in 0..ws.len() {
            for j in (i + 1)..ws.len() {
                worst = worst.max(l2_inner(&ws[i], &ws[j]).unwrap().abs());
            }
        }
        // trapezoid error on the products, O(h²)
        assert!(worst < 1e-5, "{worst:e}");
    }

    #[test]
    fn orthogonality_improves_with_grid() {
        let worst = |m: usize| {
            let e = operator_eigensystem(5, Grid::new(m).unwrap()).unwrap();
            let ws = e.eigenfunctions();
            let mut worst = 0.0f64;
            for i in 0..ws.len() {
                for j in (i + 1)..ws.len() {
                    worst = worst.max(l2_inner(&ws[i], &ws[j]).unwrap().abs());
                }
            }
            worst
        };
        assert!(worst(1601) <= 1e-6);
        assert!(worst(801) < worst(401));
    }

    #[test]
    fn zero_input() {
        let g = Grid::new(17).unwrap();
        let out = apply_t_quadrature(&SampledFunction::zeros(g));
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_input_matches_closed_form() {
        // ∫₀¹ e^{−|t−s|} ds = 2 − e^{−t} − e^{−(1−t)}
        let err = |m: usize| {
            let g = Grid::new(m).unwrap();
            let out = apply_t_quadrature(&SampledFunction::constant(g, 1.0));
            g.points()
                .iter()
                .zip(out.values())
                .map(|(&t, &v)| (v - (2.0 - (-t).exp() - (-(1.0 - t)).exp())).abs())
                .fold(0.0, f64::max)
        };
        for m in [21, 41, 81] {
            let h = 1.0 / (m - 1) as f64;
            assert!(err(m) <= h * h);
        }
        assert!(err(41) < err(21) / 3.5);
    }

    #[test]
    fn eigenpair_pointwise_k1() {
        let g = Grid::new(201).unwrap();
        let e = operator_eigensystem(1, g).unwrap();
        let w = &e.eigenfunctions()[0];
        let tw = apply_t_quadrature(w);
        let d = e.delta()[0];
        for (a, b) in tw.values().iter().zip(w.values()) {
            assert!((a - d * b).abs() <= 1e-3);
        }
    }

    #[test]
    fn rayleigh_quotients_k5() {
        let g = Grid::new(401).unwrap();
        let e = operator_eigensystem(5, g).unwrap();
        for (w, &d) in e.eigenfunctions().iter().zip(e.delta()) {
            let rq = l2_inner(&apply_t_quadrature(w), w).unwrap();
            assert!((rq - d).abs() <= 1e-3);
        }
    }

    fn spectral_error(m: usize, i: usize) -> f64 {
        let g = Grid::new(m).unwrap();
        let e = operator_eigensystem(i, g).unwrap();
        let w = &e.eigenfunctions()[i - 1];
        let d = e.delta()[i - 1];
        let mut r = apply_t_quadrature(w);
        r.axpy(-d, w).unwrap();
        r.norm() / d
    }

    #[test]
    fn spectral_consistency_improves_with_grid() {
        for i in 1..=5 {
            let coarse = spectral_error(401, i);
            assert!(coarse <= 1e-3, "i={i}: {coarse:e}");
            assert!(spectral_error(801, i) < coarse);
        }
    }

    #[test]
    fn dense_matrix_two_points() {
        let d = dense_t_matrix(Grid::new(2).unwrap());
        let e = (-1.0f64).exp();
        assert_eq!(d.row(0), &[0.5, 0.5 * e]);
        assert_eq!(d.row(1), &[0.5 * e, 0.5]);
    }

    #[test]
    fn symmetrized_dense_matrix_is_psd() {
        for m in [2, 11, 64, 129] {
            let g = Grid::new(m).unwrap();
            let w = g.weights();
            let s = Matrix::from_fn(m, m, |a, b| {
                w[a].sqrt() * (-(g.point(a) - g.point(b)).abs()).exp() * w[b].sqrt()
            });
            let e = sym_eigen(&s).unwrap();
            assert!(*e.alpha.last().unwrap() >= -1e-8);
        }
    }

    #[test]
    fn identity_operator_basis_is_orthonormal() {
        let g = Grid::new(7).unwrap();
        let e = OperatorEigen::identity(g);
        assert_eq!(e.k(), 7);
        let ws = e.eigenfunctions();
        for i in 0..7 {
            for j in 0..7 {
                let v = l2_inner(&ws[i], &ws[j]).unwrap();
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((v - target).abs() < 1e-14);
            }
        }
        let y = SampledFunction::from_fn(g, |t| t * t);
        assert!(e.residual(y.values()).iter().all(|r| r.abs() < 1e-14));
    }

    #[test]
    fn discarded_energy_shrinks_with_k() {
        let g = Grid::new(64).unwrap();
        let y = vec![SampledFunction::from_fn(g, |t| {
            if t >= 0.5 {
                1.0
            } else {
                0.0
            }
        })];
        let ratios: Vec<f64> = (1..=8)
            .map(|k| {
                operator_eigensystem(k, g)
                    .unwrap()
                    .discarded_energy_ratio(&y)
            })
            .collect();
        assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");
    }

    fn sampled(m: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-3.0f64..3.0, m)
    }

    proptest! {
        #[test]
        fn dense_rows_match_quadrature(y in sampled(23)) {
            let g = Grid::new(23).unwrap();
            let y = SampledFunction::new(g, y).unwrap();
            let direct = apply_t_quadrature(&y);
            let dense = dense_t_matrix(g).matvec(y.values()).unwrap();
            for (a, b) in direct.values().iter().zip(&dense) {
                prop_assert!((a - b).abs() <= 1e-14);
            }
        }

        #[test]
        fn self_adjoint_and_positive(f in sampled(31), h in sampled(31)) {
            let g = Grid::new(31).unwrap();
            let f = SampledFunction::new(g, f).unwrap();
            let h = SampledFunction::new(g, h).unwrap();
            let tf = apply_t_quadrature(&f);
            let th = apply_t_quadrature(&h);
            let lhs = l2_inner(&tf, &h).unwrap();
            let rhs = l2_inner(&f, &th).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-8);
            prop_assert!(l2_inner(&tf, &f).unwrap() >= -1e-8);
            let bound = 2.0 * f.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
            prop_assert!(tf.values().iter().all(|v| v.abs() <= bound + 1e-12));
        }
    }
}
