//! Sampled representation of `L²([0,1])` and `(L²)^p`.
//!
//! Every curve lives on a uniform [`Grid`] with both endpoints included.
//! Inner products use the composite trapezoid rule, so the quadrature
//! weights are `h` in the interior and `h/2` at the two ends.

use serde::{Deserialize, Serialize};

use crate::error::{argument, structural, Result};

/// Uniform grid on `[0, 1]` with `m ≥ 2` points, `t_a = a / (m - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    m: usize,
}

impl Grid {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(argument(format!("grid needs at least 2 points, got {m}")));
        }
        Ok(Self { m })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.m
    }

    /// Always false; a grid has at least two points.
    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        1.0 / (self.m - 1) as f64
    }

    #[inline]
    pub fn point(&self, a: usize) -> f64 {
        if a == self.m - 1 {
            1.0
        } else {
            a as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.m).map(|a| self.point(a)).collect()
    }

    /// Trapezoid weight of grid point `a`.
    #[inline]
    pub fn weight(&self, a: usize) -> f64 {
        let h = self.spacing();
        if a == 0 || a == self.m - 1 {
            0.5 * h
        } else {
            h
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.m).map(|a| self.weight(a)).collect()
    }

    fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(structural(format!(
                "grid mismatch: {} points vs {} points",
                self.m, other.m
            )));
        }
        Ok(())
    }
}

/// A real curve on `[0, 1]` given by its values on a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(structural(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(argument(format!("non-finite sample at index {pos}")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.len()).map(|a| f(grid.point(a))).collect();
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Unchecked constructor for values produced by arithmetic on valid functions.
    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self::from_raw(self.grid, self.values.iter().map(|v| alpha * v).collect())
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &SampledFunction) -> Result<()> {
        self.grid.ensure_same(&other.grid)?;
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += alpha * o;
        }
        Ok(())
    }

    pub fn norm(&self) -> f64 {
        l2_inner_unchecked(self.grid, &self.values, &self.values).sqrt()
    }
}

/// `p` curves on one shared grid; a single input point in `(L²)^p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalObservation {
    channels: Vec<SampledFunction>,
}

impl FunctionalObservation {
    pub fn new(channels: Vec<SampledFunction>) -> Result<Self> {
        let first = channels
            .first()
            .ok_or_else(|| argument("observation needs at least one channel"))?;
        let grid = first.grid();
        for (c, ch) in channels.iter().enumerate().skip(1) {
            if ch.grid() != grid {
                return Err(structural(format!(
                    "channel {c} has {} points, channel 0 has {}",
                    ch.grid().len(),
                    grid.len()
                )));
            }
        }
        Ok(Self { channels })
    }

    #[inline]
    pub fn channels(&self) -> &[SampledFunction] {
        &self.channels
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.channels.len()
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.channels[0].grid()
    }

    pub(crate) fn ensure_compatible(&self, other: &FunctionalObservation) -> Result<()> {
        if self.p() != other.p() {
            return Err(structural(format!(
                "channel count mismatch: {} vs {}",
                self.p(),
                other.p()
            )));
        }
        self.grid().ensure_same(&other.grid())
    }
}

#[inline]
fn l2_inner_unchecked(grid: Grid, f: &[f64], g: &[f64]) -> f64 {
    let m = grid.len();
    let interior: f64 = f[1..m - 1]
        .iter()
        .zip(&g[1..m - 1])
        .map(|(a, b)| a * b)
        .sum();
    let ends = 0.5 * (f[0] * g[0] + f[m - 1] * g[m - 1]);
    grid.spacing() * (interior + ends)
}

/// Trapezoid approximation of `∫₀¹ f(t) g(t) dt`.
pub fn l2_inner(f: &SampledFunction, g: &SampledFunction) -> Result<f64> {
    f.grid.ensure_same(&g.grid)?;
    Ok(l2_inner_unchecked(f.grid, &f.values, &g.values))
}

pub(crate) fn l2_inner_slices(grid: Grid, f: &[f64], g: &[f64]) -> f64 {
    l2_inner_unchecked(grid, f, g)
}

/// `Σ_c ‖a_c − b_c‖²` over the channels of two observations.
pub fn l2p_distance_sq(a: &FunctionalObservation, b: &FunctionalObservation) -> Result<f64> {
    a.ensure_compatible(b)?;
    let grid = a.grid();
    let m = grid.len();
    let mut total = 0.0;
    for (ca, cb) in a.channels.iter().zip(&b.channels) {
        let (fa, fb) = (&ca.values, &cb.values);
        let interior: f64 = (1..m - 1)
            .map(|i| {
                let d = fa[i] - fb[i];
                d * d
            })
            .sum();
        let d0 = fa[0] - fb[0];
        let d1 = fa[m - 1] - fb[m - 1];
        total += grid.spacing() * (interior + 0.5 * (d0 * d0 + d1 * d1));
    }
    Ok(total)
}

/// Inner product on `(L²)^n`: `Σ_j ⟨y_j, z_j⟩`.
pub fn vector_inner(yv: &[SampledFunction], zv: &[SampledFunction]) -> Result<f64> {
    if yv.len() != zv.len() {
        return Err(structural(format!(
            "function vectors differ in length: {} vs {}",
            yv.len(),
            zv.len()
        )));
    }
    yv.iter().zip(zv).map(|(y, z)| l2_inner(y, z)).sum()
}

/// Linear interpolation of values sampled uniformly on `[0,1]` onto `m` points.
pub fn resample_linear(values: &[f64], m: usize) -> Result<Vec<f64>> {
    Grid::new(values.len())?;
    let dst = Grid::new(m)?;
    let last = values.len() - 1;
    Ok((0..m)
        .map(|a| {
            let x = dst.point(a) * last as f64;
            let lo = (x.floor() as usize).min(last - 1);
            let frac = x - lo as f64;
            if frac == 0.0 {
                values[lo]
            } else {
                values[lo] + frac * (values[lo + 1] - values[lo])
            }
        })
        .collect())
}
