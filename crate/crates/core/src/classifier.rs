//! One-vs-all classification with function-valued labels.
//!
//! Class `c` gets a binary problem whose label curves are `y₊` for members
//! of `c` and `−y₊` otherwise. The Gram matrix and the operator eigensystem
//! depend only on the inputs, so they are decomposed once and shared by all
//! `N` problems.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{split_indices, Dataset};
use crate::error::{argument, structural, Result};
use crate::function_space::{l2_inner, FunctionalObservation, Grid, SampledFunction};
use crate::integral_operator::{OperatorEigen, OperatorKind};
use crate::linalg::{sym_eigen, Matrix};
use crate::metrics::ConfusionMatrix;
use crate::scalar_kernel::{
    cross_kernel, distance_matrix, gram_from_distances, gram_matrix, median_distance, KernelKind,
    ScalarKernelParams,
};
use crate::solver::{
    solve_beta, KroneckerEigen, RegularizationConfig, SpectralDiagnostics, TrainedModel,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelKind {
    #[default]
    Heaviside,
    Constant,
}

impl std::str::FromStr for LabelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "heaviside" => Ok(Self::Heaviside),
            "constant" => Ok(Self::Constant),
            other => Err(format!(
                "unknown label kind '{other}' (expected heaviside or constant)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelScheme {
    pub kind: LabelKind,
    pub scale: f64,
    /// Step location for heaviside labels.
    pub step_at: f64,
}

impl Default for LabelScheme {
    fn default() -> Self {
        Self {
            kind: LabelKind::Heaviside,
            scale: 1.0,
            step_at: 0.5,
        }
    }
}

impl LabelScheme {
    pub fn new(kind: LabelKind, scale: f64, step_at: f64) -> Result<Self> {
        let scheme = Self {
            kind,
            scale,
            step_at,
        };
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn constant(scale: f64) -> Result<Self> {
        Self::new(LabelKind::Constant, scale, 0.5)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(argument(format!(
                "label scale must be positive, got {}",
                self.scale
            )));
        }
        if self.kind == LabelKind::Heaviside && !(self.step_at > 0.0 && self.step_at < 1.0) {
            return Err(argument(format!(
                "step location must lie in (0, 1), got {}",
                self.step_at
            )));
        }
        Ok(())
    }
}

/// `scale · 𝟙[t ≥ step_at]` (or `scale`) for positives, its negation otherwise.
pub fn make_label(positive: bool, scheme: &LabelScheme, grid: Grid) -> SampledFunction {
    let sign = if positive {
        scheme.scale
    } else {
        -scheme.scale
    };
    match scheme.kind {
        LabelKind::Constant => SampledFunction::constant(grid, sign),
        LabelKind::Heaviside => {
            SampledFunction::from_fn(grid, |t| if t >= scheme.step_at { sign } else { 0.0 })
        }
    }
}

/// How a predicted curve becomes a class score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecisionRule {
    /// `⟨f(x), y₊⟩ / ‖y₊‖²`
    #[default]
    Projection,
    /// `−‖f(x) − y₊‖²`
    Distance,
}

impl std::str::FromStr for DecisionRule {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "projection" => Ok(Self::Projection),
            "distance" => Ok(Self::Distance),
            other => Err(format!(
                "unknown decision rule '{other}' (expected projection or distance)"
            )),
        }
    }
}

/// Index of the largest score, lowest index on ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (c, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = c;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct MulticlassModel {
    class_names: Vec<String>,
    per_class: Vec<TrainedModel>,
    scheme: LabelScheme,
    rule: DecisionRule,
    positive: SampledFunction,
}

impl MulticlassModel {
    pub fn new(
        class_names: Vec<String>,
        per_class: Vec<TrainedModel>,
        scheme: LabelScheme,
        rule: DecisionRule,
    ) -> Result<Self> {
        scheme.validate()?;
        if per_class.len() < 2 || per_class.len() != class_names.len() {
            return Err(structural(format!(
                "{} binary models for {} classes (need at least 2)",
                per_class.len(),
                class_names.len()
            )));
        }
        let first = &per_class[0];
        for m in &per_class[1..] {
            if !Arc::ptr_eq(m.inputs(), first.inputs()) && m.inputs() != first.inputs() {
                return Err(structural("binary models were trained on different inputs"));
            }
            if m.params() != first.params()
                || m.lambda() != first.lambda()
                || m.operator() != first.operator()
            {
                return Err(structural(
                    "binary models disagree on kernel, lambda or operator",
                ));
            }
        }
        let positive = make_label(true, &scheme, first.grid());
        Ok(Self {
            class_names,
            per_class,
            scheme,
            rule,
            positive,
        })
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn per_class(&self) -> &[TrainedModel] {
        &self.per_class
    }

    pub fn scheme(&self) -> &LabelScheme {
        &self.scheme
    }

    pub fn rule(&self) -> DecisionRule {
        self.rule
    }

    pub fn with_rule(mut self, rule: DecisionRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn params(&self) -> &ScalarKernelParams {
        self.per_class[0].params()
    }

    pub fn lambda(&self) -> f64 {
        self.per_class[0].lambda()
    }

    pub fn operator(&self) -> &Arc<OperatorEigen> {
        self.per_class[0].operator()
    }

    pub fn inputs(&self) -> &Arc<Vec<FunctionalObservation>> {
        self.per_class[0].inputs()
    }

    pub fn grid(&self) -> Grid {
        self.per_class[0].grid()
    }

    fn score(&self, f: &SampledFunction) -> f64 {
        match self.rule {
            DecisionRule::Projection => {
                l2_inner(f, &self.positive).expect("shared grid")
                    / l2_inner(&self.positive, &self.positive).expect("shared grid")
            }
            DecisionRule::Distance => {
                let mut r = f.clone();
                r.axpy(-1.0, &self.positive).expect("shared grid");
                -l2_inner(&r, &r).expect("shared grid")
            }
        }
    }

    /// Class scores from precomputed `G(x, x_j)` values.
    pub fn scores_from_kernel_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.per_class
            .iter()
            .map(|m| Ok(self.score(&m.predict_from_kernel_row(row)?)))
            .collect()
    }

    fn check_query(&self, x: &FunctionalObservation) -> Result<()> {
        self.inputs()[0].ensure_compatible(x)
    }
}

/// Everything that fixes a functional fit apart from the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalSettings {
    pub params: ScalarKernelParams,
    pub config: RegularizationConfig,
    pub scheme: LabelScheme,
    pub operator: OperatorKind,
}

fn check_classes(labels: &[usize], n_classes: usize) -> Result<()> {
    if n_classes < 2 {
        return Err(argument("one-vs-all training needs at least 2 classes"));
    }
    let mut counts = vec![0usize; n_classes];
    for &l in labels {
        counts[l] += 1;
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(argument(format!("class {c} has no training examples")));
    }
    Ok(())
}

/// One-vs-all label curves for class `c`.
pub fn binary_labels(
    labels: &[usize],
    c: usize,
    scheme: &LabelScheme,
    grid: Grid,
) -> Vec<SampledFunction> {
    let pos = make_label(true, scheme, grid);
    let neg = make_label(false, scheme, grid);
    labels
        .iter()
        .map(|&l| if l == c { pos.clone() } else { neg.clone() })
        .collect()
}

/// Solves all binary problems from one shared eigensystem.
fn fit_shared(
    inputs: Arc<Vec<FunctionalObservation>>,
    gram: &Matrix,
    labels: &[usize],
    class_names: Vec<String>,
    settings: &FunctionalSettings,
    op: Arc<OperatorEigen>,
) -> Result<(MulticlassModel, SpectralDiagnostics)> {
    check_classes(labels, class_names.len())?;
    let grid = op.grid();
    let ke = KroneckerEigen::new(&sym_eigen(gram)?, op.clone());
    let lambda = settings.config.lambda;
    let per_class = (0..class_names.len())
        .into_par_iter()
        .map(|c| {
            let yv = binary_labels(labels, c, &settings.scheme, grid);
            let beta = solve_beta(&yv, &ke, lambda)?;
            TrainedModel::new(inputs.clone(), beta, lambda, settings.params, op.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    let diagnostics = ke.diagnostics(&binary_labels(labels, 0, &settings.scheme, grid), lambda);
    let model = MulticlassModel::new(
        class_names,
        per_class,
        settings.scheme,
        DecisionRule::default(),
    )?;
    Ok((model, diagnostics))
}

pub fn train_multiclass(data: &Dataset, settings: &FunctionalSettings) -> Result<MulticlassModel> {
    Ok(train_multiclass_with_diagnostics(data, settings)?.0)
}

pub fn train_multiclass_with_diagnostics(
    data: &Dataset,
    settings: &FunctionalSettings,
) -> Result<(MulticlassModel, SpectralDiagnostics)> {
    check_classes(data.labels(), data.n_classes())?;
    let inputs = Arc::new(data.observations().to_vec());
    let gram = gram_matrix(&inputs, &settings.params)?;
    let op = Arc::new(OperatorEigen::build(
        settings.operator,
        settings.config.k,
        data.grid(),
    )?);
    fit_shared(
        inputs,
        &gram,
        data.labels(),
        data.class_names().to_vec(),
        settings,
        op,
    )
}

/// Predicted class and per-class scores.
pub fn classify(model: &MulticlassModel, x: &FunctionalObservation) -> Result<(usize, Vec<f64>)> {
    model.check_query(x)?;
    let row = cross_kernel(std::slice::from_ref(x), model.inputs(), model.params())?;
    let scores = model.scores_from_kernel_row(row.row(0))?;
    Ok((argmax(&scores), scores))
}

/// Predicted classes for a batch.
pub fn classify_all(
    model: &MulticlassModel,
    xs: &[FunctionalObservation],
) -> Result<Vec<(usize, Vec<f64>)>> {
    for x in xs {
        model.check_query(x)?;
    }
    let rows = cross_kernel(xs, model.inputs(), model.params())?;
    (0..xs.len())
        .into_par_iter()
        .map(|i| {
            let scores = model.scores_from_kernel_row(rows.row(i))?;
            Ok((argmax(&scores), scores))
        })
        .collect()
}

pub fn evaluate(model: &MulticlassModel, test: &Dataset) -> Result<ConfusionMatrix> {
    if test.is_empty() {
        return Err(argument("cannot evaluate on an empty test set"));
    }
    if test.n_classes() != model.n_classes() {
        return Err(structural(format!(
            "test set has {} classes, model has {}",
            test.n_classes(),
            model.n_classes()
        )));
    }
    let predicted: Vec<usize> = classify_all(model, test.observations())?
        .into_iter()
        .map(|(c, _)| c)
        .collect();
    ConfusionMatrix::from_pairs(model.class_names().to_vec(), &predicted, test.labels())
}

/// Candidate hyperparameters searched on a held-out part of the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningGrid {
    /// Bandwidths as multiples of the median pairwise distance.
    pub sigma_factors: Vec<f64>,
    /// When set, the bandwidth is not searched.
    pub fixed_sigma: Option<f64>,
    pub lambdas: Vec<f64>,
    pub validation_fraction: f64,
}

impl Default for TuningGrid {
    fn default() -> Self {
        Self {
            sigma_factors: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            fixed_sigma: None,
            lambdas: vec![1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3],
            validation_fraction: 0.25,
        }
    }
}

impl TuningGrid {
    pub fn validate(&self) -> Result<()> {
        if self.lambdas.is_empty() || self.lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(argument("lambda grid must be non-empty and positive"));
        }
        if self.fixed_sigma.is_none()
            && (self.sigma_factors.is_empty()
                || self
                    .sigma_factors
                    .iter()
                    .any(|&f| !(f > 0.0 && f.is_finite())))
        {
            return Err(argument("sigma factor grid must be non-empty and positive"));
        }
        if let Some(s) = self.fixed_sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(argument(format!("sigma must be positive, got {s}")));
            }
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(argument("validation fraction must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Candidate bandwidths for a given median distance.
    pub fn sigmas(&self, median: f64) -> Vec<f64> {
        match self.fixed_sigma {
            Some(s) => vec![s],
            None => self.sigma_factors.iter().map(|f| f * median).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningPoint {
    pub sigma: f64,
    pub lambda: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub sigma: f64,
    pub lambda: f64,
    pub validation_accuracy: f64,
    /// Median pairwise distance on the fitting part of the split.
    pub median_distance: f64,
    pub points: Vec<TuningPoint>,
}

/// Picks the best point; earlier grid points win ties.
pub(crate) fn best_point(points: Vec<TuningPoint>, median_distance: f64) -> TuningResult {
    let mut best = 0;
    for (i, p) in points.iter().enumerate() {
        if p.accuracy > points[best].accuracy {
            best = i;
        }
    }
    TuningResult {
        sigma: points[best].sigma,
        lambda: points[best].lambda,
        validation_accuracy: points[best].accuracy,
        median_distance,
        points,
    }
}

/// Stratified fit/validation index split of a training set.
pub(crate) fn validation_split(
    train: &Dataset,
    grid: &TuningGrid,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    grid.validate()?;
    split_indices(
        train.labels(),
        train.n_classes(),
        1.0 - grid.validation_fraction,
        seed,
    )
}

fn submatrix(m: &Matrix, rows: &[usize], cols: &[usize]) -> Matrix {
    Matrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Grid search over `(σ, λ)` by held-out accuracy.
///
/// The kernel decomposition is computed once per bandwidth and reused for
/// every `λ`.
pub fn tune_functional(
    train: &Dataset,
    grid: &TuningGrid,
    kernel: KernelKind,
    k: usize,
    scheme: LabelScheme,
    operator: OperatorKind,
    seed: u64,
) -> Result<TuningResult> {
    let (fit_idx, val_idx) = validation_split(train, grid, seed)?;
    let d2 = distance_matrix(train.observations())?;
    let fit_d2 = submatrix(&d2, &fit_idx, &fit_idx);
    let val_d2 = submatrix(&d2, &val_idx, &fit_idx);
    let median = median_distance(&fit_d2);
    let fit_labels: Vec<usize> = fit_idx.iter().map(|&i| train.labels()[i]).collect();
    let val_labels: Vec<usize> = val_idx.iter().map(|&i| train.labels()[i]).collect();
    let inputs = Arc::new(
        fit_idx
            .iter()
            .map(|&i| train.observations()[i].clone())
            .collect::<Vec<_>>(),
    );
    let op = Arc::new(OperatorEigen::build(operator, k, train.grid())?);
    check_classes(&fit_labels, train.n_classes())?;

    let mut points = Vec::new();
    for sigma in grid.sigmas(median) {
        let params = ScalarKernelParams::new(kernel, sigma)?;
        let gram = gram_from_distances(&fit_d2, &params);
        let cross = Matrix::from_fn(val_d2.rows(), val_d2.cols(), |i, j| {
            params.from_distance_sq(val_d2[(i, j)])
        });
        let ke = KroneckerEigen::new(&sym_eigen(&gram)?, op.clone());
        for &lambda in &grid.lambdas {
            let per_class = (0..train.n_classes())
                .into_par_iter()
                .map(|c| {
                    let yv = binary_labels(&fit_labels, c, &scheme, train.grid());
                    let beta = solve_beta(&yv, &ke, lambda)?;
                    TrainedModel::new(inputs.clone(), beta, lambda, params, op.clone())
                })
                .collect::<Result<Vec<_>>>()?;
            let model = MulticlassModel::new(
                train.class_names().to_vec(),
                per_class,
                scheme,
                DecisionRule::default(),
            )?;
            let correct = (0..val_idx.len())
                .map(|i| {
                    Ok(usize::from(
                        argmax(&model.scores_from_kernel_row(cross.row(i))?) == val_labels[i],
                    ))
                })
                .sum::<Result<usize>>()?;
            points.push(TuningPoint {
                sigma,
                lambda,
                accuracy: correct as f64 / val_idx.len() as f64,
            });
        }
    }
    Ok(best_point(points, median))
}
