//! Functional RLSC against the scalar baseline on identical splits.

use std::fmt::Write as _;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baseline::{evaluate_rlsc, train_rlsc, tune_rlsc, vectorize};
use crate::classifier::{
    evaluate, train_multiclass, tune_functional, FunctionalSettings, LabelScheme, TuningGrid,
    TuningResult,
};
use crate::data::{split, Dataset};
use crate::error::{argument, Result};
use crate::integral_operator::OperatorKind;
use crate::metrics::ConfusionMatrix;
use crate::scalar_kernel::{KernelKind, ScalarKernelParams};
use crate::solver::RegularizationConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub train_fraction: f64,
    pub seed: u64,
    pub tuning: TuningGrid,
    pub kernel: KernelKind,
    pub k: usize,
    pub scheme: LabelScheme,
    pub operator: OperatorKind,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            train_fraction: 2.0 / 3.0,
            seed: 0,
            tuning: TuningGrid::default(),
            kernel: KernelKind::Gaussian,
            k: 20,
            scheme: LabelScheme::default(),
            operator: OperatorKind::Exponential,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub sigma: f64,
    pub lambda: f64,
    pub validation_accuracy: f64,
    pub median_distance: f64,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
}

impl MethodReport {
    fn new(method: &str, tuning: &TuningResult, confusion: ConfusionMatrix) -> Self {
        Self {
            method: method.into(),
            sigma: tuning.sigma,
            lambda: tuning.lambda,
            validation_accuracy: tuning.validation_accuracy,
            median_distance: tuning.median_distance,
            accuracy: confusion.accuracy(),
            confusion,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub functional: MethodReport,
    pub baseline: MethodReport,
    /// Functional minus baseline accuracy, in percentage points.
    pub delta_points: f64,
}

impl BenchmarkReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "seed {}  train {}  test {}",
            self.seed, self.n_train, self.n_test
        )
        .unwrap();
        for m in [&self.functional, &self.baseline] {
            out.push('\n');
            out.push_str(&m.confusion.to_table(&format!(
                "[{}] sigma = {:.6}  lambda = {:e}  validation accuracy = {:.2}%",
                m.method,
                m.sigma,
                m.lambda,
                100.0 * m.validation_accuracy
            )));
        }
        writeln!(
            out,
            "\nfunctional {:.2}%  baseline {:.2}%  delta {:+.2} points",
            100.0 * self.functional.accuracy,
            100.0 * self.baseline.accuracy,
            self.delta_points
        )
        .unwrap();
        out
    }
}

/// Splits `data`, tunes both methods the same way and scores them on the test part.
pub fn run_benchmark(data: &Dataset, config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let split_seed = rng.next_u64();
    let tuning_seed = rng.next_u64();
    let (train, test) = split(data, config.train_fraction, split_seed)?;
    run_on_split(&train, &test, config, tuning_seed)
}

pub fn run_on_split(
    train: &Dataset,
    test: &Dataset,
    config: &BenchmarkConfig,
    tuning_seed: u64,
) -> Result<BenchmarkReport> {
    if train.n_classes() < 2 {
        return Err(argument("benchmark needs at least 2 classes"));
    }
    let ft = tune_functional(
        train,
        &config.tuning,
        config.kernel,
        config.k,
        config.scheme,
        config.operator,
        tuning_seed,
    )?;
    let settings = FunctionalSettings {
        params: ScalarKernelParams::new(config.kernel, ft.sigma)?,
        config: RegularizationConfig::new(ft.lambda, config.k)?,
        scheme: config.scheme,
        operator: config.operator,
    };
    let fmodel = train_multiclass(train, &settings)?;
    let functional = MethodReport::new("functional", &ft, evaluate(&fmodel, test)?);

    let bt = tune_rlsc(train, &config.tuning, tuning_seed)?;
    let bmodel = train_rlsc(&vectorize(train), bt.sigma, bt.lambda)?;
    let baseline = MethodReport::new("baseline", &bt, evaluate_rlsc(&bmodel, &vectorize(test))?);

    Ok(BenchmarkReport {
        seed: config.seed,
        n_train: train.len(),
        n_test: test.len(),
        delta_points: 100.0 * (functional.accuracy - baseline.accuracy),
        functional,
        baseline,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_lag_dataset;

    fn small_config(seed: u64) -> BenchmarkConfig {
        BenchmarkConfig {
            seed,
            k: 8,
            tuning: TuningGrid {
                sigma_factors: vec![0.5, 1.0, 2.0],
                lambdas: vec![1e-2, 1.0],
                ..TuningGrid::default()
            },
            ..BenchmarkConfig::default()
        }
    }

    #[test]
    fn report_is_deterministic_and_complete() {
        let d = synth_lag_dataset(9, 3, 2, 16, 0.5, 4).unwrap();
        let a = run_benchmark(&d, &small_config(7)).unwrap();
        let b = run_benchmark(&d, &small_config(7)).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.n_train, a.n_test), (18, 9));
        assert_eq!(a.functional.confusion.column_totals(), vec![3, 3, 3]);
        assert_eq!(a.baseline.confusion.column_totals(), vec![3, 3, 3]);
        assert!(
            (a.delta_points - 100.0 * (a.functional.accuracy - a.baseline.accuracy)).abs() < 1e-12
        );
        let text = a.to_text();
        assert!(text.contains("[functional]") && text.contains("[baseline]"));
        assert_eq!(text.matches("Total Recognition Rate").count(), 2);
        let json = serde_json::to_string(&a).unwrap();
        let back: BenchmarkReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
    }
}
