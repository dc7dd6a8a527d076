//! Run configuration: a flat TOML file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use frlsc::classifier::{DecisionRule, LabelKind, LabelScheme, TuningGrid};
use frlsc::data::DataFormat;
use frlsc::integral_operator::OperatorKind;
use frlsc::scalar_kernel::KernelKind;

/// Every setting any command reads. Keys in the config file use the same
/// names as the long flags, with underscores.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Dataset file (CSV or JSON)
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Dataset format: csv or json (default: from the file extension)
    #[arg(long)]
    pub format: Option<String>,
    /// Model file to write (train) or read (predict, evaluate, verify)
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Directory for reports
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Output file for synth
    #[arg(long)]
    pub output: Option<PathBuf>,

    /// Scalar kernel: gaussian or laplacian-l2
    #[arg(long)]
    pub kernel: Option<String>,
    /// Kernel bandwidth (default: searched, or the median distance when lambda is fixed)
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Regularization parameter (default: searched on a validation split)
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Number of retained eigenpairs of the output operator
    #[arg(long)]
    pub k: Option<usize>,
    /// Output operator: exponential or identity
    #[arg(long)]
    pub operator: Option<String>,
    /// Label curves: heaviside or constant
    #[arg(long)]
    pub label_kind: Option<String>,
    /// Label amplitude
    #[arg(long)]
    pub label_scale: Option<f64>,
    /// Heaviside step location in (0, 1)
    #[arg(long)]
    pub step_at: Option<f64>,
    /// Decision rule: projection or distance
    #[arg(long)]
    pub rule: Option<String>,

    /// Bandwidth candidates as multiples of the median distance
    #[arg(long, value_delimiter = ',')]
    pub sigma_factors: Option<Vec<f64>>,
    /// Regularization candidates
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// Share of the training set held out for the search
    #[arg(long)]
    pub validation_fraction: Option<f64>,
    /// Share of the dataset used for training in benchmark
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Seed for every random choice
    #[arg(long)]
    pub seed: Option<u64>,

    /// Synthetic data kind: lag or null
    #[arg(long)]
    pub synth: Option<String>,
    /// Synthetic observations per class
    #[arg(long)]
    pub n_per_class: Option<usize>,
    /// Synthetic class count
    #[arg(long)]
    pub classes: Option<usize>,
    /// Channels per observation (synth, verify)
    #[arg(long)]
    pub p: Option<usize>,
    /// Samples per curve (synth, verify)
    #[arg(long)]
    pub m: Option<usize>,
    /// Standard deviation of the synthetic noise
    #[arg(long)]
    pub noise_sd: Option<f64>,

    /// Observations per verify instance
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of verify instances
    #[arg(long)]
    pub instances: Option<usize>,
    /// Grid size of the spectral check
    #[arg(long)]
    pub spectral_m: Option<usize>,
    /// Eigenpairs covered by the spectral check
    #[arg(long)]
    pub spectral_pairs: Option<usize>,
}

impl Settings {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Fields set in `flags` replace those from the file.
    pub fn overlay(self, flags: &Settings) -> Settings {
        let mut base = serde_json::to_value(self).expect("settings serialize");
        let top = serde_json::to_value(flags).expect("settings serialize");
        for (key, value) in top.as_object().expect("object") {
            if !value.is_null() {
                base[key] = value.clone();
            }
        }
        serde_json::from_value(base).expect("merged settings deserialize")
    }
}

/// Collects field errors so they can be reported together.
#[derive(Default)]
pub struct Problems(Vec<String>);

impl Problems {
    pub fn push(&mut self, field: &str, msg: impl std::fmt::Display) {
        self.0.push(format!("{field}: {msg}"));
    }

    pub fn parse<T: std::str::FromStr<Err = String>>(
        &mut self,
        field: &str,
        value: &Option<String>,
        default: T,
    ) -> T {
        match value {
            None => default,
            Some(s) => s.parse().unwrap_or_else(|e| {
                self.push(field, e);
                default
            }),
        }
    }

    pub fn positive(&mut self, field: &str, value: Option<f64>) {
        if let Some(v) = value {
            if !(v > 0.0 && v.is_finite()) {
                self.push(field, format!("must be positive, got {v}"));
            }
        }
    }

    pub fn fraction(&mut self, field: &str, value: Option<f64>) {
        if let Some(v) = value {
            if !(v > 0.0 && v < 1.0) {
                self.push(field, format!("must lie in (0, 1), got {v}"));
            }
        }
    }

    pub fn at_least(&mut self, field: &str, value: Option<usize>, min: usize) {
        if let Some(v) = value {
            if v < min {
                self.push(field, format!("must be at least {min}, got {v}"));
            }
        }
    }

    pub fn require<'a, T>(&mut self, field: &str, value: &'a Option<T>) -> Option<&'a T> {
        if value.is_none() {
            self.push(field, "required");
        }
        value.as_ref()
    }

    pub fn finish(self) -> Result<(), Vec<String>> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(self.0)
        }
    }
}

/// Model settings shared by train and benchmark, validated together.
#[derive(Debug, Clone)]
pub struct ModelChoices {
    pub kernel: KernelKind,
    pub operator: OperatorKind,
    pub scheme: LabelScheme,
    pub rule: DecisionRule,
    pub k: usize,
    pub tuning: TuningGrid,
    pub seed: u64,
}

pub const DEFAULT_K: usize = 20;

impl ModelChoices {
    pub fn from_settings(s: &Settings, problems: &mut Problems) -> Self {
        let kernel = problems.parse("kernel", &s.kernel, KernelKind::Gaussian);
        let operator = problems.parse("operator", &s.operator, OperatorKind::Exponential);
        let label_kind = problems.parse("label_kind", &s.label_kind, LabelKind::Heaviside);
        let rule = problems.parse("rule", &s.rule, DecisionRule::Projection);
        problems.positive("sigma", s.sigma);
        problems.positive("lambda", s.lambda);
        problems.positive("label_scale", s.label_scale);
        problems.fraction("step_at", s.step_at);
        problems.fraction("validation_fraction", s.validation_fraction);
        problems.at_least("k", s.k, 1);
        if let Some(f) = &s.sigma_factors {
            if f.is_empty() || f.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                problems.push(
                    "sigma_factors",
                    "must be a non-empty list of positive numbers",
                );
            }
        }
        if let Some(l) = &s.lambdas {
            if l.is_empty() || l.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                problems.push("lambdas", "must be a non-empty list of positive numbers");
            }
        }
        let defaults = TuningGrid::default();
        let defaults_scheme = LabelScheme::default();
        Self {
            kernel,
            operator,
            scheme: LabelScheme {
                kind: label_kind,
                scale: s.label_scale.unwrap_or(defaults_scheme.scale),
                step_at: s.step_at.unwrap_or(defaults_scheme.step_at),
            },
            rule,
            k: s.k.unwrap_or(DEFAULT_K),
            tuning: TuningGrid {
                sigma_factors: s.sigma_factors.clone().unwrap_or(defaults.sigma_factors),
                fixed_sigma: s.sigma,
                lambdas: s.lambdas.clone().unwrap_or(defaults.lambdas),
                validation_fraction: s
                    .validation_fraction
                    .unwrap_or(defaults.validation_fraction),
            },
            seed: s.seed.unwrap_or(0),
        }
    }
}

pub fn data_format(s: &Settings, path: &Path, problems: &mut Problems) -> DataFormat {
    problems.parse("format", &s.format, DataFormat::from_path(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = Settings::from_toml("lambda = 0.5\nk = 8\nkernel = \"gaussian\"\n").unwrap();
        let flags = Settings {
            k: Some(12),
            ..Settings::default()
        };
        let merged = file.overlay(&flags);
        assert_eq!(merged.k, Some(12));
        assert_eq!(merged.lambda, Some(0.5));
        assert_eq!(merged.kernel.as_deref(), Some("gaussian"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = Settings::from_toml("lamda = 0.5\n").unwrap_err();
        assert!(err.contains("lamda"), "{err}");
    }

    #[test]
    fn all_problems_are_reported_together() {
        let s = Settings {
            kernel: Some("cubic".into()),
            lambda: Some(-1.0),
            k: Some(0),
            step_at: Some(2.0),
            ..Settings::default()
        };
        let mut p = Problems::default();
        ModelChoices::from_settings(&s, &mut p);
        let errs = p.finish().unwrap_err();
        assert_eq!(errs.len(), 4, "{errs:?}");
        for field in ["kernel:", "lambda:", "k:", "step_at:"] {
            assert!(
                errs.iter().any(|e| e.starts_with(field)),
                "{field} {errs:?}"
            );
        }
    }
}
