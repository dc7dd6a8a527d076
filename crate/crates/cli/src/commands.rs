use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use frlsc::benchmark::{run_benchmark, BenchmarkConfig};
use frlsc::classifier::{
    classify_all, evaluate as evaluate_model, train_multiclass_with_diagnostics, tune_functional,
    FunctionalSettings, TuningResult,
};
use frlsc::data::{
    load_dataset, save_dataset, synth_lag_dataset, synth_null_dataset, DataFormat, Dataset,
};
use frlsc::model_io::{load_model, model_from_json, model_to_json, save_model};
use frlsc::scalar_kernel::{distance_matrix, median_distance, ScalarKernelParams};
use frlsc::solver::{RegularizationConfig, SpectralDiagnostics};
use frlsc::verify::{run_verify, CheckResult, VerifyConfig};
use frlsc::Error;

use crate::config::{data_format, ModelChoices, Problems, Settings};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl CliError {
    pub fn config(problems: Vec<String>) -> Self {
        let mut message = String::from("configuration error:");
        for p in problems {
            write!(message, "\n  {p}").unwrap();
        }
        Self { code: 2, message }
    }

    /// Maps a library error onto an exit code, naming the failing module.
    fn from_lib(module: &str, e: Error) -> Self {
        let code = match e {
            Error::Argument(_) => 2,
            Error::Numeric(_) => 4,
            Error::Structural(_)
            | Error::Data(_)
            | Error::Format(_)
            | Error::Io(_)
            | Error::Json(_) => 3,
        };
        Self {
            code,
            message: format!("error in {module}: {e}"),
        }
    }

    fn verify_failed(report: &str) -> Self {
        Self {
            code: 5,
            message: format!("verify: at least one check exceeded its bound\n{report}"),
        }
    }
}

fn lib(module: &'static str) -> impl Fn(Error) -> CliError {
    move |e| CliError::from_lib(module, e)
}

pub struct Context {
    verb: &'static str,
    settings: Settings,
    config_path: Option<PathBuf>,
}

impl Context {
    pub fn new(verb: &'static str, settings: Settings, config_path: Option<PathBuf>) -> Self {
        Self {
            verb,
            settings,
            config_path,
        }
    }

    fn out_dir(&self) -> PathBuf {
        self.settings
            .out_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("."))
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let dir = self.out_dir();
        std::fs::create_dir_all(&dir).map_err(|e| CliError::from_lib("report", e.into()))?;
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::from_lib("report", e.into()))?;
        Ok(path)
    }

    /// Writes `<verb>_report.txt` and `<verb>_report.json` and echoes the text.
    fn report(&self, text: &str, mut body: Value) -> Result<(), CliError> {
        body["command"] = json!(self.verb);
        body["config_file"] = json!(self.config_path);
        body["settings"] = serde_json::to_value(&self.settings).expect("settings serialize");
        self.write(&format!("{}_report.txt", self.verb), text)?;
        let json = serde_json::to_string_pretty(&body).expect("report serializes");
        self.write(&format!("{}_report.json", self.verb), &json)?;
        print!("{text}");
        Ok(())
    }
}

fn load(path: &Path, format: DataFormat) -> Result<(Dataset, usize), CliError> {
    let loaded = load_dataset(path, format).map_err(lib("data"))?;
    if loaded.resampled > 0 {
        eprintln!(
            "warning: {} curves resampled to {} points",
            loaded.resampled,
            loaded.dataset.grid().len()
        );
    }
    Ok((loaded.dataset, loaded.resampled))
}

fn diagnostics_text(d: &SpectralDiagnostics) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "Gram eigenvalues: max {:.6e}  min {:.6e}  clamped {}",
        d.alpha_max, d.alpha_min, d.clamped
    )
    .unwrap();
    writeln!(out, "operator spectrum (k = {}):", d.delta.len()).unwrap();
    writeln!(out, "  {:>3}  {:>20}  {:>20}", "i", "mu", "delta").unwrap();
    for (i, delta) in d.delta.iter().enumerate() {
        let mu = d.mu.get(i).map_or("-".to_string(), |m| format!("{m:.15}"));
        writeln!(out, "  {:>3}  {:>20}  {:>20.15}", i + 1, mu, delta).unwrap();
    }
    writeln!(
        out,
        "discarded label energy ratio: {:.6e}",
        d.discarded_energy_ratio
    )
    .unwrap();
    writeln!(out, "tail bound delta_(k+1) / lambda: {:.6e}", d.tail_bound).unwrap();
    out
}

fn tuning_text(t: &TuningResult) -> String {
    format!(
        "search: median distance {:.6}, best validation accuracy {:.2}% over {} points\n",
        t.median_distance,
        100.0 * t.validation_accuracy,
        t.points.len()
    )
}

pub fn train(ctx: &mut Context) -> Result<(), CliError> {
    let s = ctx.settings.clone();
    let mut p = Problems::default();
    let choices = ModelChoices::from_settings(&s, &mut p);
    let data_path = p.require("data", &s.data).cloned();
    let format = data_path.as_deref().map(|d| data_format(&s, d, &mut p));
    p.finish().map_err(CliError::config)?;
    let (data_path, format) = (data_path.unwrap(), format.unwrap());
    let model_path = s
        .model
        .clone()
        .unwrap_or_else(|| ctx.out_dir().join("model.json"));

    let (data, resampled) = load(&data_path, format)?;
    let (sigma, lambda, tuning) = match s.lambda {
        Some(lambda) => {
            let sigma = match s.sigma {
                Some(sigma) => sigma,
                None => median_distance(
                    &distance_matrix(data.observations()).map_err(lib("scalar_kernel"))?,
                ),
            };
            (sigma, lambda, None)
        }
        None => {
            let t = tune_functional(
                &data,
                &choices.tuning,
                choices.kernel,
                choices.k,
                choices.scheme,
                choices.operator,
                choices.seed,
            )
            .map_err(lib("classifier"))?;
            (t.sigma, t.lambda, Some(t))
        }
    };
    let settings = FunctionalSettings {
        params: ScalarKernelParams::new(choices.kernel, sigma).map_err(lib("scalar_kernel"))?,
        config: RegularizationConfig::new(lambda, choices.k).map_err(lib("solver"))?,
        scheme: choices.scheme,
        operator: choices.operator,
    };
    let (model, diagnostics) =
        train_multiclass_with_diagnostics(&data, &settings).map_err(lib("solver"))?;
    let model = model.with_rule(choices.rule);
    let confusion = evaluate_model(&model, &data).map_err(lib("classifier"))?;
    save_model(&model, &model_path).map_err(lib("model_io"))?;

    let mut text = String::new();
    writeln!(
        text,
        "trained {} classes on {} observations (p = {}, m = {}), seed {}",
        data.n_classes(),
        data.len(),
        data.p(),
        data.grid().len(),
        choices.seed
    )
    .unwrap();
    writeln!(
        text,
        "sigma = {sigma}  lambda = {lambda}  k = {}",
        choices.k
    )
    .unwrap();
    if let Some(t) = &tuning {
        text.push_str(&tuning_text(t));
    }
    text.push_str(&diagnostics_text(&diagnostics));
    writeln!(
        text,
        "training accuracy: {:.2}%",
        100.0 * confusion.accuracy()
    )
    .unwrap();
    writeln!(text, "model written to {}", model_path.display()).unwrap();
    ctx.report(
        &text,
        json!({
            "seed": choices.seed,
            "data": data_path,
            "resampled_curves": resampled,
            "n": data.len(),
            "p": data.p(),
            "m": data.grid().len(),
            "classes": data.class_names(),
            "sigma": sigma,
            "lambda": lambda,
            "k": choices.k,
            "tuning": tuning,
            "diagnostics": diagnostics,
            "training_accuracy": confusion.accuracy(),
            "model": model_path,
        }),
    )
}

#[derive(Serialize)]
struct Prediction<'a> {
    id: &'a str,
    class: &'a str,
    scores: Vec<f64>,
}

fn model_and_data(
    ctx: &Context,
) -> Result<(frlsc::classifier::MulticlassModel, Dataset, PathBuf), CliError> {
    let s = &ctx.settings;
    let mut p = Problems::default();
    let model_path = p.require("model", &s.model).cloned();
    let data_path = p.require("data", &s.data).cloned();
    let format = data_path.as_deref().map(|d| data_format(s, d, &mut p));
    p.finish().map_err(CliError::config)?;
    let model = load_model(&model_path.unwrap()).map_err(lib("model_io"))?;
    let (data, _) = load(data_path.as_deref().unwrap(), format.unwrap())?;
    Ok((model, data, data_path.unwrap()))
}

pub fn predict(ctx: &mut Context) -> Result<(), CliError> {
    let (model, data, data_path) = model_and_data(ctx)?;
    let results = classify_all(&model, data.observations()).map_err(lib("classifier"))?;
    let names = model.class_names();
    let predictions: Vec<Prediction> = data
        .ids()
        .iter()
        .zip(&results)
        .map(|(id, (c, scores))| Prediction {
            id,
            class: &names[*c],
            scores: scores.clone(),
        })
        .collect();
    let id_w = data.ids().iter().map(String::len).max().unwrap_or(2).max(2);
    let class_w = names.iter().map(String::len).max().unwrap_or(5).max(9);
    let mut text = String::new();
    write!(text, "{:<id_w$}  {:<class_w$}", "id", "predicted").unwrap();
    for n in names {
        write!(text, "  {n:>12}").unwrap();
    }
    text.push('\n');
    for p in &predictions {
        write!(text, "{:<id_w$}  {:<class_w$}", p.id, p.class).unwrap();
        for s in &p.scores {
            write!(text, "  {s:>12.6}").unwrap();
        }
        text.push('\n');
    }
    ctx.report(
        &text,
        json!({ "data": data_path, "classes": names, "predictions": predictions }),
    )
}

/// Relabels `data` with the model's class order.
fn align_classes(data: &Dataset, names: &[String]) -> Result<Dataset, CliError> {
    let labels = data
        .labels()
        .iter()
        .zip(data.ids())
        .map(|(&l, id)| {
            let name = &data.class_names()[l];
            names.iter().position(|n| n == name).ok_or_else(|| {
                CliError::from_lib(
                    "data",
                    Error::Data(format!(
                        "observation '{id}' has class '{name}', unknown to the model"
                    )),
                )
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Dataset::new(
        data.observations().to_vec(),
        labels,
        names.to_vec(),
        data.ids().to_vec(),
    )
    .map_err(lib("data"))
}

pub fn evaluate(ctx: &mut Context) -> Result<(), CliError> {
    let (model, data, data_path) = model_and_data(ctx)?;
    let data = align_classes(&data, model.class_names())?;
    let confusion = evaluate_model(&model, &data).map_err(lib("classifier"))?;
    let csv = ctx.write("evaluate_confusion.csv", &confusion.to_csv())?;
    let mut text = confusion.to_table("functional RLSC");
    writeln!(text, "confusion counts written to {}", csv.display()).unwrap();
    ctx.report(
        &text,
        json!({ "data": data_path, "accuracy": confusion.accuracy(), "confusion": confusion }),
    )
}

fn synth_dataset(s: &Settings, p: &mut Problems) -> Option<(Dataset, Value)> {
    let kind = s.synth.clone().unwrap_or_else(|| "lag".into());
    if kind != "lag" && kind != "null" {
        p.push(
            "synth",
            format!("unknown kind '{kind}' (expected lag or null)"),
        );
    }
    p.at_least("n_per_class", s.n_per_class, 1);
    p.at_least("classes", s.classes, 1);
    p.at_least("p", s.p, 1);
    p.at_least("m", s.m, 2);
    if let Some(sd) = s.noise_sd {
        if !(sd >= 0.0 && sd.is_finite()) {
            p.push("noise_sd", format!("must be non-negative, got {sd}"));
        }
    }
    let (n, c, ch, m, sd, seed) = (
        s.n_per_class.unwrap_or(60),
        s.classes.unwrap_or(4),
        s.p.unwrap_or(3),
        s.m.unwrap_or(64),
        s.noise_sd.unwrap_or(1.0),
        s.seed.unwrap_or(0),
    );
    let gen = if kind == "null" {
        synth_null_dataset
    } else {
        synth_lag_dataset
    };
    let data = gen(n, c, ch, m, sd, seed).ok()?;
    let meta = json!({ "kind": kind, "n_per_class": n, "classes": c, "p": ch, "m": m, "noise_sd": sd, "seed": seed });
    Some((data, meta))
}

pub fn benchmark(ctx: &mut Context) -> Result<(), CliError> {
    let s = ctx.settings.clone();
    let mut p = Problems::default();
    let choices = ModelChoices::from_settings(&s, &mut p);
    p.fraction("train_fraction", s.train_fraction);
    let source = match &s.data {
        Some(path) => {
            let format = data_format(&s, path, &mut p);
            p.finish().map_err(CliError::config)?;
            let (data, _) = load(path, format)?;
            (data, json!({ "file": path }))
        }
        None => {
            let generated = synth_dataset(&s, &mut p);
            p.finish().map_err(CliError::config)?;
            let (data, meta) = generated.expect("validated synth settings");
            (data, json!({ "synthetic": meta }))
        }
    };
    let (data, origin) = source;
    let mut tuning = choices.tuning.clone();
    if let Some(l) = s.lambda {
        tuning.lambdas = vec![l];
    }
    let config = BenchmarkConfig {
        train_fraction: s
            .train_fraction
            .unwrap_or(BenchmarkConfig::default().train_fraction),
        seed: choices.seed,
        tuning,
        kernel: choices.kernel,
        k: choices.k,
        scheme: choices.scheme,
        operator: choices.operator,
    };
    let report = run_benchmark(&data, &config).map_err(lib("benchmark"))?;
    ctx.write(
        "benchmark_functional.csv",
        &report.functional.confusion.to_csv(),
    )?;
    ctx.write(
        "benchmark_baseline.csv",
        &report.baseline.confusion.to_csv(),
    )?;
    let mut body = serde_json::to_value(&report).expect("report serializes");
    body["data"] = origin;
    body["benchmark_config"] = serde_json::to_value(&config).expect("config serializes");
    ctx.report(&report.to_text(), body)
}

pub fn verify(ctx: &mut Context) -> Result<(), CliError> {
    let s = ctx.settings.clone();
    let d = VerifyConfig::default();
    let mut p = Problems::default();
    for (field, v) in [
        ("n", s.n),
        ("p", s.p),
        ("k", s.k),
        ("instances", s.instances),
        ("spectral_pairs", s.spectral_pairs),
    ] {
        p.at_least(field, v, 1);
    }
    p.at_least("m", s.m, 2);
    p.at_least("spectral_m", s.spectral_m, 2);
    p.positive("lambda", s.lambda);
    p.finish().map_err(CliError::config)?;
    let cfg = VerifyConfig {
        n: s.n.unwrap_or(d.n),
        m: s.m.unwrap_or(d.m),
        p: s.p.unwrap_or(d.p),
        k: s.k.unwrap_or(d.k),
        lambda: s.lambda.unwrap_or(d.lambda),
        instances: s.instances.unwrap_or(d.instances),
        seed: s.seed.unwrap_or(d.seed),
        spectral_m: s.spectral_m.unwrap_or(d.spectral_m),
        spectral_pairs: s.spectral_pairs.unwrap_or(d.spectral_pairs),
    };
    let round_trip = match &s.model {
        Some(path) => {
            let model = load_model(path).map_err(lib("model_io"))?;
            let text = model_to_json(&model).map_err(lib("model_io"))?;
            let again = model_to_json(&model_from_json(&text).map_err(lib("model_io"))?)
                .map_err(lib("model_io"))?;
            Some(again == text)
        }
        None => None,
    };
    let mut report = run_verify(&cfg).map_err(lib("verify"))?;
    if let Some(same) = round_trip {
        report.checks.push(CheckResult {
            name: "model file round-trip (mismatch)".into(),
            measured: if same { 0.0 } else { 1.0 },
            bound: 0.0,
            passed: same,
        });
    }
    let text = report.to_text();
    ctx.report(
        &text,
        json!({ "verify_config": cfg, "checks": report.checks, "passed": report.passed() }),
    )?;
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::verify_failed(&text))
    }
}

pub fn synth(ctx: &mut Context) -> Result<(), CliError> {
    let s = ctx.settings.clone();
    let mut p = Problems::default();
    let output = s
        .output
        .clone()
        .unwrap_or_else(|| ctx.out_dir().join("synth.csv"));
    let format = data_format(&s, &output, &mut p);
    let generated = synth_dataset(&s, &mut p);
    p.finish().map_err(CliError::config)?;
    let (data, meta) = generated.expect("validated synth settings");
    save_dataset(&data, &output, format).map_err(lib("data"))?;
    let text = format!(
        "wrote {} observations ({} classes, p = {}, m = {}) to {}\n",
        data.len(),
        data.n_classes(),
        data.p(),
        data.grid().len(),
        output.display()
    );
    ctx.report(&text, json!({ "output": output, "synthetic": meta }))
}
