//! The `frlsc-model/1` file format.
//!
//! A JSON document holding everything needed to predict without the
//! training data file: the grid size, kernel parameters, `λ`, the operator
//! spectrum, the training inputs and one set of coefficient functions per
//! class. Floats are written in shortest round-trip form, so saving and
//! loading is lossless. On load the eigenfunctions are rebuilt from the
//! stored roots after checking them against a fresh root solve.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::classifier::{DecisionRule, LabelScheme, MulticlassModel};
use crate::error::{Error, Result};
use crate::function_space::{FunctionalObservation, Grid, SampledFunction};
use crate::integral_operator::{find_mu_roots, OperatorEigen, OperatorKind};
use crate::scalar_kernel::ScalarKernelParams;
use crate::solver::TrainedModel;

pub const MODEL_FORMAT_TAG: &str = "frlsc-model/1";

#[derive(Debug, Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    grid_points: usize,
    kernel: ScalarKernelParams,
    lambda: f64,
    k: usize,
    operator: OperatorDocument,
    scheme: LabelScheme,
    rule: DecisionRule,
    classes: Vec<String>,
    /// `inputs[i][channel][a]`
    inputs: Vec<Vec<Vec<f64>>>,
    /// `beta[class][i][a]`
    beta: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct OperatorDocument {
    kind: OperatorKind,
    mu: Vec<f64>,
    delta: Vec<f64>,
    /// Root after the last retained one; fixes the tail bound.
    next_mu: Option<f64>,
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

pub fn model_to_json(model: &MulticlassModel) -> Result<String> {
    let op = model.operator();
    let mu = op.mu().to_vec();
    let next_mu = match op.kind() {
        OperatorKind::Exponential => Some(find_mu_roots(mu.len() + 1)?[mu.len()]),
        OperatorKind::Identity => None,
    };
    let doc = ModelDocument {
        format: MODEL_FORMAT_TAG.into(),
        grid_points: model.grid().len(),
        kernel: *model.params(),
        lambda: model.lambda(),
        k: op.k(),
        operator: OperatorDocument {
            kind: op.kind(),
            mu,
            delta: op.delta().to_vec(),
            next_mu,
        },
        scheme: *model.scheme(),
        rule: model.rule(),
        classes: model.class_names().to_vec(),
        inputs: model
            .inputs()
            .iter()
            .map(|x| x.channels().iter().map(|c| c.values().to_vec()).collect())
            .collect(),
        beta: model
            .per_class()
            .iter()
            .map(|m| m.beta().iter().map(|b| b.values().to_vec()).collect())
            .collect(),
    };
    Ok(serde_json::to_string(&doc)?)
}

fn rebuild_operator(doc: &OperatorDocument, k: usize, grid: Grid) -> Result<OperatorEigen> {
    match doc.kind {
        OperatorKind::Identity => {
            if k != grid.len() || doc.delta.iter().any(|&d| d != 1.0) || doc.delta.len() != k {
                return Err(format_err(
                    "identity operator must have k = m unit eigenvalues",
                ));
            }
            Ok(OperatorEigen::identity(grid))
        }
        OperatorKind::Exponential => {
            if doc.mu.len() != k || doc.delta.len() != k || k == 0 {
                return Err(format_err(format!(
                    "operator table has {} roots and {} eigenvalues, expected k = {k}",
                    doc.mu.len(),
                    doc.delta.len()
                )));
            }
            let next_mu = doc.next_mu.ok_or_else(|| format_err("missing next_mu"))?;
            let expected = find_mu_roots(k + 1)?;
            for (i, (&stored, &fresh)) in doc.mu.iter().chain([&next_mu]).zip(&expected).enumerate()
            {
                if stored != fresh {
                    return Err(format_err(format!(
                        "stored root {} = {stored} differs from the solved root {fresh}",
                        i + 1
                    )));
                }
            }
            let op = OperatorEigen::from_roots(doc.mu.clone(), next_mu, grid);
            if op.delta() != doc.delta.as_slice() {
                return Err(format_err("stored eigenvalues do not match 2 / (1 + μ²)"));
            }
            Ok(op)
        }
    }
}

fn to_functions(grid: Grid, rows: &[Vec<f64>], what: &str) -> Result<Vec<SampledFunction>> {
    rows.iter()
        .map(|v| {
            SampledFunction::new(grid, v.clone()).map_err(|e| format_err(format!("{what}: {e}")))
        })
        .collect()
}

pub fn model_from_json(text: &str) -> Result<MulticlassModel> {
    let doc: ModelDocument =
        serde_json::from_str(text).map_err(|e| format_err(format!("not a model document: {e}")))?;
    if doc.format != MODEL_FORMAT_TAG {
        return Err(format_err(format!(
            "expected format '{MODEL_FORMAT_TAG}', found '{}'",
            doc.format
        )));
    }
    let grid = Grid::new(doc.grid_points).map_err(|e| format_err(e.to_string()))?;
    let params = ScalarKernelParams::new(doc.kernel.kind, doc.kernel.sigma)
        .map_err(|e| format_err(e.to_string()))?;
    doc.scheme
        .validate()
        .map_err(|e| format_err(e.to_string()))?;
    if !(doc.lambda > 0.0 && doc.lambda.is_finite()) {
        return Err(format_err(format!(
            "lambda must be positive, got {}",
            doc.lambda
        )));
    }
    let op = Arc::new(rebuild_operator(&doc.operator, doc.k, grid)?);

    if doc.inputs.is_empty() {
        return Err(format_err("model has no training inputs"));
    }
    let inputs = doc
        .inputs
        .iter()
        .enumerate()
        .map(|(i, chans)| {
            FunctionalObservation::new(to_functions(grid, chans, &format!("input {i}"))?)
                .map_err(|e| format_err(format!("input {i}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let p = inputs[0].p();
    if inputs.iter().any(|x| x.p() != p) {
        return Err(format_err("inputs have differing channel counts"));
    }
    let inputs = Arc::new(inputs);

    if doc.beta.len() != doc.classes.len() {
        return Err(format_err(format!(
            "{} coefficient sets for {} classes",
            doc.beta.len(),
            doc.classes.len()
        )));
    }
    let per_class = doc
        .beta
        .iter()
        .enumerate()
        .map(|(c, rows)| {
            let beta = to_functions(grid, rows, &format!("class {c} coefficients"))?;
            TrainedModel::new(inputs.clone(), beta, doc.lambda, params, op.clone())
                .map_err(|e| format_err(format!("class {c}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    MulticlassModel::new(doc.classes, per_class, doc.scheme, doc.rule)
        .map_err(|e| format_err(e.to_string()))
}

pub fn save_model(model: &MulticlassModel, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_json(model)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<MulticlassModel> {
    model_from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{classify, train_multiclass, FunctionalSettings};
    use crate::data::synth_lag_dataset;
    use crate::solver::RegularizationConfig;

    fn trained(kind: OperatorKind) -> (MulticlassModel, crate::data::Dataset) {
        let d = synth_lag_dataset(4, 3, 2, 12, 0.3, 1).unwrap();
        let s = FunctionalSettings {
            params: ScalarKernelParams::gaussian(1.1).unwrap(),
            config: RegularizationConfig::new(0.05, 5).unwrap(),
            scheme: LabelScheme::default(),
            operator: kind,
        };
        (train_multiclass(&d, &s).unwrap(), d)
    }

    fn assert_same(a: &MulticlassModel, b: &MulticlassModel) {
        assert_eq!(a.class_names(), b.class_names());
        assert_eq!(a.params(), b.params());
        assert_eq!(a.lambda(), b.lambda());
        assert_eq!(a.operator(), b.operator());
        assert_eq!(a.inputs(), b.inputs());
        assert_eq!(a.scheme(), b.scheme());
        assert_eq!(a.rule(), b.rule());
        for (x, y) in a.per_class().iter().zip(b.per_class()) {
            assert_eq!(x.beta(), y.beta());
        }
    }

    #[test]
    fn round_trip_is_lossless() {
        for kind in [OperatorKind::Exponential, OperatorKind::Identity] {
            let (model, d) = trained(kind);
            let text = model_to_json(&model).unwrap();
            let back = model_from_json(&text).unwrap();
            assert_same(&model, &back);
            assert_eq!(model_to_json(&back).unwrap(), text);
            for x in d.observations() {
                assert_eq!(classify(&model, x).unwrap(), classify(&back, x).unwrap());
            }
        }
    }

    #[test]
    fn file_round_trip() {
        let (model, _) = trained(OperatorKind::Exponential);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_model(&model, &path).unwrap();
        assert_same(&model, &load_model(&path).unwrap());
    }

    fn corrupt(edit: impl Fn(&mut serde_json::Value)) -> Result<MulticlassModel> {
        let (model, _) = trained(OperatorKind::Exponential);
        let mut v: serde_json::Value =
            serde_json::from_str(&model_to_json(&model).unwrap()).unwrap();
        edit(&mut v);
        model_from_json(&v.to_string())
    }

    #[test]
    fn corruption_is_a_format_error() {
        let cases: Vec<Box<dyn Fn(&mut serde_json::Value)>> = vec![
            Box::new(|v| v["format"] = "frlsc-model/0".into()),
            Box::new(|v| v["operator"]["mu"][2] = 3.0.into()),
            Box::new(|v| v["operator"]["delta"][0] = 0.5.into()),
            Box::new(|v| v["k"] = 7.into()),
            Box::new(|v| v["lambda"] = (-1.0).into()),
            Box::new(|v| v["kernel"]["sigma"] = 0.0.into()),
            Box::new(|v| v["beta"][1][0] = serde_json::json!([1.0, 2.0])),
            Box::new(|v| v["inputs"][0][1] = serde_json::json!([1.0])),
            Box::new(|v| {
                v["beta"].as_array_mut().unwrap().pop();
            }),
            Box::new(|v| {
                v.as_object_mut().unwrap().remove("scheme");
            }),
        ];
        for (i, edit) in cases.iter().enumerate() {
            match corrupt(edit) {
                Err(Error::Format(_)) => {}
                other => panic!("case {i}: expected format error, got {other:?}"),
            }
        }
        assert!(matches!(
            model_from_json("{not json"),
            Err(Error::Format(_))
        ));
        assert!(matches!(model_from_json(""), Err(Error::Format(_))));
    }
}
