//! Labeled functional datasets: file formats, synthetic generators, splits.
//!
//! # File formats (`frlsc-data/1`)
//!
//! CSV, one row per (observation, channel):
//!
//! ```text
//! # frlsc-data/1
//! # classes: ["gunshot","scream"]
//! id,class,channel,v0,v1,v2,v3
//! s01,gunshot,0,0.1,0.2,0.3,0.4
//! s01,gunshot,1,1.0,0.9,0.8,0.7
//! ```
//!
//! The `classes` comment is optional and fixes the class order; without it
//! classes are sorted (numerically when every name is an integer). Values
//! are samples on a uniform grid over `[0,1]`; rows whose length differs
//! from the most common length are linearly resampled to it.
//!
//! JSON mirrors the same content:
//!
//! ```text
//! {"format":"frlsc-data/1","classes":[..],"m":4,
//!  "observations":[{"id":"s01","class":"gunshot","channels":[[..],[..]]}]}
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{argument, structural, Error, Result};
use crate::function_space::{resample_linear, FunctionalObservation, Grid, SampledFunction};

pub const DATA_FORMAT_TAG: &str = "frlsc-data/1";

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    grid: Grid,
    observations: Vec<FunctionalObservation>,
    labels: Vec<usize>,
    class_names: Vec<String>,
    ids: Vec<String>,
}

impl Dataset {
    pub fn new(
        observations: Vec<FunctionalObservation>,
        labels: Vec<usize>,
        class_names: Vec<String>,
        ids: Vec<String>,
    ) -> Result<Self> {
        let first = observations
            .first()
            .ok_or_else(|| Error::Data("dataset has no observations".into()))?;
        let (grid, p) = (first.grid(), first.p());
        if let Some(i) = observations
            .iter()
            .position(|o| o.grid() != grid || o.p() != p)
        {
            return Err(structural(format!(
                "observation {i} does not share the grid ({} points) and channel count ({p})",
                grid.len()
            )));
        }
        if labels.len() != observations.len() || ids.len() != observations.len() {
            return Err(structural(format!(
                "{} observations, {} labels, {} ids",
                observations.len(),
                labels.len(),
                ids.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(structural(format!(
                "label {bad} out of range for {} classes",
                class_names.len()
            )));
        }
        Ok(Self {
            grid,
            observations,
            labels,
            class_names,
            ids,
        })
    }

    /// Dataset with class names `"0".."N-1"` and ids `"obs<i>"`.
    pub fn with_default_names(
        observations: Vec<FunctionalObservation>,
        labels: Vec<usize>,
        n_classes: usize,
    ) -> Result<Self> {
        let ids = (0..observations.len()).map(|i| format!("obs{i}")).collect();
        let names = (0..n_classes).map(|c| c.to_string()).collect();
        Self::new(observations, labels, names, ids)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn p(&self) -> usize {
        self.observations[0].p()
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &[FunctionalObservation] {
        &self.observations
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Observations at `indices`, in that order; class names are kept.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        Dataset::new(
            indices
                .iter()
                .map(|&i| self.observations[i].clone())
                .collect(),
            indices.iter().map(|&i| self.labels[i]).collect(),
            self.class_names.clone(),
            indices.iter().map(|&i| self.ids[i].clone()).collect(),
        )
    }

    /// Applies one permutation of the time indices to every curve.
    pub fn permute_time(&self, perm: &[usize]) -> Result<Dataset> {
        let m = self.grid.len();
        let mut seen = vec![false; m];
        if perm.len() != m
            || perm
                .iter()
                .any(|&i| i >= m || std::mem::replace(&mut seen[i], true))
        {
            return Err(argument(format!("not a permutation of {m} time indices")));
        }
        let observations = self
            .observations
            .iter()
            .map(|o| {
                FunctionalObservation::new(
                    o.channels()
                        .iter()
                        .map(|c| {
                            let v = c.values();
                            SampledFunction::from_raw(
                                self.grid,
                                perm.iter().map(|&i| v[i]).collect(),
                            )
                        })
                        .collect(),
                )
            })
            .collect::<Result<_>>()?;
        Dataset::new(
            observations,
            self.labels.clone(),
            self.class_names.clone(),
            self.ids.clone(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Csv,
    Json,
}

impl DataFormat {
    /// Guess from the file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Self::Json,
            _ => Self::Csv,
        }
    }
}

impl std::str::FromStr for DataFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(format!(
                "unknown data format '{other}' (expected csv or json)"
            )),
        }
    }
}

/// A loaded dataset plus the number of curves that had to be resampled.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub resampled: usize,
}

pub fn load_dataset(path: &Path, format: DataFormat) -> Result<LoadedDataset> {
    let text = std::fs::read_to_string(path)?;
    match format {
        DataFormat::Csv => parse_csv(&text),
        DataFormat::Json => parse_json(&text),
    }
}

pub fn save_dataset(data: &Dataset, path: &Path, format: DataFormat) -> Result<()> {
    let text = match format {
        DataFormat::Csv => to_csv(data),
        DataFormat::Json => to_json(data)?,
    };
    std::fs::write(path, text)?;
    Ok(())
}

/// Raw observation before grid alignment.
struct RawObservation {
    id: String,
    class: String,
    line: u64,
    channels: BTreeMap<usize, (u64, Vec<f64>)>,
}

fn data_err(msg: String) -> Error {
    Error::Data(msg)
}

fn modal_length<'a>(lengths: impl Iterator<Item = &'a Vec<f64>>) -> usize {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for v in lengths {
        *counts.entry(v.len()).or_default() += 1;
    }
    // most common length, ties broken toward the finer grid
    counts
        .into_iter()
        .max_by_key(|&(len, count)| (count, len))
        .map(|(len, _)| len)
        .unwrap_or(0)
}

fn order_classes(seen: &[String], declared: Option<Vec<String>>) -> Vec<String> {
    if let Some(names) = declared {
        return names;
    }
    let mut names: Vec<String> = seen.to_vec();
    names.sort();
    names.dedup();
    if names.iter().all(|n| n.parse::<i64>().is_ok()) {
        names.sort_by_key(|n| n.parse::<i64>().unwrap());
    }
    names
}

fn assemble(raw: Vec<RawObservation>, declared: Option<Vec<String>>) -> Result<LoadedDataset> {
    if raw.is_empty() {
        return Err(data_err("no observations found".into()));
    }
    let m = modal_length(raw.iter().flat_map(|o| o.channels.values().map(|(_, v)| v)));
    let grid =
        Grid::new(m).map_err(|_| data_err(format!("curves need at least 2 samples, got {m}")))?;

    let seen: Vec<String> = raw.iter().map(|o| o.class.clone()).collect();
    let class_names = order_classes(&seen, declared);
    let index: HashMap<&str, usize> = class_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();

    let p = raw[0].channels.len();
    let mut resampled = 0;
    let mut observations = Vec::with_capacity(raw.len());
    let mut labels = Vec::with_capacity(raw.len());
    let mut ids = Vec::with_capacity(raw.len());
    for obs in raw {
        if obs.channels.len() != p {
            return Err(data_err(format!(
                "observation '{}' (line {}) has {} channels, expected {p}",
                obs.id,
                obs.line,
                obs.channels.len()
            )));
        }
        let label = *index.get(obs.class.as_str()).ok_or_else(|| {
            data_err(format!(
                "unknown class '{}' for observation '{}' (line {})",
                obs.class, obs.id, obs.line
            ))
        })?;
        let mut chans = Vec::with_capacity(p);
        for (expected, (ch, (line, values))) in obs.channels.into_iter().enumerate() {
            if ch != expected {
                return Err(data_err(format!(
                    "observation '{}' is missing channel {expected} (line {line})",
                    obs.id
                )));
            }
            let values = if values.len() == m {
                values
            } else {
                resampled += 1;
                resample_linear(&values, m)
                    .map_err(|e| data_err(format!("line {line}: cannot resample: {e}")))?
            };
            chans.push(
                SampledFunction::new(grid, values)
                    .map_err(|e| data_err(format!("line {line}: {e}")))?,
            );
        }
        observations.push(FunctionalObservation::new(chans)?);
        labels.push(label);
        ids.push(obs.id);
    }
    Ok(LoadedDataset {
        dataset: Dataset::new(observations, labels, class_names, ids)?,
        resampled,
    })
}

fn check_version_and_classes(text: &str) -> Result<Option<Vec<String>>> {
    let mut declared = None;
    for line in text.lines().map(str::trim).filter(|l| l.starts_with('#')) {
        let body = line.trim_start_matches('#').trim();
        if let Some(tag) = body.strip_prefix("frlsc-data/") {
            if tag != "1" {
                return Err(Error::Format(format!(
                    "unsupported data format version 'frlsc-data/{tag}'"
                )));
            }
        } else if let Some(list) = body.strip_prefix("classes:") {
            let names: Vec<String> = serde_json::from_str(list.trim())
                .map_err(|e| Error::Format(format!("bad classes comment: {e}")))?;
            declared = Some(names);
        }
    }
    Ok(declared)
}

pub fn parse_csv(text: &str) -> Result<LoadedDataset> {
    if text.trim().is_empty() {
        return Err(data_err("empty data file".into()));
    }
    let declared = check_version_and_classes(text)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| data_err(format!("cannot read header: {e}")))?
        .clone();
    let names: Vec<String> = headers
        .iter()
        .take(3)
        .map(str::to_ascii_lowercase)
        .collect();
    if names != ["id", "class", "channel"] {
        return Err(data_err(format!(
            "header must start with id,class,channel; found '{}'",
            headers.iter().take(3).collect::<Vec<_>>().join(",")
        )));
    }

    let mut raw: Vec<RawObservation> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| data_err(format!("CSV parse error: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() < 5 {
            return Err(data_err(format!(
                "line {line}: expected id, class, channel and at least 2 values"
            )));
        }
        let id = record[0].to_string();
        let class = record[1].to_string();
        let channel: usize = record[2]
            .parse()
            .map_err(|_| data_err(format!("line {line}: bad channel index '{}'", &record[2])))?;
        let values = record
            .iter()
            .skip(3)
            .enumerate()
            .map(|(c, v)| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| data_err(format!("line {line}, value {c}: cannot parse '{v}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        let slot = *by_id.entry(id.clone()).or_insert_with(|| {
            raw.push(RawObservation {
                id: id.clone(),
                class: class.clone(),
                line,
                channels: BTreeMap::new(),
            });
            raw.len() - 1
        });
        let obs = &mut raw[slot];
        if obs.class != class {
            return Err(data_err(format!(
                "line {line}: observation '{id}' has class '{class}', earlier rows say '{}'",
                obs.class
            )));
        }
        if obs.channels.insert(channel, (line, values)).is_some() {
            return Err(data_err(format!(
                "line {line}: duplicate channel {channel} for '{id}'"
            )));
        }
    }
    assemble(raw, declared)
}

pub fn to_csv(data: &Dataset) -> String {
    let mut out = String::new();
    writeln!(out, "# {DATA_FORMAT_TAG}").unwrap();
    writeln!(
        out,
        "# classes: {}",
        serde_json::to_string(data.class_names()).expect("strings serialize")
    )
    .unwrap();
    out.push_str("id,class,channel");
    for a in 0..data.grid().len() {
        write!(out, ",v{a}").unwrap();
    }
    out.push('\n');
    for ((obs, &label), id) in data
        .observations()
        .iter()
        .zip(data.labels())
        .zip(data.ids())
    {
        for (c, ch) in obs.channels().iter().enumerate() {
            write!(
                out,
                "{},{},{c}",
                csv_field(id),
                csv_field(&data.class_names()[label])
            )
            .unwrap();
            for v in ch.values() {
                // 17 significant digits
                write!(out, ",{v:.16e}").unwrap();
            }
            out.push('\n');
        }
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) || s.starts_with('#') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Serialize, Deserialize)]
struct JsonDataset {
    format: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    classes: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    observations: Vec<JsonObservation>,
}

#[derive(Serialize, Deserialize)]
struct JsonObservation {
    id: String,
    class: String,
    channels: Vec<Vec<f64>>,
}

pub fn parse_json(text: &str) -> Result<LoadedDataset> {
    if text.trim().is_empty() {
        return Err(data_err("empty data file".into()));
    }
    let doc: JsonDataset =
        serde_json::from_str(text).map_err(|e| data_err(format!("JSON parse error: {e}")))?;
    if doc.format != DATA_FORMAT_TAG {
        return Err(Error::Format(format!(
            "expected format '{DATA_FORMAT_TAG}', found '{}'",
            doc.format
        )));
    }
    let raw = doc
        .observations
        .into_iter()
        .enumerate()
        .map(|(i, o)| RawObservation {
            id: o.id,
            class: o.class,
            line: i as u64,
            channels: o
                .channels
                .into_iter()
                .enumerate()
                .map(|(c, v)| (c, (i as u64, v)))
                .collect(),
        })
        .collect();
    assemble(raw, doc.classes)
}

pub fn to_json(data: &Dataset) -> Result<String> {
    let doc = JsonDataset {
        format: DATA_FORMAT_TAG.into(),
        classes: Some(data.class_names().to_vec()),
        m: Some(data.grid().len()),
        observations: data
            .observations()
            .iter()
            .zip(data.labels())
            .zip(data.ids())
            .map(|((o, &l), id)| JsonObservation {
                id: id.clone(),
                class: data.class_names()[l].clone(),
                channels: o.channels().iter().map(|c| c.values().to_vec()).collect(),
            })
            .collect(),
    };
    Ok(serde_json::to_string(&doc)?)
}

fn check_counts(
    n_per_class: usize,
    n_classes: usize,
    p: usize,
    m: usize,
    noise_sd: f64,
) -> Result<()> {
    if n_per_class == 0 || n_classes == 0 || p == 0 {
        return Err(argument(
            "class size, class count and channel count must be positive",
        ));
    }
    if m < 2 {
        return Err(argument(format!(
            "need at least 2 samples per curve, got {m}"
        )));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(argument(format!(
            "noise_sd must be non-negative, got {noise_sd}"
        )));
    }
    Ok(())
}

/// Harmonic amplitudes and phases of the lag template (unit RMS after scaling).
const TEMPLATE: [(f64, f64); 3] = [(1.0, 0.0), (0.6, 1.1), (0.35, 2.3)];

/// The periodic template curve `s(u)` shared by every class.
pub fn lag_template(u: f64) -> f64 {
    let rms = (TEMPLATE.iter().map(|(a, _)| a * a).sum::<f64>() / 2.0).sqrt();
    TEMPLATE
        .iter()
        .enumerate()
        .map(|(q, (a, psi))| a * (std::f64::consts::TAU * (q + 1) as f64 * u + psi).sin())
        .sum::<f64>()
        / rms
}

/// Lag between consecutive channels for class `c` of `n_classes`.
pub fn class_lag(c: usize, n_classes: usize) -> f64 {
    c as f64 / (2 * n_classes) as f64
}

/// Curves whose classes differ only in the lag between channels.
///
/// Channel `j` of an observation in class `c` is `s(t + φ − j·lag_c)` plus
/// i.i.d. Gaussian noise, with `s` the 1-periodic [`lag_template`] and
/// `φ ~ U[0,1)` drawn per observation. Every channel at every time point
/// therefore has the same marginal distribution in every class.
pub fn synth_lag_dataset(
    n_per_class: usize,
    n_classes: usize,
    p: usize,
    m: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<Dataset> {
    check_counts(n_per_class, n_classes, p, m, noise_sd)?;
    let grid = Grid::new(m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sd).map_err(|e| argument(e.to_string()))?;
    let mut observations = Vec::with_capacity(n_per_class * n_classes);
    let mut labels = Vec::with_capacity(n_per_class * n_classes);
    for c in 0..n_classes {
        let lag = class_lag(c, n_classes);
        for _ in 0..n_per_class {
            let phase: f64 = rng.random_range(0.0..1.0);
            let chans = (0..p)
                .map(|j| {
                    let values = grid
                        .points()
                        .iter()
                        .map(|&t| lag_template(t + phase - j as f64 * lag) + noise.sample(&mut rng))
                        .collect();
                    SampledFunction::new(grid, values)
                })
                .collect::<Result<Vec<_>>>()?;
            observations.push(FunctionalObservation::new(chans)?);
            labels.push(c);
        }
    }
    Dataset::with_default_names(observations, labels, n_classes)
}

/// Channel means of the null-control classes.
pub fn null_class_mean(c: usize, j: usize, n_classes: usize, p: usize) -> f64 {
    const OFFSET: f64 = 0.25;
    let angle = std::f64::consts::TAU * (c as f64 / n_classes as f64 + j as f64 / (2 * p) as f64);
    OFFSET * angle.cos()
}

/// Control data without temporal structure: every sample is independent
/// `N(μ_{c,j}, noise_sd²)` with a class- and channel-specific mean.
pub fn synth_null_dataset(
    n_per_class: usize,
    n_classes: usize,
    p: usize,
    m: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<Dataset> {
    check_counts(n_per_class, n_classes, p, m, noise_sd)?;
    let grid = Grid::new(m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sd).map_err(|e| argument(e.to_string()))?;
    let mut observations = Vec::new();
    let mut labels = Vec::new();
    for c in 0..n_classes {
        for _ in 0..n_per_class {
            let chans = (0..p)
                .map(|j| {
                    let mean = null_class_mean(c, j, n_classes, p);
                    let values = (0..m).map(|_| mean + noise.sample(&mut rng)).collect();
                    SampledFunction::new(grid, values)
                })
                .collect::<Result<Vec<_>>>()?;
            observations.push(FunctionalObservation::new(chans)?);
            labels.push(c);
        }
    }
    Dataset::with_default_names(observations, labels, n_classes)
}

/// Stratified train/test split.
///
/// Each class with `n_c` items contributes `round(fraction · n_c)` items to
/// the training side, clamped so both sides get at least one.
pub fn split(data: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(data.labels(), data.n_classes(), train_fraction, seed)?;
    Ok((data.subset(&train)?, data.subset(&test)?))
}

pub fn split_indices(
    labels: &[usize],
    n_classes: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(argument(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, mut members) in by_class.into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            return Err(argument(format!(
                "class {c} has a single item and cannot be split"
            )));
        }
        members.shuffle(&mut rng);
        let n = members.len();
        let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}
