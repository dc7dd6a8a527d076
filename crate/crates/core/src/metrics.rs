//! Confusion matrices and recognition rates.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{argument, Result};

/// Counts with rows = predicted class and columns = true class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    class_names: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(class_names: Vec<String>) -> Self {
        let n = class_names.len();
        Self {
            class_names,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn from_pairs(
        class_names: Vec<String>,
        predicted: &[usize],
        truth: &[usize],
    ) -> Result<Self> {
        if predicted.len() != truth.len() {
            return Err(argument(format!(
                "{} predictions for {} true labels",
                predicted.len(),
                truth.len()
            )));
        }
        let mut cm = Self::new(class_names);
        for (&p, &t) in predicted.iter().zip(truth) {
            cm.record(p, t)?;
        }
        Ok(cm)
    }

    pub fn record(&mut self, predicted: usize, truth: usize) -> Result<()> {
        let n = self.n_classes();
        if predicted >= n || truth >= n {
            return Err(argument(format!(
                "class index out of range for {n} classes"
            )));
        }
        self.counts[predicted][truth] += 1;
        Ok(())
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn count(&self, predicted: usize, truth: usize) -> u64 {
        self.counts[predicted][truth]
    }

    /// Test items per true class.
    pub fn column_totals(&self) -> Vec<u64> {
        (0..self.n_classes())
            .map(|t| self.counts.iter().map(|row| row[t]).sum())
            .collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.n_classes()).map(|c| self.counts[c][c]).sum()
    }

    /// `W_r / T_n`; zero for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.correct() as f64 / n as f64,
        }
    }

    /// Percentage of true-class `truth` items predicted as `predicted`.
    pub fn column_percent(&self, predicted: usize, truth: usize) -> f64 {
        match self.column_totals()[truth] {
            0 => 0.0,
            n => 100.0 * self.counts[predicted][truth] as f64 / n as f64,
        }
    }

    /// Raw counts, header row of true classes, first column the predicted class.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("predicted\\true");
        for name in &self.class_names {
            write!(out, ",{name}").unwrap();
        }
        out.push('\n');
        for (name, row) in self.class_names.iter().zip(&self.counts) {
            out.push_str(name);
            for c in row {
                write!(out, ",{c}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Column percentages laid out like a published confusion table.
    pub fn to_table(&self, title: &str) -> String {
        let cells: Vec<Vec<String>> = (0..self.n_classes())
            .map(|p| {
                (0..self.n_classes())
                    .map(|t| format_percent(self.column_percent(p, t)))
                    .collect()
            })
            .collect();
        let width = self
            .class_names
            .iter()
            .map(String::len)
            .chain(cells.iter().flatten().map(String::len))
            .max()
            .unwrap_or(1)
            .max(5);
        let mut out = String::new();
        writeln!(out, "{title}").unwrap();
        write!(out, "{:>width$}", "").unwrap();
        for name in &self.class_names {
            write!(out, " {name:>width$}").unwrap();
        }
        out.push('\n');
        for (name, row) in self.class_names.iter().zip(&cells) {
            write!(out, "{name:>width$}").unwrap();
            for cell in row {
                write!(out, " {cell:>width$}").unwrap();
            }
            out.push('\n');
        }
        write!(out, "{:>width$}", "n").unwrap();
        for n in self.column_totals() {
            write!(out, " {n:>width$}").unwrap();
        }
        out.push('\n');
        writeln!(
            out,
            "Total Recognition Rate = {:.2}%",
            100.0 * self.accuracy()
        )
        .unwrap();
        out
    }
}

fn format_percent(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v == 100.0 {
        "100".into()
    } else {
        format!("{v:.2}")
    }
}
