//! Classification metrics, linear probes and result tables.
//!
//! Precision, recall and F1 are macro-averaged over classes with at least
//! one true sample. A class that is never predicted has precision 0.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::attr::{Attribute, PerAttribute, Role};
use crate::corpus::Sample;
use crate::error::{Error, Result};
use crate::fsutil;
use crate::model::{argmax, pooled_embedding, predict, ModelState};
use crate::tensor::{Graph, Tensor};

/// Epochs of full-batch gradient descent used to fit a probe.
pub const PROBE_EPOCHS: usize = 200;
pub const PROBE_LEARNING_RATE: f64 = 0.5;
/// Share of probe samples used for fitting; the rest is scored.
pub const PROBE_FIT_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    pub predicted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub num_samples: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassMetrics>,
    /// Row-normalized percentages; rows of zero-support classes are zero.
    pub confusion: Vec<Vec<f64>>,
    /// Classes without true samples, excluded from the macro averages.
    pub zero_support: Vec<usize>,
}

impl EvalReport {
    pub fn num_classes(&self) -> usize {
        self.per_class.len()
    }
}

pub fn evaluate(predictions: &[usize], labels: &[usize], num_classes: usize) -> Result<EvalReport> {
    if predictions.len() != labels.len() {
        return Err(Error::Data(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Data("cannot evaluate zero samples".into()));
    }
    if let Some(v) = predictions.iter().chain(labels).find(|&&v| v >= num_classes) {
        return Err(Error::Data(format!("class index {v} outside [0, {num_classes})")));
    }
    let mut counts = vec![vec![0usize; num_classes]; num_classes];
    for (&p, &l) in predictions.iter().zip(labels) {
        counts[l][p] += 1;
    }
    let mut per_class = Vec::with_capacity(num_classes);
    for c in 0..num_classes {
        let tp = counts[c][c] as f64;
        let support: usize = counts[c].iter().sum();
        let predicted: usize = counts.iter().map(|r| r[c]).sum();
        let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
        let recall = if support == 0 { 0.0 } else { tp / support as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_class.push(ClassMetrics {
            precision,
            recall,
            f1,
            support,
            predicted,
        });
    }
    let supported: Vec<&ClassMetrics> = per_class.iter().filter(|m| m.support > 0).collect();
    let macro_avg = |f: fn(&ClassMetrics) -> f64| {
        supported.iter().map(|m| f(m)).sum::<f64>() / supported.len() as f64
    };
    let confusion = counts
        .iter()
        .map(|row| {
            let support: usize = row.iter().sum();
            row.iter()
                .map(|&n| if support == 0 { 0.0 } else { 100.0 * n as f64 / support as f64 })
                .collect()
        })
        .collect();
    let correct = (0..num_classes).map(|c| counts[c][c]).sum::<usize>();
    Ok(EvalReport {
        num_samples: labels.len(),
        accuracy: correct as f64 / labels.len() as f64,
        precision: macro_avg(|m| m.precision),
        recall: macro_avg(|m| m.recall),
        f1: macro_avg(|m| m.f1),
        zero_support: (0..num_classes).filter(|&c| per_class[c].support == 0).collect(),
        per_class,
        confusion,
    })
}

/// Runs the `attr` head over `samples` and scores it.
pub fn evaluate_head(samples: &[&Sample], state: &ModelState, attr: Attribute) -> Result<EvalReport> {
    let mut preds = Vec::with_capacity(samples.len());
    let mut labels = Vec::with_capacity(samples.len());
    for s in samples {
        labels.push(s.require_label(attr)?);
        preds.push(predict(s.frames()?, state, attr)?);
    }
    evaluate(&preds, &labels, attr.num_classes())
}

/// Fits a linear softmax classifier on standardized features and returns
/// its accuracy on the seeded held-out fifth.
pub fn probe_features(features: &[Vec<f64>], labels: &[usize], num_classes: usize, seed: u64) -> Result<f64> {
    if features.len() != labels.len() {
        return Err(Error::Data("probe features and labels differ in length".into()));
    }
    if features.len() < 2 {
        return Err(Error::Data("a probe needs at least 2 samples".into()));
    }
    let dim = features[0].len();
    if dim == 0 || features.iter().any(|f| f.len() != dim) {
        return Err(Error::Data("probe features must share one non-zero width".into()));
    }
    let mut order: Vec<usize> = (0..features.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_fit = ((features.len() as f64 * PROBE_FIT_FRACTION).round() as usize).clamp(1, features.len() - 1);
    let (fit, held) = order.split_at(n_fit);

    let mut mean = vec![0.0; dim];
    let mut std = vec![0.0; dim];
    for &i in fit {
        for (m, x) in mean.iter_mut().zip(&features[i]) {
            *m += x / fit.len() as f64;
        }
    }
    for &i in fit {
        for ((s, m), x) in std.iter_mut().zip(&mean).zip(&features[i]) {
            *s += (x - m).powi(2) / fit.len() as f64;
        }
    }
    let std: Vec<f64> = std.into_iter().map(|v| if v > 0.0 { v.sqrt() } else { 1.0 }).collect();
    let standardize = |idx: &[usize]| -> Result<Tensor> {
        let mut values = Vec::with_capacity(idx.len() * dim);
        for &i in idx {
            for ((x, m), s) in features[i].iter().zip(&mean).zip(&std) {
                values.push((x - m) / s);
            }
        }
        Ok(Tensor::matrix(idx.len(), dim, values)?)
    };
    let x_fit = standardize(fit)?;
    let y_fit: Vec<usize> = fit.iter().map(|&i| labels[i]).collect();

    let mut weights = Tensor::zeros(&[dim, num_classes])?;
    let mut bias = Tensor::zeros(&[num_classes])?;
    for _ in 0..PROBE_EPOCHS {
        let mut g = Graph::new();
        let x = g.constant(x_fit.clone());
        let w = g.param(weights.clone());
        let b = g.param(bias.clone());
        let z = g.matmul(x, w)?;
        let logits = g.add_bias(z, b)?;
        let loss = g.log_softmax_nll(logits, &y_fit)?;
        g.backward(loss)?;
        for (t, v) in [(&mut weights, w), (&mut bias, b)] {
            let grad = g.grad(v)?.expect("trainable leaf").to_vec();
            for (p, d) in t.values_mut().iter_mut().zip(grad) {
                *p -= PROBE_LEARNING_RATE * d;
            }
        }
    }

    let x_held = standardize(held)?;
    let mut correct = 0usize;
    for (r, &i) in held.iter().enumerate() {
        let logits: Vec<f64> = (0..num_classes)
            .map(|c| {
                bias.values()[c]
                    + x_held
                        .row(r)
                        .iter()
                        .enumerate()
                        .map(|(d, x)| x * weights.values()[d * num_classes + c])
                        .sum::<f64>()
            })
            .collect();
        if argmax(&logits) == labels[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / held.len() as f64)
}

/// Probe accuracy for `attr` on frozen mean-pooled encoder outputs.
pub fn probe(state: &ModelState, samples: &[&Sample], attr: Attribute, seed: u64) -> Result<f64> {
    let mut features = Vec::with_capacity(samples.len());
    let mut labels = Vec::with_capacity(samples.len());
    for s in samples {
        labels.push(s.require_label(attr)?);
        features.push(pooled_embedding(s.frames()?, state)?);
    }
    probe_features(&features, &labels, attr.num_classes(), seed)
}

/// Probe accuracy for `attr` on time-averaged raw input frames.
pub fn probe_raw(samples: &[&Sample], attr: Attribute, seed: u64) -> Result<f64> {
    let mut features = Vec::with_capacity(samples.len());
    let mut labels = Vec::with_capacity(samples.len());
    for s in samples {
        labels.push(s.require_label(attr)?);
        let f = s.frames()?;
        let mut mean = vec![0.0; f.cols()];
        for r in 0..f.rows() {
            for (m, x) in mean.iter_mut().zip(f.row(r)) {
                *m += x / f.rows() as f64;
            }
        }
        features.push(mean);
    }
    probe_features(&features, &labels, attr.num_classes(), seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub model: String,
    pub roles: PerAttribute<Role>,
    pub report: EvalReport,
}

/// `Model | Dialect | Gender | Age | Acc. | P | R | F1`, metrics in percent.
pub fn render_results_table(rows: &[ResultRow]) -> String {
    let mut out = String::from(
        "| Model | Dialect | Gender | Age | Acc. | P | R | F1 |\n|---|---|---|---|---|---|---|---|\n",
    );
    for row in rows {
        let r = &row.report;
        writeln!(
            out,
            "| {} | {} | {} | {} | {:.2} | {:.2} | {:.2} | {:.2} |",
            row.model,
            row.roles[Attribute::Dialect].marker(),
            row.roles[Attribute::Gender].marker(),
            row.roles[Attribute::Age].marker(),
            100.0 * r.accuracy,
            100.0 * r.precision,
            100.0 * r.recall,
            100.0 * r.f1
        )
        .expect("string write");
    }
    out
}

/// Header `true,<predicted names>`, then one row per true class with
/// percentages to one decimal.
pub fn confusion_csv(report: &EvalReport, class_names: &[&str]) -> Result<String> {
    if class_names.len() != report.num_classes() {
        return Err(Error::Data(format!(
            "{} class names for {} classes",
            class_names.len(),
            report.num_classes()
        )));
    }
    let mut out = String::from("true");
    for name in class_names {
        write!(out, ",{name}").expect("string write");
    }
    out.push('\n');
    for (name, row) in class_names.iter().zip(&report.confusion) {
        out.push_str(name);
        for v in row {
            write!(out, ",{v:.1}").expect("string write");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_confusion_csv(report: &EvalReport, class_names: &[&str], path: &Path) -> Result<()> {
    fsutil::write_atomic(path, confusion_csv(report, class_names)?.as_bytes())
}

/// Inverse of [`confusion_csv`]: class names and the percentage matrix.
pub fn parse_confusion_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Data("empty confusion CSV".into()))?;
    let names: Vec<String> = header.split(',').skip(1).map(str::to_string).collect();
    let mut matrix = Vec::new();
    for (i, line) in lines.filter(|(_, l)| !l.is_empty()) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() + 1 {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected {} fields", names.len() + 1),
            });
        }
        let row = fields[1..]
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|e| Error::Parse {
                    line: i + 1,
                    message: format!("'{f}': {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        matrix.push(row);
    }
    Ok((names, matrix))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let labels = [0, 1, 2, 1, 0];
        let r = evaluate(&labels, &labels, 3).unwrap();
        assert_eq!((r.accuracy, r.f1, r.precision, r.recall), (1.0, 1.0, 1.0, 1.0));
        for (i, row) in r.confusion.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_eq!(*v, if i == j { 100.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn two_class_counts() {
        let r = evaluate(&[0, 1, 1, 1], &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(r.accuracy, 0.75);
        assert_eq!(r.per_class[0].precision, 1.0);
        assert_eq!(r.per_class[0].recall, 0.5);
        assert_eq!(r.per_class[1].precision, 2.0 / 3.0);
        assert_eq!(r.per_class[1].recall, 1.0);
        let f0 = 2.0 * 0.5 / 1.5;
        let f1 = 2.0 * (2.0 / 3.0) / (5.0 / 3.0);
        assert!((r.f1 - (f0 + f1) / 2.0).abs() < 1e-15);
        assert_eq!(r.confusion, vec![vec![50.0, 50.0], vec![0.0, 100.0]]);
        let csv = confusion_csv(&r, &["a", "b"]).unwrap();
        assert_eq!(csv, "true,a,b\na,50.0,50.0\nb,0.0,100.0\n");
    }

    #[test]
    fn zero_support_class_is_flagged_and_excluded() {
        let r = evaluate(&[0, 0, 0], &[0, 0, 0], 2).unwrap();
        assert_eq!(r.zero_support, vec![1]);
        assert_eq!(r.f1, 1.0);
        assert_eq!(r.confusion[1], vec![0.0, 0.0]);
    }

    #[test]
    fn metric_errors() {
        assert!(evaluate(&[0], &[0, 1], 2).is_err());
        assert!(evaluate(&[], &[], 2).is_err());
        assert!(evaluate(&[2], &[0], 2).is_err());
    }

    #[test]
    fn table_rendering() {
        let empty = render_results_table(&[]);
        assert_eq!(empty.lines().count(), 2);
        assert!(empty.starts_with("| Model | Dialect | Gender | Age | Acc. | P | R | F1 |"));
        let mut report = evaluate(&[0, 1], &[0, 1], 2).unwrap();
        report.accuracy = 0.78214;
        let row = ResultRow {
            model: "enc".into(),
            roles: PerAttribute([Role::Primary, Role::Adversarial, Role::Off]),
            report,
        };
        let t = render_results_table(&[row]);
        assert!(t.contains("| enc | ↑ | ↓ | ✗ | 78.21 |"), "{t}");
    }

    #[test]
    fn confusion_round_trip() {
        let r = evaluate(&[0, 1, 2, 2, 1, 0, 0], &[0, 1, 1, 2, 2, 2, 0], 3).unwrap();
        let (names, m) = parse_confusion_csv(&confusion_csv(&r, &["x", "y", "z"]).unwrap()).unwrap();
        assert_eq!(names, ["x", "y", "z"]);
        for (a, b) in m.iter().flatten().zip(r.confusion.iter().flatten()) {
            assert!((a - b).abs() <= 0.05);
        }
        assert!(confusion_csv(&r, &["x"]).is_err());
    }

    #[test]
    fn probe_separates_linear_classes_and_is_deterministic() {
        let feats: Vec<Vec<f64>> = (0..200).map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 }, (i as f64).sin()]).collect();
        let labels: Vec<usize> = (0..200).map(|i| i % 2).collect();
        let a = probe_features(&feats, &labels, 2, 9).unwrap();
        assert_eq!(a, 1.0);
        assert_eq!(probe_features(&feats, &labels, 2, 9).unwrap(), a);
    }
}
