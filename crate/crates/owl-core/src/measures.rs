//! Measures derived from confusion matrices, plus the novelty reaction-time
//! score and metadata group-by ablation metrics.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::confusion::{build_confusion, ConfusionMatrix};
use crate::dataset::PredictionRecord;
use crate::error::{Error, Result};

/// Fraction of samples whose predicted label equals the truth.
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyInput("accuracy of an empty matrix"));
    }
    Ok(cm.diagonal_total() as f64 / total as f64)
}

/// Multiclass Matthews correlation coefficient (the R_K statistic).
///
/// Computed over the union of row and column labels:
/// `(c*s - sum_k p_k t_k) / sqrt((s^2 - sum p_k^2)(s^2 - sum t_k^2))`
/// where `c` is the correct count, `s` the total, and `p_k`/`t_k` the
/// predicted/true counts of class `k`. A zero denominator (constant truths
/// or constant predictions) yields 0.
pub fn mcc(cm: &ConfusionMatrix) -> Result<f64> {
    let s = cm.total();
    if s == 0 {
        return Err(Error::EmptyInput("mcc of an empty matrix"));
    }
    let labels: BTreeSet<&str> = cm
        .row_labels()
        .iter()
        .chain(cm.col_labels().iter())
        .map(String::as_str)
        .collect();
    let rows = cm.row_sums();
    let cols = cm.col_sums();
    let s = s as f64;
    let c = cm.diagonal_total() as f64;
    let mut dot_pt = 0.0;
    let mut pp = 0.0;
    let mut tt = 0.0;
    for label in labels {
        let t_k = rows.get(label).copied().unwrap_or(0) as f64;
        let p_k = cols.get(label).copied().unwrap_or(0) as f64;
        dot_pt += p_k * t_k;
        pp += p_k * p_k;
        tt += t_k * t_k;
    }
    let denom_sq = (s * s - pp) * (s * s - tt);
    if denom_sq <= 0.0 {
        return Ok(0.0);
    }
    Ok((c * s - dot_pt) / libm::sqrt(denom_sq))
}

fn entropy(weights: impl Iterator<Item = u64>, total: f64) -> f64 {
    let mut h = 0.0;
    for w in weights {
        if w > 0 {
            let p = w as f64 / total;
            h -= p * libm::log(p);
        }
    }
    h
}

/// Mutual information normalized by the arithmetic mean of the marginal
/// entropies, natural log.
///
/// Conventions: `0*log 0 = 0`; both marginal entropies zero yields 1,
/// exactly one zero yields 0.
pub fn nmi_arith(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyInput("nmi of an empty matrix"));
    }
    let total = total as f64;
    let h_rows = entropy(cm.row_sums().values().copied(), total);
    let h_cols = entropy(cm.col_sums().values().copied(), total);
    if h_rows == 0.0 && h_cols == 0.0 {
        return Ok(1.0);
    }
    if h_rows == 0.0 || h_cols == 0.0 {
        return Ok(0.0);
    }
    let h_joint = entropy(cm.cells().map(|(_, _, n)| n), total);
    let mi = h_rows + h_cols - h_joint;
    Ok(mi / ((h_rows + h_cols) / 2.0))
}

/// The harmonic-mean novelty reaction-time score in `[0, 1]`; lower is
/// faster. `None` when the increment contains no truly novel samples.
///
/// With `a` the first truly novel index, `z` the final index, `d` the first
/// predicted-novel index at or after `a` (`z + 1` when never detected),
/// `r` the number of truly novel samples and `m` those in `[a, d]`, the
/// score is `2 / ((z+1-a)/(d-a) + r/m)`. Instant detection (`d = a`)
/// scores 0; never detecting scores 1.
pub fn reaction_time(truth_novel: &[bool], pred_novel: &[bool]) -> Result<Option<f64>> {
    if truth_novel.len() != pred_novel.len() {
        return Err(Error::LengthMismatch {
            expected: truth_novel.len(),
            actual: pred_novel.len(),
        });
    }
    let a = match truth_novel.iter().position(|&t| t) {
        Some(a) => a,
        None => return Ok(None),
    };
    let z = truth_novel.len() - 1;
    // Detections before the first novelty are ignored.
    let d = match pred_novel[a..].iter().position(|&p| p) {
        Some(offset) => a + offset,
        None => return Ok(Some(1.0)),
    };
    if d == a {
        return Ok(Some(0.0));
    }
    let r = truth_novel.iter().filter(|&&t| t).count() as f64;
    let m = truth_novel[a..=d].iter().filter(|&&t| t).count() as f64;
    let span = (z + 1 - a) as f64;
    let delay = (d - a) as f64;
    Ok(Some(2.0 / (span / delay + r / m)))
}

/// A measure computable from a confusion matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    Accuracy,
    Mcc,
    NmiArith,
}

impl Measure {
    pub fn as_str(&self) -> &'static str {
        match self {
            Measure::Accuracy => "accuracy",
            Measure::Mcc => "mcc",
            Measure::NmiArith => "nmi",
        }
    }

    pub fn parse(name: &str) -> Result<Measure> {
        match name {
            "accuracy" => Ok(Measure::Accuracy),
            "mcc" => Ok(Measure::Mcc),
            "nmi" => Ok(Measure::NmiArith),
            other => Err(Error::BadArgument(alloc::format!(
                "unknown measure {other:?} (expected accuracy, mcc, or nmi)"
            ))),
        }
    }

    pub fn compute(&self, cm: &ConfusionMatrix) -> Result<f64> {
        match self {
            Measure::Accuracy => accuracy(cm),
            Measure::Mcc => mcc(cm),
            Measure::NmiArith => nmi_arith(cm),
        }
    }

    pub const ALL: [Measure; 3] = [Measure::Accuracy, Measure::Mcc, Measure::NmiArith];
}

/// Group used for samples missing the group key (or with a non-numeric value
/// when tercile binning is requested).
pub const NA_GROUP: &str = "N/A";

/// How metadata values are mapped to groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grouping {
    /// Group by the verbatim metadata value.
    Verbatim,
    /// Parse values as numbers and bin into ascending thirds by sample
    /// count: `small`, `medium`, `large`.
    Tercile,
}

/// One evaluated sample with its annotation tags, as consumed by
/// [`group_metrics`].
#[derive(Debug, Clone)]
pub struct TaggedPair<'a> {
    pub truth: &'a str,
    pub prediction: &'a PredictionRecord,
    pub metadata: &'a BTreeMap<String, String>,
}

/// Per-group measures over pairs grouped by a metadata key.
///
/// Samples without the key fall under [`NA_GROUP`]. Returns
/// group -> measure name -> value.
pub fn group_metrics(
    pairs: &[TaggedPair<'_>],
    group_key: &str,
    measures: &[Measure],
    grouping: Grouping,
) -> Result<BTreeMap<String, BTreeMap<String, f64>>> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("group_metrics"));
    }
    let mut groups: BTreeMap<String, Vec<&TaggedPair<'_>>> = BTreeMap::new();
    match grouping {
        Grouping::Verbatim => {
            for pair in pairs {
                let group = pair
                    .metadata
                    .get(group_key)
                    .map(String::as_str)
                    .unwrap_or(NA_GROUP);
                groups.entry(group.to_string()).or_default().push(pair);
            }
        }
        Grouping::Tercile => {
            // Sort parseable values ascending (stable on input order) and
            // slice uniformly into thirds by sample count.
            let mut numeric: Vec<(f64, &TaggedPair<'_>)> = Vec::new();
            for pair in pairs {
                match pair.metadata.get(group_key).and_then(|v| parse_f64(v)) {
                    Some(value) => numeric.push((value, pair)),
                    None => groups.entry(NA_GROUP.to_string()).or_default().push(pair),
                }
            }
            numeric.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let n = numeric.len();
            for (idx, (_, pair)) in numeric.into_iter().enumerate() {
                let name = if idx < n / 3 {
                    "small"
                } else if idx < 2 * n / 3 {
                    "medium"
                } else {
                    "large"
                };
                groups.entry(name.to_string()).or_default().push(pair);
            }
        }
    }

    let mut out = BTreeMap::new();
    for (group, members) in groups {
        let cm = build_confusion(members.iter().map(|p| (p.truth, p.prediction)))?;
        let mut values = BTreeMap::new();
        for measure in measures {
            values.insert(measure.as_str().to_string(), measure.compute(&cm)?);
        }
        out.insert(group, values);
    }
    Ok(out)
}

fn parse_f64(s: &str) -> Option<f64> {
    let v: f64 = s.trim().parse().ok()?;
    v.is_finite().then_some(v)
}
