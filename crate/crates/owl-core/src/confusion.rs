//! Labeled sparse confusion matrices and their reductions.
//!
//! The raw matrix keeps truth and prediction labels exactly as observed,
//! including recognized-unknown cluster labels. The three reductions fold
//! labels to focus on one subtask: classification (clusters folded into
//! `unknown`), detection (binary known vs unknown), and recognition (knowns
//! folded into `known`, clusters preserved).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::dataset::PredictionRecord;
use crate::error::{Error, Result};
use crate::{KNOWN_LABEL, UNKNOWN_LABEL};

/// Sparse count matrix with truth labels on rows and predictions on columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    row_labels: Vec<String>,
    col_labels: Vec<String>,
    counts: BTreeMap<(String, String), u64>,
}

impl ConfusionMatrix {
    /// Build from explicit (truth, prediction, count) cells.
    pub fn from_cells<I>(cells: I) -> Self
    where
        I: IntoIterator<Item = (String, String, u64)>,
    {
        let mut m = ConfusionMatrix {
            row_labels: Vec::new(),
            col_labels: Vec::new(),
            counts: BTreeMap::new(),
        };
        for (row, col, n) in cells {
            m.add(&row, &col, n);
        }
        m
    }

    fn add(&mut self, row: &str, col: &str, n: u64) {
        self.ensure_row(row);
        self.ensure_col(col);
        if n > 0 {
            *self
                .counts
                .entry((row.to_string(), col.to_string()))
                .or_insert(0) += n;
        }
    }

    fn ensure_row(&mut self, row: &str) {
        let pos = self.row_labels.partition_point(|l| l.as_str() < row);
        if self.row_labels.get(pos).map(String::as_str) != Some(row) {
            self.row_labels.insert(pos, row.to_string());
        }
    }

    fn ensure_col(&mut self, col: &str) {
        let pos = self.col_labels.partition_point(|l| l.as_str() < col);
        if self.col_labels.get(pos).map(String::as_str) != Some(col) {
            self.col_labels.insert(pos, col.to_string());
        }
    }

    /// Truth-side labels, ascending.
    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    /// Prediction-side labels, ascending.
    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    pub fn count(&self, row: &str, col: &str) -> u64 {
        self.counts
            .get(&(row.to_string(), col.to_string()))
            .copied()
            .unwrap_or(0)
    }

    /// Nonzero cells in (row, col) order. Labels with no counts still appear
    /// in the label lists, so zero rows/columns survive reductions.
    pub fn cells(&self) -> impl Iterator<Item = (&str, &str, u64)> {
        self.counts
            .iter()
            .map(|((r, c), n)| (r.as_str(), c.as_str(), *n))
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Sum of each row, keyed by row label.
    pub fn row_sums(&self) -> BTreeMap<&str, u64> {
        let mut sums: BTreeMap<&str, u64> = self.row_labels.iter().map(|l| (l.as_str(), 0)).collect();
        for ((r, _), n) in &self.counts {
            *sums.get_mut(r.as_str()).unwrap() += n;
        }
        sums
    }

    /// Sum of each column, keyed by column label.
    pub fn col_sums(&self) -> BTreeMap<&str, u64> {
        let mut sums: BTreeMap<&str, u64> = self.col_labels.iter().map(|l| (l.as_str(), 0)).collect();
        for ((_, c), n) in &self.counts {
            *sums.get_mut(c.as_str()).unwrap() += n;
        }
        sums
    }

    /// Count of agreeing cells: truth label equals predicted label.
    pub fn diagonal_total(&self) -> u64 {
        self.counts
            .iter()
            .filter(|((r, c), _)| r == c)
            .map(|(_, n)| *n)
            .sum()
    }
}

/// Which subtask a reduction targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Reduction {
    /// Keep known classes, fold everything else into `unknown`.
    Classification,
    /// Binary known vs unknown (always a 2x2 matrix).
    Detection,
    /// Fold known classes into `known`, keep unknown/cluster labels.
    Recognition,
}

impl Reduction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Reduction::Classification => "classification",
            Reduction::Detection => "detection",
            Reduction::Recognition => "recognition",
        }
    }

    pub fn parse(s: &str) -> Option<Reduction> {
        match s {
            "classification" => Some(Reduction::Classification),
            "detection" => Some(Reduction::Detection),
            "recognition" => Some(Reduction::Recognition),
            _ => None,
        }
    }

    pub const ALL: [Reduction; 3] = [
        Reduction::Classification,
        Reduction::Detection,
        Reduction::Recognition,
    ];
}

/// Count top-1 predictions against ground truth.
///
/// Labels of the result are the union of observed truths and predictions.
pub fn build_confusion<'a, I>(pairs: I) -> Result<ConfusionMatrix>
where
    I: IntoIterator<Item = (&'a str, &'a PredictionRecord)>,
{
    let mut m = ConfusionMatrix::from_cells([]);
    let mut any = false;
    for (truth, pred) in pairs {
        m.add(truth, pred.argmax(), 1);
        any = true;
    }
    if !any {
        return Err(Error::EmptyInput("build_confusion"));
    }
    Ok(m)
}

/// Top-k confusion: a hit anywhere in the first `k` ranked labels counts on
/// the diagonal, a miss counts at (truth, rank-1 label).
pub fn topk_confusion<'a, I>(pairs: I, k: usize) -> Result<ConfusionMatrix>
where
    I: IntoIterator<Item = (&'a str, &'a [&'a str])>,
{
    if k < 1 {
        return Err(Error::BadArgument("top-k requires k >= 1".into()));
    }
    let mut m = ConfusionMatrix::from_cells([]);
    let mut any = false;
    for (truth, ranking) in pairs {
        if ranking.is_empty() {
            return Err(Error::EmptyInput("topk ranking"));
        }
        if ranking.iter().take(k).any(|l| *l == truth) {
            m.add(truth, truth, 1);
        } else {
            m.add(truth, ranking[0], 1);
        }
        any = true;
    }
    if !any {
        return Err(Error::EmptyInput("topk_confusion"));
    }
    Ok(m)
}

fn fold_label<'a>(label: &'a str, mode: Reduction, known: &BTreeSet<String>) -> &'a str {
    let is_known = known.contains(label);
    match mode {
        Reduction::Classification => {
            if is_known {
                label
            } else {
                UNKNOWN_LABEL
            }
        }
        Reduction::Detection => {
            if is_known {
                KNOWN_LABEL
            } else {
                UNKNOWN_LABEL
            }
        }
        Reduction::Recognition => {
            if is_known {
                KNOWN_LABEL
            } else {
                label
            }
        }
    }
}

/// Fold matrix labels per the reduction mode, summing merged cells.
///
/// Detection results are padded to the full 2x2 `known`/`unknown` shape even
/// when one side never occurs.
pub fn reduce_confusion(
    cm: &ConfusionMatrix,
    mode: Reduction,
    known: &BTreeSet<String>,
) -> ConfusionMatrix {
    let mut out = ConfusionMatrix::from_cells([]);
    if mode == Reduction::Detection {
        for row in [KNOWN_LABEL, UNKNOWN_LABEL] {
            for col in [KNOWN_LABEL, UNKNOWN_LABEL] {
                out.add(row, col, 0);
            }
        }
    }
    for (row, col, n) in cm.cells() {
        out.add(fold_label(row, mode, known), fold_label(col, mode, known), n);
    }
    out
}

/// Cell-wise sum over the label union.
pub fn aggregate(cms: &[ConfusionMatrix]) -> Result<ConfusionMatrix> {
    if cms.is_empty() {
        return Err(Error::EmptyInput("aggregate"));
    }
    let mut out = ConfusionMatrix::from_cells([]);
    for cm in cms {
        for label in cm.row_labels() {
            out.ensure_row(label);
        }
        for label in cm.col_labels() {
            out.ensure_col(label);
        }
        for (row, col, n) in cm.cells() {
            out.add(row, col, n);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use alloc::vec;

    fn pred(label: &str) -> PredictionRecord {
        let mut scores = BTreeMap::new();
        scores.insert(label.to_string(), 1.0);
        PredictionRecord {
            sample_id: String::new(),
            scores,
            novelty_flag: false,
        }
    }

    #[test]
    fn single_pair_gives_one_by_one() {
        let p = pred("A");
        let cm = build_confusion([("A", &p)]).unwrap();
        assert_eq!(cm.row_labels(), ["A"]);
        assert_eq!(cm.col_labels(), ["A"]);
        assert_eq!(cm.count("A", "A"), 1);
        assert_eq!(cm.total(), 1);
    }

    #[test]
    fn rows_are_truths_cols_are_predictions() {
        let pb = pred("B");
        let cm = build_confusion([("A", &pb), ("B", &pb)]).unwrap();
        assert_eq!(cm.count("A", "B"), 1);
        assert_eq!(cm.count("B", "B"), 1);
        assert_eq!(cm.count("B", "A"), 0);
        assert_eq!(cm.row_labels(), ["A", "B"]);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(build_confusion([]).is_err());
    }

    #[test]
    fn row_sums_match_direct_counting_over_random_pairs() {
        let labels = ["a", "b", "c", "d", "e"];
        let mut rng = SplitMix64::new(11);
        let mut truths = Vec::new();
        let mut preds = Vec::new();
        for _ in 0..1000 {
            truths.push(labels[rng.next_below(5) as usize]);
            preds.push(pred(labels[rng.next_below(5) as usize]));
        }
        let cm =
            build_confusion(truths.iter().copied().zip(preds.iter())).unwrap();

        // Independent counting oracle.
        let mut truth_freq: BTreeMap<&str, u64> = BTreeMap::new();
        for t in &truths {
            *truth_freq.entry(t).or_insert(0) += 1;
        }
        assert_eq!(cm.total(), 1000);
        for (label, freq) in truth_freq {
            assert_eq!(cm.row_sums()[label], freq);
        }
    }

    #[test]
    fn topk_hit_and_miss_placement() {
        let ranking: &[&str] = &["B", "A", "C"];
        let cm = topk_confusion([("A", ranking)], 5).unwrap();
        assert_eq!(cm.count("A", "A"), 1);

        let cm1 = topk_confusion([("A", ranking)], 1).unwrap();
        assert_eq!(cm1.count("A", "B"), 1);
        assert_eq!(cm1.count("A", "A"), 0);

        assert!(topk_confusion([("A", ranking)], 0).is_err());
    }

    #[test]
    fn topk_accuracy_matches_membership_oracle() {
        let labels = ["a", "b", "c", "d", "e", "f"];
        let mut rng = SplitMix64::new(5);
        let mut data: Vec<(&str, Vec<&str>)> = Vec::new();
        for _ in 0..500 {
            let truth = labels[rng.next_below(6) as usize];
            let mut ranking: Vec<&str> = labels.to_vec();
            rng.shuffle(&mut ranking);
            data.push((truth, ranking));
        }
        for k in 1..=6 {
            let cm = topk_confusion(
                data.iter().map(|(t, r)| (*t, r.as_slice())),
                k,
            )
            .unwrap();
            let hits = data
                .iter()
                .filter(|(t, r)| r.iter().take(k).any(|l| l == t))
                .count() as u64;
            assert_eq!(cm.diagonal_total(), hits, "k = {k}");
        }
    }

    fn known(labels: &[&str]) -> BTreeSet<String> {
        labels.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn classification_reduction_folds_unknowns() {
        let cm = ConfusionMatrix::from_cells([
            ("A".into(), "A".into(), 3),
            ("novelX".into(), "A".into(), 2),
            ("novelX".into(), "unknown".into(), 4),
        ]);
        let r = reduce_confusion(&cm, Reduction::Classification, &known(&["A"]));
        assert_eq!(r.count("A", "A"), 3);
        assert_eq!(r.count("unknown", "A"), 2);
        assert_eq!(r.count("unknown", "unknown"), 4);
        assert_eq!(r.total(), cm.total());
    }

    #[test]
    fn detection_reduction_pads_to_two_by_two() {
        let cm = ConfusionMatrix::from_cells([
            ("A".into(), "A".into(), 5),
            ("B".into(), "B".into(), 2),
        ]);
        let r = reduce_confusion(&cm, Reduction::Detection, &known(&["A", "B"]));
        assert_eq!(r.row_labels(), ["known", "unknown"]);
        assert_eq!(r.col_labels(), ["known", "unknown"]);
        assert_eq!(r.count("known", "known"), 7);
        assert_eq!(r.count("unknown", "unknown"), 0);
        assert_eq!(r.total(), cm.total());
    }

    #[test]
    fn recognition_reduction_matches_cell_sum_oracle() {
        // Random 6x6 matrix over 3 known labels, 2 cluster labels, 1 novel truth.
        let rows = ["a", "b", "c", "novel1", "novel2", "novel3"];
        let cols = ["a", "b", "c", "unknown_1", "unknown_2", "unknown"];
        let mut rng = SplitMix64::new(77);
        let mut cells = Vec::new();
        for r in rows {
            for c in cols {
                cells.push((r.to_string(), c.to_string(), rng.next_below(9)));
            }
        }
        let cm = ConfusionMatrix::from_cells(cells.clone());
        let known_set = known(&["a", "b", "c"]);
        let red = reduce_confusion(&cm, Reduction::Recognition, &known_set);

        // Oracle: sum cells into folded coordinates independently.
        let mut oracle: BTreeMap<(String, String), u64> = BTreeMap::new();
        for (r, c, n) in cells {
            let fr = if known_set.contains(&r) { "known".to_string() } else { r };
            let fc = if known_set.contains(&c) { "known".to_string() } else { c };
            *oracle.entry((fr, fc)).or_insert(0) += n;
        }
        for ((r, c), n) in oracle {
            assert_eq!(red.count(&r, &c), n, "cell ({r}, {c})");
        }
        assert!(red.col_labels().contains(&"unknown_1".to_string()));
        assert!(red.col_labels().contains(&"unknown_2".to_string()));
        assert_eq!(red.total(), cm.total());
    }

    #[test]
    fn detection_reduction_is_idempotent() {
        let cm = ConfusionMatrix::from_cells([
            ("A".into(), "A".into(), 5),
            ("x".into(), "A".into(), 1),
            ("x".into(), "unknown".into(), 3),
        ]);
        let k = known(&["A"]);
        let once = reduce_confusion(&cm, Reduction::Detection, &k);
        let k2 = known(&["known"]);
        let twice = reduce_confusion(&once, Reduction::Detection, &k2);
        assert_eq!(once, twice);
    }

    #[test]
    fn aggregate_sums_cells_over_label_union() {
        let m1 = ConfusionMatrix::from_cells([("A".into(), "A".into(), 2)]);
        let m2 = ConfusionMatrix::from_cells([
            ("A".into(), "A".into(), 1),
            ("B".into(), "A".into(), 4),
        ]);
        let sum = aggregate(&[m1.clone(), m2]).unwrap();
        assert_eq!(sum.count("A", "A"), 3);
        assert_eq!(sum.count("B", "A"), 4);

        let single = aggregate(core::slice::from_ref(&m1)).unwrap();
        assert_eq!(single.count("A", "A"), 2);
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn aggregate_equals_concatenation() {
        let labels = ["a", "b", "c"];
        let mut rng = SplitMix64::new(3);
        let mut all_pairs: Vec<(&str, PredictionRecord)> = Vec::new();
        let mut parts = Vec::new();
        for _ in 0..4 {
            let mut chunk = Vec::new();
            for _ in 0..50 {
                let t = labels[rng.next_below(3) as usize];
                let p = pred(labels[rng.next_below(3) as usize]);
                chunk.push((t, p));
            }
            all_pairs.extend(chunk.iter().cloned());
            parts.push(
                build_confusion(chunk.iter().map(|(t, p)| (*t, p))).unwrap(),
            );
        }
        let summed = aggregate(&parts).unwrap();
        let direct =
            build_confusion(all_pairs.iter().map(|(t, p)| (*t, p))).unwrap();
        assert_eq!(summed, direct);
    }
}
