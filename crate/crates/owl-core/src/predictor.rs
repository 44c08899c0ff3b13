//! The predictor contract shared by all baselines, plus threshold
//! calibration and feedback-request ordering.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::dataset::PredictionRecord;
use crate::error::{Error, Result};
use crate::finch::NeighborMetric;
use crate::gaussian::CovarianceKind;
use crate::rng::{fnv1a64, SplitMix64};

/// Which baseline a config instantiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PredictorKind {
    Ann,
    GmmFinch,
}

/// How the predictor prioritizes samples when requesting feedback.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FeedbackOrder {
    #[default]
    LeastConfident,
    Random,
}

/// Hidden layer sizing: match the feature dimension or an explicit width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum HiddenWidth {
    #[default]
    FeatureDim,
    Explicit(usize),
}

/// Which level of the cluster hierarchy feeds the per-class mixtures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FinchPartition {
    #[default]
    Finest,
    CoarsestNontrivial,
}

/// Everything needed to build either baseline deterministically.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct PredictorConfig {
    pub kind: PredictorKind,
    /// Accepted fraction of validation knowns flagged novel, in (0, 1).
    pub accepted_error: f64,
    pub feedback_order: FeedbackOrder,
    pub epochs_per_increment: usize,
    pub hidden_width: HiddenWidth,
    /// Hidden-activation dropout probability during training, in [0, 1).
    pub dropout: f64,
    pub covariance: CovarianceKind,
    pub finch_partition: FinchPartition,
    pub neighbor_metric: NeighborMetric,
    pub use_eval_splits_as_unlabeled: bool,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            kind: PredictorKind::Ann,
            accepted_error: 0.10,
            feedback_order: FeedbackOrder::LeastConfident,
            epochs_per_increment: 1,
            hidden_width: HiddenWidth::FeatureDim,
            dropout: 0.5,
            covariance: CovarianceKind::Full,
            finch_partition: FinchPartition::Finest,
            neighbor_metric: NeighborMetric::Euclidean,
            use_eval_splits_as_unlabeled: false,
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 256,
            seed: 0,
        }
    }
}

impl PredictorConfig {
    pub fn ann(seed: u64) -> Self {
        PredictorConfig {
            kind: PredictorKind::Ann,
            seed,
            ..Default::default()
        }
    }

    /// The recognizer default: it consumes eval splits as unlabeled data.
    pub fn gmm_finch(seed: u64) -> Self {
        PredictorConfig {
            kind: PredictorKind::GmmFinch,
            use_eval_splits_as_unlabeled: true,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.accepted_error > 0.0 && self.accepted_error < 1.0) {
            return Err(Error::BadArgument(
                "accepted_error must be in (0, 1)".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::BadArgument("dropout must be in [0, 1)".into()));
        }
        if self.epochs_per_increment == 0 {
            return Err(Error::BadArgument(
                "epochs_per_increment must be >= 1".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::BadArgument("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// A novelty decision boundary over per-sample maximum class scores.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoveltyThreshold {
    pub value: f64,
    /// Number of calibration scores the value was derived from.
    pub calibration_size: usize,
}

impl NoveltyThreshold {
    /// A sample is novel iff its max class score is strictly below the
    /// threshold.
    pub fn is_novel(&self, max_score: f64) -> bool {
        max_score < self.value
    }
}

/// Nearest-rank lower-tail quantile of validation-known max scores, so a
/// fraction `accepted_error` of them would be flagged novel.
pub fn calibrate_threshold(
    max_scores_on_validation_knowns: &[f64],
    accepted_error: f64,
) -> Result<NoveltyThreshold> {
    if max_scores_on_validation_knowns.is_empty() {
        return Err(Error::EmptyInput("calibrate_threshold"));
    }
    if !(accepted_error > 0.0 && accepted_error < 1.0) {
        return Err(Error::BadArgument(
            "accepted_error must be in (0, 1)".into(),
        ));
    }
    if max_scores_on_validation_knowns.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("calibration scores"));
    }
    let mut sorted = max_scores_on_validation_knowns.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    // Nearest-rank: the smallest rank whose cumulative fraction reaches
    // accepted_error, at least 1.
    let rank = ((accepted_error * n as f64) as usize).max(1).min(n);
    let rank = if (rank as f64) < accepted_error * n as f64 {
        rank + 1
    } else {
        rank
    };
    Ok(NoveltyThreshold {
        value: sorted[rank.min(n) - 1],
        calibration_size: n,
    })
}

/// One sample with its ground-truth label attached.
#[derive(Debug, Clone, Copy)]
pub struct LabeledSample<'a> {
    pub id: &'a str,
    pub label: &'a str,
    pub features: &'a [f64],
}

/// One sample without a label.
#[derive(Debug, Clone, Copy)]
pub struct UnlabeledSample<'a> {
    pub id: &'a str,
    pub features: &'a [f64],
}

/// Full predictor state snapshot: a typed header plus named parameter and
/// string blocks. Sufficient to rebuild the predictor bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: PredictorKind,
    pub dim: usize,
    pub labels: Vec<String>,
    pub config: PredictorConfig,
    pub threshold: Option<NoveltyThreshold>,
    pub rng_state: u64,
    pub string_blocks: Vec<(String, Vec<String>)>,
    pub f64_blocks: Vec<(String, Vec<f64>)>,
}

impl Checkpoint {
    pub fn strings(&self, name: &str) -> Result<&[String]> {
        self.string_blocks
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::BadArgument(alloc::format!("checkpoint lacks block {name:?}")))
    }

    pub fn floats(&self, name: &str) -> Result<&[f64]> {
        self.f64_blocks
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::BadArgument(alloc::format!("checkpoint lacks block {name:?}")))
    }
}

/// The evaluator-facing contract: observe, predict, request feedback,
/// learn from feedback, snapshot.
pub trait Predictor {
    fn dim(&self) -> usize;

    /// Labels the predictor currently treats as known classes.
    fn known_labels(&self) -> BTreeSet<String>;

    /// Fully supervised fit on the initial increment; `calibration` holds
    /// validation features known to belong to known classes.
    fn fit_initial(
        &mut self,
        train: &[LabeledSample<'_>],
        calibration: &[&[f64]],
    ) -> Result<()>;

    /// New unlabeled data (pre-feedback). Semi-supervised predictors may
    /// self-update; purely supervised ones ignore it.
    fn observe_unlabeled(&mut self, batch: &[UnlabeledSample<'_>]) -> Result<()>;

    /// Pure per-sample prediction against current state.
    fn predict(&self, sample: UnlabeledSample<'_>) -> Result<PredictionRecord>;

    /// Priority ordering over the batch's ids for feedback requests; must
    /// be a permutation of the input ids.
    fn feedback_order(&self, batch: &[UnlabeledSample<'_>]) -> Result<Vec<String>>;

    /// Ground-truth labels granted by the evaluator (possibly empty).
    fn receive_feedback(&mut self, batch: &[LabeledSample<'_>]) -> Result<()>;

    /// Whether the evaluator should offer new eval-split features as
    /// unlabeled data.
    fn wants_eval_as_unlabeled(&self) -> bool;

    fn checkpoint(&self) -> Checkpoint;
}

/// Build the configured baseline, empty of any experience.
pub fn build_predictor(config: &PredictorConfig, dim: usize) -> Result<Box<dyn Predictor>> {
    config.validate()?;
    Ok(match config.kind {
        PredictorKind::Ann => Box::new(crate::ann::AnnPredictor::new(config.clone(), dim)?),
        PredictorKind::GmmFinch => {
            Box::new(crate::gmm_finch::GmmFinchPredictor::new(config.clone(), dim)?)
        }
    })
}

/// Rebuild a predictor from a checkpoint snapshot.
pub fn predictor_from_checkpoint(cp: &Checkpoint) -> Result<Box<dyn Predictor>> {
    Ok(match cp.kind {
        PredictorKind::Ann => Box::new(crate::ann::AnnPredictor::from_checkpoint(cp)?),
        PredictorKind::GmmFinch => {
            Box::new(crate::gmm_finch::GmmFinchPredictor::from_checkpoint(cp)?)
        }
    })
}

/// Order ids for a feedback request.
///
/// Least-confident sorts ascending by max class score with lexicographic id
/// ties; random shuffles with a stream derived from the seed and the batch's
/// ids. Always a permutation of the input.
pub fn order_feedback(
    mode: FeedbackOrder,
    items: &[(String, f64)],
    seed: u64,
) -> Vec<String> {
    match mode {
        FeedbackOrder::LeastConfident => {
            let mut idx: Vec<usize> = (0..items.len()).collect();
            idx.sort_by(|&a, &b| {
                items[a]
                    .1
                    .partial_cmp(&items[b].1)
                    .unwrap()
                    .then_with(|| items[a].0.cmp(&items[b].0))
            });
            idx.into_iter().map(|i| items[i].0.clone()).collect()
        }
        FeedbackOrder::Random => {
            let mut tag: u64 = 0xA5A5_A5A5;
            for (id, _) in items {
                tag ^= fnv1a64(id.as_bytes()).rotate_left(17);
            }
            let mut rng = SplitMix64::new(seed ^ tag);
            let mut ids: Vec<String> = items.iter().map(|(id, _)| id.clone()).collect();
            rng.shuffle(&mut ids);
            ids
        }
    }
}

/// Max score over non-reserved (known-class) entries of a prediction map.
pub fn max_known_score(scores: &alloc::collections::BTreeMap<String, f64>) -> Option<f64> {
    scores
        .iter()
        .filter(|(label, _)| !crate::is_reserved_label(label))
        .map(|(_, &v)| v)
        .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
}

/// Covariance regularization scaled to the data: `base * max(1, trace/d)`
/// where `trace` is the unregularized sample covariance trace.
pub fn adaptive_epsilon(points: &[&[f64]], base: f64) -> f64 {
    if points.len() < 2 {
        return base;
    }
    let d = points[0].len();
    let n = points.len() as f64;
    let mut mean = alloc::vec![0.0; d];
    for p in points {
        for (m, v) in mean.iter_mut().zip(p.iter()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut trace = 0.0;
    for p in points {
        for (v, m) in p.iter().zip(&mean) {
            trace += (v - m) * (v - m);
        }
    }
    trace /= n - 1.0;
    base * (trace / d as f64).max(1.0)
}

impl PredictionRecord {
    /// The decision score novelty thresholds compare against.
    pub fn max_known_score(&self) -> Option<f64> {
        max_known_score(&self.scores)
    }
}

/// Labels for recognized unknown clusters: `unknown_1`, `unknown_2`, ...
pub fn cluster_label(k: usize) -> String {
    let mut s = crate::UNKNOWN_CLUSTER_PREFIX.to_string();
    s.push_str(&alloc::format!("{k}"));
    s
}
