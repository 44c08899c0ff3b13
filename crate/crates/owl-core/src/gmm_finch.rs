//! Semi-supervised recognizer: per-class Gaussian mixtures over
//! first-neighbor clusters, a log-probability novelty threshold calibrated
//! on validation knowns, and a cumulative pool of detected unknowns that is
//! re-clustered into recognized classes `unknown_1`, `unknown_2`, ...

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::dataset::PredictionRecord;
use crate::error::{Error, Result};
use crate::finch::{coarsest_nontrivial, finch_cluster, members};
use crate::gaussian::{ClassModel, GaussianComponent};
use crate::predictor::{
    adaptive_epsilon, calibrate_threshold, cluster_label, order_feedback, Checkpoint,
    FinchPartition, LabeledSample, NoveltyThreshold, Predictor, PredictorConfig, PredictorKind,
    UnlabeledSample,
};
use crate::rng::derive_seed;
use crate::UNKNOWN_LABEL;

const BASE_EPSILON: f64 = 1e-6;

pub struct GmmFinchPredictor {
    config: PredictorConfig,
    dim: usize,
    /// Labeled experience: label -> id -> vector (deduplicated by id).
    labeled: BTreeMap<String, BTreeMap<String, Vec<f64>>>,
    /// Cumulative pool of samples detected as unknown, deduplicated by id.
    pool: BTreeMap<String, Vec<f64>>,
    calibration: Vec<Vec<f64>>,
    class_models: BTreeMap<String, ClassModel>,
    cluster_models: Vec<ClassModel>,
    threshold: Option<NoveltyThreshold>,
}

impl GmmFinchPredictor {
    pub fn new(config: PredictorConfig, dim: usize) -> Result<Self> {
        config.validate()?;
        if dim == 0 {
            return Err(Error::BadArgument("feature dimension must be positive".into()));
        }
        Ok(GmmFinchPredictor {
            config,
            dim,
            labeled: BTreeMap::new(),
            pool: BTreeMap::new(),
            calibration: Vec::new(),
            class_models: BTreeMap::new(),
            cluster_models: Vec::new(),
            threshold: None,
        })
    }

    fn check_dim(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: features.len(),
            });
        }
        Ok(())
    }

    /// One mixture per cluster of the configured hierarchy level, weights
    /// proportional to cluster sizes.
    fn fit_mixture(&self, label: &str, points: &[&[f64]]) -> Result<ClassModel> {
        let owned: Vec<Vec<f64>> = points.iter().map(|p| p.to_vec()).collect();
        let hierarchy = finch_cluster(&owned, self.config.neighbor_metric);
        let partition = match self.config.finch_partition {
            FinchPartition::Finest => &hierarchy[0],
            FinchPartition::CoarsestNontrivial => coarsest_nontrivial(&hierarchy),
        };
        let total = points.len() as f64;
        let mut components = Vec::new();
        for cluster in members(partition) {
            let cluster_points: Vec<&[f64]> = cluster.iter().map(|&i| points[i]).collect();
            let eps = adaptive_epsilon(&cluster_points, BASE_EPSILON);
            let mut g = GaussianComponent::fit(&cluster_points, eps, self.config.covariance)?;
            g.weight = cluster.len() as f64 / total;
            components.push(g);
        }
        Ok(ClassModel::new(label, components))
    }

    fn refit_class(&mut self, label: &str) -> Result<()> {
        let points: Vec<&[f64]> = self.labeled[label].values().map(Vec::as_slice).collect();
        let model = self.fit_mixture(label, &points)?;
        self.class_models.insert(label.to_string(), model);
        Ok(())
    }

    fn recluster_pool(&mut self) -> Result<()> {
        self.cluster_models.clear();
        if self.pool.is_empty() {
            return Ok(());
        }
        let points: Vec<&[f64]> = self.pool.values().map(Vec::as_slice).collect();
        let pooled = self.fit_mixture("", &points)?;
        self.cluster_models = pooled
            .components
            .into_iter()
            .enumerate()
            .map(|(k, g)| ClassModel::new(cluster_label(k + 1), alloc::vec![g]))
            .collect();
        Ok(())
    }

    fn recalibrate(&mut self) -> Result<()> {
        if self.calibration.is_empty() || self.class_models.is_empty() {
            self.threshold = None;
            return Ok(());
        }
        let mut scores = Vec::with_capacity(self.calibration.len());
        for x in &self.calibration {
            scores.push(self.max_known_log_prob(x)?);
        }
        self.threshold = Some(calibrate_threshold(&scores, self.config.accepted_error)?);
        Ok(())
    }

    fn max_known_log_prob(&self, x: &[f64]) -> Result<f64> {
        let mut best = f64::NEG_INFINITY;
        for model in self.class_models.values() {
            best = best.max(model.log_prob(x)?);
        }
        Ok(best)
    }

    pub fn threshold(&self) -> Option<NoveltyThreshold> {
        self.threshold
    }

    pub fn recognized_cluster_labels(&self) -> Vec<String> {
        self.cluster_models.iter().map(|m| m.label.clone()).collect()
    }

    pub fn pool_len(&self) -> usize {
        self.pool.len()
    }
}

impl Predictor for GmmFinchPredictor {
    fn dim(&self) -> usize {
        self.dim
    }

    fn known_labels(&self) -> BTreeSet<String> {
        self.labeled.keys().cloned().collect()
    }

    fn fit_initial(
        &mut self,
        train: &[LabeledSample<'_>],
        calibration: &[&[f64]],
    ) -> Result<()> {
        if train.is_empty() {
            return Err(Error::EmptyInput("fit_initial"));
        }
        for s in train {
            self.check_dim(s.features)?;
            if crate::is_reserved_label(s.label) {
                return Err(Error::BadLabel(s.label.to_string()));
            }
            self.labeled
                .entry(s.label.to_string())
                .or_default()
                .insert(s.id.to_string(), s.features.to_vec());
        }
        let labels: Vec<String> = self.labeled.keys().cloned().collect();
        for label in labels {
            self.refit_class(&label)?;
        }
        self.calibration = calibration.iter().map(|x| x.to_vec()).collect();
        self.recalibrate()
    }

    /// Score each sample against the current class models; anything below
    /// the threshold joins the cumulative unknown pool, which is then
    /// re-clustered into recognized unknown classes. Samples scoring as
    /// known do not touch the class models.
    fn observe_unlabeled(&mut self, batch: &[UnlabeledSample<'_>]) -> Result<()> {
        let threshold = match self.threshold {
            Some(t) => t,
            None => return Ok(()),
        };
        let mut grew = false;
        for s in batch {
            self.check_dim(s.features)?;
            let score = self.max_known_log_prob(s.features)?;
            if threshold.is_novel(score) && !self.pool.contains_key(s.id) {
                self.pool.insert(s.id.to_string(), s.features.to_vec());
                grew = true;
            }
        }
        if grew {
            self.recluster_pool()?;
        }
        Ok(())
    }

    fn predict(&self, sample: UnlabeledSample<'_>) -> Result<PredictionRecord> {
        self.check_dim(sample.features)?;
        if self.class_models.is_empty() {
            return Err(Error::EmptyInput("predict before fit"));
        }
        let mut scores: BTreeMap<String, f64> = BTreeMap::new();
        let mut best_known: Option<(&str, f64)> = None;
        for (label, model) in &self.class_models {
            let lp = model.log_prob(sample.features)?;
            scores.insert(label.clone(), lp);
            if best_known.map_or(true, |(_, s)| lp > s) {
                best_known = Some((label, lp));
            }
        }
        let (top_known, known_max) = best_known.expect("at least one class model");
        let mut best_cluster: Option<(&str, f64)> = None;
        for model in &self.cluster_models {
            let lp = model.log_prob(sample.features)?;
            scores.insert(model.label.clone(), lp);
            if best_cluster.map_or(true, |(_, s)| lp > s) {
                best_cluster = Some((&model.label, lp));
            }
        }
        let flagged = self
            .threshold
            .map(|t| t.is_novel(known_max))
            .unwrap_or(false);
        if let Some(t) = self.threshold {
            scores.insert(UNKNOWN_LABEL.to_string(), t.value);
        }

        let predicted = if flagged {
            best_cluster.map(|(l, _)| l).unwrap_or(UNKNOWN_LABEL).to_string()
        } else {
            top_known.to_string()
        };
        // The argmax carries the decision: lift the predicted label above
        // every other entry.
        let global_max = scores.values().copied().fold(f64::NEG_INFINITY, f64::max);
        scores.insert(predicted, global_max + 1.0);

        Ok(PredictionRecord {
            sample_id: sample.id.to_string(),
            scores,
            novelty_flag: flagged,
        })
    }

    fn feedback_order(&self, batch: &[UnlabeledSample<'_>]) -> Result<Vec<String>> {
        let mut items = Vec::with_capacity(batch.len());
        for s in batch {
            self.check_dim(s.features)?;
            let score = if self.class_models.is_empty() {
                0.0
            } else {
                self.max_known_log_prob(s.features)?
            };
            items.push((s.id.to_string(), score));
        }
        Ok(order_feedback(
            self.config.feedback_order,
            &items,
            derive_seed(self.config.seed, "feedback"),
        ))
    }

    fn receive_feedback(&mut self, batch: &[LabeledSample<'_>]) -> Result<()> {
        if batch.is_empty() {
            return Ok(());
        }
        let mut touched: BTreeSet<String> = BTreeSet::new();
        for s in batch {
            self.check_dim(s.features)?;
            if crate::is_reserved_label(s.label) {
                return Err(Error::BadLabel(s.label.to_string()));
            }
            self.labeled
                .entry(s.label.to_string())
                .or_default()
                .insert(s.id.to_string(), s.features.to_vec());
            // A revealed label removes the sample from the unknown pool.
            self.pool.remove(s.id);
            touched.insert(s.label.to_string());
        }
        for label in touched {
            self.refit_class(&label)?;
        }
        self.recluster_pool()?;
        self.recalibrate()
    }

    fn wants_eval_as_unlabeled(&self) -> bool {
        self.config.use_eval_splits_as_unlabeled
    }

    fn checkpoint(&self) -> Checkpoint {
        let mut string_blocks = Vec::new();
        let mut f64_blocks = Vec::new();
        let labels: Vec<String> = self.labeled.keys().cloned().collect();
        for (label, samples) in &self.labeled {
            let ids: Vec<String> = samples.keys().cloned().collect();
            let vecs: Vec<f64> = samples.values().flatten().copied().collect();
            string_blocks.push((alloc::format!("class_ids:{label}"), ids));
            f64_blocks.push((alloc::format!("class_vecs:{label}"), vecs));
        }
        string_blocks.push((
            "pool_ids".to_string(),
            self.pool.keys().cloned().collect(),
        ));
        f64_blocks.push((
            "pool_vecs".to_string(),
            self.pool.values().flatten().copied().collect(),
        ));
        f64_blocks.push((
            "calibration".to_string(),
            self.calibration.iter().flatten().copied().collect(),
        ));
        Checkpoint {
            kind: PredictorKind::GmmFinch,
            dim: self.dim,
            labels,
            config: self.config.clone(),
            threshold: self.threshold,
            rng_state: 0,
            string_blocks,
            f64_blocks,
        }
    }
}

impl GmmFinchPredictor {
    /// Rebuild from experience: models are deterministic functions of the
    /// stored samples, so they are refit rather than serialized.
    pub fn from_checkpoint(cp: &Checkpoint) -> Result<Self> {
        if cp.kind != PredictorKind::GmmFinch {
            return Err(Error::BadArgument("checkpoint kind is not gmm_finch".into()));
        }
        let mut p = GmmFinchPredictor::new(cp.config.clone(), cp.dim)?;
        for label in &cp.labels {
            let ids = cp.strings(&alloc::format!("class_ids:{label}"))?;
            let vecs = cp.floats(&alloc::format!("class_vecs:{label}"))?;
            if vecs.len() != ids.len() * cp.dim {
                return Err(Error::LengthMismatch {
                    expected: ids.len() * cp.dim,
                    actual: vecs.len(),
                });
            }
            let entry = p.labeled.entry(label.clone()).or_default();
            for (i, id) in ids.iter().enumerate() {
                entry.insert(id.clone(), vecs[i * cp.dim..(i + 1) * cp.dim].to_vec());
            }
        }
        let pool_ids = cp.strings("pool_ids")?;
        let pool_vecs = cp.floats("pool_vecs")?;
        if pool_vecs.len() != pool_ids.len() * cp.dim {
            return Err(Error::LengthMismatch {
                expected: pool_ids.len() * cp.dim,
                actual: pool_vecs.len(),
            });
        }
        for (i, id) in pool_ids.iter().enumerate() {
            p.pool
                .insert(id.clone(), pool_vecs[i * cp.dim..(i + 1) * cp.dim].to_vec());
        }
        p.calibration = cp
            .floats("calibration")?
            .chunks(cp.dim)
            .map(|c| c.to_vec())
            .collect();
        let labels: Vec<String> = p.labeled.keys().cloned().collect();
        for label in labels {
            p.refit_class(&label)?;
        }
        p.recluster_pool()?;
        p.recalibrate()?;
        if p.threshold != cp.threshold {
            return Err(Error::BadArgument(
                "restored threshold diverges from the checkpoint header".into(),
            ));
        }
        Ok(p)
    }
}
