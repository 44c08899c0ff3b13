//! Threshold-calibrated softmax classifier: one hidden LeakyReLU layer, a
//! softmax readout sized known classes + 1 (the catch-all unknown unit,
//! never a training target), SGD with momentum, dropout during training.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::PredictionRecord;
use crate::error::{Error, Result};
use crate::predictor::{
    calibrate_threshold, order_feedback, Checkpoint, LabeledSample, NoveltyThreshold, Predictor,
    PredictorConfig, PredictorKind, UnlabeledSample,
};
use crate::rng::{derive_seed, SplitMix64};
use crate::UNKNOWN_LABEL;

const LEAKY_SLOPE: f64 = 0.01;

fn leaky_relu(x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

fn leaky_relu_grad(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

/// Flat gradient with the same layout as [`AnnPredictor::flat_params`].
pub type FlatGradient = Vec<f64>;

pub struct AnnPredictor {
    config: PredictorConfig,
    dim: usize,
    hidden: usize,
    /// Output order of known classes; the final output unit is `unknown`.
    labels: Vec<String>,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
    vw1: Vec<f64>,
    vb1: Vec<f64>,
    vw2: Vec<f64>,
    vb2: Vec<f64>,
    rng: SplitMix64,
    /// All labeled samples ever received, deduplicated by id.
    experience: BTreeMap<String, (String, Vec<f64>)>,
    calibration: Vec<Vec<f64>>,
    threshold: Option<NoveltyThreshold>,
}

impl AnnPredictor {
    pub fn new(config: PredictorConfig, dim: usize) -> Result<Self> {
        config.validate()?;
        if dim == 0 {
            return Err(Error::BadArgument("feature dimension must be positive".into()));
        }
        let hidden = match config.hidden_width {
            crate::predictor::HiddenWidth::FeatureDim => dim,
            crate::predictor::HiddenWidth::Explicit(n) => n.max(1),
        };
        let mut p = AnnPredictor {
            rng: SplitMix64::new(derive_seed(config.seed, "ann")),
            config,
            dim,
            hidden,
            labels: Vec::new(),
            w1: Vec::new(),
            b1: vec![0.0; hidden],
            w2: Vec::new(),
            b2: Vec::new(),
            vw1: Vec::new(),
            vb1: vec![0.0; hidden],
            vw2: Vec::new(),
            vb2: Vec::new(),
            experience: BTreeMap::new(),
            calibration: Vec::new(),
            threshold: None,
        };
        p.init_hidden_layer();
        p.append_output_row(UNKNOWN_LABEL);
        Ok(p)
    }

    fn init_hidden_layer(&mut self) {
        let mut rng = SplitMix64::new(derive_seed(self.config.seed, "hidden"));
        let scale = libm::sqrt(2.0 / self.dim as f64);
        self.w1 = (0..self.hidden * self.dim)
            .map(|_| rng.next_standard_normal() * scale)
            .collect();
        self.vw1 = vec![0.0; self.hidden * self.dim];
    }

    /// Append one output row seeded from the label, leaving existing rows
    /// bit-identical.
    fn append_output_row(&mut self, label: &str) {
        let mut rng = SplitMix64::new(derive_seed(self.config.seed, label));
        let scale = libm::sqrt(1.0 / self.hidden as f64) * 0.01;
        self.w2
            .extend((0..self.hidden).map(|_| rng.next_standard_normal() * scale));
        self.b2.push(0.0);
        self.vw2.extend(core::iter::repeat_n(0.0, self.hidden));
        self.vb2.push(0.0);
    }

    /// Insert output rows for new labels (kept sorted insertion order).
    /// Existing rows are untouched, so logits of prior classes on any input
    /// are unchanged.
    pub fn grow_outputs(&mut self, new_labels: &[String]) -> Result<()> {
        let mut fresh: Vec<&String> = Vec::new();
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        for label in new_labels {
            if crate::is_reserved_label(label) {
                return Err(Error::BadLabel(alloc::format!(
                    "{label:?} is reserved and cannot become a class"
                )));
            }
            if self.labels.iter().any(|l| l == label) || !seen.insert(label) {
                return Err(Error::BadLabel(alloc::format!("duplicate label {label:?}")));
            }
            fresh.push(label);
        }
        fresh.sort();
        // The unknown unit stays last: drop its row, append, re-add.
        let unknown_row: Vec<f64> = self.w2.split_off(self.w2.len() - self.hidden);
        let unknown_b = self.b2.pop().expect("unknown unit exists");
        let unknown_vrow: Vec<f64> = self.vw2.split_off(self.vw2.len() - self.hidden);
        let unknown_vb = self.vb2.pop().expect("unknown unit exists");
        for label in fresh {
            self.labels.push(label.clone());
            self.append_output_row(label);
        }
        self.w2.extend(unknown_row);
        self.b2.push(unknown_b);
        self.vw2.extend(unknown_vrow);
        self.vb2.push(unknown_vb);
        Ok(())
    }

    fn outputs(&self) -> usize {
        self.labels.len() + 1
    }

    fn hidden_pre(&self, x: &[f64]) -> Vec<f64> {
        let mut pre = self.b1.clone();
        for (h, pre_h) in pre.iter_mut().enumerate() {
            let row = &self.w1[h * self.dim..(h + 1) * self.dim];
            *pre_h += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        pre
    }

    /// Softmax probabilities over known classes + the unknown unit.
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let act: Vec<f64> = self.hidden_pre(x).iter().map(|&p| leaky_relu(p)).collect();
        let outputs = self.outputs();
        let mut logits = self.b2.clone();
        for (o, logit) in logits.iter_mut().enumerate() {
            let row = &self.w2[o * self.hidden..(o + 1) * self.hidden];
            *logit += row.iter().zip(&act).map(|(w, a)| w * a).sum::<f64>();
        }
        softmax(&mut logits);
        debug_assert_eq!(logits.len(), outputs);
        logits
    }

    /// Mean cross-entropy and flat gradient over a batch, with an optional
    /// per-sample dropout mask on the hidden activations (entries are the
    /// multipliers, e.g. 0 or 1/(1-p)).
    pub fn loss_and_gradients(
        &self,
        batch: &[(&[f64], usize)],
        masks: Option<&[Vec<f64>]>,
    ) -> Result<(f64, FlatGradient)> {
        if batch.is_empty() {
            return Err(Error::EmptyInput("ann batch"));
        }
        let outputs = self.outputs();
        let mut gw1 = vec![0.0; self.w1.len()];
        let mut gb1 = vec![0.0; self.b1.len()];
        let mut gw2 = vec![0.0; self.w2.len()];
        let mut gb2 = vec![0.0; self.b2.len()];
        let mut loss = 0.0;
        let inv_b = 1.0 / batch.len() as f64;

        for (s, &(x, target)) in batch.iter().enumerate() {
            if x.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    actual: x.len(),
                });
            }
            if target >= self.labels.len() {
                return Err(Error::BadLabel(alloc::format!(
                    "target index {target} outside the known output space"
                )));
            }
            let pre = self.hidden_pre(x);
            let mut act: Vec<f64> = pre.iter().map(|&p| leaky_relu(p)).collect();
            if let Some(masks) = masks {
                for (a, m) in act.iter_mut().zip(&masks[s]) {
                    *a *= m;
                }
            }
            let mut logits = self.b2.clone();
            for (o, logit) in logits.iter_mut().enumerate() {
                let row = &self.w2[o * self.hidden..(o + 1) * self.hidden];
                *logit += row.iter().zip(&act).map(|(w, a)| w * a).sum::<f64>();
            }
            softmax(&mut logits);
            loss -= libm::log(logits[target].max(f64::MIN_POSITIVE)) * inv_b;

            // dL/dlogit = (p - onehot) / B.
            let mut dlogits = logits;
            dlogits[target] -= 1.0;
            for d in dlogits.iter_mut() {
                *d *= inv_b;
            }
            let mut dact = vec![0.0; self.hidden];
            for o in 0..outputs {
                let row = &self.w2[o * self.hidden..(o + 1) * self.hidden];
                let grow = &mut gw2[o * self.hidden..(o + 1) * self.hidden];
                for h in 0..self.hidden {
                    grow[h] += dlogits[o] * act[h];
                    dact[h] += dlogits[o] * row[h];
                }
                gb2[o] += dlogits[o];
            }
            for h in 0..self.hidden {
                let mut dpre = dact[h];
                if let Some(masks) = masks {
                    dpre *= masks[s][h];
                }
                dpre *= leaky_relu_grad(pre[h]);
                let grow = &mut gw1[h * self.dim..(h + 1) * self.dim];
                for (g, v) in grow.iter_mut().zip(x) {
                    *g += dpre * v;
                }
                gb1[h] += dpre;
            }
        }

        let mut flat = gw1;
        flat.extend(gb1);
        flat.extend(gw2);
        flat.extend(gb2);
        Ok((loss, flat))
    }

    /// Mean cross-entropy only (no dropout); the finite-difference side of
    /// gradient checks.
    pub fn loss_on(&self, batch: &[(&[f64], usize)]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyInput("ann batch"));
        }
        let mut loss = 0.0;
        for &(x, target) in batch {
            if target >= self.labels.len() {
                return Err(Error::BadLabel("target outside output space".into()));
            }
            let p = self.forward(x);
            loss -= libm::log(p[target].max(f64::MIN_POSITIVE));
        }
        Ok(loss / batch.len() as f64)
    }

    /// All trainable parameters, flattened as w1, b1, w2, b2.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut p = self.w1.clone();
        p.extend(&self.b1);
        p.extend(&self.w2);
        p.extend(&self.b2);
        p
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        let want = self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len();
        if params.len() != want {
            return Err(Error::LengthMismatch {
                expected: want,
                actual: params.len(),
            });
        }
        let (a, rest) = params.split_at(self.w1.len());
        let (b, rest) = rest.split_at(self.b1.len());
        let (c, d) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(a);
        self.b1.copy_from_slice(b);
        self.w2.copy_from_slice(c);
        self.b2.copy_from_slice(d);
        Ok(())
    }

    /// Index of a label in the output layer.
    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn output_labels(&self) -> &[String] {
        &self.labels
    }

    pub fn threshold(&self) -> Option<NoveltyThreshold> {
        self.threshold
    }

    /// One pass over the batch in shuffled mini-batches; returns mean loss.
    pub fn train_epoch(&mut self, samples: &[(&[f64], usize)]) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("train_epoch"));
        }
        let mut order: Vec<usize> = (0..samples.len()).collect();
        self.rng.shuffle(&mut order);
        let lr = self.config.learning_rate;
        let momentum = self.config.momentum;
        let dropout = self.config.dropout;
        let mut epoch_loss = 0.0;
        let mut batches = 0.0;
        for chunk in order.chunks(self.config.batch_size) {
            let batch: Vec<(&[f64], usize)> = chunk.iter().map(|&i| samples[i]).collect();
            let masks: Option<Vec<Vec<f64>>> = if dropout > 0.0 {
                let keep = 1.0 - dropout;
                Some(
                    (0..batch.len())
                        .map(|_| {
                            (0..self.hidden)
                                .map(|_| {
                                    if self.rng.next_f64() < dropout {
                                        0.0
                                    } else {
                                        1.0 / keep
                                    }
                                })
                                .collect()
                        })
                        .collect(),
                )
            } else {
                None
            };
            let (loss, grad) = self.loss_and_gradients(&batch, masks.as_deref())?;
            if !loss.is_finite() {
                return Err(Error::NonFinite("training loss"));
            }
            epoch_loss += loss;
            batches += 1.0;

            // SGD with momentum: v = m v + g; p -= lr v.
            let mut offset = 0;
            for (params, velocity) in [
                (&mut self.w1, &mut self.vw1),
                (&mut self.b1, &mut self.vb1),
                (&mut self.w2, &mut self.vw2),
                (&mut self.b2, &mut self.vb2),
            ] {
                for (i, (p, v)) in params.iter_mut().zip(velocity.iter_mut()).enumerate() {
                    *v = momentum * *v + grad[offset + i];
                    *p -= lr * *v;
                }
                offset += params.len();
            }
        }
        Ok(epoch_loss / batches)
    }

    fn train_on_experience(&mut self) -> Result<()> {
        if self.experience.is_empty() {
            return Ok(());
        }
        let index: BTreeMap<&str, usize> = self
            .labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect();
        let owned: Vec<(Vec<f64>, usize)> = self
            .experience
            .values()
            .map(|(label, vec)| (vec.clone(), index[label.as_str()]))
            .collect();
        let samples: Vec<(&[f64], usize)> =
            owned.iter().map(|(v, i)| (v.as_slice(), *i)).collect();
        for _ in 0..self.config.epochs_per_increment {
            self.train_epoch(&samples)?;
        }
        Ok(())
    }

    fn recalibrate(&mut self) -> Result<()> {
        if self.calibration.is_empty() {
            self.threshold = None;
            return Ok(());
        }
        let scores: Vec<f64> = self
            .calibration
            .iter()
            .map(|x| self.decision_score(x))
            .collect();
        self.threshold = Some(calibrate_threshold(&scores, self.config.accepted_error)?);
        Ok(())
    }

    /// Max softmax probability over known-class outputs (the unknown unit
    /// is excluded; it is never a trained target).
    fn decision_score(&self, x: &[f64]) -> f64 {
        let p = self.forward(x);
        p[..self.labels.len()]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn softmax(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for l in logits.iter_mut() {
        *l = libm::exp(*l - max);
        sum += *l;
    }
    for l in logits.iter_mut() {
        *l /= sum;
    }
}

impl Predictor for AnnPredictor {
    fn dim(&self) -> usize {
        self.dim
    }

    fn known_labels(&self) -> BTreeSet<String> {
        self.labels.iter().cloned().collect()
    }

    fn fit_initial(
        &mut self,
        train: &[LabeledSample<'_>],
        calibration: &[&[f64]],
    ) -> Result<()> {
        if train.is_empty() {
            return Err(Error::EmptyInput("fit_initial"));
        }
        let mut labels: Vec<String> = train
            .iter()
            .map(|s| s.label.to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        labels.sort();
        self.grow_outputs(&labels)?;
        for s in train {
            if s.features.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    actual: s.features.len(),
                });
            }
            self.experience
                .insert(s.id.to_string(), (s.label.to_string(), s.features.to_vec()));
        }
        self.train_on_experience()?;
        self.calibration = calibration.iter().map(|x| x.to_vec()).collect();
        self.recalibrate()
    }

    fn observe_unlabeled(&mut self, _batch: &[UnlabeledSample<'_>]) -> Result<()> {
        // Purely supervised: unlabeled data never changes the state.
        Ok(())
    }

    fn predict(&self, sample: UnlabeledSample<'_>) -> Result<PredictionRecord> {
        if sample.features.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: sample.features.len(),
            });
        }
        let p = self.forward(sample.features);
        let known_max = p[..self.labels.len()]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let flagged = self
            .threshold
            .map(|t| t.is_novel(known_max))
            .unwrap_or(false);

        let mut scores: BTreeMap<String, f64> = self
            .labels
            .iter()
            .cloned()
            .zip(p.iter().copied())
            .collect();
        scores.insert(UNKNOWN_LABEL.to_string(), p[self.labels.len()]);

        // The argmax must carry the decision: move probability mass between
        // the top known class and the unknown unit when they disagree.
        let top_known = self
            .labels
            .iter()
            .enumerate()
            .max_by(|(ia, _), (ib, _)| {
                p[*ia].partial_cmp(&p[*ib]).unwrap().then(ib.cmp(ia))
            })
            .map(|(_, l)| l.clone());
        if let Some(top) = top_known {
            if flagged {
                let moved = scores[&top];
                *scores.get_mut(UNKNOWN_LABEL).unwrap() += moved;
                *scores.get_mut(&top).unwrap() = 0.0;
            } else if scores[UNKNOWN_LABEL] >= scores[&top] {
                let moved = scores[UNKNOWN_LABEL];
                *scores.get_mut(&top).unwrap() += moved;
                *scores.get_mut(UNKNOWN_LABEL).unwrap() = 0.0;
            }
        }
        Ok(PredictionRecord {
            sample_id: sample.id.to_string(),
            scores,
            novelty_flag: flagged,
        })
    }

    fn feedback_order(&self, batch: &[UnlabeledSample<'_>]) -> Result<Vec<String>> {
        let items: Vec<(String, f64)> = batch
            .iter()
            .map(|s| (s.id.to_string(), self.decision_score(s.features)))
            .collect();
        Ok(order_feedback(
            self.config.feedback_order,
            &items,
            derive_seed(self.config.seed, "feedback"),
        ))
    }

    fn receive_feedback(&mut self, batch: &[LabeledSample<'_>]) -> Result<()> {
        if batch.is_empty() {
            // No feedback, no update: the supervised baseline stands still.
            return Ok(());
        }
        let new_labels: Vec<String> = batch
            .iter()
            .map(|s| s.label.to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .filter(|l| !self.labels.contains(l))
            .collect();
        if !new_labels.is_empty() {
            self.grow_outputs(&new_labels)?;
        }
        for s in batch {
            self.experience
                .insert(s.id.to_string(), (s.label.to_string(), s.features.to_vec()));
        }
        self.train_on_experience()?;
        self.recalibrate()
    }

    fn wants_eval_as_unlabeled(&self) -> bool {
        self.config.use_eval_splits_as_unlabeled
    }

    fn checkpoint(&self) -> Checkpoint {
        let mut experience_ids = Vec::with_capacity(self.experience.len());
        let mut experience_labels = Vec::with_capacity(self.experience.len());
        let mut experience_vecs = Vec::with_capacity(self.experience.len() * self.dim);
        for (id, (label, vec)) in &self.experience {
            experience_ids.push(id.clone());
            experience_labels.push(label.clone());
            experience_vecs.extend_from_slice(vec);
        }
        let calibration: Vec<f64> = self.calibration.iter().flatten().copied().collect();
        Checkpoint {
            kind: PredictorKind::Ann,
            dim: self.dim,
            labels: self.labels.clone(),
            config: self.config.clone(),
            threshold: self.threshold,
            rng_state: self.rng.state(),
            string_blocks: alloc::vec![
                ("experience_ids".to_string(), experience_ids),
                ("experience_labels".to_string(), experience_labels),
            ],
            f64_blocks: alloc::vec![
                ("w1".to_string(), self.w1.clone()),
                ("b1".to_string(), self.b1.clone()),
                ("w2".to_string(), self.w2.clone()),
                ("b2".to_string(), self.b2.clone()),
                ("vw1".to_string(), self.vw1.clone()),
                ("vb1".to_string(), self.vb1.clone()),
                ("vw2".to_string(), self.vw2.clone()),
                ("vb2".to_string(), self.vb2.clone()),
                ("experience_vecs".to_string(), experience_vecs),
                ("calibration".to_string(), calibration),
            ],
        }
    }
}

impl AnnPredictor {
    pub fn from_checkpoint(cp: &Checkpoint) -> Result<Self> {
        if cp.kind != PredictorKind::Ann {
            return Err(Error::BadArgument("checkpoint kind is not ann".into()));
        }
        let mut p = AnnPredictor::new(cp.config.clone(), cp.dim)?;
        p.grow_outputs(&cp.labels)?;
        p.w1 = cp.floats("w1")?.to_vec();
        p.b1 = cp.floats("b1")?.to_vec();
        p.w2 = cp.floats("w2")?.to_vec();
        p.b2 = cp.floats("b2")?.to_vec();
        p.vw1 = cp.floats("vw1")?.to_vec();
        p.vb1 = cp.floats("vb1")?.to_vec();
        p.vw2 = cp.floats("vw2")?.to_vec();
        p.vb2 = cp.floats("vb2")?.to_vec();
        let expected = [
            (p.w1.len(), p.hidden * p.dim),
            (p.b1.len(), p.hidden),
            (p.w2.len(), (p.labels.len() + 1) * p.hidden),
            (p.b2.len(), p.labels.len() + 1),
        ];
        for (actual, want) in expected {
            if actual != want {
                return Err(Error::LengthMismatch {
                    expected: want,
                    actual,
                });
            }
        }
        let ids = cp.strings("experience_ids")?;
        let labels = cp.strings("experience_labels")?;
        let vecs = cp.floats("experience_vecs")?;
        if ids.len() != labels.len() || vecs.len() != ids.len() * cp.dim {
            return Err(Error::LengthMismatch {
                expected: ids.len() * cp.dim,
                actual: vecs.len(),
            });
        }
        for (i, (id, label)) in ids.iter().zip(labels).enumerate() {
            p.experience.insert(
                id.clone(),
                (label.clone(), vecs[i * cp.dim..(i + 1) * cp.dim].to_vec()),
            );
        }
        let calib = cp.floats("calibration")?;
        p.calibration = calib.chunks(cp.dim).map(|c| c.to_vec()).collect();
        p.threshold = cp.threshold;
        p.rng = SplitMix64::from_state(cp.rng_state);
        Ok(p)
    }
}
