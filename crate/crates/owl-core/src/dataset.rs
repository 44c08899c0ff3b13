//! Core domain types shared by every other module: samples, labels, splits,
//! plans, and feature stores.
//!
//! All types are immutable value objects after construction and safe to share
//! across threads.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::is_reserved_label;

/// Data split a sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "validation" => Some(Split::Validation),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// One labeled sample: identity, class label, split, release index, and
/// free-form annotation tags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleRecord {
    pub id: String,
    pub label: String,
    pub split: Split,
    /// Dataset-release index this sample first appeared in (0 = earliest).
    pub source: u32,
    /// Optional annotation tags, e.g. group keys for ablation studies.
    pub metadata: BTreeMap<String, String>,
}

impl SampleRecord {
    pub fn new(id: impl Into<String>, label: impl Into<String>, split: Split) -> Self {
        SampleRecord {
            id: id.into(),
            label: label.into(),
            split,
            source: 0,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_source(mut self, source: u32) -> Self {
        self.source = source;
        self
    }
}

/// An ordered collection of samples with unique ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub records: Vec<SampleRecord>,
}

impl Manifest {
    pub fn new(records: Vec<SampleRecord>) -> Self {
        Manifest { records }
    }

    /// Check the manifest's own invariants: unique nonempty ids, nonempty
    /// labels outside the reserved unknown namespace.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        for rec in &self.records {
            if rec.id.is_empty() {
                problems.push(format!("record with label {:?} has an empty id", rec.label));
            } else if !seen.insert(rec.id.as_str()) {
                problems.push(format!("duplicate sample id {:?}", rec.id));
            }
            if rec.label.is_empty() {
                problems.push(format!("sample {:?} has an empty label", rec.id));
            } else if is_reserved_label(&rec.label) {
                problems.push(format!(
                    "sample {:?} uses reserved label {:?}",
                    rec.id, rec.label
                ));
            }
        }
        problems
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Map from sample id to its record, for label/metadata lookups.
    pub fn by_id(&self) -> BTreeMap<&str, &SampleRecord> {
        self.records.iter().map(|r| (r.id.as_str(), r)).collect()
    }

    /// All distinct labels in the manifest.
    pub fn labels(&self) -> BTreeSet<String> {
        self.records.iter().map(|r| r.label.clone()).collect()
    }
}

/// The sample and class schedule for a single increment `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IncrementPlan {
    pub index: usize,
    /// Classes known when the increment begins.
    pub known_labels: BTreeSet<String>,
    /// Classes introduced by this increment.
    pub novel_labels: BTreeSet<String>,
    pub train_ids: Vec<String>,
    pub validation_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

impl IncrementPlan {
    pub fn empty(index: usize) -> Self {
        IncrementPlan {
            index,
            known_labels: BTreeSet::new(),
            novel_labels: BTreeSet::new(),
            train_ids: Vec::new(),
            validation_ids: Vec::new(),
            test_ids: Vec::new(),
        }
    }

    pub fn ids_for(&self, split: Split) -> &[String] {
        match split {
            Split::Train => &self.train_ids,
            Split::Validation => &self.validation_ids,
            Split::Test => &self.test_ids,
        }
    }
}

/// A full incremental experiment schedule.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExperimentPlan {
    pub seed: u64,
    pub label_universe: BTreeSet<String>,
    pub increments: Vec<IncrementPlan>,
}

/// Sample id -> d-dimensional feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl FeatureStore {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "feature dimension must be positive");
        FeatureStore {
            dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<f64>) -> crate::error::Result<()> {
        if vector.len() != self.dim {
            return Err(crate::Error::DimensionMismatch {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(crate::Error::NonFinite("feature vector"));
        }
        self.vectors.insert(id.into(), vector);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.vectors.get(id).map(|v| v.as_slice())
    }

    /// Fetch a vector, naming the offending id on a miss.
    pub fn require(&self, id: &str) -> crate::error::Result<&[f64]> {
        self.get(id)
            .ok_or_else(|| crate::Error::MissingFeature(String::from(id)))
    }

    /// Iterate in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

/// A single prediction: per-label scores plus the predictor's novelty call.
///
/// The map's argmax (deterministic ties: lexicographically smallest label)
/// is the predicted top-1 label; predictors construct the map so the argmax
/// agrees with their decision.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub sample_id: String,
    pub scores: BTreeMap<String, f64>,
    pub novelty_flag: bool,
}

impl PredictionRecord {
    /// The top-1 label: highest score, ties broken by smallest label.
    ///
    /// The scores map is never empty by construction, so this always yields.
    pub fn argmax(&self) -> &str {
        argmax_label(&self.scores).expect("scores map is nonempty")
    }

    /// Labels sorted by descending score (ties: ascending label).
    pub fn ranking(&self) -> Vec<&str> {
        let mut pairs: Vec<(&str, f64)> = self
            .scores
            .iter()
            .map(|(k, v)| (k.as_str(), *v))
            .collect();
        pairs.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(b.0)));
        pairs.into_iter().map(|(k, _)| k).collect()
    }
}

/// Highest-score label with deterministic tie-breaking (smallest label wins).
pub fn argmax_label(scores: &BTreeMap<String, f64>) -> Option<&str> {
    let mut best: Option<(&str, f64)> = None;
    for (label, &score) in scores {
        match best {
            None => best = Some((label, score)),
            Some((_, s)) if score > s => best = Some((label, score)),
            _ => {}
        }
    }
    best.map(|(l, _)| l)
}

/// Check every `ExperimentPlan` invariant against its source manifest.
///
/// Violations are data, not errors: an empty result means the plan is valid.
pub fn validate_plan(plan: &ExperimentPlan, manifest: &Manifest) -> Vec<String> {
    let mut violations = Vec::new();
    let by_id = manifest.by_id();

    // Introduction increment per label, for the no-early-appearance rule.
    let mut introduced_at: BTreeMap<&str, usize> = BTreeMap::new();
    for inc in &plan.increments {
        for label in &inc.novel_labels {
            if let Some(prev) = introduced_at.insert(label.as_str(), inc.index) {
                violations.push(format!(
                    "disjointness: label {label:?} is novel in increments {prev} and {}",
                    inc.index
                ));
            }
        }
    }

    for inc in &plan.increments {
        for label in &inc.novel_labels {
            if inc.known_labels.contains(label) {
                violations.push(format!(
                    "increment {}: label {label:?} is both known and novel",
                    inc.index
                ));
            }
        }
        for ids in [&inc.train_ids, &inc.validation_ids, &inc.test_ids] {
            for id in ids {
                match by_id.get(id.as_str()) {
                    None => violations.push(format!(
                        "increment {}: id {id:?} does not exist in the manifest",
                        inc.index
                    )),
                    Some(rec) => {
                        if let Some(&intro) = introduced_at.get(rec.label.as_str()) {
                            if inc.index < intro {
                                violations.push(format!(
                                    "increment {}: sample {id:?} of label {:?} appears before \
                                     its introduction at increment {intro}",
                                    inc.index, rec.label
                                ));
                            }
                        }
                    }
                }
            }
        }
    }

    // Known-set chaining across consecutive increments.
    for pair in plan.increments.windows(2) {
        let (prev, next) = (&pair[0], &pair[1]);
        let expected: BTreeSet<&String> = prev.known_labels.union(&prev.novel_labels).collect();
        let actual: BTreeSet<&String> = next.known_labels.iter().collect();
        if expected != actual {
            violations.push(format!(
                "increment {}: known_labels is not known_labels({}) \u{222a} novel_labels({})",
                next.index, prev.index, prev.index
            ));
        }
    }

    violations
}
