//! Dataset-release unification and incremental experiment planning.
//!
//! Releases are merged with "most recent label first, first come first
//! assigned split" semantics, then each release is carved into increments:
//! known classes are stratified across the release's increments, unknown
//! classes are introduced most-frequent-first on a per-increment quota, and
//! each newly introduced class's training samples are dealt forward so the
//! class stays present through the end of the experiment.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::dataset::{ExperimentPlan, IncrementPlan, Manifest, SampleRecord, Split};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, SplitMix64};

/// How many increments one dataset release is split into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StageSpec {
    /// Manifest release index this stage consumes.
    pub source: u32,
    /// Number of increments the release is split into (>= 1).
    pub increments: usize,
}

/// How unknown classes are spread over a stage's increments.
///
/// `Ceiling` puts `ceil(|U|/N)` classes in each of the first `N-1` increments
/// and the remainder in the last, which is the schedule the published class
/// tables follow. `Floor` is the literal floor-quota reading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum QuotaRule {
    #[default]
    Ceiling,
    Floor,
}

/// Merge dataset releases into one manifest, one record per distinct id.
///
/// The label comes from the latest release containing the id, the split from
/// the earliest, `source` is the earliest release index, and metadata merges
/// latest-wins per key. Record order is first appearance.
pub fn unify_labels(manifests: &[Manifest]) -> Manifest {
    let mut order: Vec<&str> = Vec::new();
    let mut merged: BTreeMap<&str, SampleRecord> = BTreeMap::new();
    for (release, manifest) in manifests.iter().enumerate() {
        for rec in &manifest.records {
            match merged.get_mut(rec.id.as_str()) {
                None => {
                    let mut first = rec.clone();
                    first.source = release as u32;
                    order.push(rec.id.as_str());
                    merged.insert(rec.id.as_str(), first);
                }
                Some(existing) => {
                    // Later release: label wins, split and source stay.
                    existing.label = rec.label.clone();
                    for (k, v) in &rec.metadata {
                        existing.metadata.insert(k.clone(), v.clone());
                    }
                }
            }
        }
    }
    Manifest::new(
        order
            .into_iter()
            .map(|id| merged.remove(id).expect("id recorded on first sight"))
            .collect(),
    )
}

/// Shuffle each label's ids with a label-derived seeded stream and deal them
/// round-robin into `k` parts.
///
/// Per label, part sizes differ by at most one; the parts partition the
/// input exactly. Seeds derive from the label hash, so the result does not
/// depend on label iteration order.
pub fn stratified_partition(
    ids_by_label: &BTreeMap<String, Vec<String>>,
    k: usize,
    seed: u64,
) -> Vec<Vec<String>> {
    assert!(k >= 1, "stratified_partition requires k >= 1");
    let mut parts: Vec<Vec<String>> = (0..k).map(|_| Vec::new()).collect();
    for (label, ids) in ids_by_label {
        let mut shuffled: Vec<&String> = ids.iter().collect();
        let mut rng = SplitMix64::new(derive_seed(seed, label));
        rng.shuffle(&mut shuffled);
        for (i, id) in shuffled.into_iter().enumerate() {
            parts[i % k].push(id.clone());
        }
    }
    parts
}

struct StageRecords<'a> {
    spec: StageSpec,
    /// First global increment of the stage.
    base: usize,
    records: Vec<&'a SampleRecord>,
}

/// Generate the full incremental schedule for a unified manifest.
///
/// `start_known` seeds the known set; every record's `source` must be
/// covered by `stages` (ordered by release). See [`QuotaRule`] for how
/// unknown classes spread over a stage.
pub fn plan_increments(
    manifest: &Manifest,
    start_known: &BTreeSet<String>,
    stages: &[StageSpec],
    seed: u64,
    quota_rule: QuotaRule,
) -> Result<ExperimentPlan> {
    if stages.is_empty() {
        return Err(Error::EmptyInput("stages"));
    }
    let mut sorted_stages: Vec<StageSpec> = stages.to_vec();
    sorted_stages.sort_by_key(|s| s.source);
    for pair in sorted_stages.windows(2) {
        if pair[0].source == pair[1].source {
            return Err(Error::BadArgument(alloc::format!(
                "duplicate stage for source {}",
                pair[0].source
            )));
        }
    }

    let total_increments: usize = sorted_stages.iter().map(|s| s.increments).sum();
    let mut base = 0;
    let mut stage_records: Vec<StageRecords<'_>> = sorted_stages
        .iter()
        .map(|spec| {
            let sr = StageRecords {
                spec: *spec,
                base,
                records: Vec::new(),
            };
            base += spec.increments;
            sr
        })
        .collect();

    let source_to_stage: BTreeMap<u32, usize> = sorted_stages
        .iter()
        .enumerate()
        .map(|(i, s)| (s.source, i))
        .collect();
    for rec in &manifest.records {
        match source_to_stage.get(&rec.source) {
            Some(&idx) => stage_records[idx].records.push(rec),
            None => {
                return Err(Error::BadArgument(alloc::format!(
                    "record {:?} has source {} not covered by any stage",
                    rec.id,
                    rec.source
                )))
            }
        }
    }
    for stage in &stage_records {
        if stage.records.is_empty() {
            return Err(Error::BadArgument(alloc::format!(
                "stage for source {} has no records",
                stage.spec.source
            )));
        }
    }

    let stage0_labels: BTreeSet<&str> = stage_records[0]
        .records
        .iter()
        .map(|r| r.label.as_str())
        .collect();
    for label in start_known {
        if !stage0_labels.contains(label.as_str()) {
            return Err(Error::BadLabel(alloc::format!(
                "start-known label {label:?} is absent from the first stage"
            )));
        }
    }

    let mut increments: Vec<IncrementPlan> = (0..total_increments)
        .map(IncrementPlan::empty)
        .collect();
    let mut known_running: BTreeSet<String> = start_known.clone();
    // Introduction increment per label; start-known classes count as
    // present from increment 0.
    let mut first_present: BTreeMap<String, usize> =
        start_known.iter().map(|l| (l.clone(), 0)).collect();

    for stage in &stage_records {
        let n = stage.spec.increments;

        // Partition this stage's train records into known-class samples and
        // per-unknown-label groups.
        let mut known_train: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut unknown_train: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut unknown_labels: BTreeSet<String> = BTreeSet::new();
        for rec in &stage.records {
            if !known_running.contains(&rec.label) {
                unknown_labels.insert(rec.label.clone());
            }
            if rec.split == Split::Train {
                let bucket = if known_running.contains(&rec.label) {
                    &mut known_train
                } else {
                    &mut unknown_train
                };
                bucket
                    .entry(rec.label.clone())
                    .or_default()
                    .push(rec.id.clone());
            }
        }

        // Known classes: stratified across the stage's increments.
        let parts = stratified_partition(&known_train, n, seed);
        for (j, part) in parts.into_iter().enumerate() {
            increments[stage.base + j].train_ids.extend(part);
        }

        // Unknown classes: most frequent training class first, ties by label.
        let mut ordered_unknowns: Vec<&String> = unknown_labels.iter().collect();
        ordered_unknowns.sort_by(|a, b| {
            let fa = unknown_train.get(*a).map_or(0, Vec::len);
            let fb = unknown_train.get(*b).map_or(0, Vec::len);
            fb.cmp(&fa).then(a.cmp(b))
        });

        let quota = match quota_rule {
            QuotaRule::Ceiling => ordered_unknowns.len().div_ceil(n),
            QuotaRule::Floor => ordered_unknowns.len() / n,
        };
        let mut cursor = 0;
        for j in 0..n {
            let t = stage.base + j;
            let take = if j + 1 == n {
                ordered_unknowns.len() - cursor
            } else {
                quota.min(ordered_unknowns.len() - cursor)
            };
            for label in &ordered_unknowns[cursor..cursor + take] {
                let label = (*label).clone();
                increments[t].novel_labels.insert(label.clone());
                first_present.insert(label.clone(), t);

                // Spread the class's training samples forward: one part per
                // remaining increment of the experiment, the first kept here.
                let ids = unknown_train.remove(&label).unwrap_or_default();
                let remaining = total_increments - t;
                if ids.len() < remaining {
                    increments[t].train_ids.extend(ids);
                } else {
                    let single: BTreeMap<String, Vec<String>> =
                        [(label.clone(), ids)].into_iter().collect();
                    let parts = stratified_partition(&single, remaining, seed);
                    for (offset, part) in parts.into_iter().enumerate() {
                        increments[t + offset].train_ids.extend(part);
                    }
                }
            }
            cursor += take;
        }

        known_running.extend(unknown_labels);
    }

    // Evaluation samples: each goes to the increment where its class is
    // first present (introduction increment; 0 for start-known classes).
    for rec in &manifest.records {
        if rec.split == Split::Train {
            continue;
        }
        let t = *first_present
            .get(&rec.label)
            .expect("every label was either start-known or introduced");
        let inc = &mut increments[t];
        match rec.split {
            Split::Train => unreachable!(),
            Split::Validation => inc.validation_ids.push(rec.id.clone()),
            Split::Test => inc.test_ids.push(rec.id.clone()),
        }
    }

    // Known/novel chaining from the start set.
    let mut known: BTreeSet<String> = start_known.clone();
    for inc in &mut increments {
        inc.known_labels = known.clone();
        known.extend(inc.novel_labels.iter().cloned());
    }

    Ok(ExperimentPlan {
        seed,
        label_universe: manifest.labels(),
        increments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::validate_plan;
    use alloc::format;
    use alloc::string::ToString;
    use alloc::vec;

    fn record(id: &str, label: &str, split: Split, source: u32) -> SampleRecord {
        SampleRecord::new(id, label, split).with_source(source)
    }

    #[test]
    fn unify_takes_latest_label_earliest_split() {
        let r0 = Manifest::new(vec![record("v1", "brushing hair", Split::Train, 9)]);
        let r1 = Manifest::new(vec![record("v1", "combing hair", Split::Validation, 9)]);
        let unified = unify_labels(&[r0, r1]);
        assert_eq!(unified.records.len(), 1);
        let rec = &unified.records[0];
        assert_eq!(rec.label, "combing hair");
        assert_eq!(rec.split, Split::Train);
        assert_eq!(rec.source, 0);
    }

    #[test]
    fn unify_single_manifest_is_identity_modulo_source() {
        let m = Manifest::new(vec![
            record("a", "A", Split::Train, 0),
            record("b", "B", Split::Test, 0),
        ]);
        assert_eq!(unify_labels(core::slice::from_ref(&m)), m);
    }

    #[test]
    fn unify_matches_per_id_scan_oracle() {
        // Three releases with overlapping ids.
        let mut rng = SplitMix64::new(31);
        let labels = ["l0", "l1", "l2", "l3"];
        let splits = [Split::Train, Split::Validation, Split::Test];
        let releases: Vec<Manifest> = (0..3)
            .map(|_| {
                let mut records = Vec::new();
                for i in 0..40 {
                    if rng.next_below(2) == 0 {
                        records.push(record(
                            &format!("id{i}"),
                            labels[rng.next_below(4) as usize],
                            splits[rng.next_below(3) as usize],
                            0,
                        ));
                    }
                }
                Manifest::new(records)
            })
            .collect();
        let unified = unify_labels(&releases);

        // Brute-force per-id oracle.
        for rec in &unified.records {
            let present: Vec<(usize, &SampleRecord)> = releases
                .iter()
                .enumerate()
                .filter_map(|(i, m)| {
                    m.records.iter().find(|r| r.id == rec.id).map(|r| (i, r))
                })
                .collect();
            let (earliest_idx, earliest) = present[0];
            let (_, latest) = present[present.len() - 1];
            assert_eq!(rec.label, latest.label);
            assert_eq!(rec.split, earliest.split);
            assert_eq!(rec.source as usize, earliest_idx);
        }
        let all_ids: BTreeSet<&str> = releases
            .iter()
            .flat_map(|m| m.records.iter().map(|r| r.id.as_str()))
            .collect();
        assert_eq!(unified.records.len(), all_ids.len());
    }

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn partition_even_split() {
        let mut by_label = BTreeMap::new();
        by_label.insert("A".to_string(), ids("a", 4));
        let parts = stratified_partition(&by_label, 2, 7);
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].len(), 2);
        assert_eq!(parts[1].len(), 2);
    }

    #[test]
    fn partition_remainder_case() {
        let mut by_label = BTreeMap::new();
        by_label.insert("A".to_string(), ids("a", 5));
        by_label.insert("B".to_string(), ids("b", 3));
        let parts = stratified_partition(&by_label, 2, 7);
        for part in &parts {
            let a = part.iter().filter(|id| id.starts_with('a')).count();
            let b = part.iter().filter(|id| id.starts_with('b')).count();
            assert!(a == 2 || a == 3);
            assert!(b == 1 || b == 2);
        }
    }

    #[test]
    fn partition_is_exact_with_per_label_balance() {
        let mut rng = SplitMix64::new(123);
        let mut by_label = BTreeMap::new();
        for l in 0..50 {
            let label = format!("label{l:02}");
            let count = 1 + rng.next_below(30) as usize;
            by_label.insert(label.clone(), ids(&label, count));
        }
        let k = 7;
        let parts = stratified_partition(&by_label, k, 99);

        let mut seen: BTreeSet<&String> = BTreeSet::new();
        for part in &parts {
            for id in part {
                assert!(seen.insert(id), "id {id} appears twice");
            }
        }
        let total: usize = by_label.values().map(Vec::len).sum();
        assert_eq!(seen.len(), total);

        for (label, label_ids) in &by_label {
            let counts: Vec<usize> = parts
                .iter()
                .map(|p| p.iter().filter(|id| id.starts_with(label.as_str())).count())
                .collect();
            let min = counts.iter().min().unwrap();
            let max = counts.iter().max().unwrap();
            assert!(max - min <= 1, "label {label} spread {counts:?}");
            assert_eq!(counts.iter().sum::<usize>(), label_ids.len());
        }
    }

    /// Manifest shaped like the published two-release class table: 409
    /// starting classes, then 227 and 82 novel classes over 5 increments
    /// each.
    fn class_table_manifest() -> (Manifest, BTreeSet<String>) {
        let mut records = Vec::new();
        let mut start_known = BTreeSet::new();
        let mut rng = SplitMix64::new(1);
        for c in 0..409 {
            let label = format!("known_{c:03}");
            start_known.insert(label.clone());
            for i in 0..3 {
                records.push(record(&format!("{label}_t{i}"), &label, Split::Train, 0));
            }
        }
        for c in 0..227 {
            let label = format!("novel600_{c:03}");
            let count = 2 + rng.next_below(8) as usize;
            for i in 0..count {
                records.push(record(&format!("{label}_t{i}"), &label, Split::Train, 1));
            }
        }
        for c in 0..82 {
            let label = format!("novel700_{c:02}");
            let count = 2 + rng.next_below(8) as usize;
            for i in 0..count {
                records.push(record(&format!("{label}_t{i}"), &label, Split::Train, 2));
            }
        }
        (Manifest::new(records), start_known)
    }

    #[test]
    fn class_table_schedule_is_reproduced() {
        let (manifest, start_known) = class_table_manifest();
        let stages = [
            StageSpec { source: 0, increments: 1 },
            StageSpec { source: 1, increments: 5 },
            StageSpec { source: 2, increments: 5 },
        ];
        let plan =
            plan_increments(&manifest, &start_known, &stages, 13, QuotaRule::Ceiling).unwrap();
        let novel: Vec<usize> = plan.increments.iter().map(|i| i.novel_labels.len()).collect();
        let known: Vec<usize> = plan.increments.iter().map(|i| i.known_labels.len()).collect();
        assert_eq!(novel, [0, 46, 46, 46, 46, 43, 17, 17, 17, 17, 14]);
        assert_eq!(
            known,
            [409, 409, 455, 501, 547, 593, 636, 653, 670, 687, 704]
        );
        assert!(validate_plan(&plan, &manifest).is_empty());
    }

    #[test]
    fn floor_rule_moves_remainder_to_final_increment() {
        let (manifest, start_known) = class_table_manifest();
        let stages = [
            StageSpec { source: 0, increments: 1 },
            StageSpec { source: 1, increments: 5 },
            StageSpec { source: 2, increments: 5 },
        ];
        let plan =
            plan_increments(&manifest, &start_known, &stages, 13, QuotaRule::Floor).unwrap();
        let novel: Vec<usize> = plan.increments.iter().map(|i| i.novel_labels.len()).collect();
        assert_eq!(novel, [0, 45, 45, 45, 45, 47, 16, 16, 16, 16, 18]);
    }

    #[test]
    fn closed_world_single_increment() {
        let manifest = Manifest::new(vec![
            record("a0", "A", Split::Train, 0),
            record("a1", "A", Split::Test, 0),
            record("b0", "B", Split::Train, 0),
        ]);
        let known: BTreeSet<String> = ["A".to_string(), "B".to_string()].into();
        let stages = [StageSpec { source: 0, increments: 1 }];
        let plan = plan_increments(&manifest, &known, &stages, 5, QuotaRule::Ceiling).unwrap();
        assert_eq!(plan.increments.len(), 1);
        assert!(plan.increments[0].novel_labels.is_empty());
        assert_eq!(plan.increments[0].train_ids.len(), 2);
        assert_eq!(plan.increments[0].test_ids, ["a1"]);
        assert!(validate_plan(&plan, &manifest).is_empty());
    }

    #[test]
    fn frequency_orders_introduction_and_samples_spread_forward() {
        // 3 start-known classes plus two novel classes with train
        // frequencies 10 and 6: the 10-sample class comes first and its
        // samples appear in both later increments.
        let mut records = Vec::new();
        for label in ["A", "B", "C"] {
            for i in 0..4 {
                records.push(record(&format!("{label}{i}"), label, Split::Train, 0));
            }
        }
        for i in 0..10 {
            records.push(record(&format!("big{i}"), "big", Split::Train, 1));
        }
        for i in 0..6 {
            records.push(record(&format!("small{i}"), "small", Split::Train, 1));
        }
        let manifest = Manifest::new(records);
        let known: BTreeSet<String> =
            ["A".to_string(), "B".to_string(), "C".to_string()].into();
        let stages = [
            StageSpec { source: 0, increments: 1 },
            StageSpec { source: 1, increments: 2 },
        ];
        let plan = plan_increments(&manifest, &known, &stages, 42, QuotaRule::Ceiling).unwrap();

        assert_eq!(plan.increments[1].novel_labels.len(), 1);
        assert!(plan.increments[1].novel_labels.contains("big"));
        assert!(plan.increments[2].novel_labels.contains("small"));

        let big_in = |t: usize| {
            plan.increments[t]
                .train_ids
                .iter()
                .filter(|id| id.starts_with("big"))
                .count()
        };
        // "big" introduced at increment 1 of 3 total: dealt into 2 parts.
        assert_eq!(big_in(1), 5);
        assert_eq!(big_in(2), 5);
        // "small" introduced at the final increment keeps all its samples.
        let small_in_2 = plan.increments[2]
            .train_ids
            .iter()
            .filter(|id| id.starts_with("small"))
            .count();
        assert_eq!(small_in_2, 6);
        assert!(validate_plan(&plan, &manifest).is_empty());
    }

    #[test]
    fn tiny_novel_class_stays_in_introduction_increment() {
        let mut records = vec![record("a0", "A", Split::Train, 0)];
        // X is introduced at increment 2 of 4 with a single sample:
        // 1 < 2 remaining increments, so it is not dealt forward.
        records.push(record("x0", "X", Split::Train, 1));
        for i in 0..9 {
            records.push(record(&format!("y{i}"), "Y", Split::Train, 1));
        }
        let manifest = Manifest::new(records);
        let known: BTreeSet<String> = ["A".to_string()].into();
        let stages = [
            StageSpec { source: 0, increments: 1 },
            StageSpec { source: 1, increments: 3 },
        ];
        let plan = plan_increments(&manifest, &known, &stages, 8, QuotaRule::Ceiling).unwrap();
        // Y (9 samples) introduced first, X (1 sample) second.
        assert!(plan.increments[1].novel_labels.contains("Y"));
        assert!(plan.increments[2].novel_labels.contains("X"));
        assert!(plan.increments[2].train_ids.contains(&"x0".to_string()));
        assert!(!plan.increments[3].train_ids.iter().any(|id| id.starts_with('x')));
        // Y spreads from increment 1 through the end of the experiment.
        for t in 1..4 {
            assert!(
                plan.increments[t].train_ids.iter().any(|id| id.starts_with('y')),
                "Y missing from increment {t}"
            );
        }
        assert!(validate_plan(&plan, &manifest).is_empty());
    }

    #[test]
    fn eval_samples_follow_class_introduction() {
        let records = vec![
            record("a0", "A", Split::Train, 0),
            record("a1", "A", Split::Validation, 0),
            record("n0", "N", Split::Train, 1),
            record("n1", "N", Split::Train, 1),
            record("n2", "N", Split::Test, 1),
        ];
        let manifest = Manifest::new(records);
        let known: BTreeSet<String> = ["A".to_string()].into();
        let stages = [
            StageSpec { source: 0, increments: 1 },
            StageSpec { source: 1, increments: 1 },
        ];
        let plan = plan_increments(&manifest, &known, &stages, 3, QuotaRule::Ceiling).unwrap();
        assert_eq!(plan.increments[0].validation_ids, ["a1"]);
        assert_eq!(plan.increments[1].test_ids, ["n2"]);
        assert!(validate_plan(&plan, &manifest).is_empty());
    }

    #[test]
    fn planner_errors() {
        let manifest = Manifest::new(vec![record("a0", "A", Split::Train, 0)]);
        let stages = [StageSpec { source: 0, increments: 1 }];
        // start_known label absent from stage 0.
        let ghost: BTreeSet<String> = ["Z".to_string()].into();
        assert!(matches!(
            plan_increments(&manifest, &ghost, &stages, 1, QuotaRule::Ceiling),
            Err(Error::BadLabel(_))
        ));
        // A stage with no records.
        let known: BTreeSet<String> = ["A".to_string()].into();
        let stages2 = [
            StageSpec { source: 0, increments: 1 },
            StageSpec { source: 1, increments: 2 },
        ];
        assert!(plan_increments(&manifest, &known, &stages2, 1, QuotaRule::Ceiling).is_err());
        // Uncovered source.
        let manifest2 = Manifest::new(vec![
            record("a0", "A", Split::Train, 0),
            record("b0", "B", Split::Train, 7),
        ]);
        assert!(plan_increments(&manifest2, &known, &stages, 1, QuotaRule::Ceiling).is_err());
    }

    #[test]
    fn plan_is_deterministic() {
        let (manifest, start_known) = class_table_manifest();
        let stages = [
            StageSpec { source: 0, increments: 1 },
            StageSpec { source: 1, increments: 5 },
            StageSpec { source: 2, increments: 5 },
        ];
        let a = plan_increments(&manifest, &start_known, &stages, 77, QuotaRule::Ceiling).unwrap();
        let b = plan_increments(&manifest, &start_known, &stages, 77, QuotaRule::Ceiling).unwrap();
        assert_eq!(a, b);
        let c = plan_increments(&manifest, &start_known, &stages, 78, QuotaRule::Ceiling).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn train_samples_are_conserved() {
        let (manifest, start_known) = class_table_manifest();
        let stages = [
            StageSpec { source: 0, increments: 1 },
            StageSpec { source: 1, increments: 5 },
            StageSpec { source: 2, increments: 5 },
        ];
        let plan =
            plan_increments(&manifest, &start_known, &stages, 7, QuotaRule::Ceiling).unwrap();
        let mut seen: BTreeSet<&String> = BTreeSet::new();
        for inc in &plan.increments {
            for id in &inc.train_ids {
                assert!(seen.insert(id), "train id {id} planned twice");
            }
        }
        let train_total = manifest
            .records
            .iter()
            .filter(|r| r.split == Split::Train)
            .count();
        assert_eq!(seen.len(), train_total);
    }

    #[test]
    fn forward_persistence_for_large_novel_classes() {
        let (manifest, start_known) = class_table_manifest();
        let stages = [
            StageSpec { source: 0, increments: 1 },
            StageSpec { source: 1, increments: 5 },
            StageSpec { source: 2, increments: 5 },
        ];
        let plan =
            plan_increments(&manifest, &start_known, &stages, 21, QuotaRule::Ceiling).unwrap();
        let by_id = manifest.by_id();
        let total = plan.increments.len();

        let mut intro: BTreeMap<&str, usize> = BTreeMap::new();
        for inc in &plan.increments {
            for l in &inc.novel_labels {
                intro.insert(l, inc.index);
            }
        }
        let mut train_count: BTreeMap<&str, usize> = BTreeMap::new();
        for rec in &manifest.records {
            if rec.split == Split::Train {
                *train_count.entry(rec.label.as_str()).or_insert(0) += 1;
            }
        }
        for (label, &t) in &intro {
            let count = train_count.get(label).copied().unwrap_or(0);
            if count >= total - t {
                for inc in &plan.increments[t..] {
                    let here = inc
                        .train_ids
                        .iter()
                        .filter(|id| by_id[id.as_str()].label == *label)
                        .count();
                    assert!(
                        here >= 1,
                        "label {label} (n={count}) missing from increment {}",
                        inc.index
                    );
                }
            }
        }
    }
}
