//! Feature screening and greedy forward selection, scored by device-level
//! k-fold cross-validation so no device's slots appear on both sides of a
//! fold.

use crate::features::{FeatureId, LabeledSlot};
use crate::linear::{fit_linear_model, LinearError, TrainConfig};
use crate::types::{Label, MacAddr};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SelectionError {
    #[error("need at least k devices and k >= 2 (have {n} devices, k = {k})")]
    TooFewDevices { n: usize, k: usize },
    #[error("fold {fold} leaves a single-class training side")]
    DegenerateFold { fold: usize },
    #[error("no feature passed screening")]
    EmptyPoolAfterScreening,
    #[error("invalid feature set: {0}")]
    InvalidFeatureSet(String),
    #[error("training failed: {0}")]
    Train(String),
}

/// Knobs for screening and greedy selection.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct SelectionConfig {
    /// Cross-validation folds.
    pub k: usize,
    pub seed: u64,
    /// Minimum relative F1 gain, (new - cur) / (1 - cur), to keep extending.
    pub alpha: f64,
    /// Single-feature F1 a feature must exceed to enter the candidate pool.
    pub screen_threshold: f64,
    pub train: TrainConfig,
}

impl SelectionConfig {
    pub fn new(seed: u64, slot_width: u32) -> Self {
        SelectionConfig {
            k: 5,
            seed,
            alpha: 0.01,
            screen_threshold: 0.5,
            train: TrainConfig::new(seed, slot_width),
        }
    }
}

/// Splits devices into k folds: devices are deduplicated, sorted, shuffled
/// with a seeded generator, and dealt round-robin. Deterministic in
/// (devices-as-set, k, seed); input order does not matter.
pub fn kfold_device_split(
    devices: &[MacAddr],
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<MacAddr>>, SelectionError> {
    let mut sorted: Vec<MacAddr> = devices.to_vec();
    sorted.sort();
    sorted.dedup();
    let n = sorted.len();
    if k < 2 || n < k {
        return Err(SelectionError::TooFewDevices { n, k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sorted.shuffle(&mut rng);
    let mut folds = vec![Vec::new(); k];
    for (i, mac) in sorted.into_iter().enumerate() {
        folds[i % k].push(mac);
    }
    Ok(folds)
}

fn f1_of_predictions(pairs: &[(Label, Label)]) -> f64 {
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut fn_ = 0u64;
    for (truth, pred) in pairs {
        match (truth, pred) {
            (Label::IoT, Label::IoT) => tp += 1,
            (Label::NoT, Label::IoT) => fp += 1,
            (Label::IoT, Label::NoT) => fn_ += 1,
            (Label::NoT, Label::NoT) => {}
        }
    }
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Mean k-fold F1 of a feature set. Each fold trains on the other folds'
/// devices and predicts the held-out devices' slots. A fold whose training
/// side has no observed values for some feature contributes an F1 of 0; a
/// fold whose training side is single-class is an error.
pub fn score_feature_set(
    slots: &[LabeledSlot],
    feature_ids: &[FeatureId],
    config: &SelectionConfig,
) -> Result<f64, SelectionError> {
    if feature_ids.is_empty() {
        return Err(SelectionError::InvalidFeatureSet("empty feature set".into()));
    }
    for (i, fid) in feature_ids.iter().enumerate() {
        if feature_ids[..i].contains(fid) {
            return Err(SelectionError::InvalidFeatureSet(format!("duplicate feature {fid}")));
        }
    }
    let devices: Vec<MacAddr> = slots.iter().map(|s| s.slot.device_key).collect();
    let folds = kfold_device_split(&devices, config.k, config.seed)?;
    let mut f1_sum = 0.0;
    for (fold_idx, fold) in folds.iter().enumerate() {
        let in_fold = |s: &LabeledSlot| fold.contains(&s.slot.device_key);
        let train: Vec<&LabeledSlot> = slots.iter().filter(|s| !in_fold(s)).collect();
        let test: Vec<&LabeledSlot> = slots.iter().filter(|s| in_fold(s)).collect();
        let has_both = train.iter().any(|s| s.label == Label::IoT)
            && train.iter().any(|s| s.label == Label::NoT);
        if !has_both {
            return Err(SelectionError::DegenerateFold { fold: fold_idx });
        }
        match fit_linear_model(&train, feature_ids, &config.train) {
            Ok(model) => {
                let mut pairs = Vec::with_capacity(test.len());
                for s in &test {
                    let p = model
                        .predict(&s.slot)
                        .map_err(|e| SelectionError::Train(e.to_string()))?;
                    pairs.push((s.label, p.label));
                }
                f1_sum += f1_of_predictions(&pairs);
            }
            // No training data at all for a feature: the fold scores zero.
            Err(LinearError::AllMissing(_)) => {}
            Err(e) => return Err(SelectionError::Train(e.to_string())),
        }
    }
    Ok(f1_sum / config.k as f64)
}

/// One feature set the search evaluated, with its cross-validated F1.
#[derive(Clone, PartialEq, Debug, Serialize)]
pub struct ScoredSet {
    pub set: Vec<FeatureId>,
    pub f1: f64,
}

#[derive(Clone, PartialEq, Debug, Serialize)]
pub struct SelectionResult {
    pub selected: Vec<FeatureId>,
    /// CV F1 of the final selected set.
    pub selected_f1: f64,
    /// Single-feature CV F1 for every feature, in canonical order.
    pub single_scores: Vec<(FeatureId, f64)>,
    /// Features whose single score exceeded the screening threshold.
    pub screened: Vec<FeatureId>,
    /// Every set the search scored, in evaluation order: first the singles,
    /// then each candidate extension the greedy rounds tried.
    pub chain: Vec<ScoredSet>,
}

/// Greedy forward selection: screen singles, seed with the best one, then
/// keep adding the best remaining candidate while the relative F1 gain is at
/// least alpha. Ties prefer the feature earliest in canonical order.
pub fn greedy_select(
    slots: &[LabeledSlot],
    config: &SelectionConfig,
) -> Result<SelectionResult, SelectionError> {
    let mut chain = Vec::new();
    let mut single_scores = Vec::with_capacity(FeatureId::ALL.len());
    for fid in FeatureId::ALL {
        let score = score_feature_set(slots, &[fid], config)?;
        chain.push(ScoredSet { set: vec![fid], f1: score });
        single_scores.push((fid, score));
    }
    let screened: Vec<FeatureId> = single_scores
        .iter()
        .filter(|(_, s)| *s > config.screen_threshold)
        .map(|(f, _)| *f)
        .collect();
    if screened.is_empty() {
        return Err(SelectionError::EmptyPoolAfterScreening);
    }

    // Seed: best single, strict > so canonical order wins ties.
    let (mut best_fid, mut best_f1) = (screened[0], f64::NEG_INFINITY);
    for &fid in &screened {
        let s = single_scores[fid.index()].1;
        if s > best_f1 {
            best_fid = fid;
            best_f1 = s;
        }
    }
    let mut selected = vec![best_fid];
    let mut cur_f1 = best_f1;

    while cur_f1 < 1.0 {
        let mut best_cand: Option<(FeatureId, f64)> = None;
        for &fid in &screened {
            if selected.contains(&fid) {
                continue;
            }
            let mut candidate = selected.clone();
            candidate.push(fid);
            let s = score_feature_set(slots, &candidate, config)?;
            chain.push(ScoredSet { set: candidate, f1: s });
            if best_cand.is_none_or(|(_, bs)| s > bs) {
                best_cand = Some((fid, s));
            }
        }
        let Some((fid, s)) = best_cand else {
            break; // pool exhausted
        };
        let gain = (s - cur_f1) / (1.0 - cur_f1);
        if gain < config.alpha {
            break;
        }
        selected.push(fid);
        cur_f1 = s;
    }

    Ok(SelectionResult { selected, selected_f1: cur_f1, single_scores, screened, chain })
}

/// Machine-readable account of a selection run: the slot width, the features
/// that survived screening with their single scores, every set evaluated, and
/// the final choice.
pub fn selection_report_json(
    config: &SelectionConfig,
    result: &SelectionResult,
) -> serde_json::Value {
    let screened: serde_json::Map<String, serde_json::Value> = result
        .screened
        .iter()
        .map(|f| (f.to_string(), result.single_scores[f.index()].1.into()))
        .collect();
    serde_json::json!({
        "slot_width": config.train.slot_width,
        "screened": screened,
        "chain": result.chain,
        "selected": result.selected,
    })
}
