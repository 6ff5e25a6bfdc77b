//! The per-slot linear classifier: mean imputation, standardization, and an
//! L2-regularized logistic regression trained by full-batch gradient descent
//! with a backtracking line search. Scoring is `θ₀ + Σ θᵢ·x̂ᵢ`; a positive
//! score means IoT.

use crate::features::{FeatureId, LabeledSlot, SlotFeatures};
use crate::types::{Label, MacAddr};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinearError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("no features selected")]
    NoFeatures,
    #[error("feature {0} appears more than once")]
    DuplicateFeature(FeatureId),
    #[error("training slots contain only one class")]
    SingleClass,
    #[error("feature {0} has no observed values in the training slots")]
    AllMissing(FeatureId),
    #[error("slot width {got} does not match the model's width {expected}")]
    WidthMismatch { expected: u32, got: u32 },
    #[error("invalid model: {0}")]
    Invalid(String),
}

/// Training provenance carried inside a saved model.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct ModelMeta {
    pub seed: u64,
    pub n_train_slots: usize,
    pub lambda: f64,
}

/// A trained traffic classifier. `theta[0]` is the intercept; entry `i+1`
/// weighs standardized feature `feature_ids[i]`. Serializes as a tagged JSON
/// object (`"kind":"linear"`, `"version":1`) so model files self-identify.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearModel {
    pub kind: String,
    pub version: u32,
    /// Slot width (seconds) the model was trained for.
    pub slot_width: u32,
    #[serde(rename = "features")]
    pub feature_ids: Vec<FeatureId>,
    pub theta: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Imputation values for features missing in a slot.
    pub defaults: Vec<f64>,
    pub meta: ModelMeta,
}

/// Verdict and the raw decision score it came from.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct Prediction {
    pub label: Label,
    pub score: f64,
}

impl LinearModel {
    pub const KIND: &'static str = "linear";
    pub const VERSION: u32 = 1;

    pub fn validate(&self) -> Result<(), LinearError> {
        if self.kind != Self::KIND {
            return Err(LinearError::Invalid(format!("kind {:?} is not \"linear\"", self.kind)));
        }
        if self.version != Self::VERSION {
            return Err(LinearError::Invalid(format!("unsupported version {}", self.version)));
        }
        let d = self.feature_ids.len();
        if d == 0 {
            return Err(LinearError::Invalid("model has no features".into()));
        }
        let mut seen = self.feature_ids.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != d {
            return Err(LinearError::Invalid("duplicate feature ids".into()));
        }
        if self.theta.len() != d + 1 {
            return Err(LinearError::Invalid(format!(
                "theta has {} entries for {} features",
                self.theta.len(),
                d
            )));
        }
        for (name, v) in [("mu", &self.mu), ("sigma", &self.sigma), ("defaults", &self.defaults)] {
            if v.len() != d {
                return Err(LinearError::Invalid(format!("{name} has {} entries for {d} features", v.len())));
            }
        }
        if self.theta.iter().chain(&self.mu).chain(&self.sigma).chain(&self.defaults).any(|v| !v.is_finite()) {
            return Err(LinearError::Invalid("non-finite parameter".into()));
        }
        if self.sigma.iter().any(|s| *s <= 0.0) {
            return Err(LinearError::Invalid("sigma entries must be positive".into()));
        }
        if self.slot_width == 0 {
            return Err(LinearError::Invalid("slot_width must be positive".into()));
        }
        Ok(())
    }

    fn check_width(&self, slot: &SlotFeatures) -> Result<(), LinearError> {
        if slot.width != self.slot_width {
            return Err(LinearError::WidthMismatch { expected: self.slot_width, got: slot.width });
        }
        Ok(())
    }

    /// Raw decision score for one slot: impute, standardize, dot with theta.
    pub fn score(&self, slot: &SlotFeatures) -> Result<f64, LinearError> {
        self.check_width(slot)?;
        let mut s = self.theta[0];
        for (i, &fid) in self.feature_ids.iter().enumerate() {
            let x = slot.get(fid).unwrap_or(self.defaults[i]);
            s += self.theta[i + 1] * (x - self.mu[i]) / self.sigma[i];
        }
        Ok(s)
    }

    /// IoT when the score is strictly positive.
    pub fn predict(&self, slot: &SlotFeatures) -> Result<Prediction, LinearError> {
        let score = self.score(slot)?;
        let label = if score > 0.0 { Label::IoT } else { Label::NoT };
        Ok(Prediction { label, score })
    }
}

/// Mean of the observed values; 0 when nothing was observed.
pub fn fit_defaults(values: &[Option<f64>]) -> f64 {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    if present.is_empty() {
        0.0
    } else {
        present.iter().sum::<f64>() / present.len() as f64
    }
}

/// Mean and population standard deviation of a column; a zero (or non-finite)
/// spread becomes 1 so standardization stays a no-op on constant columns.
pub fn fit_scaler(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mu = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
    let sigma = var.sqrt();
    if sigma > 0.0 && sigma.is_finite() {
        (mu, sigma)
    } else {
        (mu, 1.0)
    }
}

/// Everything that varies between training runs.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct TrainConfig {
    pub lambda: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    pub slot_width: u32,
}

impl TrainConfig {
    pub fn new(seed: u64, slot_width: u32) -> Self {
        TrainConfig { lambda: 1.0, max_iter: 10_000, tol: 1e-6, seed, slot_width }
    }
}

/// Optimization trace: `losses[0]` is the starting loss, then one entry per
/// accepted descent step. The sequence is strictly decreasing.
#[derive(Clone, PartialEq, Debug)]
pub struct TrainTrace {
    pub losses: Vec<f64>,
    pub converged: bool,
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean logistic loss with L2 penalty (intercept unregularized), and its
/// gradient. `xs` rows are standardized features without the intercept column;
/// `theta[0]` is the intercept. Public so callers can probe the optimization
/// surface directly (convergence diagnostics, gradient checks).
pub fn loss_and_grad(xs: &[Vec<f64>], y: &[f64], theta: &[f64], lambda: f64) -> (f64, Vec<f64>) {
    let n = xs.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; theta.len()];
    for (xi, &yi) in xs.iter().zip(y) {
        let s = theta[0] + xi.iter().zip(&theta[1..]).map(|(a, b)| a * b).sum::<f64>();
        let z = -yi * s;
        loss += softplus(z);
        let c = -yi * sigmoid(z);
        grad[0] += c;
        for (g, &xik) in grad[1..].iter_mut().zip(xi) {
            *g += c * xik;
        }
    }
    loss /= n;
    for g in grad.iter_mut() {
        *g /= n;
    }
    for k in 1..theta.len() {
        loss += lambda / (2.0 * n) * theta[k] * theta[k];
        grad[k] += lambda / n * theta[k];
    }
    (loss, grad)
}

/// Full-batch gradient descent from zero with a backtracking (Armijo) line
/// search; the accepted step doubles as the next trial step. Deterministic.
pub fn train_logreg(
    xs: &[Vec<f64>],
    y: &[f64],
    config: &TrainConfig,
) -> (Vec<f64>, TrainTrace) {
    let d = xs.first().map(|r| r.len()).unwrap_or(0);
    let mut theta = vec![0.0; d + 1];
    let (mut loss, mut grad) = loss_and_grad(xs, y, &theta, config.lambda);
    let mut losses = vec![loss];
    let mut step = 1.0f64;
    let mut converged = false;
    for _ in 0..config.max_iter {
        let grad_inf = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        if grad_inf < config.tol {
            converged = true;
            break;
        }
        let g2: f64 = grad.iter().map(|g| g * g).sum();
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t - step * g).collect();
            let (cand_loss, cand_grad) = loss_and_grad(xs, y, &cand, config.lambda);
            if cand_loss <= loss - 1e-4 * step * g2 {
                theta = cand;
                loss = cand_loss;
                grad = cand_grad;
                losses.push(loss);
                step *= 2.0;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // Step size underflowed: no further float-representable progress.
            break;
        }
    }
    (theta, TrainTrace { losses, converged })
}

/// Caps each device's contribution to the training set at `max_per_device`
/// slots. Kept slots are spread across that device's bandwidth range: slots
/// are ranked by bandwidth (missing ranks lowest), split into low/mid/high
/// thirds, and drawn round-robin from the thirds in slot-start order.
/// Devices are processed in MAC order, so the result is deterministic.
pub fn balance_slots(slots: &[LabeledSlot], max_per_device: usize) -> Vec<LabeledSlot> {
    let mut by_device: BTreeMap<MacAddr, Vec<&LabeledSlot>> = BTreeMap::new();
    for s in slots {
        by_device.entry(s.slot.device_key).or_default().push(s);
    }
    let mut out = Vec::new();
    for (_, mut dev_slots) in by_device {
        if dev_slots.len() <= max_per_device {
            out.extend(dev_slots.into_iter().cloned());
            continue;
        }
        let bw = |s: &LabeledSlot| s.slot.get(FeatureId::BandwidthBytes).unwrap_or(-1.0);
        dev_slots.sort_by(|a, b| {
            bw(a)
                .partial_cmp(&bw(b))
                .unwrap()
                .then(a.slot.slot_start.cmp(&b.slot.slot_start))
        });
        let n = dev_slots.len();
        let mut tertiles = [
            dev_slots[..n / 3].to_vec(),
            dev_slots[n / 3..2 * n / 3].to_vec(),
            dev_slots[2 * n / 3..].to_vec(),
        ];
        for t in tertiles.iter_mut() {
            t.sort_by_key(|s| s.slot.slot_start);
        }
        let mut cursors = [0usize; 3];
        let mut picked = Vec::with_capacity(max_per_device);
        'fill: loop {
            let mut any = false;
            for (t, cursor) in tertiles.iter().zip(cursors.iter_mut()) {
                if *cursor < t.len() {
                    picked.push(t[*cursor].clone());
                    *cursor += 1;
                    any = true;
                    if picked.len() == max_per_device {
                        break 'fill;
                    }
                }
            }
            if !any {
                break;
            }
        }
        out.extend(picked);
    }
    out
}

/// Fits the full pipeline on labeled slots: per-feature mean imputation,
/// standardization, then regularized logistic regression.
pub fn fit_linear_model(
    slots: &[&LabeledSlot],
    feature_ids: &[FeatureId],
    config: &TrainConfig,
) -> Result<LinearModel, LinearError> {
    if slots.is_empty() {
        return Err(LinearError::EmptyTrainingSet);
    }
    if feature_ids.is_empty() {
        return Err(LinearError::NoFeatures);
    }
    for (i, fid) in feature_ids.iter().enumerate() {
        if feature_ids[..i].contains(fid) {
            return Err(LinearError::DuplicateFeature(*fid));
        }
    }
    let has_iot = slots.iter().any(|s| s.label == Label::IoT);
    let has_not = slots.iter().any(|s| s.label == Label::NoT);
    if !has_iot || !has_not {
        return Err(LinearError::SingleClass);
    }

    let d = feature_ids.len();
    let n = slots.len();
    let mut defaults = Vec::with_capacity(d);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    for &fid in feature_ids {
        let raw: Vec<Option<f64>> = slots.iter().map(|s| s.slot.get(fid)).collect();
        if raw.iter().all(Option::is_none) {
            return Err(LinearError::AllMissing(fid));
        }
        let def = fit_defaults(&raw);
        defaults.push(def);
        cols.push(raw.into_iter().map(|v| v.unwrap_or(def)).collect());
    }
    let mut mu = Vec::with_capacity(d);
    let mut sigma = Vec::with_capacity(d);
    for col in &cols {
        let (m, s) = fit_scaler(col);
        mu.push(m);
        sigma.push(s);
    }
    let xs: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..d).map(|k| (cols[k][i] - mu[k]) / sigma[k]).collect())
        .collect();
    let y: Vec<f64> = slots.iter().map(|s| s.label.y()).collect();
    let (theta, _trace) = train_logreg(&xs, &y, config);
    let model = LinearModel {
        kind: LinearModel::KIND.to_string(),
        version: LinearModel::VERSION,
        slot_width: config.slot_width,
        feature_ids: feature_ids.to_vec(),
        theta,
        mu,
        sigma,
        defaults,
        meta: ModelMeta { seed: config.seed, n_train_slots: n, lambda: config.lambda },
    };
    debug_assert!(model.validate().is_ok());
    Ok(model)
}
