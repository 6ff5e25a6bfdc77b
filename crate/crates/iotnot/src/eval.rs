//! Evaluation: confusion counts, recall/precision/F1 with explicit undefined
//! values, per-device success rates with abstention-aware coverage, the
//! device success-rate CDF, and the combined report.

use crate::types::{Label, MacAddr, Verdict};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One evaluated decision: what the device is vs what a classifier said.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct Outcome {
    pub device: MacAddr,
    pub truth: Label,
    pub verdict: Verdict,
}

/// Pooled confusion counts. IoT is the positive class; abstentions are
/// excluded (coverage accounts for them).
#[derive(Clone, Copy, PartialEq, Eq, Default, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub r#fn: u64,
}

/// Confusion accumulated in device-sized fractions: each device contributes
/// a total mass of 1, split by its success rate.
#[derive(Clone, Copy, PartialEq, Default, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FractionalConfusion {
    pub tp: f64,
    pub fp: f64,
    pub tn: f64,
    pub r#fn: f64,
}

/// The three ratio metrics. `None` means the ratio's denominator was zero;
/// it serializes as JSON null and is never conflated with 0.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct Metrics {
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
}

fn ratio(num: f64, denom: f64) -> Option<f64> {
    (denom > 0.0).then(|| num / denom)
}

fn metrics_from(tp: f64, fp: f64, fn_: f64) -> Metrics {
    let recall = ratio(tp, tp + fn_);
    let precision = ratio(tp, tp + fp);
    let f1 = match (recall, precision) {
        (Some(r), Some(p)) => ratio(2.0 * r * p, r + p),
        _ => None,
    };
    Metrics { recall, precision, f1 }
}

pub fn compute_metrics(c: &Confusion) -> Metrics {
    metrics_from(c.tp as f64, c.fp as f64, c.r#fn as f64)
}

pub fn compute_metrics_fractional(c: &FractionalConfusion) -> Metrics {
    metrics_from(c.tp, c.fp, c.r#fn)
}

/// Tallies decided outcomes; abstentions are skipped.
pub fn pooled_confusion(outcomes: &[Outcome]) -> Confusion {
    let mut c = Confusion::default();
    for o in outcomes {
        match (o.truth, o.verdict) {
            (Label::IoT, Verdict::IoT) => c.tp += 1,
            (Label::IoT, Verdict::NoT) => c.r#fn += 1,
            (Label::NoT, Verdict::IoT) => c.fp += 1,
            (Label::NoT, Verdict::NoT) => c.tn += 1,
            (_, Verdict::Abstain) => {}
        }
    }
    c
}

/// Per-device tally of decided, correct, and total outcomes.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct DeviceSuccess {
    pub device: MacAddr,
    pub truth: Label,
    pub correct: u64,
    pub decided: u64,
    pub total: u64,
}

impl DeviceSuccess {
    /// Fraction of decided outcomes that were correct; `None` when the
    /// device's verdicts all abstained.
    pub fn rate(&self) -> Option<f64> {
        (self.decided > 0).then(|| self.correct as f64 / self.decided as f64)
    }

    /// Fraction of outcomes that produced a verdict at all.
    pub fn coverage(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.decided as f64 / self.total as f64
        }
    }
}

/// Groups outcomes by device (MAC order) and tallies success. Abstentions
/// count toward `total` only.
pub fn per_device_success(outcomes: &[Outcome]) -> Vec<DeviceSuccess> {
    let mut by_device: BTreeMap<MacAddr, DeviceSuccess> = BTreeMap::new();
    for o in outcomes {
        let entry = by_device.entry(o.device).or_insert(DeviceSuccess {
            device: o.device,
            truth: o.truth,
            correct: 0,
            decided: 0,
            total: 0,
        });
        entry.total += 1;
        if let Some(label) = o.verdict.as_label() {
            entry.decided += 1;
            if label == o.truth {
                entry.correct += 1;
            }
        }
    }
    by_device.into_values().collect()
}

/// CDF of the defined per-device rates: sorted distinct rates paired with
/// the fraction of rated devices at or below each. The last fraction is 1.
pub fn success_cdf(devices: &[DeviceSuccess]) -> Vec<(f64, f64)> {
    let mut rates: Vec<f64> = devices.iter().filter_map(DeviceSuccess::rate).collect();
    rates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = rates.len() as f64;
    let mut cdf: Vec<(f64, f64)> = Vec::new();
    for (i, r) in rates.iter().enumerate() {
        let point = (*r, (i + 1) as f64 / n);
        match cdf.last_mut() {
            Some(last) if last.0 == *r => last.1 = point.1,
            _ => cdf.push(point),
        }
    }
    cdf
}

/// Confusion where each rated device contributes one unit: an IoT device
/// with rate r adds r to tp and 1-r to fn; a NoT device adds r to tn and
/// 1-r to fp. Unrated devices contribute nothing.
pub fn device_averaged_confusion(devices: &[DeviceSuccess]) -> FractionalConfusion {
    let mut c = FractionalConfusion::default();
    for d in devices {
        let Some(rate) = d.rate() else { continue };
        match d.truth {
            Label::IoT => {
                c.tp += rate;
                c.r#fn += 1.0 - rate;
            }
            Label::NoT => {
                c.tn += rate;
                c.fp += 1.0 - rate;
            }
        }
    }
    c
}

/// Rate and coverage for one device, as reported.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceReportEntry {
    pub rate: Option<f64>,
    pub coverage: f64,
}

#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct PooledSection {
    pub confusion: Confusion,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct AveragedSection {
    pub confusion: FractionalConfusion,
    #[serde(flatten)]
    pub metrics: Metrics,
}

/// The full evaluation output: pooled (slot-level) metrics, device-averaged
/// metrics, the per-device table, and the success-rate CDF.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationReport {
    pub pooled: PooledSection,
    pub device_averaged: AveragedSection,
    pub per_device: BTreeMap<MacAddr, DeviceReportEntry>,
    pub cdf: Vec<(f64, f64)>,
}

pub fn evaluation_report(outcomes: &[Outcome]) -> EvaluationReport {
    let pooled = pooled_confusion(outcomes);
    let devices = per_device_success(outcomes);
    let averaged = device_averaged_confusion(&devices);
    EvaluationReport {
        pooled: PooledSection { confusion: pooled, metrics: compute_metrics(&pooled) },
        device_averaged: AveragedSection {
            confusion: averaged,
            metrics: compute_metrics_fractional(&averaged),
        },
        per_device: devices
            .iter()
            .map(|d| (d.device, DeviceReportEntry { rate: d.rate(), coverage: d.coverage() }))
            .collect(),
        cdf: success_cdf(&devices),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mac(i: u8) -> MacAddr {
        MacAddr([2, 0, 0, 0, 0, i])
    }

    fn outcome(dev: u8, truth: Label, verdict: Verdict) -> Outcome {
        Outcome { device: mac(dev), truth, verdict }
    }

    #[test]
    fn headline_confusion_row_reproduces_known_ratios() {
        let c = Confusion { tp: 45, fp: 1, tn: 0, r#fn: 3 };
        let m = compute_metrics(&c);
        assert_eq!(m.recall, Some(0.9375));
        assert_eq!(m.precision, Some(45.0 / 46.0));
        assert_eq!(m.f1, Some(90.0 / 94.0));
        assert!((m.precision.unwrap() - 0.9782).abs() < 5e-4);
        assert!((m.f1.unwrap() - 0.9573).abs() < 5e-4);
    }

    #[test]
    fn perfect_counts_give_unit_metrics() {
        let m = compute_metrics(&Confusion { tp: 10, fp: 0, tn: 0, r#fn: 0 });
        assert_eq!((m.recall, m.precision, m.f1), (Some(1.0), Some(1.0), Some(1.0)));
    }

    #[test]
    fn zero_denominators_are_undefined_not_zero() {
        let m = compute_metrics(&Confusion { tp: 0, fp: 0, tn: 7, r#fn: 0 });
        assert_eq!((m.recall, m.precision, m.f1), (None, None, None));
        assert_eq!(
            serde_json::to_string(&m).unwrap(),
            "{\"recall\":null,\"precision\":null,\"f1\":null}"
        );
        // Defined-but-zero inputs: recall and precision are 0, their harmonic
        // mean has a zero denominator and stays undefined.
        let m = compute_metrics(&Confusion { tp: 0, fp: 2, tn: 0, r#fn: 3 });
        assert_eq!((m.recall, m.precision), (Some(0.0), Some(0.0)));
        assert_eq!(m.f1, None);
    }

    #[test]
    fn confusion_serializes_fn_by_name() {
        let c = Confusion { tp: 1, fp: 2, tn: 3, r#fn: 4 };
        assert_eq!(serde_json::to_string(&c).unwrap(), "{\"tp\":1,\"fp\":2,\"tn\":3,\"fn\":4}");
    }

    #[test]
    fn per_device_separates_rate_from_coverage() {
        let mut outcomes = Vec::new();
        // Device 1: 10 outcomes, 9 correct, no abstentions.
        for i in 0..10 {
            let v = if i == 0 { Verdict::NoT } else { Verdict::IoT };
            outcomes.push(outcome(1, Label::IoT, v));
        }
        // Device 2: 5 outcomes, 1 abstain, 2 of 4 decided correct.
        outcomes.push(outcome(2, Label::NoT, Verdict::Abstain));
        outcomes.push(outcome(2, Label::NoT, Verdict::NoT));
        outcomes.push(outcome(2, Label::NoT, Verdict::NoT));
        outcomes.push(outcome(2, Label::NoT, Verdict::IoT));
        outcomes.push(outcome(2, Label::NoT, Verdict::IoT));
        // Device 3: abstains every time.
        outcomes.push(outcome(3, Label::IoT, Verdict::Abstain));
        outcomes.push(outcome(3, Label::IoT, Verdict::Abstain));

        let devices = per_device_success(&outcomes);
        assert_eq!(devices.len(), 3);
        assert_eq!(devices[0].rate(), Some(0.9));
        assert_eq!(devices[0].coverage(), 1.0);
        assert_eq!(devices[1].rate(), Some(0.5));
        assert_eq!(devices[1].coverage(), 0.8);
        assert_eq!(devices[2].rate(), None);
        assert_eq!(devices[2].coverage(), 0.0);
    }

    #[test]
    fn cdf_matches_worked_examples() {
        let one = per_device_success(
            &(0..10)
                .map(|i| {
                    let v = if i == 0 { Verdict::NoT } else { Verdict::IoT };
                    outcome(1, Label::IoT, v)
                })
                .collect::<Vec<_>>(),
        );
        assert_eq!(success_cdf(&one), vec![(0.9, 1.0)]);

        let two = vec![
            DeviceSuccess { device: mac(1), truth: Label::IoT, correct: 1, decided: 2, total: 2 },
            DeviceSuccess { device: mac(2), truth: Label::NoT, correct: 3, decided: 3, total: 3 },
        ];
        assert_eq!(success_cdf(&two), vec![(0.5, 0.5), (1.0, 1.0)]);

        // Equal rates collapse into one step; unrated devices are skipped.
        let three = vec![
            DeviceSuccess { device: mac(1), truth: Label::IoT, correct: 1, decided: 2, total: 2 },
            DeviceSuccess { device: mac(2), truth: Label::IoT, correct: 2, decided: 4, total: 4 },
            DeviceSuccess { device: mac(3), truth: Label::NoT, correct: 0, decided: 0, total: 1 },
        ];
        assert_eq!(success_cdf(&three), vec![(0.5, 1.0)]);
        assert_eq!(success_cdf(&[]), vec![]);
    }

    #[test]
    fn cdf_is_sorted_nondecreasing_and_ends_at_one() {
        let devices: Vec<DeviceSuccess> = (0..30)
            .map(|i| DeviceSuccess {
                device: mac(i),
                truth: if i % 2 == 0 { Label::IoT } else { Label::NoT },
                correct: (i as u64 * 7) % 11,
                decided: 10,
                total: 12,
            })
            .collect();
        let cdf = success_cdf(&devices);
        assert!(cdf.windows(2).all(|w| w[0].0 < w[1].0), "rates strictly increase");
        assert!(cdf.windows(2).all(|w| w[0].1 < w[1].1), "fractions increase");
        assert_eq!(cdf.last().unwrap().1, 1.0);
    }

    #[test]
    fn fractional_confusion_weighs_each_device_once() {
        let devices = vec![
            // IoT device, rate 0.75.
            DeviceSuccess { device: mac(1), truth: Label::IoT, correct: 3, decided: 4, total: 4 },
            // NoT device, rate 0.5.
            DeviceSuccess { device: mac(2), truth: Label::NoT, correct: 1, decided: 2, total: 2 },
            // Unrated device: no contribution.
            DeviceSuccess { device: mac(3), truth: Label::IoT, correct: 0, decided: 0, total: 5 },
        ];
        let c = device_averaged_confusion(&devices);
        assert_eq!(c, FractionalConfusion { tp: 0.75, fp: 0.5, tn: 0.5, r#fn: 0.25 });
        let m = compute_metrics_fractional(&c);
        assert_eq!(m.recall, Some(0.75));
        assert_eq!(m.precision, Some(0.6));
    }

    #[test]
    fn report_has_all_sections_and_round_trips() {
        let outcomes = vec![
            outcome(1, Label::IoT, Verdict::IoT),
            outcome(1, Label::IoT, Verdict::IoT),
            outcome(1, Label::IoT, Verdict::NoT),
            outcome(2, Label::NoT, Verdict::NoT),
            outcome(2, Label::NoT, Verdict::Abstain),
            outcome(3, Label::IoT, Verdict::Abstain),
        ];
        let report = evaluation_report(&outcomes);
        assert_eq!(report.pooled.confusion, Confusion { tp: 2, fp: 0, tn: 1, r#fn: 1 });
        assert_eq!(report.pooled.metrics.recall, Some(2.0 / 3.0));
        assert_eq!(report.per_device.len(), 3);
        let d3 = &report.per_device[&mac(3)];
        assert_eq!(d3.rate, None);
        assert_eq!(d3.coverage, 0.0);
        let json = serde_json::to_string_pretty(&report).unwrap();
        let back: EvaluationReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
        // The undefined rate appears as null, not 0.
        assert!(json.contains("\"rate\": null"), "{json}");
    }

    #[test]
    fn metrics_are_permutation_invariant() {
        let mut outcomes = vec![
            outcome(1, Label::IoT, Verdict::IoT),
            outcome(2, Label::NoT, Verdict::IoT),
            outcome(1, Label::IoT, Verdict::Abstain),
            outcome(3, Label::NoT, Verdict::NoT),
            outcome(2, Label::NoT, Verdict::NoT),
        ];
        let before = evaluation_report(&outcomes);
        outcomes.reverse();
        assert_eq!(evaluation_report(&outcomes), before);
        outcomes.swap(0, 3);
        assert_eq!(evaluation_report(&outcomes), before);
    }
}
