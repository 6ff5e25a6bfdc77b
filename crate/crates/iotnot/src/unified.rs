//! The combined classifier: seven traffic verdicts over a tiled 20-minute
//! window (four 5-minute, two 10-minute, one 20-minute sub-slot) plus a
//! double-weighted DHCP verdict, merged by weighted majority. Ties fall back
//! to the 20-minute traffic verdict.

use crate::dhcp::{tokenize_dhcp, DhcpSignatureModel};
use crate::features::extract_features;
use crate::linear::LinearModel;
use crate::trace::PacketRecord;
use crate::types::{MacAddr, Timestamp, Verdict};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

/// Window length in seconds.
pub const WINDOW_SECS: u32 = 1200;
/// (offset, width) in seconds of each traffic sub-slot within a window.
/// Order matters: index 6 (the full window) breaks ties.
pub const SUB_SLOTS: [(u32, u32); 7] =
    [(0, 300), (300, 300), (600, 300), (900, 300), (0, 600), (600, 600), (0, 1200)];
/// Vote weight of the DHCP classifier.
pub const DHCP_WEIGHT: u32 = 2;

#[derive(Debug, Error, PartialEq)]
pub enum UnifiedError {
    #[error("model trained for {got} s slots where {expected} s is required")]
    ModelWidthMismatch { expected: u32, got: u32 },
    #[error("window start {0} is not aligned to {WINDOW_SECS} s")]
    UnalignedWindow(f64),
    #[error("traffic scoring failed: {0}")]
    Linear(String),
}

/// The three traffic models the combiner needs, checked once at wrap time so
/// every later window evaluation can assume the widths line up.
#[derive(Clone, PartialEq, Debug)]
pub struct UnifiedModels {
    m5: LinearModel,
    m10: LinearModel,
    m20: LinearModel,
}

impl UnifiedModels {
    pub fn new(m5: LinearModel, m10: LinearModel, m20: LinearModel) -> Result<Self, UnifiedError> {
        for (model, expected) in [(&m5, 300), (&m10, 600), (&m20, 1200)] {
            if model.slot_width != expected {
                return Err(UnifiedError::ModelWidthMismatch { expected, got: model.slot_width });
            }
        }
        Ok(UnifiedModels { m5, m10, m20 })
    }

    fn model_for(&self, width: u32) -> &LinearModel {
        match width {
            300 => &self.m5,
            600 => &self.m10,
            _ => &self.m20,
        }
    }
}

/// One voter's contribution. Abstaining voters carry weight 0.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct Vote {
    pub voter: String,
    pub verdict: Verdict,
    pub weight: u32,
}

/// The full tally for one device window.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct VoteRecord {
    pub device: MacAddr,
    pub window_start: Timestamp,
    pub votes: Vec<Vote>,
    pub verdict: Verdict,
}

impl VoteRecord {
    /// Weighted (IoT, NoT) totals implied by the votes.
    pub fn totals(&self) -> (u32, u32) {
        let mut iot = 0;
        let mut not = 0;
        for v in &self.votes {
            match v.verdict {
                Verdict::IoT => iot += v.weight,
                Verdict::NoT => not += v.weight,
                Verdict::Abstain => {}
            }
        }
        (iot, not)
    }
}

fn voter_id(index: usize) -> String {
    match index {
        0..=3 => format!("traffic-5m-{index}"),
        4 | 5 => format!("traffic-10m-{}", index - 4),
        _ => "traffic-20m".to_string(),
    }
}

/// The vote-merging rule, separated from feature extraction so it can be
/// tested by exhaustive enumeration. `traffic[6]` is the full-window verdict
/// that settles exact ties; a tie under a silent full window stays Abstain.
pub fn combine_votes(traffic: &[Verdict; 7], dhcp: Verdict) -> Verdict {
    let mut iot = 0u32;
    let mut not = 0u32;
    for v in traffic {
        match v {
            Verdict::IoT => iot += 1,
            Verdict::NoT => not += 1,
            Verdict::Abstain => {}
        }
    }
    match dhcp {
        Verdict::IoT => iot += DHCP_WEIGHT,
        Verdict::NoT => not += DHCP_WEIGHT,
        Verdict::Abstain => {}
    }
    if iot > not {
        Verdict::IoT
    } else if not > iot {
        Verdict::NoT
    } else {
        traffic[6]
    }
}

/// Classifies one aligned window of a device's records. `dhcp` carries the
/// signature model together with the device's accumulated DHCP labels (from
/// capture start through window end); pass `None` when either is unavailable
/// and the DHCP voter abstains.
pub fn unified_predict(
    device: MacAddr,
    window_start: Timestamp,
    window_records: &[PacketRecord],
    models: &UnifiedModels,
    dhcp: Option<(&DhcpSignatureModel, &BTreeSet<String>)>,
) -> Result<VoteRecord, UnifiedError> {
    let window_micros = WINDOW_SECS as i64 * 1_000_000;
    if window_start.micros().rem_euclid(window_micros) != 0 {
        return Err(UnifiedError::UnalignedWindow(window_start.seconds()));
    }

    let mut votes = Vec::with_capacity(8);
    let mut traffic = [Verdict::Abstain; 7];
    for (i, (offset, width)) in SUB_SLOTS.into_iter().enumerate() {
        let start = Timestamp::from_micros(window_start.micros() + offset as i64 * 1_000_000);
        let end = start.micros() + width as i64 * 1_000_000;
        let lo = window_records.partition_point(|r| r.timestamp.micros() < start.micros());
        let hi = window_records.partition_point(|r| r.timestamp.micros() < end);
        let slice = &window_records[lo..hi];
        let (verdict, weight) = if slice.is_empty() {
            (Verdict::Abstain, 0)
        } else {
            let slot = extract_features(device, start, width, slice);
            let p = models
                .model_for(width)
                .predict(&slot)
                .map_err(|e| UnifiedError::Linear(e.to_string()))?;
            (Verdict::from(p.label), 1)
        };
        traffic[i] = verdict;
        votes.push(Vote { voter: voter_id(i), verdict, weight });
    }

    let dhcp_verdict = match dhcp {
        Some((model, labels)) => Verdict::from(model.predict(labels)),
        None => Verdict::Abstain,
    };
    let dhcp_weight = if dhcp_verdict == Verdict::Abstain { 0 } else { DHCP_WEIGHT };
    votes.push(Vote { voter: "dhcp".into(), verdict: dhcp_verdict, weight: dhcp_weight });

    let verdict = combine_votes(&traffic, dhcp_verdict);
    Ok(VoteRecord { device, window_start, votes, verdict })
}

/// Aligned window starts spanning the records' lifetime, silent gaps
/// included. Empty input yields no windows.
pub fn window_starts(records: &[PacketRecord]) -> Vec<Timestamp> {
    let (first, last) = match (records.first(), records.last()) {
        (Some(f), Some(l)) => (f.timestamp.micros(), l.timestamp.micros()),
        _ => return Vec::new(),
    };
    let w = WINDOW_SECS as i64 * 1_000_000;
    let mut starts = Vec::new();
    let mut t = first.div_euclid(w) * w;
    while t <= last {
        starts.push(Timestamp::from_micros(t));
        t += w;
    }
    starts
}

/// Runs the combiner over every window of a device's timestamp-sorted
/// records. DHCP labels accumulate monotonically, so a device that identified
/// itself once keeps its DHCP vote in every later window, including silent
/// ones. Prediction needs no ground-truth label, so this takes the raw trace
/// rather than a labeled one.
pub fn predict_device_windows(
    device: MacAddr,
    records: &[PacketRecord],
    models: &UnifiedModels,
    dhcp_model: Option<&DhcpSignatureModel>,
) -> Result<Vec<VoteRecord>, UnifiedError> {
    let window_micros = WINDOW_SECS as i64 * 1_000_000;
    let mut labels = BTreeSet::new();
    let mut saw_dhcp = false;
    let mut consumed = 0;
    let mut out = Vec::new();
    for start in window_starts(records) {
        let end = start.micros() + window_micros;
        while consumed < records.len() && records[consumed].timestamp.micros() < end {
            if let Some(part) = &records[consumed].dhcp {
                saw_dhcp = true;
                labels.extend(tokenize_dhcp(part));
            }
            consumed += 1;
        }
        let lo = records.partition_point(|r| r.timestamp.micros() < start.micros());
        let hi = records.partition_point(|r| r.timestamp.micros() < end);
        let dhcp = match (dhcp_model, saw_dhcp) {
            (Some(m), true) => Some((m, &labels)),
            _ => None,
        };
        out.push(unified_predict(device, start, &records[lo..hi], models, dhcp)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dhcp::TreeNode;
    use crate::features::FeatureId;
    use crate::linear::ModelMeta;
    use crate::trace::{DhcpPart, Direction, UdpPart};
    use crate::types::Label;

    const I: Verdict = Verdict::IoT;
    const N: Verdict = Verdict::NoT;
    const A: Verdict = Verdict::Abstain;

    #[test]
    fn combiner_follows_weighted_majority() {
        assert_eq!(combine_votes(&[I; 7], A), I, "unanimous traffic");
        // 4 IoT : 3 NoT traffic, DHCP NoT doubles to 4:5.
        assert_eq!(combine_votes(&[I, I, I, I, N, N, N], N), N);
        // 3:3 tie with one abstention: the full-window voter decides.
        assert_eq!(combine_votes(&[I, I, I, A, N, N, N], A), N);
        assert_eq!(combine_votes(&[N, N, A, I, I, N, I], A), I);
        // Fully silent window with a DHCP identity: DHCP alone decides.
        assert_eq!(combine_votes(&[A; 7], I), I);
        // Fully silent window, no DHCP: nothing to say.
        assert_eq!(combine_votes(&[A; 7], A), A);
    }

    #[test]
    fn nine_decided_votes_cannot_tie() {
        for mask in 0..128u32 {
            let mut traffic = [N; 7];
            for (i, t) in traffic.iter_mut().enumerate() {
                if mask & (1 << i) != 0 {
                    *t = I;
                }
            }
            for dhcp in [I, N] {
                let mut iot = traffic.iter().filter(|v| **v == I).count() as u32;
                let mut not = traffic.iter().filter(|v| **v == N).count() as u32;
                if dhcp == I {
                    iot += 2;
                } else {
                    not += 2;
                }
                assert_ne!(iot, not, "9 is odd: totals can never tie");
                let want = if iot > not { I } else { N };
                assert_eq!(combine_votes(&traffic, dhcp), want);
            }
        }
    }

    #[test]
    fn combiner_ignores_order_of_equal_weight_voters() {
        let base = [I, A, N, I, N, A, I];
        let verdict = combine_votes(&base, N);
        // Permuting the six non-tiebreak traffic voters never changes totals.
        let mut rotated = base;
        rotated[..6].rotate_left(2);
        assert_eq!(combine_votes(&rotated, N), verdict);
        let mut swapped = base;
        swapped.swap(0, 5);
        assert_eq!(combine_votes(&swapped, N), verdict);
    }

    #[test]
    fn unanimous_voters_carry_their_verdict() {
        for v in [I, N] {
            assert_eq!(combine_votes(&[v; 7], v), v);
        }
    }

    /// A model over pkt_count only: score = theta0 + sign * pkt_count.
    fn count_model(width: u32, theta0: f64, sign: f64) -> LinearModel {
        LinearModel {
            kind: "linear".into(),
            version: 1,
            slot_width: width,
            feature_ids: vec![FeatureId::PktCount],
            theta: vec![theta0, sign],
            mu: vec![0.0],
            sigma: vec![1.0],
            defaults: vec![0.0],
            meta: ModelMeta { seed: 0, n_train_slots: 0, lambda: 1.0 },
        }
    }

    fn iot_models() -> UnifiedModels {
        // Any non-empty slot scores positive: every traffic voter says IoT.
        UnifiedModels::new(
            count_model(300, -0.5, 1.0),
            count_model(600, -0.5, 1.0),
            count_model(1200, -0.5, 1.0),
        )
        .unwrap()
    }

    fn rec(seconds: f64) -> PacketRecord {
        PacketRecord {
            timestamp: Timestamp::from_seconds(seconds),
            device_key: MacAddr([2, 0, 0, 0, 0, 9]),
            direction: Direction::Outgoing,
            frame_len: 100,
            ip: None,
            tcp: None,
            udp: None,
            dns: None,
            dhcp: None,
            http_ua: None,
        }
    }

    fn dev() -> MacAddr {
        MacAddr([2, 0, 0, 0, 0, 9])
    }

    #[test]
    fn width_mismatch_is_rejected_at_wrap_time() {
        let err = UnifiedModels::new(
            count_model(300, -0.5, 1.0),
            count_model(300, -0.5, 1.0),
            count_model(1200, -0.5, 1.0),
        )
        .unwrap_err();
        assert_eq!(err, UnifiedError::ModelWidthMismatch { expected: 600, got: 300 });
    }

    #[test]
    fn unaligned_window_is_rejected() {
        let err = unified_predict(
            dev(),
            Timestamp::from_seconds(600.0),
            &[],
            &iot_models(),
            None,
        )
        .unwrap_err();
        assert_eq!(err, UnifiedError::UnalignedWindow(600.0));
    }

    #[test]
    fn sub_slots_tile_the_window() {
        let mut covered = [0u32; WINDOW_SECS as usize];
        for (offset, width) in SUB_SLOTS {
            for s in offset..offset + width {
                covered[s as usize] += 1;
            }
        }
        // Each second is seen once per tier: one 5-min, one 10-min, the 20-min.
        assert!(covered.iter().all(|c| *c == 3));
    }

    #[test]
    fn empty_sub_slots_abstain_with_zero_weight() {
        // Packets only in [0, 300): voters 5m-0, 10m-0 and 20m decide.
        let records = vec![rec(10.0), rec(20.0), rec(290.0)];
        let r = unified_predict(dev(), Timestamp::from_micros(0), &records, &iot_models(), None)
            .unwrap();
        let ids: Vec<&str> = r.votes.iter().map(|v| v.voter.as_str()).collect();
        assert_eq!(
            ids,
            [
                "traffic-5m-0",
                "traffic-5m-1",
                "traffic-5m-2",
                "traffic-5m-3",
                "traffic-10m-0",
                "traffic-10m-1",
                "traffic-20m",
                "dhcp"
            ]
        );
        let by_id = |id: &str| r.votes.iter().find(|v| v.voter == id).unwrap();
        assert_eq!((by_id("traffic-5m-0").verdict, by_id("traffic-5m-0").weight), (I, 1));
        assert_eq!((by_id("traffic-5m-1").verdict, by_id("traffic-5m-1").weight), (A, 0));
        assert_eq!((by_id("traffic-10m-0").verdict, by_id("traffic-10m-0").weight), (I, 1));
        assert_eq!((by_id("traffic-10m-1").verdict, by_id("traffic-10m-1").weight), (A, 0));
        assert_eq!((by_id("traffic-20m").verdict, by_id("traffic-20m").weight), (I, 1));
        assert_eq!((by_id("dhcp").verdict, by_id("dhcp").weight), (A, 0));
        assert_eq!(r.totals(), (3, 0));
        assert_eq!(r.verdict, I);
    }

    #[test]
    fn tie_falls_back_to_the_full_window_voter() {
        // 5-minute voters lean IoT, the 10- and 20-minute voters lean NoT.
        let models = UnifiedModels::new(
            count_model(300, -0.5, 1.0),
            count_model(600, 0.5, -1.0),
            count_model(1200, 0.5, -1.0),
        )
        .unwrap();
        // Packets in 5m slots 0, 1, 2; slot 3 stays silent.
        let records = vec![rec(10.0), rec(350.0), rec(700.0)];
        let r =
            unified_predict(dev(), Timestamp::from_micros(0), &records, &models, None).unwrap();
        assert_eq!(r.totals(), (3, 3));
        assert_eq!(r.verdict, N, "the 20-minute verdict settles the tie");
    }

    fn prl12_tree() -> DhcpSignatureModel {
        DhcpSignatureModel {
            kind: "dhcp_tree".into(),
            version: 1,
            vocabulary: vec!["prl:12".into()],
            nodes: vec![
                TreeNode::Split { label: 0, left: 1, right: 2 },
                TreeNode::Leaf { leaf: Label::NoT, counts: [1, 0] },
                TreeNode::Leaf { leaf: Label::IoT, counts: [0, 1] },
            ],
            max_depth: 5,
        }
    }

    #[test]
    fn dhcp_vote_doubles_and_can_decide_a_silent_window() {
        let tree = prl12_tree();
        let labels: BTreeSet<String> = ["prl:12".to_string()].into();
        let r = unified_predict(
            dev(),
            Timestamp::from_micros(0),
            &[],
            &iot_models(),
            Some((&tree, &labels)),
        )
        .unwrap();
        assert_eq!(r.totals(), (2, 0));
        assert_eq!(r.verdict, I);
        let dhcp_vote = r.votes.last().unwrap();
        assert_eq!((dhcp_vote.verdict, dhcp_vote.weight), (I, 2));

        // Same silent window without DHCP: everything abstains.
        let r = unified_predict(dev(), Timestamp::from_micros(0), &[], &iot_models(), None)
            .unwrap();
        assert_eq!(r.totals(), (0, 0));
        assert_eq!(r.verdict, A);
    }

    #[test]
    fn vote_record_serializes_as_the_documented_shape() {
        let r = unified_predict(
            dev(),
            Timestamp::from_micros(0),
            &[rec(5.0)],
            &iot_models(),
            None,
        )
        .unwrap();
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.starts_with("{\"device\":\"02:00:00:00:00:09\",\"window_start\":0"), "{json}");
        assert!(json.contains("\"votes\":[{\"voter\":\"traffic-5m-0\",\"verdict\":\"IoT\",\"weight\":1}"), "{json}");
        assert!(json.ends_with("\"verdict\":\"IoT\"}"), "{json}");
        let back: VoteRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    fn dhcp_rec(seconds: f64) -> PacketRecord {
        let mut r = rec(seconds);
        r.udp = Some(UdpPart { src_port: 68, dst_port: 67 });
        r.dhcp = Some(DhcpPart { prl: Some(vec![12]), ..Default::default() });
        r
    }

    #[test]
    fn device_windows_accumulate_dhcp_and_cover_gaps() {
        // DHCP identification in the first window; a silent middle window;
        // plain traffic again in the third.
        let records = vec![rec(100.0), dhcp_rec(200.0), rec(2500.0 + 1200.0)];
        let tree = prl12_tree();
        let out = predict_device_windows(dev(), &records, &iot_models(), Some(&tree)).unwrap();
        assert_eq!(out.len(), 4);
        let starts: Vec<f64> = out.iter().map(|r| r.window_start.seconds()).collect();
        assert_eq!(starts, vec![0.0, 1200.0, 2400.0, 3600.0]);
        // Window 0: traffic + DHCP agree.
        assert_eq!(out[0].verdict, I);
        // Window 1 is silent, but the DHCP identity persists and decides.
        assert_eq!(out[1].totals(), (2, 0));
        assert_eq!(out[1].verdict, I);
        // Later windows keep the DHCP vote alongside fresh traffic.
        assert_eq!(out[3].votes.last().unwrap().verdict, I);

        // Without a DHCP model the silent window abstains.
        let out = predict_device_windows(dev(), &records, &iot_models(), None).unwrap();
        assert_eq!(out[1].verdict, A);
    }
}
