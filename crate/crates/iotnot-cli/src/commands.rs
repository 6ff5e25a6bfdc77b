//! One function per subcommand. Each returns `CliError` with the exit-code
//! class already decided; `main` does the printing.

use crate::inputs::{data_err, group_records, load_manifest, load_records, write_file};
use crate::{CliError, EvaluateArgs, ExtractArgs, PredictArgs, TrainDhcpArgs, TrainTrafficArgs};
use iotnot::dhcp::{device_labels, fit_dhcp_model, DhcpSignatureModel};
use iotnot::eval::{evaluation_report, Outcome};
use iotnot::features::{
    extract_features, extract_trace, read_features_csv, slice_slots, write_features_csv,
    FeatureId, LabeledSlot,
};
use iotnot::linear::{fit_linear_model, LinearModel, TrainConfig};
use iotnot::persist::{load_model, save_model, AnyModel};
use iotnot::selection::{greedy_select, selection_report_json, SelectionConfig};
use iotnot::trace::{group_by_device, PacketRecord};
use iotnot::types::{MacAddr, Timestamp, Verdict};
use iotnot::unified::{predict_device_windows, UnifiedModels, Vote, VoteRecord, WINDOW_SECS};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::num::NonZeroU32;

pub fn extract(args: ExtractArgs) -> Result<(), CliError> {
    let manifest = load_manifest(&args.manifest)?;
    let records = load_records(&args.input, Some(&manifest))?;
    let traces = group_by_device(&records, &manifest).map_err(|e| CliError::Data(e.to_string()))?;
    let mut rows = Vec::new();
    for trace in &traces {
        rows.extend(extract_trace(trace, args.width));
    }
    let file = File::create(&args.out).map_err(|e| data_err(&args.out, e))?;
    write_features_csv(BufWriter::new(file), &rows).map_err(|e| data_err(&args.out, e))
}

pub fn train_traffic(args: TrainTrafficArgs) -> Result<(), CliError> {
    // Flag-level mistakes should surface before any file is touched.
    if args.selection_report.is_some() && !args.select {
        return Err(CliError::Usage("--selection-report needs --select".into()));
    }
    let explicit_set = match &args.feature_set {
        Some(names) => Some(parse_feature_set(names)?),
        None => None,
    };

    let manifest = load_manifest(&args.manifest)?;
    let file = File::open(&args.features).map_err(|e| data_err(&args.features, e))?;
    let all_rows =
        read_features_csv(BufReader::new(file)).map_err(|e| data_err(&args.features, e))?;

    let width = args.width.get();
    let mut slots = Vec::new();
    for slot in all_rows.into_iter().filter(|r| r.width == width) {
        let label = manifest.label_of(slot.device_key).ok_or_else(|| {
            CliError::Data(format!("device {} is not in the manifest", slot.device_key))
        })?;
        slots.push(LabeledSlot { slot, label });
    }
    if slots.is_empty() {
        return Err(CliError::Data(format!(
            "no {width} s slots in {}",
            args.features.display()
        )));
    }

    let feature_ids = match explicit_set {
        Some(ids) => ids,
        None => {
            let config = SelectionConfig {
                k: args.k,
                alpha: args.alpha,
                ..SelectionConfig::new(args.seed, width)
            };
            let result =
                greedy_select(&slots, &config).map_err(|e| CliError::Data(e.to_string()))?;
            if let Some(path) = &args.selection_report {
                let report = selection_report_json(&config, &result);
                let text = serde_json::to_string_pretty(&report).expect("json value serializes");
                write_file(path, &(text + "\n"))?;
            }
            let names: Vec<&str> = result.selected.iter().map(|f| f.name()).collect();
            println!("selected {} (cv f1 {:.4})", names.join(","), result.selected_f1);
            result.selected
        }
    };

    let slot_refs: Vec<&LabeledSlot> = slots.iter().collect();
    let train = TrainConfig::new(args.seed, width);
    let model = fit_linear_model(&slot_refs, &feature_ids, &train)
        .map_err(|e| CliError::Data(e.to_string()))?;
    save_model(&args.out, &AnyModel::from(model)).map_err(|e| data_err(&args.out, e))
}

/// The feature list is typed on the command line, so both unknown names and
/// repeats are usage errors, not data errors.
fn parse_feature_set(names: &[String]) -> Result<Vec<FeatureId>, CliError> {
    let mut ids = Vec::with_capacity(names.len());
    for name in names {
        let id: FeatureId = name.parse().map_err(|e: iotnot::features::UnknownFeature| {
            CliError::Usage(e.to_string())
        })?;
        if ids.contains(&id) {
            return Err(CliError::Usage(format!("feature {id} listed more than once")));
        }
        ids.push(id);
    }
    Ok(ids)
}

pub fn train_dhcp(args: TrainDhcpArgs) -> Result<(), CliError> {
    let manifest = load_manifest(&args.manifest)?;
    let records = load_records(&args.input, Some(&manifest))?;
    let traces = group_by_device(&records, &manifest).map_err(|e| CliError::Data(e.to_string()))?;
    let examples: Vec<_> = traces
        .iter()
        .filter_map(|t| device_labels(&t.records).map(|labels| (labels, t.label)))
        .collect();
    if examples.is_empty() {
        return Err(CliError::Data("no DHCP traffic in the input".into()));
    }
    let model = fit_dhcp_model(&examples).map_err(|e| CliError::Data(e.to_string()))?;
    save_model(&args.out, &AnyModel::from(model)).map_err(|e| data_err(&args.out, e))
}

pub fn predict(args: PredictArgs) -> Result<(), CliError> {
    if !args.unified && args.model.len() != 1 {
        return Err(CliError::Usage(
            "pass exactly one model, or --unified for a model set".into(),
        ));
    }

    let manifest = match &args.manifest {
        Some(path) => Some(load_manifest(path)?),
        None => None,
    };
    let records = load_records(&args.input, manifest.as_ref())?;
    let by_device = group_records(records);

    let mut models = Vec::with_capacity(args.model.len());
    for path in &args.model {
        models.push(load_model(path).map_err(|e| data_err(path, e))?);
    }

    let lines = if args.unified {
        predict_unified(models, &by_device)?
    } else {
        predict_single(models, &by_device)?
    };

    let file = File::create(&args.out).map_err(|e| data_err(&args.out, e))?;
    let mut w = BufWriter::new(file);
    for record in &lines {
        serde_json::to_writer(&mut w, record).map_err(|e| data_err(&args.out, e))?;
        w.write_all(b"\n").map_err(|e| data_err(&args.out, e))?;
    }
    w.flush().map_err(|e| data_err(&args.out, e))
}

/// One model, one voter. A traffic model votes once per non-empty slot at
/// its own width; a DHCP tree votes once per device (weight 2, matching its
/// weight in the unified scheme) or abstains with weight 0 when the device
/// never spoke DHCP, so coverage stays visible downstream.
fn predict_single(
    mut models: Vec<AnyModel>,
    by_device: &BTreeMap<MacAddr, Vec<PacketRecord>>,
) -> Result<Vec<VoteRecord>, CliError> {
    let model = models.pop().expect("arity checked in predict");
    let mut out = Vec::new();
    match model {
        AnyModel::Linear(model) => {
            let width = NonZeroU32::new(model.slot_width).expect("validated model width");
            let voter = format!("traffic-{}s", model.slot_width);
            for (&device, records) in by_device {
                for (start, slot_records) in slice_slots(records, width) {
                    let slot = extract_features(device, start, width.get(), slot_records);
                    let pred = model.predict(&slot).map_err(|e| CliError::Data(e.to_string()))?;
                    let verdict = Verdict::from(pred.label);
                    out.push(VoteRecord {
                        device,
                        window_start: start,
                        votes: vec![Vote { voter: voter.clone(), verdict, weight: 1 }],
                        verdict,
                    });
                }
            }
        }
        AnyModel::Dhcp(model) => {
            let window = WINDOW_SECS as i64 * 1_000_000;
            for (&device, records) in by_device {
                let Some(first) = records.first() else { continue };
                let start = first.timestamp.micros().div_euclid(window) * window;
                let (verdict, weight) = match device_labels(records) {
                    Some(labels) => (Verdict::from(model.predict(&labels)), 2),
                    None => (Verdict::Abstain, 0),
                };
                out.push(VoteRecord {
                    device,
                    window_start: Timestamp::from_micros(start),
                    votes: vec![Vote { voter: "dhcp".into(), verdict, weight }],
                    verdict,
                });
            }
        }
    }
    Ok(out)
}

fn predict_unified(
    models: Vec<AnyModel>,
    by_device: &BTreeMap<MacAddr, Vec<PacketRecord>>,
) -> Result<Vec<VoteRecord>, CliError> {
    let mut linear: Vec<LinearModel> = Vec::new();
    let mut dhcp: Option<DhcpSignatureModel> = None;
    for model in models {
        match model {
            AnyModel::Linear(m) => linear.push(m),
            AnyModel::Dhcp(m) => {
                if dhcp.replace(m).is_some() {
                    return Err(CliError::Usage("--unified takes at most one DHCP model".into()));
                }
            }
        }
    }
    if linear.len() != 3 {
        return Err(CliError::Usage(format!(
            "--unified needs traffic models for 300, 600, and 1200 s slots, got {}",
            linear.len()
        )));
    }
    linear.sort_by_key(|m| m.slot_width);
    let [m5, m10, m20] = <[LinearModel; 3]>::try_from(linear).expect("length checked");
    let models = UnifiedModels::new(m5, m10, m20)
        .map_err(|e| CliError::Data(format!("width mismatch: {e}")))?;

    let mut out = Vec::new();
    for (&device, records) in by_device {
        let lines = predict_device_windows(device, records, &models, dhcp.as_ref())
            .map_err(|e| CliError::Data(e.to_string()))?;
        out.extend(lines);
    }
    Ok(out)
}

pub fn evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let manifest = load_manifest(&args.manifest)?;
    let text =
        std::fs::read_to_string(&args.verdicts).map_err(|e| data_err(&args.verdicts, e))?;

    let mut outcomes = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let at = |reason: String| {
            CliError::Data(format!("{} line {}: {reason}", args.verdicts.display(), i + 1))
        };
        let record: VoteRecord = serde_json::from_str(line).map_err(|e| at(e.to_string()))?;
        let truth = manifest
            .label_of(record.device)
            .ok_or_else(|| at(format!("device {} is not in the manifest", record.device)))?;
        outcomes.push(Outcome { device: record.device, truth, verdict: record.verdict });
    }
    if outcomes.is_empty() {
        return Err(CliError::Data(format!("no verdicts in {}", args.verdicts.display())));
    }

    let report = evaluation_report(&outcomes);
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(&args.out, &(json + "\n"))?;

    if let Some(path) = &args.cdf_csv {
        let mut csv = String::from("rate,fraction\n");
        for (rate, fraction) in &report.cdf {
            csv.push_str(&format!("{rate},{fraction}\n"));
        }
        write_file(path, &csv)?;
    }
    Ok(())
}
