//! End-to-end runs of the `iotnot` binary: the full
//! extract/train/predict/evaluate pipeline on synthetic inputs, plus the
//! exit-code contract (0 success, 1 usage, 2 data).

use iotnot::trace::write_event_log;
use iotnot::types::{MacAddr, Timestamp};
use std::fs;
use std::path::Path;
use std::process::Command;
use testkit::TrafficCorpus;

struct Run {
    status: i32,
    stdout: String,
    stderr: String,
}

fn iotnot(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_iotnot"))
        .args(args)
        .output()
        .expect("spawn iotnot");
    Run {
        status: out.status.code().expect("exit code"),
        stdout: String::from_utf8(out.stdout).expect("utf8 stdout"),
        stderr: String::from_utf8(out.stderr).expect("utf8 stderr"),
    }
}

fn ok(args: &[&str]) -> Run {
    let run = iotnot(args);
    assert_eq!(run.status, 0, "iotnot {args:?} failed: {}", run.stderr);
    run
}

/// Joins a temp-dir file name into an owned path string for argv.
fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().expect("utf8 path").to_string()
}

fn write_corpus_inputs(dir: &Path, corpus: &TrafficCorpus) -> (String, String) {
    let mut buf = Vec::new();
    write_event_log(&mut buf, &corpus.all_records()).expect("serialize events");
    let events = p(dir, "events.jsonl");
    fs::write(&events, buf).expect("write events");
    let manifest = p(dir, "manifest.csv");
    fs::write(&manifest, corpus.manifest_csv()).expect("write manifest");
    (events, manifest)
}

fn read_json(path: &str) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).expect("read json")).expect("parse json")
}

fn verdict_lines(path: &str) -> Vec<serde_json::Value> {
    fs::read_to_string(path)
        .expect("read verdicts")
        .lines()
        .map(|l| serde_json::from_str(l).expect("parse verdict line"))
        .collect()
}

#[test]
fn extract_on_empty_pcap_writes_header_only_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let pcap = p(dir.path(), "empty.pcap");
    fs::write(&pcap, testkit::frames::pcap_bytes(&[])).unwrap();
    let manifest = p(dir.path(), "manifest.csv");
    fs::write(&manifest, "mac,name,label\n02:00:00:00:01:00,cam,IoT\n").unwrap();
    let out = p(dir.path(), "features.csv");

    ok(&["extract", "--pcap", &pcap, "--manifest", &manifest, "--width", "600", "--out", &out]);

    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1, "expected only the header, got {text:?}");
    assert!(lines[0].starts_with("device_key,slot_start,width,pkt_count,"));
}

#[test]
fn pipeline_from_events_to_report_reaches_f1_target() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = testkit::traffic_corpus(909, 12, 12, 10, 600, 0.15);
    let (events, manifest) = write_corpus_inputs(dir.path(), &corpus);
    let features = p(dir.path(), "features.csv");
    let model = p(dir.path(), "model.json");
    let sel_report = p(dir.path(), "selection.json");
    let verdicts = p(dir.path(), "verdicts.jsonl");
    let report = p(dir.path(), "report.json");
    let report2 = p(dir.path(), "report2.json");
    let cdf = p(dir.path(), "cdf.csv");

    ok(&["extract", "--events", &events, "--manifest", &manifest, "--width", "600", "--out", &features]);

    let train = ok(&[
        "train-traffic", "--features", &features, "--manifest", &manifest, "--width", "600",
        "--select", "--seed", "7", "--selection-report", &sel_report, "--out", &model,
    ]);
    assert!(train.stdout.starts_with("selected "), "got {:?}", train.stdout);
    let sel = read_json(&sel_report);
    assert!(!sel["selected"].as_array().expect("selected array").is_empty());

    ok(&["predict", "--model", &model, "--events", &events, "--manifest", &manifest, "--out", &verdicts]);
    let lines = verdict_lines(&verdicts);
    assert!(!lines.is_empty());
    for line in &lines {
        let votes = line["votes"].as_array().expect("votes");
        assert_eq!(votes.len(), 1);
        assert_eq!(votes[0]["voter"], "traffic-600s");
        assert_eq!(votes[0]["weight"], 1);
    }

    ok(&["evaluate", "--verdicts", &verdicts, "--manifest", &manifest, "--out", &report, "--cdf-csv", &cdf]);

    let rep = read_json(&report);
    let f1 = rep["pooled"]["f1"].as_f64().expect("pooled f1");
    println!("pipeline pooled f1 {f1}");
    assert!(f1 >= 0.95, "pooled f1 {f1} below target");

    let cdf_text = fs::read_to_string(&cdf).unwrap();
    let mut cdf_lines = cdf_text.lines();
    assert_eq!(cdf_lines.next(), Some("rate,fraction"));
    let last = cdf_text.lines().last().unwrap();
    assert!(last.ends_with(",1"), "CDF must end at fraction 1, got {last:?}");

    // Re-running evaluation on the same verdicts reproduces the report
    // byte for byte.
    ok(&["evaluate", "--verdicts", &verdicts, "--manifest", &manifest, "--out", &report2]);
    assert_eq!(fs::read(&report).unwrap(), fs::read(&report2).unwrap());
}

#[test]
fn unified_predict_combines_three_widths_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = testkit::traffic_corpus(611, 10, 10, 6, 1200, 0.1);
    let (events, manifest) = write_corpus_inputs(dir.path(), &corpus);

    let mut model_args = Vec::new();
    for width in ["300", "600", "1200"] {
        let features = p(dir.path(), &format!("features-{width}.csv"));
        let model = p(dir.path(), &format!("model-{width}.json"));
        ok(&["extract", "--events", &events, "--manifest", &manifest, "--width", width, "--out", &features]);
        ok(&[
            "train-traffic", "--features", &features, "--manifest", &manifest, "--width", width,
            "--feature-set", "max_tcp_window,n_unique_dns,n_remote_ips", "--out", &model,
        ]);
        model_args.push(model);
    }
    let verdicts = p(dir.path(), "verdicts.jsonl");
    let report = p(dir.path(), "report.json");

    ok(&[
        "predict", "--model", &model_args.join(","), "--unified",
        "--events", &events, "--manifest", &manifest, "--out", &verdicts,
    ]);
    let lines = verdict_lines(&verdicts);
    assert!(!lines.is_empty());
    for line in &lines {
        let votes = line["votes"].as_array().expect("votes");
        assert_eq!(votes.len(), 8, "7 traffic voters plus dhcp");
        assert_eq!(votes[7]["voter"], "dhcp");
        // No DHCP model was given, so its slot abstains with no weight.
        assert_eq!(votes[7]["verdict"], "Abstain");
        assert_eq!(votes[7]["weight"], 0);
    }

    ok(&["evaluate", "--verdicts", &verdicts, "--manifest", &manifest, "--out", &report]);
    let f1 = read_json(&report)["pooled"]["f1"].as_f64().expect("pooled f1");
    println!("unified pooled f1 {f1}");
    assert!(f1 >= 0.9, "unified pooled f1 {f1} below target");
}

#[test]
fn dhcp_model_votes_per_device_and_abstains_without_dhcp() {
    let dir = tempfile::tempdir().unwrap();
    let examples = testkit::dhcp_examples(5, 40);
    let mut records = Vec::new();
    let mut manifest = String::from("mac,name,label\n");
    for (i, (labels, label)) in examples.iter().enumerate() {
        let mac = MacAddr([0x02, 0, 0, 0, 9, i as u8]);
        let ts = Timestamp::from_seconds(100.0 + i as f64);
        records.push(testkit::dhcp_record(mac, ts, testkit::dhcp_part_for(labels)));
        manifest.push_str(&format!("{mac},dev-{i},{label}\n"));
    }
    // One monitored device that never speaks DHCP.
    let silent = MacAddr([0x02, 0, 0, 0, 9, 200]);
    records.push(iotnot::trace::PacketRecord {
        timestamp: Timestamp::from_seconds(150.0),
        device_key: silent,
        direction: iotnot::trace::Direction::Outgoing,
        frame_len: 60,
        ip: None,
        tcp: None,
        udp: None,
        dns: None,
        dhcp: None,
        http_ua: None,
    });
    manifest.push_str(&format!("{silent},silent,IoT\n"));

    let events = p(dir.path(), "events.jsonl");
    let mut buf = Vec::new();
    write_event_log(&mut buf, &records).unwrap();
    fs::write(&events, buf).unwrap();
    let manifest_path = p(dir.path(), "manifest.csv");
    fs::write(&manifest_path, manifest).unwrap();
    let model = p(dir.path(), "dhcp.json");
    let verdicts = p(dir.path(), "verdicts.jsonl");
    let report = p(dir.path(), "report.json");

    ok(&["train-dhcp", "--events", &events, "--manifest", &manifest_path, "--out", &model]);
    ok(&["predict", "--model", &model, "--events", &events, "--manifest", &manifest_path, "--out", &verdicts]);

    let lines = verdict_lines(&verdicts);
    assert_eq!(lines.len(), examples.len() + 1, "one verdict line per device");
    for line in &lines {
        let votes = line["votes"].as_array().expect("votes");
        assert_eq!(votes.len(), 1);
        assert_eq!(votes[0]["voter"], "dhcp");
    }
    let silent_line = lines
        .iter()
        .find(|l| l["device"] == silent.to_string())
        .expect("silent device gets a line");
    assert_eq!(silent_line["verdict"], "Abstain");
    assert_eq!(silent_line["votes"][0]["weight"], 0);

    // The signature rule is exactly learnable, so in-sample verdicts are
    // clean and only the silent device is left undecided.
    ok(&["evaluate", "--verdicts", &verdicts, "--manifest", &manifest_path, "--out", &report]);
    let rep = read_json(&report);
    let f1 = rep["pooled"]["f1"].as_f64().expect("pooled f1");
    assert!(f1 >= 0.95, "dhcp pooled f1 {f1}");
    assert_eq!(rep["per_device"][silent.to_string()]["coverage"], 0.0);
}

#[test]
fn unified_predict_with_wrong_widths_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = testkit::traffic_corpus(22, 6, 6, 3, 600, 0.1);
    let (events, manifest) = write_corpus_inputs(dir.path(), &corpus);
    let features = p(dir.path(), "features.csv");
    let model = p(dir.path(), "model.json");
    ok(&["extract", "--events", &events, "--manifest", &manifest, "--width", "600", "--out", &features]);
    ok(&[
        "train-traffic", "--features", &features, "--manifest", &manifest, "--width", "600",
        "--feature-set", "max_tcp_window,n_unique_dns", "--out", &model,
    ]);

    // Three copies of a 600 s model cannot fill the 300/600/1200 set.
    let triple = format!("{model},{model},{model}");
    let verdicts = p(dir.path(), "verdicts.jsonl");
    let run = iotnot(&[
        "predict", "--model", &triple, "--unified",
        "--events", &events, "--manifest", &manifest, "--out", &verdicts,
    ]);
    assert_eq!(run.status, 2, "stderr: {}", run.stderr);
    assert!(run.stderr.contains("width"), "stderr: {}", run.stderr);
    assert_eq!(run.stderr.lines().count(), 1, "diagnostics are one line");
}

#[test]
fn unknown_feature_name_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    // Flag validation precedes file access, so the paths need not exist.
    let run = iotnot(&[
        "train-traffic",
        "--features", &p(dir.path(), "none.csv"),
        "--manifest", &p(dir.path(), "none-manifest.csv"),
        "--width", "600",
        "--feature-set", "max_tcp_window,bogus",
        "--out", &p(dir.path(), "model.json"),
    ]);
    assert_eq!(run.status, 1, "stderr: {}", run.stderr);
    assert!(run.stderr.contains("unknown feature name"), "stderr: {}", run.stderr);
}

#[test]
fn usage_errors_exit_one_with_one_line_diagnostics() {
    let cases: Vec<Vec<&str>> = vec![
        // No subcommand.
        vec![],
        // Missing required arguments.
        vec!["extract", "--width", "600"],
        // Both input kinds at once.
        vec![
            "extract", "--pcap", "x.pcap", "--events", "x.jsonl",
            "--manifest", "m.csv", "--width", "600", "--out", "f.csv",
        ],
        // Zero slot width.
        vec![
            "extract", "--pcap", "x.pcap",
            "--manifest", "m.csv", "--width", "0", "--out", "f.csv",
        ],
        // Neither --select nor --feature-set.
        vec![
            "train-traffic", "--features", "f.csv", "--manifest", "m.csv",
            "--width", "600", "--out", "m.json",
        ],
        // Both --select and --feature-set.
        vec![
            "train-traffic", "--features", "f.csv", "--manifest", "m.csv",
            "--width", "600", "--select", "--feature-set", "pkt_count",
            "--out", "m.json",
        ],
        // --selection-report without --select.
        vec![
            "train-traffic", "--features", "f.csv", "--manifest", "m.csv",
            "--width", "600", "--feature-set", "pkt_count",
            "--selection-report", "s.json", "--out", "m.json",
        ],
        // Two models without --unified.
        vec![
            "predict", "--model", "a.json,b.json", "--events", "x.jsonl",
            "--out", "v.jsonl",
        ],
        // Pcap input without a manifest to attribute frames.
        vec!["predict", "--model", "a.json", "--pcap", "x.pcap", "--out", "v.jsonl"],
    ];
    for args in &cases {
        let run = iotnot(args);
        assert_eq!(run.status, 1, "iotnot {args:?}: stderr {}", run.stderr);
        assert_eq!(
            run.stderr.lines().count(),
            1,
            "iotnot {args:?} should print one line, got {:?}",
            run.stderr
        );
        assert!(run.stderr.starts_with("iotnot: "), "got {:?}", run.stderr);
    }
}
