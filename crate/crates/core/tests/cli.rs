use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn veridict(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_veridict"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = veridict(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn help_lists_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let help = ok(dir.path(), &["--help"]);
    for cmd in [
        "validate", "profile", "fit-cdf", "features", "train", "eval", "stats", "plot", "pipeline",
        "synth",
    ] {
        assert!(help.contains(cmd), "missing {cmd}");
    }
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--count", "5", "--out", "good.jsonl"]);
    assert!(ok(d, &["validate", "good.jsonl"]).contains("ok"));

    // shift the last record's blob window past the end
    let text = fs::read_to_string(d.join("good.jsonl")).unwrap();
    let mut lines: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let last = lines.last_mut().unwrap();
    last["blob_offset"] = serde_json::json!(last["blob_offset"].as_u64().unwrap() + 4);
    let broken: String = lines.iter().map(|l| format!("{l}\n")).collect();
    fs::write(d.join("bad.jsonl"), broken).unwrap();
    fs::copy(d.join("good.bin"), d.join("bad.bin")).unwrap();
    // a header names the blob explicitly; point it at the copy
    let fixed = fs::read_to_string(d.join("bad.jsonl"))
        .unwrap()
        .replacen("good.bin", "bad.bin", 1);
    fs::write(d.join("bad.jsonl"), fixed).unwrap();

    let out = veridict(d, &["validate", "bad.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    let report =
        String::from_utf8_lossy(&out.stdout).to_string() + &String::from_utf8_lossy(&out.stderr);
    assert!(report.contains("synth-train-00004"), "{report}");

    let missing = veridict(d, &["validate", "nope.jsonl"]);
    assert!(!missing.status.success());
}

#[test]
fn staged_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &["synth", "--count", "60", "--seed", "1", "--out", "tr.jsonl"],
    );
    ok(
        d,
        &[
            "synth", "--count", "40", "--seed", "2", "--split", "test", "--out", "te.jsonl",
        ],
    );
    ok(d, &["profile", "tr.jsonl", "--out", "ptr.jsonl"]);
    ok(
        d,
        &[
            "profile",
            "tr.jsonl",
            "--span",
            "gold",
            "--out",
            "ptr_gold.jsonl",
        ],
    );
    ok(d, &["profile", "te.jsonl", "--out", "pte.jsonl"]);
    ok(
        d,
        &["fit-cdf", "--profiles", "ptr.jsonl", "--out", "bank.json"],
    );
    for (m, p, f) in [
        ("tr.jsonl", "ptr.jsonl", "ftr.bin"),
        ("te.jsonl", "pte.jsonl", "fte.bin"),
    ] {
        let out = veridict(
            d,
            &[
                "features",
                m,
                "--scheme",
                "approx_concat",
                "--profiles",
                p,
                "--bank",
                "bank.json",
                "--out",
                f,
            ],
        );
        assert!(out.status.success());
        // progress goes to stderr
        let s = String::from_utf8_lossy(&out.stderr);
        assert!(s.contains("dimension 24"), "{s}");
    }
    ok(
        d,
        &[
            "train",
            "--features",
            "ftr.bin",
            "--seeds",
            "1,2",
            "--out",
            "m_<seed>.json",
        ],
    );
    assert!(d.join("m_1.json").is_file() && d.join("m_2.json").is_file());
    ok(
        d,
        &[
            "eval",
            "--model",
            "m_1.json",
            "--model",
            "m_2.json",
            "--features",
            "fte.bin",
            "--report",
            "r.json",
        ],
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(report["per_seed"].as_array().unwrap().len(), 2);

    ok(
        d,
        &[
            "stats",
            "--profiles",
            "ptr_gold.jsonl",
            "--family",
            "6",
            "--out",
            "t.md",
        ],
    );
    let table = fs::read_to_string(d.join("t.md")).unwrap();
    assert!(table.contains("| 6 |"));

    ok(
        d,
        &[
            "plot",
            "curves",
            "--profiles",
            "ptr_gold.jsonl",
            "--out-dir",
            "figs",
        ],
    );
    assert!(d.join("figs/density_layer6.svg").is_file());
    ok(
        d,
        &[
            "plot",
            "projection",
            "tr.jsonl",
            "--example",
            "synth-train-00000",
            "--layer",
            "6",
            "--out",
            "p.svg",
        ],
    );
    assert!(fs::read_to_string(d.join("p.svg"))
        .unwrap()
        .starts_with("<svg"));
    let card = ok(
        d,
        &[
            "plot",
            "card",
            "te.jsonl",
            "--example",
            "synth-test-00001",
            "--profiles",
            "pte.jsonl",
            "--prediction",
            "raw=correct",
        ],
    );
    assert!(card.contains("- cos per layer: ["), "{card}");

    // features needing a bank without one
    let out = veridict(
        d,
        &[
            "features",
            "te.jsonl",
            "--scheme",
            "approx_weight",
            "--out",
            "x.bin",
        ],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("CDF bank"));
}

#[test]
fn pipeline_command_writes_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &["synth", "--count", "60", "--seed", "1", "--out", "tr.jsonl"],
    );
    ok(
        d,
        &[
            "synth", "--count", "60", "--seed", "2", "--split", "test", "--out", "te.jsonl",
        ],
    );
    ok(
        d,
        &[
            "--jobs",
            "2",
            "pipeline",
            "--train",
            "tr.jsonl",
            "--test",
            "te.jsonl",
            "--seeds",
            "1",
            "--out-dir",
            "run",
            "--no-plots",
        ],
    );
    assert!(d.join("run/metrics.json").is_file());
    assert!(!d.join("run/figures").exists());

    let out = veridict(
        d,
        &[
            "pipeline",
            "--train",
            "tr.jsonl",
            "--test",
            "te.jsonl",
            "--scheme",
            "approx_weight",
            "--no-fit-cdf",
            "--out-dir",
            "x",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no bank_path"));
}
