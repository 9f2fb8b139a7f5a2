mod common;

use std::path::Path;
use std::process::{Command, Output};

fn ctf(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctf"))
        .args(args)
        .current_dir(cwd)
        .env_remove("CTF_LLM_API_KEY")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn plant_run_score_report_verify() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ok = |args: &[&str]| {
        let o = ctf(args, d);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
        o
    };
    ok(&["synth", "--seed", "5", "--rows", "1000", "--out", "base.csv"]);
    assert!(stdout(&ok(&["stats", "--data", "base.csv"])).contains("Total Sales"));
    let planted = ok(&["plant", "--data", "base.csv", "--flag", "1", "--flag", "3", "--out", "planted.csv", "--truth", "truth.json"]);
    assert!(stdout(&planted).contains("flag 3: "));
    let truth: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("truth.json")).unwrap()).unwrap();
    assert_eq!(truth.as_array().unwrap().len(), 2);

    ok(&[
        "run", "aggregator", "--data", "planted.csv", "--truth", "truth.json", "--backend", "scripted", "--out", "run1",
        "--set", "n_aggregations=5",
    ]);
    for f in ["config.txt", "truth.json", "transcripts.jsonl", "views.jsonl", "insights.jsonl", "report.json", "report.md", "run.json"] {
        assert!(d.join("run1").join(f).exists(), "{f}");
    }
    assert!(std::fs::read_to_string(d.join("run1/config.txt")).unwrap().contains("n_aggregations = 5"));

    let score: serde_json::Value = serde_json::from_str(&stdout(&ok(&["score", "--run", "run1", "--truth", "truth.json", "--strict"]))).unwrap();
    assert_eq!(score["total_flags"], 2);
    assert_eq!(score["mode"], "strict");

    let md = stdout(&ok(&["report", "--run", "run1", "--run", "run1"]));
    assert!(md.starts_with("# Capture report"));
    assert!(md.contains("## Flag 1: ") && md.contains("## Flag 3: ") && md.contains("## Other"));
    assert!(md.contains("Run 2 (aggregator)"));

    assert!(stdout(&ok(&["verify", "--run", "run1", "--data", "planted.csv"])).contains("0 disagreements, 0 stale views"));
    let stale = ctf(&["verify", "--run", "run1", "--data", "base.csv"], d);
    assert_eq!(stale.status.code(), Some(3));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let base = common::base_csv();
    let base = base.to_str().unwrap();

    let unknown_key = ctf(&["run", "explorer", "--data", base, "--backend", "scripted", "--out", "r", "--set", "bogus=1"], d);
    assert_eq!(unknown_key.status.code(), Some(2), "{}", stderr(&unknown_key));

    let no_key = ctf(&["run", "explorer", "--data", base, "--out", "r"], d);
    assert_eq!(no_key.status.code(), Some(2));
    assert!(stderr(&no_key).contains("CTF_LLM_API_KEY"));

    std::fs::create_dir(d.join("full")).unwrap();
    std::fs::write(d.join("full/x"), "").unwrap();
    let not_empty = ctf(&["run", "explorer", "--data", base, "--backend", "scripted", "--out", "full"], d);
    assert_eq!(not_empty.status.code(), Some(2));

    // The flag 1 transcript cannot answer a run over unplanted data.
    let transcript = common::transcript(ctf_core::agent::AgentKind::Aggregator, 1);
    let backend = format!("replay:{}", transcript.display());
    let miss = ctf(&["run", "aggregator", "--data", base, "--backend", &backend, "--out", "miss"], d);
    assert_eq!(miss.status.code(), Some(3));
    assert!(stderr(&miss).contains("agent: ReplayMiss"), "{}", stderr(&miss));
    assert!(d.join("miss/error.txt").exists());

    let bad_backend = ctf(&["run", "aggregator", "--data", base, "--backend", "cloud", "--out", "x"], d);
    assert_eq!(bad_backend.status.code(), Some(2));
}

#[test]
fn replay_fixture_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let base = common::base_csv();
    let transcript = common::transcript(ctf_core::agent::AgentKind::Explorer, 2);
    let backend = format!("replay:{}", transcript.display());
    let o = ctf(&["run", "explorer", "--data", base.to_str().unwrap(), "--backend", &backend, "--out", "r", "--set", "flags=2"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("captured 1/1"));
    let md = std::fs::read_to_string(d.join("r/report.md")).unwrap();
    assert!(md.contains("$49,473,404") || md.contains("49473404"), "{md}");
}
