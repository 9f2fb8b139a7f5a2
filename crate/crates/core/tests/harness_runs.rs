mod common;

use std::fs;

use ctf_core::agent::AgentKind;
use ctf_core::harness::{
    is_replay_miss, load_insights, reverify_dir, run_experiment, score_dir, BackendSpec, HarnessError, RunConfig,
};
use ctf_core::tabular::{export_csv, synth_sales};
use ctf_core::verify::MatchMode;

#[test]
fn missing_transcript_entry_fails_the_agent_stage() {
    let dir = tempfile::tempdir().unwrap();
    let full = fs::read_to_string(common::transcript(AgentKind::Aggregator, 1)).unwrap();
    let lines: Vec<&str> = full.lines().collect();
    // Drop one window response from the middle of the run.
    let cut: String = lines
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != lines.len() / 2)
        .map(|(_, l)| format!("{l}\n"))
        .collect();
    let transcript = dir.path().join("cut.jsonl");
    fs::write(&transcript, cut).unwrap();

    let out = dir.path().join("run");
    let mut cfg = RunConfig::new(AgentKind::Aggregator, common::base_csv(), BackendSpec::Replay(transcript), out.clone());
    cfg.flags = vec![1];
    let err = run_experiment(&cfg).unwrap_err();
    assert!(is_replay_miss(&err), "{err}");
    assert_eq!(err.exit_code(), 3);
    match &err {
        HarnessError::Stage { stage, message } => {
            assert_eq!(stage, "agent");
            assert!(message.starts_with("ReplayMiss"), "{message}");
        }
        other => panic!("unexpected {other:?}"),
    }
    let error = fs::read_to_string(out.join("error.txt")).unwrap();
    assert!(error.contains("ReplayMiss"));
    let partial = fs::read_to_string(out.join("transcripts.jsonl")).unwrap();
    // Windows are scanned concurrently, so later calls may also have landed.
    let kept = partial.lines().count();
    assert!(kept > 0 && kept < lines.len(), "{kept} of {} calls kept", lines.len());
    assert!(!out.join("report.json").exists());
}

#[test]
fn replayed_runs_can_be_rescored_and_rechecked() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let outcome = common::replay(AgentKind::Explorer, 1, &out).unwrap();
    let strict = score_dir(&out, &out.join("truth.json"), MatchMode::Strict).unwrap();
    assert_eq!(strict, outcome.report.strict);
    assert_eq!(load_insights(&out).unwrap(), outcome.result.ranked);

    let (table, _) = ctf_core::harness::plant_builtin(&ctf_core::harness::load_dataset(&common::base_csv()).unwrap(), &[1]).unwrap();
    let (checks, stale) = reverify_dir(&out, &table).unwrap();
    assert!(stale.is_empty());
    assert!(checks.iter().all(|c| c.recorded == c.recomputed));
}

#[test]
fn scripted_runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    fs::write(&data, export_csv(&synth_sales(7, 1000))).unwrap();
    for agent in [AgentKind::Aggregator, AgentKind::Explorer] {
        let run = |name: &str| {
            let mut cfg = RunConfig::new(agent, data.clone(), BackendSpec::Scripted, dir.path().join(format!("{agent}-{name}")));
            cfg.flags = vec![1, 2, 3];
            cfg.explorer.n_rounds = 1;
            run_experiment(&cfg).unwrap().dir
        };
        let (a, b) = (run("a"), run("b"));
        for file in ["insights.jsonl", "report.json", "report.md", "transcripts.jsonl", "views.jsonl"] {
            assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{agent} {file}");
        }
    }
}

#[test]
fn bad_config_is_rejected_before_any_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let mut cfg = RunConfig::new(AgentKind::Aggregator, common::base_csv(), BackendSpec::Scripted, out.clone());
    cfg.aggregator.window = 0;
    let err = run_experiment(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(!out.exists());
}
