#![allow(dead_code)]

pub mod corpus;
pub mod oracle;

use std::path::{Path, PathBuf};

use ctf_core::agent::AgentKind;
use ctf_core::harness::{run_experiment, BackendSpec, HarnessError, RunConfig, RunOutcome};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn base_csv() -> PathBuf {
    fixtures().join("sales_base.csv")
}

pub fn transcript(agent: AgentKind, flag: u32) -> PathBuf {
    fixtures().join(format!("transcripts/{agent}_flag{flag}.jsonl"))
}

/// Replays one bundled transcript with its flag planted.
pub fn replay(agent: AgentKind, flag: u32, out: &Path) -> Result<RunOutcome, HarnessError> {
    let mut cfg = RunConfig::new(agent, base_csv(), BackendSpec::Replay(transcript(agent, flag)), out.to_path_buf());
    cfg.flags = vec![flag];
    run_experiment(&cfg)
}
