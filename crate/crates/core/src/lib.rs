//! Capture-the-flag evaluation of automated data-analysis agents.
//!
//! A synthetic sales table gets a few planted anomalies ("flags"), an agent
//! explores it through a chat model, and its reported insights are verified
//! against the data and scored against the planted ground truth.

pub mod queryengine;
pub mod tabular;
pub mod insight;
pub mod protocol;
pub mod flagforge;
pub mod verify;
pub mod llmlink;
pub mod scripted;
pub mod agent;
pub mod aggregator;
pub mod explorer;
pub mod harness;
