//! Experiment harness around the samplers: configuration, data ingestion,
//! replication, record emission and theory verification.

pub mod config;
pub mod ingest;
pub mod records;
pub mod run;
pub mod verify;
