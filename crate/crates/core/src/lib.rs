//! Core of the questd achievement daemon: the achievement catalog, developer
//! events and their detectors, report ingestion, the event-sourced engine and
//! the statistics used to evaluate experiment groups.

pub mod catalog;
pub mod engine;
pub mod events;
pub mod ingestion;
pub mod stats;
