//! Recall root-cause analysis for openFDA medical-device recalls: ingestion,
//! cleaning, DBSCAN clustering of root-cause text, prefix-similarity
//! aggregation and ranked reports.

pub mod aggregate;
pub mod dataset;
pub mod dbscan;
pub mod fixture;
pub mod openfda_client;
pub mod report;
pub mod textprep;
