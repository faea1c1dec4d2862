pub mod analysis;
pub mod calibration;
pub mod cli;
pub mod error;
pub mod forecast;
pub mod ingest;
pub mod linalg;
pub mod random;
pub mod regression;
pub mod segmentation;
pub mod simulation;
pub mod sn;
