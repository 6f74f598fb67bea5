pub mod cli;
pub mod cluster;
pub mod ingest;
pub mod matprof;
pub mod resample;
pub mod stats;
pub mod synth;
pub mod warp;
