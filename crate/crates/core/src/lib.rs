pub mod ingest;
pub mod rng;
pub mod sax;
pub mod motif;
pub mod cluster;
pub mod validity;
pub mod synth;
pub mod pipeline;
