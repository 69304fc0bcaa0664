pub mod error;
pub mod seed;
pub mod device;
pub mod waveform;
pub mod circuit;
pub mod plasticity;
pub mod snn;
