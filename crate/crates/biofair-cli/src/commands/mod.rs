pub mod audit;
pub mod check;
pub mod sweep;
pub mod synth;
