pub mod fit;
pub mod gc;
pub mod metrics;
pub mod simulate;
