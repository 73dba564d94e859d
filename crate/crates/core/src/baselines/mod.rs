//! Comparison systems: explicit ALS and calibrated BPR.

pub mod als;
pub mod bpr;
pub mod calibration;

pub use als::{train_als, AlsConfig, AlsModel};
pub use bpr::{train_bpr, BprConfig, BprModel, BprStats};
pub use calibration::Calibration;
