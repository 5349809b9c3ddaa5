//! Sensing-based random access for a secondary user sharing a primary
//! user's channel: physical-layer models, service rates of four access
//! schemes, stability-constrained throughput optimization, a slotted queue
//! simulator and feedback-based estimation of the primary's parameters.

pub mod cli;
pub mod error;
pub mod estimator;
pub mod mathcore;
pub mod optimizer;
pub mod phy;
pub mod schemes;
pub mod sim;

pub use error::{Error, Result};
pub use optimizer::{optimize, OptimizationRequest, OptimizationResult};
pub use phy::{PhyParams, SensingMode, SensingPoint};
pub use schemes::{SchemeConfig, Variant};
pub use sim::{SimConfig, SimMode, SimResult};
