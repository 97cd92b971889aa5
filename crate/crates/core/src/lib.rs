//! Decentralized secondary frequency control for inverter-based islanded
//! microgrids: reduced uniform-frequency models, their closed-form modal
//! analysis, and a quasi-static phasor network simulator.

pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod modal;
pub mod model;
pub mod network;
pub mod ode;
pub mod schema;
pub mod testbed;
pub mod trajectory;

pub use dynamics::{adhoc_rhs, damped_rhs, delta_omega, integrate, ReducedModel, ReducedSystem};
pub use error::{Error, Result, ValidationErrors};
pub use model::{
    droop_from_percent, validate, InverterParams, LoadEvent, MicrogridScenario, SimSettings,
    Violation,
};
pub use trajectory::{NetworkSample, Sample, Trajectory};
