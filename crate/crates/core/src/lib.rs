//! Simulation and analysis toolkit for a single-axis air-bearing sine exciter:
//! motion profiles, stage dynamics with friction, PID/ILC servo, sensor models
//! and coherent harmonic analysis.

pub mod analysis;
pub mod error;
pub mod harness;
pub mod plant;
pub mod sensors;
pub mod servo;
pub mod signalcore;
pub mod trajectory;

pub use error::{Error, Result};
pub use signalcore::{TimeSeries, Unit};
