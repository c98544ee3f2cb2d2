//! Linear canonical transforms (LCT), short-time LCTs and numerical checks
//! of their time/frequency uncertainty relations.

pub mod battery;
pub mod error;
pub mod lct;
pub mod moments;
pub mod params;
pub mod signal;
pub mod stlct;
pub mod uncertainty;

pub use error::{Error, Result};
pub use params::ParamMatrix;
pub use signal::{Grid, SampledSignal};
