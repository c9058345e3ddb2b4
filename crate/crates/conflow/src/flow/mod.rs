pub mod axisym;
pub mod config;
pub mod gauge;
pub mod run;
pub mod stepper;
pub mod trace;

pub use axisym::{axisymmetric_config, run_axisymmetric, AxisymmetricRun, MomentState};
pub use config::*;
pub use gauge::GaugeEvent;
pub use run::{run, run_from, setup, FlowRun, RunStatus, Snapshot};
pub use trace::{FlowTrace, TraceRecord};
