//! Simulation and verification toolkit for hyperkähler mean curvature
//! flow (H-flow) of immersed 2-tori in flat hyperkähler 4-tori.
//!
//! The crate is organized as a pipeline: [`ambient`] fixes the flat
//! hyperkähler structure, [`surface`] turns a discrete immersion into
//! pointwise geometry, [`flow`] advances it in time, [`diagnostics`]
//! measures it, and [`scenario`]/[`io`] handle configuration and output.

pub mod ambient;
pub mod deriv;
pub mod diagnostics;
pub mod error;
pub mod fft2;
pub mod flow;
pub mod frame;
pub mod grid;
pub mod io;
pub mod scenario;
pub mod surface;

pub use ambient::AmbientSpace;
pub use deriv::Scheme;
pub use diagnostics::{DiagnosticsRecord, ResidualReport, SeriesReport};
pub use error::{HflowError, Result};
pub use flow::{
    DtMode, FlowStatus, FlowTrajectory, IntegratorConfig, TimeMethod, VelocityKind,
};
pub use grid::GridDims;
pub use scenario::{build_ambient, build_initial_surface, parse_scenario, serialize_scenario, InitialMap, RhoMode, ScenarioConfig};
pub use surface::{GeometryFields, SurfaceState};
