//! Synthetic conjugate-heat-transfer data generator: Latin-hypercube pin-fin
//! layouts, a steady 2-D incompressible laminar flow solver (SIMPLE
//! pressure-velocity coupling on a staggered grid with solid blanking), and
//! a steady advection-diffusion temperature solver with a spatially varying
//! heat-flux source.
//!
//! Everything is deterministic per seed; non-converged samples are flagged
//! and excluded downstream rather than silently dropped.

mod datagen;
mod domain;
mod error;
mod flow;
mod flux;
mod layout;
mod temperature;

pub use datagen::{generate, load_flow, GenConfig, GenSummary, SampleStatus};
pub use domain::DomainSpec;
pub use error::{Result, SolverError};
pub use flow::{solve_flow, FlowOptions, SolveResult};
pub use flux::{accumulated_heat, gen_flux, FluxField};
pub use layout::{sample_layouts, LayoutConstraints, PinLayout};
pub use temperature::{outlet_bulk_temperature, solve_temperature};
