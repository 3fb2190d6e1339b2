//! Finite-volume solution of the coupled forward (Fokker–Planck) equations.
//!
//! Each mode domain is a truncated box split into components. All modes share
//! one set of mesh faces, so outflow faces of a mode coincide with faces of
//! its successor's mesh and the outflow flux is handed over cell by cell.
//! Advection uses donor-cell upwinding, diffusion explicit central
//! differences, with the x1/x2 sweep order alternating between steps.

mod field;
mod grid;
mod partition;
mod remap;
mod scheme;
mod solver;

pub use field::{aggregated_power, total_mass, DensityField, FluxField, DENSITY_CSV_HEADER};
pub use grid::{export_grid, Grid, GridSpec, ModeGrid};
pub use partition::{
    build_partition, BoundaryKind, Component, DomainPartition, ModeDomain, Region, Side,
    SwitchingSurface, Truncation,
};
pub use remap::remap_density;
pub use scheme::{
    advect_diffuse_step, apply_boundary, cfl_dt, compute_flux, jump_exchange_step, Discretization,
    InterfaceBalance, CFL_NUMBER, INTERFACE_TOLERANCE,
};
pub use solver::{initial_discretization, solve, SolveReport, SolveResult, SolverSettings};
