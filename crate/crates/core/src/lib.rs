//! Spectral laboratory for comparing Navier-Stokes flows in a thin
//! spherical shell (with perfect-slip Navier boundary conditions) against
//! the 2D Navier-Stokes flow on the unit sphere.
//!
//! The crate is organized around the objects of that comparison:
//!
//! - [`grid`]: quadrature grids and scalar spectral transforms on the
//!   sphere and the shell;
//! - [`surfcalc`]: tangential differential calculus on the sphere and full
//!   gradients on the shell, plus empirical inequality probes;
//! - [`avgext`]: weighted radial averages, constant/weighted extensions and
//!   the dual-forcing extensions that connect the two domains;
//! - [`sphere_ns`]: the 2D solver in vorticity-streamfunction form;
//! - [`shell_ns`]: the 3D solver in toroidal-poloidal form, plus the
//!   manufactured-solution mode;
//! - [`harness`]: difference functionals, eps-sweeps, rate fits and the
//!   global-estimate mode.

pub mod avgext;
pub mod cheb;
pub mod checkpoint;
pub mod error;
pub mod gauss;
pub mod grid;
pub mod harness;
pub mod linalg;
pub mod opscheck;
pub mod shell_ns;
pub mod sphere_ns;
pub mod surfcalc;

pub use error::{Error, Result};
