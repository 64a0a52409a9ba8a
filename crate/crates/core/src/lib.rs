//! Nonconforming virtual element discretization of steady
//! advection-diffusion-reaction problems on polygonal meshes of the unit
//! square, stabilized by continuous interior penalty and with Dirichlet data
//! imposed by a symmetric Nitsche method.

pub mod cli;
mod error;
pub mod forms;
pub mod io;
pub mod mesh;
pub mod polybasis;
pub mod system;
pub mod vemspace;
pub mod verification;

pub use error::{Error, Result};
