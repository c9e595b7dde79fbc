//! Constrained pliable index coding and hierarchical data shuffling.
//!
//! The library side is organized bottom-up: finite-field linear algebra
//! (`gf`), problem instances and cache states (`model`), encoding and
//! verification (`codec`), scheme constructions and bounds (`solvers`), the
//! two-layer shuffling scheme (`shuffle`), reference baselines (`baselines`),
//! and the command-line front end (`cli`).

pub mod baselines;
pub mod cli;
pub mod codec;
pub mod gf;
pub mod model;
pub mod shuffle;
pub mod solvers;
