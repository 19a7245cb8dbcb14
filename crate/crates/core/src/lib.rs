//! Superball packings in high dimensions, made executable.
//!
//! * [`geometry`]: the mixed `ℓ_{p,k}` norm, superball volumes and samplers.
//! * [`constants`]: Clarkson inequalities, the convexity modulus and the
//!   `c_p` constant chain behind the `log(2/c_p)·n/2^n` density bound.
//! * [`gibbs`]: the grand canonical hard superball model: exact partition
//!   functions where available and a birth–death sampler elsewhere.
//! * [`lattice_graph`]: cube tiling, auxiliary graph, greedy independent set
//!   and certified packings.
//! * [`thermo`]: pressure and entropy-density estimators.
//! * [`cli`]: the `superball` command-line front end.

pub mod cli;
pub mod constants;
pub mod error;
pub mod gibbs;
pub mod geometry;
pub mod lattice_graph;
pub mod seed;
pub mod thermo;

pub use error::{Error, Result};
pub use geometry::{BlockSpec, Point, Region, SpaceParams};
