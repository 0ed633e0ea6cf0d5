//! Fragile points method for quasi-static hyperelasticity: median-dual point
//! clouds, discontinuous least-squares trial functions, interior penalty
//! coupling and damped explicit dynamics.

pub mod approx;
pub mod bench;
pub mod cli;
pub mod dynamics;
pub mod geometry;
pub mod material;
pub mod mesh;
pub mod solver;
