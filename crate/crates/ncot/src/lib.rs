//! Non-conservative optimal transport on discrete measures.
//!
//! Transported mass is scaled by a pair-dependent factor m(x, y), and only
//! the shape of the target distribution is prescribed. The crate solves the
//! resulting Kantorovich-type problem exactly as a linear program, certifies
//! optimality through dual potentials, extracts deterministic transport maps
//! from the characteristic equations, verifies the dynamic (flow) formulation
//! at desk scale, and applies the machinery to optimal portfolio rebalancing
//! on priced market graphs.

pub mod duality;
pub mod dynamics;
pub mod error;
pub mod instances;
pub mod io;
pub mod lp;
pub mod maps;
pub mod market;
pub mod measure;
pub mod solver;

pub use error::Error;
