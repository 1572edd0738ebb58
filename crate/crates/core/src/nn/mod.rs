//! Minimal differentiable-programming toolkit used by the agents.

pub mod graph;
pub mod layers;
pub mod params;

pub use graph::{Gradients, Graph, Var};
pub use params::{ParamId, ParamStore};
