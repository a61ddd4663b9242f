//! Lagrangian active inference as constrained message passing on
//! Forney-style factor graphs.

pub mod dsl;
pub mod engine;
pub mod generate;
pub mod gfe;
pub mod graph;
pub mod math;
pub mod mixture;
pub mod planning;
pub mod render;
pub mod tmaze;
