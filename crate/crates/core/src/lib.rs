//! Object-level semantic mapping in dense clutter.
//!
//! The crate covers a synthetic tabletop simulator ([`sim`]), data association
//! driven by a geometric consistency score ([`association`]), contact relation
//! inference between surface features ([`relations`]), a two-stage factor-graph
//! optimizer and the mapping pipeline ([`optimizer`]), and detection / pose
//! accuracy metrics ([`evaluation`]).

pub mod association;
pub mod autodiff;
pub mod evaluation;
pub mod geometry;
pub mod optimizer;
pub mod relations;
pub mod sim;
