//! Triadic preferential-attachment random graph.
//!
//! The process starts from a single triangle and evolves in discrete steps.
//! At each step either a new vertex joins two existing vertices, or three
//! existing vertices interact; the interacting triangle gains one unit of
//! weight and each of its three edges gains one unit. Selection is either
//! weight-proportional ("preferential") or uniform, controlled by the
//! parameters `(p, r, q)`.
//!
//! The crate has five parts:
//!
//! * [`theory`] — closed-form limit quantities: the coefficients `(alpha, beta)`,
//!   the limiting weight distribution `x_w`, its power-law tail, and the
//!   scaling sequences `b_n`, `e_n`.
//! * [`graph`] — the evolving weighted graph state with exact structural
//!   invariants and O(1) weight-proportional sampling via token arrays.
//! * [`engine`] — step resolution and deterministic, seeded simulation runs
//!   with checkpointed histograms and tracked-vertex trajectories.
//! * [`oracle`] — exact rational enumeration of a single step's outcome
//!   distribution on small states, used to validate the engine.
//! * [`analysis`] — statistical comparison of simulation output against the
//!   limit laws: distribution errors, power-law fits, martingale diagnostics.

pub mod analysis;
pub mod engine;
pub mod graph;
pub mod oracle;
pub mod theory;
