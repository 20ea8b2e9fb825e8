//! Text-described indoor scenes to 3D cuboid layouts and layout-based
//! image ranking.
//!
//! The pipeline: a scene description (triplet DSL or restricted English)
//! parses into semantic triplets; triplets plus prior knowledge compile
//! into an interval constraint; a branch-and-prune solver finds feasible
//! 3D layouts; sampled layouts project through sampled cameras into 2D
//! reference configurations; database images (per-image object detections)
//! are scored by bounding-box matching against those references and
//! ranked.
//!
//! Modules follow the pipeline: [`interval`] (arithmetic substrate),
//! [`query`] (parsing), [`scene`] (object models and geometry),
//! [`relations`] (constraint semantics and compilation), [`solver`]
//! (interval search with difference-bound shrinkage), [`projection`]
//! (cameras and 2D boxes), [`retrieval`] (matching, ranking, metrics) and
//! [`pipeline`] (configuration, file formats and the end-to-end runner).

pub mod interval;
pub mod pipeline;
pub mod projection;
pub mod query;
pub mod relations;
pub mod retrieval;
pub mod scene;
pub mod solver;

pub use interval::{Interval, Tribool};
pub use pipeline::RunConfig;
pub use query::{parse_dsl, parse_english, Query, SemanticTriplet};
pub use relations::{compile, CompiledConstraint, EvalContext, RelationThresholds};
pub use scene::ObjectLibrary;
pub use solver::{solve, SolverConfig};
