//! Ground-truth goal semantics for GridLU instructions.
//!
//! Relation instructions are decided by `holds`: an existential check over
//! entity pairs at a fixed per-relation cell offset. Arrangement
//! instructions are decided by `check_arrangement`: four same-colored
//! square blocks must form some transform of the word's template (or
//! satisfy its predicate). The crate also derives the arrangement
//! combinatorics reported alongside the task definition and samples goal
//! states for expert datasets.

mod arrangements;
pub mod oracle;
mod relations;

pub use arrangements::{
    binomial, check_arrangement, count_goal_states, sample_arrangement_goal, FormTemplate,
    GoalCheckResult, PlacementError, Symmetry, TemplateKind, TemplateParseError, TemplateSet,
    TransformOp,
};
pub use relations::{holds, matches, relation_offset, success};
