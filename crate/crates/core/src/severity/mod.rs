//! Severity ladders, assessment plans, and corpus generation.

mod corpus;
mod manifest;
mod plan;

pub use corpus::{
    generate_corpus, inputs_from_dir, CorpusError, CorpusOutcome, GenerateOptions, RowFailure, PLAN_FILE,
};
pub use manifest::{read_manifest, write_manifest, Manifest, ManifestError, ManifestRow, MANIFEST_FILE};
pub use plan::{
    arity, builtin_plan, family_rank, parse_plan, AssessmentPlan, InputItem, Param, PlanCell, PlanError,
    SeverityLadder, DEFAULT_POISSON_GAUSSIAN,
};
