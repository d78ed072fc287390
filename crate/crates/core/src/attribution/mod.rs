//! Token-discarding attribution and the occlusion baseline, written against
//! abstract classifiers so closed-form stubs can drive the search.

mod classifier;
mod importance;
mod occlusion;
mod registry;
pub mod stubs;
mod token_insight;
mod trace;

pub use classifier::{
    CountingClassifier, ImageClassifier, Scheduler, SubsetClassifier, TokenModel,
    ViTSubsetClassifier,
};
pub use importance::{trace_to_importance, ImportanceEntry, ImportanceMap};
pub use occlusion::{occlude_patch, rank_by_drop, run_occlusion, Fill, OcclusionResult};
pub use registry::{
    Attribution, AttributionMethod, AttributionRequest, MethodRegistry, OcclusionMethod,
    TokenInsightMethod,
};
pub use token_insight::{
    evaluate_candidates, greedy_step, run_token_insight, Candidate, Target, TokenInsight,
};
pub use trace::{AttributionStep, AttributionTrace, TraceStatus, TRACE_SCHEMA};
