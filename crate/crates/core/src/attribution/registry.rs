//! Attribution methods selectable by name.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::imageio::InputImage;

use super::classifier::{Scheduler, TokenModel};
use super::importance::{trace_to_importance, ImportanceMap};
use super::occlusion::{run_occlusion, Fill, OcclusionResult};
use super::token_insight::{run_with, Target};
use super::trace::AttributionTrace;

pub struct AttributionRequest<'a> {
    pub model: &'a dyn TokenModel,
    pub image: &'a InputImage,
    pub target: Target,
    pub max_iters: Option<usize>,
    pub scheduler: &'a Scheduler,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Attribution {
    Trace(AttributionTrace),
    Occlusion(OcclusionResult),
}

impl Attribution {
    pub fn importance(&self, grid: usize) -> Result<ImportanceMap> {
        match self {
            Self::Trace(t) => trace_to_importance(t, grid),
            Self::Occlusion(o) => o.importance(),
        }
    }

    pub fn to_json(&self) -> String {
        match self {
            Self::Trace(t) => t.to_json(),
            Self::Occlusion(o) => o.to_json(),
        }
    }
}

pub trait AttributionMethod: Send + Sync {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    fn attribute(&self, request: &AttributionRequest<'_>) -> Result<Attribution>;
}

pub struct TokenInsightMethod;

impl AttributionMethod for TokenInsightMethod {
    fn name(&self) -> &'static str {
        "token-insight"
    }

    fn summary(&self) -> &'static str {
        "greedy token discarding until the prediction flips"
    }

    fn attribute(&self, req: &AttributionRequest<'_>) -> Result<Attribution> {
        let classifier = req.model.subset_classifier(req.image)?;
        run_with(
            classifier.as_ref(),
            req.target,
            req.max_iters,
            req.scheduler,
        )
        .map(Attribution::Trace)
    }
}

pub struct OcclusionMethod {
    pub fill: Fill,
}

impl AttributionMethod for OcclusionMethod {
    fn name(&self) -> &'static str {
        match self.fill {
            Fill::Black => "occlusion-black",
            Fill::Mean => "occlusion-mean",
        }
    }

    fn summary(&self) -> &'static str {
        match self.fill {
            Fill::Black => "per-patch occlusion with black fill",
            Fill::Mean => "per-patch occlusion with image-mean fill",
        }
    }

    fn attribute(&self, req: &AttributionRequest<'_>) -> Result<Attribution> {
        run_occlusion(req.model, req.image, self.fill, req.target, req.scheduler)
            .map(Attribution::Occlusion)
    }
}

pub struct MethodRegistry {
    methods: BTreeMap<&'static str, Box<dyn AttributionMethod>>,
}

impl MethodRegistry {
    pub fn new() -> Self {
        Self {
            methods: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::new();
        r.register(Box::new(TokenInsightMethod));
        r.register(Box::new(OcclusionMethod { fill: Fill::Black }));
        r.register(Box::new(OcclusionMethod { fill: Fill::Mean }));
        r
    }

    /// Adds or replaces the method under its name.
    pub fn register(&mut self, method: Box<dyn AttributionMethod>) {
        self.methods.insert(method.name(), method);
    }

    pub fn get(&self, name: &str) -> Result<&dyn AttributionMethod> {
        self.methods
            .get(name)
            .map(Box::as_ref)
            .ok_or_else(|| Error::Unknown {
                kind: "attribution method",
                name: name.to_owned(),
                available: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.methods.keys().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn AttributionMethod> {
        self.methods.values().map(Box::as_ref)
    }
}

impl Default for MethodRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}
