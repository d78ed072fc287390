//! Greedy token discarding.
//!
//! Each iteration removes, one at a time, every token still present,
//! re-runs the classifier, and permanently discards the token whose absence
//! leaves the lowest target-class confidence (smallest index on ties). The
//! search stops once the target class is no longer the top prediction, when
//! no tokens remain, or at the iteration cap.
//!
//! Cost: one full-input evaluation plus `N - j` evaluations at iteration
//! `j`, i.e. `1 + Σ_{j<k} (N - j)` for a `k`-step trace, quadratic in `N`
//! when the search runs long. The class token is never a candidate.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::vit::{Prediction, TokenSubset};

use super::classifier::{Scheduler, SubsetClassifier};
use super::trace::{AttributionStep, AttributionTrace, TraceStatus, TRACE_SCHEMA};

/// Which class the search tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Target {
    /// The full input's top prediction.
    #[default]
    Auto,
    Class(usize),
}

impl FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Self::Auto);
        }
        s.parse()
            .map(Self::Class)
            .map_err(|_| format!("expected \"auto\" or a class index, got {s:?}"))
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Auto => f.write_str("auto"),
            Self::Class(c) => write!(f, "{c}"),
        }
    }
}

impl Target {
    /// Resolves against the full-input prediction; an explicit class must
    /// already be the top prediction.
    pub fn resolve(self, initial: &Prediction) -> Result<usize> {
        match self {
            Self::Auto => Ok(initial.top_class),
            Self::Class(c) if c >= initial.probs.len() => Err(Error::ClassOutOfRange {
                class: c,
                num_classes: initial.probs.len(),
            }),
            Self::Class(c) if c != initial.top_class => Err(Error::InitialMisprediction {
                requested: c,
                predicted: initial.top_class,
                confidence: initial.confidence,
            }),
            Self::Class(c) => Ok(c),
        }
    }
}

/// Outcome of removing one token from the current subset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub token: usize,
    /// Target-class confidence with the token removed.
    pub confidence: f32,
    /// Top class with the token removed.
    pub top_class: usize,
}

/// Evaluates every single-token removal from `current`, in ascending token
/// order.
pub fn evaluate_candidates<C: SubsetClassifier + ?Sized>(
    model: &C,
    current: &TokenSubset,
    class: usize,
    scheduler: &Scheduler,
) -> Result<Vec<Candidate>> {
    if current.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    scheduler.map(current.indices(), |&token| {
        let pred = model.evaluate(&current.without(token))?;
        let confidence = *pred.probs.get(class).ok_or(Error::ClassOutOfRange {
            class,
            num_classes: pred.probs.len(),
        })?;
        Ok(Candidate {
            token,
            confidence,
            top_class: pred.top_class,
        })
    })
}

/// The candidate with the lowest confidence; ties go to the smallest token.
pub fn greedy_step(candidates: &[Candidate]) -> Result<Candidate> {
    candidates
        .iter()
        .copied()
        .reduce(|best, c| {
            if c.confidence < best.confidence
                || (c.confidence == best.confidence && c.token < best.token)
            {
                c
            } else {
                best
            }
        })
        .ok_or(Error::EmptyCandidates)
}

/// Configured greedy search.
#[derive(Debug, Default)]
pub struct TokenInsight {
    max_iters: Option<usize>,
    scheduler: Scheduler,
}

impl TokenInsight {
    pub fn new() -> Self {
        Self::default()
    }

    /// Iteration cap; `None` means the token count.
    pub fn max_iters(mut self, max_iters: Option<usize>) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn scheduler(mut self, scheduler: Scheduler) -> Self {
        self.scheduler = scheduler;
        self
    }

    pub fn run<C: SubsetClassifier + ?Sized>(
        &self,
        model: &C,
        target: Target,
    ) -> Result<AttributionTrace> {
        run_with(model, target, self.max_iters, &self.scheduler)
    }
}

/// Sequential search with the default scheduler.
pub fn run_token_insight<C: SubsetClassifier + ?Sized>(
    model: &C,
    target: Target,
    max_iters: Option<usize>,
) -> Result<AttributionTrace> {
    run_with(model, target, max_iters, &Scheduler::sequential())
}

pub(crate) fn run_with<C: SubsetClassifier + ?Sized>(
    model: &C,
    target: Target,
    max_iters: Option<usize>,
    scheduler: &Scheduler,
) -> Result<AttributionTrace> {
    let n = model.token_count();
    let max_iters = max_iters.unwrap_or(n);
    let mut current = TokenSubset::full(n);
    let initial = model.evaluate(&current)?;
    let class = target.resolve(&initial)?;
    let initial_confidence = initial.probs[class];

    let mut steps = Vec::new();
    let mut previous = initial_confidence;
    let status = loop {
        if current.is_empty() {
            break TraceStatus::Exhausted;
        }
        if steps.len() >= max_iters {
            break TraceStatus::MaxItersReached;
        }
        let candidates = evaluate_candidates(model, &current, class, scheduler)?;
        let chosen = greedy_step(&candidates)?;
        current = current.without(chosen.token);
        steps.push(AttributionStep {
            iteration: steps.len() + 1,
            token: chosen.token,
            confidence: chosen.confidence,
            drop: previous - chosen.confidence,
        });
        previous = chosen.confidence;
        if chosen.top_class != class {
            break TraceStatus::Flipped;
        }
    };

    Ok(AttributionTrace {
        schema: TRACE_SCHEMA,
        target_class: class,
        initial_confidence,
        status,
        steps,
    })
}
