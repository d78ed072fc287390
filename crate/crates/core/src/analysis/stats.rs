//! Cohort statistics over attribution traces: tokens discarded until the
//! flip, the largest single-token confidence drop, and the mean confidence
//! curve over removal iterations.

use serde::{Deserialize, Serialize};

use crate::attribution::{AttributionTrace, TraceStatus};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub image_id: String,
    pub tokens_discarded: usize,
    pub max_single_drop: f64,
    pub flipped: bool,
}

/// Five-number summary plus mean. Quartiles interpolate linearly between
/// order statistics at position `q · (n - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    /// `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(Self {
            count: sorted.len(),
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
            median: quantile_sorted(&sorted, 0.5),
            q1: quantile_sorted(&sorted, 0.25),
            q3: quantile_sorted(&sorted, 0.75),
            min: sorted[0],
            max: sorted[sorted.len() - 1],
        })
    }
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    /// Traces with at least `iteration` steps.
    pub active: usize,
    pub mean_confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortStats {
    pub records: Vec<TraceRecord>,
    pub tokens_discarded: Summary,
    pub max_single_drop: Summary,
    pub flipped: usize,
    /// Iteration 0 is the initial confidence over all traces; iteration `i`
    /// averages step `i` over the traces still running at that point.
    pub curve: Vec<CurvePoint>,
    /// Mean tokens discarded over flipped traces.
    pub mean_discard_flipped: Option<f64>,
}

fn sorted_mean(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn aggregate<'a, I>(traces: I) -> Result<CohortStats>
where
    I: IntoIterator<Item = (&'a str, &'a AttributionTrace)>,
{
    let traces: Vec<(&str, &AttributionTrace)> = traces.into_iter().collect();
    if traces.is_empty() {
        return Err(Error::EmptyCohort);
    }
    let records: Vec<TraceRecord> = traces
        .iter()
        .map(|(id, t)| TraceRecord {
            image_id: (*id).to_owned(),
            tokens_discarded: t.steps.len(),
            max_single_drop: f64::from(t.max_single_drop()),
            flipped: t.status == TraceStatus::Flipped,
        })
        .collect();

    let discarded: Vec<f64> = records.iter().map(|r| r.tokens_discarded as f64).collect();
    let drops: Vec<f64> = records.iter().map(|r| r.max_single_drop).collect();

    let longest = traces.iter().map(|(_, t)| t.steps.len()).max().unwrap_or(0);
    let mut curve = vec![CurvePoint {
        iteration: 0,
        active: traces.len(),
        mean_confidence: sorted_mean(
            traces
                .iter()
                .map(|(_, t)| f64::from(t.initial_confidence))
                .collect(),
        ),
    }];
    for i in 1..=longest {
        let values: Vec<f64> = traces
            .iter()
            .filter_map(|(_, t)| t.steps.get(i - 1).map(|s| f64::from(s.confidence)))
            .collect();
        curve.push(CurvePoint {
            iteration: i,
            active: values.len(),
            mean_confidence: sorted_mean(values),
        });
    }

    let flipped: Vec<f64> = records
        .iter()
        .filter(|r| r.flipped)
        .map(|r| r.tokens_discarded as f64)
        .collect();

    Ok(CohortStats {
        tokens_discarded: Summary::of(&discarded).expect("non-empty"),
        max_single_drop: Summary::of(&drops).expect("non-empty"),
        flipped: flipped.len(),
        mean_discard_flipped: (!flipped.is_empty()).then(|| sorted_mean(flipped)),
        curve,
        records,
    })
}
