use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::trace::AttributionTrace;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ImportanceEntry {
    /// 1-based rank, `None` for tokens that were never ranked.
    pub rank: Option<usize>,
    pub drop: f32,
}

/// Per-token ranks and drops on a `grid × grid` patch layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceMap {
    grid: usize,
    entries: Vec<ImportanceEntry>,
}

impl ImportanceMap {
    pub fn empty(grid: usize) -> Self {
        Self {
            grid,
            entries: vec![ImportanceEntry::default(); grid * grid],
        }
    }

    /// Builds a map from tokens listed in rank order with their drops.
    pub fn from_ranking(
        grid: usize,
        ranked: impl IntoIterator<Item = (usize, f32)>,
    ) -> Result<Self> {
        let mut map = Self::empty(grid);
        for (idx, (token, drop)) in ranked.into_iter().enumerate() {
            let entry = map.entries.get_mut(token).ok_or_else(|| {
                Error::Geometry(format!("token {token} outside a {grid}x{grid} grid"))
            })?;
            if entry.rank.is_some() {
                return Err(Error::Geometry(format!("token {token} ranked twice")));
            }
            *entry = ImportanceEntry {
                rank: Some(idx + 1),
                drop,
            };
        }
        Ok(map)
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn entries(&self) -> &[ImportanceEntry] {
        &self.entries
    }

    pub fn get(&self, token: usize) -> ImportanceEntry {
        self.entries[token]
    }

    /// Number of ranked tokens.
    pub fn ranked_count(&self) -> usize {
        self.entries.iter().filter(|e| e.rank.is_some()).count()
    }

    /// `(token, rank)` for ranked tokens, by rank.
    pub fn ranked(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self
            .entries
            .iter()
            .enumerate()
            .filter_map(|(t, e)| e.rank.map(|r| (t, r)))
            .collect();
        out.sort_by_key(|&(_, r)| r);
        out
    }
}

/// Rank `r` goes to the `r`-th removed token.
pub fn trace_to_importance(trace: &AttributionTrace, grid: usize) -> Result<ImportanceMap> {
    ImportanceMap::from_ranking(grid, trace.steps.iter().map(|s| (s.token, s.drop)))
}
