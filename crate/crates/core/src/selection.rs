//! Duration-budgeted utterance selection.
//!
//! Three strategies share one budget rule: keep adding until the accumulated
//! duration reaches `budget_sec`.
//!
//! * `ensemble`: multi-list agreement over three rankings. With a window `L`
//!   growing by `L0` per pass, an utterance from the first list's top-`L` is
//!   admitted when it is also in the top-`L` of the other two. The budget is
//!   checked once per pass, so a pass may overshoot.
//! * `single`: greedy prefix of one ranking.
//! * `random`: greedy prefix of a seeded shuffle.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::Rng;

pub const SECONDS_PER_HOUR: f64 = 3600.0;

/// `(id, score)` pairs sorted by score descending, ties by id ascending.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoredList {
    entries: Vec<(String, f64)>,
}

impl ScoredList {
    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(id, _)| id.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sort arbitrary `(id, score)` pairs. Ids must be unique and scores finite.
    pub fn from_scores(scores: impl IntoIterator<Item = (String, f64)>) -> Result<Self> {
        let mut entries: Vec<(String, f64)> = Vec::new();
        let mut seen = HashSet::new();
        for (id, s) in scores {
            if !s.is_finite() {
                return Err(Error::NonFiniteScore(id));
            }
            if !seen.insert(id.clone()) {
                return Err(Error::DuplicateId { line: entries.len() + 1, id });
            }
            entries.push((id, s));
        }
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Ok(ScoredList { entries })
    }

    pub fn without(&self, exclude: &HashSet<String>) -> ScoredList {
        ScoredList {
            entries: self
                .entries
                .iter()
                .filter(|(id, _)| !exclude.contains(id))
                .cloned()
                .collect(),
        }
    }
}

/// Sort pool scores into a ranking; every scored id needs a duration.
pub fn rank_pool(scores: &HashMap<String, f64>, durations: &HashMap<String, f64>) -> Result<ScoredList> {
    for (id, s) in scores {
        if !s.is_finite() {
            return Err(Error::NonFiniteScore(id.clone()));
        }
        if !durations.contains_key(id) {
            return Err(Error::MissingDuration(id.clone()));
        }
    }
    ScoredList::from_scores(scores.iter().map(|(k, v)| (k.clone(), *v)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Ensemble,
    Single,
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionConfig {
    pub budget_sec: f64,
    pub l0: usize,
    pub strategy: Strategy,
    pub seed: u64,
    /// Check the budget after every admission instead of once per pass.
    pub tight_budget: bool,
}

impl SelectionConfig {
    pub fn from_hours(k_hours: f64, strategy: Strategy) -> Self {
        SelectionConfig {
            budget_sec: k_hours * SECONDS_PER_HOUR,
            l0: 1000,
            strategy,
            seed: 0,
            tight_budget: false,
        }
    }

    pub fn k_hours(&self) -> f64 {
        self.budget_sec / SECONDS_PER_HOUR
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.budget_sec > 0.0 && self.budget_sec.is_finite()) {
            return Err(Error::InvalidConfig("budget must be positive and finite".into()));
        }
        if self.l0 == 0 {
            return Err(Error::InvalidConfig("l0 must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SelectionResult {
    pub selected: Vec<String>,
    pub total_sec: f64,
    /// The candidates ran out before the budget was met.
    pub exhausted: bool,
    /// Passes of the window loop (ensemble only; 0 otherwise).
    pub passes: usize,
}

fn duration_of(durations: &HashMap<String, f64>, id: &str) -> Result<f64> {
    durations
        .get(id)
        .copied()
        .ok_or_else(|| Error::MissingDuration(id.to_string()))
}

/// Multi-list agreement selection; `u1` drives admission order.
pub fn select_ensemble(
    u1: &ScoredList,
    u2: &ScoredList,
    u3: &ScoredList,
    durations: &HashMap<String, f64>,
    config: &SelectionConfig,
) -> Result<SelectionResult> {
    config.validate()?;
    for id in u1.ids() {
        duration_of(durations, id)?;
    }
    let max_len = u1.len().max(u2.len()).max(u3.len());
    let mut result = SelectionResult::default();
    let mut admitted: HashSet<&str> = HashSet::new();
    let mut window = config.l0;

    while result.total_sec < config.budget_sec {
        result.passes += 1;
        let top2: HashSet<&str> = u2.ids().take(window).collect();
        let top3: HashSet<&str> = u3.ids().take(window).collect();
        let mut added = 0;
        for id in u1.ids().take(window) {
            if !admitted.contains(id) && top2.contains(id) && top3.contains(id) {
                admitted.insert(id);
                result.selected.push(id.to_string());
                result.total_sec += durations[id];
                added += 1;
                if config.tight_budget && result.total_sec >= config.budget_sec {
                    break;
                }
            }
        }
        if added == 0 && window >= max_len && result.total_sec < config.budget_sec {
            result.exhausted = true;
            break;
        }
        window += config.l0;
    }
    Ok(result)
}

fn greedy_prefix<'a>(
    ids: impl Iterator<Item = &'a str>,
    durations: &HashMap<String, f64>,
    budget_sec: f64,
) -> Result<SelectionResult> {
    let mut result = SelectionResult::default();
    for id in ids {
        if result.total_sec >= budget_sec {
            return Ok(result);
        }
        result.total_sec += duration_of(durations, id)?;
        result.selected.push(id.to_string());
    }
    result.exhausted = result.total_sec < budget_sec;
    Ok(result)
}

/// Highest-scoring utterances until the budget is met.
pub fn select_single(u: &ScoredList, durations: &HashMap<String, f64>, config: &SelectionConfig) -> Result<SelectionResult> {
    config.validate()?;
    greedy_prefix(u.ids(), durations, config.budget_sec)
}

/// Seeded uniform shuffle of the pool, then a greedy prefix.
pub fn select_random(pool_ids: &[String], durations: &HashMap<String, f64>, config: &SelectionConfig) -> Result<SelectionResult> {
    config.validate()?;
    let mut order: Vec<&str> = pool_ids.iter().map(String::as_str).collect();
    Rng::new(config.seed).shuffle(&mut order);
    greedy_prefix(order.into_iter(), durations, config.budget_sec)
}
