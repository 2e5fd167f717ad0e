//! Aggregating EQOS reports into per-assignment success probabilities.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::types::{AgentId, Assignment, EqosMatrix, ReportProfile, TaskId, TaskSet};

/// Slack allowed when checking that weights sum to one and outputs lie in [0,1].
pub const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrustError {
    #[error("incomplete EQOS: {reporter} has no rating of {performer} on {task}")]
    IncompleteEqos { reporter: AgentId, performer: AgentId, task: TaskId },

    #[error("incomplete trust table: no entry for {performer} on {task}")]
    IncompleteTable { performer: AgentId, task: TaskId },

    #[error("invalid trust weights: {0}")]
    InvalidWeights(String),

    #[error("trust rule {rule} produced {value} for {performer} on {task}")]
    OutOfRange { rule: String, performer: AgentId, task: TaskId, value: f64 },

    #[error("completed tasks are not a subset of the assigned tasks")]
    NotSubset,

    #[error("assignment for {found} passed where requester {expected} was expected")]
    WrongRequester { expected: AgentId, found: AgentId },

    #[error("operation requires a weighted-sum trust model")]
    NotWeightedSum,
}

/// Read access to every reporter's EQOS matrix.
#[derive(Clone, Debug, Default)]
pub struct EqosReports<'a> {
    by_reporter: BTreeMap<AgentId, &'a EqosMatrix>,
}

impl<'a> EqosReports<'a> {
    pub fn new<I: IntoIterator<Item = &'a EqosMatrix>>(matrices: I) -> Self {
        EqosReports { by_reporter: matrices.into_iter().map(|m| (m.reporter, m)).collect() }
    }

    pub fn replace(&mut self, matrix: &'a EqosMatrix) {
        self.by_reporter.insert(matrix.reporter, matrix);
    }

    pub fn get(&self, reporter: AgentId, performer: AgentId, task: TaskId) -> Option<f64> {
        self.by_reporter.get(&reporter)?.get(performer, task)
    }

    pub fn reporters(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.by_reporter.keys().copied()
    }
}

/// An arbitrary trust function supplied by the caller.
pub trait TrustRule: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn evaluate(&self, reports: &EqosReports<'_>, performer: AgentId, task: TaskId) -> Result<f64, TrustError>;
}

/// Each performer's trust equals its own rating of itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct SelfReport;

impl TrustRule for SelfReport {
    fn name(&self) -> &str {
        "self_report"
    }

    fn evaluate(&self, reports: &EqosReports<'_>, performer: AgentId, task: TaskId) -> Result<f64, TrustError> {
        reports
            .get(performer, performer, task)
            .ok_or(TrustError::IncompleteEqos { reporter: performer, performer, task })
    }
}

#[derive(Clone, Debug)]
pub enum TrustKind {
    WeightedSum(BTreeMap<AgentId, f64>),
    Custom(Arc<dyn TrustRule>),
}

#[derive(Clone, Debug)]
pub struct TrustModel {
    pub kind: TrustKind,
    /// Declares that raising any EQOS entry never lowers any trust value.
    pub monotone: bool,
}

impl TrustModel {
    pub fn weighted_sum(weights: BTreeMap<AgentId, f64>) -> Result<Self, TrustError> {
        let mut total = 0.0;
        for (&a, &w) in &weights {
            if !(0.0..=1.0).contains(&w) {
                return Err(TrustError::InvalidWeights(format!("weight {w} of {a} outside [0,1]")));
            }
            total += w;
        }
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(TrustError::InvalidWeights(format!("weights sum to {total}, not 1")));
        }
        Ok(TrustModel { kind: TrustKind::WeightedSum(weights), monotone: true })
    }

    /// Equal weight `1/|agents|` on every agent.
    pub fn uniform(agents: &[AgentId]) -> Result<Self, TrustError> {
        if agents.is_empty() {
            return Err(TrustError::InvalidWeights("no agents to weight".into()));
        }
        let w = 1.0 / agents.len() as f64;
        Self::weighted_sum(agents.iter().map(|&a| (a, w)).collect())
    }

    pub fn custom(rule: Arc<dyn TrustRule>, monotone: bool) -> Self {
        TrustModel { kind: TrustKind::Custom(rule), monotone }
    }

    pub fn self_report() -> Self {
        Self::custom(Arc::new(SelfReport), true)
    }

    pub fn name(&self) -> &str {
        match &self.kind {
            TrustKind::WeightedSum(_) => "weighted_sum",
            TrustKind::Custom(rule) => rule.name(),
        }
    }

    pub fn evaluate(&self, reports: &EqosReports<'_>, performer: AgentId, task: TaskId) -> Result<f64, TrustError> {
        let value = match &self.kind {
            TrustKind::WeightedSum(weights) => {
                let mut acc = 0.0;
                for (&reporter, &w) in weights {
                    if w == 0.0 {
                        continue;
                    }
                    let eta = reports
                        .get(reporter, performer, task)
                        .ok_or(TrustError::IncompleteEqos { reporter, performer, task })?;
                    acc += w * eta;
                }
                acc
            }
            TrustKind::Custom(rule) => rule.evaluate(reports, performer, task)?,
        };
        clamp_probability(value).ok_or_else(|| TrustError::OutOfRange {
            rule: self.name().to_string(),
            performer,
            task,
            value,
        })
    }

    /// Weighted sum with `agent` dropped and the rest rescaled to sum to one.
    pub fn without_reporter(&self, agent: AgentId) -> Result<TrustModel, TrustError> {
        let TrustKind::WeightedSum(weights) = &self.kind else {
            return Err(TrustError::NotWeightedSum);
        };
        let rest: BTreeMap<AgentId, f64> = weights.iter().filter(|(&a, _)| a != agent).map(|(&a, &w)| (a, w)).collect();
        let total: f64 = rest.values().sum();
        if total <= 0.0 {
            return Err(TrustError::InvalidWeights(format!("no weight left after removing {agent}")));
        }
        TrustModel::weighted_sum(rest.into_iter().map(|(a, w)| (a, w / total)).collect())
    }
}

fn clamp_probability(value: f64) -> Option<f64> {
    if value.is_nan() || !(-WEIGHT_TOLERANCE..=1.0 + WEIGHT_TOLERANCE).contains(&value) {
        None
    } else {
        Some(value.clamp(0.0, 1.0))
    }
}

/// Weighted-sum trust of one (performer, task) pair.
pub fn weighted_sum_trust(
    model: &TrustModel,
    eqos: &[EqosMatrix],
    performer: AgentId,
    task: TaskId,
) -> Result<f64, TrustError> {
    if !matches!(model.kind, TrustKind::WeightedSum(_)) {
        return Err(TrustError::NotWeightedSum);
    }
    model.evaluate(&EqosReports::new(eqos), performer, task)
}

/// Success probability of every (performer, task) pair with a bid.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrustTable {
    entries: BTreeMap<(AgentId, TaskId), f64>,
}

impl TrustTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, performer: AgentId, task: TaskId, p: f64) {
        self.entries.insert((performer, task), p);
    }

    pub fn get(&self, performer: AgentId, task: TaskId) -> Option<f64> {
        self.entries.get(&(performer, task)).copied()
    }

    pub fn require(&self, performer: AgentId, task: TaskId) -> Result<f64, TrustError> {
        self.get(performer, task).ok_or(TrustError::IncompleteTable { performer, task })
    }

    pub fn iter(&self) -> impl Iterator<Item = ((AgentId, TaskId), f64)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Evaluates `model` for every bid pair, optionally swapping in one agent's matrix.
pub fn build_trust_table(
    model: &TrustModel,
    profile: &ReportProfile,
    override_reporter: Option<&EqosMatrix>,
) -> Result<TrustTable, TrustError> {
    let mut reports = EqosReports::new(&profile.eqos);
    if let Some(m) = override_reporter {
        reports.replace(m);
    }
    let mut table = TrustTable::new();
    for (performer, task) in profile.bid_pairs() {
        table.insert(performer, task, model.evaluate(&reports, performer, task)?);
    }
    Ok(table)
}

/// Probability that exactly `done` out of `assigned` complete for one performer.
pub fn bundle_completion_trust(
    table: &TrustTable,
    performer: AgentId,
    done: TaskSet,
    assigned: TaskSet,
) -> Result<f64, TrustError> {
    if !done.is_subset(assigned) {
        return Err(TrustError::NotSubset);
    }
    let mut prob = 1.0;
    for t in assigned.iter() {
        let p = table.require(performer, t)?;
        prob *= if done.contains(t) { p } else { 1.0 - p };
    }
    Ok(prob)
}

/// Probability that exactly `done` out of `assigned` complete for one requester.
pub fn allocation_completion_trust(
    table: &TrustTable,
    requester: AgentId,
    done: &BTreeSet<Assignment>,
    assigned: &BTreeSet<Assignment>,
) -> Result<f64, TrustError> {
    if !done.is_subset(assigned) {
        return Err(TrustError::NotSubset);
    }
    let mut per_performer: BTreeMap<AgentId, (TaskSet, TaskSet)> = BTreeMap::new();
    for a in assigned {
        if a.requester != requester {
            return Err(TrustError::WrongRequester { expected: requester, found: a.requester });
        }
        let slot = per_performer.entry(a.performer).or_default();
        slot.1.insert(a.task);
        if done.contains(a) {
            slot.0.insert(a.task);
        }
    }
    per_performer
        .into_iter()
        .try_fold(1.0, |acc, (j, (d, s))| Ok(acc * bundle_completion_trust(table, j, d, s)?))
}

/// Random check that raising EQOS entries never lowers any trust value.
///
/// Returns `false` as soon as a counterexample is found.
pub fn spot_check_monotone(
    model: &TrustModel,
    profile: &ReportProfile,
    samples: usize,
    seed: u64,
) -> Result<bool, TrustError> {
    let base = build_trust_table(model, profile, None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        if profile.eqos.is_empty() {
            break;
        }
        let m = &profile.eqos[rng.random_range(0..profile.eqos.len())];
        if m.entries.is_empty() {
            continue;
        }
        let mut raised = m.clone();
        let k = rng.random_range(0..raised.entries.len());
        if let Some(v) = raised.entries.values_mut().nth(k) {
            *v = (*v + rng.random_range(0.0..=1.0) * (1.0 - *v)).min(1.0);
        }
        let table = build_trust_table(model, profile, Some(&raised))?;
        let lowered = table
            .iter()
            .any(|(key, p)| base.get(key.0, key.1).is_some_and(|q| p < q - WEIGHT_TOLERANCE));
        if lowered {
            return Ok(false);
        }
    }
    Ok(true)
}
