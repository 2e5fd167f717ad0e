//! Execution sampling, expected utilities and empirical incentive audits.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hypergraph::{expected_value, Allocation};
use crate::mechanism::{
    discount_for, gtbm_agent_payment, gtbm_clear, DiscountPolicy, SingleTaskInstance, VickreyMode,
};
use crate::parallel::pool;
use crate::solver::OBJECTIVE_TOLERANCE;
use crate::trust::{build_trust_table, EqosReports, TrustModel, TrustTable};
use crate::types::{AgentId, Assignment, BidAtom, EqosDomain, EqosMatrix, ExecutionOutcome, ReportProfile, TaskId, ValuationMap};

/// Success probability of each assignment, in the given order.
pub fn completion_probabilities(assignments: &[Assignment], table: &TrustTable) -> Result<Vec<f64>> {
    assignments.iter().map(|a| Ok(table.require(a.performer, a.task)?)).collect()
}

/// Draws a completion mask: bit `k` set with probability `probs[k]`.
pub fn sample_mask<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> u64 {
    probs
        .iter()
        .enumerate()
        .fold(0, |m, (k, &p)| if rng.random::<f64>() < p { m | (1 << k) } else { m })
}

/// Independent Bernoulli completion of every assignment, reproducible from `seed`.
pub fn sample_execution(allocation: &Allocation, table: &TrustTable, seed: u64) -> Result<ExecutionOutcome> {
    let assignments = allocation.assignments();
    let probs = completion_probabilities(&assignments, table)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(ExecutionOutcome::from_mask(&assignments, sample_mask(&probs, &mut rng)))
}

/// An agent's private information.
#[derive(Clone, Debug, PartialEq)]
pub struct TrueType {
    pub agent: AgentId,
    pub valuation: Option<ValuationMap>,
    pub bids: Vec<BidAtom>,
    pub eqos: EqosMatrix,
}

impl TrueType {
    /// Reads the agent's reports as its true type.
    pub fn truthful(profile: &ReportProfile, agent: AgentId) -> Result<Self> {
        let eqos = profile
            .eqos_of(agent)
            .cloned()
            .ok_or_else(|| Error::Precondition(format!("no EQOS matrix for {agent}")))?;
        Ok(TrueType {
            agent,
            valuation: profile.valuation_of(agent).cloned(),
            bids: profile.bids_of(agent).cloned().collect(),
            eqos,
        })
    }

    /// `profile` with this agent's reports replaced by the truth.
    pub fn reported_in(&self, profile: &ReportProfile) -> ReportProfile {
        profile
            .with_eqos(self.eqos.clone())
            .with_bids(self.agent, self.bids.clone())
            .with_valuation(self.agent, self.valuation.clone())
    }

    fn true_cost(&self, bundle: crate::types::TaskSet) -> Result<f64> {
        self.bids
            .iter()
            .find(|b| b.bundle == bundle)
            .map(|b| b.cost)
            .ok_or_else(|| Error::UnknownTrueCost { agent: self.agent, bundle: bundle.to_string() })
    }
}

/// Payment rule under which utilities are evaluated.
#[derive(Clone, Debug, PartialEq)]
pub enum AuditMechanism {
    Gtbm(DiscountPolicy),
    /// Non-contingent payments valued with the reported trust, including
    /// the deviator's own EQOS. Exists to show audits can fail.
    BrokenGtbm(DiscountPolicy),
    /// Porter-style second price where the winner's trust aggregates every
    /// agent's EQOS and the second price drops the winner's reports.
    PorterExtension,
    Porter,
    NaiveVickrey(VickreyMode),
}

impl fmt::Display for AuditMechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AuditMechanism::Gtbm(p) => write!(f, "gtbm ({p})"),
            AuditMechanism::BrokenGtbm(p) => write!(f, "broken-gtbm ({p})"),
            AuditMechanism::PorterExtension => f.write_str("porter-extension"),
            AuditMechanism::Porter => f.write_str("porter"),
            AuditMechanism::NaiveVickrey(VickreyMode::Expected) => f.write_str("naive-vickrey (expected)"),
            AuditMechanism::NaiveVickrey(VickreyMode::Certain) => f.write_str("naive-vickrey (certain)"),
        }
    }
}

impl AuditMechanism {
    fn policy(&self) -> Option<&DiscountPolicy> {
        match self {
            AuditMechanism::Gtbm(p) | AuditMechanism::BrokenGtbm(p) => Some(p),
            _ => None,
        }
    }

    fn single_task(&self) -> bool {
        self.policy().is_none()
    }
}

/// Expected utility of `agent` when the centre sees `reported` and the
/// agent's private information is `truth`.
pub fn expected_utility(
    reported: &ReportProfile,
    model: &TrustModel,
    agent: AgentId,
    truth: &TrueType,
    mechanism: &AuditMechanism,
) -> Result<f64> {
    let discount = match mechanism.policy() {
        Some(policy) => discount_for(reported, model, policy, agent)?,
        None => 0.0,
    };
    utility_with_discount(reported, model, agent, truth, mechanism, discount)
}

fn utility_with_discount(
    reported: &ReportProfile,
    model: &TrustModel,
    agent: AgentId,
    truth: &TrueType,
    mechanism: &AuditMechanism,
    discount: f64,
) -> Result<f64> {
    match mechanism {
        AuditMechanism::Gtbm(_) | AuditMechanism::BrokenGtbm(_) => {
            let clearing = gtbm_clear(reported, model)?;
            let alloc = &clearing.result.allocation;
            let mixed = build_trust_table(model, reported, Some(&truth.eqos))?;

            let mut own = 0.0;
            if let (Some(e), Some(v)) = (alloc.request_of(agent), truth.valuation.as_ref()) {
                let probs: Vec<(TaskId, f64)> =
                    e.cover.iter().map(|n| Ok((n.task, mixed.require(n.performer, n.task)?))).collect::<Result<_>>()?;
                own += expected_value(v, &probs);
            }
            if let Some(c) = alloc.bid_of(agent) {
                own -= truth.true_cost(c.atom.bundle)?;
            }

            let assignments = alloc.assignments();
            let pay = gtbm_agent_payment(reported, &clearing.result, &assignments, agent, discount)?;
            let expected_pay = match mechanism {
                AuditMechanism::Gtbm(_) => pay.expected(&mixed)?,
                _ => pay.expected(&clearing.table)?,
            };
            Ok(own + expected_pay)
        }
        AuditMechanism::PorterExtension => {
            let inst = SingleTaskInstance::from_profile(reported)?;
            let table = build_trust_table(model, reported, None)?;
            let Some(winner) = best_bidder(&inst, |j| Ok(table.require(j, inst.task)?), |_| true)? else {
                return Ok(0.0);
            };
            if winner.0 != agent {
                return Ok(0.0);
            }
            let others = model.without_reporter(agent)?;
            let reports = EqosReports::new(&reported.eqos);
            let second = best_bidder(&inst, |j| Ok(others.evaluate(&reports, j, inst.task)?), |j| j != agent)?
                .map_or(0.0, |s| s.1);
            let mixed = build_trust_table(model, reported, Some(&truth.eqos))?;
            let p = mixed.require(agent, inst.task)?;
            Ok(inst.value * p - truth.true_cost(crate::types::TaskSet::singleton(inst.task))? - second)
        }
        AuditMechanism::Porter | AuditMechanism::NaiveVickrey(_) => {
            let inst = SingleTaskInstance::from_profile(reported)?;
            let table = build_trust_table(&TrustModel::self_report(), reported, None)?;
            let certain = matches!(mechanism, AuditMechanism::NaiveVickrey(VickreyMode::Certain));
            let prob = |j: AgentId| -> Result<f64> { if certain { Ok(1.0) } else { Ok(table.require(j, inst.task)?) } };
            let Some(winner) = best_bidder(&inst, prob, |_| true)? else { return Ok(0.0) };
            if winner.0 != agent {
                return Ok(0.0);
            }
            let second = best_bidder(&inst, prob, |j| j != agent)?.map_or(0.0, |s| s.1);
            let cost = truth.true_cost(crate::types::TaskSet::singleton(inst.task))?;
            match mechanism {
                AuditMechanism::Porter => {
                    let p_true = truth
                        .eqos
                        .get(agent, inst.task)
                        .ok_or_else(|| Error::Precondition(format!("{agent} has no self-rating")))?;
                    Ok(inst.value * p_true - cost - second)
                }
                _ => Ok(inst.value * prob(agent)? - second - cost),
            }
        }
    }
}

fn best_bidder(
    inst: &SingleTaskInstance,
    prob: impl Fn(AgentId) -> Result<f64>,
    keep: impl Fn(AgentId) -> bool,
) -> Result<Option<(AgentId, f64)>> {
    let mut best: Option<(AgentId, f64)> = None;
    for &(j, c) in &inst.bidders {
        if !keep(j) {
            continue;
        }
        let s = inst.value * prob(j)? - c;
        if s > OBJECTIVE_TOLERANCE && best.is_none_or(|(_, b)| s > b + OBJECTIVE_TOLERANCE) {
            best = Some((j, s));
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditConfig {
    /// Grid points per EQOS coordinate, spread evenly over the EQOS domain.
    pub eqos_steps: usize,
    /// Multiplicative factors tried on the agent's costs and on its values.
    pub scalings: Vec<f64>,
    /// Random misreports per agent when the full grid is too large.
    pub samples: usize,
    pub seed: u64,
    pub epsilon: f64,
    /// Largest grid evaluated exhaustively per agent.
    pub full_grid_limit: usize,
    /// Agents to audit; all applicable agents when `None`.
    pub agents: Option<Vec<AgentId>>,
    /// EQOS values used as the grid of true types in the IR audit.
    pub type_values: Option<Vec<f64>>,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            eqos_steps: 11,
            scalings: (0..=8).map(|k| k as f64 * 0.25).collect(),
            samples: 200,
            seed: 0,
            epsilon: 1e-6,
            full_grid_limit: 20_000,
            agents: None,
            type_values: None,
        }
    }
}

impl AuditConfig {
    /// EQOS grid with spacing `step` and `n_scalings` factors evenly spread over [0, 2].
    pub fn grid(step: f64, n_scalings: usize) -> Result<Self> {
        if !(step > 0.0 && step <= 1.0) {
            return Err(Error::Config(format!("grid step must lie in (0, 1], got {step}")));
        }
        let steps = (1.0 / step).round() as usize + 1;
        let scalings = match n_scalings {
            0 | 1 => vec![1.0],
            n => (0..n).map(|k| 2.0 * k as f64 / (n - 1) as f64).collect(),
        };
        Ok(AuditConfig { eqos_steps: steps, scalings, ..Default::default() })
    }

    fn validate(&self) -> Result<()> {
        if self.eqos_steps < 2 {
            return Err(Error::Config("audit grid needs at least 2 steps".into()));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Config("audit tolerance must be positive".into()));
        }
        if self.scalings.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::Config("scalings must be finite and non-negative".into()));
        }
        Ok(())
    }

    fn grid_values(&self, domain: EqosDomain) -> Vec<f64> {
        let n = (self.eqos_steps - 1) as f64;
        (0..self.eqos_steps).map(|k| domain.lo + (domain.hi - domain.lo) * k as f64 / n).collect()
    }
}

/// A deviation from truthful reporting.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Misreport {
    pub eqos: Vec<((AgentId, TaskId), f64)>,
    pub cost_scale: f64,
    pub value_scale: f64,
}

impl Misreport {
    fn truthful() -> Self {
        Misreport { eqos: Vec::new(), cost_scale: 1.0, value_scale: 1.0 }
    }

    fn apply(&self, profile: &ReportProfile, truth: &TrueType) -> ReportProfile {
        let mut eqos = truth.eqos.clone();
        for &((j, t), v) in &self.eqos {
            eqos.set(j, t, v);
        }
        let bids = truth.bids.iter().map(|b| BidAtom { cost: b.cost * self.cost_scale, ..b.clone() }).collect();
        let valuation = truth.valuation.as_ref().map(|v| v.scaled(self.value_scale));
        profile.with_eqos(eqos).with_bids(truth.agent, bids).with_valuation(truth.agent, valuation)
    }

    pub fn describe(&self) -> String {
        let mut s = String::new();
        if !self.eqos.is_empty() {
            let parts: Vec<String> =
                self.eqos.iter().map(|((j, t), v)| format!("eta[{}][{}]={v:.2}", j.0, t.0)).collect();
            s.push_str(&parts.join(" "));
        }
        if self.cost_scale != 1.0 {
            let _ = write!(s, "{}costs x{:.2}", if s.is_empty() { "" } else { ", " }, self.cost_scale);
        }
        if self.value_scale != 1.0 {
            let _ = write!(s, "{}values x{:.2}", if s.is_empty() { "" } else { ", " }, self.value_scale);
        }
        if s.is_empty() {
            s.push_str("truthful");
        }
        s
    }
}

fn misreports(truth: &TrueType, config: &AuditConfig, domain: EqosDomain) -> Vec<Misreport> {
    let grid = config.grid_values(domain);
    let coords: Vec<(AgentId, TaskId)> = truth.eqos.entries.keys().copied().collect();
    let cost_scales = if truth.bids.is_empty() { vec![1.0] } else { config.scalings.clone() };
    let value_scales = if truth.valuation.is_some() { config.scalings.clone() } else { vec![1.0] };

    let full = (grid.len() as f64).powi(coords.len() as i32) * cost_scales.len() as f64 * value_scales.len() as f64;
    let mut out = Vec::new();
    if full <= config.full_grid_limit as f64 {
        let mut idx = vec![0usize; coords.len()];
        loop {
            let eqos: Vec<_> = coords.iter().zip(&idx).map(|(&c, &k)| (c, grid[k])).collect();
            for &cs in &cost_scales {
                for &vs in &value_scales {
                    out.push(Misreport { eqos: eqos.clone(), cost_scale: cs, value_scale: vs });
                }
            }
            // odometer increment
            let mut pos = 0;
            loop {
                if pos == idx.len() {
                    return out;
                }
                idx[pos] += 1;
                if idx[pos] < grid.len() {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
        }
    }

    for &c in &coords {
        for &g in &grid {
            out.push(Misreport { eqos: vec![(c, g)], ..Misreport::truthful() });
        }
    }
    for &cs in &cost_scales {
        out.push(Misreport { cost_scale: cs, ..Misreport::truthful() });
    }
    for &vs in &value_scales {
        out.push(Misreport { value_scale: vs, ..Misreport::truthful() });
    }
    for corner in [domain.lo, domain.hi] {
        out.push(Misreport { eqos: coords.iter().map(|&c| (c, corner)).collect(), ..Misreport::truthful() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (truth.agent.0 as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    for _ in 0..config.samples {
        let mut eqos = Vec::new();
        for &c in &coords {
            if rng.random_bool(0.5) {
                eqos.push((c, *grid.choose(&mut rng).expect("grid has at least two points")));
            }
        }
        let cost_scale = *cost_scales.choose(&mut rng).expect("non-empty");
        let value_scale = *value_scales.choose(&mut rng).expect("non-empty");
        out.push(Misreport { eqos, cost_scale, value_scale });
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditCheck {
    IncentiveCompatibility,
    IndividualRationality,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AgentAudit {
    pub agent: AgentId,
    pub truthful_utility: f64,
    /// Largest utility gain over truthful reporting (IC audits).
    pub max_gain: f64,
    pub best_deviation: Option<String>,
    /// Smallest truthful expected utility over the type grid (IR audits).
    pub min_utility: f64,
    pub worst_type: Option<String>,
    pub evaluations: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditReport {
    pub check: AuditCheck,
    pub mechanism: String,
    pub epsilon: f64,
    pub pass: bool,
    pub agents: Vec<AgentAudit>,
    pub note: String,
}

impl AuditReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn max_gain(&self) -> f64 {
        self.agents.iter().map(|a| a.max_gain).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_utility(&self) -> f64 {
        self.agents.iter().map(|a| a.min_utility).fold(f64::INFINITY, f64::min)
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let title = match self.check {
            AuditCheck::IncentiveCompatibility => "incentive compatibility",
            AuditCheck::IndividualRationality => "individual rationality",
        };
        let _ = writeln!(s, "{title} audit, mechanism {}, epsilon {:e}", self.mechanism, self.epsilon);
        match self.check {
            AuditCheck::IncentiveCompatibility => {
                let _ = writeln!(s, "{:>6}  {:>12}  {:>12}  {:>6}  {:>5}  best deviation", "agent", "truthful", "max gain", "evals", "ok");
                for a in &self.agents {
                    let _ = writeln!(
                        s,
                        "{:>6}  {:>12.4}  {:>12.4}  {:>6}  {:>5}  {}",
                        a.agent.0,
                        a.truthful_utility,
                        a.max_gain,
                        a.evaluations,
                        if a.pass { "yes" } else { "NO" },
                        a.best_deviation.as_deref().unwrap_or("-")
                    );
                }
            }
            AuditCheck::IndividualRationality => {
                let _ = writeln!(s, "{:>6}  {:>12}  {:>12}  {:>6}  {:>5}  worst type", "agent", "truthful", "min utility", "types", "ok");
                for a in &self.agents {
                    let _ = writeln!(
                        s,
                        "{:>6}  {:>12.4}  {:>12.4}  {:>6}  {:>5}  {}",
                        a.agent.0,
                        a.truthful_utility,
                        a.min_utility,
                        a.evaluations,
                        if a.pass { "yes" } else { "NO" },
                        a.worst_type.as_deref().unwrap_or("-")
                    );
                }
            }
        }
        let _ = writeln!(s, "{}: {}", if self.pass { "PASS" } else { "FAIL" }, self.note);
        s
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.table())
    }
}

fn audited_agents(profile: &ReportProfile, mechanism: &AuditMechanism, config: &AuditConfig) -> Result<Vec<AgentId>> {
    if let Some(a) = &config.agents {
        return Ok(a.clone());
    }
    if mechanism.single_task() {
        Ok(SingleTaskInstance::from_profile(profile)?.bidders.iter().map(|b| b.0).collect())
    } else {
        Ok(profile.agents.clone())
    }
}

/// Searches each agent's misreport space for a profitable deviation.
pub fn audit_incentive_compatibility(
    profile: &ReportProfile,
    model: &TrustModel,
    mechanism: &AuditMechanism,
    config: &AuditConfig,
) -> Result<AuditReport> {
    config.validate()?;
    let mut agents = Vec::new();
    for agent in audited_agents(profile, mechanism, config)? {
        let truth = TrueType::truthful(profile, agent)?;
        let discount = match mechanism.policy() {
            Some(policy) => discount_for(profile, model, policy, agent)?,
            None => 0.0,
        };
        let baseline = utility_with_discount(profile, model, agent, &truth, mechanism, discount)?;
        let candidates = misreports(&truth, config, profile.eqos_domain);
        let utilities: Vec<f64> = pool().install(|| {
            candidates
                .par_iter()
                .map(|m| utility_with_discount(&m.apply(profile, &truth), model, agent, &truth, mechanism, discount))
                .collect::<Result<_>>()
        })?;
        let mut max_gain = 0.0;
        let mut best = None;
        for (m, u) in candidates.iter().zip(&utilities) {
            let gain = u - baseline;
            if gain > max_gain {
                max_gain = gain;
                best = Some(m);
            }
        }
        let pass = max_gain <= config.epsilon;
        agents.push(AgentAudit {
            agent,
            truthful_utility: baseline,
            max_gain,
            best_deviation: best.filter(|_| !pass).map(Misreport::describe),
            min_utility: baseline,
            worst_type: None,
            evaluations: candidates.len(),
            pass,
        });
    }
    let pass = agents.iter().all(|a| a.pass);
    Ok(AuditReport {
        check: AuditCheck::IncentiveCompatibility,
        mechanism: mechanism.to_string(),
        epsilon: config.epsilon,
        pass,
        agents,
        note: if pass {
            "no profitable deviation at this grid resolution".into()
        } else {
            "profitable deviation found".into()
        },
    })
}

/// Checks truthful expected utilities, optionally over a grid of EQOS types.
pub fn audit_individual_rationality(
    profile: &ReportProfile,
    model: &TrustModel,
    mechanism: &AuditMechanism,
    config: &AuditConfig,
) -> Result<AuditReport> {
    config.validate()?;
    let agents = audited_agents(profile, mechanism, config)?;

    // Every profile in the type grid: each EQOS entry of every agent takes
    // each listed value (sampled when the grid is too large).
    let keys: Vec<(AgentId, (AgentId, TaskId))> =
        profile.eqos.iter().flat_map(|m| m.entries.keys().map(move |&k| (m.reporter, k))).collect();
    let mut types: Vec<Vec<f64>> = Vec::new();
    if let Some(values) = config.type_values.as_ref().filter(|v| !v.is_empty()) {
        let full = (values.len() as f64).powi(keys.len() as i32);
        if full <= config.full_grid_limit as f64 {
            let mut idx = vec![0usize; keys.len()];
            'grid: loop {
                types.push(idx.iter().map(|&k| values[k]).collect());
                for slot in idx.iter_mut() {
                    *slot += 1;
                    if *slot < values.len() {
                        continue 'grid;
                    }
                    *slot = 0;
                }
                break;
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            for _ in 0..config.samples.max(1) {
                types.push(keys.iter().map(|_| *values.choose(&mut rng).expect("non-empty")).collect());
            }
        }
    }
    let with_type = |values: &[f64]| -> ReportProfile {
        let mut p = profile.clone();
        for (&(reporter, key), &v) in keys.iter().zip(values) {
            if let Some(m) = p.eqos.iter_mut().find(|m| m.reporter == reporter) {
                m.entries.insert(key, v);
            }
        }
        p
    };
    let describe = |values: &[f64]| -> String {
        keys.iter()
            .zip(values)
            .map(|((r, (j, t)), v)| format!("eta{}[{}][{}]={v:.2}", r.0, j.0, t.0))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let evaluate = |p: &ReportProfile, agent: AgentId| -> Result<f64> {
        let truth = TrueType::truthful(p, agent)?;
        expected_utility(p, model, agent, &truth, mechanism)
    };

    let per_type: Vec<BTreeMap<AgentId, f64>> = pool().install(|| {
        types
            .par_iter()
            .map(|vals| {
                let p = with_type(vals);
                agents.iter().map(|&a| Ok((a, evaluate(&p, a)?))).collect::<Result<_>>()
            })
            .collect::<Result<_>>()
    })?;

    let mut out = Vec::new();
    for &agent in &agents {
        let truthful = evaluate(profile, agent)?;
        let mut min_utility = truthful;
        let mut worst = None;
        for (vals, utils) in types.iter().zip(&per_type) {
            if utils[&agent] < min_utility {
                min_utility = utils[&agent];
                worst = Some(vals);
            }
        }
        let pass = min_utility >= -config.epsilon;
        out.push(AgentAudit {
            agent,
            truthful_utility: truthful,
            max_gain: 0.0,
            best_deviation: None,
            min_utility,
            worst_type: worst.filter(|_| !pass).map(|v| describe(v)),
            evaluations: types.len() + 1,
            pass,
        });
    }
    let pass = out.iter().all(|a| a.pass);
    Ok(AuditReport {
        check: AuditCheck::IndividualRationality,
        mechanism: mechanism.to_string(),
        epsilon: config.epsilon,
        pass,
        agents: out,
        note: if pass {
            "every audited type expects a non-negative utility".into()
        } else {
            "some type expects a negative utility".into()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{EqosDomain, TaskSet};

    const T: TaskId = TaskId(0);

    /// Requester 0 values the task at 1; agents 1 and 2 cost nothing.
    fn costless_pair(eta1: (f64, f64), eta2: (f64, f64)) -> ReportProfile {
        let (a0, a1, a2) = (AgentId(0), AgentId(1), AgentId(2));
        ReportProfile {
            agents: vec![a0, a1, a2],
            tasks: vec![T],
            valuations: vec![ValuationMap::from_atoms(a0, [(TaskSet::singleton(T), 1.0)])],
            bids: vec![
                BidAtom { performer: a1, bundle: TaskSet::singleton(T), cost: 0.0 },
                BidAtom { performer: a2, bundle: TaskSet::singleton(T), cost: 0.0 },
            ],
            eqos: vec![
                EqosMatrix::new(a0).with(a1, T, 0.7).with(a2, T, 0.8),
                EqosMatrix::new(a1).with(a1, T, eta1.0).with(a2, T, eta1.1),
                EqosMatrix::new(a2).with(a1, T, eta2.0).with(a2, T, eta2.1),
            ],
            free_disposal: false,
            eqos_domain: EqosDomain::default(),
        }
    }

    fn pair_weights() -> TrustModel {
        TrustModel::weighted_sum([(AgentId(0), 0.0), (AgentId(1), 0.5), (AgentId(2), 0.5)].into()).unwrap()
    }

    #[test]
    fn sampling_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_mask(&[1.0, 1.0, 1.0], &mut rng), 0b111);
        assert_eq!(sample_mask(&[0.0, 0.0], &mut rng), 0);
    }

    #[test]
    fn sampling_rate_matches_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let hits = (0..n).filter(|_| sample_mask(&[0.9], &mut rng) == 1).count();
        assert!((hits as f64 / n as f64 - 0.9).abs() < 0.01);
    }

    #[test]
    fn sample_execution_is_seeded() {
        let p = costless_pair((0.6, 1.0), (0.8, 0.6));
        let c = gtbm_clear(&p, &pair_weights()).unwrap();
        let a = sample_execution(&c.result.allocation, &c.table, 5).unwrap();
        assert_eq!(a, sample_execution(&c.result.allocation, &c.table, 5).unwrap());
        assert_eq!(a.completed.len(), 1);
    }

    #[test]
    fn loser_utility_under_zero_policy() {
        let p = costless_pair((0.6, 1.0), (0.8, 0.6));
        let truth = TrueType::truthful(&p, AgentId(1)).unwrap();
        let u = expected_utility(&p, &pair_weights(), AgentId(1), &truth, &AuditMechanism::Gtbm(DiscountPolicy::Zero)).unwrap();
        assert!((u - 0.8).abs() < 1e-12);
    }

    #[test]
    fn extension_rewards_badmouthing() {
        let p = costless_pair((0.6, 1.0), (0.8, 0.6));
        let model = pair_weights();
        let truth = TrueType::truthful(&p, AgentId(1)).unwrap();
        let honest = expected_utility(&p, &model, AgentId(1), &truth, &AuditMechanism::PorterExtension).unwrap();
        let lie = p.with_eqos(truth.eqos.clone().with(AgentId(2), T, 0.0));
        let u = expected_utility(&lie, &model, AgentId(1), &truth, &AuditMechanism::PorterExtension).unwrap();
        assert_eq!(honest, 0.0);
        assert!((u - 0.1).abs() < 1e-12);
    }

    #[test]
    fn bystander_gets_surplus_minus_discount() {
        let mut p = costless_pair((0.6, 1.0), (0.8, 0.6));
        p.agents.push(AgentId(3));
        p.eqos.push(EqosMatrix::new(AgentId(3)).with(AgentId(1), T, 0.5).with(AgentId(2), T, 0.5));
        let model = pair_weights();
        let truth = TrueType::truthful(&p, AgentId(3)).unwrap();
        let u = expected_utility(&p, &model, AgentId(3), &truth, &AuditMechanism::Gtbm(DiscountPolicy::Zero)).unwrap();
        assert!((u - 0.8).abs() < 1e-12);
        let fixed = AuditMechanism::Gtbm(DiscountPolicy::fixed(0.8).unwrap());
        assert!(expected_utility(&p, &model, AgentId(3), &truth, &fixed).unwrap().abs() < 1e-12);
    }

    #[test]
    fn gtbm_passes_small_grid() {
        let p = costless_pair((0.6, 1.0), (0.8, 0.6));
        let cfg = AuditConfig::grid(0.1, 5).unwrap();
        let r = audit_incentive_compatibility(&p, &pair_weights(), &AuditMechanism::Gtbm(DiscountPolicy::Zero), &cfg).unwrap();
        assert!(r.pass, "{}", r.table());
        let ext = audit_incentive_compatibility(&p, &pair_weights(), &AuditMechanism::PorterExtension, &cfg).unwrap();
        assert!(!ext.pass);
    }

    #[test]
    fn single_bidder_trivially_passes() {
        let mut p = costless_pair((0.6, 1.0), (0.8, 0.6));
        p.bids.pop();
        for m in &mut p.eqos {
            m.entries.remove(&(AgentId(2), T));
        }
        let cfg = AuditConfig::grid(0.25, 3).unwrap();
        let r = audit_incentive_compatibility(&p, &pair_weights(), &AuditMechanism::Gtbm(DiscountPolicy::Zero), &cfg).unwrap();
        assert!(r.pass);
        assert!(r.to_json().unwrap().contains("incentive_compatibility"));
    }

    #[test]
    fn zero_policy_is_individually_rational() {
        let p = costless_pair((0.6, 1.0), (0.8, 0.6));
        let cfg = AuditConfig { type_values: Some(vec![0.2, 0.9]), ..Default::default() };
        let r = audit_individual_rationality(&p, &pair_weights(), &AuditMechanism::Gtbm(DiscountPolicy::Zero), &cfg).unwrap();
        assert!(r.pass, "{}", r.table());
    }

    #[test]
    fn misreport_description() {
        let m = Misreport { eqos: vec![((AgentId(2), T), 0.0)], cost_scale: 1.5, value_scale: 1.0 };
        assert_eq!(m.describe(), "eta[2][0]=0.00, costs x1.50");
        assert_eq!(Misreport::truthful().describe(), "truthful");
    }
}
