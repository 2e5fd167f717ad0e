//! Allocation and payment rules.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hypergraph::{build_hypergraph, expected_value, AllocationHypergraph};
use crate::parallel::pool;
use crate::solver::{solve, Restriction, SolveResult, OBJECTIVE_TOLERANCE};
use crate::trust::{build_trust_table, spot_check_monotone, TrustKind, TrustModel, TrustTable};
use crate::types::{
    validate_report_profile, AgentId, Assignment, EqosMatrix, ExecutionOutcome, ReportProfile, TaskId, TaskSet,
    ValuationMap,
};

/// Largest allocation whose payments are expanded into explicit patterns.
pub const MAX_PATTERN_ASSIGNMENTS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MechanismKind {
    Gtbm,
    SingleTaskTbm,
    Porter,
    NaiveVickrey,
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MechanismKind::Gtbm => "gtbm",
            MechanismKind::SingleTaskTbm => "single-task-tbm",
            MechanismKind::Porter => "porter",
            MechanismKind::NaiveVickrey => "naive-vickrey",
        })
    }
}

impl FromStr for MechanismKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gtbm" => Ok(MechanismKind::Gtbm),
            "single-task-tbm" => Ok(MechanismKind::SingleTaskTbm),
            "porter" => Ok(MechanismKind::Porter),
            "naive-vickrey" => Ok(MechanismKind::NaiveVickrey),
            other => Err(Error::Config(format!("unknown mechanism '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FixedDiscount {
    Uniform(f64),
    PerAgent(BTreeMap<AgentId, f64>),
}

/// How the report-independent discount `B_i` is chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum DiscountPolicy {
    Zero,
    Fixed(FixedDiscount),
    MinMarginal,
}

impl DiscountPolicy {
    pub fn fixed(value: f64) -> Result<Self> {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(Error::Config(format!("fixed discount must be non-negative, got {value}")));
        }
        Ok(DiscountPolicy::Fixed(FixedDiscount::Uniform(value)))
    }

    pub fn per_agent(values: BTreeMap<AgentId, f64>) -> Result<Self> {
        if let Some((a, v)) = values.iter().find(|(_, &v)| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("fixed discount for {a} must be non-negative, got {v}")));
        }
        Ok(DiscountPolicy::Fixed(FixedDiscount::PerAgent(values)))
    }
}

impl fmt::Display for DiscountPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiscountPolicy::Zero => f.write_str("zero"),
            DiscountPolicy::Fixed(FixedDiscount::Uniform(v)) => write!(f, "fixed:{v}"),
            DiscountPolicy::Fixed(FixedDiscount::PerAgent(_)) => f.write_str("fixed:per-agent"),
            DiscountPolicy::MinMarginal => f.write_str("min-marginal"),
        }
    }
}

impl FromStr for DiscountPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(DiscountPolicy::Zero),
            "min-marginal" => Ok(DiscountPolicy::MinMarginal),
            _ => match s.strip_prefix("fixed:") {
                Some(v) => {
                    let value: f64 = v.parse().map_err(|_| Error::Config(format!("bad fixed discount '{v}'")))?;
                    DiscountPolicy::fixed(value)
                }
                None => Err(Error::Config(format!("unknown policy '{s}'"))),
            },
        }
    }
}

/// Everything produced while clearing one profile.
#[derive(Clone, Debug)]
pub struct Clearing {
    pub table: TrustTable,
    pub graph: AllocationHypergraph,
    pub result: SolveResult,
}

fn ensure_valid(profile: &ReportProfile) -> Result<()> {
    let violations = validate_report_profile(profile);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidProfile(violations))
    }
}

/// Trust table, hypergraph and optimal allocation of a profile.
pub fn gtbm_clear(profile: &ReportProfile, model: &TrustModel) -> Result<Clearing> {
    ensure_valid(profile)?;
    let table = build_trust_table(model, profile, None)?;
    let graph = build_hypergraph(profile, &table)?;
    let result = solve(&graph, profile.free_disposal, None)?;
    Ok(Clearing { table, graph, result })
}

pub fn gtbm_allocate(profile: &ReportProfile, model: &TrustModel) -> Result<SolveResult> {
    Ok(gtbm_clear(profile, model)?.result)
}

/// Best welfare of the others with `agent` removed and its EQOS pinned to
/// the domain's lower bound.
pub fn compute_b_min_marginal(profile: &ReportProfile, model: &TrustModel, agent: AgentId) -> Result<f64> {
    if !model.monotone {
        return Err(Error::MinMarginalUnsupported(format!("trust model '{}' is not declared monotone", model.name())));
    }
    if let Some(v) = profile.valuations.iter().find(|v| !v.is_subset_monotone()) {
        return Err(Error::MinMarginalUnsupported(format!(
            "valuation of {} is not subset-monotone",
            v.requester
        )));
    }
    if cfg!(debug_assertions) && matches!(model.kind, TrustKind::Custom(_)) && !spot_check_monotone(model, profile, 32, 0)? {
        return Err(Error::MinMarginalUnsupported(format!(
            "trust model '{}' failed the monotonicity spot check",
            model.name()
        )));
    }
    let floor = EqosMatrix {
        reporter: agent,
        entries: profile.bid_pairs().into_iter().map(|k| (k, profile.eqos_domain.lo)).collect(),
    };
    let table = build_trust_table(model, profile, Some(&floor))?;
    let graph = build_hypergraph(profile, &table)?;
    let result = solve(&graph, profile.free_disposal, Some(&Restriction::excluding(agent)))?;
    Ok(result.objective.max(0.0))
}

/// Discount of every agent in `profile.agents` under `policy`.
pub fn resolve_discounts(
    profile: &ReportProfile,
    model: &TrustModel,
    policy: &DiscountPolicy,
) -> Result<BTreeMap<AgentId, f64>> {
    match policy {
        DiscountPolicy::Zero => Ok(profile.agents.iter().map(|&a| (a, 0.0)).collect()),
        DiscountPolicy::Fixed(FixedDiscount::Uniform(v)) => Ok(profile.agents.iter().map(|&a| (a, *v)).collect()),
        DiscountPolicy::Fixed(FixedDiscount::PerAgent(m)) => {
            Ok(profile.agents.iter().map(|&a| (a, m.get(&a).copied().unwrap_or(0.0))).collect())
        }
        DiscountPolicy::MinMarginal => pool().install(|| {
            profile
                .agents
                .par_iter()
                .map(|&a| Ok((a, compute_b_min_marginal(profile, model, a)?)))
                .collect()
        }),
    }
}

pub fn discount_for(profile: &ReportProfile, model: &TrustModel, policy: &DiscountPolicy, agent: AgentId) -> Result<f64> {
    match policy {
        DiscountPolicy::Zero => Ok(0.0),
        DiscountPolicy::Fixed(FixedDiscount::Uniform(v)) => Ok(*v),
        DiscountPolicy::Fixed(FixedDiscount::PerAgent(m)) => Ok(m.get(&agent).copied().unwrap_or(0.0)),
        DiscountPolicy::MinMarginal => compute_b_min_marginal(profile, model, agent),
    }
}

/// One requester's realized value, read off the completion bits of its assignments.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValueTerm {
    pub requester: AgentId,
    /// `(bit, assignment)` pairs into the schedule's assignment list.
    pub assignments: Vec<(usize, Assignment)>,
    pub vmap: ValuationMap,
}

impl ValueTerm {
    pub fn realized(&self, mask: u64) -> f64 {
        let done: TaskSet = self.assignments.iter().filter(|(bit, _)| mask >> bit & 1 == 1).map(|(_, a)| a.task).collect();
        self.vmap.lookup(done)
    }

    pub fn expected(&self, table: &TrustTable) -> Result<f64> {
        let probs: Vec<(TaskId, f64)> = self
            .assignments
            .iter()
            .map(|(_, a)| Ok((a.task, table.require(a.performer, a.task)?)))
            .collect::<Result<_>>()?;
        Ok(expected_value(&self.vmap, &probs))
    }
}

/// `Σ terms(κ) + fixed − discount`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContingentPayment {
    pub agent: AgentId,
    pub discount: f64,
    pub fixed: f64,
    pub terms: Vec<ValueTerm>,
}

impl ContingentPayment {
    pub fn payment(&self, mask: u64) -> f64 {
        self.terms.iter().map(|t| t.realized(mask)).sum::<f64>() + self.fixed - self.discount
    }

    pub fn expected(&self, table: &TrustTable) -> Result<f64> {
        let mut acc = self.fixed - self.discount;
        for t in &self.terms {
            acc += t.expected(table)?;
        }
        Ok(acc)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PatternPayment {
    pub agent: AgentId,
    pub discount: f64,
    /// `(completion bitmask, payment)` for every pattern.
    pub patterns: Vec<(u64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PaymentSchedule {
    pub mechanism: MechanismKind,
    /// Bit `k` of a completion mask refers to `assignments[k]`.
    pub assignments: Vec<Assignment>,
    pub payments: Vec<ContingentPayment>,
}

impl PaymentSchedule {
    pub fn payment_of(&self, agent: AgentId) -> Option<&ContingentPayment> {
        self.payments.iter().find(|p| p.agent == agent)
    }

    pub fn mask_of(&self, outcome: &ExecutionOutcome) -> Result<u64> {
        if outcome.completed.len() != self.assignments.len()
            || !self.assignments.iter().all(|a| outcome.completed.contains_key(a))
        {
            return Err(Error::Precondition("outcome does not match the allocation's assignments".into()));
        }
        Ok(outcome.mask())
    }

    pub fn realized(&self, outcome: &ExecutionOutcome) -> Result<BTreeMap<AgentId, f64>> {
        let mask = self.mask_of(outcome)?;
        Ok(self.realized_mask(mask))
    }

    pub fn realized_mask(&self, mask: u64) -> BTreeMap<AgentId, f64> {
        self.payments.iter().map(|p| (p.agent, p.payment(mask))).collect()
    }

    /// Centre's net position: minus the sum of transfers to agents.
    pub fn centre_balance(&self, outcome: &ExecutionOutcome) -> Result<f64> {
        Ok(-self.realized(outcome)?.values().sum::<f64>())
    }

    pub fn expected(&self, table: &TrustTable) -> Result<BTreeMap<AgentId, f64>> {
        self.payments.iter().map(|p| Ok((p.agent, p.expected(table)?))).collect()
    }

    /// Every completion pattern with its payment, per agent.
    pub fn patterns(&self) -> Result<Vec<PatternPayment>> {
        let n = self.assignments.len();
        if n > MAX_PATTERN_ASSIGNMENTS {
            return Err(Error::Precondition(format!(
                "{n} assignments exceed the pattern listing cap of {MAX_PATTERN_ASSIGNMENTS}"
            )));
        }
        Ok(self
            .payments
            .iter()
            .map(|p| PatternPayment {
                agent: p.agent,
                discount: p.discount,
                patterns: (0..1u64 << n).map(|m| (m, p.payment(m))).collect(),
            })
            .collect())
    }
}

fn bit_index(assignments: &[Assignment]) -> BTreeMap<Assignment, usize> {
    assignments.iter().enumerate().map(|(k, &a)| (a, k)).collect()
}

/// Payments of every agent for a chosen allocation.
pub fn gtbm_payment_schedule(
    profile: &ReportProfile,
    model: &TrustModel,
    result: &SolveResult,
    policy: &DiscountPolicy,
) -> Result<PaymentSchedule> {
    let discounts = resolve_discounts(profile, model, policy)?;
    let assignments = result.allocation.assignments();
    let payments = profile
        .agents
        .iter()
        .map(|&a| gtbm_agent_payment(profile, result, &assignments, a, discounts[&a]))
        .collect::<Result<_>>()?;
    Ok(PaymentSchedule { mechanism: MechanismKind::Gtbm, assignments, payments })
}

/// One agent's payment for a chosen allocation with a known discount.
pub fn gtbm_agent_payment(
    profile: &ReportProfile,
    result: &SolveResult,
    assignments: &[Assignment],
    agent: AgentId,
    discount: f64,
) -> Result<ContingentPayment> {
    let bits = bit_index(assignments);
    let mut terms = Vec::new();
    for e in result.allocation.selected_v.iter().filter(|e| e.atom.requester != agent) {
        let vmap = profile
            .valuation_of(e.atom.requester)
            .ok_or_else(|| Error::Precondition(format!("no valuation for {}", e.atom.requester)))?;
        terms.push(ValueTerm {
            requester: e.atom.requester,
            assignments: e.assignments().map(|a| (bits[&a], a)).collect(),
            vmap: vmap.clone(),
        });
    }
    let fixed = -result
        .allocation
        .selected_c
        .iter()
        .filter(|c| c.atom.performer != agent)
        .map(|c| c.weight)
        .sum::<f64>();
    Ok(ContingentPayment { agent, discount, fixed, terms })
}

/// One requester, one task, single-task bids on it.
#[derive(Clone, Debug, PartialEq)]
pub struct SingleTaskInstance {
    pub requester: AgentId,
    pub task: TaskId,
    pub value: f64,
    /// `(performer, cost)` ascending by performer.
    pub bidders: Vec<(AgentId, f64)>,
}

impl SingleTaskInstance {
    pub fn from_profile(profile: &ReportProfile) -> Result<Self> {
        ensure_valid(profile)?;
        let requesters: Vec<&ValuationMap> = profile.valuations.iter().filter(|v| !v.entries.is_empty()).collect();
        let [vmap] = requesters.as_slice() else {
            return Err(Error::ShapeMismatch(format!("expected one requester, found {}", requesters.len())));
        };
        let mut atoms = vmap.atoms();
        let (Some(atom), None) = (atoms.next(), atoms.next()) else {
            return Err(Error::ShapeMismatch("requester must value exactly one bundle".into()));
        };
        if atom.bundle.len() != 1 {
            return Err(Error::ShapeMismatch(format!("requested bundle {} is not a single task", atom.bundle)));
        }
        let task = atom.bundle.iter().next().expect("non-empty");
        let mut bidders = Vec::new();
        for b in &profile.bids {
            if b.bundle != TaskSet::singleton(task) {
                return Err(Error::ShapeMismatch(format!("{} bids on {}, not on task {}", b.performer, b.bundle, task.0)));
            }
            bidders.push((b.performer, b.cost));
        }
        bidders.sort_by_key(|b| b.0);
        Ok(SingleTaskInstance { requester: vmap.requester, task, value: atom.value, bidders })
    }

    /// Best `value * p - cost` over bidders passing `keep`, ties to the lowest id.
    /// Returns `None` unless the best surplus is positive.
    fn best(&self, prob: &dyn Fn(AgentId) -> Result<f64>, keep: &dyn Fn(AgentId) -> bool) -> Result<Option<(AgentId, f64)>> {
        let mut best: Option<(AgentId, f64)> = None;
        for &(j, c) in &self.bidders {
            if !keep(j) {
                continue;
            }
            let s = self.value * prob(j)? - c;
            if s > OBJECTIVE_TOLERANCE && best.is_none_or(|(_, b)| s > b + OBJECTIVE_TOLERANCE) {
                best = Some((j, s));
            }
        }
        Ok(best)
    }

    fn cost_of(&self, agent: AgentId) -> f64 {
        self.bidders.iter().find(|b| b.0 == agent).map_or(0.0, |b| b.1)
    }

    fn requester_term(&self, winner: AgentId, vmap: &ValuationMap) -> ValueTerm {
        ValueTerm {
            requester: self.requester,
            assignments: vec![(0, Assignment { task: self.task, requester: self.requester, performer: winner })],
            vmap: vmap.clone(),
        }
    }
}

/// Winner and payments of the single-task trust-based mechanism.
pub fn single_task_tbm(
    profile: &ReportProfile,
    model: &TrustModel,
    policy: &DiscountPolicy,
) -> Result<(Option<AgentId>, PaymentSchedule)> {
    let inst = SingleTaskInstance::from_profile(profile)?;
    let table = build_trust_table(model, profile, None)?;
    let winner = inst.best(&|j| Ok(table.require(j, inst.task)?), &|_| true)?.map(|w| w.0);
    let vmap = profile.valuation_of(inst.requester).expect("checked by from_profile");
    let performers: Vec<AgentId> = profile.agents.iter().copied().filter(|&a| a != inst.requester).collect();
    let assignments = winner
        .map(|w| vec![Assignment { task: inst.task, requester: inst.requester, performer: w }])
        .unwrap_or_default();
    let mut payments = Vec::new();
    for k in performers {
        let discount = discount_for(profile, model, policy, k)?;
        let payment = match winner {
            None => ContingentPayment { agent: k, discount, fixed: 0.0, terms: vec![] },
            Some(w) => ContingentPayment {
                agent: k,
                discount,
                fixed: if k == w { 0.0 } else { -inst.cost_of(w) },
                terms: vec![inst.requester_term(w, vmap)],
            },
        };
        payments.push(payment);
    }
    Ok((winner, PaymentSchedule { mechanism: MechanismKind::SingleTaskTbm, assignments, payments }))
}

fn self_reported_pos(profile: &ReportProfile) -> Result<TrustTable> {
    Ok(build_trust_table(&TrustModel::self_report(), profile, None)?)
}

/// Winner and second-best surplus under self-reported success probabilities.
fn self_pos_auction(profile: &ReportProfile, certain: bool) -> Result<(SingleTaskInstance, Option<(AgentId, f64)>)> {
    let inst = SingleTaskInstance::from_profile(profile)?;
    let table = self_reported_pos(profile)?;
    let prob = |j: AgentId| -> Result<f64> { if certain { Ok(1.0) } else { Ok(table.require(j, inst.task)?) } };
    let Some((w, _)) = inst.best(&prob, &|_| true)? else { return Ok((inst, None)) };
    let second = inst.best(&prob, &|j| j != w)?.map_or(0.0, |s| s.1);
    Ok((inst, Some((w, second))))
}

/// Success-contingent payments: the winner receives `v − W` on
/// success and `−W` on failure, `W` being the best surplus without it.
pub fn porter_schedule(profile: &ReportProfile) -> Result<PaymentSchedule> {
    let (inst, win) = self_pos_auction(profile, false)?;
    let vmap = profile.valuation_of(inst.requester).expect("checked by from_profile");
    let mut assignments = Vec::new();
    let payments = inst
        .bidders
        .iter()
        .map(|&(k, _)| match win {
            Some((w, second)) if w == k => {
                assignments = vec![Assignment { task: inst.task, requester: inst.requester, performer: w }];
                ContingentPayment { agent: k, discount: 0.0, fixed: -second, terms: vec![inst.requester_term(w, vmap)] }
            }
            _ => ContingentPayment { agent: k, discount: 0.0, fixed: 0.0, terms: vec![] },
        })
        .collect();
    Ok(PaymentSchedule { mechanism: MechanismKind::Porter, assignments, payments })
}

pub fn porter_payment(profile: &ReportProfile, success: bool) -> Result<BTreeMap<AgentId, f64>> {
    let s = porter_schedule(profile)?;
    s.realized(&ExecutionOutcome::all(&s.assignments, success))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VickreyMode {
    /// Assumes every task succeeds.
    Certain,
    /// Discounts the value by the self-reported success probability.
    Expected,
}

/// Second-price payment, not conditioned on the outcome.
pub fn naive_vickrey_schedule(profile: &ReportProfile, mode: VickreyMode) -> Result<PaymentSchedule> {
    let (inst, win) = self_pos_auction(profile, mode == VickreyMode::Certain)?;
    let table = self_reported_pos(profile)?;
    let mut assignments = Vec::new();
    let mut payments = Vec::new();
    for &(k, _) in &inst.bidders {
        let fixed = match win {
            Some((w, second)) if w == k => {
                assignments = vec![Assignment { task: inst.task, requester: inst.requester, performer: w }];
                let p = if mode == VickreyMode::Certain { 1.0 } else { table.require(w, inst.task)? };
                inst.value * p - second
            }
            _ => 0.0,
        };
        payments.push(ContingentPayment { agent: k, discount: 0.0, fixed, terms: vec![] });
    }
    Ok(PaymentSchedule { mechanism: MechanismKind::NaiveVickrey, assignments, payments })
}

pub fn naive_vickrey_payment(profile: &ReportProfile, mode: VickreyMode) -> Result<BTreeMap<AgentId, f64>> {
    Ok(naive_vickrey_schedule(profile, mode)?.realized_mask(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{BidAtom, EqosDomain};

    const R: AgentId = AgentId(0);
    const T: TaskId = TaskId(0);

    fn single_task(value: f64, bidders: &[(u32, f64, f64)], domain: EqosDomain) -> ReportProfile {
        let mut agents = vec![R];
        agents.extend(bidders.iter().map(|b| AgentId(b.0)));
        let bids: Vec<BidAtom> =
            bidders.iter().map(|b| BidAtom { performer: AgentId(b.0), bundle: TaskSet::singleton(T), cost: b.1 }).collect();
        let eqos = agents
            .iter()
            .map(|&r| EqosMatrix {
                reporter: r,
                entries: bidders.iter().map(|b| ((AgentId(b.0), T), b.2)).collect(),
            })
            .collect();
        ReportProfile {
            agents,
            tasks: vec![T],
            valuations: vec![ValuationMap::from_atoms(R, [(TaskSet::singleton(T), value)])],
            bids,
            eqos,
            free_disposal: false,
            eqos_domain: domain,
        }
    }

    fn three_bidders() -> ReportProfile {
        single_task(300.0, &[(1, 100.0, 0.5), (2, 150.0, 0.9), (3, 200.0, 1.0)], EqosDomain::default())
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn parse_policies_and_mechanisms() {
        assert_eq!("zero".parse::<DiscountPolicy>().unwrap(), DiscountPolicy::Zero);
        assert_eq!("fixed:0.6".parse::<DiscountPolicy>().unwrap(), DiscountPolicy::fixed(0.6).unwrap());
        assert_eq!("min-marginal".parse::<DiscountPolicy>().unwrap(), DiscountPolicy::MinMarginal);
        assert!("fixed:-1".parse::<DiscountPolicy>().is_err());
        assert!("other".parse::<DiscountPolicy>().is_err());
        for k in [MechanismKind::Gtbm, MechanismKind::SingleTaskTbm, MechanismKind::Porter, MechanismKind::NaiveVickrey] {
            assert_eq!(k.to_string().parse::<MechanismKind>().unwrap(), k);
        }
    }

    #[test]
    fn vickrey_expected_and_certain() {
        let p = three_bidders();
        let pay = naive_vickrey_payment(&p, VickreyMode::Expected).unwrap();
        assert!(close(pay[&AgentId(2)], 170.0));
        assert!(close(pay[&AgentId(1)], 0.0));
        let certain = naive_vickrey_payment(&p, VickreyMode::Certain).unwrap();
        assert!(close(certain[&AgentId(1)], 150.0));
    }

    #[test]
    fn vickrey_tied_bidders_pay_the_cost() {
        let p = single_task(100.0, &[(1, 30.0, 1.0), (2, 30.0, 1.0)], EqosDomain::default());
        let pay = naive_vickrey_payment(&p, VickreyMode::Expected).unwrap();
        assert!(close(pay[&AgentId(1)], 30.0));
    }

    #[test]
    fn porter_truthful_payments() {
        let p = three_bidders();
        let s = porter_payment(&p, true).unwrap();
        let f = porter_payment(&p, false).unwrap();
        assert!(close(s[&AgentId(2)], 200.0));
        assert!(close(f[&AgentId(2)], -100.0));
        assert!(close(s[&AgentId(1)], 0.0));
    }

    #[test]
    fn porter_single_bidder_gets_full_value() {
        let p = single_task(80.0, &[(1, 10.0, 1.0)], EqosDomain::default());
        assert!(close(porter_payment(&p, true).unwrap()[&AgentId(1)], 80.0));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = three_bidders();
        p.tasks.push(TaskId(1));
        p.bids.push(BidAtom { performer: AgentId(1), bundle: TaskSet::from_tasks([T, TaskId(1)]), cost: 5.0 });
        for m in &mut p.eqos {
            m.set(AgentId(1), TaskId(1), 0.5);
        }
        assert!(matches!(porter_schedule(&p), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn gtbm_matches_single_task_rule() {
        let p = single_task(1.0, &[(1, 0.0, 0.7), (2, 0.0, 0.8)], EqosDomain::default());
        let model = TrustModel::uniform(&p.agents).unwrap();
        let policy = DiscountPolicy::fixed(0.25).unwrap();
        let (winner, st) = single_task_tbm(&p, &model, &policy).unwrap();
        assert_eq!(winner, Some(AgentId(2)));
        let res = gtbm_allocate(&p, &model).unwrap();
        let g = gtbm_payment_schedule(&p, &model, &res, &policy).unwrap();
        for k in [AgentId(1), AgentId(2)] {
            for mask in 0..2 {
                assert!(close(st.payment_of(k).unwrap().payment(mask), g.payment_of(k).unwrap().payment(mask)));
            }
        }
    }

    #[test]
    fn zero_value_task_pays_minus_discount() {
        let p = single_task(0.0, &[(1, 0.0, 0.7), (2, 0.0, 0.8)], EqosDomain::default());
        let model = TrustModel::uniform(&p.agents).unwrap();
        let (winner, st) = single_task_tbm(&p, &model, &DiscountPolicy::fixed(0.3).unwrap()).unwrap();
        assert_eq!(winner, None);
        for pay in &st.payments {
            assert!(close(pay.payment(0), -0.3));
        }
    }

    #[test]
    fn min_marginal_rejects_non_monotone() {
        let p = three_bidders();
        let mut model = TrustModel::self_report();
        model.monotone = false;
        assert!(matches!(compute_b_min_marginal(&p, &model, AgentId(1)), Err(Error::MinMarginalUnsupported(_))));
    }

    #[test]
    fn min_marginal_floor_is_zero_when_unprofitable() {
        // Only one other performer; with trust pinned to 0 its surplus is negative.
        let p = single_task(10.0, &[(1, 1.0, 1.0), (2, 1.0, 1.0)], EqosDomain::default());
        let model = TrustModel::weighted_sum([(R, 0.0), (AgentId(1), 1.0), (AgentId(2), 0.0)].into()).unwrap();
        assert_eq!(compute_b_min_marginal(&p, &model, AgentId(1)).unwrap(), 0.0);
    }

    #[test]
    fn pattern_listing_covers_every_mask() {
        let p = three_bidders();
        let s = porter_schedule(&p).unwrap();
        let pats = s.patterns().unwrap();
        let w = pats.iter().find(|x| x.agent == AgentId(2)).unwrap();
        assert_eq!(w.patterns.len(), 2);
        assert!(close(w.patterns[0].1, -100.0) && close(w.patterns[1].1, 200.0));
    }
}
