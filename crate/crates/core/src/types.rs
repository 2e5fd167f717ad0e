//! Domain types shared by every stage of the clearing pipeline.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Largest bundle accepted anywhere in the engine.
pub const MAX_BUNDLE: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub u16);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u32);

impl TaskId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl AgentId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "task {}", self.0)
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "agent {}", self.0)
    }
}

/// A set of tasks stored as a 64-bit mask.
///
/// Ordering is lexicographic on the ascending task lists, so `{0,5} < {1}`
/// and a proper prefix sorts first (`{0} < {0,1}`).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct TaskSet(u64);

impl TaskSet {
    pub const CAPACITY: usize = 64;

    pub const fn empty() -> Self {
        TaskSet(0)
    }

    pub const fn from_bits(bits: u64) -> Self {
        TaskSet(bits)
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    pub fn singleton(task: TaskId) -> Self {
        let mut s = TaskSet::empty();
        s.insert(task);
        s
    }

    /// Builds a set, returning `None` if any index is out of range.
    pub fn try_from_tasks<I: IntoIterator<Item = TaskId>>(tasks: I) -> Option<Self> {
        let mut bits = 0u64;
        for t in tasks {
            if t.index() >= Self::CAPACITY {
                return None;
            }
            bits |= 1 << t.index();
        }
        Some(TaskSet(bits))
    }

    /// Panics on an index outside `0..64`.
    pub fn from_tasks<I: IntoIterator<Item = TaskId>>(tasks: I) -> Self {
        Self::try_from_tasks(tasks).expect("task index out of TaskSet range")
    }

    pub fn insert(&mut self, task: TaskId) {
        assert!(task.index() < Self::CAPACITY, "task index out of TaskSet range");
        self.0 |= 1 << task.index();
    }

    pub fn contains(self, task: TaskId) -> bool {
        task.index() < Self::CAPACITY && self.0 & (1 << task.index()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(self, other: TaskSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: TaskSet) -> bool {
        self.0 & other.0 == 0
    }

    pub fn union(self, other: TaskSet) -> TaskSet {
        TaskSet(self.0 | other.0)
    }

    pub fn intersection(self, other: TaskSet) -> TaskSet {
        TaskSet(self.0 & other.0)
    }

    pub fn difference(self, other: TaskSet) -> TaskSet {
        TaskSet(self.0 & !other.0)
    }

    /// Tasks in ascending order.
    pub fn iter(self) -> impl Iterator<Item = TaskId> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let t = bits.trailing_zeros();
            bits &= bits - 1;
            Some(TaskId(t as u16))
        })
    }

    /// Every subset of `self`, including the empty set and `self`.
    pub fn subsets(self) -> impl Iterator<Item = TaskSet> {
        let full = self.0;
        let mut next = Some(0u64);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == full { None } else { Some((cur.wrapping_sub(full)) & full) };
            Some(TaskSet(cur))
        })
    }

    pub fn to_vec(self) -> Vec<TaskId> {
        self.iter().collect()
    }
}

impl Ord for TaskSet {
    fn cmp(&self, other: &Self) -> Ordering {
        let (mut a, mut b) = (self.0, other.0);
        loop {
            if a == b {
                return Ordering::Equal;
            }
            if a == 0 {
                return Ordering::Less;
            }
            if b == 0 {
                return Ordering::Greater;
            }
            let (ta, tb) = (a.trailing_zeros(), b.trailing_zeros());
            if ta != tb {
                return ta.cmp(&tb);
            }
            a &= a - 1;
            b &= b - 1;
        }
    }
}

impl PartialOrd for TaskSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for TaskSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for TaskSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, t) in self.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", t.0)?;
        }
        f.write_str("}")
    }
}

impl FromIterator<TaskId> for TaskSet {
    fn from_iter<I: IntoIterator<Item = TaskId>>(iter: I) -> Self {
        TaskSet::from_tasks(iter)
    }
}

impl Serialize for TaskSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.iter().map(|t| t.0))
    }
}

impl<'de> Deserialize<'de> for TaskSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = Vec::<u16>::deserialize(d)?;
        let mut set = TaskSet::empty();
        for t in raw {
            if t as usize >= TaskSet::CAPACITY {
                return Err(serde::de::Error::custom(format!(
                    "task index {t} exceeds the supported maximum of {}",
                    TaskSet::CAPACITY - 1
                )));
            }
            if set.contains(TaskId(t)) {
                return Err(serde::de::Error::custom(format!("task {t} repeated in bundle")));
            }
            set.insert(TaskId(t));
        }
        Ok(set)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValuationAtom {
    pub requester: AgentId,
    pub bundle: TaskSet,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BidAtom {
    pub performer: AgentId,
    pub bundle: TaskSet,
    pub cost: f64,
}

/// A requester's valuation: keys are the requestable bundles (XOR atoms),
/// and any other subset is worth 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValuationMap {
    pub requester: AgentId,
    pub entries: BTreeMap<TaskSet, f64>,
}

impl ValuationMap {
    pub fn new(requester: AgentId) -> Self {
        ValuationMap { requester, entries: BTreeMap::new() }
    }

    pub fn from_atoms<I: IntoIterator<Item = (TaskSet, f64)>>(requester: AgentId, atoms: I) -> Self {
        ValuationMap { requester, entries: atoms.into_iter().collect() }
    }

    pub fn lookup(&self, set: TaskSet) -> f64 {
        self.entries.get(&set).copied().unwrap_or(0.0)
    }

    pub fn atoms(&self) -> impl Iterator<Item = ValuationAtom> + '_ {
        self.entries
            .iter()
            .map(|(&bundle, &value)| ValuationAtom { requester: self.requester, bundle, value })
    }

    /// True when `v(S \ {t}) <= v(S)` for every subset `S` of every atom.
    pub fn is_subset_monotone(&self) -> bool {
        self.entries.keys().all(|&bundle| {
            bundle.subsets().all(|s| s.iter().all(|t| self.lookup(s.difference(TaskSet::singleton(t))) <= self.lookup(s)))
        })
    }

    /// Multiplies every value by `factor`.
    pub fn scaled(&self, factor: f64) -> ValuationMap {
        ValuationMap {
            requester: self.requester,
            entries: self.entries.iter().map(|(&k, &v)| (k, v * factor)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EqosMatrix {
    pub reporter: AgentId,
    pub entries: BTreeMap<(AgentId, TaskId), f64>,
}

impl EqosMatrix {
    pub fn new(reporter: AgentId) -> Self {
        EqosMatrix { reporter, entries: BTreeMap::new() }
    }

    pub fn get(&self, performer: AgentId, task: TaskId) -> Option<f64> {
        self.entries.get(&(performer, task)).copied()
    }

    pub fn set(&mut self, performer: AgentId, task: TaskId, value: f64) {
        self.entries.insert((performer, task), value);
    }

    pub fn with(mut self, performer: AgentId, task: TaskId, value: f64) -> Self {
        self.set(performer, task, value);
        self
    }

    /// Same keys, every value replaced by `value`.
    pub fn filled(&self, value: f64) -> EqosMatrix {
        EqosMatrix {
            reporter: self.reporter,
            entries: self.entries.keys().map(|&k| (k, value)).collect(),
        }
    }
}

/// Closed interval of admissible EQOS values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EqosDomain {
    pub lo: f64,
    pub hi: f64,
}

impl Default for EqosDomain {
    fn default() -> Self {
        EqosDomain { lo: 0.0, hi: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportProfile {
    pub agents: Vec<AgentId>,
    pub tasks: Vec<TaskId>,
    pub valuations: Vec<ValuationMap>,
    pub bids: Vec<BidAtom>,
    pub eqos: Vec<EqosMatrix>,
    pub free_disposal: bool,
    pub eqos_domain: EqosDomain,
}

impl ReportProfile {
    pub fn valuation_of(&self, agent: AgentId) -> Option<&ValuationMap> {
        self.valuations.iter().find(|v| v.requester == agent)
    }

    pub fn eqos_of(&self, agent: AgentId) -> Option<&EqosMatrix> {
        self.eqos.iter().find(|m| m.reporter == agent)
    }

    pub fn bids_of(&self, agent: AgentId) -> impl Iterator<Item = &BidAtom> + '_ {
        self.bids.iter().filter(move |b| b.performer == agent)
    }

    /// Agents that submitted at least one bid, ascending.
    pub fn performers(&self) -> Vec<AgentId> {
        self.bids.iter().map(|b| b.performer).collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Agents that submitted a non-empty valuation map, ascending.
    pub fn requesters(&self) -> Vec<AgentId> {
        self.valuations
            .iter()
            .filter(|v| !v.entries.is_empty())
            .map(|v| v.requester)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// (performer, task) pairs for which some bid exists.
    pub fn bid_pairs(&self) -> BTreeSet<(AgentId, TaskId)> {
        self.bids.iter().flat_map(|b| b.bundle.iter().map(move |t| (b.performer, t))).collect()
    }

    /// Copy with `agent`'s EQOS matrix replaced.
    pub fn with_eqos(&self, matrix: EqosMatrix) -> ReportProfile {
        let mut p = self.clone();
        match p.eqos.iter_mut().find(|m| m.reporter == matrix.reporter) {
            Some(slot) => *slot = matrix,
            None => p.eqos.push(matrix),
        }
        p
    }

    /// Copy with `agent`'s bids replaced.
    pub fn with_bids(&self, agent: AgentId, bids: Vec<BidAtom>) -> ReportProfile {
        let mut p = self.clone();
        let first = p.bids.iter().position(|b| b.performer == agent).unwrap_or(p.bids.len());
        p.bids.retain(|b| b.performer != agent);
        let at = first.min(p.bids.len());
        p.bids.splice(at..at, bids);
        p
    }

    /// Copy with `agent`'s valuation map replaced (or removed with `None`).
    pub fn with_valuation(&self, agent: AgentId, vmap: Option<ValuationMap>) -> ReportProfile {
        let mut p = self.clone();
        let pos = p.valuations.iter().position(|v| v.requester == agent);
        match (pos, vmap) {
            (Some(i), Some(v)) => p.valuations[i] = v,
            (Some(i), None) => {
                p.valuations.remove(i);
            }
            (None, Some(v)) => p.valuations.push(v),
            (None, None) => {}
        }
        p
    }
}

/// One task performed by `performer` on behalf of `requester`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Assignment {
    pub task: TaskId,
    pub requester: AgentId,
    pub performer: AgentId,
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "task {} for agent {} by agent {}", self.task.0, self.requester.0, self.performer.0)
    }
}

/// Observed completion of every assignment in an allocation.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub completed: BTreeMap<Assignment, bool>,
}

impl ExecutionOutcome {
    /// Bit `k` set iff the `k`-th assignment (ascending order) completed.
    pub fn mask(&self) -> u64 {
        self.completed
            .values()
            .enumerate()
            .fold(0, |m, (k, &done)| if done { m | (1 << k) } else { m })
    }

    pub fn from_mask(assignments: &[Assignment], mask: u64) -> Self {
        ExecutionOutcome {
            completed: assignments.iter().enumerate().map(|(k, &a)| (a, mask >> k & 1 == 1)).collect(),
        }
    }

    pub fn all(assignments: &[Assignment], done: bool) -> Self {
        ExecutionOutcome { completed: assignments.iter().map(|&a| (a, done)).collect() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    DuplicateAgent { agent: AgentId },
    DuplicateTask { task: TaskId },
    TaskOutOfRange { task: TaskId },
    UnknownAgent { agent: AgentId, context: &'static str },
    UnknownTask { task: TaskId, agent: AgentId },
    EmptyBundle { agent: AgentId },
    BundleTooLarge { agent: AgentId, size: usize },
    InvalidValue { requester: AgentId, bundle: TaskSet, value: f64 },
    InvalidCost { performer: AgentId, bundle: TaskSet, cost: f64 },
    DuplicateBundle { agent: AgentId, bundle: TaskSet },
    DuplicateValuationMap { agent: AgentId },
    MissingEqosMatrix { agent: AgentId },
    DuplicateEqosMatrix { agent: AgentId },
    EqosOutOfRange { reporter: AgentId, performer: AgentId, task: TaskId, value: f64 },
    MissingEqosEntry { reporter: AgentId, performer: AgentId, task: TaskId },
    InvalidEqosDomain { lo: f64, hi: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            DuplicateAgent { agent } => write!(f, "duplicate agent: {agent}"),
            DuplicateTask { task } => write!(f, "duplicate task: {task}"),
            TaskOutOfRange { task } => write!(f, "task index out of range: {task}"),
            UnknownAgent { agent, context } => write!(f, "unknown agent in {context}: {agent}"),
            UnknownTask { task, agent } => write!(f, "unknown task: {task} used by {agent}"),
            EmptyBundle { agent } => write!(f, "empty bundle: {agent}"),
            BundleTooLarge { agent, size } => {
                write!(f, "bundle too large: {agent} submitted {size} tasks (cap {MAX_BUNDLE})")
            }
            InvalidValue { requester, bundle, value } => {
                write!(f, "negative value: {requester} bundle {bundle} value {value}")
            }
            InvalidCost { performer, bundle, cost } => {
                write!(f, "negative cost: {performer} bundle {bundle} cost {cost}")
            }
            DuplicateBundle { agent, bundle } => write!(f, "duplicate bundle: {agent} bundle {bundle}"),
            DuplicateValuationMap { agent } => write!(f, "duplicate valuation map: {agent}"),
            MissingEqosMatrix { agent } => write!(f, "missing EQOS matrix: {agent}"),
            DuplicateEqosMatrix { agent } => write!(f, "duplicate EQOS matrix: {agent}"),
            EqosOutOfRange { reporter, performer, task, value } => write!(
                f,
                "EQOS out of range: {reporter} rates {performer} on {task} at {value}"
            ),
            MissingEqosEntry { reporter, performer, task } => {
                write!(f, "missing EQOS entry: {reporter} has no rating of {performer} on {task}")
            }
            InvalidEqosDomain { lo, hi } => write!(f, "invalid EQOS domain: [{lo}, {hi}]"),
        }
    }
}

/// Every invariant violation in `profile`; empty means admissible.
pub fn validate_report_profile(profile: &ReportProfile) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut agents = BTreeSet::new();
    for &a in &profile.agents {
        if !agents.insert(a) {
            out.push(Violation::DuplicateAgent { agent: a });
        }
    }
    let mut tasks = BTreeSet::new();
    for &t in &profile.tasks {
        if !tasks.insert(t) {
            out.push(Violation::DuplicateTask { task: t });
        }
        if t.index() >= TaskSet::CAPACITY {
            out.push(Violation::TaskOutOfRange { task: t });
        }
    }

    let d = profile.eqos_domain;
    if !(d.lo.is_finite() && d.hi.is_finite() && 0.0 <= d.lo && d.lo <= d.hi && d.hi <= 1.0) {
        out.push(Violation::InvalidEqosDomain { lo: d.lo, hi: d.hi });
    }

    let check_bundle = |agent: AgentId, bundle: TaskSet, out: &mut Vec<Violation>| {
        if bundle.is_empty() {
            out.push(Violation::EmptyBundle { agent });
        }
        if bundle.len() > MAX_BUNDLE {
            out.push(Violation::BundleTooLarge { agent, size: bundle.len() });
        }
        for t in bundle.iter() {
            if !tasks.contains(&t) {
                out.push(Violation::UnknownTask { task: t, agent });
            }
        }
    };

    let mut seen_vmaps = BTreeSet::new();
    for vmap in &profile.valuations {
        let r = vmap.requester;
        if !agents.contains(&r) {
            out.push(Violation::UnknownAgent { agent: r, context: "valuations" });
        }
        if !seen_vmaps.insert(r) {
            out.push(Violation::DuplicateValuationMap { agent: r });
        }
        for (&bundle, &value) in &vmap.entries {
            check_bundle(r, bundle, &mut out);
            if !(value >= 0.0 && value.is_finite()) {
                out.push(Violation::InvalidValue { requester: r, bundle, value });
            }
        }
    }

    let mut seen_bids = BTreeSet::new();
    for bid in &profile.bids {
        let p = bid.performer;
        if !agents.contains(&p) {
            out.push(Violation::UnknownAgent { agent: p, context: "bids" });
        }
        check_bundle(p, bid.bundle, &mut out);
        if !(bid.cost >= 0.0 && bid.cost.is_finite()) {
            out.push(Violation::InvalidCost { performer: p, bundle: bid.bundle, cost: bid.cost });
        }
        if !seen_bids.insert((p, bid.bundle)) {
            out.push(Violation::DuplicateBundle { agent: p, bundle: bid.bundle });
        }
    }

    let mut matrices: BTreeMap<AgentId, &EqosMatrix> = BTreeMap::new();
    for m in &profile.eqos {
        if !agents.contains(&m.reporter) {
            out.push(Violation::UnknownAgent { agent: m.reporter, context: "eqos" });
        }
        if matrices.insert(m.reporter, m).is_some() {
            out.push(Violation::DuplicateEqosMatrix { agent: m.reporter });
        }
        for (&(performer, task), &value) in &m.entries {
            if !(0.0..=1.0).contains(&value) {
                out.push(Violation::EqosOutOfRange { reporter: m.reporter, performer, task, value });
            }
        }
    }

    let pairs = profile.bid_pairs();
    for &a in &agents {
        match matrices.get(&a) {
            None => out.push(Violation::MissingEqosMatrix { agent: a }),
            Some(m) => {
                for &(performer, task) in &pairs {
                    if m.get(performer, task).is_none() {
                        out.push(Violation::MissingEqosEntry { reporter: a, performer, task });
                    }
                }
            }
        }
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(v: &[u16]) -> TaskSet {
        TaskSet::from_tasks(v.iter().map(|&t| TaskId(t)))
    }

    #[test]
    fn taskset_order_is_lexicographic_on_sorted_lists() {
        assert!(ts(&[0, 5]) < ts(&[1]));
        assert!(ts(&[0]) < ts(&[0, 1]));
        assert!(ts(&[0, 1]) < ts(&[0, 2]));
        assert!(ts(&[]) < ts(&[0]));
        assert_eq!(ts(&[2, 3]).cmp(&ts(&[2, 3])), Ordering::Equal);
    }

    #[test]
    fn subsets_enumerates_power_set() {
        let s = ts(&[1, 4, 7]);
        let subs: BTreeSet<TaskSet> = s.subsets().collect();
        assert_eq!(subs.len(), 8);
        assert!(subs.iter().all(|x| x.is_subset(s)));
        assert_eq!(TaskSet::empty().subsets().count(), 1);
    }

    #[test]
    fn taskset_serde_rejects_repeats_and_out_of_range() {
        assert_eq!(serde_json::from_str::<TaskSet>("[2,0]").unwrap(), ts(&[0, 2]));
        assert!(serde_json::from_str::<TaskSet>("[1,1]").is_err());
        assert!(serde_json::from_str::<TaskSet>("[64]").is_err());
        assert_eq!(serde_json::to_string(&ts(&[3, 1])).unwrap(), "[1,3]");
    }

    #[test]
    fn valuation_lookup_defaults_to_zero() {
        let v = ValuationMap::from_atoms(AgentId(0), [(ts(&[0, 1]), 100.0), (ts(&[0]), 10.0)]);
        assert_eq!(v.lookup(ts(&[1])), 0.0);
        assert_eq!(v.lookup(ts(&[0])), 10.0);
        assert!(v.is_subset_monotone());
        let bad = ValuationMap::from_atoms(AgentId(0), [(ts(&[0, 1]), 5.0), (ts(&[0]), 10.0)]);
        assert!(!bad.is_subset_monotone());
    }

    #[test]
    fn outcome_mask_round_trips() {
        let a = [
            Assignment { task: TaskId(0), requester: AgentId(0), performer: AgentId(1) },
            Assignment { task: TaskId(1), requester: AgentId(0), performer: AgentId(2) },
        ];
        let o = ExecutionOutcome::from_mask(&a, 0b10);
        assert_eq!(o.mask(), 0b10);
        assert!(!o.completed[&a[0]]);
        assert!(o.completed[&a[1]]);
    }

    fn two_agent_profile() -> ReportProfile {
        let (a1, a2, t) = (AgentId(1), AgentId(2), TaskId(0));
        ReportProfile {
            agents: vec![a1, a2],
            tasks: vec![t],
            valuations: vec![],
            bids: vec![
                BidAtom { performer: a1, bundle: TaskSet::singleton(t), cost: 0.0 },
                BidAtom { performer: a2, bundle: TaskSet::singleton(t), cost: 0.0 },
            ],
            eqos: vec![
                EqosMatrix::new(a1).with(a1, t, 0.6).with(a2, t, 1.0),
                EqosMatrix::new(a2).with(a1, t, 0.8).with(a2, t, 0.6),
            ],
            free_disposal: false,
            eqos_domain: EqosDomain::default(),
        }
    }

    #[test]
    fn validation_accepts_two_agent_costless_profile() {
        assert!(validate_report_profile(&two_agent_profile()).is_empty());
    }

    #[test]
    fn validation_flags_out_of_range_eqos() {
        let mut p = two_agent_profile();
        p.eqos[0].set(AgentId(2), TaskId(0), 1.3);
        let v = validate_report_profile(&p);
        assert_eq!(v.len(), 1);
        assert!(v[0].to_string().starts_with("EQOS out of range"));
    }

    #[test]
    fn validation_flags_missing_eqos_entry() {
        let mut p = two_agent_profile();
        p.tasks.push(TaskId(3));
        p.bids.push(BidAtom { performer: AgentId(2), bundle: ts(&[3]), cost: 1.0 });
        p.eqos[1].set(AgentId(2), TaskId(3), 0.5);
        let v = validate_report_profile(&p);
        assert_eq!(v.len(), 1);
        assert!(v[0].to_string().starts_with("missing EQOS entry"));
        assert_eq!(validate_report_profile(&p), v);
    }

    #[test]
    fn validation_flags_negative_cost_and_duplicate_bundle() {
        let mut p = two_agent_profile();
        p.bids.push(BidAtom { performer: AgentId(1), bundle: ts(&[0]), cost: -1.0 });
        let v = validate_report_profile(&p);
        assert!(v.iter().any(|x| matches!(x, Violation::InvalidCost { .. })));
        assert!(v.iter().any(|x| matches!(x, Violation::DuplicateBundle { .. })));
    }

    #[test]
    fn with_bids_keeps_position() {
        let p = two_agent_profile();
        let q = p.with_bids(AgentId(1), vec![BidAtom { performer: AgentId(1), bundle: ts(&[0]), cost: 7.0 }]);
        assert_eq!(q.bids[0].cost, 7.0);
        assert_eq!(q.bids[1].performer, AgentId(2));
    }
}
