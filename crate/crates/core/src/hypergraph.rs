//! Valuation and bid hypergraphs over task-per-bidder nodes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::trust::TrustTable;
use crate::types::{AgentId, Assignment, BidAtom, ReportProfile, TaskId, TaskSet, ValuationAtom, ValuationMap, MAX_BUNDLE};

/// Hard cap on materialized valuation edges.
pub const MAX_V_EDGES: u128 = 5_000_000;

/// A task performed by a given bidder, for a requester not yet fixed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct TpbNode {
    pub task: TaskId,
    pub performer: AgentId,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValuationHyperedge {
    pub id: usize,
    pub atom: ValuationAtom,
    /// One node per task of the bundle, ascending by task.
    pub cover: Vec<TpbNode>,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BidHyperedge {
    pub id: usize,
    pub atom: BidAtom,
    pub cover: Vec<TpbNode>,
    pub weight: f64,
}

impl ValuationHyperedge {
    pub fn assignments(&self) -> impl Iterator<Item = Assignment> + '_ {
        self.cover
            .iter()
            .map(|n| Assignment { task: n.task, requester: self.atom.requester, performer: n.performer })
    }
}

/// Performers bidding on each task, ascending.
#[derive(Clone, Debug, Default)]
pub struct TaskBidders {
    by_task: BTreeMap<TaskId, Vec<AgentId>>,
}

impl TaskBidders {
    pub fn from_bids(bids: &[BidAtom]) -> Self {
        let mut sets: BTreeMap<TaskId, BTreeSet<AgentId>> = BTreeMap::new();
        for b in bids {
            for t in b.bundle.iter() {
                sets.entry(t).or_default().insert(b.performer);
            }
        }
        TaskBidders { by_task: sets.into_iter().map(|(t, s)| (t, s.into_iter().collect())).collect() }
    }

    pub fn bidders(&self, task: TaskId) -> &[AgentId] {
        self.by_task.get(&task).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Every way of covering `bundle` with one bidder per task.
///
/// Tasks ascend inside each set; sets come out in lexicographic order of
/// their performer sequences.
pub fn enumerate_fulfilling_sets(bidders: &TaskBidders, bundle: TaskSet) -> Vec<Vec<TpbNode>> {
    let tasks = bundle.to_vec();
    if tasks.is_empty() || tasks.iter().any(|&t| bidders.bidders(t).is_empty()) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(tasks.len());
    fn rec(bidders: &TaskBidders, tasks: &[TaskId], current: &mut Vec<TpbNode>, out: &mut Vec<Vec<TpbNode>>) {
        let Some((&t, rest)) = tasks.split_first() else {
            out.push(current.clone());
            return;
        };
        for &p in bidders.bidders(t) {
            current.push(TpbNode { task: t, performer: p });
            rec(bidders, rest, current, out);
            current.pop();
        }
    }
    rec(bidders, &tasks, &mut current, &mut out);
    out
}

/// Expected value of `vmap` when each `(task, p)` completes independently.
///
/// Only subsets that carry a nonzero value contribute, so the cost is
/// proportional to the number of atoms inside `tasks` rather than to
/// the full power set.
pub fn expected_value(vmap: &ValuationMap, probs: &[(TaskId, f64)]) -> f64 {
    let bundle = TaskSet::from_tasks(probs.iter().map(|&(t, _)| t));
    vmap.entries
        .iter()
        .filter(|(s, _)| s.is_subset(bundle))
        .map(|(&s, &v)| {
            v * probs.iter().map(|&(t, p)| if s.contains(t) { p } else { 1.0 - p }).product::<f64>()
        })
        .sum()
}

/// Expected value of one valuation hyperedge.
pub fn hyperedge_weight(
    atom: &ValuationAtom,
    cover: &[TpbNode],
    vmap: &ValuationMap,
    table: &TrustTable,
) -> Result<f64> {
    let mut probs = Vec::with_capacity(cover.len());
    for n in cover {
        if !atom.bundle.contains(n.task) {
            return Err(Error::Precondition(format!("cover node {:?} outside bundle {}", n, atom.bundle)));
        }
        probs.push((n.task, table.require(n.performer, n.task)?));
    }
    if probs.len() != atom.bundle.len() {
        return Err(Error::Precondition(format!("cover does not fulfil bundle {}", atom.bundle)));
    }
    Ok(expected_value(vmap, &probs))
}

#[derive(Clone, Debug)]
pub struct AllocationHypergraph {
    pub tpb_nodes: BTreeSet<TpbNode>,
    pub v_edges: Vec<ValuationHyperedge>,
    pub c_edges: Vec<BidHyperedge>,
    pub v_by_requester: BTreeMap<AgentId, Range<usize>>,
    pub c_by_performer: BTreeMap<AgentId, Range<usize>>,
}

impl AllocationHypergraph {
    pub fn requester_edges(&self, agent: AgentId) -> &[ValuationHyperedge] {
        self.v_by_requester.get(&agent).map_or(&[], |r| &self.v_edges[r.clone()])
    }

    pub fn performer_edges(&self, agent: AgentId) -> &[BidHyperedge] {
        self.c_by_performer.get(&agent).map_or(&[], |r| &self.c_edges[r.clone()])
    }

    /// Text listing, one edge per line.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# nodes={} v_edges={} c_edges={}", self.tpb_nodes.len(), self.v_edges.len(), self.c_edges.len());
        for e in &self.v_edges {
            let _ = writeln!(
                s,
                "v {} requester={} bundle={} value={:.4} cover=[{}] weight={:.4}",
                e.id,
                e.atom.requester.0,
                e.atom.bundle,
                e.atom.value,
                format_cover(&e.cover),
                e.weight
            );
        }
        for e in &self.c_edges {
            let _ = writeln!(
                s,
                "c {} performer={} bundle={} cover=[{}] weight={:.4}",
                e.id,
                e.atom.performer.0,
                e.atom.bundle,
                format_cover(&e.cover),
                e.weight
            );
        }
        s
    }
}

fn format_cover(cover: &[TpbNode]) -> String {
    cover.iter().map(|n| format!("{}<-{}", n.task.0, n.performer.0)).collect::<Vec<_>>().join(", ")
}

/// Number of valuation hyperedges the profile induces.
pub fn count_allocations(profile: &ReportProfile) -> u128 {
    let bidders = TaskBidders::from_bids(&profile.bids);
    profile
        .valuations
        .iter()
        .flat_map(|v| v.entries.keys())
        .map(|bundle| bundle.iter().map(|t| bidders.bidders(t).len() as u128).product::<u128>())
        .sum()
}

pub fn build_hypergraph(profile: &ReportProfile, table: &TrustTable) -> Result<AllocationHypergraph> {
    let count = count_allocations(profile);
    if count > MAX_V_EDGES {
        return Err(Error::GraphTooLarge { count, cap: MAX_V_EDGES });
    }
    let bidders = TaskBidders::from_bids(&profile.bids);

    let mut vmaps: Vec<&ValuationMap> = profile.valuations.iter().collect();
    vmaps.sort_by_key(|v| v.requester);
    let mut v_edges = Vec::with_capacity(count as usize);
    let mut v_by_requester = BTreeMap::new();
    for vmap in vmaps {
        let start = v_edges.len();
        for atom in vmap.atoms() {
            if atom.bundle.len() > MAX_BUNDLE {
                return Err(Error::BundleTooLarge { size: atom.bundle.len(), cap: MAX_BUNDLE });
            }
            for cover in enumerate_fulfilling_sets(&bidders, atom.bundle) {
                let weight = hyperedge_weight(&atom, &cover, vmap, table)?;
                v_edges.push(ValuationHyperedge { id: v_edges.len(), atom: atom.clone(), cover, weight });
            }
        }
        if v_edges.len() > start {
            v_by_requester.insert(vmap.requester, start..v_edges.len());
        }
    }

    let mut bids: Vec<&BidAtom> = profile.bids.iter().collect();
    bids.sort_by(|a, b| a.performer.cmp(&b.performer).then(a.bundle.cmp(&b.bundle)));
    let mut c_edges: Vec<BidHyperedge> = Vec::with_capacity(bids.len());
    let mut c_by_performer: BTreeMap<AgentId, Range<usize>> = BTreeMap::new();
    let mut tpb_nodes = BTreeSet::new();
    for b in bids {
        if b.bundle.len() > MAX_BUNDLE {
            return Err(Error::BundleTooLarge { size: b.bundle.len(), cap: MAX_BUNDLE });
        }
        let cover: Vec<TpbNode> = b.bundle.iter().map(|t| TpbNode { task: t, performer: b.performer }).collect();
        tpb_nodes.extend(cover.iter().copied());
        let id = c_edges.len();
        c_by_performer.entry(b.performer).and_modify(|r| r.end = id + 1).or_insert(id..id + 1);
        c_edges.push(BidHyperedge { id, atom: b.clone(), cover, weight: b.cost });
    }

    Ok(AllocationHypergraph { tpb_nodes, v_edges, c_edges, v_by_requester, c_by_performer })
}

/// A pair of matchings: chosen valuation edges and chosen bid edges.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Allocation {
    pub selected_v: Vec<ValuationHyperedge>,
    pub selected_c: Vec<BidHyperedge>,
}

impl Allocation {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_ids(graph: &AllocationHypergraph, v_ids: &[usize], c_ids: &[usize]) -> Self {
        let mut v: Vec<usize> = v_ids.to_vec();
        let mut c: Vec<usize> = c_ids.to_vec();
        v.sort_unstable();
        c.sort_unstable();
        Allocation {
            selected_v: v.into_iter().map(|i| graph.v_edges[i].clone()).collect(),
            selected_c: c.into_iter().map(|i| graph.c_edges[i].clone()).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.selected_v.is_empty() && self.selected_c.is_empty()
    }

    /// Single-task assignments, ascending.
    pub fn assignments(&self) -> Vec<Assignment> {
        let set: BTreeSet<Assignment> = self.selected_v.iter().flat_map(|e| e.assignments()).collect();
        set.into_iter().collect()
    }

    pub fn expected_value(&self) -> f64 {
        self.selected_v.iter().map(|e| e.weight).sum()
    }

    pub fn cost(&self) -> f64 {
        self.selected_c.iter().map(|e| e.weight).sum()
    }

    pub fn objective(&self) -> f64 {
        self.expected_value() - self.cost()
    }

    pub fn bid_of(&self, performer: AgentId) -> Option<&BidHyperedge> {
        self.selected_c.iter().find(|e| e.atom.performer == performer)
    }

    pub fn request_of(&self, requester: AgentId) -> Option<&ValuationHyperedge> {
        self.selected_v.iter().find(|e| e.atom.requester == requester)
    }

    /// Agents that perform at least one assigned task, ascending.
    pub fn winners(&self) -> Vec<AgentId> {
        self.selected_v
            .iter()
            .flat_map(|e| e.cover.iter().map(|n| n.performer))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Global edge ids: valuation ids, then bid ids offset by `n_v`.
    pub fn edge_key(&self, n_v: usize) -> Vec<usize> {
        let mut k: Vec<usize> = self.selected_v.iter().map(|e| e.id).collect();
        k.extend(self.selected_c.iter().map(|e| n_v + e.id));
        k.sort_unstable();
        k
    }
}

/// Checks the matching and node-coverage conditions of a feasible allocation.
pub fn check_feasible(graph: &AllocationHypergraph, alloc: &Allocation, free_disposal: bool) -> bool {
    let mut v_nodes: BTreeSet<TpbNode> = BTreeSet::new();
    let mut requesters = BTreeSet::new();
    let mut v_ids = BTreeSet::new();
    for e in &alloc.selected_v {
        if graph.v_edges.get(e.id) != Some(e) || !v_ids.insert(e.id) || !requesters.insert(e.atom.requester) {
            return false;
        }
        for &n in &e.cover {
            if !v_nodes.insert(n) {
                return false;
            }
        }
    }
    let mut c_nodes: BTreeSet<TpbNode> = BTreeSet::new();
    let mut performers = BTreeSet::new();
    for e in &alloc.selected_c {
        if graph.c_edges.get(e.id) != Some(e) || !performers.insert(e.atom.performer) {
            return false;
        }
        for &n in &e.cover {
            if !c_nodes.insert(n) {
                return false;
            }
        }
    }
    if free_disposal {
        v_nodes.is_subset(&c_nodes)
    } else {
        v_nodes == c_nodes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trust::TrustError;
    use crate::types::{EqosDomain, EqosMatrix};

    fn ts(v: &[u16]) -> TaskSet {
        TaskSet::from_tasks(v.iter().map(|&t| TaskId(t)))
    }

    fn bid(p: u32, tasks: &[u16], cost: f64) -> BidAtom {
        BidAtom { performer: AgentId(p), bundle: ts(tasks), cost }
    }

    /// Bid layout of the search-space illustration: task k is index k.
    /// Agent 4 bids {1}, {1,2}, {1,3}; agent 2 bids {2,3}; agent 5 bids {2}.
    fn illustration_profile() -> ReportProfile {
        let bids = vec![
            bid(4, &[1], 10.0),
            bid(4, &[1, 2], 15.0),
            bid(4, &[1, 3], 12.0),
            bid(2, &[2, 3], 9.0),
            bid(5, &[2], 4.0),
        ];
        let agents: Vec<AgentId> = [1, 2, 4, 5].map(AgentId).to_vec();
        let pairs: BTreeSet<(AgentId, TaskId)> =
            bids.iter().flat_map(|b| b.bundle.iter().map(move |t| (b.performer, t))).collect();
        let eqos = agents
            .iter()
            .map(|&a| EqosMatrix { reporter: a, entries: pairs.iter().map(|&k| (k, 0.5)).collect() })
            .collect();
        ReportProfile {
            agents,
            tasks: (1..=3).map(TaskId).collect(),
            valuations: vec![ValuationMap::from_atoms(AgentId(1), [(ts(&[1, 2]), 40.0), (ts(&[3]), 20.0)])],
            bids,
            eqos,
            free_disposal: false,
            eqos_domain: EqosDomain::default(),
        }
    }

    fn half_table(p: &ReportProfile) -> TrustTable {
        let mut t = TrustTable::new();
        for (j, k) in p.bid_pairs() {
            t.insert(j, k, 0.5);
        }
        t
    }

    #[test]
    fn fulfilling_sets_match_illustration() {
        let p = illustration_profile();
        let b = TaskBidders::from_bids(&p.bids);
        let sets = enumerate_fulfilling_sets(&b, ts(&[1, 2]));
        let perf: Vec<Vec<u32>> = sets.iter().map(|s| s.iter().map(|n| n.performer.0).collect()).collect();
        assert_eq!(perf, vec![vec![4, 2], vec![4, 4], vec![4, 5]]);
        assert_eq!(enumerate_fulfilling_sets(&b, ts(&[1, 3])).len(), 2);
        assert!(enumerate_fulfilling_sets(&b, ts(&[0, 1])).is_empty());
    }

    #[test]
    fn graph_groups_edges_by_atom() {
        let p = illustration_profile();
        let g = build_hypergraph(&p, &half_table(&p)).unwrap();
        assert_eq!(g.requester_edges(AgentId(1)).len(), 5);
        let pair = g.v_edges.iter().filter(|e| e.atom.bundle == ts(&[1, 2])).count();
        let single = g.v_edges.iter().filter(|e| e.atom.bundle == ts(&[3])).count();
        assert_eq!((pair, single), (3, 2));
        assert_eq!(count_allocations(&p), 5);
        assert_eq!(g.performer_edges(AgentId(4)).len(), 3);
        assert_eq!(g.tpb_nodes.len(), 6);
    }

    #[test]
    fn weight_sums_subset_values() {
        let vmap = ValuationMap::from_atoms(AgentId(0), [(ts(&[1, 2]), 100.0), (ts(&[1]), 10.0)]);
        let atom = vmap.atoms().find(|a| a.bundle.len() == 2).unwrap();
        let mut t = TrustTable::new();
        t.insert(AgentId(4), TaskId(1), 0.5);
        t.insert(AgentId(2), TaskId(2), 0.9);
        let cover = [TpbNode { task: TaskId(1), performer: AgentId(4) }, TpbNode { task: TaskId(2), performer: AgentId(2) }];
        let w = hyperedge_weight(&atom, &cover, &vmap, &t).unwrap();
        assert!((w - 45.5).abs() < 1e-12);
    }

    #[test]
    fn weight_errors_on_missing_trust() {
        let vmap = ValuationMap::from_atoms(AgentId(0), [(ts(&[1]), 1.0)]);
        let atom = vmap.atoms().next().unwrap();
        let cover = [TpbNode { task: TaskId(1), performer: AgentId(9) }];
        assert!(matches!(
            hyperedge_weight(&atom, &cover, &vmap, &TrustTable::new()),
            Err(Error::Trust(TrustError::IncompleteTable { .. }))
        ));
    }

    #[test]
    fn feasibility_requires_bid_cover() {
        let p = illustration_profile();
        let g = build_hypergraph(&p, &half_table(&p)).unwrap();
        // valuation edge {1<-4, 2<-2} with only agent 2's bid selected
        let e = g.v_edges.iter().position(|e| e.cover.iter().map(|n| n.performer.0).collect::<Vec<_>>() == [4, 2]).unwrap();
        let c2 = g.c_edges.iter().position(|c| c.atom.performer == AgentId(2)).unwrap();
        let partial = Allocation::from_ids(&g, &[e], &[c2]);
        assert!(!check_feasible(&g, &partial, false));
        assert!(!check_feasible(&g, &partial, true));
        let c4 = g.c_edges.iter().position(|c| c.atom.performer == AgentId(4) && c.atom.bundle == ts(&[1])).unwrap();
        let full = Allocation::from_ids(&g, &[e], &[c2, c4]);
        // agent 2's bid also covers task 3, which nobody requested
        assert!(!check_feasible(&g, &full, false));
        assert!(check_feasible(&g, &full, true));
        assert!(check_feasible(&g, &Allocation::empty(), false));
    }

    #[test]
    fn same_requester_twice_is_infeasible() {
        let p = illustration_profile();
        let g = build_hypergraph(&p, &half_table(&p)).unwrap();
        let a = g.v_edges.iter().position(|e| e.atom.bundle == ts(&[1, 2]) && e.cover[1].performer == AgentId(5)).unwrap();
        let b = g.v_edges.iter().position(|e| e.atom.bundle == ts(&[3]) && e.cover[0].performer == AgentId(2)).unwrap();
        let c: Vec<usize> = g.c_edges.iter().filter(|c| c.atom.bundle.len() == 1).map(|c| c.id).collect();
        let c2 = g.c_edges.iter().position(|c| c.atom.performer == AgentId(2)).unwrap();
        let mut cs = c.clone();
        cs.push(c2);
        assert!(!check_feasible(&g, &Allocation::from_ids(&g, &[a, b], &cs), true));
    }

    #[test]
    fn empty_bids_give_empty_graph() {
        let mut p = illustration_profile();
        p.bids.clear();
        let g = build_hypergraph(&p, &TrustTable::new()).unwrap();
        assert!(g.tpb_nodes.is_empty() && g.v_edges.is_empty() && g.c_edges.is_empty());
        assert_eq!(count_allocations(&p), 0);
    }

    #[test]
    fn dump_lists_every_edge() {
        let p = illustration_profile();
        let g = build_hypergraph(&p, &half_table(&p)).unwrap();
        let d = g.dump();
        assert_eq!(d.lines().filter(|l| l.starts_with("v ")).count(), 5);
        assert_eq!(d.lines().filter(|l| l.starts_with("c ")).count(), 5);
        assert!(d.contains("cover=[1<-4, 2<-2]"));
    }
}
