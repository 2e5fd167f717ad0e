//! Exact winner determination over an allocation hypergraph.
//!
//! The search branches on requesters in ascending id order; each branch picks
//! one of the requester's valuation edges or none. Once the valuation side is
//! fixed, the bid side decomposes per performer: each performer needs its
//! cheapest bid covering (or, without free disposal, equal to) the nodes it
//! was assigned.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hypergraph::{Allocation, AllocationHypergraph, BidHyperedge, TpbNode, ValuationHyperedge};
use crate::types::{AgentId, TaskId, TaskSet};

/// Absolute tolerance on objective comparisons.
pub const OBJECTIVE_TOLERANCE: f64 = 1e-6;

/// Cap on valuation-edge combinations the oracle will visit.
pub const ORACLE_COMBINATION_CAP: u64 = 10_000_000;

const ORACLE_BID_SELECTION_CAP: u64 = 1_000_000;

/// Agents whose edges are removed before solving.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Restriction {
    pub excluded: BTreeSet<AgentId>,
}

impl Restriction {
    pub fn excluding(agent: AgentId) -> Self {
        Restriction { excluded: [agent].into() }
    }

    pub fn allows_v(&self, e: &ValuationHyperedge) -> bool {
        !self.excluded.contains(&e.atom.requester) && e.cover.iter().all(|n| !self.excluded.contains(&n.performer))
    }

    pub fn allows_c(&self, e: &BidHyperedge) -> bool {
        !self.excluded.contains(&e.atom.performer)
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SolveStats {
    pub nodes_explored: u64,
    pub wall_time: Duration,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveResult {
    pub allocation: Allocation,
    pub objective: f64,
    pub stats: SolveStats,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SolveOptions {
    /// Completes every search node exhaustively and asserts the bound holds.
    /// Only usable on tiny instances.
    pub verify_bounds: bool,
}

pub fn solve(graph: &AllocationHypergraph, free_disposal: bool, restriction: Option<&Restriction>) -> Result<SolveResult> {
    solve_with(graph, free_disposal, restriction, SolveOptions::default())
}

pub fn solve_with(
    graph: &AllocationHypergraph,
    free_disposal: bool,
    restriction: Option<&Restriction>,
    options: SolveOptions,
) -> Result<SolveResult> {
    let start = Instant::now();
    let problem = Problem::new(graph, free_disposal, restriction);
    let mut state = State::new(&problem, options.verify_bounds);
    dfs(&problem, &mut state, 0, &problem.prices);
    let best = state.best.take().expect("empty allocation is always a candidate");
    let allocation = Allocation::from_ids(graph, &best.v_ids, &best.c_ids);
    let objective = allocation.objective();
    Ok(SolveResult {
        allocation,
        objective,
        stats: SolveStats { nodes_explored: state.nodes, wall_time: start.elapsed() },
    })
}

struct Bid {
    mask: TaskSet,
    cost: f64,
    id: usize,
}

struct Performer {
    /// Sorted by (cost, id).
    bids: Vec<Bid>,
}

impl Performer {
    fn cover(&self, load: TaskSet, free_disposal: bool) -> Option<&Bid> {
        self.bids
            .iter()
            .find(|b| if free_disposal { load.is_subset(b.mask) } else { b.mask == load })
    }

    fn can_extend(&self, load: TaskSet) -> bool {
        self.bids.iter().any(|b| load.is_subset(b.mask))
    }
}

struct Edge {
    id: usize,
    weight: f64,
    /// Weight minus the prices of the covered nodes.
    priced: f64,
    parts: Vec<(usize, TaskSet)>,
    /// Flat node indices of `parts`.
    nodes: Vec<u32>,
}

/// Node `(performer index, task)` as a flat index.
fn node(p: usize, t: TaskId) -> usize {
    p * 64 + t.index()
}

struct Problem {
    free_disposal: bool,
    n_v: usize,
    performers: Vec<Performer>,
    groups: Vec<Vec<Edge>>,
    /// Price of every node, indexed by [`node`].
    prices: Vec<f64>,
}

impl Problem {
    fn new(graph: &AllocationHypergraph, free_disposal: bool, restriction: Option<&Restriction>) -> Self {
        let allow_c = |e: &BidHyperedge| restriction.is_none_or(|r| r.allows_c(e));
        let allow_v = |e: &ValuationHyperedge| restriction.is_none_or(|r| r.allows_v(e));

        let mut index: BTreeMap<AgentId, usize> = BTreeMap::new();
        let mut performers: Vec<Performer> = Vec::new();
        for (&agent, range) in &graph.c_by_performer {
            let mut bids: Vec<Bid> = graph.c_edges[range.clone()]
                .iter()
                .filter(|e| allow_c(e))
                .map(|e| Bid { mask: e.atom.bundle, cost: e.weight, id: e.id })
                .collect();
            if bids.is_empty() {
                continue;
            }
            bids.sort_by(|a, b| a.cost.total_cmp(&b.cost).then(a.id.cmp(&b.id)));
            index.insert(agent, performers.len());
            performers.push(Performer { bids });
        }

        let mut groups = Vec::new();
        for range in graph.v_by_requester.values() {
            let mut edges = Vec::new();
            'edge: for e in &graph.v_edges[range.clone()] {
                if !allow_v(e) {
                    continue;
                }
                let mut parts: BTreeMap<usize, TaskSet> = BTreeMap::new();
                for n in &e.cover {
                    let Some(&p) = index.get(&n.performer) else { continue 'edge };
                    parts.entry(p).or_default().insert(n.task);
                }
                if parts.iter().any(|(&p, &m)| !performers[p].can_extend(m)) {
                    continue;
                }
                let nodes = parts.iter().flat_map(|(&p, m)| m.iter().map(move |t| node(p, t) as u32)).collect();
                edges.push(Edge { id: e.id, weight: e.weight, priced: e.weight, parts: parts.into_iter().collect(), nodes });
            }
            if !edges.is_empty() {
                groups.push(edges);
            }
        }

        let prices = node_prices(&groups, &performers);
        for e in groups.iter_mut().flatten() {
            e.priced = e.weight - edge_price(&prices, e);
        }
        for edges in &mut groups {
            edges.sort_by(|a, b| b.priced.total_cmp(&a.priced).then(a.id.cmp(&b.id)));
        }
        Problem { free_disposal, n_v: graph.v_edges.len(), performers, groups, prices }
    }

    /// `Σ_p max_{b ⊇ load_p} (price(b \ load_p) − cost_b)`, with an idle
    /// performer free to take no bid. `None` if some load has no covering bid.
    fn performer_term(&self, loads: &[TaskSet]) -> Option<f64> {
        let mut total = 0.0;
        for (p, perf) in self.performers.iter().enumerate() {
            let load = loads[p];
            let mut best = if load.is_empty() { 0.0 } else { f64::NEG_INFINITY };
            for b in &perf.bids {
                if load.is_subset(b.mask) {
                    let gain: f64 = b.mask.difference(load).iter().map(|t| self.prices[node(p, t)]).sum();
                    best = best.max(gain - b.cost);
                }
            }
            if best == f64::NEG_INFINITY {
                return None;
            }
            total += best;
        }
        Some(total)
    }
}

fn edge_price(prices: &[f64], e: &Edge) -> f64 {
    e.nodes.iter().map(|&n| prices[n as usize]).sum()
}

const PRICE_ITERATIONS: usize = 300;

/// Node prices `λ ≥ 0` for the Lagrangian bound obtained by relaxing
/// "every node a requester uses is supplied by its performer's bid":
///
/// `L(λ) = Σ_requesters max(0, max_e w_e − λ(e)) + Σ_performers max(0, max_b λ(b) − c_b)`.
///
/// Every `λ ≥ 0` gives a valid bound; subgradient descent only tightens it.
fn node_prices(groups: &[Vec<Edge>], performers: &[Performer]) -> Vec<f64> {
    let width = performers.len() * 64;
    let mut lambda = vec![0.0; width];
    let mut best = lambda.clone();
    let mut best_value = f64::INFINITY;
    let mut scale = 1.0;
    let mut stalled = 0;
    let mut grad = vec![0.0f64; width];
    for _ in 0..PRICE_ITERATIONS {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut value = 0.0;
        for g in groups {
            let mut arg = None;
            let mut top = 0.0;
            for e in g {
                let v = e.weight - edge_price(&lambda, e);
                if v > top {
                    top = v;
                    arg = Some(e);
                }
            }
            value += top;
            if let Some(e) = arg {
                for &n in &e.nodes {
                    grad[n as usize] -= 1.0;
                }
            }
        }
        for (p, perf) in performers.iter().enumerate() {
            let mut arg = None;
            let mut top = 0.0;
            for b in &perf.bids {
                let v = b.mask.iter().map(|t| lambda[node(p, t)]).sum::<f64>() - b.cost;
                if v > top {
                    top = v;
                    arg = Some(b);
                }
            }
            value += top;
            if let Some(b) = arg {
                for t in b.mask.iter() {
                    grad[node(p, t)] += 1.0;
                }
            }
        }
        if value < best_value - 1e-9 {
            best_value = value;
            best.copy_from_slice(&lambda);
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= 8 {
                scale /= 2.0;
                stalled = 0;
            }
        }
        // Projected subgradient: components that would push λ below 0 are dropped.
        let norm: f64 = grad
            .iter()
            .zip(&lambda)
            .map(|(&g, &l)| if l <= 0.0 && g > 0.0 { 0.0 } else { g * g })
            .sum();
        if norm == 0.0 || scale < 1e-3 || best_value <= 0.0 {
            break;
        }
        let step = scale * 0.25 * best_value / norm;
        for (l, &g) in lambda.iter_mut().zip(&grad) {
            *l = (*l - step * g).max(0.0);
        }
    }
    best
}

struct Incumbent {
    objective: f64,
    v_ids: Vec<usize>,
    c_ids: Vec<usize>,
    key: Vec<usize>,
}

struct State {
    load: Vec<TaskSet>,
    chosen: Vec<usize>,
    value_acc: f64,
    best: Option<Incumbent>,
    nodes: u64,
    verify: bool,
}

impl State {
    fn new(problem: &Problem, verify: bool) -> Self {
        State {
            load: vec![TaskSet::empty(); problem.performers.len()],
            chosen: Vec::new(),
            value_acc: 0.0,
            best: None,
            nodes: 0,
            verify,
        }
    }

    fn apply(&mut self, e: &Edge) {
        for &(p, m) in &e.parts {
            self.load[p] = self.load[p].union(m);
        }
        self.chosen.push(e.id);
        self.value_acc += e.weight;
    }

    fn undo(&mut self, e: &Edge) {
        for &(p, m) in &e.parts {
            self.load[p] = self.load[p].difference(m);
        }
        self.chosen.pop();
        self.value_acc -= e.weight;
    }

    fn fits(&self, problem: &Problem, e: &Edge) -> bool {
        e.parts.iter().all(|&(p, m)| self.load[p].is_disjoint(m) && problem.performers[p].can_extend(self.load[p].union(m)))
    }

    fn disjoint(&self, e: &Edge) -> bool {
        e.parts.iter().all(|&(p, m)| self.load[p].is_disjoint(m))
    }
}

/// Objective and chosen bids if the current partial selection is closed off.
fn close(problem: &Problem, st: &State) -> Option<(f64, Vec<usize>)> {
    let mut cost = 0.0;
    let mut c_ids = Vec::new();
    for (p, perf) in problem.performers.iter().enumerate() {
        if st.load[p].is_empty() {
            continue;
        }
        let bid = perf.cover(st.load[p], problem.free_disposal)?;
        cost += bid.cost;
        c_ids.push(bid.id);
    }
    Some((st.value_acc - cost, c_ids))
}

fn consider_candidate(problem: &Problem, st: &mut State) {
    let Some((objective, c_ids)) = close(problem, st) else { return };
    if let Some(b) = &st.best {
        if objective < b.objective - OBJECTIVE_TOLERANCE {
            return;
        }
    }
    let mut key = st.chosen.clone();
    key.extend(c_ids.iter().map(|&c| problem.n_v + c));
    let accept = match &st.best {
        None => true,
        Some(b) => objective > b.objective + OBJECTIVE_TOLERANCE || key < b.key,
    };
    if accept {
        st.best = Some(Incumbent { objective, v_ids: st.chosen.clone(), c_ids, key });
    }
}

/// Priced contribution of groups `d..`: each group's best edge that avoids used nodes.
fn rest_priced(problem: &Problem, st: &State, d: usize) -> f64 {
    problem.groups[d..]
        .iter()
        .map(|g| g.iter().find(|e| st.disjoint(e)).map_or(0.0, |e| e.priced.max(0.0)))
        .sum()
}

/// Whether some completion could still replace the incumbent.
fn may_improve(st: &State, bound: f64) -> bool {
    let Some(b) = &st.best else { return true };
    if bound < b.objective - OBJECTIVE_TOLERANCE {
        return false;
    }
    if bound > b.objective + OBJECTIVE_TOLERANCE {
        return true;
    }
    // Tie range: every completion key starts with `chosen`.
    for (x, y) in st.chosen.iter().zip(&b.key) {
        if x != y {
            return x < y;
        }
    }
    st.chosen.len() < b.key.len()
}

/// Node-local subgradient steps per search node.
const LOCAL_ITERATIONS: usize = 30;

/// Lagrangian value of the residual problem below depth `d` at prices
/// `lambda`, writing its subgradient into `grad`.
fn residual_lagrangian(
    problem: &Problem,
    st: &State,
    alive: &[Vec<&Edge>],
    lambda: &[f64],
    grad: &mut [f64],
) -> Option<f64> {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut value = st.value_acc;
    for g in alive {
        let mut arg = None;
        let mut top = 0.0;
        for &e in g {
            let v = e.weight - edge_price(lambda, e);
            if v > top {
                top = v;
                arg = Some(e);
            }
        }
        value += top;
        if let Some(e) = arg {
            for &n in &e.nodes {
                grad[n as usize] -= 1.0;
            }
        }
    }
    for (p, perf) in problem.performers.iter().enumerate() {
        let load = st.load[p];
        let mut arg = None;
        let mut top = if load.is_empty() { 0.0 } else { f64::NEG_INFINITY };
        for b in perf.bids.iter().filter(|b| load.is_subset(b.mask)) {
            let v = b.mask.difference(load).iter().map(|t| lambda[node(p, t)]).sum::<f64>() - b.cost;
            if v > top {
                top = v;
                arg = Some(b);
            }
        }
        if top == f64::NEG_INFINITY {
            return None;
        }
        value += top;
        if let Some(b) = arg {
            for t in b.mask.difference(load).iter() {
                grad[node(p, t)] += 1.0;
            }
        }
    }
    Some(value)
}

/// Tightens the bound at depth `d` by a few subgradient steps started from
/// `start`. Returns the best prices found and their bound.
fn local_prices(problem: &Problem, st: &State, d: usize, start: &[f64], target: f64) -> Option<(Vec<f64>, f64)> {
    let alive: Vec<Vec<&Edge>> =
        problem.groups[d..].iter().map(|g| g.iter().filter(|e| st.fits(problem, e)).collect()).collect();
    let mut lambda = start.to_vec();
    let mut grad = vec![0.0; lambda.len()];
    let mut best = (lambda.clone(), f64::INFINITY);
    for _ in 0..LOCAL_ITERATIONS {
        let value = residual_lagrangian(problem, st, &alive, &lambda, &mut grad)?;
        if value < best.1 {
            best = (lambda.clone(), value);
        }
        if value < target {
            break;
        }
        let norm: f64 = grad.iter().zip(&lambda).map(|(&g, &l)| if l <= 0.0 && g > 0.0 { 0.0 } else { g * g }).sum();
        if norm == 0.0 {
            break;
        }
        let step = (value - target).max(1e-9) / norm;
        for (l, &g) in lambda.iter_mut().zip(&grad) {
            *l = (*l - step * g).max(0.0);
        }
    }
    Some(best)
}

/// Priced contribution of groups `d..` under arbitrary prices.
fn rest_at(problem: &Problem, st: &State, d: usize, lambda: &[f64]) -> f64 {
    problem.groups[d..]
        .iter()
        .map(|g| g.iter().filter(|e| st.disjoint(e)).map(|e| e.weight - edge_price(lambda, e)).fold(0.0, f64::max))
        .sum()
}

fn performer_term_at(problem: &Problem, st: &State, lambda: &[f64]) -> f64 {
    problem
        .performers
        .iter()
        .enumerate()
        .map(|(p, perf)| {
            let load = st.load[p];
            let floor = if load.is_empty() { 0.0 } else { f64::NEG_INFINITY };
            perf.bids
                .iter()
                .filter(|b| load.is_subset(b.mask))
                .map(|b| b.mask.difference(load).iter().map(|t| lambda[node(p, t)]).sum::<f64>() - b.cost)
                .fold(floor, f64::max)
        })
        .sum()
}

fn dfs(problem: &Problem, st: &mut State, d: usize, start: &[f64]) {
    st.nodes += 1;
    consider_candidate(problem, st);
    if d == problem.groups.len() {
        return;
    }
    let Some(performers) = problem.performer_term(&st.load) else { return };
    let rest = rest_priced(problem, st, d + 1);
    let here = problem.groups[d].iter().find(|e| st.disjoint(e)).map_or(0.0, |e| e.priced.max(0.0));
    let ub = st.value_acc + here + rest + performers;
    if st.verify {
        let exact = exhaustive_best(problem, st, d);
        assert!(ub >= exact - 1e-7, "bound {ub} below best completion {exact} at depth {d}");
    }
    if !may_improve(st, ub) {
        return;
    }
    // Sharper prices for this subtree, used to skip children.
    let mut local = None;
    if let Some(b) = &st.best {
        let target = b.objective - OBJECTIVE_TOLERANCE;
        let Some((lambda, value)) = local_prices(problem, st, d, start, target) else { return };
        if st.verify {
            let exact = exhaustive_best(problem, st, d);
            assert!(value >= exact - 1e-7, "local bound {value} below best completion {exact} at depth {d}");
        }
        if !may_improve(st, value) {
            return;
        }
        let rest = rest_at(problem, st, d + 1, &lambda);
        let perf = performer_term_at(problem, st, &lambda);
        local = Some((lambda, st.value_acc + rest + perf));
    }
    let mut children: Vec<(f64, &Edge)> = Vec::new();
    for e in &problem.groups[d] {
        if let Some(b) = &st.best {
            // Later edges in the group have no larger priced weight, and
            // adding nodes to a load never raises the performer term.
            if st.value_acc + e.priced + rest + performers < b.objective - OBJECTIVE_TOLERANCE {
                break;
            }
        }
        if !st.fits(problem, e) {
            continue;
        }
        let score = match &local {
            Some((lambda, _)) => e.weight - edge_price(lambda, e),
            None => e.priced,
        };
        if let (Some((_, base)), Some(b)) = (&local, &st.best) {
            if base + score < b.objective - OBJECTIVE_TOLERANCE {
                continue;
            }
        }
        children.push((score, e));
    }
    // Most promising first; leaving the group empty ranks as score 0.
    children.sort_by(|a, b| b.0.total_cmp(&a.0));
    let prices = local.as_ref().map_or(start, |l| &l.0);
    let mut skipped_empty = false;
    for (score, e) in children {
        if !skipped_empty && score < 0.0 {
            skipped_empty = true;
            dfs(problem, st, d + 1, prices);
        }
        st.apply(e);
        dfs(problem, st, d + 1, prices);
        st.undo(e);
    }
    if !skipped_empty {
        dfs(problem, st, d + 1, prices);
    }
}

fn exhaustive_best(problem: &Problem, st: &mut State, d: usize) -> f64 {
    let mut best = close(problem, st).map_or(f64::NEG_INFINITY, |(o, _)| o);
    if d == problem.groups.len() {
        return best;
    }
    for e in &problem.groups[d] {
        if st.disjoint(e) {
            st.apply(e);
            best = best.max(exhaustive_best(problem, st, d + 1));
            st.undo(e);
        }
    }
    best.max(exhaustive_best(problem, st, d + 1))
}

/// Exhaustive reference optimum. Independent of the branch-and-bound code.
pub fn brute_force_optimum(
    graph: &AllocationHypergraph,
    free_disposal: bool,
    restriction: Option<&Restriction>,
) -> Result<SolveResult> {
    let start = Instant::now();
    let keep_v = |e: &&ValuationHyperedge| restriction.is_none_or(|r| r.allows_v(e));
    let keep_c = |e: &&BidHyperedge| restriction.is_none_or(|r| r.allows_c(e));

    let mut by_requester: BTreeMap<AgentId, Vec<&ValuationHyperedge>> = BTreeMap::new();
    for e in graph.v_edges.iter().filter(keep_v) {
        by_requester.entry(e.atom.requester).or_default().push(e);
    }
    let mut by_performer: BTreeMap<AgentId, Vec<&BidHyperedge>> = BTreeMap::new();
    for e in graph.c_edges.iter().filter(keep_c) {
        by_performer.entry(e.atom.performer).or_default().push(e);
    }

    let selections_count: u64 = by_performer.values().map(|v| v.len() as u64 + 1).product();
    if selections_count > ORACLE_BID_SELECTION_CAP {
        return Err(Error::OracleTooLarge(format!("{selections_count} bid selections")));
    }
    // Every way to pick at most one bid per performer.
    let mut selections: Vec<(f64, Vec<usize>, HashSet<TpbNode>)> = vec![(0.0, Vec::new(), HashSet::new())];
    for bids in by_performer.values() {
        let mut next = Vec::with_capacity(selections.len() * (bids.len() + 1));
        for (cost, ids, nodes) in &selections {
            next.push((*cost, ids.clone(), nodes.clone()));
            for b in bids {
                let mut ids = ids.clone();
                ids.push(b.id);
                let mut nodes = nodes.clone();
                nodes.extend(b.cover.iter().copied());
                next.push((cost + b.weight, ids, nodes));
            }
        }
        selections = next;
    }
    for s in &mut selections {
        s.1.sort_unstable();
    }
    selections.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));

    let groups: Vec<Vec<&ValuationHyperedge>> = by_requester.into_values().collect();
    let mut visited = 0u64;
    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    let mut picked: Vec<&ValuationHyperedge> = Vec::new();
    let mut used: HashSet<TpbNode> = HashSet::new();

    #[allow(clippy::too_many_arguments)]
    fn visit<'g>(
        d: usize,
        groups: &[Vec<&'g ValuationHyperedge>],
        selections: &[(f64, Vec<usize>, HashSet<TpbNode>)],
        free_disposal: bool,
        n_v: usize,
        picked: &mut Vec<&'g ValuationHyperedge>,
        used: &mut HashSet<TpbNode>,
        visited: &mut u64,
        best: &mut Option<(f64, Vec<usize>, Vec<usize>)>,
    ) -> Result<()> {
        if d == groups.len() {
            *visited += 1;
            if *visited > ORACLE_COMBINATION_CAP {
                return Err(Error::OracleTooLarge(format!("more than {ORACLE_COMBINATION_CAP} combinations")));
            }
            let value: f64 = picked.iter().map(|e| e.weight).sum();
            let cover = selections.iter().find(|(_, _, nodes)| {
                if free_disposal {
                    used.iter().all(|n| nodes.contains(n))
                } else {
                    nodes == used
                }
            });
            if let Some((cost, c_ids, _)) = cover {
                let objective = value - cost;
                let mut v_ids: Vec<usize> = picked.iter().map(|e| e.id).collect();
                v_ids.sort_unstable();
                let key = |v: &[usize], c: &[usize]| -> Vec<usize> { v.iter().copied().chain(c.iter().map(|&x| x + n_v)).collect() };
                let better = match best {
                    None => true,
                    Some((bo, bv, bc)) => {
                        objective > *bo + OBJECTIVE_TOLERANCE
                            || (objective >= *bo - OBJECTIVE_TOLERANCE && key(&v_ids, c_ids) < key(bv, bc))
                    }
                };
                if better {
                    *best = Some((objective, v_ids, c_ids.clone()));
                }
            }
            return Ok(());
        }
        visit(d + 1, groups, selections, free_disposal, n_v, picked, used, visited, best)?;
        for &e in &groups[d] {
            if e.cover.iter().any(|n| used.contains(n)) {
                continue;
            }
            used.extend(e.cover.iter().copied());
            picked.push(e);
            visit(d + 1, groups, selections, free_disposal, n_v, picked, used, visited, best)?;
            picked.pop();
            for n in &e.cover {
                used.remove(n);
            }
        }
        Ok(())
    }

    visit(0, &groups, &selections, free_disposal, graph.v_edges.len(), &mut picked, &mut used, &mut visited, &mut best)?;
    let (_, v_ids, c_ids) = best.expect("empty allocation is always feasible");
    let allocation = Allocation::from_ids(graph, &v_ids, &c_ids);
    let objective = allocation.objective();
    Ok(SolveResult { allocation, objective, stats: SolveStats { nodes_explored: visited, wall_time: start.elapsed() } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::{build_hypergraph, check_feasible};
    use crate::trust::TrustTable;
    use crate::types::{BidAtom, EqosDomain, ReportProfile, TaskId, ValuationMap};

    fn ts(v: &[u16]) -> TaskSet {
        TaskSet::from_tasks(v.iter().map(|&t| TaskId(t)))
    }

    fn profile(valuations: Vec<ValuationMap>, bids: Vec<BidAtom>, free_disposal: bool) -> ReportProfile {
        let mut agents: BTreeSet<AgentId> = valuations.iter().map(|v| v.requester).collect();
        agents.extend(bids.iter().map(|b| b.performer));
        ReportProfile {
            agents: agents.into_iter().collect(),
            tasks: (0..4).map(TaskId).collect(),
            valuations,
            bids,
            eqos: vec![],
            free_disposal,
            eqos_domain: EqosDomain::default(),
        }
    }

    fn table(p: &ReportProfile, prob: impl Fn(AgentId, TaskId) -> f64) -> TrustTable {
        let mut t = TrustTable::new();
        for (j, k) in p.bid_pairs() {
            t.insert(j, k, prob(j, k));
        }
        t
    }

    fn bid(p: u32, tasks: &[u16], cost: f64) -> BidAtom {
        BidAtom { performer: AgentId(p), bundle: ts(tasks), cost }
    }

    #[test]
    fn single_task_pick_by_expected_surplus() {
        // value 300; costs 100/150/200; success 0.5/0.9/1.0
        let p = profile(
            vec![ValuationMap::from_atoms(AgentId(0), [(ts(&[0]), 300.0)])],
            vec![bid(1, &[0], 100.0), bid(2, &[0], 150.0), bid(3, &[0], 200.0)],
            false,
        );
        let t = table(&p, |j, _| [0.0, 0.5, 0.9, 1.0][j.index()]);
        let g = build_hypergraph(&p, &t).unwrap();
        let r = solve(&g, false, None).unwrap();
        assert!((r.objective - 120.0).abs() < 1e-9);
        assert_eq!(r.allocation.winners(), vec![AgentId(2)]);
        let o = brute_force_optimum(&g, false, None).unwrap();
        assert!((o.objective - 120.0).abs() < 1e-9);
    }

    #[test]
    fn unprofitable_instance_gives_empty_allocation() {
        let p = profile(
            vec![ValuationMap::from_atoms(AgentId(0), [(ts(&[0]), 10.0)])],
            vec![bid(1, &[0], 20.0)],
            false,
        );
        let g = build_hypergraph(&p, &table(&p, |_, _| 1.0)).unwrap();
        let r = solve(&g, false, None).unwrap();
        assert!(r.allocation.is_empty());
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn empty_graph_solves_to_zero() {
        let p = profile(vec![], vec![], false);
        let g = build_hypergraph(&p, &TrustTable::new()).unwrap();
        assert_eq!(solve(&g, false, None).unwrap().objective, 0.0);
        assert_eq!(brute_force_optimum(&g, false, None).unwrap().objective, 0.0);
    }

    #[test]
    fn strict_mode_needs_exact_bundle() {
        // Only a two-task bid exists but only one task is requested.
        let p = profile(
            vec![ValuationMap::from_atoms(AgentId(0), [(ts(&[0]), 50.0)])],
            vec![bid(1, &[0, 1], 10.0)],
            false,
        );
        let g = build_hypergraph(&p, &table(&p, |_, _| 1.0)).unwrap();
        assert_eq!(solve(&g, false, None).unwrap().objective, 0.0);
        let r = solve(&g, true, None).unwrap();
        assert!((r.objective - 40.0).abs() < 1e-9);
        assert!(check_feasible(&g, &r.allocation, true));
    }

    #[test]
    fn bundle_bid_shared_by_two_requesters() {
        let p = profile(
            vec![
                ValuationMap::from_atoms(AgentId(0), [(ts(&[0]), 30.0)]),
                ValuationMap::from_atoms(AgentId(1), [(ts(&[1]), 30.0)]),
            ],
            vec![bid(2, &[0, 1], 50.0), bid(3, &[0], 25.0)],
            false,
        );
        let g = build_hypergraph(&p, &table(&p, |_, _| 1.0)).unwrap();
        let r = solve_with(&g, false, None, SolveOptions { verify_bounds: true }).unwrap();
        assert!((r.objective - 10.0).abs() < 1e-9);
        assert_eq!(r.allocation.winners(), vec![AgentId(2)]);
        assert!(check_feasible(&g, &r.allocation, false));
    }

    #[test]
    fn restriction_removes_agent() {
        let p = profile(
            vec![ValuationMap::from_atoms(AgentId(0), [(ts(&[0]), 300.0)])],
            vec![bid(1, &[0], 100.0), bid(2, &[0], 150.0)],
            false,
        );
        let g = build_hypergraph(&p, &table(&p, |_, _| 1.0)).unwrap();
        let full = solve(&g, false, None).unwrap();
        let without = solve(&g, false, Some(&Restriction::excluding(AgentId(1)))).unwrap();
        assert!((full.objective - 200.0).abs() < 1e-9);
        assert!((without.objective - 150.0).abs() < 1e-9);
        let oracle = brute_force_optimum(&g, false, Some(&Restriction::excluding(AgentId(1)))).unwrap();
        assert!((oracle.objective - 150.0).abs() < 1e-9);
    }

    #[test]
    fn ties_resolve_to_smallest_edge_ids() {
        let p = profile(
            vec![ValuationMap::from_atoms(AgentId(0), [(ts(&[0]), 10.0)])],
            vec![bid(1, &[0], 5.0), bid(2, &[0], 5.0)],
            false,
        );
        let g = build_hypergraph(&p, &table(&p, |_, _| 1.0)).unwrap();
        let r = solve(&g, false, None).unwrap();
        assert_eq!(r.allocation.winners(), vec![AgentId(1)]);
        let again = solve(&g, false, None).unwrap();
        assert_eq!(r.allocation, again.allocation);
    }
}
