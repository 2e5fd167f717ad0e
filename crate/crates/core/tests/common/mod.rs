//! Reference computations shared by the integration tests. Nothing here
//! calls the hypergraph or the solver.

#![allow(dead_code)]

use std::collections::BTreeMap;

use trustclear::trust::TrustTable;
use trustclear::{AgentId, BidAtom, ReportProfile, TaskId, TaskSet, ValuationMap};

/// `Σ_S P(exactly S completes) · v(S)` by enumerating every subset of `bundle`.
pub fn enumerated_value(vmap: &ValuationMap, bundle: &[(TaskId, f64)]) -> f64 {
    let n = bundle.len();
    let mut total = 0.0;
    for mask in 0u32..(1 << n) {
        let mut p = 1.0;
        let mut done = TaskSet::empty();
        for (k, &(t, q)) in bundle.iter().enumerate() {
            if mask >> k & 1 == 1 {
                p *= q;
                done.insert(t);
            } else {
                p *= 1.0 - q;
            }
        }
        total += p * vmap.lookup(done);
    }
    total
}

struct Search<'a> {
    profile: &'a ReportProfile,
    table: &'a TrustTable,
    performers: Vec<(AgentId, Vec<&'a BidAtom>)>,
    requesters: Vec<&'a ValuationMap>,
    best: f64,
}

impl Search<'_> {
    fn pick_bids(&mut self, k: usize, supply: &mut BTreeMap<(TaskId, AgentId), bool>, cost: f64) {
        if k == self.performers.len() {
            self.pick_requests(0, supply, -cost);
            return;
        }
        self.pick_bids(k + 1, supply, cost);
        let (performer, bids) = (self.performers[k].0, self.performers[k].1.clone());
        for b in bids {
            for t in b.bundle.iter() {
                supply.insert((t, performer), false);
            }
            self.pick_bids(k + 1, supply, cost + b.cost);
            for t in b.bundle.iter() {
                supply.remove(&(t, performer));
            }
        }
    }

    fn pick_requests(&mut self, k: usize, supply: &mut BTreeMap<(TaskId, AgentId), bool>, acc: f64) {
        if k == self.requesters.len() {
            if self.profile.free_disposal || supply.values().all(|&used| used) {
                self.best = self.best.max(acc);
            }
            return;
        }
        self.pick_requests(k + 1, supply, acc);
        let vmap = self.requesters[k];
        for &bundle in vmap.entries.keys() {
            let tasks: Vec<TaskId> = bundle.iter().collect();
            let mut chosen = Vec::new();
            self.cover(k, &tasks, 0, &mut chosen, supply, acc);
        }
    }

    fn cover(
        &mut self,
        k: usize,
        tasks: &[TaskId],
        i: usize,
        chosen: &mut Vec<(TaskId, f64)>,
        supply: &mut BTreeMap<(TaskId, AgentId), bool>,
        acc: f64,
    ) {
        if i == tasks.len() {
            let v = enumerated_value(self.requesters[k], chosen);
            self.pick_requests(k + 1, supply, acc + v);
            return;
        }
        let t = tasks[i];
        let free: Vec<AgentId> = supply.iter().filter(|(key, used)| key.0 == t && !**used).map(|(key, _)| key.1).collect();
        for j in free {
            supply.insert((t, j), true);
            chosen.push((t, self.table.get(j, t).expect("trust for every bid pair")));
            self.cover(k, tasks, i + 1, chosen, supply, acc);
            chosen.pop();
            supply.insert((t, j), false);
        }
    }
}

/// Best expected welfare by direct search over bid choices and task covers.
pub fn reference_optimum(profile: &ReportProfile, table: &TrustTable) -> f64 {
    let mut performers: BTreeMap<AgentId, Vec<&BidAtom>> = BTreeMap::new();
    for b in &profile.bids {
        performers.entry(b.performer).or_default().push(b);
    }
    let mut s = Search {
        profile,
        table,
        performers: performers.into_iter().collect(),
        requesters: profile.valuations.iter().collect(),
        best: f64::NEG_INFINITY,
    };
    s.pick_bids(0, &mut BTreeMap::new(), 0.0);
    s.best
}

/// Path of a checked-in instance file.
pub fn instance(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("instances").join(name)
}
