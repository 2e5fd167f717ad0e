//! Random instance generation and solver timing.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::ops::RangeInclusive;
use std::path::Path;
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hypergraph::{build_hypergraph, count_allocations};
use crate::instance::InstanceFile;
use crate::solver::solve;
use crate::trust::{build_trust_table, TrustModel};
use crate::types::{AgentId, BidAtom, EqosDomain, EqosMatrix, ReportProfile, TaskId, TaskSet, ValuationMap};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GenConfig {
    pub n_tasks: usize,
    pub n_requesters: usize,
    pub n_performers: usize,
    /// Success probability of the geometric atom-count law (support 1, 2, ...).
    pub geometric_p: f64,
    pub value_range: (f64, f64),
    pub cost_range: (f64, f64),
    pub eqos_range: (f64, f64),
    /// Largest bundle drawn for an atom.
    pub max_bundle: usize,
    pub free_disposal: bool,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_tasks: 5,
            n_requesters: 20,
            n_performers: 15,
            geometric_p: 0.23,
            value_range: (50.0, 300.0),
            cost_range: (10.0, 200.0),
            eqos_range: (0.3, 1.0),
            max_bundle: 5,
            free_disposal: true,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn new(n_tasks: usize, n_requesters: usize, n_performers: usize, seed: u64) -> Self {
        GenConfig { n_tasks, n_requesters, n_performers, seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_tasks == 0 || self.n_requesters == 0 || self.n_performers == 0 {
            return bad("task, requester and performer counts must be at least 1");
        }
        if self.n_tasks > TaskSet::CAPACITY {
            return bad("at most 64 tasks are supported");
        }
        if !(self.geometric_p > 0.0 && self.geometric_p <= 1.0) {
            return bad("geometric_p must lie in (0, 1]");
        }
        if self.max_bundle == 0 {
            return bad("max_bundle must be at least 1");
        }
        for (name, (lo, hi)) in [("value", self.value_range), ("cost", self.cost_range), ("eqos", self.eqos_range)] {
            if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
                return Err(Error::Config(format!("{name} range must satisfy 0 <= lo <= hi")));
            }
        }
        if self.eqos_range.1 > 1.0 {
            return bad("eqos range must lie within [0, 1]");
        }
        Ok(())
    }
}

/// Number of atoms one agent submits: geometric on {1, 2, ...}.
pub fn sample_atom_count<R: Rng + ?Sized>(rng: &mut R, p: f64) -> usize {
    let geo = Geometric::new(p).expect("p validated to lie in (0, 1]");
    geo.sample(rng) as usize + 1
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// A bundle drawn uniformly among non-empty subsets of size at most `max`.
fn random_bundle<R: Rng + ?Sized>(rng: &mut R, n_tasks: usize, max: usize) -> TaskSet {
    let max = max.min(n_tasks);
    // Choose the size with weight C(n, k), then a uniform subset of that size.
    let weights: Vec<f64> = (1..=max).map(|k| binomial(n_tasks, k)).collect();
    let total: f64 = weights.iter().sum();
    let mut x = rng.random_range(0.0..total);
    let mut size = max;
    for (k, w) in weights.iter().enumerate() {
        if x < *w {
            size = k + 1;
            break;
        }
        x -= w;
    }
    sample(rng, n_tasks, size).into_iter().map(|t| TaskId(t as u16)).collect()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Makes `vmap` subset-monotone: every subset of a drawn bundle that contains
/// some drawn bundle becomes an entry worth the best drawn bundle inside it.
fn make_subset_monotone(vmap: &mut ValuationMap) {
    let drawn: Vec<(TaskSet, f64)> = vmap.entries.iter().map(|(&k, &v)| (k, v)).collect();
    let mut closed = BTreeMap::new();
    for &(bundle, _) in &drawn {
        for sub in bundle.subsets().filter(|s| !s.is_empty()) {
            let best = drawn.iter().filter(|(t, _)| t.is_subset(sub)).map(|x| x.1).reduce(f64::max);
            if let Some(v) = best {
                closed.insert(sub, v);
            }
        }
    }
    vmap.entries = closed;
}

/// Deterministic random instance; requesters and performers are disjoint agents.
pub fn generate_instance(config: &GenConfig) -> Result<ReportProfile> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_agents = config.n_requesters + config.n_performers;
    let agents: Vec<AgentId> = (0..n_agents as u32).map(AgentId).collect();
    let tasks: Vec<TaskId> = (0..config.n_tasks as u16).map(TaskId).collect();

    let mut valuations = Vec::new();
    for &requester in &agents[..config.n_requesters] {
        let mut vmap = ValuationMap::new(requester);
        for _ in 0..sample_atom_count(&mut rng, config.geometric_p) {
            let bundle = random_bundle(&mut rng, config.n_tasks, config.max_bundle);
            let value = uniform(&mut rng, config.value_range);
            vmap.entries.insert(bundle, value);
        }
        make_subset_monotone(&mut vmap);
        valuations.push(vmap);
    }

    let mut bids = Vec::new();
    for p in 0..config.n_performers {
        let performer = agents[config.n_requesters + p];
        let mut seen = BTreeSet::new();
        for _ in 0..sample_atom_count(&mut rng, config.geometric_p) {
            let bundle = random_bundle(&mut rng, config.n_tasks, config.max_bundle);
            let cost = uniform(&mut rng, config.cost_range);
            if seen.insert(bundle) {
                bids.push(BidAtom { performer, bundle, cost });
            }
        }
    }

    let pairs: Vec<(AgentId, TaskId)> = bids
        .iter()
        .flat_map(|b: &BidAtom| b.bundle.iter().map(move |t| (b.performer, t)))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let eqos = agents
        .iter()
        .map(|&a| EqosMatrix {
            reporter: a,
            entries: pairs.iter().map(|&k| (k, uniform(&mut rng, config.eqos_range))).collect(),
        })
        .collect();

    Ok(ReportProfile {
        agents,
        tasks,
        valuations,
        bids,
        eqos,
        free_disposal: config.free_disposal,
        eqos_domain: EqosDomain { lo: config.eqos_range.0, hi: config.eqos_range.1 },
    })
}

/// Every requester values the full task set; every performer bids on it.
pub fn all_bundles_instance(n_requesters: usize, n_performers: usize, n_tasks: usize) -> ReportProfile {
    let agents: Vec<AgentId> = (0..(n_requesters + n_performers) as u32).map(AgentId).collect();
    let tasks: Vec<TaskId> = (0..n_tasks as u16).map(TaskId).collect();
    let full: TaskSet = tasks.iter().copied().collect();
    let valuations = agents[..n_requesters].iter().map(|&r| ValuationMap::from_atoms(r, [(full, 100.0)])).collect();
    let bids: Vec<BidAtom> =
        agents[n_requesters..].iter().map(|&p| BidAtom { performer: p, bundle: full, cost: 50.0 }).collect();
    let eqos = agents
        .iter()
        .map(|&a| EqosMatrix {
            reporter: a,
            entries: bids.iter().flat_map(|b| tasks.iter().map(move |&t| ((b.performer, t), 0.9))).collect(),
        })
        .collect();
    ReportProfile {
        agents,
        tasks,
        valuations,
        bids,
        eqos,
        free_disposal: true,
        eqos_domain: EqosDomain::default(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub seed: u64,
    pub n_tasks: usize,
    pub n_requesters: usize,
    pub n_performers: usize,
    pub allocation_count: u128,
    pub v_edges: usize,
    pub c_edges: usize,
    pub solve_ms: f64,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchFailure {
    pub seed: u64,
    pub n_tasks: usize,
    pub n_requesters: usize,
    pub n_performers: usize,
    pub error: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BenchReport {
    /// Sorted by allocation count, then seed.
    pub rows: Vec<BenchRow>,
    pub failures: Vec<BenchFailure>,
}

fn bench_one(config: &GenConfig, save_dir: Option<&Path>, counts: &RangeInclusive<u128>) -> Result<Option<BenchRow>> {
    let profile = generate_instance(config)?;
    let allocation_count = count_allocations(&profile);
    if !counts.contains(&allocation_count) {
        return Ok(None);
    }
    let model = TrustModel::uniform(&profile.agents)?;
    if let Some(dir) = save_dir {
        let file = InstanceFile { profile: profile.clone(), trust_model: model.clone() };
        file.save(&dir.join(format!("instance-{}-{}-{}-{}.json", config.n_tasks, config.n_requesters, config.n_performers, config.seed)))?;
    }
    let table = build_trust_table(&model, &profile, None)?;
    let graph = build_hypergraph(&profile, &table)?;
    let start = Instant::now();
    let result = solve(&graph, profile.free_disposal, None)?;
    let solve_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(Some(BenchRow {
        seed: config.seed,
        n_tasks: config.n_tasks,
        n_requesters: config.n_requesters,
        n_performers: config.n_performers,
        allocation_count,
        v_edges: graph.v_edges.len(),
        c_edges: graph.c_edges.len(),
        solve_ms,
        objective: result.objective,
    }))
}

/// Runs `runs` seeds per config (seeds `config.seed + k`), sequentially.
pub fn run_benchmark(configs: &[GenConfig], runs: usize) -> BenchReport {
    run_benchmark_saving(configs, runs, None)
}

/// As [`run_benchmark`], also writing each instance as JSON into `save_dir`.
pub fn run_benchmark_saving(configs: &[GenConfig], runs: usize, save_dir: Option<&Path>) -> BenchReport {
    bench_configs(configs, runs, save_dir, &(0..=u128::MAX))
}

/// As [`run_benchmark`], but instances whose allocation count falls outside
/// `counts` are generated and counted, never solved, and left out of the report.
pub fn run_benchmark_in_range(configs: &[GenConfig], runs: usize, counts: RangeInclusive<u128>) -> BenchReport {
    bench_configs(configs, runs, None, &counts)
}

fn bench_configs(configs: &[GenConfig], runs: usize, save_dir: Option<&Path>, counts: &RangeInclusive<u128>) -> BenchReport {
    let mut report = BenchReport::default();
    for base in configs {
        for k in 0..runs as u64 {
            let config = GenConfig { seed: base.seed.wrapping_add(k), ..base.clone() };
            match bench_one(&config, save_dir, counts) {
                Ok(Some(row)) => report.rows.push(row),
                Ok(None) => {}
                Err(e) => report.failures.push(BenchFailure {
                    seed: config.seed,
                    n_tasks: config.n_tasks,
                    n_requesters: config.n_requesters,
                    n_performers: config.n_performers,
                    error: e.to_string(),
                }),
            }
        }
    }
    report.rows.sort_by(|a, b| a.allocation_count.cmp(&b.allocation_count).then(a.seed.cmp(&b.seed)));
    report
}

pub fn write_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "seed",
        "n_tasks",
        "n_requesters",
        "n_performers",
        "allocation_count",
        "v_edges",
        "c_edges",
        "solve_ms",
        "objective",
    ])?;
    for r in rows {
        w.write_record([
            r.seed.to_string(),
            r.n_tasks.to_string(),
            r.n_requesters.to_string(),
            r.n_performers.to_string(),
            r.allocation_count.to_string(),
            r.v_edges.to_string(),
            r.c_edges.to_string(),
            format!("{:.4}", r.solve_ms),
            format!("{:.4}", r.objective),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Average ranks (ties share the mean rank), 1-based.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; NaN when either input is constant or shorter than 2.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "spearman inputs differ in length");
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let mean = (n as f64 + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for k in 0..n {
        let (dx, dy) = (rx[k] - mean, ry[k] - mean);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    sxy / (sxx * syy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::validate_report_profile;

    #[test]
    fn generated_instances_are_valid_and_deterministic() {
        for seed in 0..20 {
            let cfg = GenConfig { seed, ..GenConfig::new(4, 3, 3, seed) };
            let p = generate_instance(&cfg).unwrap();
            assert!(validate_report_profile(&p).is_empty());
            assert!(p.valuations.iter().all(|v| v.is_subset_monotone()));
            assert_eq!(p, generate_instance(&cfg).unwrap());
        }
    }

    #[test]
    fn unit_p_gives_one_atom_each() {
        let cfg = GenConfig { geometric_p: 1.0, ..GenConfig::new(5, 6, 6, 3) };
        let p = generate_instance(&cfg).unwrap();
        assert!(p.valuations.iter().all(|v| v.entries.len() == 1));
        assert_eq!(p.bids.len(), 6);
    }

    #[test]
    fn atom_count_mean_is_inverse_p() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let mean = (0..n).map(|_| sample_atom_count(&mut rng, 0.23)).sum::<usize>() as f64 / n as f64;
        // sd of the geometric is sqrt(1-p)/p ≈ 3.8, so 4 standard errors ≈ 0.15
        assert!((mean - 1.0 / 0.23).abs() < 0.15, "mean {mean}");
    }

    #[test]
    fn bundles_respect_size_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let b = random_bundle(&mut rng, 8, 3);
            assert!((1..=3).contains(&b.len()));
            assert!(b.iter().all(|t| t.index() < 8));
        }
    }

    #[test]
    fn monotone_closure_keeps_larger_values() {
        let ts = |v: &[u16]| TaskSet::from_tasks(v.iter().map(|&t| TaskId(t)));
        let mut v = ValuationMap::from_atoms(AgentId(0), [(ts(&[0]), 90.0), (ts(&[0, 1]), 60.0), (ts(&[2]), 10.0)]);
        make_subset_monotone(&mut v);
        assert!(v.is_subset_monotone());
        assert_eq!(v.lookup(ts(&[0, 1])), 90.0);
        assert_eq!(v.lookup(ts(&[2])), 10.0);
    }

    #[test]
    fn all_bundles_count() {
        assert_eq!(count_allocations(&all_bundles_instance(20, 15, 5)), 15_187_500);
        assert_eq!(count_allocations(&all_bundles_instance(1, 3, 1)), 3);
    }

    #[test]
    fn spearman_basics() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        let r = spearman(&[1.0, 1.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]);
        assert!(r > 0.9 && r < 1.0);
    }

    #[test]
    fn empty_benchmark_writes_header_only() {
        let report = run_benchmark(&[], 3);
        let mut buf = Vec::new();
        write_csv(&report.rows, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap().trim(),
            "seed,n_tasks,n_requesters,n_performers,allocation_count,v_edges,c_edges,solve_ms,objective"
        );
    }

    #[test]
    fn benchmark_rows_sorted_by_count() {
        let report = run_benchmark(&[GenConfig::new(3, 3, 3, 100)], 6);
        assert_eq!(report.rows.len() + report.failures.len(), 6);
        assert!(report.rows.windows(2).all(|w| w[0].allocation_count <= w[1].allocation_count));
        for r in &report.rows {
            assert_eq!(r.allocation_count, r.v_edges as u128);
        }
    }
}
