//! Aggregating EQOS reports into success probabilities, with the built-in
//! weighted sum and a caller-supplied rule.
//!
//! cargo run --example trust_aggregation

use std::sync::Arc;

use trustclear::trust::{bundle_completion_trust, EqosReports, TrustError, TrustRule};
use trustclear::{build_trust_table, AgentId, InstanceFile, TaskId, TaskSet, TrustModel};

/// The most pessimistic report wins.
#[derive(Debug)]
struct Minimum;

impl TrustRule for Minimum {
    fn name(&self) -> &str {
        "minimum"
    }

    fn evaluate(&self, reports: &EqosReports<'_>, performer: AgentId, task: TaskId) -> Result<f64, TrustError> {
        let values = reports.reporters().filter_map(|r| reports.get(r, performer, task));
        Ok(values.fold(1.0, f64::min))
    }
}

fn main() -> trustclear::Result<()> {
    let f = InstanceFile::from_json(include_str!("../instances/third_party_trust.json"))?;
    let models = [
        ("weighted", f.trust_model.clone()),
        ("uniform", TrustModel::uniform(&f.profile.agents)?),
        ("minimum", TrustModel::custom(Arc::new(Minimum), true)),
    ];
    for (name, model) in &models {
        let table = build_trust_table(model, &f.profile, None)?;
        let row: Vec<String> = table.iter().map(|((p, t), v)| format!("{p}/{t}={v:.3}")).collect();
        println!("{name:>8}: {}", row.join(" "));
    }

    // Completion probabilities of every subset of a two-task bundle.
    let mut table = trustclear::TrustTable::new();
    table.insert(AgentId(1), TaskId(0), 0.9);
    table.insert(AgentId(1), TaskId(1), 0.5);
    let bundle: TaskSet = [TaskId(0), TaskId(1)].into_iter().collect();
    for done in bundle.subsets() {
        println!("P(done = {done}) = {:.2}", bundle_completion_trust(&table, AgentId(1), done, bundle)?);
    }
    Ok(())
}
