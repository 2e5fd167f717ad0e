//! Contingent payments that pay only on success, evaluated against the
//! performer's true completion probability.
//!
//! cargo run --example porter_mechanism

use trustclear::mechanism::porter_schedule;
use trustclear::simulator::{expected_utility, AuditMechanism, TrueType};
use trustclear::{build_trust_table, AgentId, InstanceFile, TrustModel};

fn load(name: &str) -> InstanceFile {
    InstanceFile::load(format!("{}/instances/{name}", env!("CARGO_MANIFEST_DIR")).as_ref()).expect("instance parses")
}

fn main() -> trustclear::Result<()> {
    let truth = load("three_performers.json");
    let lie = load("three_performers_overstated.json");
    let agent = AgentId(1);

    for (label, file) in [("truthful", &truth), ("overstated", &lie)] {
        let schedule = porter_schedule(&file.profile)?;
        let true_probs = build_trust_table(&TrustModel::self_report(), &truth.profile, None)?;
        let expected = schedule.expected(&true_probs)?;
        println!("{label} reports:");
        for p in &schedule.payments {
            println!("  {}: success {:.1}, failure {:.1}, expected {:.1}", p.agent, p.payment(1), p.payment(0), expected[&p.agent]);
        }
        let t = TrueType::truthful(&truth.profile, agent)?;
        let u = expected_utility(&file.profile, &file.trust_model, agent, &t, &AuditMechanism::Porter)?;
        println!("  expected utility of {agent}: {u:.1}");
    }
    Ok(())
}
