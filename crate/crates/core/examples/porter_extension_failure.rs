//! Once other agents' trust reports feed the allocation, paying only on
//! success stops being truthful; GTBM payments stay truthful on the same
//! instance.
//!
//! cargo run --example porter_extension_failure

use trustclear::simulator::{expected_utility, AuditMechanism, TrueType};
use trustclear::{audit_incentive_compatibility, AgentId, AuditConfig, DiscountPolicy, InstanceFile, TaskId};

fn main() -> trustclear::Result<()> {
    let f = InstanceFile::from_json(include_str!("../instances/third_party_trust.json"))?;
    let agent = AgentId(1);
    let truth = TrueType::truthful(&f.profile, agent)?;
    let mech = AuditMechanism::PorterExtension;

    let honest = expected_utility(&f.profile, &f.trust_model, agent, &truth, &mech)?;
    // Agent 1 badmouths its rival.
    let lie = f.profile.with_eqos(truth.eqos.clone().with(AgentId(2), TaskId(0), 0.0));
    let lying = expected_utility(&lie, &f.trust_model, agent, &truth, &mech)?;
    println!("{mech}: truthful {honest:.3}, badmouthing {lying:.3}");

    let config = AuditConfig { agents: Some(vec![AgentId(1), AgentId(2)]), ..AuditConfig::grid(0.05, 21)? };
    for m in [mech, AuditMechanism::Gtbm(DiscountPolicy::Zero)] {
        let report = audit_incentive_compatibility(&f.profile, &f.trust_model, &m, &config)?;
        println!("{m}: {} (max gain {:.3})", if report.pass { "PASS" } else { "FAIL" }, report.max_gain());
    }
    Ok(())
}
