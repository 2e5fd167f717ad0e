//! Misreport audits on a random instance: GTBM payments pass, a rule that
//! recomputes payments from the deviator's own reports fails.
//!
//! cargo run --example incentive_audit [seed]

use trustclear::bench::{generate_instance, GenConfig};
use trustclear::{
    audit_incentive_compatibility, audit_individual_rationality, AuditConfig, AuditMechanism, DiscountPolicy,
    TrustModel,
};

fn main() -> trustclear::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let mut config = GenConfig::new(2, 2, 3, seed);
    config.max_bundle = 2;
    let profile = generate_instance(&config)?;
    let model = TrustModel::uniform(&profile.agents)?;
    let audit = AuditConfig { eqos_steps: 5, samples: 60, seed, ..AuditConfig::default() };

    for mech in [
        AuditMechanism::Gtbm(DiscountPolicy::MinMarginal),
        AuditMechanism::Gtbm(DiscountPolicy::Zero),
        AuditMechanism::BrokenGtbm(DiscountPolicy::Zero),
    ] {
        let report = audit_incentive_compatibility(&profile, &model, &mech, &audit)?;
        println!("{report}");
    }
    let ir = audit_individual_rationality(&profile, &model, &AuditMechanism::Gtbm(DiscountPolicy::MinMarginal), &audit)?;
    println!("{ir}");
    Ok(())
}
