//! Naive Vickrey pricing on the three-performer instance, and how a single
//! inflated self-rating flips the winner.
//!
//! cargo run --example vickrey_baseline

use trustclear::mechanism::{naive_vickrey_schedule, VickreyMode};
use trustclear::{gtbm_clear, InstanceFile};

fn load(name: &str) -> InstanceFile {
    InstanceFile::load(format!("{}/instances/{name}", env!("CARGO_MANIFEST_DIR")).as_ref()).expect("instance parses")
}

fn main() -> trustclear::Result<()> {
    let truth = load("three_performers.json");
    let clearing = gtbm_clear(&truth.profile, &truth.trust_model)?;
    for w in clearing.result.allocation.winners() {
        println!("efficient winner {w}, expected welfare {:.1}", clearing.result.objective);
    }

    for (label, file) in [("truthful", &truth), ("agent 1 claims certainty", &load("three_performers_overstated.json"))] {
        let schedule = naive_vickrey_schedule(&file.profile, VickreyMode::Expected)?;
        let Some(a) = schedule.assignments.first() else { continue };
        let paid = schedule.realized_mask(0)[&a.performer];
        println!("{label}: {} wins and is paid {paid:.1}", a.performer);
    }

    // Certain mode ignores the reported probabilities entirely.
    let certain = naive_vickrey_schedule(&truth.profile, VickreyMode::Certain)?;
    if let Some(a) = certain.assignments.first() {
        println!("certain mode: {} wins and is paid {:.1}", a.performer, certain.realized_mask(0)[&a.performer]);
    }
    Ok(())
}
