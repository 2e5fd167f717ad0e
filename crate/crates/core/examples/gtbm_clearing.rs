//! Clear an instance file: optimal allocation, payment schedule and the
//! payment under every completion pattern.
//!
//! cargo run --example gtbm_clearing [instance.json] [zero|min-marginal|fixed:B]

use trustclear::{gtbm_clear, gtbm_payment_schedule, DiscountPolicy, InstanceFile};

fn main() -> trustclear::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| format!("{}/instances/third_party_trust.json", env!("CARGO_MANIFEST_DIR")));
    let policy: DiscountPolicy = args.next().as_deref().unwrap_or("min-marginal").parse()?;
    let f = InstanceFile::load(path.as_ref())?;

    let clearing = gtbm_clear(&f.profile, &f.trust_model)?;
    let alloc = &clearing.result.allocation;
    println!("objective {:.4} ({} nodes)", clearing.result.objective, clearing.result.stats.nodes_explored);
    for a in alloc.assignments() {
        println!("  {a}");
    }

    let schedule = gtbm_payment_schedule(&f.profile, &f.trust_model, &clearing.result, &policy)?;
    let expected = schedule.expected(&clearing.table)?;
    for p in schedule.patterns()? {
        // Adding 0.0 turns -0.0 into 0.0 for printing.
        print!("{} (discount {:.4}, expected {:.4}):", p.agent, p.discount + 0.0, expected[&p.agent] + 0.0);
        for (mask, pay) in p.patterns {
            print!(" {mask:#b}={:.4}", pay + 0.0);
        }
        println!();
    }
    Ok(())
}
