//! Single-task trust-based mechanism with a fixed participation discount,
//! swept over every EQOS draw in {0.6, 0.7, 0.8}.
//!
//! cargo run --example single_task_tbm

use trustclear::{build_trust_table, single_task_tbm, AgentId, DiscountPolicy, InstanceFile, TaskId};

fn main() -> trustclear::Result<()> {
    let f = InstanceFile::from_json(include_str!("../instances/single_task_discount.json"))?;
    let policy = DiscountPolicy::fixed(0.6)?;
    let (winner, schedule) = single_task_tbm(&f.profile, &f.trust_model, &policy)?;
    println!("winner {winner:?}");
    for p in &schedule.payments {
        println!("  {}: success {:.1}, failure {:.1}", p.agent, p.payment(1), p.payment(0));
    }

    let levels = [0.6, 0.7, 0.8];
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for code in 0..81usize {
        let mut profile = f.profile.clone();
        let mut c = code;
        for (r, j) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
            let m = profile.eqos.iter_mut().find(|m| m.reporter == AgentId(r)).expect("reporter present");
            m.set(AgentId(j), TaskId(0), levels[c % 3]);
            c /= 3;
        }
        let (_, schedule) = single_task_tbm(&profile, &f.trust_model, &policy)?;
        let table = build_trust_table(&f.trust_model, &profile, None)?;
        let total: f64 = schedule.expected(&table)?.values().sum();
        lo = lo.min(total);
        hi = hi.max(total);
    }
    println!("total expected payment over all draws: [{lo:.3}, {hi:.3}]");
    Ok(())
}
