//! Settle a cleared instance over many simulated executions and compare
//! the average transfer with the closed-form expectation.
//!
//! cargo run --release --example monte_carlo_settlement [runs]

use trustclear::simulator::sample_execution;
use trustclear::{gtbm_clear, gtbm_payment_schedule, DiscountPolicy, InstanceFile};

fn main() -> trustclear::Result<()> {
    let runs: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let f = InstanceFile::from_json(include_str!("../instances/three_performers.json"))?;
    let clearing = gtbm_clear(&f.profile, &f.trust_model)?;
    let schedule = gtbm_payment_schedule(&f.profile, &f.trust_model, &clearing.result, &DiscountPolicy::MinMarginal)?;
    let expected = schedule.expected(&clearing.table)?;

    let mut totals = vec![0.0; schedule.payments.len()];
    let mut squares = vec![0.0; schedule.payments.len()];
    let mut centre = 0.0;
    for seed in 0..runs {
        let outcome = sample_execution(&clearing.result.allocation, &clearing.table, seed)?;
        for (k, pay) in schedule.realized(&outcome)?.values().enumerate() {
            totals[k] += pay;
            squares[k] += pay * pay;
        }
        centre += schedule.centre_balance(&outcome)?;
    }
    let n = runs as f64;
    for (k, p) in schedule.payments.iter().enumerate() {
        let mean = totals[k] / n;
        let se = ((squares[k] / n - mean * mean).max(0.0) / n).sqrt();
        println!("{}: mean {mean:.3} (se {se:.3}), expected {:.3}", p.agent, expected[&p.agent]);
    }
    println!("centre balance per execution: {:.3}", centre / runs as f64);
    Ok(())
}
