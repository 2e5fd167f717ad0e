//! Solve time against search-space size on generated instances.
//!
//! cargo run --release --example scaling_benchmark

use trustclear::bench::{run_benchmark, spearman, write_csv, GenConfig};

fn main() -> trustclear::Result<()> {
    let configs: Vec<GenConfig> = [(3, 3), (4, 4), (5, 5), (5, 7)]
        .into_iter()
        .enumerate()
        .map(|(k, (t, a))| {
            let mut c = GenConfig::new(t, a, a, 100 * k as u64);
            c.max_bundle = 3;
            c
        })
        .collect();
    let report = run_benchmark(&configs, 5);
    for f in &report.failures {
        eprintln!("seed {}: {}", f.seed, f.error);
    }
    write_csv(&report.rows, std::io::stdout().lock())?;
    let counts: Vec<f64> = report.rows.iter().map(|r| r.allocation_count as f64).collect();
    let times: Vec<f64> = report.rows.iter().map(|r| r.solve_ms).collect();
    eprintln!("spearman(count, time) = {:.3}", spearman(&counts, &times));
    Ok(())
}
