//! Size of the allocation search space: the hypergraph of one instance,
//! its text dump, and the closed-form count on an all-bundles instance.
//!
//! cargo run --example hypergraph_search_space

use trustclear::bench::all_bundles_instance;
use trustclear::{build_hypergraph, build_trust_table, count_allocations, InstanceFile};

fn main() -> trustclear::Result<()> {
    let f = InstanceFile::from_json(include_str!("../instances/three_performers.json"))?;
    let table = build_trust_table(&f.trust_model, &f.profile, None)?;
    let graph = build_hypergraph(&f.profile, &table)?;
    println!("{}", graph.dump());
    println!("count {} = {} v-edges", count_allocations(&f.profile), graph.v_edges.len());

    for (r, p, t) in [(2, 2, 2), (5, 5, 3), (20, 15, 5)] {
        println!("all bundles, {r} requesters x {p} performers x {t} tasks: {}", count_allocations(&all_bundles_instance(r, p, t)));
    }
    Ok(())
}
