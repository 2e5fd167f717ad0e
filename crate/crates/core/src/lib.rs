//! Exact clearing of trust-based combinatorial task exchanges.
//!
//! Requesters submit XOR valuations over task bundles, performers submit XOR
//! cost bids, and every agent reports how likely each performer is to
//! complete each task. A trust model aggregates those reports into success
//! probabilities; the clearing engine then finds the allocation maximizing
//! expected welfare and settles contingent payments once execution is
//! observed.
//!
//! ```
//! use trustclear::{gtbm_clear, InstanceFile};
//!
//! let file = InstanceFile::from_json(include_str!("../instances/third_party_trust.json")).unwrap();
//! let clearing = gtbm_clear(&file.profile, &file.trust_model).unwrap();
//! assert!((clearing.result.objective - 0.8).abs() < 1e-9);
//! ```

pub mod bench;
pub mod cli;
pub mod error;
pub mod hypergraph;
pub mod instance;
pub mod mechanism;
pub mod parallel;
pub mod simulator;
pub mod solver;
pub mod trust;
pub mod types;

pub use error::{Error, Result};
pub use hypergraph::{build_hypergraph, count_allocations, Allocation, AllocationHypergraph};
pub use instance::InstanceFile;
pub use mechanism::{
    gtbm_clear, gtbm_payment_schedule, single_task_tbm, Clearing, DiscountPolicy, MechanismKind, PaymentSchedule,
};
pub use simulator::{audit_incentive_compatibility, audit_individual_rationality, AuditConfig, AuditMechanism};
pub use solver::{brute_force_optimum, solve, SolveResult};
pub use trust::{build_trust_table, TrustModel, TrustTable};
pub use types::{
    AgentId, Assignment, BidAtom, EqosDomain, EqosMatrix, ExecutionOutcome, ReportProfile, TaskId, TaskSet,
    ValuationMap,
};
