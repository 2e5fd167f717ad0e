//! Command-line front end. Exit codes: 0 success, 1 oracle mismatch or
//! failed audit, 2 input error.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{all_bundles_instance, generate_instance, run_benchmark_saving, spearman, write_csv, GenConfig};
use crate::error::{Error, Result};
use crate::hypergraph::count_allocations;
use crate::instance::InstanceFile;
use crate::mechanism::{
    gtbm_clear, gtbm_payment_schedule, naive_vickrey_schedule, porter_schedule, single_task_tbm, DiscountPolicy,
    MechanismKind, PaymentSchedule, VickreyMode,
};
use crate::simulator::{audit_incentive_compatibility, audit_individual_rationality, AuditConfig, AuditMechanism};
use crate::solver::{brute_force_optimum, solve_with, SolveOptions, OBJECTIVE_TOLERANCE};
use crate::trust::{build_trust_table, TrustModel};
use crate::types::{AgentId, ExecutionOutcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "trustclear", version, about = "Clear trust-based combinatorial task exchanges")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find the welfare-maximizing allocation.
    Solve {
        instance: PathBuf,
        /// Cross-check against exhaustive search.
        #[arg(long)]
        oracle: bool,
        /// Write the allocation hypergraph here.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Compute payments, contingent or realized.
    Pay {
        instance: PathBuf,
        #[arg(long, default_value = "gtbm")]
        mechanism: MechanismKind,
        #[arg(long, default_value = "zero")]
        policy: DiscountPolicy,
        /// `success`, `all-fail`, or a completion bitmask over the sorted assignments (decimal or 0b...).
        #[arg(long)]
        outcome: Option<String>,
    },
    /// Search for profitable misreports or negative truthful utility.
    Audit(AuditArgs),
    /// Number of valuation hyperedges, without building them.
    Count {
        #[arg(required_unless_present = "all_bundles", conflicts_with = "all_bundles")]
        instance: Option<PathBuf>,
        /// Every requester values and every performer bids on every bundle, e.g. `20x15x5` (requesters x performers x tasks).
        #[arg(long, value_name = "RxPxT")]
        all_bundles: Option<String>,
    },
    /// Generate a random instance.
    Gen {
        #[command(flatten)]
        size: SizeArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time the solver on generated instances.
    Bench {
        /// Comma-separated `TxRxP` sizes (tasks x requesters x performers).
        #[arg(long, default_value = "3x3x3,4x4x4,5x5x5,5x8x8")]
        sizes: String,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV destination for the timing rows.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory receiving every generated instance.
        #[arg(long)]
        save_instances: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct SizeArgs {
    #[arg(long, default_value_t = 5)]
    pub tasks: usize,
    #[arg(long, default_value_t = 4)]
    pub requesters: usize,
    #[arg(long, default_value_t = 4)]
    pub performers: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Check {
    Ic,
    Ir,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    pub instance: PathBuf,
    /// gtbm, single-task-tbm, porter, naive-vickrey, porter-extension or broken-gtbm.
    #[arg(long, default_value = "gtbm")]
    pub mechanism: String,
    #[arg(long, default_value = "zero")]
    pub policy: DiscountPolicy,
    #[arg(long, value_enum, default_value_t = Check::Ic)]
    pub check: Check,
    /// EQOS grid spacing.
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
    /// Number of cost and value scalings spread over [0, 2].
    #[arg(long, default_value_t = 21)]
    pub scalings: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated EQOS values forming the type grid of an IR audit.
    #[arg(long, value_delimiter = ',')]
    pub type_values: Vec<f64>,
    /// Restrict the audit to these agents.
    #[arg(long, value_delimiter = ',')]
    pub agents: Vec<u32>,
    /// Write the full report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli.command) {
        Ok((text, code)) => {
            let _ = out.write_all(text.as_bytes());
            code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if let Error::InvalidProfile(vs) = &e {
                for v in vs {
                    let _ = writeln!(err, "  {v}");
                }
            }
            EXIT_INPUT
        }
    }
}

fn execute(command: Command) -> Result<(String, i32)> {
    match command {
        Command::Solve { instance, oracle, dump } => cmd_solve(&instance, oracle, dump.as_deref()),
        Command::Pay { instance, mechanism, policy, outcome } => {
            cmd_pay(&instance, mechanism, &policy, outcome.as_deref()).map(|s| (s, EXIT_OK))
        }
        Command::Audit(args) => cmd_audit(&args),
        Command::Count { instance, all_bundles } => cmd_count(instance.as_deref(), all_bundles.as_deref()),
        Command::Gen { size, seed, out } => cmd_gen(&size, seed, out.as_deref()),
        Command::Bench { sizes, runs, seed, out, save_instances } => {
            cmd_bench(&sizes, runs, seed, out.as_deref(), save_instances.as_deref())
        }
    }
}

/// Four decimals, without a minus sign on values that round to zero.
fn fmt4(x: f64) -> String {
    let r = (x * 1e4).round() / 1e4;
    format!("{:.4}", if r == 0.0 { 0.0 } else { x })
}

fn agent_list(agents: &[AgentId]) -> String {
    agents.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ")
}

fn cmd_solve(path: &Path, oracle: bool, dump: Option<&Path>) -> Result<(String, i32)> {
    let file = InstanceFile::load(path)?;
    let profile = &file.profile;
    let table = build_trust_table(&file.trust_model, profile, None)?;
    let graph = crate::hypergraph::build_hypergraph(profile, &table)?;
    if let Some(p) = dump {
        std::fs::write(p, graph.dump())?;
    }
    let result = solve_with(&graph, profile.free_disposal, None, SolveOptions::default())?;
    let mut s = String::new();
    let _ = writeln!(s, "assignments:");
    for a in result.allocation.assignments() {
        let _ = writeln!(s, "  {a}");
    }
    for c in &result.allocation.selected_c {
        let _ = writeln!(s, "bid: {} bundle {} cost {:.4}", c.atom.performer, c.atom.bundle, c.weight);
    }
    let winners = result.allocation.winners();
    let label = match winners.len() {
        0 => "winner: none".to_string(),
        1 => format!("winner: {}", winners[0]),
        _ => format!("winners: {}", agent_list(&winners)),
    };
    let _ = writeln!(s, "{label}, objective {}", fmt4(result.objective));
    let _ = writeln!(s, "nodes explored: {}", result.stats.nodes_explored);
    let mut code = EXIT_OK;
    if oracle {
        let reference = brute_force_optimum(&graph, profile.free_disposal, None)?;
        let diff = (reference.objective - result.objective).abs();
        let ok = diff <= OBJECTIVE_TOLERANCE;
        let _ = writeln!(
            s,
            "oracle: objective {:.4}, {}",
            reference.objective,
            if ok { "match" } else { "MISMATCH" }
        );
        if !ok {
            code = EXIT_FAIL;
        }
    }
    Ok((s, code))
}

fn parse_outcome(spec: &str, schedule: &PaymentSchedule) -> Result<u64> {
    let n = schedule.assignments.len();
    let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mask = match spec {
        "success" => full,
        "all-fail" => 0,
        s => {
            let parsed = match s.strip_prefix("0b") {
                Some(bits) => u64::from_str_radix(bits, 2),
                None => s.parse::<u64>(),
            };
            parsed.map_err(|_| Error::Config(format!("bad outcome '{s}': expected success, all-fail or a bitmask")))?
        }
    };
    if mask & !full != 0 {
        return Err(Error::Config(format!("outcome mask {mask:#b} has bits beyond the {n} assignment(s)")));
    }
    Ok(mask)
}

fn schedule_for(
    file: &InstanceFile,
    mechanism: MechanismKind,
    policy: &DiscountPolicy,
) -> Result<(PaymentSchedule, crate::trust::TrustTable)> {
    let profile = &file.profile;
    match mechanism {
        MechanismKind::Gtbm => {
            let clearing = gtbm_clear(profile, &file.trust_model)?;
            let schedule = gtbm_payment_schedule(profile, &file.trust_model, &clearing.result, policy)?;
            Ok((schedule, clearing.table))
        }
        MechanismKind::SingleTaskTbm => {
            let (_, schedule) = single_task_tbm(profile, &file.trust_model, policy)?;
            Ok((schedule, build_trust_table(&file.trust_model, profile, None)?))
        }
        MechanismKind::Porter => {
            Ok((porter_schedule(profile)?, build_trust_table(&TrustModel::self_report(), profile, None)?))
        }
        MechanismKind::NaiveVickrey => Ok((
            naive_vickrey_schedule(profile, VickreyMode::Expected)?,
            build_trust_table(&TrustModel::self_report(), profile, None)?,
        )),
    }
}

fn cmd_pay(path: &Path, mechanism: MechanismKind, policy: &DiscountPolicy, outcome: Option<&str>) -> Result<String> {
    let file = InstanceFile::load(path)?;
    let (schedule, table) = schedule_for(&file, mechanism, policy)?;
    let mut s = String::new();
    let _ = writeln!(s, "mechanism: {mechanism}, policy: {policy}");
    let _ = writeln!(s, "assignments:");
    for (k, a) in schedule.assignments.iter().enumerate() {
        let _ = writeln!(s, "  [{k}] {a}");
    }
    match outcome {
        Some(spec) => {
            let mask = parse_outcome(spec, &schedule)?;
            let outcome = ExecutionOutcome::from_mask(&schedule.assignments, mask);
            let _ = writeln!(s, "outcome: {mask:#b}");
            for (agent, pay) in schedule.realized(&outcome)? {
                let _ = writeln!(s, "{agent}: {}", fmt4(pay));
            }
            let _ = writeln!(s, "centre balance: {}", fmt4(schedule.centre_balance(&outcome)?));
        }
        None => {
            let expected = schedule.expected(&table)?;
            let patterns = schedule.patterns().ok();
            for p in &schedule.payments {
                let _ = writeln!(s, "{}: discount {}, expected {}", p.agent, fmt4(p.discount), fmt4(expected[&p.agent]));
                if let Some(pp) = patterns.as_ref().and_then(|ps| ps.iter().find(|x| x.agent == p.agent)) {
                    for (mask, pay) in &pp.patterns {
                        let _ = writeln!(s, "  {mask:#b}: {}", fmt4(*pay));
                    }
                }
            }
        }
    }
    Ok(s)
}

fn audit_mechanism(name: &str, policy: &DiscountPolicy) -> Result<AuditMechanism> {
    Ok(match name {
        "gtbm" | "single-task-tbm" => AuditMechanism::Gtbm(policy.clone()),
        "broken-gtbm" => AuditMechanism::BrokenGtbm(policy.clone()),
        "porter" => AuditMechanism::Porter,
        "porter-extension" => AuditMechanism::PorterExtension,
        "naive-vickrey" => AuditMechanism::NaiveVickrey(VickreyMode::Expected),
        other => return Err(Error::Config(format!("unknown audit mechanism '{other}'"))),
    })
}

fn cmd_audit(args: &AuditArgs) -> Result<(String, i32)> {
    let file = InstanceFile::load(&args.instance)?;
    let mechanism = audit_mechanism(&args.mechanism, &args.policy)?;
    let mut config = AuditConfig::grid(args.step, args.scalings)?;
    config.seed = args.seed;
    if !args.agents.is_empty() {
        config.agents = Some(args.agents.iter().map(|&a| AgentId(a)).collect());
    }
    if !args.type_values.is_empty() {
        config.type_values = Some(args.type_values.clone());
    }
    let report = match args.check {
        Check::Ic => audit_incentive_compatibility(&file.profile, &file.trust_model, &mechanism, &config)?,
        Check::Ir => audit_individual_rationality(&file.profile, &file.trust_model, &mechanism, &config)?,
    };
    if let Some(p) = &args.out {
        std::fs::write(p, report.to_json()?)?;
    }
    Ok((report.table(), if report.pass { EXIT_OK } else { EXIT_FAIL }))
}

fn parse_dims(spec: &str) -> Result<[usize; 3]> {
    let parts: Vec<usize> = spec
        .split('x')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("bad size '{spec}', expected AxBxC")))?;
    <[usize; 3]>::try_from(parts).map_err(|_| Error::Config(format!("bad size '{spec}', expected AxBxC")))
}

fn cmd_count(instance: Option<&Path>, all_bundles: Option<&str>) -> Result<(String, i32)> {
    let count = match (instance, all_bundles) {
        (_, Some(spec)) => {
            let [r, p, t] = parse_dims(spec)?;
            count_allocations(&all_bundles_instance(r, p, t))
        }
        (Some(path), None) => count_allocations(&InstanceFile::load(path)?.profile),
        (None, None) => return Err(Error::Config("count needs an instance or --all-bundles".into())),
    };
    Ok((format!("{count}\n"), EXIT_OK))
}

fn cmd_gen(size: &SizeArgs, seed: u64, out: Option<&Path>) -> Result<(String, i32)> {
    let config = GenConfig::new(size.tasks, size.requesters, size.performers, seed);
    let profile = generate_instance(&config)?;
    let trust_model = TrustModel::uniform(&profile.agents)?;
    let text = InstanceFile { profile, trust_model }.to_json()?;
    match out {
        Some(p) => {
            std::fs::write(p, &text)?;
            Ok((format!("wrote {}\n", p.display()), EXIT_OK))
        }
        None => Ok((text, EXIT_OK)),
    }
}

fn cmd_bench(sizes: &str, runs: usize, seed: u64, out: Option<&Path>, save: Option<&Path>) -> Result<(String, i32)> {
    let configs = sizes
        .split(',')
        .map(|spec| {
            let [t, r, p] = parse_dims(spec)?;
            let c = GenConfig::new(t, r, p, seed);
            c.validate()?;
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(dir) = save {
        std::fs::create_dir_all(dir)?;
    }
    let report = run_benchmark_saving(&configs, runs, save);
    let mut csv = Vec::new();
    write_csv(&report.rows, &mut csv)?;
    let mut s = String::new();
    match out {
        Some(p) => {
            std::fs::write(p, &csv)?;
            let _ = writeln!(s, "wrote {} rows to {}", report.rows.len(), p.display());
        }
        None => s.push_str(&String::from_utf8_lossy(&csv)),
    }
    let counts: Vec<f64> = report.rows.iter().map(|r| r.allocation_count as f64).collect();
    let times: Vec<f64> = report.rows.iter().map(|r| r.solve_ms).collect();
    let _ = writeln!(s, "spearman(count, time): {:.4}", spearman(&counts, &times));
    for f in &report.failures {
        let _ = writeln!(s, "failed: {}x{}x{} seed {}: {}", f.n_tasks, f.n_requesters, f.n_performers, f.seed, f.error);
    }
    Ok((s, if report.failures.is_empty() { EXIT_OK } else { EXIT_FAIL }))
}
