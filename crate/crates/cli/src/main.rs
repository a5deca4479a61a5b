use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use mlapportion::existence::{allocate_both_quotas, brute_force_both_quotas, to_full_binary};
use mlapportion::experiments::{emit_table, run_experiment_with, Execution, ExperimentConfig, TableFormat};
use mlapportion::generator::{generate, FamilyKind, Seed, TreeFamily, DEFAULT_MAX_WEIGHT};
use mlapportion::methods::{allocate, run_method, MethodKind, TieBreak};
use mlapportion::quota::{check_allocation, QuotaMode};
use mlapportion::{Allocation, Instance, RawInstance};

#[derive(Parser)]
#[command(name = "mlapportion", version, about = "Multi-level apportionment of seats down an entitlement tree")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that an instance file describes a valid entitlement tree.
    Validate { instance: PathBuf },
    /// Allocate a house of seats with one of the methods.
    Allocate {
        instance: PathBuf,
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long)]
        seats: u64,
        /// Print every allocation from 0 seats up to the house size.
        #[arg(long)]
        trajectory: bool,
    },
    /// Check an allocation against every node's lower and upper quota.
    Check {
        instance: PathBuf,
        allocation: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::All)]
        mode: ModeArg,
        /// Exit with status 1 if any quota is violated.
        #[arg(long)]
        strict: bool,
    },
    /// Reduce an instance to an equivalent full binary tree.
    Reduce { instance: PathBuf },
    /// Generate a random instance from a tree family.
    Generate {
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long)]
        height: u32,
        #[arg(long, env = "MLAPPORTION_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_MAX_WEIGHT)]
        max_weight: u64,
    },
    /// Run a batch of seeded instances and print aggregated metrics.
    Experiment {
        /// Experiment config as JSON. Flags given alongside override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        family: Option<FamilyArg>,
        #[arg(long)]
        height: Option<u32>,
        #[arg(long)]
        instances: Option<u64>,
        #[arg(long, env = "MLAPPORTION_SEED")]
        seed: Option<u64>,
        /// Comma-separated house sizes.
        #[arg(long, value_delimiter = ',')]
        houses: Option<Vec<u64>>,
        /// Comma-separated methods.
        #[arg(long, value_delimiter = ',', value_enum)]
        methods: Option<Vec<IterativeMethodArg>>,
        #[arg(long, value_enum, default_value_t = OutArg::Csv)]
        out: OutArg,
        /// Run on a single thread.
        #[arg(long)]
        serial: bool,
    },
    /// List every allocation within both quotas (small instances only).
    Oracle {
        instance: PathBuf,
        #[arg(long)]
        seats: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Adams,
    Jefferson,
    Quota,
    Ucquota,
    BothQuotas,
}

#[derive(Clone, Copy, ValueEnum)]
enum IterativeMethodArg {
    Adams,
    Jefferson,
    Quota,
    Ucquota,
}

impl From<IterativeMethodArg> for MethodKind {
    fn from(m: IterativeMethodArg) -> MethodKind {
        match m {
            IterativeMethodArg::Adams => MethodKind::Adams,
            IterativeMethodArg::Jefferson => MethodKind::Jefferson,
            IterativeMethodArg::Quota => MethodKind::Quota,
            IterativeMethodArg::Ucquota => MethodKind::UcQuota,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    All,
    Root,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Binary,
    #[value(name = "4ary")]
    FourAry,
}

impl From<FamilyArg> for FamilyKind {
    fn from(f: FamilyArg) -> FamilyKind {
        match f {
            FamilyArg::Binary => FamilyKind::PerfectBinary,
            FamilyArg::FourAry => FamilyKind::Full4Ary,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OutArg {
    Csv,
    Md,
}

/// Outcome of a subcommand that ran to completion.
enum Outcome {
    Ok,
    /// The command worked but found a problem that should fail the exit code.
    Failed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_instance(path: &Path) -> Result<Instance> {
    let text = read(path)?;
    Instance::from_json(&text).with_context(|| format!("{}", path.display()))
}

fn run(command: Command) -> Result<Outcome> {
    match command {
        Command::Validate { instance } => validate(&instance),
        Command::Allocate { instance, method, seats, trajectory } => {
            let inst = load_instance(&instance)?;
            let kind = match method {
                MethodArg::BothQuotas => {
                    if trajectory {
                        anyhow::bail!("--trajectory is not available for both-quotas: its allocations are not house monotone");
                    }
                    eprintln!("note: both-quotas allocations are not house monotone; results for different house sizes need not nest");
                    println!("{}", allocate_both_quotas(&inst, seats)?.to_json());
                    return Ok(Outcome::Ok);
                }
                MethodArg::Adams => MethodKind::Adams,
                MethodArg::Jefferson => MethodKind::Jefferson,
                MethodArg::Quota => MethodKind::Quota,
                MethodArg::Ucquota => MethodKind::UcQuota,
            };
            if trajectory {
                println!("{}", run_method(&inst, kind, seats, TieBreak::LowestIndex)?.to_json());
            } else {
                println!("{}", allocate(&inst, kind, seats, TieBreak::LowestIndex)?.to_json());
            }
            Ok(Outcome::Ok)
        }
        Command::Check { instance, allocation, mode, strict } => {
            let inst = load_instance(&instance)?;
            let alloc = Allocation::from_json(&read(&allocation)?).with_context(|| format!("malformed JSON in {}", allocation.display()))?;
            let mode = match mode {
                ModeArg::All => QuotaMode::AllAncestors,
                ModeArg::Root => QuotaMode::RootOnly,
            };
            check(&inst, &alloc, mode, strict)
        }
        Command::Reduce { instance } => {
            let inst = load_instance(&instance)?;
            println!("{}", to_full_binary(&inst).to_json());
            Ok(Outcome::Ok)
        }
        Command::Generate { family, height, seed, max_weight } => {
            let inst = generate(TreeFamily::new(family.into(), height), Seed(seed), max_weight)?;
            println!("{}", inst.to_json());
            Ok(Outcome::Ok)
        }
        Command::Experiment { config, family, height, instances, seed, houses, methods, out, serial } => {
            let mut cfg = match &config {
                Some(path) => ExperimentConfig::from_json(&read(path)?).with_context(|| format!("{}", path.display()))?,
                None => {
                    let (Some(family), Some(height)) = (family, height) else {
                        anyhow::bail!("experiment needs --config or both --family and --height");
                    };
                    ExperimentConfig::new(TreeFamily::new(family.into(), height))
                }
            };
            if let Some(f) = family {
                cfg.family.kind = f.into();
            }
            if let Some(h) = height {
                cfg.family.height = h;
            }
            if let Some(k) = instances {
                cfg.instance_count = k;
            }
            if let Some(s) = seed {
                cfg.base_seed = Seed(s);
            }
            if let Some(hs) = houses {
                cfg.house_sizes = hs;
            }
            if let Some(ms) = methods {
                cfg.methods = ms.into_iter().map(MethodKind::from).collect();
            }
            cfg.validate()?;
            let execution = if serial { Execution::Serial } else { Execution::Parallel };
            let table = run_experiment_with(&cfg, execution)?;
            let format = match out {
                OutArg::Csv => TableFormat::Csv,
                OutArg::Md => TableFormat::Markdown,
            };
            print!("{}", emit_table(&table, format));
            Ok(Outcome::Ok)
        }
        Command::Oracle { instance, seats } => {
            let inst = load_instance(&instance)?;
            let all = brute_force_both_quotas(&inst, seats)?;
            for a in &all {
                println!("{}", a.to_json());
            }
            eprintln!("{} allocation(s) within both quotas", all.len());
            Ok(Outcome::Ok)
        }
    }
}

fn validate(path: &Path) -> Result<Outcome> {
    let text = read(path)?;
    let raw = RawInstance::from_json(&text).with_context(|| format!("malformed JSON in {}", path.display()))?;
    match raw.validate() {
        Ok(inst) => {
            println!("ok: {} nodes, height {}", inst.len(), inst.height());
            Ok(Outcome::Ok)
        }
        Err(errors) => {
            for e in &errors.0 {
                eprintln!("{:?}: {e}", Variant(e));
            }
            Ok(Outcome::Failed)
        }
    }
}

/// Prints just the variant name of an instance error.
struct Variant<'a>(&'a mlapportion::instance::InstanceError);

impl std::fmt::Debug for Variant<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let full = format!("{:?}", self.0);
        let end = full.find([' ', '(', '{']).unwrap_or(full.len());
        f.write_str(&full[..end])
    }
}

fn check(inst: &Instance, alloc: &Allocation, mode: QuotaMode, strict: bool) -> Result<Outcome> {
    let report = check_allocation(inst, alloc, mode)?;
    let mut out = String::new();
    for fv in &report.flow_violations {
        writeln!(out, "node {}: holds {} seats but should hold {}", fv.node, fv.seats, fv.expected)?;
    }
    for (i, b) in report.bounds.iter().enumerate() {
        let v = alloc.seats[i];
        if report.lower_violated[i] {
            writeln!(out, "node {}: lower quota violated: {} < {} (w.r.t. node {})", b.node, v, b.lower, b.binding_lower_ancestor)?;
        }
        if report.upper_violated[i] {
            writeln!(out, "node {}: upper quota violated: {} > {} (w.r.t. node {})", b.node, v, b.upper, b.binding_upper_ancestor)?;
        }
    }
    writeln!(
        out,
        "{} lower, {} upper quota violation(s), {} flow violation(s)",
        report.lower_violation_count(),
        report.upper_violation_count(),
        report.flow_violations.len()
    )?;
    print!("{out}");
    if !report.is_flow_conserving() || (strict && !report.is_compliant()) {
        Ok(Outcome::Failed)
    } else {
        Ok(Outcome::Ok)
    }
}
