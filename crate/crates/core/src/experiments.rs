//! Batch evaluation of the four methods over generated instances.
//!
//! For each (method, house size) the harness reports the share of nodes
//! violating lower and upper quota, and the mean and maximum absolute
//! deviation of seat counts from the strict quota `R_i · h`. Counts and
//! deviations are accumulated exactly; division happens once, when a rate or
//! mean is read off a row. Columns that a method provably keeps at zero are
//! checked rather than trusted: a nonzero value aborts the run.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generator::{self, GeneratorError, Seed, TreeFamily, DEFAULT_MAX_WEIGHT};
use crate::instance::{Instance, NodeId};
use crate::methods::{MethodError, MethodKind, SeatAllocator, TieBreak};
use crate::quota::{QuotaChecker, QuotaMode};
use crate::rational::Rational;

pub const DEFAULT_INSTANCE_COUNT: u64 = 1_000;

fn default_house_sizes() -> Vec<u64> {
    vec![100, 500]
}

fn default_methods() -> Vec<MethodKind> {
    MethodKind::ALL.to_vec()
}

fn default_instance_count() -> u64 {
    DEFAULT_INSTANCE_COUNT
}

fn default_max_weight() -> u64 {
    DEFAULT_MAX_WEIGHT
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: TreeFamily,
    #[serde(default = "default_instance_count")]
    pub instance_count: u64,
    /// Instance `k` is generated from `base_seed + k`.
    #[serde(default)]
    pub base_seed: Seed,
    #[serde(default = "default_house_sizes")]
    pub house_sizes: Vec<u64>,
    #[serde(default = "default_methods")]
    pub methods: Vec<MethodKind>,
    #[serde(default = "default_max_weight")]
    pub max_weight: u64,
    #[serde(default)]
    pub mode: QuotaMode,
}

impl ExperimentConfig {
    pub fn new(family: TreeFamily) -> ExperimentConfig {
        ExperimentConfig {
            family,
            instance_count: DEFAULT_INSTANCE_COUNT,
            base_seed: Seed(0),
            house_sizes: default_house_sizes(),
            methods: default_methods(),
            max_weight: DEFAULT_MAX_WEIGHT,
            mode: QuotaMode::AllAncestors,
        }
    }

    pub fn from_json(text: &str) -> Result<ExperimentConfig, ExperimentError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.instance_count == 0 {
            return Err(ExperimentError::InvalidConfig("instance_count must be at least 1".into()));
        }
        if self.house_sizes.contains(&0) {
            return Err(ExperimentError::InvalidConfig("house sizes must be at least 1".into()));
        }
        if self.max_weight == 0 {
            return Err(ExperimentError::InvalidConfig("max_weight must be at least 1".into()));
        }
        generator::build_tree(self.family)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExperimentError {
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Method(#[from] MethodError),
    #[error("{method} produced {count} {column} violation(s) at h={h} on instance seed {seed}; this column must be zero")]
    GuaranteeBroken { method: MethodKind, column: &'static str, count: u64, h: u64, seed: u64 },
}

/// Metrics for one method on one instance at one house size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceMetrics {
    pub method: MethodKind,
    pub n: usize,
    pub h: u64,
    pub lower_violations: u64,
    pub upper_violations: u64,
    /// Sum over nodes of `|V_i - R_i·h|`.
    pub deviation_sum: Rational,
    pub max_deviation: Rational,
}

impl InstanceMetrics {
    pub fn avg_deviation(&self) -> Rational {
        &self.deviation_sum / &Rational::from(self.n)
    }
}

fn metrics_for(inst: &Instance, checker: &QuotaChecker, method: MethodKind, seats: &[u64], h: u64) -> InstanceMetrics {
    let (lower, upper) = checker.count_violations(seats);
    let house = Rational::from(h);
    let mut deviation_sum = Rational::ZERO;
    let mut max_deviation = Rational::ZERO;
    for (i, &v) in seats.iter().enumerate() {
        let share = inst.relative_entitlement(NodeId(i)) * &house;
        let dev = (&Rational::from(v) - &share).abs();
        deviation_sum += &dev;
        if dev > max_deviation {
            max_deviation = dev;
        }
    }
    InstanceMetrics {
        method,
        n: inst.len(),
        h,
        lower_violations: lower as u64,
        upper_violations: upper as u64,
        deviation_sum,
        max_deviation,
    }
}

/// Runs `method` up to `h` seats and measures the result.
pub fn evaluate_instance(inst: &Instance, method: MethodKind, h: u64) -> Result<InstanceMetrics, ExperimentError> {
    Ok(evaluate_instance_at(inst, method, &[h], QuotaMode::AllAncestors)?.remove(0))
}

/// One run of `method` measured at each of `houses` (any order); results
/// follow the order of `houses`.
pub fn evaluate_instance_at(
    inst: &Instance,
    method: MethodKind,
    houses: &[u64],
    mode: QuotaMode,
) -> Result<Vec<InstanceMetrics>, ExperimentError> {
    let checker = QuotaChecker::new(inst, mode);
    let mut order: Vec<usize> = (0..houses.len()).collect();
    order.sort_by_key(|&k| houses[k]);
    let mut runner = SeatAllocator::new(inst, method, TieBreak::LowestIndex);
    let mut out: Vec<Option<InstanceMetrics>> = vec![None; houses.len()];
    for k in order {
        let alloc = runner.advance_to(houses[k])?;
        out[k] = Some(metrics_for(inst, &checker, method, &alloc.seats, houses[k]));
    }
    Ok(out.into_iter().map(|m| m.expect("every house measured")).collect())
}

fn guaranteed_zero(m: &InstanceMetrics) -> Option<(&'static str, u64)> {
    match m.method {
        MethodKind::Adams | MethodKind::UcQuota if m.upper_violations > 0 => Some(("upper quota", m.upper_violations)),
        MethodKind::Jefferson | MethodKind::Quota if m.lower_violations > 0 => Some(("lower quota", m.lower_violations)),
        _ => None,
    }
}

/// Aggregated results for one (method, family, house size).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricsRow {
    pub method: MethodKind,
    pub family: TreeFamily,
    pub n: usize,
    pub h: u64,
    pub instances: u64,
    pub lower_violations: u64,
    pub upper_violations: u64,
    pub deviation_sum: Rational,
    /// Sum over instances of each instance's largest node deviation.
    pub max_deviation_sum: Rational,
}

impl MetricsRow {
    fn empty(method: MethodKind, family: TreeFamily, n: usize, h: u64) -> MetricsRow {
        MetricsRow {
            method,
            family,
            n,
            h,
            instances: 0,
            lower_violations: 0,
            upper_violations: 0,
            deviation_sum: Rational::ZERO,
            max_deviation_sum: Rational::ZERO,
        }
    }

    fn add(&mut self, m: &InstanceMetrics) {
        self.instances += 1;
        self.lower_violations += m.lower_violations;
        self.upper_violations += m.upper_violations;
        self.deviation_sum += &m.deviation_sum;
        self.max_deviation_sum += &m.max_deviation;
    }

    fn node_samples(&self) -> Rational {
        Rational::from(self.n as u64 * self.instances)
    }

    /// Percentage of nodes below their lower quota, averaged over instances.
    pub fn lower_violation_rate_pct(&self) -> Rational {
        Rational::from(100 * self.lower_violations) / self.node_samples()
    }

    pub fn upper_violation_rate_pct(&self) -> Rational {
        Rational::from(100 * self.upper_violations) / self.node_samples()
    }

    /// Mean of `|V_i - R_i·h|` over all nodes of all instances.
    pub fn avg_deviation(&self) -> Rational {
        &self.deviation_sum / &self.node_samples()
    }

    /// Mean over instances of the per-instance maximum deviation.
    pub fn max_deviation(&self) -> Rational {
        &self.max_deviation_sum / &Rational::from(self.instances)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
}

impl MetricsTable {
    pub fn row(&self, method: MethodKind, family: TreeFamily, h: u64) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.method == method && r.family == family && r.h == h)
    }

    pub fn extend(&mut self, other: MetricsTable) {
        self.rows.extend(other.rows);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<MetricsTable, ExperimentError> {
    run_experiment_with(config, Execution::Parallel)
}

pub fn run_experiment_with(config: &ExperimentConfig, execution: Execution) -> Result<MetricsTable, ExperimentError> {
    config.validate()?;
    let skeleton = generator::build_tree(config.family)?;
    let evaluate = |k: u64| -> Result<Vec<InstanceMetrics>, ExperimentError> {
        let seed = config.base_seed.offset(k);
        let inst = generator::assign_entitlements(&skeleton, seed, config.max_weight)?;
        let mut out = Vec::with_capacity(config.methods.len() * config.house_sizes.len());
        for &method in &config.methods {
            for m in evaluate_instance_at(&inst, method, &config.house_sizes, config.mode)? {
                if let Some((column, count)) = guaranteed_zero(&m) {
                    return Err(ExperimentError::GuaranteeBroken { method, column, count, h: m.h, seed: seed.0 });
                }
                out.push(m);
            }
        }
        Ok(out)
    };
    let per_instance: Vec<Vec<InstanceMetrics>> = match execution {
        Execution::Serial => (0..config.instance_count).map(evaluate).collect::<Result<_, _>>()?,
        Execution::Parallel => (0..config.instance_count).into_par_iter().map(evaluate).collect::<Result<_, _>>()?,
    };

    let n = skeleton.len();
    let mut rows: Vec<MetricsRow> = config
        .methods
        .iter()
        .flat_map(|&m| config.house_sizes.iter().map(move |&h| (m, h)))
        .map(|(m, h)| MetricsRow::empty(m, config.family, n, h))
        .collect();
    for metrics in &per_instance {
        for (row, m) in rows.iter_mut().zip(metrics) {
            row.add(m);
        }
    }
    Ok(MetricsTable { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TableFormat {
    #[default]
    Csv,
    Markdown,
}

pub const CSV_HEADER: [&str; 9] =
    ["method", "family", "height", "n", "h", "lq_violation_rate_pct", "uq_violation_rate_pct", "avg_deviation", "max_deviation"];

const DECIMALS: u32 = 4;

fn row_fields(row: &MetricsRow) -> [String; 9] {
    [
        row.method.name().to_string(),
        row.family.kind.name().to_string(),
        row.family.height.to_string(),
        row.n.to_string(),
        row.h.to_string(),
        row.lower_violation_rate_pct().to_fixed(DECIMALS),
        row.upper_violation_rate_pct().to_fixed(DECIMALS),
        row.avg_deviation().to_fixed(DECIMALS),
        row.max_deviation().to_fixed(DECIMALS),
    ]
}

/// Renders a table. Every rate and deviation has four decimals.
pub fn emit_table(table: &MetricsTable, format: TableFormat) -> String {
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            out.push_str(&CSV_HEADER.join(","));
            out.push('\n');
            for row in &table.rows {
                out.push_str(&row_fields(row).join(","));
                out.push('\n');
            }
        }
        TableFormat::Markdown => {
            let _ = writeln!(out, "| {} |", CSV_HEADER.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(CSV_HEADER.len()));
            for row in &table.rows {
                let mut fields = row_fields(row);
                fields[0] = row.method.label().to_string();
                let _ = writeln!(out, "| {} |", fields.join(" | "));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::generator::FamilyKind;

    #[test]
    fn quota_counterexample_has_one_upper_violation() {
        let m = evaluate_instance(&fixtures::lopsided_two_level(), MethodKind::Quota, 5).unwrap();
        assert_eq!((m.lower_violations, m.upper_violations), (0, 1));
    }

    #[test]
    fn uc_quota_counterexample_has_one_lower_violation() {
        let m = evaluate_instance(&fixtures::lopsided_three_level(), MethodKind::UcQuota, 5).unwrap();
        assert_eq!((m.lower_violations, m.upper_violations), (1, 0));
    }

    #[test]
    fn singleton_metrics_vanish() {
        for method in MethodKind::ALL {
            let m = evaluate_instance(&Instance::singleton(), method, 13).unwrap();
            assert_eq!((m.lower_violations, m.upper_violations), (0, 0));
            assert!(m.deviation_sum.is_zero() && m.max_deviation.is_zero());
        }
    }

    #[test]
    fn deviations_on_two_level_example() {
        // Adams gives (6;2,1,2,1;3,3); leaf shares are 3/2 so each leaf is off by 1/2
        let m = evaluate_instance(&fixtures::paired_halves(), MethodKind::Adams, 6).unwrap();
        assert_eq!(m.deviation_sum, Rational::from(2u64));
        assert_eq!(m.max_deviation, Rational::new(1, 2));
        assert_eq!(m.avg_deviation(), Rational::new(2, 7));
    }

    #[test]
    fn houses_can_be_given_in_any_order() {
        let inst = fixtures::lopsided_three_level();
        let both = evaluate_instance_at(&inst, MethodKind::Jefferson, &[9, 4], QuotaMode::AllAncestors).unwrap();
        assert_eq!(both[0], evaluate_instance(&inst, MethodKind::Jefferson, 9).unwrap());
        assert_eq!(both[1], evaluate_instance(&inst, MethodKind::Jefferson, 4).unwrap());
    }

    #[test]
    fn single_instance_table_equals_its_metrics() {
        let family = TreeFamily::new(FamilyKind::PerfectBinary, 3);
        let mut cfg = ExperimentConfig::new(family);
        cfg.instance_count = 1;
        cfg.base_seed = Seed(77);
        cfg.house_sizes = vec![100];
        let table = run_experiment(&cfg).unwrap();
        let inst = generator::generate(family, Seed(77), 10).unwrap();
        for method in MethodKind::ALL {
            let m = evaluate_instance(&inst, method, 100).unwrap();
            let row = table.row(method, family, 100).unwrap();
            assert_eq!(row.instances, 1);
            assert_eq!(row.lower_violations, m.lower_violations);
            assert_eq!(row.upper_violations, m.upper_violations);
            assert_eq!(row.deviation_sum, m.deviation_sum);
            assert_eq!(row.max_deviation(), m.max_deviation);
        }
    }

    #[test]
    fn config_validation() {
        let family = TreeFamily::new(FamilyKind::Full4Ary, 3);
        let mut cfg = ExperimentConfig::new(family);
        cfg.instance_count = 0;
        assert!(matches!(cfg.validate(), Err(ExperimentError::InvalidConfig(_))));
        let mut cfg = ExperimentConfig::new(family);
        cfg.house_sizes = vec![100, 0];
        assert!(matches!(cfg.validate(), Err(ExperimentError::InvalidConfig(_))));
        let cfg = ExperimentConfig::new(TreeFamily::new(FamilyKind::Full4Ary, 40));
        assert!(matches!(cfg.validate(), Err(ExperimentError::Generator(_))));
    }

    #[test]
    fn config_json_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"family": {"kind": "full-4ary", "height": 3}, "instance_count": 5}"#).unwrap();
        assert_eq!(cfg.house_sizes, vec![100, 500]);
        assert_eq!(cfg.methods, MethodKind::ALL.to_vec());
        assert_eq!(cfg.base_seed, Seed(0));
        assert!(ExperimentConfig::from_json(r#"{"family": {"kind": "full-4ary", "height": 3}, "bogus": 1}"#).is_err());
    }

    #[test]
    fn empty_method_list_gives_header_only() {
        let mut cfg = ExperimentConfig::new(TreeFamily::new(FamilyKind::PerfectBinary, 3));
        cfg.methods.clear();
        cfg.instance_count = 2;
        let table = run_experiment(&cfg).unwrap();
        assert!(table.rows.is_empty());
        assert_eq!(emit_table(&table, TableFormat::Csv), format!("{}\n", CSV_HEADER.join(",")));
        assert_eq!(emit_table(&table, TableFormat::Markdown).lines().count(), 2);
    }

    #[test]
    fn one_row_formats_four_decimals() {
        let family = TreeFamily::new(FamilyKind::PerfectBinary, 3);
        let mut row = MetricsRow::empty(MethodKind::Adams, family, 15, 100);
        row.instances = 3;
        row.lower_violations = 1;
        row.deviation_sum = Rational::new(45, 2);
        row.max_deviation_sum = Rational::new(5, 2);
        let csv = emit_table(&MetricsTable { rows: vec![row] }, TableFormat::Csv);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1], "adams,binary,3,15,100,2.2222,0.0000,0.5000,0.8333");
    }
}
