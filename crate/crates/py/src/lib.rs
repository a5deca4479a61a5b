//! Python bindings. Rationals cross the boundary as `"p/q"` strings and
//! allocations as plain lists of seat counts indexed by node id.

use std::fmt::Display;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use mlapportion::existence::{allocate_both_quotas as both_quotas, brute_force_both_quotas, to_full_binary};
use mlapportion::experiments::{emit_table, run_experiment_with, Execution, ExperimentConfig, TableFormat};
use mlapportion::generator::{self, FamilyKind, Seed, TreeFamily, DEFAULT_MAX_WEIGHT};
use mlapportion::methods::{self, MethodKind, TieBreak};
use mlapportion::quota::{check_allocation, QuotaMode};
use mlapportion::{instance, Allocation, Instance, NodeId};

fn value_error(e: impl Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_method(name: &str) -> PyResult<MethodKind> {
    name.parse().map_err(value_error)
}

fn parse_mode(name: &str) -> PyResult<QuotaMode> {
    match name {
        "all" => Ok(QuotaMode::AllAncestors),
        "root" => Ok(QuotaMode::RootOnly),
        _ => Err(PyValueError::new_err(format!("unknown quota mode {name:?} (expected all or root)"))),
    }
}

/// A validated entitlement tree.
#[pyclass(name = "Instance", module = "mlapportion", frozen)]
struct PyInstance {
    inner: Instance,
}

impl PyInstance {
    fn node(&self, i: usize) -> PyResult<NodeId> {
        if i < self.inner.len() {
            Ok(NodeId(i))
        } else {
            Err(PyValueError::new_err(format!("node {i} out of range (instance has {} nodes)", self.inner.len())))
        }
    }
}

#[pymethods]
impl PyInstance {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyInstance { inner: Instance::from_json(text).map_err(value_error)? })
    }

    /// Builds an instance from parent ids (`None` for the root) and weight strings.
    #[staticmethod]
    fn from_parents(parents: Vec<Option<usize>>, weights: Vec<String>) -> PyResult<Self> {
        if parents.len() != weights.len() {
            return Err(PyValueError::new_err("parents and weights must have the same length"));
        }
        let raw = instance::RawInstance {
            nodes: parents
                .into_iter()
                .zip(weights)
                .enumerate()
                .map(|(id, (parent, weight))| instance::RawNode { id, parent, weight })
                .collect(),
        };
        Ok(PyInstance { inner: raw.validate().map_err(value_error)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Instance(nodes={}, height={})", self.inner.len(), self.inner.height())
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    fn parent(&self, i: usize) -> PyResult<Option<usize>> {
        Ok(self.inner.parent(self.node(i)?).map(NodeId::index))
    }

    fn children(&self, i: usize) -> PyResult<Vec<usize>> {
        Ok(self.inner.children(self.node(i)?).iter().map(|c| c.index()).collect())
    }

    fn weight(&self, i: usize) -> PyResult<String> {
        Ok(self.inner.weight(self.node(i)?).to_string())
    }

    /// Entitlement relative to the root, as an exact `"p/q"` string.
    fn relative_entitlement(&self, i: usize) -> PyResult<String> {
        Ok(self.inner.relative_entitlement(self.node(i)?).to_string())
    }

    fn strict_quota(&self, i: usize, seats: u64) -> PyResult<String> {
        Ok(instance::strict_quota(&self.inner, self.node(i)?, seats).to_string())
    }
}

/// Result of checking an allocation against every node's quotas.
#[pyclass(name = "QuotaReport", module = "mlapportion", frozen, get_all)]
struct PyQuotaReport {
    lower: Vec<u64>,
    upper: Vec<u64>,
    lower_violators: Vec<usize>,
    upper_violators: Vec<usize>,
    /// `(node, seats, expected)` for every node whose seats do not add up.
    flow_violations: Vec<(usize, u64, u64)>,
    compliant: bool,
}

#[pymethods]
impl PyQuotaReport {
    fn __repr__(&self) -> String {
        format!(
            "QuotaReport(lower_violators={:?}, upper_violators={:?}, flow_violations={:?})",
            self.lower_violators, self.upper_violators, self.flow_violations
        )
    }
}

/// Seats per node after allocating `seats` seats with one of the iterative methods.
#[pyfunction]
fn allocate(inst: &PyInstance, method: &str, seats: u64) -> PyResult<Vec<u64>> {
    let a = methods::allocate(&inst.inner, parse_method(method)?, seats, TieBreak::LowestIndex).map_err(value_error)?;
    Ok(a.seats)
}

/// Every allocation from 0 seats up to `seats`.
#[pyfunction]
fn trajectory(inst: &PyInstance, method: &str, seats: u64) -> PyResult<Vec<Vec<u64>>> {
    let t = methods::run_method(&inst.inner, parse_method(method)?, seats, TieBreak::LowestIndex).map_err(value_error)?;
    Ok(t.allocations)
}

/// Checks per-node seat counts; the house size is the root's count.
#[pyfunction]
#[pyo3(signature = (inst, seats, mode = "all"))]
fn check(inst: &PyInstance, seats: Vec<u64>, mode: &str) -> PyResult<PyQuotaReport> {
    let h = seats.first().copied().unwrap_or(0);
    let alloc = Allocation::new(h, seats);
    let r = check_allocation(&inst.inner, &alloc, parse_mode(mode)?).map_err(value_error)?;
    Ok(PyQuotaReport {
        lower: r.bounds.iter().map(|b| b.lower).collect(),
        upper: r.bounds.iter().map(|b| b.upper).collect(),
        lower_violators: r.lower_violators().into_iter().map(NodeId::index).collect(),
        upper_violators: r.upper_violators().into_iter().map(NodeId::index).collect(),
        flow_violations: r.flow_violations.iter().map(|f| (f.node.index(), f.seats, f.expected)).collect(),
        compliant: r.is_compliant(),
    })
}

/// An allocation within both quotas everywhere. Not house monotone.
#[pyfunction]
fn allocate_both_quotas(inst: &PyInstance, seats: u64) -> PyResult<Vec<u64>> {
    Ok(both_quotas(&inst.inner, seats).map_err(value_error)?.seats)
}

/// All allocations within both quotas, by exhaustive search (small inputs only).
#[pyfunction]
fn oracle(inst: &PyInstance, seats: u64) -> PyResult<Vec<Vec<u64>>> {
    Ok(brute_force_both_quotas(&inst.inner, seats).map_err(value_error)?.into_iter().map(|a| a.seats).collect())
}

/// The equivalent full binary tree and where each original node went.
#[pyfunction]
fn reduce(inst: &PyInstance) -> (PyInstance, Vec<usize>) {
    let r = to_full_binary(&inst.inner);
    (PyInstance { inner: r.reduced }, r.forward_map.into_iter().map(NodeId::index).collect())
}

#[pyfunction]
#[pyo3(signature = (family, height, seed = 0, max_weight = DEFAULT_MAX_WEIGHT))]
fn generate(family: &str, height: u32, seed: u64, max_weight: u64) -> PyResult<PyInstance> {
    let kind: FamilyKind = family.parse().map_err(value_error)?;
    let inner = generator::generate(TreeFamily::new(kind, height), Seed(seed), max_weight).map_err(value_error)?;
    Ok(PyInstance { inner })
}

/// Runs a seeded batch and returns the metrics table as CSV (or markdown).
#[pyfunction]
#[pyo3(signature = (family, height, instances = 1000, seed = 0, houses = None, methods = None, mode = "all", out = "csv", serial = false))]
#[allow(clippy::too_many_arguments)]
fn run_experiment(
    py: Python<'_>,
    family: &str,
    height: u32,
    instances: u64,
    seed: u64,
    houses: Option<Vec<u64>>,
    methods: Option<Vec<String>>,
    mode: &str,
    out: &str,
    serial: bool,
) -> PyResult<String> {
    let kind: FamilyKind = family.parse().map_err(value_error)?;
    let mut cfg = ExperimentConfig::new(TreeFamily::new(kind, height));
    cfg.instance_count = instances;
    cfg.base_seed = Seed(seed);
    if let Some(hs) = houses {
        cfg.house_sizes = hs;
    }
    if let Some(ms) = methods {
        cfg.methods = ms.iter().map(|m| parse_method(m)).collect::<PyResult<_>>()?;
    }
    cfg.mode = parse_mode(mode)?;
    let format = match out {
        "csv" => TableFormat::Csv,
        "md" => TableFormat::Markdown,
        _ => return Err(PyValueError::new_err(format!("unknown output format {out:?} (expected csv or md)"))),
    };
    let execution = if serial { Execution::Serial } else { Execution::Parallel };
    let table = py.detach(|| run_experiment_with(&cfg, execution)).map_err(value_error)?;
    Ok(emit_table(&table, format))
}

#[pymodule]
#[pyo3(name = "mlapportion")]
fn mlapportion_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_class::<PyQuotaReport>()?;
    m.add_function(wrap_pyfunction!(allocate, m)?)?;
    m.add_function(wrap_pyfunction!(trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(allocate_both_quotas, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(reduce, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
