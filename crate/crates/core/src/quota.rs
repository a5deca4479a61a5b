//! Multi-ancestor quota bounds and allocation checking.
//!
//! For a node `i` and an ancestor `a`, the share of `i` implied by `a`'s
//! allocation is `e(i, a) = (R_i / R_a) · V_a`. The lower quota of `i` is the
//! largest `floor(e(i, a))` over its ancestors and the upper quota the smallest
//! `ceil(e(i, a))`. The root's only ancestor is itself.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Allocation, Instance, NodeId};
use crate::rational::Rational;

/// Which ancestors a node's quotas are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuotaMode {
    #[default]
    AllAncestors,
    /// Only the root: bounds collapse to `floor(R_i·h)` and `ceil(R_i·h)`.
    RootOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotaBounds {
    pub node: NodeId,
    pub lower: u64,
    pub upper: u64,
    /// Ancestor attaining the lower quota (the one nearest the root on ties).
    pub binding_lower_ancestor: NodeId,
    /// Ancestor attaining the upper quota (the one nearest the root on ties).
    pub binding_upper_ancestor: NodeId,
}

/// A node whose seat count disagrees with the sum over its children, or a
/// root that does not hold the whole house.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowViolation {
    pub node: NodeId,
    pub seats: u64,
    pub expected: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotaReport {
    pub mode: QuotaMode,
    pub bounds: Vec<QuotaBounds>,
    pub lower_violated: Vec<bool>,
    pub upper_violated: Vec<bool>,
    pub flow_violations: Vec<FlowViolation>,
}

impl QuotaReport {
    pub fn lower_violation_count(&self) -> usize {
        self.lower_violated.iter().filter(|v| **v).count()
    }

    pub fn upper_violation_count(&self) -> usize {
        self.upper_violated.iter().filter(|v| **v).count()
    }

    pub fn lower_violators(&self) -> Vec<NodeId> {
        flagged(&self.lower_violated)
    }

    pub fn upper_violators(&self) -> Vec<NodeId> {
        flagged(&self.upper_violated)
    }

    pub fn is_flow_conserving(&self) -> bool {
        self.flow_violations.is_empty()
    }

    /// Flow-conserving and within both quotas everywhere.
    pub fn is_compliant(&self) -> bool {
        self.is_flow_conserving() && self.lower_violation_count() == 0 && self.upper_violation_count() == 0
    }
}

fn flagged(flags: &[bool]) -> Vec<NodeId> {
    flags.iter().enumerate().filter(|(_, v)| **v).map(|(i, _)| NodeId(i)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("allocation has {found} seat entries but the instance has {expected} nodes")]
    LengthMismatch { expected: usize, found: usize },
}

/// Precomputed `R_i / R_a` ratios for repeated checking against one instance.
#[derive(Debug, Clone)]
pub struct QuotaChecker {
    mode: QuotaMode,
    // per node: (ancestor, R_i / R_a), ordered from the root down
    ratios: Vec<Vec<(NodeId, Rational)>>,
}

impl QuotaChecker {
    pub fn new(inst: &Instance, mode: QuotaMode) -> QuotaChecker {
        let mut ratios: Vec<Vec<(NodeId, Rational)>> = vec![Vec::new(); inst.len()];
        for &i in inst.top_down() {
            let entry = match (inst.parent(i), mode) {
                (None, _) => vec![(NodeId::ROOT, Rational::ONE)],
                (Some(_), QuotaMode::RootOnly) => vec![(NodeId::ROOT, inst.relative_entitlement(i).clone())],
                (Some(p), QuotaMode::AllAncestors) => {
                    // ratios to the parent's ancestors scale by W_i; the parent itself contributes W_i
                    let w = inst.weight(i);
                    let mut v: Vec<(NodeId, Rational)> = if p.is_root() {
                        Vec::new()
                    } else {
                        ratios[p.index()].iter().map(|(a, r)| (*a, r * w)).collect()
                    };
                    v.push((p, w.clone()));
                    v
                }
            };
            ratios[i.index()] = entry;
        }
        QuotaChecker { mode, ratios }
    }

    pub fn mode(&self) -> QuotaMode {
        self.mode
    }

    /// Bounds for `i`, reading ancestor seat counts from `seats`. Entries
    /// for nodes outside the ancestor set are ignored.
    pub fn bounds(&self, i: NodeId, seats: &[u64]) -> QuotaBounds {
        let mut lower = 0;
        let mut upper = u64::MAX;
        let mut lower_at = NodeId::ROOT;
        let mut upper_at = NodeId::ROOT;
        // root first, so strict comparisons keep the root-most ancestor on ties
        for (k, (a, ratio)) in self.ratios[i.index()].iter().enumerate() {
            let v = seats[a.index()];
            let (lo, hi) = ratio.floor_ceil_scaled(v).expect("ratio to an ancestor lies in (0, 1]");
            if k == 0 || lo > lower {
                lower = lo;
                lower_at = *a;
            }
            if k == 0 || hi < upper {
                upper = hi;
                upper_at = *a;
            }
        }
        QuotaBounds { node: i, lower, upper, binding_lower_ancestor: lower_at, binding_upper_ancestor: upper_at }
    }

    /// The exact shares `e(i, a)` for every ancestor `a` of `i`, root first.
    pub fn shares<'s>(&'s self, i: NodeId, seats: &'s [u64]) -> impl Iterator<Item = (NodeId, Rational)> + 's {
        self.ratios[i.index()].iter().map(move |(a, ratio)| (*a, ratio * &Rational::from(seats[a.index()])))
    }

    /// `(lower violations, upper violations)` without building a report.
    pub fn count_violations(&self, seats: &[u64]) -> (usize, usize) {
        let mut lower = 0;
        let mut upper = 0;
        for (i, &v) in seats.iter().enumerate() {
            let b = self.bounds(NodeId(i), seats);
            lower += usize::from(v < b.lower);
            upper += usize::from(v > b.upper);
        }
        (lower, upper)
    }

    pub fn check(&self, inst: &Instance, alloc: &Allocation) -> Result<QuotaReport, CheckError> {
        if alloc.seats.len() != inst.len() || self.ratios.len() != inst.len() {
            return Err(CheckError::LengthMismatch { expected: inst.len(), found: alloc.seats.len() });
        }
        let seats = &alloc.seats;
        let bounds: Vec<QuotaBounds> = inst.nodes().map(|i| self.bounds(i, seats)).collect();
        let lower_violated = bounds.iter().map(|b| seats[b.node.index()] < b.lower).collect();
        let upper_violated = bounds.iter().map(|b| seats[b.node.index()] > b.upper).collect();
        Ok(QuotaReport { mode: self.mode, bounds, lower_violated, upper_violated, flow_violations: flow_violations(inst, alloc) })
    }
}

/// Every node where `V_i` differs from the sum over its children, plus the
/// root if `V_0 != h`.
pub fn flow_violations(inst: &Instance, alloc: &Allocation) -> Vec<FlowViolation> {
    let mut out = Vec::new();
    if alloc.seats[0] != alloc.h {
        out.push(FlowViolation { node: NodeId::ROOT, seats: alloc.seats[0], expected: alloc.h });
    }
    for i in inst.nodes() {
        let kids = inst.children(i);
        if kids.is_empty() {
            continue;
        }
        let sum: u64 = kids.iter().map(|c| alloc.seats(*c)).sum();
        if sum != alloc.seats(i) {
            out.push(FlowViolation { node: i, seats: alloc.seats(i), expected: sum });
        }
    }
    out
}

pub fn quota_bounds(inst: &Instance, alloc: &Allocation, i: NodeId, mode: QuotaMode) -> QuotaBounds {
    QuotaChecker::new(inst, mode).bounds(i, &alloc.seats)
}

/// Checks quotas for every node and re-verifies flow conservation. Flow
/// problems are reported in the result rather than returned as errors.
pub fn check_allocation(inst: &Instance, alloc: &Allocation, mode: QuotaMode) -> Result<QuotaReport, CheckError> {
    QuotaChecker::new(inst, mode).check(inst, alloc)
}
