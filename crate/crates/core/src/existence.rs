//! Allocations within both quotas.
//!
//! Any instance can be rewritten as a full binary tree without losing a
//! quota constraint: single-child chains collapse into one node, and a node
//! with more than two children keeps its first child and pushes the rest
//! under a new intermediate node whose weight is their combined weight.
//! On a full binary tree, seats are fixed top-down. Once every ancestor of a
//! sibling pair `x, y` is within both quotas, the largest and smallest
//! ancestor-implied shares of each child differ by less than one seat, so
//! `LQ_c <= UQ_c`, and `LQ_x + LQ_y <= V_i <= UQ_x + UQ_y`. A split of `V_i`
//! respecting both children's bounds therefore always exists.

use serde::Serialize;
use thiserror::Error;

use crate::instance::{Allocation, Instance, NodeId, RawInstance};
use crate::quota::{QuotaChecker, QuotaMode};
use crate::rational::Rational;

/// Largest instance the exhaustive oracle accepts.
pub const ORACLE_MAX_NODES: usize = 16;
/// Largest house the exhaustive oracle accepts.
pub const ORACLE_MAX_SEATS: u64 = 12;
/// Upper limit on complete flows the oracle will enumerate.
pub const ORACLE_MAX_FLOWS: u64 = 2_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExistenceError {
    #[error("no feasible seat count for node {node}: interval [{low}, {high}] is empty")]
    EmptyInterval { node: NodeId, low: i128, high: i128 },
    #[error("oracle size limit exceeded: {0}")]
    SizeLimitExceeded(String),
}

/// A full binary tree equivalent to some original instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryReduction {
    pub reduced: Instance,
    /// Reduced node for every original node. Merged chains share one entry.
    pub forward_map: Vec<NodeId>,
    /// Reduced ids of the intermediate nodes added while splitting.
    pub introduced: Vec<NodeId>,
}

#[derive(Serialize)]
struct ReductionFile<'a> {
    instance: RawInstance,
    forward_map: &'a [NodeId],
    introduced: Vec<IntroducedNode>,
}

#[derive(Serialize)]
struct IntroducedNode {
    id: NodeId,
    weight: String,
}

impl BinaryReduction {
    /// Original nodes that collapsed into reduced node `r`.
    pub fn preimage(&self, r: NodeId) -> Vec<NodeId> {
        self.forward_map.iter().enumerate().filter(|(_, m)| **m == r).map(|(i, _)| NodeId(i)).collect()
    }

    /// Copies reduced seat counts back onto the original nodes.
    pub fn map_back(&self, reduced: &Allocation) -> Allocation {
        Allocation::new(reduced.h, self.forward_map.iter().map(|r| reduced.seats(*r)).collect())
    }

    pub fn to_json(&self) -> String {
        let file = ReductionFile {
            instance: self.reduced.to_raw(),
            forward_map: &self.forward_map,
            introduced: self
                .introduced
                .iter()
                .map(|&id| IntroducedNode { id, weight: self.reduced.weight(id).to_string() })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("reduction serializes")
    }
}

struct ReducedBuilder {
    parent: Vec<Option<NodeId>>,
    children: Vec<Vec<NodeId>>,
    weight: Vec<Rational>,
    introduced: Vec<NodeId>,
}

impl ReducedBuilder {
    fn attach(&mut self, parent: NodeId, child: NodeId, weight: Rational) {
        self.parent[child.index()] = Some(parent);
        self.weight[child.index()] = weight;
        self.children[parent.index()].push(child);
    }

    fn fresh(&mut self) -> NodeId {
        let id = NodeId(self.parent.len());
        self.parent.push(None);
        self.children.push(Vec::new());
        self.weight.push(Rational::ONE);
        self.introduced.push(id);
        id
    }

    /// Hangs `kids` (reduced ids with weights relative to `parent`) under
    /// `parent`, two at a time: the first stays, the rest move under a new
    /// node and are rescaled by `1 / (1 - w_first)`.
    fn split(&mut self, parent: NodeId, kids: &[(NodeId, Rational)]) {
        match kids {
            [] => {}
            [only] => self.attach(parent, only.0, only.1.clone()),
            [a, b] => {
                self.attach(parent, a.0, a.1.clone());
                self.attach(parent, b.0, b.1.clone());
            }
            [(first, w_first), rest @ ..] => {
                self.attach(parent, *first, w_first.clone());
                let group = self.fresh();
                let group_weight = &Rational::ONE - w_first;
                self.attach(parent, group, group_weight.clone());
                let rescaled: Vec<(NodeId, Rational)> = rest.iter().map(|(c, w)| (*c, w / &group_weight)).collect();
                self.split(group, &rescaled);
            }
        }
    }
}

/// Rewrites `inst` as a full binary tree with the same relative
/// entitlements and ancestor relations.
///
/// Surviving nodes are the tops of single-child chains; they are renumbered
/// densely in original id order, and introduced nodes follow in creation
/// order. With no chains to merge, original ids are kept unchanged.
pub fn to_full_binary(inst: &Instance) -> BinaryReduction {
    let n = inst.len();
    // top of the single-child chain each node belongs to
    let mut chain_top: Vec<NodeId> = (0..n).map(NodeId).collect();
    for &i in inst.top_down() {
        if let Some(p) = inst.parent(i) {
            if inst.children(p).len() == 1 {
                chain_top[i.index()] = chain_top[p.index()];
            }
        }
    }
    let mut reduced_id = vec![None; n];
    let mut next = 0;
    for i in 0..n {
        if chain_top[i] == NodeId(i) {
            reduced_id[i] = Some(NodeId(next));
            next += 1;
        }
    }
    let forward_map: Vec<NodeId> = (0..n).map(|i| reduced_id[chain_top[i].index()].expect("chain tops are numbered")).collect();

    let mut builder = ReducedBuilder {
        parent: vec![None; next],
        children: vec![Vec::new(); next],
        weight: vec![Rational::ONE; next],
        introduced: Vec::new(),
    };
    for &top in inst.top_down() {
        if chain_top[top.index()] != top {
            continue;
        }
        let mut bottom = top;
        while inst.children(bottom).len() == 1 {
            bottom = inst.children(bottom)[0];
        }
        let kids: Vec<(NodeId, Rational)> =
            inst.children(bottom).iter().map(|&c| (forward_map[c.index()], inst.weight(c).clone())).collect();
        builder.split(forward_map[top.index()], &kids);
    }
    builder.weight[0] = Rational::ONE;
    let reduced = Instance::from_links(builder.parent, builder.children, builder.weight).expect("reduction yields a valid instance");
    BinaryReduction { reduced, forward_map, introduced: builder.introduced }
}

/// The seat range fixed for one child of a split, after intersecting its own
/// quota bounds with what its sibling can absorb.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeasibleInterval {
    /// Node in the reduced tree.
    pub node: NodeId,
    pub low: u64,
    pub high: u64,
    /// Largest minus smallest ancestor-implied share of `node`.
    pub share_spread: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BothQuotasTrace {
    pub reduction: BinaryReduction,
    pub reduced_allocation: Allocation,
    pub intervals: Vec<FeasibleInterval>,
    pub allocation: Allocation,
}

/// An allocation within both quotas on every node. Not house monotone.
pub fn allocate_both_quotas(inst: &Instance, h: u64) -> Result<Allocation, ExistenceError> {
    allocate_both_quotas_traced(inst, h).map(|t| t.allocation)
}

/// As [`allocate_both_quotas`], also returning the reduction and every
/// interval considered.
pub fn allocate_both_quotas_traced(inst: &Instance, h: u64) -> Result<BothQuotasTrace, ExistenceError> {
    let reduction = to_full_binary(inst);
    let tree = &reduction.reduced;
    let checker = QuotaChecker::new(tree, QuotaMode::AllAncestors);
    let mut seats = vec![0u64; tree.len()];
    seats[0] = h;
    let mut intervals = Vec::new();

    for &i in tree.top_down() {
        let (x, y) = match tree.children(i) {
            [] => continue,
            [x, y] => (*x, *y),
            other => unreachable!("reduced tree node {i} has {} children", other.len()),
        };
        let v_i = seats[i.index()] as i128;
        let bx = checker.bounds(x, &seats);
        let by = checker.bounds(y, &seats);
        let low = (bx.lower as i128).max(v_i - by.upper as i128);
        let high = (bx.upper as i128).min(v_i - by.lower as i128);
        if low > high {
            return Err(ExistenceError::EmptyInterval { node: x, low, high });
        }
        let target = tree.weight(x) * &Rational::from(seats[i.index()]);
        let nearest = nearest_integer_half_down(&target);
        let v_x = nearest.clamp(low, high);
        seats[x.index()] = v_x as u64;
        seats[y.index()] = (v_i - v_x) as u64;

        for (c, lo, hi) in [(x, low, high), (y, v_i - high, v_i - low)] {
            intervals.push(FeasibleInterval { node: c, low: lo as u64, high: hi as u64, share_spread: spread(&checker, c, &seats) });
        }
    }

    let reduced_allocation = Allocation::new(h, seats);
    let allocation = reduction.map_back(&reduced_allocation);
    Ok(BothQuotasTrace { reduction, reduced_allocation, intervals, allocation })
}

fn nearest_integer_half_down(x: &Rational) -> i128 {
    let floor = x.floor();
    let frac = x - &floor;
    let floor = floor.to_i128().expect("target share fits in i128");
    if frac > Rational::new(1, 2) {
        floor + 1
    } else {
        floor
    }
}

fn spread(checker: &QuotaChecker, c: NodeId, seats: &[u64]) -> Rational {
    let shares: Vec<Rational> = checker.shares(c, seats).map(|(_, e)| e).collect();
    let max = shares.iter().max().expect("every node has an ancestor");
    let min = shares.iter().min().expect("every node has an ancestor");
    max - min
}

/// Every flow-conserving allocation of `h` seats within both quotas, in
/// lexicographic order of seat vectors.
///
/// Exhaustive: all integer flows are enumerated (children in input order,
/// counts ascending) and each is checked directly against the quota
/// definition. Intended as a test oracle for small instances only.
pub fn brute_force_both_quotas(inst: &Instance, h: u64) -> Result<Vec<Allocation>, ExistenceError> {
    if inst.len() > ORACLE_MAX_NODES {
        return Err(ExistenceError::SizeLimitExceeded(format!("{} nodes (max {ORACLE_MAX_NODES})", inst.len())));
    }
    if h > ORACLE_MAX_SEATS {
        return Err(ExistenceError::SizeLimitExceeded(format!("{h} seats (max {ORACLE_MAX_SEATS})")));
    }
    let internal: Vec<NodeId> = inst.top_down().iter().copied().filter(|i| !inst.is_leaf(*i)).collect();
    let mut seats = vec![0u64; inst.len()];
    seats[0] = h;
    let mut out = Vec::new();
    let mut flows = 0u64;
    enumerate_flows(inst, &internal, 0, &mut seats, &mut flows, &mut out)?;
    out.sort();
    Ok(out.into_iter().map(|s| Allocation::new(h, s)).collect())
}

fn enumerate_flows(
    inst: &Instance,
    internal: &[NodeId],
    k: usize,
    seats: &mut Vec<u64>,
    flows: &mut u64,
    out: &mut Vec<Vec<u64>>,
) -> Result<(), ExistenceError> {
    let Some(&node) = internal.get(k) else {
        *flows += 1;
        if *flows > ORACLE_MAX_FLOWS {
            return Err(ExistenceError::SizeLimitExceeded(format!("more than {ORACLE_MAX_FLOWS} flows")));
        }
        if within_both_quotas(inst, seats) {
            out.push(seats.clone());
        }
        return Ok(());
    };
    let kids = inst.children(node).to_vec();
    let total = seats[node.index()];
    distribute(inst, internal, k, &kids, 0, total, seats, flows, out)
}

#[allow(clippy::too_many_arguments)]
fn distribute(
    inst: &Instance,
    internal: &[NodeId],
    k: usize,
    kids: &[NodeId],
    j: usize,
    remaining: u64,
    seats: &mut Vec<u64>,
    flows: &mut u64,
    out: &mut Vec<Vec<u64>>,
) -> Result<(), ExistenceError> {
    if j + 1 == kids.len() {
        seats[kids[j].index()] = remaining;
        return enumerate_flows(inst, internal, k + 1, seats, flows, out);
    }
    for v in 0..=remaining {
        seats[kids[j].index()] = v;
        distribute(inst, internal, k, kids, j + 1, remaining - v, seats, flows, out)?;
    }
    Ok(())
}

// Direct transcription of the quota definition, independent of QuotaChecker.
fn within_both_quotas(inst: &Instance, seats: &[u64]) -> bool {
    inst.nodes().all(|i| {
        let r_i = inst.relative_entitlement(i);
        let v_i = Rational::from(seats[i.index()]);
        inst.ancestors(i).into_iter().all(|a| {
            let share = r_i / inst.relative_entitlement(a) * Rational::from(seats[a.index()]);
            share.floor() <= v_i && v_i <= share.ceil()
        })
    })
}
