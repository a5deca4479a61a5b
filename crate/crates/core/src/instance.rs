//! Entitlement trees and seat allocations.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::Rational;

/// Dense node index; the root is always `NodeId(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);

    #[inline]
    pub fn index(self) -> usize {
        self.0
    }

    pub fn is_root(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<usize> for NodeId {
    fn from(v: usize) -> Self {
        NodeId(v)
    }
}

/// A structural problem found while validating an instance.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstanceError {
    #[error("instance has no nodes")]
    Empty,
    #[error("node ids must be dense 0..{n}: {detail}")]
    NonDenseIds { n: usize, detail: String },
    #[error("not a tree at node {node}: {reason}")]
    NonTree { node: NodeId, reason: String },
    #[error("node {node}: weight {text:?} is not a valid rational ({reason})")]
    InvalidWeight { node: NodeId, text: String, reason: String },
    #[error("node {node}: weight {weight} outside (0, 1]")]
    WeightOutOfRange { node: NodeId, weight: Rational },
    #[error("root weight must be 1, found {weight}")]
    RootWeightNotOne { weight: Rational },
    #[error("children of node {node} have weights summing to {sum}, expected 1")]
    ChildrenWeightsNotNormalized { node: NodeId, sum: Rational },
}

/// All problems found in one validation pass.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid instance: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
pub struct ValidationErrors(pub Vec<InstanceError>);

/// One node as it appears in the JSON instance file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub weight: String,
}

/// Unvalidated instance, exactly as read from disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawInstance {
    pub nodes: Vec<RawNode>,
}

impl RawInstance {
    pub fn from_json(text: &str) -> Result<RawInstance, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn validate(&self) -> Result<Instance, ValidationErrors> {
        validate_instance(self)
    }
}

/// Validates a raw instance, collecting every violated invariant rather than
/// stopping at the first one.
pub fn validate_instance(raw: &RawInstance) -> Result<Instance, ValidationErrors> {
    let n = raw.nodes.len();
    if n == 0 {
        return Err(ValidationErrors(vec![InstanceError::Empty]));
    }
    let mut errors = Vec::new();

    let mut by_id: Vec<Option<&RawNode>> = vec![None; n];
    for node in &raw.nodes {
        if node.id >= n {
            errors.push(InstanceError::NonDenseIds { n, detail: format!("id {} out of range", node.id) });
        } else if by_id[node.id].is_some() {
            errors.push(InstanceError::NonDenseIds { n, detail: format!("id {} appears twice", node.id) });
        } else {
            by_id[node.id] = Some(node);
        }
    }
    if !errors.is_empty() {
        return Err(ValidationErrors(errors));
    }
    let nodes: Vec<&RawNode> = by_id.into_iter().map(|n| n.expect("dense ids checked")).collect();

    let mut weights = Vec::with_capacity(n);
    for node in &nodes {
        let id = NodeId(node.id);
        match parse_weight(&node.weight) {
            Ok(w) => weights.push(Some(w)),
            Err(reason) => {
                errors.push(InstanceError::InvalidWeight { node: id, text: node.weight.clone(), reason });
                weights.push(None);
            }
        }
    }

    let parents: Vec<Option<usize>> = nodes.iter().map(|n| n.parent).collect();
    errors.extend(check_structure(&parents));

    if !errors.is_empty() {
        return Err(ValidationErrors(errors));
    }
    let weights: Vec<Rational> = weights.into_iter().map(|w| w.expect("weights parsed")).collect();
    Instance::from_parts(parents.into_iter().map(|p| p.map(NodeId)).collect(), weights)
}

fn parse_weight(text: &str) -> Result<Rational, String> {
    let w: Rational = text.parse().map_err(|e: crate::rational::ParseRationalError| e.to_string())?;
    if text.starts_with('-') || text.contains("/-") {
        return Err("weights are written with positive integers".into());
    }
    Ok(w)
}

/// Tree-shape checks: exactly one root at id 0, parents in range, no cycles.
fn check_structure(parents: &[Option<usize>]) -> Vec<InstanceError> {
    let n = parents.len();
    let mut errors = Vec::new();
    for (i, p) in parents.iter().enumerate() {
        match (i, p) {
            (0, None) => {}
            (0, Some(_)) => errors.push(InstanceError::NonTree { node: NodeId(0), reason: "node 0 must be the root (parent null)".into() }),
            (_, None) => errors.push(InstanceError::NonTree { node: NodeId(i), reason: "second root (parent null)".into() }),
            (_, Some(p)) if *p >= n => {
                errors.push(InstanceError::NonTree { node: NodeId(i), reason: format!("parent {p} does not exist") })
            }
            (_, Some(p)) if *p == i => errors.push(InstanceError::NonTree { node: NodeId(i), reason: "node is its own parent".into() }),
            _ => {}
        }
    }
    if !errors.is_empty() {
        return errors;
    }
    // every node must reach the root; anything else sits on a cycle
    let mut reaches_root = vec![false; n];
    reaches_root[0] = true;
    for start in 1..n {
        let mut seen = BTreeSet::new();
        let mut cur = start;
        while !reaches_root[cur] {
            if !seen.insert(cur) {
                errors.push(InstanceError::NonTree { node: NodeId(start), reason: format!("cycle through node {cur}") });
                break;
            }
            cur = parents[cur].expect("non-root has parent");
        }
        if reaches_root[cur] {
            for v in seen {
                reaches_root[v] = true;
            }
        }
    }
    errors
}

/// A validated entitlement tree.
///
/// Relative entitlements (products of weights from the root) and depths are
/// computed once at construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    parent: Vec<Option<NodeId>>,
    children: Vec<Vec<NodeId>>,
    weight: Vec<Rational>,
    relative: Vec<Rational>,
    depth: Vec<usize>,
    /// Root first, every parent before its children, siblings in input order.
    order: Vec<NodeId>,
}

impl Instance {
    /// Builds an instance from a parent array and per-node weights. Children
    /// are ordered by ascending node id.
    pub fn from_parts(parent: Vec<Option<NodeId>>, weight: Vec<Rational>) -> Result<Instance, ValidationErrors> {
        let n = parent.len();
        let mut children = vec![Vec::new(); n];
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                if p.index() < n {
                    children[p.index()].push(NodeId(i));
                }
            }
        }
        Self::from_links(parent, children, weight)
    }

    /// Builds an instance with an explicit child order.
    pub fn from_links(
        parent: Vec<Option<NodeId>>,
        children: Vec<Vec<NodeId>>,
        weight: Vec<Rational>,
    ) -> Result<Instance, ValidationErrors> {
        let n = parent.len();
        if n == 0 {
            return Err(ValidationErrors(vec![InstanceError::Empty]));
        }
        if children.len() != n || weight.len() != n {
            return Err(ValidationErrors(vec![InstanceError::NonDenseIds {
                n,
                detail: format!("{} parents, {} child lists, {} weights", n, children.len(), weight.len()),
            }]));
        }
        let raw_parents: Vec<Option<usize>> = parent.iter().map(|p| p.map(NodeId::index)).collect();
        let mut errors = check_structure(&raw_parents);
        for (p, kids) in children.iter().enumerate() {
            for c in kids {
                if parent.get(c.index()).copied().flatten() != Some(NodeId(p)) {
                    errors.push(InstanceError::NonTree { node: *c, reason: format!("listed as child of {p} but parent differs") });
                }
            }
        }
        let listed: usize = children.iter().map(Vec::len).sum();
        if errors.is_empty() && listed != n - 1 {
            errors.push(InstanceError::NonTree { node: NodeId::ROOT, reason: "child lists do not cover every non-root node exactly once".into() });
        }

        if weight[0] != Rational::ONE {
            errors.push(InstanceError::RootWeightNotOne { weight: weight[0].clone() });
        }
        for (i, w) in weight.iter().enumerate().skip(1) {
            if !w.is_positive() || *w > Rational::ONE {
                errors.push(InstanceError::WeightOutOfRange { node: NodeId(i), weight: w.clone() });
            }
        }
        for (i, kids) in children.iter().enumerate() {
            if kids.is_empty() {
                continue;
            }
            let sum: Rational = kids.iter().map(|c| &weight[c.index()]).sum();
            if sum != Rational::ONE {
                errors.push(InstanceError::ChildrenWeightsNotNormalized { node: NodeId(i), sum });
            }
        }
        if !errors.is_empty() {
            return Err(ValidationErrors(errors));
        }

        let mut order = Vec::with_capacity(n);
        let mut relative = vec![Rational::ONE; n];
        let mut depth = vec![0; n];
        order.push(NodeId::ROOT);
        let mut head = 0;
        while head < order.len() {
            let p = order[head];
            head += 1;
            for &c in &children[p.index()] {
                relative[c.index()] = &relative[p.index()] * &weight[c.index()];
                depth[c.index()] = depth[p.index()] + 1;
                order.push(c);
            }
        }
        Ok(Instance { parent, children, weight, relative, depth, order })
    }

    /// The trivial one-node instance.
    pub fn singleton() -> Instance {
        Instance::from_parts(vec![None], vec![Rational::ONE]).expect("single root is valid")
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.len()).map(NodeId)
    }

    pub fn parent(&self, i: NodeId) -> Option<NodeId> {
        self.parent[i.index()]
    }

    pub fn children(&self, i: NodeId) -> &[NodeId] {
        &self.children[i.index()]
    }

    pub fn is_leaf(&self, i: NodeId) -> bool {
        self.children[i.index()].is_empty()
    }

    /// Entitlement relative to the parent.
    pub fn weight(&self, i: NodeId) -> &Rational {
        &self.weight[i.index()]
    }

    /// Entitlement relative to the root: the product of weights on the path
    /// from the root to `i`.
    pub fn relative_entitlement(&self, i: NodeId) -> &Rational {
        &self.relative[i.index()]
    }

    pub fn depth(&self, i: NodeId) -> usize {
        self.depth[i.index()]
    }

    pub fn height(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    /// Breadth-first order; parents always precede their children.
    pub fn top_down(&self) -> &[NodeId] {
        &self.order
    }

    /// The ancestor set used by the quota definitions: proper ancestors of
    /// `i` from the parent up to the root, or `{0}` for the root itself.
    pub fn ancestors(&self, i: NodeId) -> Vec<NodeId> {
        if i.is_root() {
            return vec![NodeId::ROOT];
        }
        let mut out = Vec::with_capacity(self.depth(i));
        let mut cur = self.parent(i);
        while let Some(a) = cur {
            out.push(a);
            cur = self.parent(a);
        }
        out
    }

    /// True if `a` lies on the path from the root to `i` (inclusive of `i`).
    pub fn is_ancestor_or_self(&self, a: NodeId, i: NodeId) -> bool {
        let mut cur = Some(i);
        while let Some(c) = cur {
            if c == a {
                return true;
            }
            if self.depth(c) <= self.depth(a) {
                return false;
            }
            cur = self.parent(c);
        }
        false
    }

    pub fn to_raw(&self) -> RawInstance {
        RawInstance {
            nodes: self
                .order_by_id()
                .map(|i| RawNode { id: i.index(), parent: self.parent(i).map(NodeId::index), weight: self.weight(i).to_string() })
                .collect(),
        }
    }

    fn order_by_id(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes()
    }

    pub fn from_json(text: &str) -> Result<Instance, crate::Error> {
        let raw = RawInstance::from_json(text)?;
        Ok(validate_instance(&raw)?)
    }

    /// The instance file format. Nodes are written in id order. Child order
    /// is carried implicitly by id order, so instances whose children are not
    /// listed in ascending id order do not round-trip their child order.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_raw()).expect("instance serializes")
    }
}

/// Seat counts per node for a house of size `h`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Allocation {
    pub h: u64,
    pub seats: Vec<u64>,
}

impl Allocation {
    pub fn zeros(n: usize) -> Allocation {
        Allocation { h: 0, seats: vec![0; n] }
    }

    pub fn new(h: u64, seats: Vec<u64>) -> Allocation {
        Allocation { h, seats }
    }

    pub fn seats(&self, i: NodeId) -> u64 {
        self.seats[i.index()]
    }

    /// Componentwise `self <= other`.
    pub fn dominated_by(&self, other: &Allocation) -> bool {
        self.seats.len() == other.seats.len() && self.seats.iter().zip(&other.seats).all(|(a, b)| a <= b)
    }

    pub fn from_json(text: &str) -> Result<Allocation, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("allocation serializes")
    }
}

/// `R_i · h`, the exact proportional share of node `i`.
pub fn strict_quota(inst: &Instance, i: NodeId, h: u64) -> Rational {
    inst.relative_entitlement(i) * &Rational::from(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn raw(nodes: &[(usize, Option<usize>, &str)]) -> RawInstance {
        RawInstance {
            nodes: nodes.iter().map(|&(id, parent, w)| RawNode { id, parent, weight: w.to_string() }).collect(),
        }
    }

    #[test]
    fn flat_quarters_is_valid() {
        let inst = fixtures::flat_quarters();
        assert_eq!(inst.len(), 5);
        assert_eq!(inst.children(NodeId::ROOT).len(), 4);
    }

    #[test]
    fn single_node_is_valid() {
        let inst = validate_instance(&raw(&[(0, None, "1")])).unwrap();
        assert_eq!(inst.len(), 1);
        assert_eq!(inst.relative_entitlement(NodeId::ROOT), &Rational::ONE);
    }

    #[test]
    fn unnormalized_children_report_exact_sum() {
        let err = validate_instance(&raw(&[(0, None, "1"), (1, Some(0), "1/2"), (2, Some(0), "1/3")])).unwrap_err();
        assert_eq!(
            err.0,
            vec![InstanceError::ChildrenWeightsNotNormalized { node: NodeId(0), sum: Rational::new(5, 6) }]
        );
    }

    #[test]
    fn node_order_in_file_is_irrelevant() {
        let a = validate_instance(&raw(&[(0, None, "1"), (1, Some(0), "1/3"), (2, Some(0), "2/3")])).unwrap();
        let b = validate_instance(&raw(&[(2, Some(0), "2/3"), (0, None, "1"), (1, Some(0), "1/3")])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reports_every_problem() {
        let err = validate_instance(&raw(&[
            (0, None, "1"),
            (1, Some(0), "0"),
            (2, Some(0), "0.5"),
            (3, Some(1), "3/2"),
        ]))
        .unwrap_err();
        assert!(err.0.iter().any(|e| matches!(e, InstanceError::InvalidWeight { node: NodeId(2), .. })));
        // the decimal blocks the normalization checks, so fix it and retry
        let err = validate_instance(&raw(&[(0, None, "1"), (1, Some(0), "0"), (2, Some(0), "1"), (3, Some(1), "3/2")])).unwrap_err();
        assert!(err.0.contains(&InstanceError::WeightOutOfRange { node: NodeId(1), weight: Rational::ZERO }));
        assert!(err.0.contains(&InstanceError::WeightOutOfRange { node: NodeId(3), weight: Rational::new(3, 2) }));
        assert!(err.0.contains(&InstanceError::ChildrenWeightsNotNormalized { node: NodeId(1), sum: Rational::new(3, 2) }));
    }

    #[test]
    fn detects_cycles_and_extra_roots() {
        let err = validate_instance(&raw(&[(0, None, "1"), (1, Some(2), "1"), (2, Some(1), "1")])).unwrap_err();
        assert!(err.0.iter().all(|e| matches!(e, InstanceError::NonTree { .. })));
        assert_eq!(err.0.len(), 2);
        let err = validate_instance(&raw(&[(0, None, "1"), (1, None, "1")])).unwrap_err();
        assert!(matches!(err.0[0], InstanceError::NonTree { node: NodeId(1), .. }));
        let err = validate_instance(&raw(&[(0, Some(1), "1"), (1, None, "1")])).unwrap_err();
        assert!(err.0.iter().any(|e| matches!(e, InstanceError::NonTree { node: NodeId(0), .. })));
    }

    #[test]
    fn rejects_non_dense_ids() {
        let err = validate_instance(&raw(&[(0, None, "1"), (2, Some(0), "1")])).unwrap_err();
        assert!(matches!(err.0[0], InstanceError::NonDenseIds { .. }));
        let err = validate_instance(&raw(&[(0, None, "1"), (0, None, "1")])).unwrap_err();
        assert!(matches!(err.0[0], InstanceError::NonDenseIds { .. }));
        assert_eq!(validate_instance(&RawInstance { nodes: vec![] }).unwrap_err().0, vec![InstanceError::Empty]);
    }

    #[test]
    fn root_weight_must_be_one() {
        let err = validate_instance(&raw(&[(0, None, "1/2")])).unwrap_err();
        assert_eq!(err.0, vec![InstanceError::RootWeightNotOne { weight: Rational::new(1, 2) }]);
    }

    #[test]
    fn relative_entitlements() {
        let lopsided_two_level = fixtures::lopsided_two_level();
        assert_eq!(lopsided_two_level.relative_entitlement(NodeId(3)), &Rational::new(64, 81));
        assert_eq!(lopsided_two_level.relative_entitlement(NodeId::ROOT), &Rational::ONE);
        let lopsided_three_level = fixtures::lopsided_three_level();
        assert_eq!(lopsided_three_level.relative_entitlement(NodeId(5)), &Rational::new(32, 45));
    }

    #[test]
    fn strict_quotas() {
        assert_eq!(strict_quota(&fixtures::lopsided_two_level(), NodeId(3), 5), Rational::new(320, 81));
        assert_eq!(strict_quota(&fixtures::lopsided_two_level(), NodeId::ROOT, 17), Rational::from(17u64));
        assert_eq!(strict_quota(&fixtures::paired_halves(), NodeId(5), 6), Rational::from(3u64));
    }

    #[test]
    fn single_child_chains_are_accepted() {
        let inst = validate_instance(&raw(&[(0, None, "1"), (1, Some(0), "1"), (2, Some(1), "1")])).unwrap();
        assert_eq!(inst.relative_entitlement(NodeId(2)), &Rational::ONE);
        assert_eq!(inst.ancestors(NodeId(2)), vec![NodeId(1), NodeId(0)]);
    }

    #[test]
    fn ancestor_sets() {
        let lopsided_three_level = fixtures::lopsided_three_level();
        assert_eq!(lopsided_three_level.ancestors(NodeId::ROOT), vec![NodeId::ROOT]);
        assert_eq!(lopsided_three_level.ancestors(NodeId(5)), vec![NodeId(3), NodeId(1), NodeId(0)]);
        assert!(lopsided_three_level.is_ancestor_or_self(NodeId(1), NodeId(6)));
        assert!(!lopsided_three_level.is_ancestor_or_self(NodeId(2), NodeId(6)));
    }

    #[test]
    fn json_round_trip() {
        let inst = fixtures::lopsided_three_level();
        assert_eq!(Instance::from_json(&inst.to_json()).unwrap(), inst);
        let alloc = Allocation::new(6, vec![6, 2, 1, 2, 1, 3, 3]);
        assert_eq!(alloc.to_json(), r#"{"h":6,"seats":[6,2,1,2,1,3,3]}"#);
        assert_eq!(Allocation::from_json(&alloc.to_json()).unwrap(), alloc);
    }
}
