//! Level-by-level seat-at-a-time methods.
//!
//! Each method hands the next seat to the root and then walks down the tree,
//! at every internal node passing the seat to one child chosen from the
//! current allocation `V^h`. All four differ only in how that child is chosen:
//!
//! | method      | child minimizing   | eligible if                          |
//! |-------------|--------------------|--------------------------------------|
//! | Adams       | `V_c / R_c`        | always                               |
//! | Jefferson   | `(V_c + 1) / R_c`  | always                               |
//! | Quota       | `(V_c + 1) / R_c`  | `V_c / W_c < V_i + 1` (parent only)  |
//! | UC quota    | `(V_c + 1) / R_c`  | `V_c / R_c < min_a (V_a + 1) / R_a` over every ancestor on the path |
//!
//! Comparisons are exact cross-multiplications.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Allocation, Instance, NodeId};
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Adams,
    Jefferson,
    Quota,
    #[serde(rename = "ucquota")]
    UcQuota,
}

impl MethodKind {
    pub const ALL: [MethodKind; 4] = [MethodKind::Adams, MethodKind::Jefferson, MethodKind::Quota, MethodKind::UcQuota];

    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Adams => "adams",
            MethodKind::Jefferson => "jefferson",
            MethodKind::Quota => "quota",
            MethodKind::UcQuota => "ucquota",
        }
    }

    /// Display label used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            MethodKind::Adams => "Adams",
            MethodKind::Jefferson => "Jefferson",
            MethodKind::Quota => "Quota",
            MethodKind::UcQuota => "UC Quota",
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown method {0:?} (expected adams, jefferson, quota or ucquota)")]
pub struct UnknownMethod(pub String);

impl FromStr for MethodKind {
    type Err = UnknownMethod;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "adams" => Ok(MethodKind::Adams),
            "jefferson" => Ok(MethodKind::Jefferson),
            "quota" => Ok(MethodKind::Quota),
            "ucquota" | "uc-quota" | "uc_quota" => Ok(MethodKind::UcQuota),
            _ => Err(UnknownMethod(s.to_string())),
        }
    }
}

/// How to pick among children with equal priority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    /// Smallest node id wins.
    #[default]
    LowestIndex,
}

impl TieBreak {
    fn prefers(self, candidate: NodeId, incumbent: NodeId) -> bool {
        match self {
            TieBreak::LowestIndex => candidate < incumbent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MethodError {
    #[error("{method}: no child of node {node} is eligible for seat {seat}")]
    NoEligibleChild { method: MethodKind, node: NodeId, seat: u64 },
    #[error("allocation has {found} entries but the instance has {expected} nodes")]
    LengthMismatch { expected: usize, found: usize },
}

/// One seat's worth of progress: the new allocation and the root-to-leaf
/// path that received the seat.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub allocation: Allocation,
    pub path: Vec<NodeId>,
}

/// The nodes that receive seat `V_0 + 1` under `method`, computed from the
/// current seat counts only.
pub fn choose_path(inst: &Instance, seats: &[u64], method: MethodKind, tie: TieBreak) -> Result<Vec<NodeId>, MethodError> {
    let mut path = Vec::with_capacity(inst.height() + 1);
    choose_path_into(inst, seats, method, tie, &mut path)?;
    Ok(path)
}

fn choose_path_into(
    inst: &Instance,
    seats: &[u64],
    method: MethodKind,
    tie: TieBreak,
    path: &mut Vec<NodeId>,
) -> Result<(), MethodError> {
    if seats.len() != inst.len() {
        return Err(MethodError::LengthMismatch { expected: inst.len(), found: seats.len() });
    }
    path.clear();
    let mut i = NodeId::ROOT;
    path.push(i);
    // UC quota threshold, kept as the pair (k, R) meaning k / R
    let mut threshold: (u64, &Rational) = (seats[0] + 1, inst.relative_entitlement(NodeId::ROOT));
    while !inst.is_leaf(i) {
        let v_i = seats[i.index()];
        let mut best: Option<NodeId> = None;
        for &c in inst.children(i) {
            let v_c = seats[c.index()];
            let r_c = inst.relative_entitlement(c);
            let eligible = match method {
                MethodKind::Adams | MethodKind::Jefferson => true,
                MethodKind::Quota => Rational::cmp_quotients(v_c, inst.weight(c), v_i + 1, &Rational::ONE) == Ordering::Less,
                MethodKind::UcQuota => Rational::cmp_quotients(v_c, r_c, threshold.0, threshold.1) == Ordering::Less,
            };
            if !eligible {
                continue;
            }
            best = match best {
                None => Some(c),
                Some(b) => {
                    let ord = priority_cmp(method, v_c, r_c, seats[b.index()], inst.relative_entitlement(b));
                    if ord == Ordering::Less || (ord == Ordering::Equal && tie.prefers(c, b)) {
                        Some(c)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        let c = best.ok_or(MethodError::NoEligibleChild { method, node: i, seat: seats[0] + 1 })?;
        if method == MethodKind::UcQuota {
            let candidate = (seats[c.index()] + 1, inst.relative_entitlement(c));
            if Rational::cmp_quotients(candidate.0, candidate.1, threshold.0, threshold.1) == Ordering::Less {
                threshold = candidate;
            }
        }
        path.push(c);
        i = c;
    }
    Ok(())
}

// Ordering of the child priorities; smaller wins.
fn priority_cmp(method: MethodKind, v_a: u64, r_a: &Rational, v_b: u64, r_b: &Rational) -> Ordering {
    match method {
        MethodKind::Adams => Rational::cmp_quotients(v_a, r_a, v_b, r_b),
        _ => Rational::cmp_quotients(v_a + 1, r_a, v_b + 1, r_b),
    }
}

/// Allocates one more seat. The input is not modified.
pub fn step(inst: &Instance, current: &Allocation, method: MethodKind, tie: TieBreak) -> Result<Step, MethodError> {
    let path = choose_path(inst, &current.seats, method, tie)?;
    let mut allocation = current.clone();
    allocation.h += 1;
    for node in &path {
        allocation.seats[node.index()] += 1;
    }
    Ok(Step { allocation, path })
}

pub fn step_adams(inst: &Instance, current: &Allocation, tie: TieBreak) -> Step {
    step(inst, current, MethodKind::Adams, tie).expect("Adams always has a candidate child")
}

pub fn step_jefferson(inst: &Instance, current: &Allocation, tie: TieBreak) -> Step {
    step(inst, current, MethodKind::Jefferson, tie).expect("Jefferson always has a candidate child")
}

pub fn step_quota(inst: &Instance, current: &Allocation, tie: TieBreak) -> Result<Step, MethodError> {
    step(inst, current, MethodKind::Quota, tie)
}

pub fn step_uc_quota(inst: &Instance, current: &Allocation, tie: TieBreak) -> Result<Step, MethodError> {
    step(inst, current, MethodKind::UcQuota, tie)
}

/// Runs a method seat by seat in place, without keeping history.
#[derive(Debug, Clone)]
pub struct SeatAllocator<'a> {
    inst: &'a Instance,
    method: MethodKind,
    tie: TieBreak,
    allocation: Allocation,
    path: Vec<NodeId>,
}

impl<'a> SeatAllocator<'a> {
    pub fn new(inst: &'a Instance, method: MethodKind, tie: TieBreak) -> Self {
        SeatAllocator { inst, method, tie, allocation: Allocation::zeros(inst.len()), path: Vec::new() }
    }

    pub fn allocation(&self) -> &Allocation {
        &self.allocation
    }

    pub fn house(&self) -> u64 {
        self.allocation.h
    }

    /// Places the next seat and returns the path that received it.
    pub fn next_seat(&mut self) -> Result<&[NodeId], MethodError> {
        choose_path_into(self.inst, &self.allocation.seats, self.method, self.tie, &mut self.path)?;
        self.allocation.h += 1;
        for node in &self.path {
            self.allocation.seats[node.index()] += 1;
        }
        Ok(&self.path)
    }

    /// Allocates seats until the house reaches `h`; a smaller `h` is a no-op.
    pub fn advance_to(&mut self, h: u64) -> Result<&Allocation, MethodError> {
        while self.allocation.h < h {
            self.next_seat()?;
        }
        Ok(&self.allocation)
    }
}

/// Final allocation for a house of `h` seats.
pub fn allocate(inst: &Instance, method: MethodKind, h: u64, tie: TieBreak) -> Result<Allocation, MethodError> {
    let mut runner = SeatAllocator::new(inst, method, tie);
    runner.advance_to(h)?;
    Ok(runner.allocation)
}

/// Every allocation `V^0 .. V^h` produced by a method, with the path taken by
/// each seat (`paths[g]` is the path of seat `g + 1`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub method: MethodKind,
    pub allocations: Vec<Vec<u64>>,
    pub paths: Vec<Vec<NodeId>>,
}

impl Trajectory {
    pub fn house(&self) -> u64 {
        self.paths.len() as u64
    }

    pub fn allocation(&self, g: u64) -> Allocation {
        Allocation::new(g, self.allocations[g as usize].clone())
    }

    pub fn final_allocation(&self) -> Allocation {
        self.allocation(self.house())
    }

    /// Componentwise non-decreasing from each house size to the next.
    pub fn is_house_monotone(&self) -> bool {
        self.allocations.windows(2).all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| a <= b))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trajectory serializes")
    }
}

pub fn run_method(inst: &Instance, method: MethodKind, h: u64, tie: TieBreak) -> Result<Trajectory, MethodError> {
    let mut runner = SeatAllocator::new(inst, method, tie);
    let mut allocations = Vec::with_capacity(h as usize + 1);
    let mut paths = Vec::with_capacity(h as usize);
    allocations.push(runner.allocation().seats.clone());
    for _ in 0..h {
        let path = runner.next_seat()?.to_vec();
        paths.push(path);
        allocations.push(runner.allocation().seats.clone());
    }
    Ok(Trajectory { method, allocations, paths })
}
