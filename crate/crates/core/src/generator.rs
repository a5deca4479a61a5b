//! Seeded random instances.
//!
//! Random draws come from ChaCha8 (`rand_chacha`), seeded with
//! `ChaCha8Rng::seed_from_u64`. An integer in `[1, m]` is drawn from one
//! 64-bit output `x` at a time: with `b = floor((2^64 - 1) / m)`, accept
//! `x / b + 1` when `x / b < m`, otherwise draw again. Draws are consumed
//! node by node in breadth-first id order, children left to right.

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Instance, NodeId};
use crate::rational::Rational;

pub const MIN_HEIGHT: u32 = 1;
pub const MAX_HEIGHT: u32 = 12;
pub const DEFAULT_MAX_WEIGHT: u64 = 10;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl Seed {
    pub fn offset(self, k: u64) -> Seed {
        Seed(self.0.wrapping_add(k))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    /// Every internal node has two children; all leaves on the last level.
    PerfectBinary,
    /// On every level but the last, nodes at even (0-based) positions have
    /// four children and the others none.
    #[serde(rename = "full-4ary")]
    Full4Ary,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::PerfectBinary => "binary",
            FamilyKind::Full4Ary => "4ary",
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyKind {
    type Err = GeneratorError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "binary" | "perfect-binary" => Ok(FamilyKind::PerfectBinary),
            "4ary" | "full-4ary" => Ok(FamilyKind::Full4Ary),
            _ => Err(GeneratorError::UnknownFamily(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TreeFamily {
    pub kind: FamilyKind,
    pub height: u32,
}

impl TreeFamily {
    pub fn new(kind: FamilyKind, height: u32) -> TreeFamily {
        TreeFamily { kind, height }
    }

    /// Nodes per level, root level first.
    pub fn level_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![1usize];
        for _ in 0..self.height {
            let prev = *sizes.last().expect("non-empty");
            let next = match self.kind {
                FamilyKind::PerfectBinary => prev * 2,
                FamilyKind::Full4Ary => prev.div_ceil(2) * 4,
            };
            sizes.push(next);
        }
        sizes
    }

    pub fn node_count(&self) -> usize {
        self.level_sizes().iter().sum()
    }
}

impl fmt::Display for TreeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-h{}", self.kind, self.height)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeneratorError {
    #[error("unsupported height {0} (expected {MIN_HEIGHT}..={MAX_HEIGHT})")]
    UnsupportedHeight(u32),
    #[error("max weight must be at least 1")]
    InvalidMaxWeight,
    #[error("unknown tree family {0:?} (expected binary or 4ary)")]
    UnknownFamily(String),
    #[error("random trees need at least one node")]
    EmptyTree,
}

/// Tree shape without weights. Ids are breadth-first, left to right.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skeleton {
    pub parent: Vec<Option<NodeId>>,
    pub children: Vec<Vec<NodeId>>,
}

impl Skeleton {
    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    fn push(&mut self, parent: Option<NodeId>) -> NodeId {
        let id = NodeId(self.parent.len());
        self.parent.push(parent);
        self.children.push(Vec::new());
        if let Some(p) = parent {
            self.children[p.index()].push(id);
        }
        id
    }
}

pub fn build_tree(family: TreeFamily) -> Result<Skeleton, GeneratorError> {
    if !(MIN_HEIGHT..=MAX_HEIGHT).contains(&family.height) {
        return Err(GeneratorError::UnsupportedHeight(family.height));
    }
    let mut sk = Skeleton { parent: Vec::new(), children: Vec::new() };
    let mut level = vec![sk.push(None)];
    for _ in 0..family.height {
        let mut next = Vec::new();
        for (pos, &node) in level.iter().enumerate() {
            let fanout = match family.kind {
                FamilyKind::PerfectBinary => 2,
                FamilyKind::Full4Ary if pos % 2 == 0 => 4,
                FamilyKind::Full4Ary => 0,
            };
            for _ in 0..fanout {
                next.push(sk.push(Some(node)));
            }
        }
        level = next;
    }
    Ok(sk)
}

/// Uniform draws in `[1, max]` from a pinned generator.
#[derive(Debug, Clone)]
pub struct WeightSampler {
    rng: ChaCha8Rng,
}

impl WeightSampler {
    pub fn new(seed: Seed) -> WeightSampler {
        WeightSampler { rng: ChaCha8Rng::seed_from_u64(seed.0) }
    }

    pub fn draw(&mut self, max: u64) -> u64 {
        assert!(max >= 1);
        let bucket = u64::MAX / max;
        loop {
            let q = self.rng.next_u64() / bucket;
            if q < max {
                return q + 1;
            }
        }
    }
}

/// For every internal node, draws one integer per child uniformly from
/// `[1, max_weight]` and sets each child's weight to its draw over the sum.
pub fn assign_entitlements(skeleton: &Skeleton, seed: Seed, max_weight: u64) -> Result<Instance, GeneratorError> {
    if max_weight == 0 {
        return Err(GeneratorError::InvalidMaxWeight);
    }
    let mut sampler = WeightSampler::new(seed);
    let mut weight = vec![Rational::ONE; skeleton.len()];
    for kids in &skeleton.children {
        if kids.is_empty() {
            continue;
        }
        let draws: Vec<u64> = kids.iter().map(|_| sampler.draw(max_weight)).collect();
        let total: u64 = draws.iter().sum();
        for (c, d) in kids.iter().zip(draws) {
            weight[c.index()] = Rational::new(d as i128, total as i128);
        }
    }
    Ok(Instance::from_links(skeleton.parent.clone(), skeleton.children.clone(), weight).expect("generated instance is valid"))
}

/// Convenience: shape from `family`, weights from `seed`.
pub fn generate(family: TreeFamily, seed: Seed, max_weight: u64) -> Result<Instance, GeneratorError> {
    assign_entitlements(&build_tree(family)?, seed, max_weight)
}

/// A random recursive tree on `n` nodes: node `i` attaches to a uniformly
/// chosen earlier node. Produces single-child chains and wide fans, which
/// the fixed families never do.
pub fn random_skeleton(n: usize, seed: Seed) -> Result<Skeleton, GeneratorError> {
    if n == 0 {
        return Err(GeneratorError::EmptyTree);
    }
    let mut sampler = WeightSampler::new(seed);
    let mut sk = Skeleton { parent: Vec::new(), children: Vec::new() };
    sk.push(None);
    for i in 1..n {
        let p = sampler.draw(i as u64) - 1;
        sk.push(Some(NodeId(p as usize)));
    }
    Ok(sk)
}

/// A root with `leaves` children.
pub fn star_skeleton(leaves: usize) -> Skeleton {
    let mut sk = Skeleton { parent: Vec::new(), children: Vec::new() };
    let root = sk.push(None);
    for _ in 0..leaves {
        sk.push(Some(root));
    }
    sk
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::validate_instance;

    #[test]
    fn family_sizes() {
        let binary: Vec<usize> = (3..=6).map(|h| TreeFamily::new(FamilyKind::PerfectBinary, h).node_count()).collect();
        assert_eq!(binary, vec![15, 31, 63, 127]);
        let four: Vec<usize> = (3..=6).map(|h| TreeFamily::new(FamilyKind::Full4Ary, h).node_count()).collect();
        assert_eq!(four, vec![29, 61, 125, 253]);
        assert_eq!(TreeFamily::new(FamilyKind::Full4Ary, 6).level_sizes(), vec![1, 4, 8, 16, 32, 64, 128]);
    }

    #[test]
    fn built_trees_match_formula() {
        for kind in [FamilyKind::PerfectBinary, FamilyKind::Full4Ary] {
            for h in MIN_HEIGHT..=8 {
                let fam = TreeFamily::new(kind, h);
                let sk = build_tree(fam).unwrap();
                assert_eq!(sk.len(), fam.node_count(), "{fam}");
            }
        }
        assert_eq!(build_tree(TreeFamily::new(FamilyKind::PerfectBinary, 1)).unwrap().len(), 3);
    }

    #[test]
    fn four_ary_even_positions_branch() {
        let sk = build_tree(TreeFamily::new(FamilyKind::Full4Ary, 2)).unwrap();
        // level 1 is ids 1..=4; positions 0 and 2 (ids 1 and 3) branch
        assert_eq!(sk.children[1].len(), 4);
        assert_eq!(sk.children[2].len(), 0);
        assert_eq!(sk.children[3].len(), 4);
        assert_eq!(sk.children[4].len(), 0);
        assert_eq!(sk.children[1], (5..9).map(NodeId).collect::<Vec<_>>());
    }

    #[test]
    fn heights_out_of_range_are_rejected() {
        assert_eq!(build_tree(TreeFamily::new(FamilyKind::PerfectBinary, 0)), Err(GeneratorError::UnsupportedHeight(0)));
        assert_eq!(build_tree(TreeFamily::new(FamilyKind::Full4Ary, 13)), Err(GeneratorError::UnsupportedHeight(13)));
    }

    #[test]
    fn generation_is_deterministic_and_valid() {
        let fam = TreeFamily::new(FamilyKind::Full4Ary, 4);
        let a = generate(fam, Seed(42), DEFAULT_MAX_WEIGHT).unwrap();
        let b = generate(fam, Seed(42), DEFAULT_MAX_WEIGHT).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let c = generate(fam, Seed(43), DEFAULT_MAX_WEIGHT).unwrap();
        assert_ne!(a, c);
        assert_eq!(validate_instance(&a.to_raw()).unwrap(), a);
    }

    #[test]
    fn weights_respect_sibling_ratio() {
        let inst = generate(TreeFamily::new(FamilyKind::Full4Ary, 5), Seed(7), 10).unwrap();
        for i in inst.nodes() {
            let kids = inst.children(i);
            for a in kids {
                for b in kids {
                    assert!(inst.weight(*a) <= &(inst.weight(*b) * &Rational::from(10u64)));
                }
                // denominator divides the sibling sum, which is at most 4 * 10
                assert!(inst.weight(*a).denom() <= num_bigint::BigInt::from(40));
            }
        }
    }

    #[test]
    fn max_weight_one_gives_uniform_split() {
        let inst = generate(TreeFamily::new(FamilyKind::Full4Ary, 1), Seed(0), 1).unwrap();
        for c in inst.children(NodeId::ROOT) {
            assert_eq!(inst.weight(*c), &Rational::new(1, 4));
        }
        assert_eq!(generate(TreeFamily::new(FamilyKind::Full4Ary, 1), Seed(0), 0), Err(GeneratorError::InvalidMaxWeight));
    }

    #[test]
    fn sampler_stays_in_range_and_covers_it() {
        let mut s = WeightSampler::new(Seed(1));
        let mut seen = [false; 10];
        for _ in 0..1000 {
            let d = s.draw(10);
            assert!((1..=10).contains(&d));
            seen[(d - 1) as usize] = true;
        }
        assert!(seen.iter().all(|x| *x));
        assert_eq!(WeightSampler::new(Seed(9)).draw(1), 1);
    }

    #[test]
    fn pinned_sampler_output() {
        // frozen from the first run; guards against silent changes in the pinned generator
        let mut s = WeightSampler::new(Seed(0));
        let draws: Vec<u64> = (0..8).map(|_| s.draw(10)).collect();
        assert_eq!(draws, PINNED_SEED0_DRAWS);
    }

    const PINNED_SEED0_DRAWS: [u64; 8] = [8, 5, 7, 1, 9, 6, 9, 10];

    #[test]
    fn random_skeletons_are_trees() {
        for seed in 0..20 {
            let sk = random_skeleton(12, Seed(seed)).unwrap();
            let inst = assign_entitlements(&sk, Seed(seed), 10).unwrap();
            assert_eq!(inst.len(), 12);
        }
        assert_eq!(random_skeleton(0, Seed(0)), Err(GeneratorError::EmptyTree));
        assert_eq!(star_skeleton(3).children[0].len(), 3);
    }
}
