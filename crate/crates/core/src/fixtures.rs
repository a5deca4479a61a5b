//! The small worked instances used throughout the documentation and tests.

use crate::instance::{Instance, NodeId};
use crate::rational::Rational;

fn build(edges: &[(usize, usize, i128, i128)]) -> Instance {
    let n = edges.len() + 1;
    let mut parent = vec![None; n];
    let mut weight = vec![Rational::ONE; n];
    for &(child, p, num, den) in edges {
        parent[child] = Some(NodeId(p));
        weight[child] = Rational::new(num, den);
    }
    Instance::from_parts(parent, weight).expect("fixture is valid")
}

/// Single level: four leaves of weight 1/4 under the root.
pub fn flat_quarters() -> Instance {
    build(&[(1, 0, 1, 4), (2, 0, 1, 4), (3, 0, 1, 4), (4, 0, 1, 4)])
}

/// Two groups of weight 1/2 (nodes 5 and 6), each with two leaves of weight
/// 1/2: leaves 1, 2 under 5 and leaves 3, 4 under 6.
pub fn paired_halves() -> Instance {
    build(&[(5, 0, 1, 2), (6, 0, 1, 2), (1, 5, 1, 2), (2, 5, 1, 2), (3, 6, 1, 2), (4, 6, 1, 2)])
}

/// Root splits 8/9 (node 1) and 1/9 (node 2); node 1 splits 8/9 (node 3)
/// and 1/9 (node 4). The parent-only upper-quota check lets node 3 take all
/// of the first five seats.
pub fn lopsided_two_level() -> Instance {
    build(&[(1, 0, 8, 9), (2, 0, 1, 9), (3, 1, 8, 9), (4, 1, 1, 9)])
}

/// Like [`lopsided_two_level`] with one more level: node 1 splits 9/10 (node 3) and 1/10
/// (node 4); node 3 splits 8/9 (node 5) and 1/9 (node 6).
pub fn lopsided_three_level() -> Instance {
    build(&[(1, 0, 8, 9), (2, 0, 1, 9), (3, 1, 9, 10), (4, 1, 1, 10), (5, 3, 8, 9), (6, 3, 1, 9)])
}
