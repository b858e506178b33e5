//! Shipped topologies: small, unbalanced, and strongly connected either on
//! their own or jointly over a schedule.

use crate::error::{Error, Result};
use crate::graph::Digraph;

/// Five nodes on a directed ring `1 -> 5 -> 4 -> 3 -> 2 -> 1` with four
/// chords. Equal-neighbor weights on it are row- but not column-stochastic.
pub fn fixed_unbalanced_5() -> Digraph {
    Digraph::from_one_based(
        5,
        [(1, 2), (2, 3), (3, 4), (4, 5), (5, 1), (1, 3), (1, 4), (2, 5), (3, 5)],
    )
    .expect("preset edges are valid")
}

/// Two five-node graphs, each missing part of the ring `1 -> 2 -> 3 -> 4 ->
/// 5 -> 1`, so neither is strongly connected but their union is.
pub fn switching_pair_5() -> [Digraph; 2] {
    [
        Digraph::from_one_based(5, [(2, 1), (3, 2), (4, 3), (3, 1)]).expect("preset edges are valid"),
        Digraph::from_one_based(5, [(5, 4), (1, 5), (2, 5), (1, 4)]).expect("preset edges are valid"),
    ]
}

/// Three-node ring `1 -> 3 -> 2 -> 1` where node 1 also hears node 3.
pub fn unbalanced_3() -> Digraph {
    Digraph::from_one_based(3, [(1, 2), (2, 3), (3, 1), (1, 3)]).expect("preset edges are valid")
}

/// Looks a preset up by name. Single graphs return one element.
pub fn by_name(name: &str) -> Result<Vec<Digraph>> {
    match name {
        "fixed-unbalanced-5" => Ok(vec![fixed_unbalanced_5()]),
        "switching-5" => Ok(switching_pair_5().to_vec()),
        "unbalanced-3" => Ok(vec![unbalanced_3()]),
        other => Err(Error::Config(format!(
            "unknown graph preset {other:?} (expected fixed-unbalanced-5, switching-5 or unbalanced-3)"
        ))),
    }
}
