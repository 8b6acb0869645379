//! Benchmark models bundled with the crate.

use crate::model::{parse_pomdp, Pomdp};

/// The classic two-door tiger problem.
pub const TIGER: &str = include_str!("../fixtures/tiger.pomdp");

/// Eight-state seeded synthetic model (see [`crate::harness::synthetic`]).
pub const SYNTHETIC8: &str = include_str!("../fixtures/synthetic8.pomdp");

/// 32-state seeded synthetic model.
pub const SYNTHETIC32: &str = include_str!("../fixtures/synthetic32.pomdp");

/// Two states, two actions, with one action's value far above the other's
/// over most of the belief simplex.
pub const SEPARATED: &str = include_str!("../fixtures/separated.pomdp");

pub fn tiger() -> Pomdp {
    parse_pomdp(TIGER).expect("bundled tiger model parses")
}

/// Looks up a bundled model by name.
pub fn by_name(name: &str) -> Option<Pomdp> {
    let text = match name {
        "tiger" => TIGER,
        "synthetic8" => SYNTHETIC8,
        "synthetic32" => SYNTHETIC32,
        "separated" => SEPARATED,
        _ => return None,
    };
    Some(parse_pomdp(text).expect("bundled model parses"))
}
