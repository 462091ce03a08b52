//! The bundled respiratory-care network and its variable names.

use crate::network::{Network, NetworkSpec};

/// Bundled network definition, as JSON.
pub const SYNSUM_JSON: &str = include_str!("../data/synsum.json");

pub const SYMPTOMS: [&str; 5] = crate::notegen::SYMPTOMS;
pub const DAYS_AT_HOME: &str = "days_at_home";
pub const ANTIBIOTICS: &str = "antibiotics";

/// Largest count with its own state for `days_at_home`; larger counts share
/// the tail state.
pub const DAY_CAP: u32 = 15;

pub fn synsum_spec() -> NetworkSpec {
    NetworkSpec::from_json(SYNSUM_JSON).expect("bundled network parses")
}

pub fn synsum_network() -> Network {
    Network::new(synsum_spec()).expect("bundled network is valid")
}
