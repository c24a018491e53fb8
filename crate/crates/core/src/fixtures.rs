//! Scenarios shipped with the crate. Each one passes `certify`.

use crate::error::{Error, Result};
use crate::scenario::{parse_scenario, Scenario};

const FIXTURES: &[(&str, &str)] = &[
    ("three_node_fault", include_str!("../fixtures/three_node_fault.json")),
    ("chain", include_str!("../fixtures/chain.json")),
    ("twelve_node_oscillator", include_str!("../fixtures/twelve_node_oscillator.json")),
    ("twelve_node_oscillator_collab", include_str!("../fixtures/twelve_node_oscillator_collab.json")),
    ("eight_node_discrete", include_str!("../fixtures/eight_node_discrete.json")),
    ("partial_state_observer", include_str!("../fixtures/partial_state_observer.json")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    FIXTURES.iter().map(|(n, _)| *n)
}

/// Raw JSON of a bundled scenario.
pub fn source(name: &str) -> Option<&'static str> {
    FIXTURES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn load(name: &str) -> Result<Scenario> {
    let text = source(name).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "no bundled scenario named {name:?}; available: {}",
            names().collect::<Vec<_>>().join(", ")
        ))
    })?;
    parse_scenario(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_fixtures_parse_with_matching_ids() {
        for name in names() {
            let s = load(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(s.id, name);
        }
        assert!(load("nope").is_err());
    }
}
