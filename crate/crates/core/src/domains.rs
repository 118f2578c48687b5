//! Built-in domain definitions.

use std::sync::Arc;

use crate::planning::{parse_domain, Domain, ParseError};

pub const BLOCKS: &str = include_str!("../domains/blocks.strips");
pub const GRIPPER: &str = include_str!("../domains/gripper.strips");
pub const MAZE: &str = include_str!("../domains/maze.strips");

/// Source text of a built-in domain by name.
pub fn source(name: &str) -> Option<&'static str> {
    match name {
        "blocks" => Some(BLOCKS),
        "gripper" => Some(GRIPPER),
        "maze" => Some(MAZE),
        _ => None,
    }
}

pub fn load(name: &str) -> Option<Result<Arc<Domain>, ParseError>> {
    source(name).map(|text| parse_domain(text).map(Arc::new))
}
