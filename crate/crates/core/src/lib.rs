//! Goal-conditioned Q-learning for STRIPS planning domains with hindsight
//! relabeling over sets of ground atoms.

pub mod domains;
pub mod env;
pub mod eval;
pub mod her;
pub mod lifting;
pub mod planning;
pub mod qnet;
pub mod train;
