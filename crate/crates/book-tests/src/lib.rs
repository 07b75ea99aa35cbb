//! Code listings of the guide in `book/`, compiled and run as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/levy-models.md")]
pub mod levy_models {}
#[doc = include_str!("../../../book/src/resolvent.md")]
pub mod resolvent {}
#[doc = include_str!("../../../book/src/hitting.md")]
pub mod hitting {}
#[doc = include_str!("../../../book/src/harmonic.md")]
pub mod harmonic {}
#[doc = include_str!("../../../book/src/lattice.md")]
pub mod lattice {}
#[doc = include_str!("../../../book/src/conditioned-dynamics.md")]
pub mod conditioned_dynamics {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
