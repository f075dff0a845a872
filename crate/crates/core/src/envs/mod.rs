//! Environments: wall mazes and the toy goal chain.

mod maze;
mod toy;

pub use maze::{Action, Cell, GridMaze, SPIRAL10, UCORRIDOR};
pub use toy::ToyChain;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("invalid layout: {0}")]
    Layout(String),
    #[error("{0}")]
    Domain(String),
}
