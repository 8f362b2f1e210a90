pub mod bench;
pub mod dfa;
pub mod ltlf;
pub mod planner;
pub mod pomdp;
pub mod product;
pub mod solver;

use thiserror::Error;

/// Any pipeline failure, tagged with the stage it came from.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse: {0}")]
    Parse(#[from] ltlf::ParseError),
    #[error("compile: {0}")]
    Compile(#[from] dfa::DfaError),
    #[error("model: {0}")]
    Model(#[from] pomdp::PomdpError),
    #[error("product: {0}")]
    Product(#[from] product::ProductError),
    #[error("solve: {0}")]
    Solver(#[from] solver::SolverError),
    #[error("plan: {0}")]
    Planner(#[from] planner::PlannerError),
    #[error("unknown {kind} {name:?}")]
    UnknownName { kind: &'static str, name: String },
}
