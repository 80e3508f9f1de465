pub mod chain;
pub mod chor;
pub mod cli;
pub mod equivalence;
pub mod expr;
pub mod frontend;
pub mod prism;
pub mod projection;
pub mod semantics;
pub mod state;
