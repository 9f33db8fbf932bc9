pub mod aiger;
pub mod epr;
pub mod formula;
pub mod game;
pub mod generators;
pub mod learning;
pub mod parallel;
pub mod qesolve;
pub mod reachopt;
pub mod sat;
pub mod template;
pub mod verify;
mod watch;
