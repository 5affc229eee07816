//! Compiler and cycle-level simulator for fixed-function combinational logic
//! blocks on a logic processing unit (LPU).
//!
//! The pipeline is: parse a gate-level [`netlist`], [`level`] and balance it,
//! [`partition`] it into maximal feasible subgraphs, [`schedule`] those into
//! static instruction queues, and execute the resulting program on the
//! [`sim`]ulator. [`oracle`] evaluates netlists directly and is the reference
//! every stage is checked against.

pub mod cli;
pub mod gen;
pub mod level;
pub mod netlist;
pub mod oracle;
pub mod partition;
pub mod pipeline;
pub mod program;
pub mod schedule;
pub mod sim;
pub mod word;
