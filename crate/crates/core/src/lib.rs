//! Boundary recognition in dense sensor networks from neighborhood sizes
//! alone, with a synchronous message-passing simulator and geometric
//! oracles to score the results.

pub mod boundary;
pub mod convergetree;
pub mod geometry;
pub mod netgraph;
pub mod pipeline;
pub mod regions;
pub mod simkernel;
pub mod topo;
