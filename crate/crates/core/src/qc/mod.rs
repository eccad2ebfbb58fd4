//! Quasi-cyclic Tanner graphs: exponent matrices, lifting, cycles and a
//! girth/ACE driven shift search.

mod cycles;
mod protograph;
mod search;
mod tanner;

pub use cycles::{
    ace, ace_histogram, block_cycle_consistent, cycle_shifts, enumerate_cycles, enumerate_graph_cycles, girth,
    Cycle, MAX_CYCLES, MAX_CYCLE_LEN,
};
pub use protograph::{Family, MetProtograph};
pub use search::{optimize_lift, LiftResult, LiftTargets};
pub use tanner::{lift, TannerGraph};
