//! Topological and spectral invariants of trapping sets, permanents and the
//! permanent bound on code distance.

mod golden;
mod invariants;
mod permanent;
mod trapping;

pub use golden::{bundled_trapping_sets, compare_golden, CellCheck, GoldenCell, GoldenEntry, GoldenTable};
pub use invariants::{
    betti, continuous_genus, dirac_spectrum, genus_of_spectrum, homological_index, kasparov_k, negative_modes,
    spanning_forest_incidence, spectral_radius, invariant_report, variable_adjacency, variable_check_incidence,
    variable_graph, Betti, InvariantReport, NEGATIVE_TOL, ZERO_TOL,
};
pub use permanent::{
    bethe_free_energy, bethe_permanent, dmin_upper_bound, permanent, BethePermanent, BETHE_CAP, PERMANENT_CAP,
};
pub use trapping::TrappingSet;
