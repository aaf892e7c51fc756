//! Loewner-evolution numerics: driving functions, loop energies and the
//! Liouville action.

pub mod zipper;

pub use zipper::{dirichlet_energy, extract_driving, trace_from_driving, DrivingFunction, GeodesicMap, Side};
pub mod rooted;

pub use rooted::{rooted_loop_energy, EnergyRoute, EnergyValue, DEFAULT_EPS_SCHEDULE};
pub mod welding;

pub use welding::{exact_map_pair, riemann_maps, ExteriorMap, InteriorMap, MapPair, MapSource};
pub mod liouville;

pub use liouville::{best_map_pair, equipotential_annulus, liouville_action, QuadratureSpec};
