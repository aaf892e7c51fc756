//! Random-walk surrogate of the Brownian loop measure on `h ℤ²`.

pub mod domain;
pub mod green;
pub mod hull;
pub mod mass;
pub mod potential;
pub mod sets;
pub mod soup;
pub mod werner;

pub use domain::{LatticeDomain, Site, SiteSet};
pub use green::GreenOperator;
pub use mass::{hitting_mass, lambda_star, loop_mass, LambdaStarEstimate, MassKind, MassValue, DEFAULT_R_FACTORS};
pub use sets::SetSpec;
pub use soup::{sample_soup, LoopSample, SoupSample, SoupSampler};
pub use werner::{boundary_event_counts, werner_counts, werner_mass, SiteMask, WernerEstimate};
