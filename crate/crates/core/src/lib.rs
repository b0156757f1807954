pub mod error;
pub mod ode;
pub mod orbit;
pub mod jacobi;
pub mod profile;
pub mod spectral;
pub mod partition;
pub mod config;
pub mod cache;
pub mod report;
pub mod verify;

pub use config::Config;
pub use error::{Error, Result};
pub use jacobi::{reduce_jacobi, known_field, Bc, BcSpec, FieldTag, ReducedOperator};
pub use partition::{mr_bounds, robin_dirichlet_compare, split, PartitionReport};
pub use profile::{shoot_hsiang, solve_alencar, truncate_rescale, ProfileCurve, DEFAULT_TOL};
pub use report::{fbms_report, hsiang_report, IndexReport};
pub use spectral::{eigenpairs, threshold_counts, GapMode, Request, SpectralConfig, SpectralResult};
pub use verify::{verify_suite, Summary};
