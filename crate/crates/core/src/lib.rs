//! Stabilizing random measures over finite point configurations, together with
//! two statistical applications and a seeded Monte Carlo harness for checking
//! their large-sample behaviour at desk scale.
//!
//! The crate is organised around five subsystems:
//!
//! - [`point_process`]: binomial and homogeneous Poisson samplers for (marked)
//!   configurations in `R^d`, local rescaling, and the nested-ball metric used
//!   to compare locally finite sets.
//! - [`geometry`]: exact k-nearest-neighbour queries, nearest-nucleus
//!   assignment, Voronoi cell volumes (Monte Carlo, with an exact 1-d oracle)
//!   and a cone-based stabilization-radius certificate.
//! - [`random_measure`]: rescaled per-point measures, their point-mass
//!   surrogates, test-function integration and the three add-one costs.
//! - [`estimators`]: Voronoi set estimation and the Gamma variance estimator
//!   for nonparametric regression, with closed-form limits.
//! - [`harness`]: experiment configuration, seeded replication runner and
//!   CSV/JSON report emission.
//!
//! # Example
//!
//! ```
//! use stabgeom::point_process::{DensitySpec, RngStream};
//! use stabgeom::geometry::{voronoi_volumes_mc, RegionSpec};
//!
//! let omega = RegionSpec::unit_box(2);
//! let kappa = DensitySpec::uniform(omega.clone()).unwrap();
//! let mut rng = RngStream::new(7, 0).rng();
//! let pts = stabgeom::point_process::sample_binomial(100, &kappa, &mut rng).unwrap();
//! let vols = voronoi_volumes_mc(&pts, &omega, 10_000, &mut rng).unwrap();
//! let total: f64 = vols.iter().sum();
//! assert!((total - 1.0).abs() < 1e-12); // cells partition the unit square
//! ```

pub mod error;
pub mod estimators;
pub mod geometry;
pub mod harness;
pub mod point_process;
pub mod random_measure;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
