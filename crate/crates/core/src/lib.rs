//! Reconstruction of explicit autonomous ODE systems `y' = f(y)` from sampled
//! trajectory data.
//!
//! The pipeline:
//!
//! 1. [`chebapprox`]: each component is linearly resampled onto Chebyshev
//!    nodes, projected onto a (truncated) Chebyshev series and differentiated
//!    by the backward coefficient recurrence;
//! 2. [`basis`]: the right-hand side is modelled as a linear combination of
//!    multivariate monomials of bounded total degree;
//! 3. [`lsq`]: the approximated trajectory and its derivative are sampled on
//!    a grid, giving one overdetermined system per component, solved by
//!    column-pivoted QR;
//! 4. [`model`]: small coefficients are dropped by a percentage threshold
//!    and the result is printed as a runtime protocol;
//! 5. [`integrate`]: the recovered system is integrated from the first data
//!    row and compared with the data;
//! 6. [`gaussnewton`]: optionally, the coefficients are refined by a damped
//!    Gauss-Newton fit of the integrated trajectory to the raw data.
//!
//! [`pipeline::reconstruct`] runs steps 1-4 on a [`dataset::Dataset`].
//!
//! ```
//! use ode_recon::{generate_pendulum_data, reconstruct, Dataset, RunConfig};
//!
//! let (theta1, theta2) = generate_pendulum_data(0.25, 2.0, 9.81, [1.0, 0.0], 10.0, 49)?;
//! let data = Dataset::new(vec![theta1, theta2])?;
//! let config = RunConfig {
//!     max_degree: 4,
//!     cheb_truncation: Some(62),
//!     threshold_pct: 5.0,
//!     ..RunConfig::default()
//! };
//! let rec = reconstruct(&data, &config)?;
//! println!("{}", rec.report());
//! # Ok::<(), ode_recon::Error>(())
//! ```

pub mod basis;
pub mod chebapprox;
pub mod dataset;
pub mod error;
pub mod gaussnewton;
pub mod integrate;
pub mod lsq;
pub mod model;
pub mod pipeline;

pub use basis::{MonomialBasis, MultiIndex};
pub use chebapprox::{ChebSeries, SampledSignal};
pub use dataset::Dataset;
pub use error::{Error, Result};
pub use gaussnewton::{refine, FitProblem, GnConfig, GnResult};
pub use integrate::{generate_pendulum_data, solve_ivp, verify, IvpOptions, IvpProblem, Trajectory, VerificationReport};
pub use lsq::{GramSystem, LsqSolution};
pub use model::RecoveredModel;
pub use pipeline::{reconstruct, Reconstruction, RunConfig};
