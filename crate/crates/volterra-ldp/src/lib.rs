//! Volterra-type Gaussian kernels, exact joint path simulation, variational
//! large-deviation rate functions, and small-noise/small-time option
//! asymptotics for fractional stochastic volatility models.
//!
//! The crate is organized in five layers:
//!
//! * [`kernels`] — kernel evaluation, cell integrals, covariances, and
//!   regularity diagnostics (L² modulus, Hölder slope, self-similarity
//!   defect) for the Brownian, Ornstein–Uhlenbeck, fBm, Riemann–Liouville,
//!   and fractional-OU families.
//! * [`gaussian`] — Cholesky simulation of (W, B, B̂) on a grid, the Nyström
//!   Karhunen–Loève spectrum, and the exponential-moment bound.
//! * [`rate`] — the variational rate functions I_T and Î_T solved by
//!   multistart L-BFGS over discretized Cameron–Martin controls.
//! * [`mc`] — the Monte Carlo harness verifying LDP slopes, the small-time
//!   reduction, and drift removal.
//! * [`asymptotics`] — binary/call/put log-asymptotes, implied-volatility
//!   limits, and Black–Scholes inversion.

pub mod asymptotics;
pub mod error;
pub mod gaussian;
pub mod kernels;
pub mod lbfgs;
pub mod linalg;
pub mod mc;
pub mod quad;
pub mod rate;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use gaussian::{JointPathBatch, KLSpectrum, MomentBound, PathGrid, PathSampler};
pub use kernels::{CovarianceGrid, KernelFamily, KernelSpec};
pub use mc::{LdpEstimate, ModelSpec, SmalltimeReport};
pub use rate::{ControlPath, HatMethod, RateResult, SigmaSpec, SolverConfig};
