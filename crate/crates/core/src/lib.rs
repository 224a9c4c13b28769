//! Random lower-triangular matrices as probabilistic Riemann sums.
//!
//! `X_N = (1/N)(X_ij)` with iid entries of mean `μ` behaves, after
//! embedding `R^N` into `L²[0,1]` as step functions, like `μ` times the
//! Volterra operator `(Vf)(x) = ∫_0^x f`. The modules here build the
//! finite-`N` objects and check the identities, moment bounds and
//! convergence trends around that statement:
//!
//! * [`ensembles`]: `T_N`, random samples `X_N`, the shifted GOE.
//! * [`funcspace`]: exact piecewise-polynomial `L²` model, `W_N`, `W_N*`, `V`.
//! * [`convergence`]: SOT/WOT errors, variance and Chebyshev bounds, schedules.
//! * [`spectra`]: singular values, eigenvalues, histograms, Volterra ladder.
//! * [`moments`]: exact integer traces of `T_N*T_N` and Monte Carlo trace moments.
//! * [`cli`]: configuration and experiment runners behind the `randtri` binary.

pub mod cli;
pub mod convergence;
pub mod ensembles;
pub mod error;
pub mod funcspace;
pub mod moments;
pub mod plot;
pub mod spectra;

pub use error::{Error, Result};
