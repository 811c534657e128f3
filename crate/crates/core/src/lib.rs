//! Sampling from constrained distributions by running Langevin dynamics in
//! the image of a mirror map.
//!
//! Distributions supported out of the box live on the open probability
//! simplex (Dirichlet posteriors over categorical counts, products of
//! simplices) and the positive half-line. The crate provides:
//!
//! * [`mirror`]: the entropic mirror map and its calculus (conjugate,
//!   gradients, Hessian log-determinant, inverse-Hessian apply), a blockwise
//!   product map, and the Burg map on the half-line.
//! * [`targets`]: Dirichlet-posterior potentials in primal and dual form,
//!   full and mini-batch dual gradients, and a generic drift builder for
//!   arbitrary smooth primal potentials.
//! * [`samplers`]: the mirrored Langevin step in both equivalent forms, its
//!   stochastic-gradient variant, a stochastic-gradient Riemannian Langevin
//!   baseline, an exact Dirichlet sampler, and a square-root diffusion demo.
//! * [`diagnostics`]: histograms, total-variation distance, convergence-rate
//!   fits, finite-difference gradient checks, step-size grid search, and a
//!   one-dimensional transport distance.
//! * [`experiments`]: reproducible experiment drivers behind the `mirrorlang`
//!   command-line binary, writing deterministic CSV and JSON artifacts.
//!
//! # Example
//!
//! Draw approximate samples from a Dirichlet posterior by running the
//! dynamics in dual space and mapping back through the mirror map:
//!
//! ```
//! use mirrorlang::mirror::entropic_grad_h_star;
//! use mirrorlang::targets::DirichletModel;
//! use mirrorlang::samplers::{mld_step_dual, ChainState, NoiseStream};
//!
//! let model = DirichletModel::new(vec![3.0, 1.0, 0.0], vec![1.0, 1.0, 1.0]).unwrap();
//! let mut state = ChainState::zero(model.dim());
//! let mut noise = NoiseStream::for_chain(42, 0);
//! for _ in 0..1000 {
//!     let g = model.grad_w(state.y()).unwrap();
//!     let xi = noise.standard_normal(model.dim());
//!     mld_step_dual(&mut state, &g, 5e-3, &xi).unwrap();
//! }
//! let x = entropic_grad_h_star(state.y()).unwrap();
//! assert!(x.coords().iter().all(|&c| c > 0.0));
//! ```

pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod mirror;
pub mod samplers;
pub mod targets;

pub use error::{Error, Result};
