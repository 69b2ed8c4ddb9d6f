//! Upper tail probabilities for the maximum of a chi-square random field
//! `Y(t) = ‖(Z_1(t), …, Z_m(t))‖` sampled on a product lattice, where each
//! `Z_k` is a Gaussian field with product Ornstein–Uhlenbeck correlation.
//!
//! * [`field_model`]: decay rates, lattices and unit-sphere functionals.
//! * [`special_fn`]: normal distribution functions and the overshoot function `ν`.
//! * [`tail_approx`]: renewal, volume-of-tube and continuous-index tail formulas.
//! * [`mc_sim`]: exact autoregressive simulation of the field.
//! * [`genome_scan`]: two-locus chi-square scans and adjusted p-values.
//!
//! ```
//! use chifield::field_model::{CovarianceSpec, Lattice};
//! use chifield::tail_approx::{tail, TailMethod, TailQuery};
//!
//! let lattice = Lattice::uniform(2, 100, 0.01).unwrap();
//! let q = TailQuery::new(CovarianceSpec::bc(), lattice, 4.0, TailMethod::Renewal);
//! let est = tail(&q).unwrap();
//! assert!(est.prob_clamped > 0.0 && est.prob_clamped < 1.0);
//! ```

pub mod error;
pub mod field_model;
pub mod genome_scan;
pub mod mc_sim;
pub mod rng;
pub mod special_fn;
pub mod tail_approx;

pub use error::{Error, Result};
