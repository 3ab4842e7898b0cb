//! Policy-targeted CATE (PT-CATE) estimation.
//!
//! Standard two-stage CATE learners minimize squared error against a
//! pseudo-outcome; when the second-stage class is restricted, the minimizer
//! can threshold to a poor treatment policy even though its squared error is
//! optimal. This crate implements the retargeted second stage that trades a
//! little estimation accuracy for decision quality:
//!
//! * [`ndnet`] — small dense networks in f64 with hand-derived gradients,
//!   Adam, and a central-difference gradient oracle.
//! * [`datagen`] — synthetic data-generating processes with closed-form
//!   ground-truth CATE, dataset splitting, and Hillstrom CSV ingestion.
//! * [`nuisance`] — stage-1 estimation of the response surfaces and the
//!   propensity score (learned or oracle), with optional sample splitting.
//! * [`pseudo`] — the PI / RA / IPW / DR pseudo-outcome transforms and a
//!   Monte Carlo check of their conditional-mean property.
//! * [`ptcate`] — the retargeted loss, the adaptive-sharpness network, and
//!   the three-step training algorithm.
//! * [`evalkit`] — PEHE, policy loss, doubly robust policy values, and
//!   improvement tables.
//! * [`harness`] — YAML-driven sweeps over (gamma, seed, pseudo-outcome),
//!   CSV/SVG output, and the Hillstrom experiment.

pub mod datagen;
pub mod error;
pub mod evalkit;
pub mod harness;
pub mod math;
pub mod ndnet;
pub mod nuisance;
pub mod pseudo;
pub mod ptcate;

pub use error::{Error, Result};
