//! ranklab — a desk-scale laboratory for multi-objective slate ranking in a
//! two-stage (homepage → immersive feed) recommendation funnel.
//!
//! The crate wires together:
//!
//! * [`worldsim`] — a calibrated synthetic population with closed-form
//!   ground-truth behavior (click, conversion, view time, swipe-down,
//!   next-day return) and a deterministic session simulator;
//! * [`labels`] — label engineering for six objectives, including
//!   view-through binarization, swipe-down sample selection with
//!   conflict-filtered weights, and the look-ahead conversion label;
//! * [`predictor`] — a multi-head logistic model over hashed sparse
//!   features, with weighted-BCE training, AUC evaluation and an oracle
//!   scorer backed by the simulator's ground truth;
//! * [`ranker`] — point-wise ranking by a linear objective ensemble, plus
//!   look-ahead homepage ranking;
//! * [`reranker`] — exposure-discounted sequence evaluation, beam-search
//!   slate generation and an exact brute-force oracle;
//! * [`tuner`] — black-box search over ensemble weights against an AUC-sum
//!   objective;
//! * [`metrics`] — the measurement layer (bucketed rank correlations, exit
//!   tables, hitrate, session reports, paired lifts);
//! * [`harness`] — config-driven experiment pipelines with common random
//!   numbers across A/B arms, plus the brute-force oracle suites.
//!
//! Every stochastic component draws from seed-derived streams
//! ([`rng::stream`]), so whole experiment pipelines re-run byte-identically.
//!
//! Start with the `examples/` directory: each major capability has a
//! runnable example (`cargo run --release --example beam_vs_exhaustive`).

pub mod error;
pub mod features;
pub mod harness;
pub mod labels;
pub mod metrics;
pub mod predictor;
pub mod ranker;
pub mod reranker;
pub mod rng;
pub mod tuner;
pub mod worldsim;

pub use error::{Error, Result};
