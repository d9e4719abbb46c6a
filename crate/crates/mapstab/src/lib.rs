//! Temporal-stability metrics for vectorized bird's-eye-view map predictions.
//!
//! Online mapping models re-estimate the local map every frame, and two
//! frames of the same scene can disagree even when each frame looks fine in
//! isolation. This crate measures that disagreement: it samples frame pairs
//! from a sequence, associates predicted map elements across the pair through
//! the ground truth, aligns them into a common ego frame, and scores each
//! instance on three axes — detection consistency (presence), lateral
//! deviation (localization), and curvature agreement (shape) — which combine
//! into a per-class stability score and a mean across classes (mAS).
//!
//! The crate also ships a synthetic-sequence generator whose perturbation
//! knobs (score flicker, lateral jitter, midpoint bend, dropout, drift, bias)
//! each move exactly one sub-metric by a hand-computable amount, so every
//! number the pipeline emits can be checked against a closed form.
//!
//! The `mapstab` CLI wraps the same pipeline; see the book under `book/` for
//! a guided tour, or start with [`eval::evaluate`] and [`synth`].

pub mod book;
pub mod config;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod matching;
pub mod metrics;
pub mod rng;
pub mod sampling;
pub mod seq;
pub mod synth;
