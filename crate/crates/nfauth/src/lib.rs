//! Continuous implicit authentication from behavioral event streams.
//!
//! The crate models one device owner's habits — which apps, contacts, sites,
//! and networks they touch, for how long, and in what rhythm — as a set of
//! decaying ranking lists plus per-item duration statistics. Live activity is
//! scored against that profile, scores are aggregated per screen session, and
//! a small neuro-fuzzy classifier maps the aggregate evidence to a verdict:
//! legitimate, suspicious, or adversary.

pub mod anfis;
pub mod error;
pub mod events;
pub mod harness;
pub mod pipeline;
pub mod ranklist;
pub mod reference;
pub mod scoring;

pub use error::{Error, Result};
