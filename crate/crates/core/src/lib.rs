//! Simulator and protocol library for SwarMer, a decentralized swarm-merging
//! localization protocol for flying light specks (FLSs).
//!
//! FLSs are dispatched toward the points of a ground-truth cloud and arrive
//! with dead-reckoning error. They then repeatedly pair up, localize one
//! swarm relative to another and merge until the estimated cloud matches
//! the ground truth up to a translation.

pub mod geometry;
pub mod rng;
pub mod localization;
pub mod protocol;
pub mod baselines;
pub mod netsim;
pub mod engine;
pub mod fixtures;
