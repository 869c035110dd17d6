//! Latent-liquidity order book simulator and measurement toolkit.

pub mod book;
pub mod engine;
pub mod fenwick;
pub mod flow;
pub mod measure;
pub mod propagator;
pub mod runner;
pub mod seed;
