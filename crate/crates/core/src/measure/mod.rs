//! Statistical observables computed from simulated trade streams.

pub mod bestvol;
pub mod fit;
pub mod impact;
pub mod markov;
pub mod profile;
pub mod signs;
pub mod variogram;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("need at least {needed} usable points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("lag {0} was not recorded")]
    MissingLag(usize),
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
}

pub use bestvol::BestVolumeHist;
pub use impact::{impact_fit, ImpactAcc};
pub use markov::{markov_check, MarkovAcc, Origins};
pub use profile::{profile_compare, ProfileAcc};
pub use signs::SignAutocorr;
pub use variogram::{hurst_fit, log_lags, phase_statistic, VariogramAcc};
