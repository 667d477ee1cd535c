//! Temporal persistence of motifs in TMFG-filtered correlation networks.
//!
//! The numeric core is generic over [`scalar::Scalar`] (`f32` or `f64`); the
//! aliases below fix the common instantiations.

pub mod correlation;
pub mod filtergraph;
pub mod ingest;
pub mod persistence;
pub mod pipeline;
pub mod portfolio;
pub mod regimefit;
pub mod scalar;
pub mod synth;

use thiserror::Error;

/// Error of any pipeline stage, prefixed with the module that raised it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("ingest: {0}")]
    Ingest(#[from] ingest::IngestError),
    #[error("correlation: {0}")]
    Correlation(#[from] correlation::CorrelationError),
    #[error("filtergraph: {0}")]
    Graph(#[from] filtergraph::GraphError),
    #[error("persistence: {0}")]
    Persistence(persistence::PersistenceError),
    #[error("regimefit: {0}")]
    Regime(#[from] regimefit::RegimeError),
    #[error("portfolio: {0}")]
    Portfolio(#[from] portfolio::PortfolioError),
    #[error("synth: {0}")]
    Synth(#[from] synth::SynthError),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {path}: {message}")]
    Io { path: String, message: String },
}

impl From<persistence::PersistenceError> for Error {
    /// Lifts wrapped lower-level errors back to their own module.
    fn from(e: persistence::PersistenceError) -> Self {
        use persistence::PersistenceError as P;
        match e {
            P::Ingest(e) => Error::Ingest(e),
            P::Correlation(e) => Error::Correlation(e),
            P::Graph(e) => Error::Graph(e),
            other => Error::Persistence(other),
        }
    }
}

pub type ReturnPanel64 = ingest::ReturnPanel<f64>;
pub type ReturnPanel32 = ingest::ReturnPanel<f32>;
pub type PricePanel64 = ingest::PricePanel<f64>;
pub type PricePanel32 = ingest::PricePanel<f32>;
pub type CorrelationMatrix64 = correlation::CorrelationMatrix<f64>;
pub type CorrelationMatrix32 = correlation::CorrelationMatrix<f32>;
pub type WeightVector64 = correlation::WeightVector<f64>;
pub type WeightVector32 = correlation::WeightVector<f32>;
pub type LayerSeries64 = persistence::LayerSeries<f64>;
pub type LayerSeries32 = persistence::LayerSeries<f32>;
pub type PersistenceCurve64 = persistence::PersistenceCurve<f64>;
pub type PersistenceCurve32 = persistence::PersistenceCurve<f32>;
pub type NodePersistence64 = persistence::NodePersistence<f64>;
pub type NodePersistence32 = persistence::NodePersistence<f32>;
pub type TwoRegimeFit64 = regimefit::TwoRegimeFit<f64>;
pub type TwoRegimeFit32 = regimefit::TwoRegimeFit<f32>;
pub type Portfolio64 = portfolio::Portfolio<f64>;
pub type Portfolio32 = portfolio::Portfolio<f32>;
