//! Recovery of hierarchically block-sparse vectors with prior support
//! information, coherence analysis of measurement matrices, and numeric
//! evaluation of coherence-based recovery guarantees.

pub mod certificates;
pub mod coherence;
pub mod error;
pub mod experiment;
pub mod io;
pub mod linalg;
pub mod model;
pub mod recovery;

pub use certificates::{erc_certify, CertificateReport, ErcOptions, StepContext, Verdict};
pub use coherence::{CoherenceProfile, CoherenceStrategy, HierEstimate};
pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, SweepRow, TrialRecord};
pub use linalg::{BlockPartition, MixedP};
pub use model::{
    HierSignal, HierStructure, MeasurementMatrix, ModePsi, OverlapCounts, PriorSupport, SignalDist, WeightStrategy,
};
pub use recovery::{RecoveryResult, Selection, Status};
