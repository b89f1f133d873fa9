//! Host-based network anomaly detection over flow records.
//!
//! Five detectors share one flow model:
//!
//! * **model-free**: relative entropy of a window's flow-state frequencies
//!   against a reference distribution;
//! * **model-based**: the same against a reference Markov chain over flow states;
//! * **flow SVM**: a one-class SVM over individual flows;
//! * **window SVM**: a one-class SVM over per-window empirical measures;
//! * **ART clustering**: small clusters of flows are anomalous.
//!
//! Around them sit packet-to-flow aggregation, user clustering and
//! quantization, a labeled traffic simulator, ROC evaluation, and a run
//! pipeline writing CSV and SVG artifacts.

pub mod aggregate;
pub mod art;
pub mod cluster;
pub mod config;
pub mod error;
pub mod eval;
pub mod flow;
pub mod pipeline;
pub mod quantize;
pub mod sim;
pub mod stochastic;
pub mod svg;
pub mod svm;
pub mod window;

pub use error::{Error, Result};
pub use flow::{ip_distance, ArtFlow, DistilledFlow, FlowRecord, IpAddress, Label, PacketRecord};
