//! One-class SVM core, PCA, and the flow and window SVM detectors.

mod detect;
mod ocsvm;
mod pca;

pub use detect::{
    default_gamma, detect_flow_svm, detect_window_svm, window_features, write_flow_verdicts, FlowSvm, FlowVerdict, Standardizer,
    SvmConfig, WindowSvm,
};
pub use ocsvm::{rbf_kernel, solve_dual, train_ocsvm, DualSolution, OcsvmModel, OcsvmParams};
pub use pca::{fit_pca, PcaModel};
