//! Window-level one-class SVM on a DDoS flood: per-window state histograms,
//! PCA, and the SVM trained on clean reference windows.
//!
//! cargo run --release --example window_svm

use netanom::config::DetectorParams;
use netanom::sim::{reference_trace, scenario_preset, simulate, ScenarioKind};
use netanom::stochastic::ReferenceModel;
use netanom::svm::{window_features, SvmConfig, WindowSvm};
use netanom::window::partition_windows;

fn main() -> netanom::Result<()> {
    let preset = scenario_preset("ddos_flood")?;
    let params = DetectorParams::for_scenario(ScenarioKind::DdosFlood);
    let reference_flows = reference_trace(&preset)?;
    let reference = ReferenceModel::fit(&reference_flows, params.k, params.levels, preset.scenario.seed)?;
    let sigma = reference.alphabet_size();

    let ref_windows = partition_windows(&reference_flows, params.window)?;
    let train = window_features(&reference.states(&reference_flows), &ref_windows, sigma)?;
    let mut cfg = SvmConfig::new(params.window_nu);
    cfg.gamma = params.gamma;
    let svm = WindowSvm::fit(&train, cfg, params.variance_target)?;
    println!("{} training windows, {} features, {} principal components", train.len(), sigma + 1, svm.pca.n_components());

    let flows = simulate(&preset)?;
    let windows = partition_windows(&flows, params.window)?;
    let verdicts = svm.score(&window_features(&reference.states(&flows), &windows, sigma)?, &windows)?;
    let (a, b) = (preset.scenario.anomaly_start, preset.scenario.anomaly_end);
    let inside: Vec<_> = windows.iter().zip(&verdicts).filter(|(w, _)| w.start < b && w.end > a).collect();
    let hit = inside.iter().filter(|(_, v)| v.flagged).count();
    let outside = verdicts.iter().filter(|v| v.flagged).count() - hit;
    println!("flood in [{a}, {b}] s: {hit}/{} overlapping windows flagged, {outside}/{} others", inside.len(), windows.len() - inside.len());
    Ok(())
}
