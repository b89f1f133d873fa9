//! Fits a reference model and runs the model-free and Markov detectors over
//! sliding windows of a scenario with an atypical user.
//!
//! cargo run --release --example stochastic_detectors

use netanom::config::DetectorParams;
use netanom::sim::{reference_trace, scenario_preset, simulate};
use netanom::stochastic::{detect_model_based, detect_model_free, sanov_threshold, ReferenceModel, SanovConfig};
use netanom::window::partition_windows;

fn main() -> netanom::Result<()> {
    let preset = scenario_preset("atypical_user")?;
    let params = DetectorParams::default();
    let flows = simulate(&preset)?;
    let reference = ReferenceModel::fit(&reference_trace(&preset)?, params.k, params.levels, preset.scenario.seed)?;
    println!("{} flow states", reference.alphabet_size());
    println!("threshold for 100 flows at 1% false alarms: {:.4}", sanov_threshold(params.epsilon, 100)?);

    let states = reference.states(&flows);
    let windows = partition_windows(&flows, params.window)?;
    let cfg = SanovConfig { epsilon: params.epsilon, mode: params.threshold_mode };
    let free = detect_model_free(&states, &windows, &reference, cfg)?;
    let markov = detect_model_based(&states, &windows, &reference, cfg)?;

    let (a, b) = (preset.scenario.anomaly_start, preset.scenario.anomaly_end);
    println!("anomaly in [{a}, {b}] s");
    for (w, (f, m)) in windows.iter().zip(free.iter().zip(&markov)) {
        if f.flagged || m.flagged {
            println!("  [{:>5.0}, {:>5.0}) n={:<3} H={:.4} H_B={:.4} thr={:.4} {}{}", w.start, w.end, w.len(), f.score, m.score, f.threshold, if f.flagged { "free " } else { "" }, if m.flagged { "markov" } else { "" });
        }
    }
    Ok(())
}
