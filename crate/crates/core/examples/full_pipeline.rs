//! Runs all five detectors on every built-in scenario and prints how each
//! one does on the anomaly interval.
//!
//! cargo run --release --example full_pipeline [seed]

use std::time::Instant;

use netanom::config::{DetectorParams, Method};
use netanom::eval::rates;
use netanom::pipeline::{detect, evaluate, Dataset};
use netanom::sim::{reference_trace, scenario_preset, simulate, SCENARIO_NAMES};

fn main() -> netanom::Result<()> {
    let seed: Option<u64> = std::env::args().nth(1).and_then(|s| s.parse().ok());
    for name in SCENARIO_NAMES {
        let t0 = Instant::now();
        let mut preset = scenario_preset(name)?;
        if let Some(s) = seed {
            preset.scenario.seed = s;
        }
        let (ta, tb) = (preset.scenario.anomaly_start, preset.scenario.anomaly_end);
        let data = Dataset {
            flows: simulate(&preset)?,
            reference: reference_trace(&preset)?,
            server: preset.server,
            seed: preset.scenario.seed,
            preset: Some(preset.clone()),
        };
        let params = DetectorParams::for_scenario(preset.scenario.kind);
        let det = detect(&data, &params, &Method::ALL)?;
        let eval = evaluate(&data.flows, &det.windows, &det.verdicts, params.art.tau)?;
        let anomalous = eval.flow_truth.iter().filter(|&&t| t).count();
        println!("== {name}: {} flows ({anomalous} anomalous), {} windows, {:.1?}", data.flows.len(), det.windows.len(), t0.elapsed());

        // windows judged by overlap with the anomaly interval
        let overlap: Vec<bool> = det.windows.iter().map(|w| w.start < tb && w.end > ta).collect();
        for (m, vs) in &det.verdicts.windows {
            let flags: Vec<bool> = vs.iter().map(|v| v.flagged).collect();
            let (dr, fa) = rates(&flags, &overlap);
            println!("  {:<12} windows overlapping: {:>5.1}% flagged, others: {:>5.1}%", m.name(), 100.0 * dr, 100.0 * fa);
        }
        for s in eval.summary.iter().filter(|s| s.unit == "flow") {
            println!("  {:<12} flows anomalous: {:>5.1}% flagged, nominal: {:>5.1}%", s.method, 100.0 * s.detection_rate, 100.0 * s.false_alarm_rate);
        }
        if let Some(roc) = eval.rocs.get("art") {
            println!("  art ROC area {:.3}", roc.auc());
        }
    }
    Ok(())
}
