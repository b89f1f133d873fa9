//! Compares the ART ROC curve with ART fused with the model-free window
//! detector, and writes both curves to an SVG.
//!
//! cargo run --release --example roc_fusion [out.svg]

use netanom::config::{DetectorParams, Method};
use netanom::eval::dominates;
use netanom::pipeline::{detect, evaluate, Dataset};
use netanom::sim::{reference_trace, scenario_preset, simulate};
use netanom::svg::{Chart, Series};

fn main() -> netanom::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "roc_fusion.svg".into());
    let preset = scenario_preset("atypical_user")?;
    let data = Dataset {
        flows: simulate(&preset)?,
        reference: reference_trace(&preset)?,
        server: preset.server,
        seed: preset.scenario.seed,
        preset: Some(preset.clone()),
    };
    let params = DetectorParams::default();
    let det = detect(&data, &params, &[Method::ModelFree, Method::Art])?;
    let eval = evaluate(&data.flows, &det.windows, &det.verdicts, params.art.tau)?;
    let (art, fused) = (&eval.rocs["art"], &eval.rocs["art_fused"]);
    let (all, some) = dominates(fused, art);
    // fusion only removes flags, so its curve ends at a smaller false alarm rate
    let end = |c: &netanom::eval::RocCurve| c.points.last().map_or(0.0, |p| p.false_alarm_rate);
    println!("ART reaches false alarm {:.3}, fused {:.4}", end(art), end(fused));
    println!("fused at least as good everywhere: {all}, strictly better somewhere: {some}");
    for fa in [0.001, 0.005, 0.01, 0.05] {
        println!("  false alarm {fa:<5}: ART {:.3}, fused {:.3}", art.detection_at(fa), fused.detection_at(fa));
    }
    let pts = |c: &netanom::eval::RocCurve| c.points.iter().map(|p| (p.false_alarm_rate, p.detection_rate)).collect();
    let chart = Chart::new("ART vs fused", "false alarm rate", "detection rate")
        .with(Series::line("ART", pts(art), "#1f4e9c"))
        .with(Series::line("fused", pts(fused), "#c0392b").dashed());
    std::fs::write(&out, chart.render())?;
    println!("written {out}");
    Ok(())
}
