//! Generates every built-in scenario and writes them as flow CSV files.
//!
//! cargo run --example traffic_simulation [out_dir]

use std::fs::{self, File};
use std::path::PathBuf;

use netanom::sim::{reference_trace, scenario_preset, simulate, SCENARIO_NAMES};
use netanom::flow::write_flows;

fn main() -> netanom::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "scenarios".into()));
    fs::create_dir_all(&dir)?;
    for name in SCENARIO_NAMES {
        let preset = scenario_preset(name)?;
        let flows = simulate(&preset)?;
        let reference = reference_trace(&preset)?;
        let anomalous = flows.iter().filter(|f| f.is_anomalous()).count();
        let s = &preset.scenario;
        println!(
            "{name:<18} {:>6} flows over {:>5.0} s, {anomalous:>4} anomalous in [{}, {}], reference {} flows",
            flows.len(),
            s.total_time,
            s.anomaly_start,
            s.anomaly_end,
            reference.len()
        );
        write_flows(File::create(dir.join(format!("{name}.csv")))?, &flows)?;
        write_flows(File::create(dir.join(format!("{name}_reference.csv")))?, &reference)?;
    }
    println!("written to {}", dir.display());
    Ok(())
}
