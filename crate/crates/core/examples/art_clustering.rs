//! Clusters the flows of a scenario with ART and shows how the size
//! threshold tau decides which clusters are suspicious.
//!
//! cargo run --release --example art_clustering

use netanom::aggregate::art_features;
use netanom::art::{art_cluster, flag_art_clusters, ArtConfig};
use netanom::eval::{flow_truth, rates, tau_grid, tau_vs_false_alarm};
use netanom::sim::{scenario_preset, simulate};

fn main() -> netanom::Result<()> {
    let preset = scenario_preset("atypical_user")?;
    let flows = simulate(&preset)?;
    let cfg = ArtConfig::default();
    let state = art_cluster(&art_features(&flows, preset.server), &cfg)?;
    println!("{} flows -> {} clusters after {} passes (converged {})", flows.len(), state.n_clusters(), state.passes, state.converged);

    let mut order: Vec<usize> = (0..state.n_clusters()).collect();
    order.sort_by_key(|&k| state.members[k].len());
    for &k in order.iter().take(5) {
        let anomalous = state.members[k].iter().filter(|&&i| flows[i].is_anomalous()).count();
        println!("  cluster {k:>2}: {:>4} flows, {anomalous:>3} anomalous, size ratio {:.3}", state.members[k].len(), state.size_ratios()[k]);
    }

    let truth = flow_truth(&flows);
    let (dr, fa) = rates(&flag_art_clusters(&state, cfg.tau), &truth);
    println!("tau {}: detection {:.3}, false alarm {:.4}", cfg.tau, dr, fa);
    for (fa, tau) in tau_vs_false_alarm(&state, &truth, &tau_grid(6)) {
        println!("  tau {tau:.2} -> false alarm {fa:.4}");
    }
    Ok(())
}
