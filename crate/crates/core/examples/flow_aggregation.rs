//! Groups a synthetic packet stream into flows and derives the per-flow
//! features used by clustering and ART.
//!
//! cargo run --example flow_aggregation

use netanom::aggregate::{aggregate_packets, art_features, FlowGapConfig};
use netanom::cluster::{distill_flows, fit_user_clusters};
use netanom::{ip_distance, IpAddress, PacketRecord};

fn main() -> netanom::Result<()> {
    let server = IpAddress::new(10, 0, 0, 100);
    let users = [IpAddress::new(10, 0, 0, 1), IpAddress::new(10, 0, 0, 2), IpAddress::new(10, 0, 3, 7)];
    println!("distance {} -> {}: {}", users[0], users[2], ip_distance(users[0], users[2]));

    // bursts of packets separated by long pauses
    let mut packets = Vec::new();
    for (u, user) in users.iter().enumerate() {
        for burst in 0..3 {
            let t0 = 100.0 * burst as f64 + 7.0 * u as f64;
            for p in 0..5 {
                packets.push(PacketRecord { user: *user, size_bytes: 1500.0, start_time: t0 + 0.5 * p as f64 });
            }
        }
    }
    packets.sort_by(|a, b| a.start_time.total_cmp(&b.start_time));

    let flows = aggregate_packets(&packets, FlowGapConfig::new(10.0)?)?;
    println!("{} packets -> {} flows", packets.len(), flows.len());
    for f in flows.iter().take(4) {
        println!("  {} start {:>5.1} s, {:>4.1} s, {} bytes", f.user, f.start_time, f.duration, f.size_bytes);
    }

    let addresses: Vec<_> = flows.iter().map(|f| f.user).collect();
    let model = fit_user_clusters(&addresses, 2, 1)?;
    for (k, _) in model.centers().iter().enumerate() {
        println!("cluster {k} center ~ {}", model.rounded_center(k));
    }
    let d = distill_flows(&flows, &model)[0];
    println!("first flow: cluster {}, {:.0} from its center", d.cluster, d.dist_to_center);

    let a = art_features(&flows, server)[0];
    println!("first flow for ART: {} flows from this user, {:.0} from the server", a.flow_count, a.dist_to_server);
    Ok(())
}
