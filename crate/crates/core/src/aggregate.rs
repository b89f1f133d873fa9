//! Packet-to-flow aggregation and the per-user ART flow representation.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::flow::{ensure_sorted, ip_distance, ArtFlow, FlowRecord, IpAddress, PacketRecord};

/// Inter-packet gap threshold. A gap of at least `delta_f` seconds between two
/// packets of the same user closes the current flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowGapConfig {
    pub delta_f: f64,
}

impl FlowGapConfig {
    pub fn new(delta_f: f64) -> Result<Self> {
        if !(delta_f > 0.0) || !delta_f.is_finite() {
            return Err(Error::config(format!("delta_f must be positive, got {delta_f}")));
        }
        Ok(FlowGapConfig { delta_f })
    }
}

impl Default for FlowGapConfig {
    fn default() -> Self {
        FlowGapConfig { delta_f: 10.0 }
    }
}

struct OpenFlow {
    start: f64,
    last: f64,
    bytes: f64,
}

impl OpenFlow {
    fn close(self, user: IpAddress) -> FlowRecord {
        FlowRecord {
            user,
            size_bytes: self.bytes,
            duration: self.last - self.start,
            start_time: self.start,
            label: None,
        }
    }
}

/// Sorts flows by start time, breaking ties by user address.
pub(crate) fn sort_flows(flows: &mut [FlowRecord]) {
    flows.sort_by(|a, b| a.start_time.total_cmp(&b.start_time).then(a.user.cmp(&b.user)));
}

/// Groups a time-sorted packet stream into flows, one open flow per user.
pub fn aggregate_packets(packets: &[PacketRecord], cfg: FlowGapConfig) -> Result<Vec<FlowRecord>> {
    ensure_sorted(packets)?;
    let mut open: HashMap<IpAddress, OpenFlow> = HashMap::new();
    let mut flows = Vec::new();
    for p in packets {
        match open.get_mut(&p.user) {
            Some(f) if p.start_time - f.last < cfg.delta_f => {
                f.last = p.start_time;
                f.bytes += p.size_bytes;
            }
            _ => {
                let fresh = OpenFlow {
                    start: p.start_time,
                    last: p.start_time,
                    bytes: p.size_bytes,
                };
                if let Some(done) = open.insert(p.user, fresh) {
                    flows.push(done.close(p.user));
                }
            }
        }
    }
    flows.extend(open.into_iter().map(|(user, f)| f.close(user)));
    sort_flows(&mut flows);
    Ok(flows)
}

/// Replaces each flow's user by (number of flows from that user in `flows`,
/// distance from the user to `server`).
pub fn art_features(flows: &[FlowRecord], server: IpAddress) -> Vec<ArtFlow> {
    let mut counts: HashMap<IpAddress, usize> = HashMap::new();
    for f in flows {
        *counts.entry(f.user).or_default() += 1;
    }
    flows
        .iter()
        .map(|f| ArtFlow {
            flow_count: counts[&f.user],
            dist_to_server: ip_distance(f.user, server),
            size_bytes: f.size_bytes,
            duration: f.duration,
            start_time: f.start_time,
        })
        .collect()
}
