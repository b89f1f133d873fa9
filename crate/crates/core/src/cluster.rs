//! K-means over user addresses and the distilled flow representation
//! (cluster id, distance to the cluster's center, size, duration).
//!
//! Clustering runs in the scaled octet embedding (octet k times 256^(3-k))
//! with squared Euclidean cost, where Lloyd means are well defined. Distances
//! reported on flows use the weighted-octet metric against the center rounded
//! back to an address.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::flow::{ip_distance, DistilledFlow, FlowRecord, IpAddress, OCTET_WEIGHTS};

const MAX_LLOYD_ITERS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct UserClusterModel {
    centers: Vec<[f64; 4]>,
    assignment: BTreeMap<IpAddress, usize>,
    cost_history: Vec<f64>,
}

fn sq_dist(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centers: &[[f64; 4]], p: &[f64; 4]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centers.iter().enumerate() {
        let d = sq_dist(c, p);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

/// Fits `k` clusters on a set of addresses. Deterministic for a given seed.
pub fn fit_user_clusters(addresses: &[IpAddress], k: usize, seed: u64) -> Result<UserClusterModel> {
    let uniq: Vec<IpAddress> = addresses.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if k == 0 {
        return Err(Error::config("cluster count K must be positive"));
    }
    if uniq.len() < k {
        return Err(Error::config(format!(
            "cannot form {k} user clusters from {} distinct addresses",
            uniq.len()
        )));
    }
    let points: Vec<[f64; 4]> = uniq.iter().map(IpAddress::scaled).collect();

    // farthest-point seeding from a random first center
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![points[rng.random_range(0..points.len())]];
    while centers.len() < k {
        let mut far = (0, -1.0);
        for (i, p) in points.iter().enumerate() {
            let d = nearest(&centers, p).1;
            if d > far.1 {
                far = (i, d);
            }
        }
        centers.push(points[far.0]);
    }

    let mut labels: Vec<usize> = vec![usize::MAX; points.len()];
    let mut cost_history = Vec::new();
    for _ in 0..MAX_LLOYD_ITERS {
        let next: Vec<usize> = points.iter().map(|p| nearest(&centers, p).0).collect();
        let changed = next != labels;
        labels = next;
        reseed_empty(&points, &mut centers, &mut labels);
        centers = means(&points, &labels, k);
        cost_history.push(cost(&points, &centers, &labels));
        if !changed {
            break;
        }
    }

    Ok(UserClusterModel {
        centers,
        assignment: uniq.into_iter().zip(labels).collect(),
        cost_history,
    })
}

/// Moves the point farthest from its own center into each empty cluster.
fn reseed_empty(points: &[[f64; 4]], centers: &mut [[f64; 4]], labels: &mut [usize]) {
    for c in 0..centers.len() {
        if labels.contains(&c) {
            continue;
        }
        let mut far = (usize::MAX, -1.0);
        for (i, p) in points.iter().enumerate() {
            let owner = labels[i];
            let members = labels.iter().filter(|&&l| l == owner).count();
            let d = sq_dist(p, &centers[owner]);
            if members > 1 && d > far.1 {
                far = (i, d);
            }
        }
        if far.0 != usize::MAX {
            labels[far.0] = c;
            centers[c] = points[far.0];
        }
    }
}

fn means(points: &[[f64; 4]], labels: &[usize], k: usize) -> Vec<[f64; 4]> {
    let mut sums = vec![[0.0; 4]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for j in 0..4 {
            sums[l][j] += p[j];
        }
    }
    sums.iter()
        .zip(&counts)
        .map(|(s, &n)| s.map(|v| v / n.max(1) as f64))
        .collect()
}

fn cost(points: &[[f64; 4]], centers: &[[f64; 4]], labels: &[usize]) -> f64 {
    points.iter().zip(labels).map(|(p, &l)| sq_dist(p, &centers[l])).sum()
}

impl UserClusterModel {
    pub fn k(&self) -> usize {
        self.centers.len()
    }

    /// Centers in the scaled octet embedding.
    pub fn centers(&self) -> &[[f64; 4]] {
        &self.centers
    }

    pub fn assignment(&self) -> &BTreeMap<IpAddress, usize> {
        &self.assignment
    }

    /// Within-cluster cost after every Lloyd iteration.
    pub fn cost_history(&self) -> &[f64] {
        &self.cost_history
    }

    /// Center `k` rounded to the nearest address (each octet clamped to 0..=255).
    pub fn rounded_center(&self, k: usize) -> IpAddress {
        let c = &self.centers[k];
        let mut octets = [0u8; 4];
        for j in 0..4 {
            octets[j] = (c[j] / OCTET_WEIGHTS[j]).round().clamp(0.0, 255.0) as u8;
        }
        IpAddress(octets)
    }

    /// Cluster of a training address, or the nearest center for unseen ones.
    pub fn cluster_of(&self, addr: IpAddress) -> usize {
        match self.assignment.get(&addr) {
            Some(&k) => k,
            None => nearest(&self.centers, &addr.scaled()).0,
        }
    }

    /// (cluster id, weighted-octet distance to the rounded center).
    pub fn locate(&self, addr: IpAddress) -> (usize, f64) {
        let k = self.cluster_of(addr);
        (k, ip_distance(addr, self.rounded_center(k)))
    }

    /// Writes `cluster_id,oct1,oct2,oct3,oct4` with rounded centers.
    pub fn write_centers<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["cluster_id", "oct1", "oct2", "oct3", "oct4"])?;
        for k in 0..self.k() {
            let o = self.rounded_center(k).octets();
            wtr.write_record([k.to_string(), o[0].to_string(), o[1].to_string(), o[2].to_string(), o[3].to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Writes `ip,cluster_id` for every training address.
    pub fn write_assignment<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["ip", "cluster_id"])?;
        for (ip, k) in &self.assignment {
            wtr.write_record([ip.to_string(), k.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Maps each flow to (k(x), d_a(x), b, d_t, t).
pub fn distill_flows(flows: &[FlowRecord], model: &UserClusterModel) -> Vec<DistilledFlow> {
    let mut cache: BTreeMap<IpAddress, (usize, f64)> = BTreeMap::new();
    flows
        .iter()
        .map(|f| {
            let (cluster, dist) = *cache.entry(f.user).or_insert_with(|| model.locate(f.user));
            DistilledFlow {
                cluster,
                dist_to_center: dist,
                size_bytes: f.size_bytes,
                duration: f.duration,
                start_time: f.start_time,
            }
        })
        .collect()
}
