//! ART clustering over normalized `(n_f, d_b, b, d_t)` flow features, and the
//! small-cluster anomaly rule.
//!
//! Each pass walks the flows in order. A flow may join any cluster whose
//! vigilance-weighted distance to it is below `r`; among those it joins the
//! nearest by Euclidean distance and pulls the center toward itself with a
//! running mean. Otherwise it founds a new cluster. Every pass starts with
//! empty memberships but keeps the previous centers; clusters left empty are
//! dropped. The result is order-sensitive.

use std::io::Write;

use crate::error::{Error, Result};
use crate::flow::{fmt_real, ArtFlow};

pub const ART_DIM: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct ArtConfig {
    pub vigilance: [f64; ART_DIM],
    pub radius: f64,
    pub tau: f64,
    pub max_passes: usize,
}

impl Default for ArtConfig {
    fn default() -> Self {
        ArtConfig { vigilance: [0.2; ART_DIM], radius: 0.1, tau: 0.05, max_passes: 100 }
    }
}

impl ArtConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vigilance.iter().any(|&v| !(0.0..1.0).contains(&v)) {
            return Err(Error::config("vigilance entries must lie in [0,1)"));
        }
        if !(self.radius > 0.0) {
            return Err(Error::config(format!("radius must be positive, got {}", self.radius)));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::config(format!("tau must lie in [0,1], got {}", self.tau)));
        }
        if self.max_passes == 0 {
            return Err(Error::config("max_passes must be positive"));
        }
        Ok(())
    }
}

/// Per-dimension min-max scaling into `[0,1]`; constant dimensions map to 0.
pub fn normalize_art(flows: &[ArtFlow]) -> Vec<[f64; ART_DIM]> {
    let raw: Vec<[f64; ART_DIM]> = flows.iter().map(ArtFlow::features).collect();
    let mut lo = [f64::INFINITY; ART_DIM];
    let mut hi = [f64::NEG_INFINITY; ART_DIM];
    for g in &raw {
        for j in 0..ART_DIM {
            lo[j] = lo[j].min(g[j]);
            hi[j] = hi[j].max(g[j]);
        }
    }
    raw.iter()
        .map(|g| {
            let mut out = [0.0; ART_DIM];
            for j in 0..ART_DIM {
                let w = hi[j] - lo[j];
                out[j] = if w > 0.0 { (g[j] - lo[j]) / w } else { 0.0 };
            }
            out
        })
        .collect()
}

/// `Σ_j ((p_j - q_j)/(1 - v_j))²`.
pub fn art_distance(p: &[f64], q: &[f64], v: &[f64]) -> Result<f64> {
    if p.len() != q.len() || p.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), got: if q.len() != p.len() { q.len() } else { v.len() } });
    }
    Ok(weighted(p, q, v))
}

fn weighted(p: &[f64], q: &[f64], v: &[f64]) -> f64 {
    p.iter().zip(q).zip(v).map(|((a, b), w)| ((a - b) / (1.0 - w)).powi(2)).sum()
}

fn euclidean2(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `(p·c + g)/(p + 1)` componentwise.
pub fn update_center(center: &[f64], p: usize, g: &[f64]) -> Vec<f64> {
    let pf = p as f64;
    center.iter().zip(g).map(|(c, x)| (pf * c + x) / (pf + 1.0)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArtClusterState {
    pub centers: Vec<[f64; ART_DIM]>,
    /// Member flow indices per cluster, in processing order.
    pub members: Vec<Vec<usize>>,
    /// Cluster of each flow.
    pub assignment: Vec<usize>,
    pub passes: usize,
    pub converged: bool,
}

impl ArtClusterState {
    pub fn n_clusters(&self) -> usize {
        self.centers.len()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    /// `|T_k| · |C| / |G|`: cluster `k` is flagged exactly when this is below `τ`.
    pub fn size_ratios(&self) -> Vec<f64> {
        let (c, g) = (self.n_clusters() as f64, self.assignment.len() as f64);
        self.members.iter().map(|m| m.len() as f64 * c / g).collect()
    }
}

/// One clustering pass starting from `centers`. Returns the new state's
/// centers, members and assignment; empty clusters are dropped.
pub fn art_pass(points: &[[f64; ART_DIM]], centers: &[[f64; ART_DIM]], cfg: &ArtConfig) -> (Vec<[f64; ART_DIM]>, Vec<Vec<usize>>, Vec<usize>) {
    let mut centers: Vec<[f64; ART_DIM]> = centers.to_vec();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); centers.len()];
    let mut assignment = vec![0; points.len()];
    for (i, g) in points.iter().enumerate() {
        let best = centers
            .iter()
            .enumerate()
            .filter(|(_, c)| weighted(g, &c[..], &cfg.vigilance) < cfg.radius)
            .min_by(|(_, a), (_, b)| euclidean2(g, &a[..]).total_cmp(&euclidean2(g, &b[..])))
            .map(|(k, _)| k);
        let k = match best {
            Some(k) => {
                let c = update_center(&centers[k], members[k].len(), g);
                centers[k].copy_from_slice(&c);
                k
            }
            None => {
                centers.push(*g);
                members.push(Vec::new());
                centers.len() - 1
            }
        };
        members[k].push(i);
        assignment[i] = k;
    }
    // drop clusters that received no flow and renumber
    let mut remap = vec![usize::MAX; centers.len()];
    let mut kept_c = Vec::new();
    let mut kept_m = Vec::new();
    for (k, (c, m)) in centers.into_iter().zip(members).enumerate() {
        if !m.is_empty() {
            remap[k] = kept_c.len();
            kept_c.push(c);
            kept_m.push(m);
        }
    }
    for a in &mut assignment {
        *a = remap[*a];
    }
    (kept_c, kept_m, assignment)
}

/// Repeats passes until a pass reproduces the previous memberships.
pub fn art_cluster(flows: &[ArtFlow], cfg: &ArtConfig) -> Result<ArtClusterState> {
    art_cluster_points(&normalize_art(flows), cfg)
}

/// [`art_cluster`] on already normalized points.
pub fn art_cluster_points(points: &[[f64; ART_DIM]], cfg: &ArtConfig) -> Result<ArtClusterState> {
    cfg.validate()?;
    if points.is_empty() {
        return Err(Error::config("ART clustering needs at least one flow"));
    }
    let mut centers: Vec<[f64; ART_DIM]> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut assignment: Vec<usize> = Vec::new();
    for pass in 1..=cfg.max_passes {
        let (c, m, a) = art_pass(points, &centers, cfg);
        let stable = m == members;
        centers = c;
        members = m;
        assignment = a;
        if stable {
            return Ok(ArtClusterState { centers, members, assignment, passes: pass, converged: true });
        }
    }
    Ok(ArtClusterState { centers, members, assignment, passes: cfg.max_passes, converged: false })
}

/// Per-cluster flags: `|T_k| < τ·|G|/|C|`.
pub fn flag_art_cluster_ids(state: &ArtClusterState, tau: f64) -> Vec<bool> {
    let bound = tau * state.assignment.len() as f64 / state.n_clusters() as f64;
    state.members.iter().map(|m| (m.len() as f64) < bound).collect()
}

/// Per-flow flags: every flow in a flagged cluster.
pub fn flag_art_clusters(state: &ArtClusterState, tau: f64) -> Vec<bool> {
    let by_cluster = flag_art_cluster_ids(state, tau);
    state.assignment.iter().map(|&k| by_cluster[k]).collect()
}

/// Writes `cluster_id,size,center_1..center_4,flagged`.
pub fn write_art_clusters<W: Write>(w: W, state: &ArtClusterState, tau: f64) -> Result<()> {
    let flags = flag_art_cluster_ids(state, tau);
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["cluster_id", "size", "center_1", "center_2", "center_3", "center_4", "flagged"])?;
    for (k, (c, m)) in state.centers.iter().zip(&state.members).enumerate() {
        let mut row = vec![k.to_string(), m.len().to_string()];
        row.extend(c.iter().map(|&x| fmt_real(x)));
        row.push(u8::from(flags[k]).to_string());
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes `flow_index,cluster_id,flagged`.
pub fn write_art_flows<W: Write>(w: W, state: &ArtClusterState, tau: f64) -> Result<()> {
    let flags = flag_art_clusters(state, tau);
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["flow_index", "cluster_id", "flagged"])?;
    for (i, (&k, &f)) in state.assignment.iter().zip(&flags).enumerate() {
        wtr.write_record([i.to_string(), k.to_string(), u8::from(f).to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}
