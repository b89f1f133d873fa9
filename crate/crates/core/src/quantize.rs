//! Uniform quantization of distilled flows into a finite alphabet of flow states.
//!
//! Each continuous feature (distance to cluster center, size, duration) gets
//! `L` equal-width bins over the range observed in the reference data; the
//! symbol of bin `m` is its midpoint. A flow state is the tuple
//! (cluster, distance bin, size bin, duration bin) packed into one index,
//! cluster-major.

use std::io::Write;

use crate::error::{Error, Result};
use crate::flow::{fmt_real, DistilledFlow};

/// Quantization levels per feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantLevels {
    pub distance: usize,
    pub size: usize,
    pub duration: usize,
}

impl QuantLevels {
    pub fn new(distance: usize, size: usize, duration: usize) -> Result<Self> {
        if distance == 0 || size == 0 || duration == 0 {
            return Err(Error::config("quantization levels must be at least 1"));
        }
        Ok(QuantLevels { distance, size, duration })
    }
}

impl Default for QuantLevels {
    /// Size 3, distance 2, duration 1.
    fn default() -> Self {
        QuantLevels { distance: 2, size: 3, duration: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureRange {
    pub min: f64,
    pub max: f64,
}

impl FeatureRange {
    fn observe<I: IntoIterator<Item = f64>>(values: I) -> Self {
        values.into_iter().fold(
            FeatureRange { min: f64::INFINITY, max: f64::NEG_INFINITY },
            |r, v| FeatureRange { min: r.min.min(v), max: r.max.max(v) },
        )
    }

    /// Bin of `v` among `levels` equal-width bins: the nearest midpoint, ties
    /// to the lower bin, out-of-range values clamped to the end bins.
    pub fn bin(&self, v: f64, levels: usize) -> usize {
        let width = self.max - self.min;
        if !(width > 0.0) {
            return 0;
        }
        let x = (v - self.min) / width * levels as f64;
        if !(x > 0.0) {
            return 0;
        }
        ((x.ceil() as usize).saturating_sub(1)).min(levels - 1)
    }

    /// Bin midpoints `min + (m + 1/2)(max - min)/L`.
    pub fn symbols(&self, levels: usize) -> Vec<f64> {
        let step = (self.max - self.min) / levels as f64;
        (0..levels).map(|m| self.min + (m as f64 + 0.5) * step).collect()
    }
}

/// A symbol in the flow-state alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlowState(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Quantizer {
    clusters: usize,
    levels: QuantLevels,
    distance: FeatureRange,
    size: FeatureRange,
    duration: FeatureRange,
}

/// Learns feature ranges from reference flows.
pub fn fit_quantizer(reference: &[DistilledFlow], clusters: usize, levels: QuantLevels) -> Result<Quantizer> {
    if reference.is_empty() {
        return Err(Error::config("cannot fit a quantizer on an empty reference"));
    }
    if clusters == 0 {
        return Err(Error::config("cluster count must be positive"));
    }
    QuantLevels::new(levels.distance, levels.size, levels.duration)?;
    Ok(Quantizer {
        clusters,
        levels,
        distance: FeatureRange::observe(reference.iter().map(|f| f.dist_to_center)),
        size: FeatureRange::observe(reference.iter().map(|f| f.size_bytes)),
        duration: FeatureRange::observe(reference.iter().map(|f| f.duration)),
    })
}

impl Quantizer {
    pub fn levels(&self) -> QuantLevels {
        self.levels
    }

    pub fn clusters(&self) -> usize {
        self.clusters
    }

    pub fn ranges(&self) -> (FeatureRange, FeatureRange, FeatureRange) {
        (self.distance, self.size, self.duration)
    }

    /// |Σ| = K · L_distance · L_size · L_duration.
    pub fn alphabet_size(&self) -> usize {
        self.clusters * self.levels.distance * self.levels.size * self.levels.duration
    }

    pub fn encode(&self, cluster: usize, distance: usize, size: usize, duration: usize) -> FlowState {
        let l = self.levels;
        FlowState(((cluster * l.distance + distance) * l.size + size) * l.duration + duration)
    }

    pub fn decode(&self, s: FlowState) -> (usize, usize, usize, usize) {
        let l = self.levels;
        let mut i = s.0;
        let duration = i % l.duration;
        i /= l.duration;
        let size = i % l.size;
        i /= l.size;
        let distance = i % l.distance;
        (i / l.distance, distance, size, duration)
    }

    pub fn quantize(&self, flow: &DistilledFlow) -> FlowState {
        let l = self.levels;
        // clusters beyond the fitted K cannot occur with a shared cluster model
        let cluster = flow.cluster.min(self.clusters - 1);
        self.encode(
            cluster,
            self.distance.bin(flow.dist_to_center, l.distance),
            self.size.bin(flow.size_bytes, l.size),
            self.duration.bin(flow.duration, l.duration),
        )
    }

    pub fn quantize_all(&self, flows: &[DistilledFlow]) -> Vec<FlowState> {
        flows.iter().map(|f| self.quantize(f)).collect()
    }

    /// CSV of `feature,min,max,levels`, plus a `clusters` row.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["feature", "min", "max", "levels"])?;
        for (name, r, l) in [
            ("distance", self.distance, self.levels.distance),
            ("size", self.size, self.levels.size),
            ("duration", self.duration, self.levels.duration),
        ] {
            wtr.write_record([name.to_string(), fmt_real(r.min), fmt_real(r.max), l.to_string()])?;
        }
        wtr.write_record(["clusters".to_string(), String::new(), String::new(), self.clusters.to_string()])?;
        wtr.flush()?;
        Ok(())
    }
}
