//! The two SVM-based detectors: per-flow over `(d_a, b, d_t)` and per-window
//! over the concatenated empirical measures.

use std::io::Write;

use crate::error::{Error, Result};
use crate::flow::{fmt_real, DistilledFlow};
use crate::quantize::FlowState;
use crate::stochastic::WindowVerdict;
use crate::window::{empirical_measure, transition_measure, Window};

use super::ocsvm::{train_ocsvm, OcsvmModel, OcsvmParams};
use super::pca::{fit_pca, PcaModel};

/// Per-coordinate zero-mean, unit-variance scaling learned on training data.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Constant coordinates keep unit scale.
    pub fn fit(data: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = data.first() else {
            return Err(Error::config("cannot standardize an empty data set"));
        };
        let (d, n) = (first.len(), data.len() as f64);
        let mut mean = vec![0.0; d];
        for x in data {
            if x.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: x.len() });
            }
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for x in data {
            for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let std = var.into_iter().map(|v| if v > 0.0 { v.sqrt() } else { 1.0 }).collect();
        Ok(Standardizer { mean, std })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect()
    }
}

/// `1 / (dim · mean per-coordinate variance)`; falls back to `1/dim` on constant data.
pub fn default_gamma(data: &[Vec<f64>]) -> f64 {
    let Some(first) = data.first() else { return 1.0 };
    let (d, n) = (first.len().max(1), data.len() as f64);
    let mut total = 0.0;
    for j in 0..first.len() {
        let m = data.iter().map(|x| x[j]).sum::<f64>() / n;
        total += data.iter().map(|x| (x[j] - m).powi(2)).sum::<f64>() / n;
    }
    let mean_var = total / d as f64;
    if mean_var > 0.0 {
        1.0 / (d as f64 * mean_var)
    } else {
        1.0 / d as f64
    }
}

/// Shared SVM settings; `gamma = None` selects [`default_gamma`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmConfig {
    pub nu: f64,
    pub gamma: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl SvmConfig {
    pub fn new(nu: f64) -> Self {
        let p = OcsvmParams::new(nu, 1.0);
        SvmConfig { nu, gamma: None, tol: p.tol, max_iter: p.max_iter }
    }

    fn params(&self, train: &[Vec<f64>]) -> OcsvmParams {
        OcsvmParams { nu: self.nu, gamma: self.gamma.unwrap_or_else(|| default_gamma(train)), tol: self.tol, max_iter: self.max_iter }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowVerdict {
    pub flow_index: usize,
    pub start_time: f64,
    pub score: f64,
    pub flagged: bool,
}

fn flow_vector(f: &DistilledFlow) -> Vec<f64> {
    vec![f.dist_to_center, f.size_bytes, f.duration]
}

/// One-class SVM over standardized `(d_a, b, d_t)`; the cluster id is dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSvm {
    pub scaler: Standardizer,
    pub model: OcsvmModel,
}

impl FlowSvm {
    pub fn fit(train: &[DistilledFlow], cfg: SvmConfig) -> Result<Self> {
        let raw: Vec<Vec<f64>> = train.iter().map(flow_vector).collect();
        let scaler = Standardizer::fit(&raw)?;
        let z: Vec<Vec<f64>> = raw.iter().map(|x| scaler.apply(x)).collect();
        let model = train_ocsvm(&z, &cfg.params(&z))?;
        Ok(FlowSvm { scaler, model })
    }

    pub fn score(&self, flows: &[DistilledFlow]) -> Result<Vec<FlowVerdict>> {
        flows
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let score = self.model.decision_value(&self.scaler.apply(&flow_vector(f)))?;
                Ok(FlowVerdict { flow_index: i, start_time: f.start_time, score, flagged: score < 0.0 })
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let names = ["dist_to_center", "size_bytes", "duration"];
        let mut extra = Vec::new();
        for (i, n) in names.iter().enumerate() {
            extra.push((format!("mean_{n}"), self.scaler.mean[i]));
            extra.push((format!("std_{n}"), self.scaler.std[i]));
        }
        self.model.write_csv(w, &extra)
    }
}

/// Trains on `flows` and scores the same flows.
pub fn detect_flow_svm(flows: &[DistilledFlow], cfg: SvmConfig) -> Result<Vec<FlowVerdict>> {
    FlowSvm::fit(flows, cfg)?.score(flows)
}

/// Raw window feature `(E, flattened E_B, |G_j|)`; `None` for windows with fewer than two flows.
pub fn window_features(states: &[FlowState], windows: &[Window], sigma: usize) -> Result<Vec<Option<Vec<f64>>>> {
    windows
        .iter()
        .map(|w| {
            if w.len() < 2 {
                return Ok(None);
            }
            let ws: Vec<FlowState> = w.members.iter().map(|&i| states[i]).collect();
            let mut y = empirical_measure(&ws, sigma)?.probs().to_vec();
            y.extend_from_slice(transition_measure(&ws, sigma)?.probs());
            y.push(w.len() as f64);
            Ok(Some(y))
        })
        .collect()
}

/// Window one-class SVM: per-coordinate standardization, PCA, then the SVM.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSvm {
    pub scaler: Standardizer,
    pub pca: PcaModel,
    pub model: OcsvmModel,
}

impl WindowSvm {
    /// Trains on the non-degenerate entries of `features`.
    pub fn fit(features: &[Option<Vec<f64>>], cfg: SvmConfig, variance_target: f64) -> Result<Self> {
        let train: Vec<Vec<f64>> = features.iter().flatten().cloned().collect();
        if train.len() < 2 {
            return Err(Error::config("window SVM needs at least two windows with two or more flows"));
        }
        let scaler = Standardizer::fit(&train)?;
        let scaled: Vec<Vec<f64>> = train.iter().map(|y| scaler.apply(y)).collect();
        let pca = fit_pca(&scaled, variance_target)?;
        let z = scaled.iter().map(|y| pca.project(y)).collect::<Result<Vec<_>>>()?;
        let model = train_ocsvm(&z, &cfg.params(&z))?;
        Ok(WindowSvm { scaler, pca, model })
    }

    /// Sign rule: threshold 0, flagged when the decision value is negative.
    pub fn score(&self, features: &[Option<Vec<f64>>], windows: &[Window]) -> Result<Vec<WindowVerdict>> {
        windows
            .iter()
            .zip(features)
            .map(|(w, y)| match y {
                None => Ok(WindowVerdict::degenerate(w)),
                Some(y) => {
                    let score = self.model.decision_value(&self.pca.project(&self.scaler.apply(y))?)?;
                    Ok(WindowVerdict {
                        window_index: w.index,
                        start_time: w.start,
                        flows: w.len(),
                        score,
                        threshold: 0.0,
                        flagged: score < 0.0,
                        degenerate: false,
                    })
                }
            })
            .collect()
    }
}

/// Trains on the windows themselves and scores them.
pub fn detect_window_svm(states: &[FlowState], windows: &[Window], sigma: usize, cfg: SvmConfig, variance_target: f64) -> Result<Vec<WindowVerdict>> {
    let features = window_features(states, windows, sigma)?;
    WindowSvm::fit(&features, cfg, variance_target)?.score(&features, windows)
}

/// Writes `flow_index,start_time,score,flagged`.
pub fn write_flow_verdicts<W: Write>(w: W, verdicts: &[FlowVerdict]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["flow_index", "start_time", "score", "flagged"])?;
    for v in verdicts {
        wtr.write_record([v.flow_index.to_string(), fmt_real(v.start_time), fmt_real(v.score), u8::from(v.flagged).to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn nominal_flows(n: usize, seed: u64) -> Vec<DistilledFlow> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let size = Normal::new(4000.0, 1000.0).unwrap();
        (0..n)
            .map(|i| DistilledFlow {
                cluster: rng.random_range(0..3),
                dist_to_center: f64::from(rng.random_range(0u32..4)),
                size_bytes: size.sample(&mut rng),
                duration: rng.random_range(0.0..4.0),
                start_time: i as f64,
            })
            .collect()
    }

    #[test]
    fn standardizer_moments() {
        let data = vec![vec![1.0, 5.0], vec![3.0, 5.0]];
        let s = Standardizer::fit(&data).unwrap();
        assert_eq!(s.apply(&[1.0, 5.0]), vec![-1.0, 0.0]);
        assert!(Standardizer::fit(&[]).is_err());
        assert!((default_gamma(&[vec![-1.0, 0.0], vec![1.0, 0.0]]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn far_user_flows_flagged() {
        let mut flows = nominal_flows(1000, 1);
        for (k, f) in flows.iter_mut().step_by(100).enumerate() {
            f.dist_to_center = (3.0 + 2.0 * k as f64) * 16_777_216.0;
        }
        let v = detect_flow_svm(&flows, SvmConfig::new(0.05)).unwrap();
        for (i, x) in v.iter().enumerate() {
            if i % 100 == 0 {
                assert!(x.flagged, "flow {i}: {x:?}");
            }
        }
    }

    #[test]
    fn duplicated_flows_get_identical_verdicts() {
        let base = nominal_flows(100, 2);
        let doubled: Vec<DistilledFlow> = base.iter().flat_map(|f| [*f, *f]).collect();
        let v = detect_flow_svm(&doubled, SvmConfig::new(0.1)).unwrap();
        for pair in v.chunks(2) {
            assert_eq!(pair[0].score, pair[1].score);
            assert_eq!(pair[0].flagged, pair[1].flagged);
        }
    }

    fn windows_of(n: usize, per: usize) -> Vec<Window> {
        (0..n).map(|j| Window { index: j, start: j as f64, end: j as f64 + 1.0, members: (j * per..(j + 1) * per).collect() }).collect()
    }

    #[test]
    fn feature_dimension_and_degenerate_windows() {
        let states: Vec<FlowState> = (0..40).map(|i| FlowState(i % 3)).collect();
        let mut windows = windows_of(4, 10);
        windows.push(Window { index: 4, start: 4.0, end: 5.0, members: vec![0] });
        let f = window_features(&states, &windows, 3).unwrap();
        assert_eq!(f[0].as_ref().unwrap().len(), 3 + 9 + 1);
        assert!(f[4].is_none());
        let v = detect_window_svm(&states, &windows, 3, SvmConfig::new(0.5), 0.95).unwrap();
        assert!(v[4].degenerate && !v[4].flagged);
        assert!(v.iter().filter(|x| !x.degenerate).all(|x| x.threshold == 0.0 && x.flagged == (x.score < 0.0)));
    }

    #[test]
    fn identical_windows_not_systematically_flagged() {
        let pattern = [0, 1, 2, 2, 1, 0, 0, 1];
        let states: Vec<FlowState> = (0..50 * pattern.len()).map(|i| FlowState(pattern[i % pattern.len()])).collect();
        let windows = windows_of(50, pattern.len());
        let v = detect_window_svm(&states, &windows, 3, SvmConfig::new(0.1), 0.95).unwrap();
        let flagged = v.iter().filter(|x| x.flagged).count() as f64 / v.len() as f64;
        assert!(flagged <= 0.1 + 2.0 / (50f64).sqrt());
    }

    #[test]
    fn flow_verdict_csv() {
        let v = [FlowVerdict { flow_index: 0, start_time: 1.5, score: -0.25, flagged: true }];
        let mut buf = Vec::new();
        write_flow_verdicts(&mut buf, &v).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "flow_index,start_time,score,flagged\n0,1.5,-0.25,1\n");
    }
}
