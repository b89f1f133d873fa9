//! Ground truth, ROC curves, the τ / false-alarm relation of ART, and fusion
//! of flow-level alarms with flagged windows.

use std::io::Write;

use crate::art::{flag_art_clusters, ArtClusterState};
use crate::error::{Error, Result};
use crate::flow::{fmt_real, FlowRecord};
use crate::stochastic::WindowVerdict;
use crate::window::Window;

/// A window is anomalous iff it holds at least one anomalous flow.
pub fn label_windows(windows: &[Window], flows: &[FlowRecord]) -> Vec<bool> {
    windows.iter().map(|w| w.members.iter().any(|&i| flows[i].is_anomalous())).collect()
}

pub fn flow_truth(flows: &[FlowRecord]) -> Vec<bool> {
    flows.iter().map(FlowRecord::is_anomalous).collect()
}

/// `(detection rate, false alarm rate)` of `flags` against `truth`. A rate
/// with no items in its class is 0.
pub fn rates(flags: &[bool], truth: &[bool]) -> (f64, f64) {
    let (mut tp, mut fp, mut pos, mut neg) = (0usize, 0usize, 0usize, 0usize);
    for (&f, &t) in flags.iter().zip(truth) {
        if t {
            pos += 1;
            tp += usize::from(f);
        } else {
            neg += 1;
            fp += usize::from(f);
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    (ratio(tp, pos), ratio(fp, neg))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub false_alarm_rate: f64,
    pub detection_rate: f64,
}

/// Points in sweep order; both rates non-decreasing along it.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

fn check_truth(truth: &[bool]) -> Result<()> {
    if !truth.iter().any(|&t| t) || truth.iter().all(|&t| t) {
        return Err(Error::config("ROC needs at least one positive and one negative example"));
    }
    Ok(())
}

/// Flags items with `score >= threshold` for every distinct score, from
/// `+inf` (nothing flagged) down to `-inf` (everything flagged).
pub fn roc_curve(scores: &[f64], truth: &[bool]) -> Result<RocCurve> {
    if scores.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: scores.len() });
    }
    check_truth(truth)?;
    let mut thresholds: Vec<f64> = scores.iter().copied().filter(|s| !s.is_nan()).collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut points = vec![RocPoint { threshold: f64::INFINITY, false_alarm_rate: 0.0, detection_rate: 0.0 }];
    for &th in thresholds.iter().chain(std::iter::once(&f64::NEG_INFINITY)) {
        let flags: Vec<bool> = scores.iter().map(|&s| th == f64::NEG_INFINITY || s >= th).collect();
        let (dr, fa) = rates(&flags, truth);
        points.push(RocPoint { threshold: th, false_alarm_rate: fa, detection_rate: dr });
    }
    Ok(RocCurve { points })
}

/// Thresholds for an ART τ sweep: 0, then just above each distinct cluster size ratio.
pub fn art_tau_sweep(state: &ArtClusterState) -> Vec<f64> {
    let mut ratios = state.size_ratios();
    ratios.sort_by(f64::total_cmp);
    ratios.dedup();
    std::iter::once(0.0).chain(ratios.into_iter().map(f64::next_up)).collect()
}

fn sweep<F: Fn(f64) -> Vec<bool>>(taus: &[f64], truth: &[bool], flags: F) -> Result<RocCurve> {
    check_truth(truth)?;
    let points = taus
        .iter()
        .map(|&tau| {
            let (dr, fa) = rates(&flags(tau), truth);
            RocPoint { threshold: tau, false_alarm_rate: fa, detection_rate: dr }
        })
        .collect();
    Ok(RocCurve { points })
}

/// ROC of ART with τ as the sweep parameter.
pub fn art_roc(state: &ArtClusterState, truth: &[bool]) -> Result<RocCurve> {
    sweep(&art_tau_sweep(state), truth, |tau| flag_art_clusters(state, tau))
}

/// ROC of ART flags intersected with `in_flagged_window`, swept over τ.
pub fn fused_art_roc(state: &ArtClusterState, in_flagged_window: &[bool], truth: &[bool]) -> Result<RocCurve> {
    sweep(&art_tau_sweep(state), truth, |tau| {
        flag_art_clusters(state, tau).iter().zip(in_flagged_window).map(|(&a, &w)| a && w).collect()
    })
}

/// Per flow: does it belong to at least one flagged window?
pub fn flows_in_flagged_windows(verdicts: &[WindowVerdict], windows: &[Window], n_flows: usize) -> Vec<bool> {
    let mut out = vec![false; n_flows];
    for (v, w) in verdicts.iter().zip(windows) {
        if v.flagged {
            for &i in &w.members {
                out[i] = true;
            }
        }
    }
    out
}

/// Flow flagged iff the flow method flagged it and it lies in a flagged window.
pub fn fuse(flow_flags: &[bool], verdicts: &[WindowVerdict], windows: &[Window]) -> Vec<bool> {
    let inside = flows_in_flagged_windows(verdicts, windows, flow_flags.len());
    flow_flags.iter().zip(&inside).map(|(&a, &b)| a && b).collect()
}

/// `n` evenly spaced values over `[0, 1]`.
pub fn tau_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

/// `(false alarm rate on nominal flows, τ)` for each τ.
pub fn tau_vs_false_alarm(state: &ArtClusterState, truth: &[bool], taus: &[f64]) -> Vec<(f64, f64)> {
    taus.iter().map(|&tau| (rates(&flag_art_clusters(state, tau), truth).1, tau)).collect()
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties; `None` when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

impl RocCurve {
    /// Best detection rate among points with false alarm rate at most `fa`.
    pub fn detection_at(&self, fa: f64) -> f64 {
        self.points.iter().filter(|p| p.false_alarm_rate <= fa).map(|p| p.detection_rate).fold(0.0, f64::max)
    }

    /// Distinct false alarm rates of the curve.
    pub fn false_alarm_grid(&self) -> Vec<f64> {
        let mut g: Vec<f64> = self.points.iter().map(|p| p.false_alarm_rate).collect();
        g.sort_by(f64::total_cmp);
        g.dedup();
        g
    }

    /// Trapezoidal area under the curve.
    pub fn auc(&self) -> f64 {
        let mut pts: Vec<(f64, f64)> = self.points.iter().map(|p| (p.false_alarm_rate, p.detection_rate)).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum()
    }
}

/// Compares `a` against `b` on the union of their false alarm grids:
/// `(a >= b everywhere, a > b somewhere)`.
pub fn dominates(a: &RocCurve, b: &RocCurve) -> (bool, bool) {
    let mut grid = a.false_alarm_grid();
    grid.extend(b.false_alarm_grid());
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut all = true;
    let mut some = false;
    for x in grid {
        let (da, db) = (a.detection_at(x), b.detection_at(x));
        all &= da >= db;
        some |= da > db;
    }
    (all, some)
}

/// Writes `threshold,false_alarm_rate,detection_rate`.
pub fn write_roc<W: Write>(w: W, curve: &RocCurve) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["threshold", "false_alarm_rate", "detection_rate"])?;
    for p in &curve.points {
        wtr.write_record([fmt_real(p.threshold), fmt_real(p.false_alarm_rate), fmt_real(p.detection_rate)])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes `false_alarm_rate,tau`.
pub fn write_tau_curve<W: Write>(w: W, curve: &[(f64, f64)]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["false_alarm_rate", "tau"])?;
    for (fa, tau) in curve {
        wtr.write_record([fmt_real(*fa), fmt_real(*tau)])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes `flow_index,start_time,truth,flow_flag,window_flag,fused`.
pub fn write_fusion<W: Write>(w: W, flows: &[FlowRecord], flow_flags: &[bool], in_window: &[bool]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["flow_index", "start_time", "truth", "flow_flag", "window_flag", "fused"])?;
    for (i, f) in flows.iter().enumerate() {
        let b = |x: bool| u8::from(x).to_string();
        wtr.write_record([i.to_string(), fmt_real(f.start_time), b(f.is_anomalous()), b(flow_flags[i]), b(in_window[i]), b(flow_flags[i] && in_window[i])])?;
    }
    wtr.flush()?;
    Ok(())
}
