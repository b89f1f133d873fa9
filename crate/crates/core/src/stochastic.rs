//! Large-deviations window tests against a reference traffic model.
//!
//! The model-free test scores a window by the relative entropy of its state
//! frequencies with respect to the reference marginal `μ`; the model-based
//! test scores it by the relative entropy of its state-pair frequencies
//! with respect to the reference chain `Π`. Both compare against
//! `η = -ln(ε)/n`, a threshold that keeps the false-alarm rate near `ε` for
//! large window populations `n`.

use std::io::Write;

use crate::cluster::{distill_flows, fit_user_clusters, UserClusterModel};
use crate::error::{Error, Result};
use crate::flow::{fmt_real, FlowRecord};
use crate::quantize::{fit_quantizer, FlowState, QuantLevels, Quantizer};
use crate::window::{empirical_measure, transition_measure, EmpiricalMeasure, TransitionMeasure, Window};

/// Pseudo-count added to every reference cell before normalizing.
pub const REFERENCE_PSEUDO_COUNT: f64 = 0.5;

/// Reference traffic: user clusters, quantizer and the smoothed measures `μ`, `Π`.
#[derive(Debug, Clone)]
pub struct ReferenceModel {
    pub clusters: UserClusterModel,
    pub quantizer: Quantizer,
    pub mu: EmpiricalMeasure,
    pub pi: TransitionMeasure,
}

impl ReferenceModel {
    /// Fits every component on one reference flow set.
    pub fn fit(reference: &[FlowRecord], k: usize, levels: QuantLevels, seed: u64) -> Result<Self> {
        if reference.len() < 2 {
            return Err(Error::config("reference needs at least two flows"));
        }
        let addresses: Vec<_> = reference.iter().map(|f| f.user).collect();
        let clusters = fit_user_clusters(&addresses, k, seed)?;
        let distilled = distill_flows(reference, &clusters);
        let quantizer = fit_quantizer(&distilled, k, levels)?;
        let states = quantizer.quantize_all(&distilled);
        let sigma = quantizer.alphabet_size();
        Ok(ReferenceModel {
            mu: empirical_measure(&states, sigma)?.smoothed(REFERENCE_PSEUDO_COUNT),
            pi: transition_measure(&states, sigma)?.smoothed(REFERENCE_PSEUDO_COUNT),
            clusters,
            quantizer,
        })
    }

    pub fn alphabet_size(&self) -> usize {
        self.quantizer.alphabet_size()
    }

    /// Flow states of `flows` under this model's clusters and quantizer.
    pub fn states(&self, flows: &[FlowRecord]) -> Vec<FlowState> {
        self.quantizer.quantize_all(&distill_flows(flows, &self.clusters))
    }
}

/// `H(ν|μ) = Σ ν ln(ν/μ)` with `0 ln 0 = 0`. Infinite when `ν` has mass where `μ` has none.
pub fn relative_entropy(nu: &EmpiricalMeasure, mu: &EmpiricalMeasure) -> Result<f64> {
    if nu.alphabet_size() != mu.alphabet_size() {
        return Err(Error::DimensionMismatch { expected: mu.alphabet_size(), got: nu.alphabet_size() });
    }
    let h: f64 = nu
        .probs()
        .iter()
        .zip(mu.probs())
        .filter(|(&v, _)| v > 0.0)
        .map(|(&v, &m)| v * (v / m).ln())
        .sum();
    Ok(h.max(0.0))
}

/// `H_B(Q|Π) = Σ_ij q(i,j) ln(q(j|i)/π(j|i))`.
pub fn relative_entropy_markov(q: &TransitionMeasure, pi: &TransitionMeasure) -> Result<f64> {
    let s = q.alphabet_size();
    if s != pi.alphabet_size() {
        return Err(Error::DimensionMismatch { expected: pi.alphabet_size(), got: s });
    }
    let mut h = 0.0;
    for i in 0..s {
        let qm = q.marginal(i);
        if qm <= 0.0 {
            continue;
        }
        let pm = pi.marginal(i);
        for j in 0..s {
            let qij = q.get(i, j);
            if qij <= 0.0 {
                continue;
            }
            let pij = pi.get(i, j);
            if pm <= 0.0 || pij <= 0.0 {
                return Ok(f64::INFINITY);
            }
            h += qij * ((qij / qm) / (pij / pm)).ln();
        }
    }
    Ok(h.max(0.0))
}

/// `η = -ln(ε)/n`.
pub fn sanov_threshold(epsilon: f64, n: usize) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::config(format!("false alarm rate must lie in (0,1), got {epsilon}")));
    }
    if n == 0 {
        return Err(Error::config("threshold needs a positive flow count"));
    }
    Ok(-epsilon.ln() / n as f64)
}

/// Which flow count enters the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdMode {
    /// `n = |G_j|` for each window.
    #[default]
    PerWindow,
    /// `n` = mean flow count over non-degenerate windows; one threshold line.
    MeanCount,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SanovConfig {
    pub epsilon: f64,
    pub mode: ThresholdMode,
}

impl Default for SanovConfig {
    fn default() -> Self {
        SanovConfig { epsilon: 0.01, mode: ThresholdMode::PerWindow }
    }
}

/// Per-window outcome of a window-level detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowVerdict {
    pub window_index: usize,
    pub start_time: f64,
    pub flows: usize,
    pub score: f64,
    pub threshold: f64,
    pub flagged: bool,
    /// Too few flows to evaluate; score 0, threshold infinite, never flagged.
    pub degenerate: bool,
}

impl WindowVerdict {
    pub(crate) fn degenerate(w: &Window) -> Self {
        WindowVerdict {
            window_index: w.index,
            start_time: w.start,
            flows: w.len(),
            score: 0.0,
            threshold: f64::INFINITY,
            flagged: false,
            degenerate: true,
        }
    }
}

fn window_states(states: &[FlowState], w: &Window) -> Vec<FlowState> {
    w.members.iter().map(|&i| states[i]).collect()
}

fn threshold_count(windows: &[Window], min_flows: usize, mode: ThresholdMode) -> Option<usize> {
    match mode {
        ThresholdMode::PerWindow => None,
        ThresholdMode::MeanCount => {
            let counts: Vec<usize> = windows.iter().map(Window::len).filter(|&n| n >= min_flows).collect();
            (!counts.is_empty()).then(|| {
                let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
                (mean.round() as usize).max(1)
            })
        }
    }
}

fn detect<F>(states: &[FlowState], windows: &[Window], cfg: SanovConfig, min_flows: usize, score: F) -> Result<Vec<WindowVerdict>>
where
    F: Fn(&[FlowState]) -> Result<f64>,
{
    sanov_threshold(cfg.epsilon, 1)?;
    let fixed_n = threshold_count(windows, min_flows, cfg.mode);
    windows
        .iter()
        .map(|w| {
            if w.len() < min_flows {
                return Ok(WindowVerdict::degenerate(w));
            }
            let s = score(&window_states(states, w))?;
            let threshold = sanov_threshold(cfg.epsilon, fixed_n.unwrap_or(w.len()))?;
            Ok(WindowVerdict {
                window_index: w.index,
                start_time: w.start,
                flows: w.len(),
                score: s,
                threshold,
                flagged: s >= threshold,
                degenerate: false,
            })
        })
        .collect()
}

/// Model-free test: `H(E^{G_j} | μ) ≥ η` flags window `j`.
///
/// `states[i]` is the flow state of flow `i`; windows index into it.
pub fn detect_model_free(states: &[FlowState], windows: &[Window], reference: &ReferenceModel, cfg: SanovConfig) -> Result<Vec<WindowVerdict>> {
    let sigma = reference.alphabet_size();
    detect(states, windows, cfg, 1, |ws| relative_entropy(&empirical_measure(ws, sigma)?, &reference.mu))
}

/// Model-based test: `H_B(E_B^{G_j} | Π) ≥ η` flags window `j`.
pub fn detect_model_based(states: &[FlowState], windows: &[Window], reference: &ReferenceModel, cfg: SanovConfig) -> Result<Vec<WindowVerdict>> {
    let sigma = reference.alphabet_size();
    detect(states, windows, cfg, 2, |ws| relative_entropy_markov(&transition_measure(ws, sigma)?, &reference.pi))
}

/// Writes `window_index,start_time,score,threshold,flagged`.
pub fn write_window_verdicts<W: Write>(w: W, verdicts: &[WindowVerdict]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["window_index", "start_time", "score", "threshold", "flagged"])?;
    for v in verdicts {
        wtr.write_record([
            v.window_index.to_string(),
            fmt_real(v.start_time),
            fmt_real(v.score),
            fmt_real(v.threshold),
            u8::from(v.flagged).to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a verdict CSV back. Flow counts are not stored and come back as 0;
/// an infinite threshold marks a degenerate window.
pub fn read_window_verdicts<R: std::io::Read>(r: R) -> Result<Vec<WindowVerdict>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != ["window_index", "start_time", "score", "threshold", "flagged"] {
        return Err(Error::parse(1, format!("unexpected verdict header `{}`", header.join(","))));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let num = |k: usize| -> Result<f64> {
            rec.get(k)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::parse(line, format!("column {} is not a number", k + 1)))
        };
        let threshold = num(3)?;
        out.push(WindowVerdict {
            window_index: num(0)? as usize,
            start_time: num(1)?,
            flows: 0,
            score: num(2)?,
            threshold,
            flagged: num(4)? != 0.0,
            degenerate: threshold.is_infinite(),
        });
    }
    Ok(out)
}
