//! Sliding time windows over a flow sequence, and the per-window empirical
//! measures over flow states: the marginal frequency vector and the
//! frequency matrix of consecutive state pairs.

use std::io::Write;

use crate::error::{Error, Result};
use crate::flow::{ensure_sorted, fmt_real, Timestamped};
use crate::quantize::FlowState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowConfig {
    /// Interval between consecutive window starts, seconds.
    pub step: f64,
    /// Window length, seconds.
    pub size: f64,
}

impl WindowConfig {
    pub fn new(step: f64, size: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) || !(size > 0.0 && size.is_finite()) {
            return Err(Error::config(format!("window step and size must be positive, got h={step}, w_s={size}")));
        }
        Ok(WindowConfig { step, size })
    }
}

/// One window: `[start, start + size)`, with the indices of its member flows.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub index: usize,
    pub start: f64,
    pub end: f64,
    pub members: Vec<usize>,
}

impl Window {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Number of windows, `ceil((t_last - t_first - w_s) / h)`, at least one.
pub fn window_count(first: f64, last: f64, cfg: WindowConfig) -> usize {
    let n = ((last - first - cfg.size) / cfg.step).ceil();
    if n >= 1.0 {
        n as usize
    } else {
        1
    }
}

/// Start time of window `j` (0-based).
pub fn window_start(first: f64, j: usize, cfg: WindowConfig) -> f64 {
    first + j as f64 * cfg.step
}

/// Splits time-sorted records into overlapping windows.
pub fn partition_windows<T: Timestamped>(items: &[T], cfg: WindowConfig) -> Result<Vec<Window>> {
    ensure_sorted(items)?;
    let (Some(first), Some(last)) = (items.first(), items.last()) else {
        return Ok(Vec::new());
    };
    let (t0, t1) = (first.start_time(), last.start_time());
    let windows = (0..window_count(t0, t1, cfg))
        .map(|j| {
            let start = window_start(t0, j, cfg);
            let end = start + cfg.size;
            let lo = items.partition_point(|f| f.start_time() < start);
            let hi = items.partition_point(|f| f.start_time() < end);
            Window { index: j, start, end, members: (lo..hi).collect() }
        })
        .collect();
    Ok(windows)
}

/// Frequency vector of flow states.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    probs: Vec<f64>,
    n: usize,
}

/// Frequency matrix of consecutive state pairs, row-major `|Σ| x |Σ|`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMeasure {
    probs: Vec<f64>,
    size: usize,
    n: usize,
}

fn normalized(counts: Vec<f64>) -> Vec<f64> {
    let total: f64 = counts.iter().sum();
    counts.into_iter().map(|c| c / total).collect()
}

fn check_probs(p: &[f64]) -> Result<()> {
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::UndefinedMeasure("probabilities must be finite and nonnegative".into()));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::UndefinedMeasure(format!("probabilities sum to {s}, not 1")));
    }
    Ok(())
}

fn check_symbol(s: FlowState, sigma: usize) -> Result<()> {
    if s.0 >= sigma {
        return Err(Error::DimensionMismatch { expected: sigma, got: s.0 + 1 });
    }
    Ok(())
}

/// `E(ρ) = (1/|G|) Σ 1{σ(g) = ρ}`.
pub fn empirical_measure(states: &[FlowState], sigma: usize) -> Result<EmpiricalMeasure> {
    if states.is_empty() {
        return Err(Error::UndefinedMeasure("empirical measure of an empty flow sequence".into()));
    }
    let mut counts = vec![0.0; sigma];
    for &s in states {
        check_symbol(s, sigma)?;
        counts[s.0] += 1.0;
    }
    Ok(EmpiricalMeasure { probs: normalized(counts), n: states.len() })
}

/// Consecutive-pair frequencies, normalized by the number of pairs so the
/// matrix sums to one.
pub fn transition_measure(states: &[FlowState], sigma: usize) -> Result<TransitionMeasure> {
    if states.len() < 2 {
        return Err(Error::UndefinedMeasure("transition measure needs at least two flows".into()));
    }
    let mut counts = vec![0.0; sigma * sigma];
    for &s in states {
        check_symbol(s, sigma)?;
    }
    for w in states.windows(2) {
        counts[w[0].0 * sigma + w[1].0] += 1.0;
    }
    Ok(TransitionMeasure { probs: normalized(counts), size: sigma, n: states.len() })
}

impl EmpiricalMeasure {
    /// Builds a measure from an explicit probability vector.
    pub fn from_probs(probs: Vec<f64>, n: usize) -> Result<Self> {
        check_probs(&probs)?;
        Ok(EmpiricalMeasure { probs, n })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alphabet_size(&self) -> usize {
        self.probs.len()
    }

    /// Adds `pseudo` to every cell count and renormalizes.
    pub fn smoothed(&self, pseudo: f64) -> Self {
        let counts = self.probs.iter().map(|p| p * self.n as f64 + pseudo).collect();
        EmpiricalMeasure { probs: normalized(counts), n: self.n }
    }
}

impl TransitionMeasure {
    /// Builds a measure from an explicit row-major `size x size` matrix.
    pub fn from_probs(probs: Vec<f64>, size: usize, n: usize) -> Result<Self> {
        if probs.len() != size * size {
            return Err(Error::DimensionMismatch { expected: size * size, got: probs.len() });
        }
        check_probs(&probs)?;
        Ok(TransitionMeasure { probs, size, n })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alphabet_size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.size..(i + 1) * self.size]
    }

    /// Marginal `q(σ_i) = Σ_j q(σ_i, σ_j)`.
    pub fn marginal(&self, i: usize) -> f64 {
        self.row(i).iter().sum()
    }

    /// `q(σ_j | σ_i)`; `None` on rows with zero marginal.
    pub fn conditional(&self, i: usize, j: usize) -> Option<f64> {
        let m = self.marginal(i);
        (m > 0.0).then(|| self.get(i, j) / m)
    }

    /// Adds `pseudo` to every pair count and renormalizes.
    pub fn smoothed(&self, pseudo: f64) -> Self {
        let pairs = self.n.saturating_sub(1) as f64;
        let counts = self.probs.iter().map(|p| p * pairs + pseudo).collect();
        TransitionMeasure { probs: normalized(counts), size: self.size, n: self.n }
    }
}

/// Writes `window_index,window_start,flows,p_0,...` for each window measure.
/// Windows without a measure get an all-empty probability tail.
pub fn write_measures<W: Write>(w: W, windows: &[Window], measures: &[Option<Vec<f64>>], width: usize) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["window_index".to_string(), "window_start".into(), "flows".into()];
    header.extend((0..width).map(|i| format!("p_{i}")));
    wtr.write_record(&header)?;
    for (win, m) in windows.iter().zip(measures) {
        let mut row = vec![win.index.to_string(), fmt_real(win.start), win.len().to_string()];
        match m {
            Some(p) => row.extend(p.iter().map(|&x| fmt_real(x))),
            None => row.extend(std::iter::repeat_n(String::new(), width)),
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}
