//! One-class SVM: the dual QP
//!
//! ```text
//! minimize ½ αᵀKα   subject to 0 ≤ α_i ≤ 1/(νl),  Σ α_i = 1
//! ```
//!
//! solved by pairwise updates on the maximal violating pair.

use std::collections::{HashMap, VecDeque};
use std::io::Write;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::flow::fmt_real;

/// `exp(-γ‖u - v‖²)`.
pub fn rbf_kernel(u: &[f64], v: &[f64], gamma: f64) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: u.len(), got: v.len() });
    }
    Ok(rbf(u, v, gamma))
}

#[inline]
fn rbf(u: &[f64], v: &[f64], gamma: f64) -> f64 {
    let d2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcsvmParams {
    pub nu: f64,
    pub gamma: f64,
    /// Stop once the maximal violating pair's gradient gap is at most `tol`.
    pub tol: f64,
    pub max_iter: usize,
}

impl OcsvmParams {
    pub fn new(nu: f64, gamma: f64) -> Self {
        OcsvmParams { nu, gamma, tol: 1e-4, max_iter: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcsvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    pub alphas: Vec<f64>,
    pub rho: f64,
    pub nu: f64,
    pub gamma: f64,
}

/// Full dual solution over the training set.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    /// `Kα`; the decision value of training point `i` is `gradient[i] - rho`.
    pub gradient: Vec<f64>,
    pub rho: f64,
    pub upper: f64,
    pub iterations: usize,
    /// Final maximal violating pair gap.
    pub gap: f64,
}

impl DualSolution {
    /// `½ αᵀKα`.
    pub fn objective(&self) -> f64 {
        0.5 * self.alpha.iter().zip(&self.gradient).map(|(a, g)| a * g).sum::<f64>()
    }

    /// Per-point violation of the optimality conditions against `rho`.
    pub fn kkt_residuals(&self) -> Vec<f64> {
        let eps = self.upper * 1e-12;
        self.alpha
            .iter()
            .zip(&self.gradient)
            .map(|(&a, &g)| {
                if a <= eps {
                    (self.rho - g).max(0.0)
                } else if a >= self.upper - eps {
                    (g - self.rho).max(0.0)
                } else {
                    (g - self.rho).abs()
                }
            })
            .collect()
    }
}

/// Kernel columns computed on demand, with a bounded FIFO cache.
struct KernelColumns<'a> {
    data: &'a [Vec<f64>],
    gamma: f64,
    cache: HashMap<usize, Rc<[f64]>>,
    order: VecDeque<usize>,
    capacity: usize,
}

const CACHE_BYTES: usize = 64 << 20;

impl<'a> KernelColumns<'a> {
    fn new(data: &'a [Vec<f64>], gamma: f64) -> Self {
        let capacity = (CACHE_BYTES / (8 * data.len().max(1))).max(2);
        KernelColumns { data, gamma, cache: HashMap::new(), order: VecDeque::new(), capacity }
    }

    fn column(&mut self, i: usize) -> Rc<[f64]> {
        if let Some(c) = self.cache.get(&i) {
            return Rc::clone(c);
        }
        let xi = &self.data[i];
        let col: Rc<[f64]> = self.data.iter().map(|x| rbf(xi, x, self.gamma)).collect();
        if self.order.len() >= self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.cache.remove(&old);
            }
        }
        self.order.push_back(i);
        self.cache.insert(i, Rc::clone(&col));
        col
    }
}

fn validate(data: &[Vec<f64>], p: &OcsvmParams) -> Result<usize> {
    let l = data.len();
    if l < 2 {
        return Err(Error::config("one-class SVM needs at least two training points"));
    }
    if !(p.nu > 0.0 && p.nu <= 1.0) {
        return Err(Error::config(format!("nu must lie in (0,1], got {}", p.nu)));
    }
    if p.nu * (l as f64) < 1.0 {
        return Err(Error::config(format!("nu*l = {} < 1 leaves the box constraints infeasible", p.nu * l as f64)));
    }
    if !(p.gamma > 0.0 && p.gamma.is_finite()) {
        return Err(Error::config(format!("gamma must be positive, got {}", p.gamma)));
    }
    let dim = data[0].len();
    if let Some(bad) = data.iter().find(|x| x.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: bad.len() });
    }
    Ok(l)
}

/// `i = argmin G` over `α < C`, `j = argmax G` over `α > 0`.
fn violating_pair(alpha: &[f64], grad: &[f64], upper: f64) -> (usize, usize, f64) {
    let (mut i, mut gi) = (usize::MAX, f64::INFINITY);
    let (mut j, mut gj) = (usize::MAX, f64::NEG_INFINITY);
    for (t, (&a, &g)) in alpha.iter().zip(grad).enumerate() {
        if a < upper && g < gi {
            i = t;
            gi = g;
        }
        if a > 0.0 && g > gj {
            j = t;
            gj = g;
        }
    }
    (i, j, gj - gi)
}

fn offset(alpha: &[f64], grad: &[f64], upper: f64) -> f64 {
    let eps = upper * 1e-12;
    let (mut sum, mut count) = (0.0, 0usize);
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for (&a, &g) in alpha.iter().zip(grad) {
        if a <= eps {
            ub = ub.min(g);
        } else if a >= upper - eps {
            lb = lb.max(g);
        } else {
            sum += g;
            count += 1;
        }
    }
    if count > 0 {
        sum / count as f64
    } else if ub.is_finite() && lb.is_finite() {
        0.5 * (ub + lb)
    } else if ub.is_finite() {
        ub
    } else {
        lb
    }
}

/// Solves the dual. On hitting the iteration cap returns
/// [`Error::NotConverged`] carrying the model of the last iterate.
pub fn solve_dual(data: &[Vec<f64>], params: &OcsvmParams) -> Result<DualSolution> {
    let l = validate(data, params)?;
    let upper = 1.0 / (params.nu * l as f64);
    let mut kernel = KernelColumns::new(data, params.gamma);

    // feasible start: the first ⌊νl⌋ points at the bound, the remainder on the next
    let mut alpha = vec![0.0; l];
    let mut left = 1.0;
    for a in alpha.iter_mut() {
        if left <= 0.0 {
            break;
        }
        *a = upper.min(left);
        left -= *a;
    }
    let mut grad = vec![0.0; l];
    for (t, &a) in alpha.iter().enumerate() {
        if a > 0.0 {
            let col = kernel.column(t);
            for (g, k) in grad.iter_mut().zip(col.iter()) {
                *g += a * k;
            }
        }
    }

    let mut iterations = 0;
    let mut gap;
    loop {
        let (i, j, g) = violating_pair(&alpha, &grad, upper);
        gap = g;
        if i == usize::MAX || j == usize::MAX || gap <= params.tol {
            break;
        }
        if iterations >= params.max_iter {
            let sol = DualSolution { rho: offset(&alpha, &grad, upper), alpha, gradient: grad, upper, iterations, gap };
            let best = Box::new(model_from(data, &sol, params));
            return Err(Error::NotConverged { iterations, gap, best });
        }
        iterations += 1;
        let ki = kernel.column(i);
        let kj = kernel.column(j);
        let curvature = (ki[i] + kj[j] - 2.0 * ki[j]).max(1e-12);
        let step = (gap / curvature).min(upper - alpha[i]).min(alpha[j]);
        alpha[i] += step;
        alpha[j] -= step;
        // clip rounding drift so the box holds exactly
        alpha[i] = alpha[i].min(upper);
        alpha[j] = alpha[j].max(0.0);
        for ((g, a), b) in grad.iter_mut().zip(ki.iter()).zip(kj.iter()) {
            *g += step * (a - b);
        }
    }
    let rho = offset(&alpha, &grad, upper);
    Ok(DualSolution { alpha, gradient: grad, rho, upper, iterations, gap })
}

fn model_from(data: &[Vec<f64>], sol: &DualSolution, params: &OcsvmParams) -> OcsvmModel {
    let (support_vectors, alphas) = data
        .iter()
        .zip(&sol.alpha)
        .filter(|(_, &a)| a > 0.0)
        .map(|(x, &a)| (x.clone(), a))
        .unzip();
    OcsvmModel { support_vectors, alphas, rho: sol.rho, nu: params.nu, gamma: params.gamma }
}

pub fn train_ocsvm(data: &[Vec<f64>], params: &OcsvmParams) -> Result<OcsvmModel> {
    let sol = solve_dual(data, params)?;
    Ok(model_from(data, &sol, params))
}

impl OcsvmModel {
    pub fn dim(&self) -> usize {
        self.support_vectors.first().map_or(0, Vec::len)
    }

    /// `Σ α_i K(sv_i, x) - ρ`; negative means outlier.
    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let s: f64 = self.support_vectors.iter().zip(&self.alphas).map(|(sv, a)| a * rbf(sv, x, self.gamma)).sum();
        Ok(s - self.rho)
    }

    /// Writes a `key,value` metadata block, a blank line, then
    /// `alpha,x_1..x_d` per support vector. `extra` rows go into the metadata.
    pub fn write_csv<W: Write>(&self, mut w: W, extra: &[(String, f64)]) -> Result<()> {
        writeln!(w, "key,value")?;
        for (k, v) in [("rho", self.rho), ("nu", self.nu), ("gamma", self.gamma)] {
            writeln!(w, "{k},{}", fmt_real(v))?;
        }
        for (k, v) in extra {
            writeln!(w, "{k},{}", fmt_real(*v))?;
        }
        writeln!(w)?;
        let header: Vec<String> = std::iter::once("alpha".to_string()).chain((1..=self.dim()).map(|i| format!("x_{i}"))).collect();
        writeln!(w, "{}", header.join(","))?;
        for (sv, a) in self.support_vectors.iter().zip(&self.alphas) {
            let row: Vec<String> = std::iter::once(fmt_real(*a)).chain(sv.iter().map(|&x| fmt_real(x))).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(l: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..l).map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()).collect()
    }

    #[test]
    fn kernel_values() {
        assert_eq!(rbf_kernel(&[1.0, 2.0], &[1.0, 2.0], 3.0).unwrap(), 1.0);
        assert!((rbf_kernel(&[0.0, 0.0], &[1.0, 0.0], 1.0).unwrap() - (-1f64).exp()).abs() < 1e-15);
        assert!(rbf_kernel(&[0.0], &[0.0, 1.0], 1.0).is_err());
        let pts = gaussian(20, 3, 1);
        for w in pts.windows(2) {
            assert_eq!(rbf_kernel(&w[0], &w[1], 0.7).unwrap(), rbf_kernel(&w[1], &w[0], 0.7).unwrap());
        }
    }

    #[test]
    fn infeasible_nu_rejected() {
        let pts = gaussian(10, 2, 2);
        assert!(matches!(train_ocsvm(&pts, &OcsvmParams::new(0.05, 1.0)), Err(Error::Config(_))));
        assert!(train_ocsvm(&pts[..1], &OcsvmParams::new(1.0, 1.0)).is_err());
    }

    #[test]
    fn identical_points_score_zero() {
        let pts = vec![vec![1.0, -2.0]; 10];
        let m = train_ocsvm(&pts, &OcsvmParams::new(0.5, 1.0)).unwrap();
        assert!((m.rho - 1.0).abs() < 1e-12);
        assert!(m.decision_value(&[1.0, -2.0]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn constraints_and_kkt_hold() {
        let pts = gaussian(150, 2, 3);
        let p = OcsvmParams::new(0.2, 0.5);
        let sol = solve_dual(&pts, &p).unwrap();
        assert!((sol.alpha.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(sol.alpha.iter().all(|&a| (0.0..=sol.upper).contains(&a)));
        assert!(sol.kkt_residuals().iter().all(|&r| r <= p.tol));
        let m = train_ocsvm(&pts, &p).unwrap();
        assert!(m.alphas.iter().all(|&a| a > 0.0));
    }

    #[test]
    fn decision_matches_naive_sum_and_decays() {
        let pts = gaussian(60, 2, 4);
        let m = train_ocsvm(&pts, &OcsvmParams::new(0.1, 0.8)).unwrap();
        for gx in -4..=4 {
            for gy in -4..=4 {
                let x = [f64::from(gx) * 0.5, f64::from(gy) * 0.5];
                let mut naive = -m.rho;
                for (sv, a) in m.support_vectors.iter().zip(&m.alphas) {
                    naive += a * (-0.8 * ((sv[0] - x[0]).powi(2) + (sv[1] - x[1]).powi(2))).exp();
                }
                assert!((m.decision_value(&x).unwrap() - naive).abs() < 1e-10);
            }
        }
        assert!((m.decision_value(&[1e3, 1e3]).unwrap() + m.rho).abs() < 1e-12);
        assert!(m.decision_value(&[0.0]).is_err());
    }

    #[test]
    fn margin_vectors_score_zero() {
        let pts = gaussian(80, 2, 5);
        let p = OcsvmParams::new(0.3, 1.0);
        let sol = solve_dual(&pts, &p).unwrap();
        let m = train_ocsvm(&pts, &p).unwrap();
        for (x, &a) in pts.iter().zip(&sol.alpha) {
            if a > 1e-9 && a < sol.upper - 1e-9 {
                assert!(m.decision_value(x).unwrap().abs() <= p.tol);
            }
        }
    }

    #[test]
    fn permutation_invariance() {
        let pts = gaussian(50, 2, 6);
        let mut rev = pts.clone();
        rev.reverse();
        let p = OcsvmParams { tol: 1e-10, ..OcsvmParams::new(0.2, 1.0) };
        let a = train_ocsvm(&pts, &p).unwrap();
        let b = train_ocsvm(&rev, &p).unwrap();
        for x in gaussian(20, 2, 7) {
            assert!((a.decision_value(&x).unwrap() - b.decision_value(&x).unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn iteration_cap_reports_best_iterate() {
        let pts = gaussian(40, 2, 8);
        let p = OcsvmParams { max_iter: 1, tol: 1e-12, ..OcsvmParams::new(0.5, 1.0) };
        match train_ocsvm(&pts, &p) {
            Err(Error::NotConverged { iterations, best, .. }) => {
                assert_eq!(iterations, 1);
                assert!((best.alphas.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn model_export() {
        let pts = vec![vec![0.0], vec![1.0]];
        let m = train_ocsvm(&pts, &OcsvmParams::new(1.0, 1.0)).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf, &[("mean_1".into(), 0.5)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("key,value\nrho,"));
        assert!(text.contains("mean_1,0.5\n\nalpha,x_1\n0.5,0\n0.5,1\n"), "{text}");
    }
}
