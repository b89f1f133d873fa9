//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL line
//! each, and fails if any criterion fails.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use netanom::aggregate::art_features;
use netanom::art::{art_pass, flag_art_clusters, normalize_art, update_center, ArtClusterState, ART_DIM};
use netanom::config::{Assignment, DetectorParams, Method, RunConfig};
use netanom::eval::{dominates, rates, spearman, tau_grid, tau_vs_false_alarm};
use netanom::pipeline::{detect, evaluate, run_pipeline, Dataset, Detections, Evaluation};
use netanom::sim::{reference_trace, scenario_preset, simulate, Preset, SCENARIO_NAMES};
use netanom::stochastic::{relative_entropy, relative_entropy_markov};
use netanom::svm::{default_gamma, solve_dual, train_ocsvm, OcsvmParams};
use netanom::window::{EmpiricalMeasure, TransitionMeasure};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn report(id: usize, name: &str, o: &Outcome, elapsed: Duration) {
    // bypasses the test harness capture so the lines always show
    let line = format!("[{}] criterion {id:>2} {name}: {} ({:.1?})\n", if o.pass { "PASS" } else { "FAIL" }, o.detail, elapsed);
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn random_probs(rng: &mut ChaCha8Rng, n: usize, zero_chance: f64) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..n).map(|_| if rng.random_bool(zero_chance) { 0.0 } else { rng.random::<f64>() + 1e-3 }).collect();
        let s: f64 = w.iter().sum();
        if s > 0.0 {
            return w.into_iter().map(|x| x / s).collect();
        }
    }
}

fn kl_oracle(nu: &[f64], mu: &[f64]) -> f64 {
    let mut h = 0.0;
    for i in 0..nu.len() {
        if nu[i] > 0.0 {
            h += nu[i] * nu[i].ln() - nu[i] * mu[i].ln();
        }
    }
    h
}

/// Conditional divergence summed row by row from explicit conditionals.
fn markov_oracle(q: &[f64], pi: &[f64], s: usize) -> f64 {
    let mut h = 0.0;
    for i in 0..s {
        let qrow = &q[i * s..(i + 1) * s];
        let prow = &pi[i * s..(i + 1) * s];
        let qm: f64 = qrow.iter().sum();
        let pm: f64 = prow.iter().sum();
        if qm == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for j in 0..s {
            if qrow[j] > 0.0 {
                let (a, b) = (qrow[j] / qm, prow[j] / pm);
                row += a * (a / b).ln();
            }
        }
        h += qm * row;
    }
    h
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut worst_oracle, mut worst_self, mut min_h) = (0.0f64, 0.0f64, f64::INFINITY);
    for t in 0..10_000 {
        let s = 2 + t % 9;
        let mu = random_probs(&mut rng, s, 0.0);
        let nu = random_probs(&mut rng, s, 0.3);
        let (m, v) = (EmpiricalMeasure::from_probs(mu.clone(), 100).unwrap(), EmpiricalMeasure::from_probs(nu.clone(), 100).unwrap());
        let h = relative_entropy(&v, &m).unwrap();
        min_h = min_h.min(h);
        worst_oracle = worst_oracle.max((h - kl_oracle(&nu, &mu).max(0.0)).abs());
        worst_self = worst_self.max(relative_entropy(&m, &m).unwrap());

        let s = 2 + t % 5;
        let pi = random_probs(&mut rng, s * s, 0.0);
        let q = random_probs(&mut rng, s * s, 0.3);
        let (p, qq) = (TransitionMeasure::from_probs(pi.clone(), s, 100).unwrap(), TransitionMeasure::from_probs(q.clone(), s, 100).unwrap());
        let hb = relative_entropy_markov(&qq, &p).unwrap();
        min_h = min_h.min(hb);
        worst_oracle = worst_oracle.max((hb - markov_oracle(&q, &pi, s).max(0.0)).abs());
        worst_self = worst_self.max(relative_entropy_markov(&p, &p).unwrap());
    }
    let pass = min_h >= 0.0 && worst_self <= 1e-12 && worst_oracle <= 1e-12;
    outcome(pass, format!("min H {min_h:.3e}, max H(mu|mu) {worst_self:.1e}, max oracle gap {worst_oracle:.1e}"))
}

/// Euclidean projection onto `{0 <= a <= c, sum a = 1}` by bisection on the shift.
fn project(v: &[f64], c: f64) -> Vec<f64> {
    let total = |th: f64| v.iter().map(|x| (x - th).clamp(0.0, c)).sum::<f64>();
    let (mut lo, mut hi) = (v.iter().cloned().fold(f64::INFINITY, f64::min) - c - 1.0, v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let th = 0.5 * (lo + hi);
    v.iter().map(|x| (x - th).clamp(0.0, c)).collect()
}

/// Accelerated projected gradient on `½ aᵀKa`.
fn pg_oracle(k: &[Vec<f64>], c: f64) -> f64 {
    let l = k.len();
    let lip: f64 = k.iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let obj = |a: &[f64]| -> f64 { 0.5 * (0..l).map(|i| a[i] * (0..l).map(|j| k[i][j] * a[j]).sum::<f64>()).sum::<f64>() };
    let mut a = project(&vec![1.0 / l as f64; l], c);
    let mut y = a.clone();
    let mut t = 1.0f64;
    let mut best = obj(&a);
    for _ in 0..20_000 {
        let g: Vec<f64> = (0..l).map(|i| (0..l).map(|j| k[i][j] * y[j]).sum()).collect();
        let step: Vec<f64> = (0..l).map(|i| y[i] - g[i] / lip).collect();
        let next = project(&step, c);
        let t2 = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = (0..l).map(|i| next[i] + (t - 1.0) / t2 * (next[i] - a[i])).collect();
        a = next;
        t = t2;
        best = best.min(obj(&a));
    }
    best
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut worst_gap, mut worst_kkt) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let l = rng.random_range(3..=20);
        let d = rng.random_range(1..=4);
        let data: Vec<Vec<f64>> = (0..l).map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
        let nu = rng.random_range((1.0 / l as f64)..=1.0);
        let gamma = rng.random_range(0.1..2.0);
        let params = OcsvmParams::new(nu, gamma);
        let sol = solve_dual(&data, &params).unwrap();
        let k: Vec<Vec<f64>> = data.iter().map(|u| data.iter().map(|v| (-gamma * u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()).exp()).collect()).collect();
        let oracle = pg_oracle(&k, 1.0 / (nu * l as f64));
        worst_gap = worst_gap.max((sol.objective() - oracle).abs());
        worst_kkt = worst_kkt.max(sol.kkt_residuals().into_iter().fold(0.0, f64::max));
    }
    outcome(worst_gap <= 1e-6 && worst_kkt <= 1e-4, format!("max objective gap {worst_gap:.2e}, max KKT residual {worst_kkt:.2e}"))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let l = 500;
    let data: Vec<Vec<f64>> = (0..l).map(|_| (0..2).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
    let slack = 2.0 / (l as f64).sqrt();
    let mut pass = true;
    let mut parts = Vec::new();
    for nu in [0.05, 0.1, 0.3] {
        let m = train_ocsvm(&data, &OcsvmParams::new(nu, default_gamma(&data))).unwrap();
        let frac = data.iter().filter(|x| m.decision_value(x).unwrap() < 0.0).count() as f64 / l as f64;
        pass &= frac <= nu + slack;
        parts.push(format!("nu {nu}: {frac:.3}"));
    }
    outcome(pass, format!("{} (bound nu + {slack:.3})", parts.join(", ")))
}

struct Run {
    preset: Preset,
    data: Dataset,
    det: Detections,
    eval: Evaluation,
}

fn run(name: &str) -> Run {
    let preset = scenario_preset(name).unwrap();
    let data = Dataset {
        flows: simulate(&preset).unwrap(),
        reference: reference_trace(&preset).unwrap(),
        server: preset.server,
        seed: preset.scenario.seed,
        preset: Some(preset.clone()),
    };
    let params = DetectorParams::for_scenario(preset.scenario.kind);
    let det = detect(&data, &params, &Method::ALL).unwrap();
    let eval = evaluate(&data.flows, &det.windows, &det.verdicts, params.art.tau).unwrap();
    Run { preset, data, det, eval }
}

impl Run {
    /// Detection over windows overlapping the anomaly interval, false alarms over the rest.
    fn window_rates(&self, m: Method) -> (f64, f64) {
        let (a, b) = (self.preset.scenario.anomaly_start, self.preset.scenario.anomaly_end);
        let overlap: Vec<bool> = self.det.windows.iter().map(|w| w.start < b && w.end > a).collect();
        let flags: Vec<bool> = self.det.verdicts.windows[&m].iter().map(|v| v.flagged).collect();
        rates(&flags, &overlap)
    }

    fn flow_rates(&self, method: &str) -> (f64, f64) {
        let s = self.eval.summary.iter().find(|s| s.method == method).unwrap();
        (s.detection_rate, s.false_alarm_rate)
    }

    fn art_state(&self) -> &ArtClusterState {
        self.det.verdicts.art.as_ref().unwrap()
    }
}

fn window_check(r: &Run, m: Method, parts: &mut Vec<String>) -> bool {
    let (dr, fa) = r.window_rates(m);
    parts.push(format!("{} {:.0}%/{:.0}%", m.name(), 100.0 * dr, 100.0 * fa));
    dr >= 0.8 && fa <= 0.1
}

fn flow_check(r: &Run, method: &str, parts: &mut Vec<String>) -> bool {
    let (dr, _) = r.flow_rates(method);
    parts.push(format!("{method} {:.0}%", 100.0 * dr));
    dr >= 0.5
}

fn criterion_4(r: &Run) -> Outcome {
    let mut parts = Vec::new();
    let mut pass = window_check(r, Method::ModelFree, &mut parts);
    pass &= window_check(r, Method::ModelBased, &mut parts);
    pass &= flow_check(r, "flow_svm", &mut parts);
    pass &= flow_check(r, "art", &mut parts);
    outcome(pass, parts.join(", "))
}

fn criterion_5(r: &Run) -> Outcome {
    let mut parts = Vec::new();
    let mut pass = window_check(r, Method::ModelFree, &mut parts);
    pass &= window_check(r, Method::ModelBased, &mut parts);
    pass &= window_check(r, Method::WindowSvm, &mut parts);
    pass &= flow_check(r, "art", &mut parts);
    let (dr, fa) = r.flow_rates("flow_svm");
    parts.push(format!("flow_svm {:.2}% vs 2x{:.2}%", 100.0 * dr, 100.0 * fa));
    pass &= dr <= 2.0 * fa;
    outcome(pass, parts.join(", "))
}

fn criterion_6(r: &Run) -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for m in [Method::ModelFree, Method::WindowSvm] {
        let (dr, _) = r.window_rates(m);
        parts.push(format!("{} {:.0}%", m.name(), 100.0 * dr));
        pass &= dr >= 0.8;
    }
    let mb = &r.det.verdicts.windows[&Method::ModelBased];
    let covered = |t: f64| r.det.windows.iter().zip(mb).any(|(w, v)| v.flagged && w.start <= t && t < w.end);
    let (a, b) = (r.preset.scenario.anomaly_start, r.preset.scenario.anomaly_end);
    let (s, e) = (covered(a), covered(b));
    parts.push(format!("model_based start {s} end {e}"));
    outcome(pass && s && e, parts.join(", "))
}

fn criterion_7(r: &Run) -> Outcome {
    let (art, fused) = (&r.eval.rocs["art"], &r.eval.rocs["art_fused"]);
    let (all, some) = dominates(fused, art);
    outcome(all && some, format!("fused >= ART everywhere: {all}, strictly somewhere: {some}"))
}

fn criterion_8(r: &Run) -> Outcome {
    let curve = tau_vs_false_alarm(r.art_state(), &r.eval.flow_truth, &tau_grid(50));
    let monotone = curve.windows(2).all(|w| w[0].0 <= w[1].0);
    let (fa, tau): (Vec<f64>, Vec<f64>) = curve.iter().copied().unzip();
    let rho = spearman(&tau, &fa).unwrap_or(f64::NAN);
    outcome(monotone && rho >= 0.95, format!("monotone {monotone}, Spearman {rho:.3}"))
}

fn criterion_9(r: &Run) -> Outcome {
    // running mean against the batch mean
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut worst_mean = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..200);
        let pts: Vec<[f64; ART_DIM]> = (0..n).map(|_| std::array::from_fn(|_| rng.random())).collect();
        let mut c = pts[0].to_vec();
        for (p, g) in pts.iter().enumerate() {
            c = update_center(&c, p, g);
        }
        for j in 0..ART_DIM {
            let batch = pts.iter().map(|g| g[j]).sum::<f64>() / n as f64;
            worst_mean = worst_mean.max((c[j] - batch).abs());
        }
    }

    // equilibrium: the final state is a fixed point of one more pass
    let cfg = DetectorParams::for_scenario(r.preset.scenario.kind).art;
    let points = normalize_art(&art_features(&r.data.flows, r.data.server));
    let state = r.art_state();
    let (_, again, _) = art_pass(&points, &state.centers, &cfg);
    let fixed = state.converged && again == state.members;

    // final centers are the batch means of their members
    let mut worst_center = 0.0f64;
    for (c, m) in state.centers.iter().zip(&state.members) {
        for j in 0..ART_DIM {
            let batch = m.iter().map(|&i| points[i][j]).sum::<f64>() / m.len() as f64;
            worst_center = worst_center.max((c[j] - batch).abs());
        }
    }

    // replaying the last pass: every joined flow was within the radius of the center it joined
    let mut centers: Vec<Vec<f64>> = state.centers.iter().map(|c| c.to_vec()).collect();
    let mut counts = vec![0usize; centers.len()];
    let mut joins_ok = true;
    for (i, g) in points.iter().enumerate() {
        let k = state.assignment[i];
        let d: f64 = (0..ART_DIM).map(|j| ((g[j] - centers[k][j]) / (1.0 - cfg.vigilance[j])).powi(2)).sum();
        joins_ok &= d < cfg.radius;
        for j in 0..ART_DIM {
            centers[k][j] = (counts[k] as f64 * centers[k][j] + g[j]) / (counts[k] as f64 + 1.0);
        }
        counts[k] += 1;
    }

    // flag sets grow with tau
    let grid = tau_grid(200);
    let nested = grid.windows(2).all(|w| {
        let (a, b) = (flag_art_clusters(state, w[0]), flag_art_clusters(state, w[1]));
        a.iter().zip(&b).all(|(x, y)| !x || *y)
    });

    let pass = worst_mean <= 1e-12 && fixed && worst_center <= 1e-12 && joins_ok && nested;
    outcome(
        pass,
        format!("running mean gap {worst_mean:.1e}, fixed point {fixed}, center gap {worst_center:.1e}, radius replay {joins_ok}, nested flags {nested}"),
    )
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv" || x == "svg"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn criterion_10() -> Outcome {
    let mut pass = true;
    let mut files = 0;
    for name in SCENARIO_NAMES {
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        for d in &dirs {
            let cli = [
                Assignment::cli("run.preset", name),
                Assignment::cli("run.methods", "all"),
                Assignment::cli("run.seed", "7"),
                Assignment::cli("run.out_dir", d.path().to_str().unwrap()),
            ];
            run_pipeline(&RunConfig::load(None, Vec::new(), &cli).unwrap()).unwrap();
        }
        let (a, b) = (csv_files(dirs[0].path()), csv_files(dirs[1].path()));
        files += a.len();
        pass &= !a.is_empty() && a == b;
    }
    outcome(pass, format!("{files} files compared per run across {} presets", SCENARIO_NAMES.len()))
}

#[test]
fn acceptance() {
    let _ = std::io::stderr().write_all(b"\n");
    let mut failed = Vec::new();
    let mut check = |id: usize, name: &str, f: &mut dyn FnMut() -> Outcome, limit: Option<Duration>| {
        let t0 = Instant::now();
        let mut o = f();
        let elapsed = t0.elapsed();
        if let Some(l) = limit {
            if elapsed > l {
                o.pass = false;
                o.detail += &format!(", over the {l:?} limit");
            }
        }
        report(id, name, &o, elapsed);
        if !o.pass {
            failed.push(id);
        }
    };
    check(1, "divergences", &mut criterion_1, Some(Duration::from_secs(10)));
    check(2, "QP against projected gradient", &mut criterion_2, Some(Duration::from_secs(30)));
    check(3, "nu-property", &mut criterion_3, None);

    let mut atypical = None;
    check(
        4,
        "atypical user",
        &mut || {
            let r = run("atypical_user");
            let o = criterion_4(&r);
            atypical = Some(r);
            o
        },
        Some(Duration::from_secs(120)),
    );
    let atypical = atypical.unwrap();
    check(5, "large access rate", &mut || criterion_5(&run("large_access_rate")), None);
    check(6, "DDoS", &mut || criterion_6(&run("ddos_flood")), None);
    check(7, "fusion dominance", &mut || criterion_7(&atypical), None);
    check(8, "tau monotonicity", &mut || criterion_8(&atypical), None);
    check(9, "ART mechanics", &mut || criterion_9(&atypical), None);
    check(10, "determinism", &mut criterion_10, None);

    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
