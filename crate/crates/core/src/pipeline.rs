//! End-to-end orchestration: load or simulate traffic, run the selected
//! detectors, score them against ground truth, and write CSV and SVG artifacts.
//!
//! The supervised detectors (both stochastic tests, both SVMs) learn from a
//! clean reference trace; ART clusters the evaluated flows directly.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use crate::aggregate::{aggregate_packets, art_features, FlowGapConfig};
use crate::art::{art_cluster, flag_art_clusters, write_art_clusters, write_art_flows, ArtClusterState};
use crate::cluster::distill_flows;
use crate::config::{DetectorParams, Ini, Method, RunConfig};
use crate::error::{Error, Result};
use crate::eval::{
    art_roc, flow_truth, flows_in_flagged_windows, fused_art_roc, label_windows, rates, roc_curve, tau_grid, tau_vs_false_alarm,
    write_fusion, write_roc, write_tau_curve, RocCurve,
};
use crate::flow::{read_flows, read_packets, write_flows, FlowRecord, IpAddress};
use crate::quantize::FlowState;
use crate::sim::{presets_from_ini, reference_trace, scenario_preset, simulate, Preset, DEFAULT_SEED};
use crate::stochastic::{detect_model_based, detect_model_free, read_window_verdicts, write_window_verdicts, ReferenceModel, SanovConfig, WindowVerdict};
use crate::svg::{window_chart, Chart, Series};
use crate::svm::{window_features, write_flow_verdicts, FlowSvm, FlowVerdict, SvmConfig, WindowSvm};
use crate::window::{empirical_measure, partition_windows, write_measures, Window};

/// Evaluated flows, the clean reference, and the server address.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub flows: Vec<FlowRecord>,
    pub reference: Vec<FlowRecord>,
    pub server: IpAddress,
    pub seed: u64,
    /// Set when the flows came from a preset.
    pub preset: Option<Preset>,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::config(format!("cannot open {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::config(format!("cannot write {}: {e}", path.display())))
}

/// Resolves a preset name against the built-ins and an optional preset file.
pub fn find_preset(name: &str, presets_file: Option<&Path>) -> Result<Preset> {
    if let Some(path) = presets_file {
        let text = fs::read_to_string(path).map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        if let Some(p) = presets_from_ini(&Ini::parse(&text)?)?.into_iter().find(|p| p.name == name) {
            return Ok(p);
        }
    }
    scenario_preset(name)
}

pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let preset = match &cfg.preset {
        Some(name) => {
            let mut p = find_preset(name, cfg.presets_file.as_deref())?;
            if let Some(s) = cfg.seed {
                p.scenario.seed = s;
            }
            Some(p)
        }
        None => None,
    };
    let seed = cfg.seed.or(preset.as_ref().map(|p| p.scenario.seed)).unwrap_or(DEFAULT_SEED);
    let flows = if let Some(path) = &cfg.input {
        read_flows(open(path)?)?
    } else if let Some(path) = &cfg.packets {
        aggregate_packets(&read_packets(open(path)?)?, FlowGapConfig::new(cfg.params.delta_f)?)?
    } else if let Some(p) = &preset {
        simulate(p)?
    } else {
        return Err(Error::config("run.input, run.packets or run.preset is required"));
    };
    let reference = if let Some(path) = &cfg.reference {
        read_flows(open(path)?)?
    } else if let Some(p) = &preset {
        reference_trace(p)?
    } else {
        flows.clone()
    };
    let server = preset.as_ref().map_or(cfg.params.server, |p| p.server);
    Ok(Dataset { flows, reference, server, seed, preset })
}

/// Verdicts of every detector that ran.
#[derive(Debug, Clone, Default)]
pub struct Verdicts {
    pub windows: BTreeMap<Method, Vec<WindowVerdict>>,
    pub flow_svm: Option<Vec<FlowVerdict>>,
    pub art: Option<ArtClusterState>,
}

#[derive(Debug, Clone)]
pub struct Detections {
    pub windows: Vec<Window>,
    pub states: Vec<FlowState>,
    pub reference_model: ReferenceModel,
    pub flow_svm: Option<FlowSvm>,
    pub window_svm: Option<WindowSvm>,
    pub verdicts: Verdicts,
    pub tau: f64,
}

fn svm_config(nu: f64, p: &DetectorParams) -> SvmConfig {
    SvmConfig { gamma: p.gamma, tol: p.svm_tol, ..SvmConfig::new(nu) }
}

/// Runs `methods` on `data`.
pub fn detect(data: &Dataset, params: &DetectorParams, methods: &[Method]) -> Result<Detections> {
    let reference_model = ReferenceModel::fit(&data.reference, params.k, params.levels, data.seed)?;
    let states = reference_model.states(&data.flows);
    let windows = partition_windows(&data.flows, params.window)?;
    let sanov = SanovConfig { epsilon: params.epsilon, mode: params.threshold_mode };
    let sigma = reference_model.alphabet_size();
    let mut verdicts = Verdicts::default();
    let (mut flow_svm, mut window_svm) = (None, None);
    for &m in methods {
        match m {
            Method::ModelFree => {
                verdicts.windows.insert(m, detect_model_free(&states, &windows, &reference_model, sanov)?);
            }
            Method::ModelBased => {
                verdicts.windows.insert(m, detect_model_based(&states, &windows, &reference_model, sanov)?);
            }
            Method::WindowSvm => {
                let ref_states = reference_model.states(&data.reference);
                let ref_windows = partition_windows(&data.reference, params.window)?;
                let train = window_features(&ref_states, &ref_windows, sigma)?;
                let model = WindowSvm::fit(&train, svm_config(params.window_nu, params), params.variance_target)?;
                let features = window_features(&states, &windows, sigma)?;
                verdicts.windows.insert(m, model.score(&features, &windows)?);
                window_svm = Some(model);
            }
            Method::FlowSvm => {
                let train = distill_flows(&data.reference, &reference_model.clusters);
                let model = FlowSvm::fit(&train, svm_config(params.flow_nu, params))?;
                verdicts.flow_svm = Some(model.score(&distill_flows(&data.flows, &reference_model.clusters))?);
                flow_svm = Some(model);
            }
            Method::Art => {
                verdicts.art = Some(art_cluster(&art_features(&data.flows, data.server), &params.art)?);
            }
        }
    }
    Ok(Detections { windows, states, reference_model, flow_svm, window_svm, verdicts, tau: params.art.tau })
}

/// Detection and false alarm rate of one method at its operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    /// `window` or `flow`.
    pub unit: &'static str,
    pub detection_rate: f64,
    pub false_alarm_rate: f64,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub window_truth: Vec<bool>,
    pub flow_truth: Vec<bool>,
    pub summary: Vec<MethodSummary>,
    pub rocs: BTreeMap<String, RocCurve>,
    pub tau_curve: Option<Vec<(f64, f64)>>,
    /// Per-flow membership in a model-free flagged window, when both ran.
    pub in_flagged_window: Option<Vec<bool>>,
}

/// ROC statistic of a window verdict: `n·score` for the divergence tests
/// (sweeping it sweeps `ε`), `-score` for the window SVM.
fn window_statistic(m: Method, v: &WindowVerdict, w: &Window) -> f64 {
    if v.degenerate {
        return f64::NEG_INFINITY;
    }
    match m {
        Method::WindowSvm => -v.score,
        _ => w.len() as f64 * v.score,
    }
}

/// Scores every available verdict set against the flow labels.
pub fn evaluate(flows: &[FlowRecord], windows: &[Window], verdicts: &Verdicts, tau: f64) -> Result<Evaluation> {
    let window_truth = label_windows(windows, flows);
    let truth = flow_truth(flows);
    let mut summary = Vec::new();
    let mut rocs = BTreeMap::new();
    let roc_ok = |t: &[bool]| t.iter().any(|&x| x) && !t.iter().all(|&x| x);
    for (&m, vs) in &verdicts.windows {
        let flags: Vec<bool> = vs.iter().map(|v| v.flagged).collect();
        let (dr, fa) = rates(&flags, &window_truth);
        summary.push(MethodSummary { method: m.name().into(), unit: "window", detection_rate: dr, false_alarm_rate: fa });
        if roc_ok(&window_truth) {
            let stats: Vec<f64> = vs.iter().zip(windows).map(|(v, w)| window_statistic(m, v, w)).collect();
            rocs.insert(m.name().to_string(), roc_curve(&stats, &window_truth)?);
        }
    }
    if let Some(vs) = &verdicts.flow_svm {
        let flags: Vec<bool> = vs.iter().map(|v| v.flagged).collect();
        let (dr, fa) = rates(&flags, &truth);
        summary.push(MethodSummary { method: Method::FlowSvm.name().into(), unit: "flow", detection_rate: dr, false_alarm_rate: fa });
        if roc_ok(&truth) {
            let stats: Vec<f64> = vs.iter().map(|v| -v.score).collect();
            rocs.insert(Method::FlowSvm.name().to_string(), roc_curve(&stats, &truth)?);
        }
    }
    let mut tau_curve = None;
    let mut in_flagged_window = None;
    if let Some(state) = &verdicts.art {
        let flags = flag_art_clusters(state, tau);
        let (dr, fa) = rates(&flags, &truth);
        summary.push(MethodSummary { method: Method::Art.name().into(), unit: "flow", detection_rate: dr, false_alarm_rate: fa });
        if let Some(mf) = verdicts.windows.get(&Method::ModelFree) {
            let inside = flows_in_flagged_windows(mf, windows, flows.len());
            let fused: Vec<bool> = flags.iter().zip(&inside).map(|(&a, &b)| a && b).collect();
            let (dr, fa) = rates(&fused, &truth);
            summary.push(MethodSummary { method: "art_fused".into(), unit: "flow", detection_rate: dr, false_alarm_rate: fa });
            if roc_ok(&truth) {
                rocs.insert("art_fused".into(), fused_art_roc(state, &inside, &truth)?);
            }
            in_flagged_window = Some(inside);
        }
        if roc_ok(&truth) {
            rocs.insert(Method::Art.name().to_string(), art_roc(state, &truth)?);
        }
        tau_curve = Some(tau_vs_false_alarm(state, &truth, &tau_grid(50)));
    }
    Ok(Evaluation { window_truth, flow_truth: truth, summary, rocs, tau_curve, in_flagged_window })
}

fn has_labels(flows: &[FlowRecord]) -> bool {
    flows.iter().any(|f| f.label.is_some())
}

/// Writes the five verdict files (for the methods that ran) and model exports.
pub fn write_detections(dir: &Path, data: &Dataset, det: &Detections) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::config(format!("cannot create {}: {e}", dir.display())))?;
    let mut written = Vec::new();
    let mut put = |name: &str| {
        let p = dir.join(name);
        written.push(p.clone());
        p
    };
    for (m, vs) in &det.verdicts.windows {
        write_window_verdicts(create(&put(&format!("verdicts_{}.csv", m.name())))?, vs)?;
    }
    if let Some(vs) = &det.verdicts.flow_svm {
        write_flow_verdicts(create(&put("verdicts_flow_svm.csv"))?, vs)?;
    }
    if let Some(state) = &det.verdicts.art {
        write_art_flows(create(&put("verdicts_art.csv"))?, state, det.tau)?;
        write_art_clusters(create(&put("art_clusters.csv"))?, state, det.tau)?;
    }
    let rm = &det.reference_model;
    rm.clusters.write_centers(create(&put("cluster_centers.csv"))?)?;
    rm.clusters.write_assignment(create(&put("cluster_assignment.csv"))?)?;
    rm.quantizer.write_csv(create(&put("quantizer.csv"))?)?;
    let sigma = rm.alphabet_size();
    let measures: Vec<Option<Vec<f64>>> = det
        .windows
        .iter()
        .map(|w| {
            let ws: Vec<FlowState> = w.members.iter().map(|&i| det.states[i]).collect();
            empirical_measure(&ws, sigma).ok().map(|m| m.probs().to_vec())
        })
        .collect();
    write_measures(create(&put("measures_model_free.csv"))?, &det.windows, &measures, sigma)?;
    if let Some(m) = &det.flow_svm {
        m.write_csv(create(&put("flow_svm_model.csv"))?)?;
    }
    if let Some(m) = &det.window_svm {
        let extra = vec![("pca_components".to_string(), m.pca.n_components() as f64)];
        m.model.write_csv(create(&put("window_svm_model.csv"))?, &extra)?;
    }
    if data.preset.is_some() {
        write_flows(create(&put("flows.csv"))?, &data.flows)?;
        write_flows(create(&put("reference.csv"))?, &data.reference)?;
    }
    Ok(written)
}

/// ROC, τ, fusion and summary CSVs.
pub fn write_evaluation(dir: &Path, flows: &[FlowRecord], verdicts: &Verdicts, eval: &Evaluation, tau: f64) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::config(format!("cannot create {}: {e}", dir.display())))?;
    let mut written = Vec::new();
    for (name, curve) in &eval.rocs {
        let p = dir.join(format!("roc_{name}.csv"));
        write_roc(create(&p)?, curve)?;
        written.push(p);
    }
    if let Some(c) = &eval.tau_curve {
        let p = dir.join("tau_false_alarm.csv");
        write_tau_curve(create(&p)?, c)?;
        written.push(p);
    }
    if let (Some(state), Some(inside)) = (&verdicts.art, &eval.in_flagged_window) {
        let p = dir.join("fusion.csv");
        write_fusion(create(&p)?, flows, &flag_art_clusters(state, tau), inside)?;
        written.push(p);
    }
    let p = dir.join("summary.csv");
    let mut wtr = csv::Writer::from_writer(create(&p)?);
    wtr.write_record(["method", "unit", "detection_rate", "false_alarm_rate"])?;
    for s in &eval.summary {
        wtr.write_record([s.method.clone(), s.unit.to_string(), crate::flow::fmt_real(s.detection_rate), crate::flow::fmt_real(s.false_alarm_rate)])?;
    }
    wtr.flush()?;
    written.push(p);
    Ok(written)
}

fn roc_chart(title: &str, curves: &[(&str, &RocCurve, &str)]) -> Chart {
    let mut c = Chart::new(title, "false alarm rate", "detection rate");
    for (name, curve, color) in curves {
        let mut pts: Vec<(f64, f64)> = curve.points.iter().map(|p| (p.false_alarm_rate, p.detection_rate)).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        c = c.with(Series::line(name, pts, color));
    }
    c
}

/// SVG time series for each window detector, plus the ART ROC and τ charts.
pub fn write_plots(dir: &Path, verdicts: &Verdicts, eval: Option<&Evaluation>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::config(format!("cannot create {}: {e}", dir.display())))?;
    let mut written = Vec::new();
    let mut save = |name: String, chart: Chart| -> Result<()> {
        let p = dir.join(name);
        fs::write(&p, chart.render())?;
        written.push(p);
        Ok(())
    };
    for (m, vs) in &verdicts.windows {
        save(format!("plot_{}.svg", m.name()), window_chart(m.name(), vs))?;
    }
    if let Some(e) = eval {
        if let Some(art) = e.rocs.get("art") {
            let mut curves = vec![("ART", art, "#1f4e9c")];
            if let Some(f) = e.rocs.get("art_fused") {
                curves.push(("ART + model-free", f, "#d62728"));
            }
            save("roc_art.svg".into(), roc_chart("ROC of ART clustering", &curves))?;
        }
        if let Some(tc) = &e.tau_curve {
            let chart = Chart::new("tau versus false alarm rate", "false alarm rate", "tau").with(Series::line("tau", tc.clone(), "#1f4e9c"));
            save("tau_false_alarm.svg".into(), chart)?;
        }
    }
    Ok(written)
}

/// Artifacts of one full run.
#[derive(Debug)]
pub struct RunReport {
    pub data: Dataset,
    pub detections: Detections,
    pub evaluation: Option<Evaluation>,
    pub files: Vec<PathBuf>,
}

/// Simulate or load, detect, evaluate when labels exist, and write everything under `cfg.out_dir`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunReport> {
    let data = load_dataset(cfg)?;
    let detections = detect(&data, &cfg.params, &cfg.methods)?;
    let mut files = write_detections(&cfg.out_dir, &data, &detections)?;
    let evaluation = if has_labels(&data.flows) {
        let e = evaluate(&data.flows, &detections.windows, &detections.verdicts, cfg.params.art.tau)?;
        files.extend(write_evaluation(&cfg.out_dir, &data.flows, &detections.verdicts, &e, cfg.params.art.tau)?);
        Some(e)
    } else {
        None
    };
    files.extend(write_plots(&cfg.out_dir, &detections.verdicts, evaluation.as_ref())?);
    Ok(RunReport { data, detections, evaluation, files })
}

/// Reads `flow_index,start_time,score,flagged`.
pub fn read_flow_verdicts(path: &Path) -> Result<Vec<FlowVerdict>> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |k: usize| rec.get(k).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| Error::parse(i + 2, format!("column {} is not a number", k + 1)));
        out.push(FlowVerdict { flow_index: num(0)? as usize, start_time: num(1)?, score: num(2)?, flagged: num(3)? != 0.0 });
    }
    Ok(out)
}

/// Rebuilds cluster memberships from `flow_index,cluster_id,flagged`; centers are not stored.
pub fn read_art_flows(path: &Path) -> Result<ArtClusterState> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let mut assignment = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let k: usize = rec.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| Error::parse(i + 2, "bad cluster id"))?;
        assignment.push(k);
    }
    let n = assignment.iter().max().map_or(0, |m| m + 1);
    let mut members = vec![Vec::new(); n];
    for (i, &k) in assignment.iter().enumerate() {
        members[k].push(i);
    }
    Ok(ArtClusterState { centers: vec![[0.0; 4]; n], members, assignment, passes: 0, converged: true })
}

/// Loads whichever verdict files exist in `dir`.
pub fn read_verdicts(dir: &Path, windows: &[Window]) -> Result<Verdicts> {
    let mut v = Verdicts::default();
    for m in [Method::ModelFree, Method::ModelBased, Method::WindowSvm] {
        let p = dir.join(format!("verdicts_{}.csv", m.name()));
        if p.exists() {
            let mut vs = read_window_verdicts(open(&p)?)?;
            if vs.len() != windows.len() {
                return Err(Error::config(format!("{} has {} windows, expected {}", p.display(), vs.len(), windows.len())));
            }
            for (x, w) in vs.iter_mut().zip(windows) {
                x.flows = w.len();
            }
            v.windows.insert(m, vs);
        }
    }
    let p = dir.join("verdicts_flow_svm.csv");
    if p.exists() {
        v.flow_svm = Some(read_flow_verdicts(&p)?);
    }
    let p = dir.join("verdicts_art.csv");
    if p.exists() {
        v.art = Some(read_art_flows(&p)?);
    }
    Ok(v)
}

/// Window verdicts from a CSV, for plotting.
pub fn load_window_verdicts(path: &Path) -> Result<Vec<WindowVerdict>> {
    read_window_verdicts(open(path)?)
}
