//! Run configuration: `[section]` / `key = value` files, `NETANOM_<SECTION>_<KEY>`
//! environment variables and command-line overrides, applied in that order
//! over the built-in defaults. Choosing a preset first loads that
//! experiment's detector parameters as defaults.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::art::ArtConfig;
use crate::error::{Error, Result};
use crate::flow::IpAddress;
use crate::quantize::QuantLevels;
use crate::sim::ScenarioKind;
use crate::stochastic::ThresholdMode;
use crate::window::WindowConfig;

pub const ENV_PREFIX: &str = "NETANOM_";

/// One `key = value` line.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

impl Entry {
    pub fn parse<T: FromStr>(&self) -> Result<T> {
        self.value
            .parse()
            .map_err(|_| Error::parse(self.line, format!("`{}` is not a valid value for `{}`", self.value, self.key)))
    }

    /// Splits on `sep`, skipping empty items.
    pub fn parse_list<T: FromStr>(&self, sep: char) -> Result<Vec<T>> {
        self.value
            .split(sep)
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| Error::parse(self.line, format!("`{s}` is not a valid item for `{}`", self.key))))
            .collect()
    }

    pub fn check_known(&self, known: &[&str]) -> Result<()> {
        if known.contains(&self.key.as_str()) {
            return Ok(());
        }
        Err(Error::parse(self.line, unknown_key_message(&self.key, known.iter().copied())))
    }
}

fn unknown_key_message<'a>(key: &str, known: impl Iterator<Item = &'a str>) -> String {
    let nearest = known.min_by_key(|k| strsim::levenshtein(key, k));
    match nearest {
        Some(n) => format!("unknown key `{key}`; did you mean `{n}`?"),
        None => format!("unknown key `{key}`"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().rev().find(|e| e.key == key)
    }
}

/// A parsed INI text. `#` and `;` start comment lines; keys before any
/// section header land in a section named `""`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ini {
    sections: Vec<Section>,
}

impl Ini {
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: Vec<Section> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') || s.starts_with(';') {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| Error::parse(line, "unterminated section header"))?.trim();
                if name.is_empty() {
                    return Err(Error::parse(line, "empty section name"));
                }
                sections.push(Section { name: name.to_string(), line, entries: Vec::new() });
                continue;
            }
            let (k, v) = s.split_once('=').ok_or_else(|| Error::parse(line, format!("expected `key = value`, got `{s}`")))?;
            let key = k.trim();
            if key.is_empty() {
                return Err(Error::parse(line, "empty key"));
            }
            if sections.is_empty() {
                sections.push(Section { name: String::new(), line, entries: Vec::new() });
            }
            let sec = sections.last_mut().expect("pushed above");
            sec.entries.push(Entry { key: key.to_string(), value: v.trim().to_string(), line });
        }
        Ok(Ini { sections })
    }

    pub fn sections(&self) -> &[Section] {
        &self.sections
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    ModelFree,
    ModelBased,
    FlowSvm,
    WindowSvm,
    Art,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::ModelFree, Method::ModelBased, Method::FlowSvm, Method::WindowSvm, Method::Art];

    pub fn name(self) -> &'static str {
        match self {
            Method::ModelFree => "model_free",
            Method::ModelBased => "model_based",
            Method::FlowSvm => "flow_svm",
            Method::WindowSvm => "window_svm",
            Method::Art => "art",
        }
    }

    pub fn is_window_based(self) -> bool {
        matches!(self, Method::ModelFree | Method::ModelBased | Method::WindowSvm)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::config(format!("unknown method `{s}`; valid: all, {}", Method::ALL.map(Method::name).join(", "))))
    }
}

/// Parses `all` or a comma-separated method list.
pub fn parse_methods(s: &str) -> Result<Vec<Method>> {
    if s.trim() == "all" {
        return Ok(Method::ALL.to_vec());
    }
    let mut out: Vec<Method> = s.split(',').filter(|p| !p.trim().is_empty()).map(str::parse).collect::<Result<_>>()?;
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(Error::config("no detection method selected"));
    }
    Ok(out)
}

/// Detector parameters of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorParams {
    pub window: WindowConfig,
    pub k: usize,
    pub levels: QuantLevels,
    pub epsilon: f64,
    pub threshold_mode: ThresholdMode,
    pub flow_nu: f64,
    pub window_nu: f64,
    /// `None` picks the data-driven default.
    pub gamma: Option<f64>,
    pub variance_target: f64,
    pub svm_tol: f64,
    pub art: ArtConfig,
    pub delta_f: f64,
    pub server: IpAddress,
}

impl Default for DetectorParams {
    /// The atypical-user experiment settings.
    fn default() -> Self {
        DetectorParams {
            window: WindowConfig { step: 30.0, size: 200.0 },
            k: 3,
            levels: QuantLevels::default(),
            epsilon: 0.01,
            threshold_mode: ThresholdMode::PerWindow,
            flow_nu: 0.002,
            window_nu: 0.1,
            gamma: None,
            variance_target: 0.95,
            svm_tol: 1e-4,
            art: ArtConfig::default(),
            delta_f: 10.0,
            server: IpAddress::new(10, 0, 0, 100),
        }
    }
}

impl DetectorParams {
    /// Per-experiment settings.
    pub fn for_scenario(kind: ScenarioKind) -> Self {
        let base = DetectorParams::default();
        match kind {
            ScenarioKind::AtypicalUser | ScenarioKind::LargeAccessRate => base,
            ScenarioKind::LargeDownload => DetectorParams { flow_nu: 0.0015, art: ArtConfig { tau: 0.01, ..base.art.clone() }, ..base },
            ScenarioKind::DdosFlood => DetectorParams { window: WindowConfig { step: 10.0, size: 100.0 }, window_nu: 0.05, ..base },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Option<String>,
    /// INI file with extra preset definitions.
    pub presets_file: Option<PathBuf>,
    /// Flow CSV to analyze instead of simulating.
    pub input: Option<PathBuf>,
    /// Packet CSV to aggregate and analyze.
    pub packets: Option<PathBuf>,
    /// Clean flow CSV for the supervised detectors; absent means the preset's
    /// reference trace, or the input itself without a preset.
    pub reference: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub methods: Vec<Method>,
    pub seed: Option<u64>,
    pub params: DetectorParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            preset: None,
            presets_file: None,
            input: None,
            packets: None,
            reference: None,
            out_dir: PathBuf::from("out"),
            methods: Method::ALL.to_vec(),
            seed: None,
            params: DetectorParams::default(),
        }
    }
}

/// Every accepted `(section, key)`.
pub const KEYS: [(&str, &str); 25] = [
    ("run", "preset"),
    ("run", "presets_file"),
    ("run", "input"),
    ("run", "packets"),
    ("run", "reference"),
    ("run", "out_dir"),
    ("run", "methods"),
    ("run", "seed"),
    ("window", "h"),
    ("window", "ws"),
    ("model", "k"),
    ("model", "quant"),
    ("model", "epsilon"),
    ("model", "threshold_mode"),
    ("svm", "flow_nu"),
    ("svm", "window_nu"),
    ("svm", "gamma"),
    ("svm", "variance_target"),
    ("svm", "tol"),
    ("art", "vigilance"),
    ("art", "radius"),
    ("art", "tau"),
    ("art", "max_passes"),
    ("flow", "delta_f"),
    ("flow", "server"),
];

fn all_keys() -> impl Iterator<Item = (&'static str, &'static str)> {
    KEYS.iter().copied()
}

/// Where a setting came from, for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub enum Origin {
    File { line: usize },
    Env(String),
    Cli(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub section: String,
    pub key: String,
    pub value: String,
    pub origin: Origin,
}

impl Assignment {
    pub fn cli(dotted: &str, value: impl Into<String>) -> Self {
        let (section, key) = dotted.split_once('.').unwrap_or(("", dotted));
        Assignment { section: section.into(), key: key.into(), value: value.into(), origin: Origin::Cli(dotted.to_string()) }
    }

    fn fail(&self, message: impl fmt::Display) -> Error {
        match &self.origin {
            Origin::File { line } => Error::parse(*line, format!("{}.{}: {message}", self.section, self.key)),
            Origin::Env(var) => Error::config(format!("{var}: {message}")),
            Origin::Cli(flag) => Error::config(format!("{flag}: {message}")),
        }
    }

    fn get<T: FromStr>(&self) -> Result<T> {
        self.value.trim().parse().map_err(|_| self.fail(format!("`{}` has the wrong type", self.value)))
    }

    fn reals(&self) -> Result<Vec<f64>> {
        self.value.split(',').map(|s| s.trim().parse::<f64>().map_err(|_| self.fail(format!("`{s}` is not a number")))).collect()
    }
}

/// Assignments from a config file's text.
pub fn file_assignments(text: &str) -> Result<Vec<Assignment>> {
    let ini = Ini::parse(text)?;
    let mut out = Vec::new();
    for sec in ini.sections() {
        for e in &sec.entries {
            out.push(Assignment { section: sec.name.clone(), key: e.key.clone(), value: e.value.clone(), origin: Origin::File { line: e.line } });
        }
    }
    Ok(out)
}

/// Assignments from `NETANOM_<SECTION>_<KEY>` variables among `vars`.
pub fn env_assignments<I: IntoIterator<Item = (String, String)>>(vars: I) -> Vec<Assignment> {
    let vars: Vec<(String, String)> = vars.into_iter().collect();
    let mut out = Vec::new();
    for (section, key) in all_keys() {
        let name = format!("{ENV_PREFIX}{}_{}", section.to_uppercase(), key.to_uppercase());
        if let Some((_, v)) = vars.iter().find(|(k, _)| *k == name) {
            out.push(Assignment { section: section.into(), key: key.into(), value: v.clone(), origin: Origin::Env(name) });
        }
    }
    out
}

impl RunConfig {
    /// Defaults, then the chosen preset's parameters, then `assignments` in order.
    pub fn resolve(assignments: &[Assignment]) -> Result<Self> {
        for a in assignments {
            if !all_keys().any(|(s, k)| s == a.section && k == a.key) {
                let dotted = format!("{}.{}", a.section, a.key);
                let known: Vec<String> = all_keys().map(|(s, k)| format!("{s}.{k}")).collect();
                return Err(a.fail(unknown_key_message(&dotted, known.iter().map(String::as_str))));
            }
        }
        let mut cfg = RunConfig::default();
        if let Some(p) = assignments.iter().rev().find(|a| a.section == "run" && a.key == "preset") {
            if let Ok(kind) = p.value.trim().parse::<ScenarioKind>() {
                cfg.params = DetectorParams::for_scenario(kind);
            }
        }
        for a in assignments {
            cfg.apply(a)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Config file text, the process environment, then command-line assignments.
    pub fn load(file_text: Option<&str>, env: impl IntoIterator<Item = (String, String)>, cli: &[Assignment]) -> Result<Self> {
        let mut all = match file_text {
            Some(t) => file_assignments(t)?,
            None => Vec::new(),
        };
        all.extend(env_assignments(env));
        all.extend(cli.iter().cloned());
        RunConfig::resolve(&all)
    }

    fn apply(&mut self, a: &Assignment) -> Result<()> {
        let p = &mut self.params;
        match (a.section.as_str(), a.key.as_str()) {
            ("run", "preset") => self.preset = Some(a.value.trim().to_string()),
            ("run", "presets_file") => self.presets_file = Some(a.get()?),
            ("run", "input") => self.input = Some(a.get()?),
            ("run", "packets") => self.packets = Some(a.get()?),
            ("run", "reference") => self.reference = Some(a.get()?),
            ("run", "out_dir") => self.out_dir = a.get()?,
            ("run", "methods") => self.methods = parse_methods(&a.value).map_err(|e| a.fail(e))?,
            ("run", "seed") => self.seed = Some(a.get()?),
            ("window", "h") => p.window.step = a.get()?,
            ("window", "ws") => p.window.size = a.get()?,
            ("model", "k") => p.k = a.get()?,
            ("model", "quant") => {
                // size, distance, duration
                let v: Vec<usize> = a.value.split(',').map(|s| s.trim().parse()).collect::<std::result::Result<_, _>>().map_err(|_| a.fail("expected three integers"))?;
                let [size, distance, duration] = v[..] else { return Err(a.fail("expected size,distance,duration levels")) };
                p.levels = QuantLevels::new(distance, size, duration).map_err(|e| a.fail(e))?;
            }
            ("model", "epsilon") => p.epsilon = a.get()?,
            ("model", "threshold_mode") => {
                p.threshold_mode = match a.value.trim() {
                    "per_window" => ThresholdMode::PerWindow,
                    "mean_count" => ThresholdMode::MeanCount,
                    _ => return Err(a.fail("expected per_window or mean_count")),
                }
            }
            ("svm", "flow_nu") => p.flow_nu = a.get()?,
            ("svm", "window_nu") => p.window_nu = a.get()?,
            ("svm", "gamma") => p.gamma = if a.value.trim() == "auto" { None } else { Some(a.get()?) },
            ("svm", "variance_target") => p.variance_target = a.get()?,
            ("svm", "tol") => p.svm_tol = a.get()?,
            ("art", "vigilance") => {
                let v = a.reals()?;
                p.art.vigilance = match v[..] {
                    [x] => [x; 4],
                    [a0, a1, a2, a3] => [a0, a1, a2, a3],
                    _ => return Err(a.fail("expected one or four values")),
                }
            }
            ("art", "radius") => p.art.radius = a.get()?,
            ("art", "tau") => p.art.tau = a.get()?,
            ("art", "max_passes") => p.art.max_passes = a.get()?,
            ("flow", "delta_f") => p.delta_f = a.get()?,
            ("flow", "server") => p.server = a.get()?,
            _ => unreachable!("keys checked in resolve"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        WindowConfig::new(p.window.step, p.window.size)?;
        if p.k == 0 {
            return Err(Error::config("model.k must be positive"));
        }
        if !(p.epsilon > 0.0 && p.epsilon < 1.0) {
            return Err(Error::config(format!("model.epsilon must lie in (0,1), got {}", p.epsilon)));
        }
        for (name, nu) in [("svm.flow_nu", p.flow_nu), ("svm.window_nu", p.window_nu)] {
            if !(nu > 0.0 && nu <= 1.0) {
                return Err(Error::config(format!("{name} must lie in (0,1], got {nu}")));
            }
        }
        if let Some(g) = p.gamma {
            if !(g > 0.0) {
                return Err(Error::config(format!("svm.gamma must be positive, got {g}")));
            }
        }
        if !(p.variance_target > 0.0 && p.variance_target <= 1.0) {
            return Err(Error::config("svm.variance_target must lie in (0,1]"));
        }
        if !(p.delta_f > 0.0) {
            return Err(Error::config("flow.delta_f must be positive"));
        }
        p.art.validate()?;
        if self.input.is_some() && self.packets.is_some() {
            return Err(Error::config("run.input and run.packets are mutually exclusive"));
        }
        Ok(())
    }
}
