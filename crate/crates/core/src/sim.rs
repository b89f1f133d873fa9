//! Seeded flow-level traffic generator: nominal users plus four labeled
//! anomaly scenarios.
//!
//! Each user emits flows as a Poisson process. Sizes are Gaussian truncated
//! below at one byte (redrawn), durations exponential. One ChaCha8 stream
//! serves a whole scenario, in this draw order: users in profile order, and
//! for each user every arrival gap followed by that flow's size then
//! duration; then the anomaly draws in the same per-user order.

use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::aggregate::sort_flows;
use crate::config::Ini;
use crate::error::{Error, Result};
use crate::flow::{write_flows, FlowRecord, IpAddress, Label};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserProfile {
    pub address: IpAddress,
    /// Mean flow size, bytes.
    pub size_mean: f64,
    pub size_std: f64,
    /// Flows per second.
    pub rate: f64,
    /// Mean flow duration, seconds.
    pub duration_mean: f64,
}

impl UserProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0) || !(self.size_std >= 0.0) || !(self.duration_mean > 0.0) || !self.size_mean.is_finite() {
            return Err(Error::config(format!("invalid profile for {}", self.address)));
        }
        Ok(())
    }
}

/// `ip/size_mean/size_std/rate/duration_mean`.
impl FromStr for UserProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split('/').collect();
        if parts.len() != 5 {
            return Err(Error::config(format!("profile `{s}` is not ip/size_mean/size_std/rate/duration_mean")));
        }
        let num = |i: usize| -> Result<f64> {
            parts[i].parse().map_err(|_| Error::config(format!("profile `{s}`: `{}` is not a number", parts[i])))
        };
        let p = UserProfile { address: parts[0].parse()?, size_mean: num(1)?, size_std: num(2)?, rate: num(3)?, duration_mean: num(4)? };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    /// An address far from every nominal user talks during the interval.
    AtypicalUser,
    /// The target user's mean flow size is multiplied by `magnitude`.
    LargeDownload,
    /// The target user's flow rate is multiplied by `magnitude`.
    LargeAccessRate,
    /// The bot users add flows at `magnitude` times their nominal rate, with
    /// bimodal sizes: mostly tiny pings, some merged into large flows.
    DdosFlood,
}

pub const SCENARIO_NAMES: [&str; 4] = ["atypical_user", "large_download", "large_access_rate", "ddos_flood"];

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::AtypicalUser => SCENARIO_NAMES[0],
            ScenarioKind::LargeDownload => SCENARIO_NAMES[1],
            ScenarioKind::LargeAccessRate => SCENARIO_NAMES[2],
            ScenarioKind::DdosFlood => SCENARIO_NAMES[3],
        }
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "atypical_user" => Ok(ScenarioKind::AtypicalUser),
            "large_download" => Ok(ScenarioKind::LargeDownload),
            "large_access_rate" => Ok(ScenarioKind::LargeAccessRate),
            "ddos_flood" => Ok(ScenarioKind::DdosFlood),
            other => Err(Error::config(format!("unknown scenario `{other}`; valid: {}", SCENARIO_NAMES.join(", ")))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub total_time: f64,
    pub anomaly_start: f64,
    pub anomaly_end: f64,
    /// Scenario-specific: intruder rate (flows/s) for `atypical_user`,
    /// otherwise a multiplier.
    pub magnitude: f64,
    /// Profile index of the affected user; also the intruder's size and duration template.
    pub target: usize,
    pub intruder: IpAddress,
    /// Profile indices of the DDoS bots.
    pub bots: Vec<usize>,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self, profiles: &[UserProfile]) -> Result<()> {
        if !(self.total_time > 0.0) {
            return Err(Error::config("total_time must be positive"));
        }
        if !(0.0 <= self.anomaly_start && self.anomaly_start < self.anomaly_end && self.anomaly_end <= self.total_time) {
            return Err(Error::config(format!(
                "anomaly interval [{}, {}] must satisfy 0 <= start < end <= total_time = {}",
                self.anomaly_start, self.anomaly_end, self.total_time
            )));
        }
        if !(self.magnitude > 0.0) {
            return Err(Error::config("magnitude must be positive"));
        }
        if self.target >= profiles.len() || self.bots.iter().any(|&b| b >= profiles.len()) {
            return Err(Error::config("target or bot index outside the profile list"));
        }
        if self.kind == ScenarioKind::DdosFlood && self.bots.is_empty() {
            return Err(Error::config("ddos_flood needs at least one bot"));
        }
        Ok(())
    }
}

/// A complete scenario: network, anomaly, and the length of the clean
/// reference trace the supervised detectors learn from.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: String,
    pub profiles: Vec<UserProfile>,
    pub server: IpAddress,
    pub scenario: ScenarioConfig,
    pub reference_time: f64,
}

pub const DEFAULT_SEED: u64 = 1;

/// The eight users CT1..CT8 and the server.
///
/// CT1-CT3 and CT4-CT6 sit in two tight address groups sending ordinary
/// flows; CT7 and CT8 are further apart and send large flows.
pub fn default_profiles() -> (Vec<UserProfile>, IpAddress) {
    let p = |d: u8, size_mean: f64| UserProfile {
        address: IpAddress::new(10, 0, 0, d),
        size_mean,
        size_std: 1000.0,
        rate: 0.1,
        duration_mean: 2.0,
    };
    let users = vec![p(11, 4000.0), p(12, 4000.0), p(13, 4000.0), p(21, 4000.0), p(22, 4000.0), p(23, 4000.0), p(40, 20000.0), p(50, 20000.0)];
    (users, IpAddress::new(10, 0, 0, 100))
}

/// The four experiments: total times 5000, 5000, 2000 and 900 s.
pub fn scenario_preset(name: &str) -> Result<Preset> {
    let kind: ScenarioKind = name.parse()?;
    let (profiles, server) = default_profiles();
    let base = ScenarioConfig {
        kind,
        total_time: 5000.0,
        anomaly_start: 1000.0,
        anomaly_end: 1300.0,
        magnitude: 1.0,
        target: 0,
        intruder: IpAddress::new(172, 16, 8, 31),
        bots: Vec::new(),
        seed: DEFAULT_SEED,
    };
    let scenario = match kind {
        ScenarioKind::AtypicalUser => ScenarioConfig { magnitude: 0.03, ..base },
        ScenarioKind::LargeDownload => ScenarioConfig { magnitude: 2.0, ..base },
        ScenarioKind::LargeAccessRate => ScenarioConfig { total_time: 2000.0, magnitude: 6.0, ..base },
        ScenarioKind::DdosFlood => {
            ScenarioConfig { total_time: 900.0, anomaly_start: 500.0, anomaly_end: 600.0, magnitude: 10.0, bots: (0..5).collect(), ..base }
        }
    };
    Ok(Preset { name: kind.name().to_string(), profiles, server, scenario, reference_time: 20_000.0 })
}

fn gaussian_at_least_one(rng: &mut ChaCha8Rng, mean: f64, std: f64) -> f64 {
    if std == 0.0 {
        return mean.max(1.0);
    }
    let d = Normal::new(mean, std).expect("validated std");
    // rejection keeps the exact truncated law; a mean far below 1 byte would loop
    for _ in 0..10_000 {
        let x = d.sample(rng);
        if x >= 1.0 {
            return x;
        }
    }
    1.0
}

fn exp(rng: &mut ChaCha8Rng, mean: f64) -> f64 {
    Exp::new(1.0 / mean).expect("positive mean").sample(rng)
}

/// Poisson arrivals on `[from, to)` at `rate`, each with a size and duration draw.
fn emit<F>(rng: &mut ChaCha8Rng, user: IpAddress, rate: f64, from: f64, to: f64, label: Label, mut size: F, duration_mean: f64, out: &mut Vec<FlowRecord>)
where
    F: FnMut(&mut ChaCha8Rng) -> f64,
{
    let mut t = from;
    loop {
        t += exp(rng, 1.0 / rate);
        if t >= to {
            break;
        }
        let size_bytes = size(rng);
        let duration = exp(rng, duration_mean);
        out.push(FlowRecord { user, size_bytes, duration, start_time: t, label: Some(label) });
    }
}

fn nominal_into(rng: &mut ChaCha8Rng, profiles: &[UserProfile], total_time: f64) -> Result<Vec<FlowRecord>> {
    if !(total_time > 0.0) {
        return Err(Error::config("total_time must be positive"));
    }
    let mut out = Vec::new();
    for p in profiles {
        p.validate()?;
        emit(rng, p.address, p.rate, 0.0, total_time, Label::Nominal, |r| gaussian_at_least_one(r, p.size_mean, p.size_std), p.duration_mean, &mut out);
    }
    sort_flows(&mut out);
    Ok(out)
}

/// Nominal traffic over `[0, total_time)`, all labeled nominal.
pub fn generate_nominal(profiles: &[UserProfile], total_time: f64, seed: u64) -> Result<Vec<FlowRecord>> {
    nominal_into(&mut ChaCha8Rng::seed_from_u64(seed), profiles, total_time)
}

fn inject_into(rng: &mut ChaCha8Rng, mut flows: Vec<FlowRecord>, profiles: &[UserProfile], cfg: &ScenarioConfig) -> Result<Vec<FlowRecord>> {
    cfg.validate(profiles)?;
    let (ta, tb) = (cfg.anomaly_start, cfg.anomaly_end);
    let target = profiles[cfg.target];
    match cfg.kind {
        ScenarioKind::AtypicalUser => {
            let far = profiles.iter().all(|p| p.address.octets()[0] != cfg.intruder.octets()[0]);
            if !far {
                return Err(Error::config("intruder must differ from every user in the first octet"));
            }
            emit(rng, cfg.intruder, cfg.magnitude, ta, tb, Label::Anomalous, |r| gaussian_at_least_one(r, target.size_mean, target.size_std), target.duration_mean, &mut flows);
        }
        ScenarioKind::LargeDownload => {
            for f in flows.iter_mut().filter(|f| f.user == target.address && f.start_time >= ta && f.start_time < tb) {
                f.size_bytes = gaussian_at_least_one(rng, target.size_mean * cfg.magnitude, target.size_std);
                f.label = Some(Label::Anomalous);
            }
        }
        ScenarioKind::LargeAccessRate => {
            let extra = target.rate * (cfg.magnitude - 1.0);
            if extra > 0.0 {
                emit(rng, target.address, extra, ta, tb, Label::Anomalous, |r| gaussian_at_least_one(r, target.size_mean, target.size_std), target.duration_mean, &mut flows);
            }
        }
        ScenarioKind::DdosFlood => {
            for &b in &cfg.bots {
                let bot = profiles[b];
                let large = 10.0 * bot.size_mean;
                emit(
                    rng,
                    bot.address,
                    bot.rate * cfg.magnitude,
                    ta,
                    tb,
                    Label::Anomalous,
                    |r| if r.random_bool(0.75) { gaussian_at_least_one(r, 300.0, 100.0) } else { gaussian_at_least_one(r, large, 0.2 * large) },
                    bot.duration_mean,
                    &mut flows,
                );
            }
        }
    }
    sort_flows(&mut flows);
    Ok(flows)
}

/// Adds or rewrites flows per the scenario. Draws come from the scenario seed on stream 1.
pub fn inject_anomaly(nominal: Vec<FlowRecord>, profiles: &[UserProfile], cfg: &ScenarioConfig) -> Result<Vec<FlowRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    inject_into(&mut rng, nominal, profiles, cfg)
}

/// Nominal traffic plus the anomaly, from a single stream seeded by the scenario seed.
pub fn simulate(preset: &Preset) -> Result<Vec<FlowRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(preset.scenario.seed);
    let nominal = nominal_into(&mut rng, &preset.profiles, preset.scenario.total_time)?;
    inject_into(&mut rng, nominal, &preset.profiles, &preset.scenario)
}

/// Seed of the clean reference trace that goes with scenario seed `seed`.
pub fn reference_seed(seed: u64) -> u64 {
    seed.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1_442_695_040_888_963_407)
}

/// Anomaly-free traffic from the same users, on an independent seed.
pub fn reference_trace(preset: &Preset) -> Result<Vec<FlowRecord>> {
    generate_nominal(&preset.profiles, preset.reference_time, reference_seed(preset.scenario.seed))
}

pub fn write_scenario<W: Write>(w: W, flows: &[FlowRecord]) -> Result<()> {
    write_flows(w, flows)
}

const PRESET_KEYS: [&str; 11] =
    ["kind", "total_time", "anomaly_start", "anomaly_end", "magnitude", "target", "intruder", "bots", "seed", "reference_time", "users"];

/// Presets from an INI text, one section per preset. A section named after a
/// built-in scenario starts from that preset; other sections need `kind`.
///
/// ```text
/// [atypical_user]
/// total_time = 3000
/// users = 10.0.0.11/4000/1000/0.1/2 10.0.0.12/4000/1000/0.1/2
/// ```
pub fn presets_from_ini(ini: &Ini) -> Result<Vec<Preset>> {
    let mut out = Vec::new();
    for section in ini.sections() {
        let kind_entry = section.get("kind");
        let mut preset = match (kind_entry, section.name.parse::<ScenarioKind>()) {
            (Some(e), _) => scenario_preset(e.value.as_str()).map_err(|err| Error::parse(e.line, err.to_string()))?,
            (None, Ok(k)) => scenario_preset(k.name())?,
            (None, Err(_)) => return Err(Error::parse(section.line, format!("section `{}` needs a `kind` key", section.name))),
        };
        preset.name = section.name.clone();
        for e in &section.entries {
            e.check_known(&PRESET_KEYS)?;
            let s = &mut preset.scenario;
            match e.key.as_str() {
                "kind" => {}
                "total_time" => s.total_time = e.parse()?,
                "anomaly_start" => s.anomaly_start = e.parse()?,
                "anomaly_end" => s.anomaly_end = e.parse()?,
                "magnitude" => s.magnitude = e.parse()?,
                "target" => s.target = e.parse()?,
                "intruder" => s.intruder = e.parse()?,
                "seed" => s.seed = e.parse()?,
                "bots" => s.bots = e.parse_list(',')?,
                "reference_time" => preset.reference_time = e.parse()?,
                "users" => preset.profiles = e.parse_list(' ')?,
                _ => unreachable!("checked above"),
            }
        }
        preset.scenario.validate(&preset.profiles).map_err(|err| Error::parse(section.line, err.to_string()))?;
        out.push(preset);
    }
    Ok(out)
}
