use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use netanom::config::{Assignment, RunConfig};
use netanom::flow::{read_flows, write_flows};
use netanom::pipeline::{detect, evaluate, load_dataset, load_window_verdicts, read_verdicts, run_pipeline, write_detections, write_evaluation, write_plots};
use netanom::svg::{window_chart, Chart, Series};
use netanom::window::partition_windows;
use netanom::{Error, Result};

#[derive(Parser)]
#[command(name = "netanom", version, about = "Flow-based host network anomaly detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled scenario and its clean reference trace.
    Simulate(Common),
    /// Run detectors and write verdicts and model exports.
    Detect(Common),
    /// Score verdict files in a directory against flow labels.
    Evaluate(Common),
    /// Render an SVG from a window verdict or ROC CSV.
    Plot {
        /// Window verdict CSV or ROC CSV.
        input: PathBuf,
        /// Output SVG path.
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        title: Option<String>,
    },
    /// Simulate or load, detect, evaluate and plot in one go.
    Run(Common),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// INI config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in or file-defined scenario name.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    presets_file: Option<String>,
    /// Flow CSV to analyze.
    #[arg(long)]
    input: Option<String>,
    /// Packet CSV to aggregate into flows.
    #[arg(long)]
    packets: Option<String>,
    /// Clean flow CSV for the supervised detectors.
    #[arg(long)]
    reference: Option<String>,
    /// Output directory.
    #[arg(long, short)]
    out: Option<String>,
    /// `all` or a comma list of model_free, model_based, flow_svm, window_svm, art.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    /// Window step in seconds.
    #[arg(long)]
    h: Option<String>,
    /// Window size in seconds.
    #[arg(long)]
    ws: Option<String>,
    /// Number of user clusters.
    #[arg(long)]
    k: Option<String>,
    /// Quantization levels `size,distance,duration`.
    #[arg(long)]
    quant: Option<String>,
    #[arg(long)]
    nu_flow: Option<String>,
    #[arg(long)]
    nu_window: Option<String>,
    /// RBF width or `auto`.
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    tau: Option<String>,
    /// One value or four comma-separated values.
    #[arg(long)]
    vigilance: Option<String>,
    #[arg(long)]
    radius: Option<String>,
    /// `per_window` or `mean_count`.
    #[arg(long)]
    threshold_mode: Option<String>,
    #[arg(long)]
    variance_target: Option<String>,
    #[arg(long)]
    max_passes: Option<String>,
    /// Packet gap that closes a flow, in seconds.
    #[arg(long)]
    delta_f: Option<String>,
    /// Any setting as `section.key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn assignments(&self) -> Result<Vec<Assignment>> {
        let flags: [(&str, &Option<String>); 23] = [
            ("run.preset", &self.preset),
            ("run.presets_file", &self.presets_file),
            ("run.input", &self.input),
            ("run.packets", &self.packets),
            ("run.reference", &self.reference),
            ("run.out_dir", &self.out),
            ("run.methods", &self.methods),
            ("run.seed", &self.seed),
            ("model.epsilon", &self.epsilon),
            ("window.h", &self.h),
            ("window.ws", &self.ws),
            ("model.k", &self.k),
            ("model.quant", &self.quant),
            ("svm.flow_nu", &self.nu_flow),
            ("svm.window_nu", &self.nu_window),
            ("svm.gamma", &self.gamma),
            ("art.tau", &self.tau),
            ("art.vigilance", &self.vigilance),
            ("art.radius", &self.radius),
            ("model.threshold_mode", &self.threshold_mode),
            ("svm.variance_target", &self.variance_target),
            ("art.max_passes", &self.max_passes),
            ("flow.delta_f", &self.delta_f),
        ];
        let mut out: Vec<Assignment> = flags.iter().filter_map(|(k, v)| v.as_ref().map(|v| Assignment::cli(k, v.clone()))).collect();
        for s in &self.set {
            let (k, v) = s.split_once('=').ok_or_else(|| Error::config(format!("--set expects section.key=value, got `{s}`")))?;
            out.push(Assignment::cli(k.trim(), v.trim()));
        }
        Ok(out)
    }

    fn load(&self) -> Result<RunConfig> {
        let text = match &self.config {
            Some(p) => Some(fs::read_to_string(p).map_err(|e| Error::config(format!("cannot read {}: {e}", p.display())))?),
            None => None,
        };
        RunConfig::load(text.as_deref(), std::env::vars(), &self.assignments()?)
    }
}

fn create(path: &std::path::Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| Error::config(format!("cannot write {}: {e}", path.display())))
}

fn simulate(c: &Common) -> Result<()> {
    let cfg = c.load()?;
    if cfg.preset.is_none() {
        return Err(Error::config("simulate needs --preset"));
    }
    let data = load_dataset(&cfg)?;
    fs::create_dir_all(&cfg.out_dir)?;
    write_flows(create(&cfg.out_dir.join("flows.csv"))?, &data.flows)?;
    write_flows(create(&cfg.out_dir.join("reference.csv"))?, &data.reference)?;
    println!("{} flows, {} reference flows -> {}", data.flows.len(), data.reference.len(), cfg.out_dir.display());
    Ok(())
}

fn run_detect(c: &Common) -> Result<()> {
    let cfg = c.load()?;
    let data = load_dataset(&cfg)?;
    let det = detect(&data, &cfg.params, &cfg.methods)?;
    let mut files = write_detections(&cfg.out_dir, &data, &det)?;
    files.extend(write_plots(&cfg.out_dir, &det.verdicts, None)?);
    println!("{} files -> {}", files.len(), cfg.out_dir.display());
    Ok(())
}

fn run_evaluate(c: &Common) -> Result<()> {
    let cfg = c.load()?;
    let input = cfg.input.as_ref().ok_or_else(|| Error::config("evaluate needs --input with labeled flows"))?;
    let flows = read_flows(fs::File::open(input).map_err(|e| Error::config(format!("cannot open {}: {e}", input.display())))?)?;
    let windows = partition_windows(&flows, cfg.params.window)?;
    let verdicts = read_verdicts(&cfg.out_dir, &windows)?;
    let eval = evaluate(&flows, &windows, &verdicts, cfg.params.art.tau)?;
    write_evaluation(&cfg.out_dir, &flows, &verdicts, &eval, cfg.params.art.tau)?;
    write_plots(&cfg.out_dir, &verdicts, Some(&eval))?;
    for s in &eval.summary {
        println!("{:<12} {:<6} detection {:.3} false alarm {:.3}", s.method, s.unit, s.detection_rate, s.false_alarm_rate);
    }
    Ok(())
}

fn plot(input: &PathBuf, out: &PathBuf, title: Option<&str>) -> Result<()> {
    let text = fs::read_to_string(input).map_err(|e| Error::config(format!("cannot read {}: {e}", input.display())))?;
    let header = text.lines().next().unwrap_or_default();
    let name = title.map(str::to_string).unwrap_or_else(|| input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
    let chart = if header.starts_with("threshold,false_alarm_rate,detection_rate") {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut pts = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let v = |i: usize| rec.get(i).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| Error::config("malformed ROC row"));
            pts.push((v(1)?, v(2)?));
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        Chart::new(&name, "false alarm rate", "detection rate").with(Series::line("ROC", pts, "#1f4e9c"))
    } else {
        window_chart(&name, &load_window_verdicts(input)?)
    };
    fs::write(out, chart.render())?;
    Ok(())
}

fn run_all(c: &Common) -> Result<()> {
    let cfg = c.load()?;
    let report = run_pipeline(&cfg)?;
    if let Some(e) = &report.evaluation {
        for s in &e.summary {
            println!("{:<12} {:<6} detection {:.3} false alarm {:.3}", s.method, s.unit, s.detection_rate, s.false_alarm_rate);
        }
    }
    println!("{} files -> {}", report.files.len(), cfg.out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Detect(c) => run_detect(c),
        Command::Evaluate(c) => run_evaluate(c),
        Command::Plot { input, out, title } => plot(input, out, title.as_deref()),
        Command::Run(c) => run_all(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("netanom: {e}");
            ExitCode::FAILURE
        }
    }
}
