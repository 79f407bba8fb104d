//! Command-line front end. Exit status: 0 on success, 1 on usage errors,
//! 2 on data errors.

use std::ffi::OsString;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use percepta_core::calibration::{read_responses, Predictor};
use percepta_core::density::{resolution_scan, HistogramMode};
use percepta_core::io::{read_image, read_json, to_json, write_image, write_json};
use percepta_core::pipeline::{calibrate, ModelSpec, StimulusSetup};
use percepta_core::serde_util::SchemaVersion;
use percepta_core::synth::{generate_dataset, rasterize};
use percepta_core::{Dataset, GenParams, RenderParams, StimulusImage, ThresholdPlot};
use serde::Serialize;
use thiserror::Error;

use crate::svg::step_chart;
use crate::wire::{
    density_options, estimate, EstimateRequest, ImageSource, ModelKind, Overrides, RequestError,
    Source,
};

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl From<percepta_core::Error> for CliError {
    fn from(e: percepta_core::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "percepta",
    version,
    about = "Model perceived cluster counts in scatterplots"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a clustered dataset
    Gen(GenArgs),
    /// Rasterize a dataset to a PGM or PNG stimulus
    Render(RenderArgs),
    /// Estimate the cluster count or threshold plot of a stimulus
    Estimate(EstimateArgs),
    /// Write a threshold plot as JSON, CSV and/or SVG
    PlotThreshold(PlotArgs),
    /// Fit a threshold model to user responses
    Calibrate(CalibrateArgs),
    /// Threshold for a target count across histogram bin sizes
    Stability(StabilityArgs),
    /// Start the HTTP service
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 550)]
    pub width: u32,
    #[arg(long, default_value_t = 550)]
    pub height: u32,
    /// Number of clusters
    #[arg(short = 'C', long = "clusters")]
    pub clusters: usize,
    /// Cluster standard deviation in pixels
    #[arg(short = 'S', long = "size")]
    pub size: f64,
    /// Number of cluster points
    #[arg(short = 'N', long = "points")]
    pub points: usize,
    #[arg(long, default_value_t = 10.0)]
    pub snr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Point area in square pixels
    #[arg(short = 'P', long = "point-area")]
    pub point_area: f64,
    #[arg(short = 'O', long, default_value_t = 1.0)]
    pub opacity: f64,
    /// Output image; the extension (.pgm or .png) picks the format
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    #[arg(long, required_unless_present_any = ["image", "request"], conflicts_with_all = ["image", "request"])]
    pub dataset: Option<PathBuf>,
    /// PGM or PNG stimulus (density model only)
    #[arg(long, conflicts_with = "request")]
    pub image: Option<PathBuf>,
    /// Complete estimate request as JSON; excludes the other options
    #[arg(long, conflicts_with_all = ["model", "bin_size", "mode", "point_area", "opacity", "subsample", "subsample_seed"])]
    pub request: Option<PathBuf>,
    #[arg(long, value_enum, required_unless_present = "request")]
    pub model: Option<ModelKind>,
    /// Histogram bin size in pixels [default: 20]
    #[arg(short = 'B', long = "bin-size")]
    pub bin_size: Option<u32>,
    /// Histogram mode: coverage or intensity_sum [default: coverage]
    #[arg(long)]
    pub mode: Option<HistogramMode>,
    #[arg(short = 'P', long = "point-area")]
    pub point_area: Option<f64>,
    #[arg(short = 'O', long)]
    pub opacity: Option<f64>,
    /// Keep a uniform random subset of this many points
    #[arg(long)]
    pub subsample: Option<usize>,
    #[arg(long)]
    pub subsample_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Persistence threshold at which to report the count
    #[arg(short = 'T', long)]
    pub threshold: Option<f64>,
    /// Write the full response JSON here instead of printing
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, required_unless_present_any = ["csv", "svg"])]
    pub json: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// CSV with header participant,S,N,P,O,C,U and an optional seed column
    #[arg(long)]
    pub responses: PathBuf,
    /// S, N, P, N_and_P or O
    #[arg(long)]
    pub predictor: Predictor,
    #[arg(long, value_enum)]
    pub model: ModelKind,
    #[arg(short = 'B', long = "bin-size")]
    pub bin_size: Option<u32>,
    #[arg(long)]
    pub mode: Option<HistogramMode>,
    #[arg(long, default_value_t = 550)]
    pub width: u32,
    #[arg(long, default_value_t = 550)]
    pub height: u32,
    #[arg(long, default_value_t = 10.0)]
    pub snr: f64,
    /// Stimulus seed for rows without a seed column
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fitted model JSON
    #[arg(short, long)]
    pub output: PathBuf,
    /// Model differential summary JSON
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Full report with per-record extractions
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[arg(
        long,
        requires = "point_area",
        required_unless_present = "image",
        conflicts_with = "image"
    )]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub image: Option<PathBuf>,
    #[arg(short = 'P', long = "point-area")]
    pub point_area: Option<f64>,
    #[arg(short = 'O', long, default_value_t = 1.0)]
    pub opacity: f64,
    /// Comma-separated bin sizes
    #[arg(long, value_delimiter = ',', default_value = "5,10,20,30,40")]
    pub bins: Vec<u32>,
    /// Target cluster count
    #[arg(short = 'k', long)]
    pub count: usize,
    #[arg(long, default_value = "coverage")]
    pub mode: HistogramMode,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Address to listen on
    #[arg(long, env = "PERCEPTA_BIND", default_value = DEFAULT_BIND)]
    pub bind: String,
}

/// Parses `argv` and runs the command, returning the process exit status.
pub fn run<I, S>(argv: I) -> u8
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Gen(a) => gen(a),
        Command::Render(a) => render(a),
        Command::Estimate(a) => estimate_cmd(a),
        Command::PlotThreshold(a) => plot_threshold(a),
        Command::Calibrate(a) => calibrate_cmd(a),
        Command::Stability(a) => stability(a),
        Command::Serve(a) => serve(a),
    }
}

fn gen(a: GenArgs) -> Result<(), CliError> {
    let params = GenParams {
        width: a.width,
        height: a.height,
        cluster_count: a.clusters,
        distribution_size: a.size,
        point_count: a.points,
        snr: a.snr,
    };
    params
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    write_json(&generate_dataset(&params, a.seed)?, &a.output)?;
    Ok(())
}

fn render(a: RenderArgs) -> Result<(), CliError> {
    let render = RenderParams {
        point_area: a.point_area,
        opacity: a.opacity,
    };
    render
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let data: Dataset = read_json(&a.dataset)?;
    write_image(&rasterize(&data, &render)?, &a.output)?;
    Ok(())
}

/// Builds the request and remembers whether it came from a file, which
/// decides if contract violations are usage or data errors.
fn build_request(s: SourceArgs) -> Result<(EstimateRequest, bool), CliError> {
    if let Some(path) = s.request {
        return Ok((read_json(&path)?, true));
    }
    let model = s.model.expect("clap requires --model without --request");
    let source = match (s.dataset, s.image) {
        (Some(path), _) => Source::Dataset(read_json(&path)?),
        (None, Some(path)) => Source::Image(ImageSource::Path(path)),
        (None, None) => unreachable!("clap requires a source"),
    };
    let mut req = EstimateRequest::new(source, model);
    match model {
        ModelKind::Density => req.density = Some(density_options(s.bin_size, s.mode)),
        ModelKind::Distance if s.bin_size.is_some() || s.mode.is_some() => {
            return Err(CliError::Usage(
                "-B/--bin-size and --mode only apply to --model density".into(),
            ))
        }
        ModelKind::Distance => {}
    }
    req.overrides = Overrides {
        subsample: s.subsample,
        point_area: s.point_area,
        opacity: s.opacity,
        seed: s.subsample_seed,
    };
    // A lone point area renders fully opaque.
    if req.overrides.point_area.is_some() && req.overrides.opacity.is_none() {
        req.overrides.opacity = Some(1.0);
    }
    Ok((req, false))
}

fn run_request(
    req: &EstimateRequest,
    from_file: bool,
) -> Result<crate::wire::EstimateResponse, CliError> {
    estimate(req, true).map_err(|e| match e {
        RequestError::Invalid(msg) if !from_file => CliError::Usage(msg),
        RequestError::Invalid(msg) => CliError::Data(msg),
        RequestError::Core(e) => e.into(),
    })
}

fn estimate_cmd(a: EstimateArgs) -> Result<(), CliError> {
    let (mut req, from_file) = build_request(a.source)?;
    if a.threshold.is_some() {
        req.threshold = a.threshold;
    }
    let resp = run_request(&req, from_file)?;
    match (&a.output, resp.count_at) {
        (Some(path), _) => write_json(&resp, path)?,
        (None, Some(c)) => println!("{}", c.count),
        (None, None) => print!("{}", to_json(&resp)),
    }
    Ok(())
}

/// Steps as `start,end,count` rows; the last row ends at `inf`.
pub fn plot_csv(plot: &ThresholdPlot) -> String {
    let mut out = String::from("start,end,count\n");
    for s in plot.steps() {
        let end = if s.end.is_finite() {
            s.end.to_string()
        } else {
            "inf".into()
        };
        out.push_str(&format!("{},{},{}\n", s.start, end, s.count));
    }
    out
}

fn plot_threshold(a: PlotArgs) -> Result<(), CliError> {
    let (req, from_file) = build_request(a.source)?;
    let plot = run_request(&req, from_file)?.threshold_plot;
    if let Some(p) = &a.json {
        write_json(&plot, p)?;
    }
    if let Some(p) = &a.csv {
        fs::write(p, plot_csv(&plot))?;
    }
    if let Some(p) = &a.svg {
        fs::write(p, step_chart(&plot))?;
    }
    Ok(())
}

fn calibrate_cmd(a: CalibrateArgs) -> Result<(), CliError> {
    let model = match a.model {
        ModelKind::Distance if a.bin_size.is_some() || a.mode.is_some() => {
            return Err(CliError::Usage(
                "-B/--bin-size and --mode only apply to --model density".into(),
            ))
        }
        ModelKind::Distance => ModelSpec::Distance,
        ModelKind::Density => ModelSpec::Density(density_options(a.bin_size, a.mode)),
    };
    let records = read_responses(open(&a.responses)?)?;
    let setup = StimulusSetup {
        width: a.width,
        height: a.height,
        snr: a.snr,
        default_seed: a.seed,
        model,
    };
    let report = calibrate(&records, &setup, a.predictor)?;
    write_json(&report.model, &a.output)?;
    if let Some(p) = &a.summary {
        write_json(&report.model_differential, p)?;
    }
    if let Some(p) = &a.report {
        write_json(&report, p)?;
    }
    let coeffs: Vec<String> = report
        .model
        .coefficients
        .iter()
        .map(|c| format!("{c:.6e}"))
        .collect();
    println!(
        "{} model on {}: coefficients [{}], n_obs {}, residual rms {:.4e}",
        report.model.unit,
        report.model.predictor,
        coeffs.join(", "),
        report.model.n_obs,
        report.model.residual_rms
    );
    println!(
        "differential: model mean {:.3} sd {:.3}; raw mean {:.3} sd {:.3}; {} inexact extractions",
        report.model_differential.mean,
        report.model_differential.std,
        report.raw_differential.mean,
        report.raw_differential.std,
        report.inexact_extractions
    );
    Ok(())
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct StabilityReport {
    schema: SchemaVersion,
    count: usize,
    mode: HistogramMode,
    entries: Vec<percepta_core::density::ScanEntry<f64>>,
}

fn stability(a: StabilityArgs) -> Result<(), CliError> {
    let image: StimulusImage = match (&a.dataset, &a.image) {
        (_, Some(path)) => read_image(path)?,
        (Some(path), None) => {
            let data: Dataset = read_json(path)?;
            let render = RenderParams {
                point_area: a.point_area.expect("clap requires -P with --dataset"),
                opacity: a.opacity,
            };
            render
                .validate()
                .map_err(|e| CliError::Usage(e.to_string()))?;
            rasterize(&data, &render)?
        }
        (None, None) => unreachable!("clap requires a stimulus"),
    };
    if a.count == 0 {
        return Err(CliError::Usage("-k must be at least 1".into()));
    }
    let entries = resolution_scan(&image, &a.bins, a.count, a.mode)?;
    println!("bin_size,threshold,achieved_count,exact");
    for e in &entries {
        println!(
            "{},{},{},{}",
            e.bin_size, e.choice.threshold, e.choice.achieved_count, e.choice.exact
        );
    }
    if let Some(p) = &a.output {
        write_json(
            &StabilityReport {
                schema: SchemaVersion,
                count: a.count,
                mode: a.mode,
                entries,
            },
            p,
        )?;
    }
    Ok(())
}

fn serve(a: ServeArgs) -> Result<(), CliError> {
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&a.bind)
            .await
            .map_err(|e| CliError::Usage(format!("cannot bind {}: {e}", a.bind)))?;
        eprintln!("percepta listening on http://{}", listener.local_addr()?);
        crate::server::serve(listener).await?;
        Ok(())
    })
}
