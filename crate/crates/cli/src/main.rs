//! `pottsflow`: piecewise-constant disparity and optical flow from image
//! pairs.

mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use pottsflow::flowviz::colorize_flow;
use pottsflow::io::{read_flo, read_image, read_raw_gray, write_flo, write_pgm16, write_rgb};
use pottsflow::metrics::{disparity_metrics, flow_metrics};
use pottsflow::pipeline::{run_disparity, run_flow, PipelineResult};
use pottsflow::potts1d::solve_potts_1d;
use pottsflow::{MatchConfig, Signal1D, SolverConfig, VectorField};

use config::{AxisPair, FileConfig};

#[derive(Parser, Debug)]
#[command(name = "pottsflow", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Disparity map of a rectified stereo pair.
    Disparity(DisparityArgs),
    /// Optical flow between two frames.
    Flow(FlowArgs),
    /// Fit a univariate Potts model to a CSV signal.
    Potts1d(PottsArgs),
    /// Compare an estimate against ground truth.
    Metrics(MetricsArgs),
}

/// Solver settings. Unset values come from `--config`, then the defaults
/// (η⁰ = 0.01, σ = 1.05, 100 iterations).
#[derive(Args, Debug)]
struct SolverArgs {
    /// Weight of the Potts prior (required here or in the config file).
    #[arg(long)]
    lambda: Option<f64>,
    /// 1 enables the box constraint (disparity only).
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
    mu: Option<u8>,
    /// Box bounds; default to the search range.
    #[arg(long, allow_hyphen_values = true)]
    box_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    box_max: Option<f64>,
    #[arg(long)]
    eta0: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    /// Write the per-iteration trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Size of the worker pool.
    #[arg(long)]
    threads: Option<usize>,
    /// `key = value` file with defaults for any of these flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Block matching settings.
#[derive(Args, Debug)]
struct MatchArgs {
    /// Smallest shift, one value or `row,col` for flow.
    #[arg(long, allow_hyphen_values = true)]
    search_min: Option<AxisPair>,
    /// Largest shift, one value or `row,col` for flow.
    #[arg(long, allow_hyphen_values = true)]
    search_max: Option<AxisPair>,
    /// Half width of the matching block (3 → 7×7).
    #[arg(long)]
    block_radius: Option<usize>,
    /// Half width of the median filter (1 → 3×3, 0 disables).
    #[arg(long)]
    median_radius: Option<usize>,
}

#[derive(Args, Debug)]
struct DisparityArgs {
    /// Left image `f₁`.
    left: PathBuf,
    /// Right image `f₂`.
    right: PathBuf,
    /// Output disparity, 16-bit PGM.
    #[arg(short, long)]
    out: PathBuf,
    /// Store `round(scale·d)`; without it the map is min-max normalized.
    #[arg(long)]
    scale: Option<f64>,
    /// Ground-truth disparity image (0 marks unknown pixels).
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Divisor applied to the raw ground-truth values.
    #[arg(long)]
    gt_scale: Option<f64>,
    /// Bad-pixel threshold for the metrics.
    #[arg(long)]
    tau: Option<f64>,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    matching: MatchArgs,
}

#[derive(Args, Debug)]
struct FlowArgs {
    /// First frame.
    first: PathBuf,
    /// Second frame.
    second: PathBuf,
    /// Output flow, Middlebury `.flo`.
    #[arg(short, long)]
    out: PathBuf,
    /// Color-coded flow image (PNG or PPM by extension).
    #[arg(long)]
    color: Option<PathBuf>,
    /// Magnitude shown at full brightness; default is the field maximum.
    #[arg(long)]
    color_max: Option<f64>,
    /// Ground-truth `.flo`.
    #[arg(long)]
    gt: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    matching: MatchArgs,
}

#[derive(Args, Debug)]
struct PottsArgs {
    /// CSV with one sample per line and one column per channel.
    input: PathBuf,
    /// Jump penalty.
    #[arg(long)]
    gamma: f64,
    /// Fitted values as CSV; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    /// Estimated disparity (PGM/PNG) or flow (`.flo`).
    estimate: PathBuf,
    /// Ground truth in the same kind of file.
    #[arg(long)]
    gt: PathBuf,
    /// Divisor for the estimate's stored values (disparity).
    #[arg(long)]
    scale: Option<f64>,
    /// Divisor for the ground truth's stored values (disparity).
    #[arg(long)]
    gt_scale: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Disparity(args) => disparity(args),
        Command::Flow(args) => flow(args),
        Command::Potts1d(args) => potts1d(args),
        Command::Metrics(args) => metrics(args),
    }
}

fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    path.map(FileConfig::load)
        .transpose()
        .map(Option::unwrap_or_default)
}

struct Search {
    min: AxisPair,
    max: AxisPair,
}

fn solver_config(args: &SolverArgs, file: &FileConfig, search: &Search) -> Result<SolverConfig> {
    let Some(lambda) = file.pick(args.lambda, "lambda")? else {
        bail!("--lambda is required (on the command line or in the config file)");
    };
    let mut cfg = SolverConfig::new(lambda);
    if let Some(v) = file.pick(args.eta0, "eta0")? {
        cfg.eta0 = v;
    }
    if let Some(v) = file.pick(args.sigma, "sigma")? {
        cfg.sigma = v;
    }
    if let Some(v) = file.pick(args.iters, "iters")? {
        cfg.iterations = v;
    }
    if file.pick(args.mu, "mu")? == Some(1) {
        let lo = file
            .pick(args.box_min, "box-min")?
            .unwrap_or(search.min.col as f64);
        let hi = file
            .pick(args.box_max, "box-max")?
            .unwrap_or(search.max.col as f64);
        cfg.box_bounds = Some((lo, hi));
    }
    Ok(cfg)
}

fn search_range(args: &MatchArgs, file: &FileConfig, default: (i64, i64)) -> Result<Search> {
    let min = file.pick(args.search_min, "search-min")?;
    let max = file.pick(args.search_max, "search-max")?;
    let fallback = |v: i64| AxisPair { row: v, col: v };
    Ok(Search {
        min: min.unwrap_or(fallback(default.0)),
        max: max.unwrap_or(fallback(default.1)),
    })
}

fn apply_match_args(
    mut cfg: MatchConfig,
    args: &MatchArgs,
    file: &FileConfig,
) -> Result<MatchConfig> {
    if let Some(v) = file.pick(args.block_radius, "block-radius")? {
        cfg.block_radius = v;
    }
    if let Some(v) = file.pick(args.median_radius, "median-radius")? {
        cfg.median_radius = v;
    }
    Ok(cfg)
}

/// Runs `job` on a pool of the requested size, or on the global pool.
fn with_threads<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .context("cannot build the worker pool")?;
            Ok(pool.install(job))
        }
        None => Ok(job()),
    }
}

fn write_trace(path: Option<&Path>, result: &PipelineResult) -> Result<()> {
    if let Some(path) = path {
        let file =
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        result
            .solution
            .trace
            .write_csv(BufWriter::new(file))
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

fn summary(result: &PipelineResult) {
    let u = &result.solution.u;
    match result.solution.trace.last() {
        Some(rec) => println!(
            "{}x{}: {} iterations, energy {:.6e}, split gap {:.3e}",
            u.rows(),
            u.cols(),
            rec.iteration,
            rec.energy,
            rec.split_gap
        ),
        None => println!("{}x{}: 0 iterations", u.rows(), u.cols()),
    }
}

/// Raw gray values divided by `scale`; zeros are reported as unknown.
fn read_disparity(path: &Path, scale: f64) -> Result<(VectorField, Vec<bool>)> {
    let raw = read_raw_gray(path)?;
    let known = raw.as_slice().iter().map(|&v| v != 0.0).collect();
    let values = raw.as_slice().iter().map(|&v| v / scale).collect();
    Ok((VectorField::new(raw.rows(), raw.cols(), 1, values)?, known))
}

fn report_disparity(u: &VectorField, gt: &Path, gt_scale: f64, tau: f64) -> Result<()> {
    let (truth, known) = read_disparity(gt, gt_scale)?;
    let m = disparity_metrics(u, &truth, tau, Some(&known))
        .with_context(|| format!("comparing against {}", gt.display()))?;
    println!(
        "bad_pixel_rate {:.6} (tau {tau}), mean_abs_error {:.6}, valid_pixels {}",
        m.bad_pixel_rate, m.mean_abs_error, m.valid_pixels
    );
    Ok(())
}

fn report_flow(u: &VectorField, gt: &Path) -> Result<()> {
    let truth = read_flo(gt)?;
    let m = flow_metrics(u, &truth, None)
        .with_context(|| format!("comparing against {}", gt.display()))?;
    println!(
        "average_endpoint_error {:.6}, average_angular_error {:.6}, valid_pixels {}",
        m.average_endpoint_error, m.average_angular_error, m.valid_pixels
    );
    Ok(())
}

fn disparity(args: DisparityArgs) -> Result<()> {
    let file = load_config(args.solver.config.as_deref())?;
    let search = search_range(&args.matching, &file, (0, 16))?;
    let matching = apply_match_args(
        MatchConfig::disparity(search.min.col, search.max.col),
        &args.matching,
        &file,
    )?;
    let solver = solver_config(&args.solver, &file, &search)?;
    let f1 = read_image(&args.left)?;
    let f2 = read_image(&args.right)?;
    let threads = file.pick(args.solver.threads, "threads")?;
    let result = with_threads(threads, || run_disparity(&f1, &f2, &matching, &solver))??;

    let scale = file.pick(args.scale, "scale")?;
    write_pgm16(&args.out, &result.solution.u, scale)?;
    write_trace(args.solver.trace.as_deref(), &result)?;
    summary(&result);
    if let Some(gt) = &args.gt {
        let gt_scale = file.pick(args.gt_scale, "gt-scale")?.unwrap_or(1.0);
        let tau = file.pick(args.tau, "tau")?.unwrap_or(1.0);
        report_disparity(&result.solution.u, gt, gt_scale, tau)?;
    }
    Ok(())
}

fn flow(args: FlowArgs) -> Result<()> {
    let file = load_config(args.solver.config.as_deref())?;
    let search = search_range(&args.matching, &file, (-4, 4))?;
    let matching = apply_match_args(
        MatchConfig::flow(
            (search.min.row, search.max.row),
            (search.min.col, search.max.col),
        ),
        &args.matching,
        &file,
    )?;
    let solver = solver_config(&args.solver, &file, &search)?;
    let f1 = read_image(&args.first)?;
    let f2 = read_image(&args.second)?;
    let threads = file.pick(args.solver.threads, "threads")?;
    let result = with_threads(threads, || run_flow(&f1, &f2, &matching, &solver))??;

    let u = &result.solution.u;
    write_flo(&args.out, u)?;
    if let Some(path) = &args.color {
        let max = file.pick(args.color_max, "color-max")?;
        write_rgb(path, u.cols(), u.rows(), colorize_flow(u, max))?;
    }
    write_trace(args.solver.trace.as_deref(), &result)?;
    summary(&result);
    if let Some(gt) = &args.gt {
        report_flow(u, gt)?;
    }
    Ok(())
}

fn potts1d(args: PottsArgs) -> Result<()> {
    let path = &args.input;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut channels = None;
    let mut samples = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{}: malformed CSV", path.display()))?;
        if *channels.get_or_insert(record.len()) != record.len() {
            bail!(
                "{}: record {} has {} columns",
                path.display(),
                line + 1,
                record.len()
            );
        }
        for field in record.iter() {
            let v: f64 = field.parse().with_context(|| {
                format!(
                    "{}: record {}: `{field}` is not a number",
                    path.display(),
                    line + 1
                )
            })?;
            samples.push(v);
        }
    }
    let Some(channels) = channels else {
        bail!("{}: no samples", path.display());
    };
    let signal = Signal1D::new(channels, samples)?;
    let seg = solve_potts_1d(&signal, args.gamma);

    let sink: Box<dyn Write> = match &args.output {
        Some(p) => {
            Box::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?)
        }
        None => Box::new(std::io::stdout().lock()),
    };
    let mut writer = csv::Writer::from_writer(sink);
    for px in seg.expand().chunks(channels) {
        writer.write_record(px.iter().map(|v| format!("{v:.17e}")))?;
    }
    writer.flush()?;
    let ends: Vec<String> = seg.breakpoints.iter().map(usize::to_string).collect();
    eprintln!(
        "segments {}, energy {:.17e}, breakpoints {}",
        seg.num_segments(),
        seg.energy,
        ends.join(" ")
    );
    Ok(())
}

fn is_flo(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("flo"))
}

fn metrics(args: MetricsArgs) -> Result<()> {
    let file = load_config(args.config.as_deref())?;
    if is_flo(&args.estimate) {
        let u = read_flo(&args.estimate)?;
        report_flow(&u, &args.gt)
    } else {
        let scale = file.pick(args.scale, "scale")?.unwrap_or(1.0);
        let gt_scale = file.pick(args.gt_scale, "gt-scale")?.unwrap_or(1.0);
        let tau = file.pick(args.tau, "tau")?.unwrap_or(1.0);
        let (u, _) = read_disparity(&args.estimate, scale)?;
        report_disparity(&u, &args.gt, gt_scale, tau)
    }
}
