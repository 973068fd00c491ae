use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use touch_smooth::bench::{self, SweepAxis};
use touch_smooth::pipeline::{self, PipelineSpec};
use touch_smooth::synth::{self, DragSpec, NoiseSpec, Shape};
use touch_smooth::{FilterStage, Trace, TraceLabel};

#[derive(Parser)]
#[command(
    name = "touchsmooth",
    version,
    about = "Touch-trace smoothing filters and drag benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a ground-truth drag and noisy realisations as CSV.
    Gen(GenArgs),
    /// Filter a CSV trace with a preset or spec file.
    Filter(FilterArgs),
    /// Run the benchmark table for one shape.
    Bench(BenchArgs),
    /// Sweep velocity or acceleration.
    Sweep(SweepArgs),
    /// Fit noise SDs to a target noisy Measure1.
    Calibrate(CalibrateArgs),
    /// List the shipped presets, or print one as a spec file.
    Presets { name: Option<String> },
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeArg {
    Linear,
    Nonlinear,
    Zigzag,
}

impl From<ShapeArg> for Shape {
    fn from(s: ShapeArg) -> Shape {
        match s {
            ShapeArg::Linear => Shape::Linear,
            ShapeArg::Nonlinear => Shape::Nonlinear,
            ShapeArg::Zigzag => Shape::Zigzag,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Md,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Velocity,
    Acceleration,
}

#[derive(Args)]
struct NoiseArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Perpendicular noise SD in mm (default: the calibrated benchmark value).
    #[arg(long)]
    sigma_perp: Option<f64>,
    /// Along-drag noise SD in mm (default: the calibrated benchmark value).
    #[arg(long)]
    sigma_along: Option<f64>,
}

impl NoiseArgs {
    fn spec(&self) -> Result<NoiseSpec> {
        let along = self.sigma_along.unwrap_or(synth::BENCH_SIGMA_ALONG);
        let perp = self.sigma_perp.unwrap_or(synth::BENCH_SIGMA_PERP);
        Ok(NoiseSpec::new(perp, along, self.seed)?.with_trials(self.trials))
    }
}

#[derive(Args)]
struct PresetArgs {
    /// Preset name (repeatable), e.g. `mma5` or `preset:three-stage`.
    #[arg(long = "preset")]
    presets: Vec<String>,
    /// Pipeline spec file (repeatable).
    #[arg(long = "spec")]
    specs: Vec<PathBuf>,
}

impl PresetArgs {
    fn load(&self, default: &[&str]) -> Result<Vec<PipelineSpec>> {
        let mut out = Vec::new();
        for name in &self.presets {
            out.push(pipeline::preset(name)?);
        }
        for path in &self.specs {
            out.push(load_spec(path)?);
        }
        if out.is_empty() {
            for name in default {
                out.push(pipeline::preset(name)?);
            }
        }
        Ok(out)
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "linear")]
    shape: ShapeArg,
    /// mm/s
    #[arg(long, default_value_t = 25.0)]
    velocity: f64,
    /// mm/s^2
    #[arg(long, default_value_t = 0.0)]
    acceleration: f64,
    #[command(flatten)]
    noise: NoiseArgs,
    /// Also write the benchmark grid as grid.csv.
    #[arg(long)]
    grid: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct FilterArgs {
    /// Input CSV trace (`frame,x_mm,y_mm`).
    input: PathBuf,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 60.0)]
    frame_rate: f64,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value = "linear")]
    shape: ShapeArg,
    #[command(flatten)]
    presets: PresetArgs,
    #[command(flatten)]
    noise: NoiseArgs,
    #[arg(long, value_enum, default_value = "md")]
    format: Format,
    /// Output directory; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum, default_value = "velocity")]
    axis: AxisArg,
    #[arg(long, value_enum, default_value = "linear")]
    shape: ShapeArg,
    /// Fixed velocity for acceleration sweeps, mm/s.
    #[arg(long, default_value_t = 100.0)]
    velocity: f64,
    /// Swept values; defaults to the benchmark grid for the axis.
    #[arg(long = "value", num_args = 1..)]
    values: Vec<f64>,
    #[command(flatten)]
    presets: PresetArgs,
    #[command(flatten)]
    noise: NoiseArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Target noisy Measure1, mm.
    #[arg(long, default_value_t = 1.35)]
    target: f64,
    /// Perpendicular to along-drag SD ratio.
    #[arg(long, default_value_t = 2.0)]
    ratio: f64,
    #[arg(long, value_enum, default_value = "linear")]
    shape: ShapeArg,
    #[arg(long, default_value_t = 25.0)]
    velocity: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Relative tolerance on the target.
    #[arg(long, default_value_t = 1e-3)]
    tolerance: f64,
}

fn load_spec(path: &Path) -> Result<PipelineSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut spec =
        PipelineSpec::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
    if spec.name == "custom" {
        if let Some(stem) = path.file_stem() {
            spec.name = stem.to_string_lossy().into_owned();
        }
    }
    Ok(spec)
}

fn write_output(out: Option<&Path>, file_name: &str, body: &str) -> Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join(file_name);
            fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => io::stdout().write_all(body.as_bytes())?,
    }
    Ok(())
}

fn write_trace(trace: &Trace, path: &Path) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    trace.write_csv(BufWriter::new(file))?;
    Ok(())
}

fn gen(args: GenArgs) -> Result<()> {
    let drag = DragSpec::new(args.shape.into(), args.velocity, args.acceleration);
    let truth = synth::generate_truth(&drag)?;
    let noise = args.noise.spec()?;
    fs::create_dir_all(&args.out)?;
    write_trace(&truth, &args.out.join("truth.csv"))?;
    for trial in 0..noise.trials as u64 {
        let noisy = synth::add_noise(&truth, &noise, trial)?;
        write_trace(&noisy, &args.out.join(format!("noisy_{trial:03}.csv")))?;
    }
    if args.grid {
        let file = File::create(args.out.join("grid.csv"))?;
        synth::write_grid_csv(&synth::table_grid(), BufWriter::new(file))?;
    }
    eprintln!(
        "{} frames, {} noisy trials in {}",
        truth.len(),
        noise.trials,
        args.out.display()
    );
    Ok(())
}

fn filter(args: FilterArgs) -> Result<()> {
    let spec = match (&args.preset, &args.spec) {
        (Some(_), Some(_)) => bail!("give either --preset or --spec, not both"),
        (Some(name), None) => pipeline::preset(name)?,
        (None, Some(path)) => load_spec(path)?,
        (None, None) => pipeline::preset("three-stage")?,
    };
    let file =
        File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?;
    let input = Trace::read_csv(file, args.frame_rate, TraceLabel::Noisy)?;
    let mut pipe = spec.compose()?;
    let filtered = pipeline::run(&mut pipe, &input)?;
    eprintln!("{}: group delay {} frames", spec.name, filtered.group_delay);
    match &args.out {
        Some(path) => write_trace(&filtered.estimates, path)?,
        None => filtered.estimates.write_csv(io::stdout().lock())?,
    }
    Ok(())
}

fn bench_cmd(args: BenchArgs) -> Result<()> {
    let presets = args.presets.load(&["mma5", "three-stage"])?;
    let noise = args.noise.spec()?;
    let shape: Shape = args.shape.into();
    let reports = bench::run_table(shape, &synth::table_grid(), &presets, &noise)?;
    let (body, ext) = match args.format {
        Format::Md => (bench::format_markdown(&reports), "md"),
        Format::Csv => (bench::format_csv(&reports), "csv"),
    };
    write_output(
        args.out.as_deref(),
        &format!("bench_{}.{ext}", shape.as_str()),
        &body,
    )
}

fn sweep_cmd(args: SweepArgs) -> Result<()> {
    let presets = args.presets.load(&["mma5", "three-stage"])?;
    let noise = args.noise.spec()?;
    let (axis, values) = match args.axis {
        AxisArg::Velocity => (
            SweepAxis::Velocity,
            vec![10.0, 25.0, 50.0, 100.0, 150.0, 200.0],
        ),
        AxisArg::Acceleration => (SweepAxis::Acceleration, vec![0.0, 25.0, 50.0, 100.0]),
    };
    let values = if args.values.is_empty() {
        values
    } else {
        args.values
    };
    let fixed = DragSpec::new(args.shape.into(), args.velocity, 0.0);
    let report = bench::sweep(axis, &fixed, &values, &presets, &noise)?;
    write_output(
        args.out.as_deref(),
        &format!("sweep_{}.csv", axis.as_str()),
        &report.to_csv(),
    )
}

fn calibrate(args: CalibrateArgs) -> Result<()> {
    let drag = DragSpec::new(args.shape.into(), args.velocity, 0.0);
    let spec = synth::calibrate_noise(
        args.target,
        &drag,
        args.ratio,
        args.seed,
        args.trials,
        args.tolerance,
    )?;
    let truth = synth::generate_truth(&drag)?;
    let achieved = synth::noisy_measure1(&truth, &spec)?;
    println!("sigma_along = {}", spec.sigma_along);
    println!("sigma_perp = {}", spec.sigma_perp);
    println!("seed = {}", spec.seed);
    println!("trials = {}", spec.trials);
    println!("noisy_measure1 = {achieved}");
    Ok(())
}

fn presets(name: Option<String>) -> Result<()> {
    match name {
        None => {
            for n in pipeline::preset_names() {
                let delay = pipeline::preset(n)?.compose()?.group_delay();
                println!("{n}\tdelay {delay}");
            }
        }
        Some(n) => match pipeline::preset_text(&n) {
            Some(text) => print!("{text}"),
            None => bail!("unknown preset `{n}`"),
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Filter(a) => filter(a),
        Command::Bench(a) => bench_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Presets { name } => presets(name),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
