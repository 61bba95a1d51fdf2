use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use globreg_core::eval::{generate_scene, run_benchmark, BenchmarkConfig, SceneConfig};
use globreg_core::io::{read_cloud, write_xyz_file, CloudFormat};
use globreg_core::params::NormalOrientation;
use globreg_core::preprocess::voxel_representatives;
use globreg_core::{extract, register, result_to_json, Params, PointCloud, Pose, RegistrationResult, Vector3};

type CliResult<T> = Result<T, Box<dyn std::error::Error>>;

#[derive(Parser)]
#[command(name = "globreg", version, about = "Global registration of 3-D point clouds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the pose mapping SOURCE into the frame of TARGET.
    Register(RegisterArgs),
    /// Write the descriptors of one cloud, one line per described point.
    Extract(ExtractArgs),
    /// Run the synthetic benchmark and print a summary table.
    Bench(BenchArgs),
    /// Write a synthetic source/target pair with its ground-truth pose.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Orientation {
    /// Normals face the cloud centroid.
    Centroid,
    /// Normals face +z.
    Up,
}

impl From<Orientation> for NormalOrientation {
    fn from(o: Orientation) -> Self {
        match o {
            Orientation::Centroid => NormalOrientation::Centroid,
            Orientation::Up => NormalOrientation::Up,
        }
    }
}

#[derive(Args)]
struct DescriptorArgs {
    /// Voxel size in meters; all radii and bounds scale with it.
    #[arg(long)]
    voxel: f64,
    /// Normal sign convention.
    #[arg(long, value_enum, default_value = "centroid")]
    orientation: Orientation,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
}

impl DescriptorArgs {
    fn params(&self) -> CliResult<Params> {
        let mut p = Params::new(self.voxel)?;
        p.normal_orientation = self.orientation.into();
        p.workers = self.workers;
        Ok(p)
    }
}

#[derive(Args)]
struct RegisterArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[command(flatten)]
    common: DescriptorArgs,
    /// Remove a dominant ground plane before describing.
    #[arg(long)]
    suppress_ground: bool,
    /// Pairwise noise bound as a multiple of the voxel size.
    #[arg(long, default_value_t = 1.5)]
    beta_mult: f64,
    /// Maximum correspondences kept by the ratio filter.
    #[arg(long, default_value_t = 3000)]
    ntau: usize,
    /// Minimum final inliers for a valid result.
    #[arg(long, default_value_t = 5)]
    tau_valid: usize,
    /// Write the result as JSON here.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    common: DescriptorArgs,
    /// Voxel-downsample first; owner indices still refer to the input cloud.
    #[arg(long)]
    downsample: bool,
    /// Output file (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Benchmark configuration as JSON; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    voxel: Option<f64>,
    /// Points sampled per scene surface.
    #[arg(long)]
    points: Option<usize>,
    /// Comma-separated regime names to keep, e.g. `clean,clutter-20`.
    #[arg(long, value_delimiter = ',')]
    regimes: Vec<String>,
    #[arg(long)]
    suppress_ground: bool,
    #[arg(long)]
    workers: Option<usize>,
    /// Write the report as JSON here.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Leave timings out of the JSON report (makes it reproducible byte for byte).
    #[arg(long)]
    no_timings: bool,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 20_000)]
    points: usize,
    /// Room length in meters.
    #[arg(long, default_value_t = 10.0)]
    extent: f64,
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    /// Extra uniform clutter per cloud, as a fraction of `points`.
    #[arg(long, default_value_t = 0.2)]
    clutter: f64,
    /// Rotation angle of the ground-truth pose, degrees.
    #[arg(long, default_value_t = 30.0)]
    angle_deg: f64,
    /// Rotation axis as `x,y,z`.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.0, 0.0, 1.0], allow_negative_numbers = true)]
    axis: Vec<f64>,
    /// Translation as `x,y,z`, meters.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [3.0, 4.0, 0.0], allow_negative_numbers = true)]
    translation: Vec<f64>,
    #[arg(long)]
    out_source: PathBuf,
    #[arg(long)]
    out_target: PathBuf,
    /// Ground-truth pose as JSON.
    #[arg(long)]
    out_pose: Option<PathBuf>,
}

fn load(path: &Path) -> CliResult<PointCloud> {
    Ok(read_cloud(path, CloudFormat::from_path(path))?)
}

fn print_result(result: &RegistrationResult) {
    println!("pose:");
    for row in result.pose.to_rows() {
        println!("  {:>14.9} {:>14.9} {:>14.9} {:>14.9}", row[0], row[1], row[2], row[3]);
    }
    println!("inliers: {}", result.inliers.len());
    println!("valid: {}", result.valid);
    if let Some(reason) = &result.failure {
        println!("failure: {reason}");
    }
    println!("{:<14} {:>8} {:>10}", "stage", "count", "ms");
    for s in &result.stage_trace {
        println!("{:<14} {:>8} {:>10.2}", s.stage, s.count, s.ms);
    }
}

fn cmd_register(args: &RegisterArgs) -> CliResult<ExitCode> {
    let (src, tgt) = (load(&args.source)?, load(&args.target)?);
    let mut params = args.common.params()?.with_noise_bound_mult(args.beta_mult);
    params.max_correspondences = args.ntau;
    params.min_inliers = args.tau_valid;
    params.suppression.enabled = args.suppress_ground;
    let result = register(&src, &tgt, &params)?;
    print_result(&result);
    if let Some(path) = &args.json {
        fs::write(path, serde_json::to_string_pretty(&result_to_json(&result, true))?)?;
    }
    Ok(if result.valid { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn cmd_extract(args: &ExtractArgs) -> CliResult<ExitCode> {
    let input = load(&args.input)?;
    let params = args.common.params()?;
    let (cloud, owners) = if args.downsample {
        let reps = voxel_representatives(input.points(), params.voxel_size);
        (input.select(&reps), reps)
    } else {
        let all = (0..input.len()).collect();
        (input, all)
    };
    let mut set = extract(&cloud, &params)?;
    let remapped: Vec<_> = set
        .descriptors()
        .iter()
        .map(|d| globreg_core::FpfhDescriptor { owner: owners[d.owner], signature: d.signature.clone() })
        .collect();
    let stats = set.stats;
    set = globreg_core::DescriptorSet::new(set.dim(), remapped)?;
    let out: Box<dyn Write> = match &args.output {
        Some(path) => Box::new(File::create(path)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut out = BufWriter::new(out);
    set.write_text(&mut out)?;
    out.flush()?;
    eprintln!("described {} of {} points", stats.valid, stats.points);
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(args: &BenchArgs) -> CliResult<ExitCode> {
    let mut config: BenchmarkConfig = match &args.config {
        Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
        None => BenchmarkConfig::default(),
    };
    if let Some(n) = args.scenes {
        config.scenes_per_regime = n;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(v) = args.voxel {
        config.voxel_size = v;
    }
    if let Some(n) = args.points {
        config.n_points = n;
    }
    if !args.regimes.is_empty() {
        for name in &args.regimes {
            if !config.regimes.iter().any(|r| &r.name == name) {
                return Err(format!("unknown regime {name:?}").into());
            }
        }
        config.regimes.retain(|r| args.regimes.contains(&r.name));
    }
    config.suppress_ground |= args.suppress_ground;
    config.workers = args.workers.or(config.workers);
    let report = run_benchmark(&config)?;
    print!("{}", report.to_table());
    if let Some(path) = &args.json {
        fs::write(path, serde_json::to_string_pretty(&report.to_json(!args.no_timings))?)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_generate(args: &GenerateArgs) -> CliResult<ExitCode> {
    let axis = Vector3::new(args.axis[0], args.axis[1], args.axis[2]);
    if axis.norm() == 0.0 || !axis.norm().is_finite() {
        return Err("rotation axis must be nonzero".into());
    }
    let t = Vector3::new(args.translation[0], args.translation[1], args.translation[2]);
    let pose = Pose::from_axis_angle(&axis, args.angle_deg.to_radians(), t);
    let cfg = SceneConfig {
        n_points: args.points,
        extent: args.extent,
        noise_sigma: args.noise,
        clutter_ratio: args.clutter,
        ..SceneConfig::new(args.seed)
    };
    let scene = generate_scene(&cfg, &pose);
    write_xyz_file(&scene.source, &args.out_source)?;
    write_xyz_file(&scene.target, &args.out_target)?;
    if let Some(path) = &args.out_pose {
        fs::write(path, scene.pose_gt.to_json())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let outcome = match &cli.command {
        Command::Register(a) => cmd_register(a),
        Command::Extract(a) => cmd_extract(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Generate(a) => cmd_generate(a),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(1)
    })
}
