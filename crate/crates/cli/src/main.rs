use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tpt_cloud::committor::{committor_residual, load_committor, save_committor, solve_committor, CommittorField, SolverMethod};
use tpt_cloud::config::{parse_config_text, ExperimentConfig};
use tpt_cloud::control::{build_controlled_chain, save_exit_distribution};
use tpt_cloud::error::{read_text, Error, Result, StageExt};
use tpt_cloud::generator::{build_generator, RateMatrix};
use tpt_cloud::manifold::Torus;
use tpt_cloud::meanpath::{default_r0, init_path, iterate_mean_path, save_diagnostics, save_mean_path, tune_r0, Visits};
use tpt_cloud::pipeline::{boundary_set, load_energies, run_experiment, COMMITTOR_TOL, MEAN_PATH_TOL};
use tpt_cloud::pointcloud::{
    build_tessellation, load_cloud, load_tessellation, nearest, sample_sphere_uniform, sample_torus_uniform, save_cloud, save_tessellation, PointCloud, TorusMeasure,
};
use tpt_cloud::potentials::{
    equilibrium_weights, mueller_landmarks, weights_from_energies, EquilibriumWeights, Landscape, Mueller, PerturbedMueller, SpherePullback, TorusCoordinates,
    TorusPullback,
};
use tpt_cloud::reference::{fw_action, save_mep, string_mep, StringGeometry, StringOptions};
use tpt_cloud::sampler::{load_trajectory, run_controlled_walk, save_segments, save_trajectory};
use tpt_cloud::tpt::{dominant_path, reactive_current, save_current, save_dominant_path};

#[derive(Parser)]
#[command(name = "tpt-cloud", version, about = "Transition path theory on point clouds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw uniform samples on the sphere or torus.
    Sample(SampleArgs),
    /// Build the approximate Voronoi tessellation of a cloud.
    Tessellate(TessellateArgs),
    /// Solve the discrete committor between two balls.
    Committor(CommittorArgs),
    /// Reactive current, rate and dominant transition path.
    Tpt(TptArgs),
    /// Exit distribution of the optimally controlled chain.
    Control(ControlArgs),
    /// Controlled random walk.
    Walk(WalkArgs),
    /// Mean transition path from a controlled walk.
    Meanpath(MeanpathArgs),
    /// Zero-temperature minimum energy path between the Mueller minima X1 and X3.
    Mep(MepArgs),
    /// Run a full experiment from a config file.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Manifold {
    Sphere,
    Torus,
}

#[derive(Clone, Copy, ValueEnum)]
enum Measure {
    Surface,
    Angular,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, value_enum)]
    manifold: Manifold,
    #[arg(long = "n-samples", default_value_t = 4000)]
    n_samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 2.0)]
    major: f64,
    #[arg(long, default_value_t = 1.0)]
    minor: f64,
    #[arg(long = "torus-measure", value_enum, default_value_t = Measure::Surface)]
    torus_measure: Measure,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct TessellateArgs {
    #[arg(long)]
    cloud: PathBuf,
    #[arg(long = "intrinsic-dim", default_value_t = 2)]
    intrinsic_dim: usize,
    #[arg(long, default_value_t = 20)]
    k: usize,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum LandscapeKind {
    SphereMueller,
    TorusMueller,
    TorusPerturbed,
}

/// Inputs shared by every stage that needs the generator and the A/B sets.
#[derive(Args)]
struct ProblemArgs {
    #[arg(long)]
    cloud: PathBuf,
    #[arg(long = "intrinsic-dim", default_value_t = 2)]
    intrinsic_dim: usize,
    #[arg(long)]
    tess: PathBuf,
    /// Analytic landscape evaluated at the samples.
    #[arg(long, value_enum, conflicts_with = "energies")]
    landscape: Option<LandscapeKind>,
    /// Per-sample energies instead of an analytic landscape.
    #[arg(long)]
    energies: Option<PathBuf>,
    #[arg(long)]
    eps: f64,
    /// Center of A; defaults to the Mueller minimum X1 for the analytic landscapes.
    #[arg(long = "a-center", value_delimiter = ',', allow_hyphen_values = true)]
    a_center: Option<Vec<f64>>,
    #[arg(long = "b-center", value_delimiter = ',', allow_hyphen_values = true)]
    b_center: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.05)]
    radius: f64,
}

#[derive(Args)]
struct CommittorArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct TptArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    committor: PathBuf,
    #[arg(long = "current-output")]
    current_output: PathBuf,
    #[arg(long = "path-output")]
    path_output: PathBuf,
}

#[derive(Args)]
struct ControlArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    committor: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct WalkArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    committor: PathBuf,
    #[arg(long = "k-max", default_value_t = 100_000)]
    k_max: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
    #[arg(long = "segments-output")]
    segments_output: Option<PathBuf>,
}

#[derive(Args)]
struct MeanpathArgs {
    #[arg(long)]
    cloud: PathBuf,
    #[arg(long = "intrinsic-dim", default_value_t = 2)]
    intrinsic_dim: usize,
    #[arg(long)]
    trajectory: PathBuf,
    #[arg(long = "a-center", value_delimiter = ',', allow_hyphen_values = true)]
    a_center: Vec<f64>,
    #[arg(long = "b-center", value_delimiter = ',', allow_hyphen_values = true)]
    b_center: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    m: usize,
    #[arg(long = "l-max", default_value_t = 20)]
    l_max: usize,
    /// `median`, `tuned` or a radius.
    #[arg(long, default_value = "median")]
    r0: String,
    #[arg(long = "r0-samples", default_value_t = 20)]
    r0_samples: usize,
    #[arg(long)]
    output: PathBuf,
    #[arg(long = "diagnostics-output")]
    diagnostics_output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MepLandscape {
    PlaneMueller,
    SphereMueller,
    TorusMueller,
}

#[derive(Args)]
struct MepArgs {
    #[arg(long, value_enum, default_value_t = MepLandscape::SphereMueller)]
    landscape: MepLandscape,
    #[arg(long, default_value_t = 100)]
    images: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, as `key=value`.
    #[arg(long = "set", value_parser = parse_override)]
    set: Vec<(String, String)>,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_override(s: &str) -> std::result::Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected key=value, got {s:?}"))
}

fn torus() -> Torus {
    Torus::new(2.0, 1.0).expect("valid radii")
}

fn landscape(kind: LandscapeKind) -> Result<Box<dyn Landscape>> {
    Ok(match kind {
        LandscapeKind::SphereMueller => Box::new(SpherePullback::new(Mueller::default())?),
        LandscapeKind::TorusMueller => Box::new(TorusPullback::new(Mueller::default(), torus(), TorusCoordinates::Scaled)?),
        LandscapeKind::TorusPerturbed => Box::new(TorusPullback::new(PerturbedMueller::default(), torus(), TorusCoordinates::Scaled)?),
    })
}

struct Loaded {
    cloud: PointCloud,
    generator: RateMatrix,
    a: Vec<usize>,
    b: Vec<usize>,
    weights: EquilibriumWeights,
}

fn landmark(kind: LandscapeKind, k: usize) -> Result<Vec<f64>> {
    let p = mueller_landmarks(&Mueller::default())?;
    Ok(match kind {
        LandscapeKind::SphereMueller => p.x(k).lift_to_sphere().to_vec(),
        _ => p.x(k).lift_to_torus(&torus()).to_vec(),
    })
}

fn load_problem(args: &ProblemArgs) -> Result<Loaded> {
    let cloud = load_cloud(&args.cloud, args.intrinsic_dim).stage("input")?;
    let tess = load_tessellation(&args.tess).stage("input")?;
    if tess.len() != cloud.len() {
        return Err(Error::InvalidArgument(format!("tessellation has {} cells for {} samples", tess.len(), cloud.len())).in_stage("input"));
    }
    let weights = match (&args.landscape, &args.energies) {
        (Some(kind), _) => equilibrium_weights(&cloud, landscape(*kind)?.as_ref(), args.eps),
        (None, Some(path)) => weights_from_energies(load_energies(path, cloud.len())?, args.eps),
        (None, None) => Err(Error::InvalidArgument("give --landscape or --energies".into())),
    }
    .stage("weights")?;
    let generator = build_generator(&tess, &weights.weights, &cloud).stage("generator")?;
    let center = |given: &Option<Vec<f64>>, k: usize| -> Result<Vec<f64>> {
        match (given, args.landscape) {
            (Some(c), _) if c.len() == cloud.dim() => Ok(c.clone()),
            (Some(c), _) => Err(Error::InvalidArgument(format!("center has {} coordinates, cloud has {}", c.len(), cloud.dim()))),
            (None, Some(kind)) => landmark(kind, k),
            (None, None) => Err(Error::InvalidArgument("give --a-center and --b-center with --energies".into())),
        }
    };
    let a = boundary_set(&cloud, &center(&args.a_center, 1).stage("input")?, args.radius);
    let b = boundary_set(&cloud, &center(&args.b_center, 3).stage("input")?, args.radius);
    Ok(Loaded {
        cloud,
        generator,
        a,
        b,
        weights,
    })
}

fn loaded_committor(l: &Loaded, path: &Path) -> Result<CommittorField> {
    let q = load_committor(path).stage("input")?;
    if q.len() != l.cloud.len() {
        return Err(Error::InvalidArgument(format!("committor has {} values for {} samples", q.len(), l.cloud.len())).in_stage("input"));
    }
    let mut field = CommittorField {
        q,
        a: l.a.clone(),
        b: l.b.clone(),
        residual: 0.0,
        method: SolverMethod::Direct,
        iterations: 0,
    };
    field.residual = committor_residual(&l.generator, &field);
    Ok(field)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sample(args) => {
            let cloud = match args.manifold {
                Manifold::Sphere => sample_sphere_uniform(args.n_samples, args.seed),
                Manifold::Torus => {
                    let measure = match args.torus_measure {
                        Measure::Surface => TorusMeasure::SurfaceArea,
                        Measure::Angular => TorusMeasure::Angular,
                    };
                    Torus::new(args.major, args.minor).and_then(|t| sample_torus_uniform(args.n_samples, t, measure, args.seed))
                }
            }
            .stage("sample")?;
            save_cloud(&cloud, &args.output).stage("output")?;
            println!("{} samples written to {}", cloud.len(), args.output.display());
        }
        Command::Tessellate(args) => {
            let cloud = load_cloud(&args.cloud, args.intrinsic_dim).stage("input")?;
            let tess = build_tessellation(&cloud, args.k).stage("tessellate")?;
            save_tessellation(&tess, &args.output).stage("output")?;
            println!("{} cells, {} faces, {} clipped", tess.len(), tess.face_count(), tess.clipped_cells().len());
        }
        Command::Committor(args) => {
            let l = load_problem(&args.problem)?;
            let field = solve_committor(&l.generator, &l.a, &l.b, COMMITTOR_TOL).stage("committor")?;
            save_committor(&field, &args.output).stage("output")?;
            println!("|A| = {}, |B| = {}, residual {:e}", l.a.len(), l.b.len(), field.residual);
        }
        Command::Tpt(args) => {
            let l = load_problem(&args.problem)?;
            let field = loaded_committor(&l, &args.committor)?;
            let g = reactive_current(&l.generator, &field).stage("tpt")?;
            let path = dominant_path(&g).stage("tpt")?;
            save_current(&g, &args.current_output).stage("output")?;
            save_dominant_path(&path.nodes, &field.q, &l.cloud, &args.path_output).stage("output")?;
            let eps = args.problem.eps;
            println!(
                "k_AB = {:e} (shifted), eps ln k_AB = {}, dominant path {} states, capacity {:e}",
                g.rate,
                eps * g.rate.ln() - l.weights.shift,
                path.nodes.len(),
                path.capacity()
            );
        }
        Command::Control(args) => {
            let l = load_problem(&args.problem)?;
            let field = loaded_committor(&l, &args.committor)?;
            let chain = build_controlled_chain(&l.generator, &field).stage("control")?;
            save_exit_distribution(&chain, &args.output).stage("output")?;
            println!("exit distribution over {} states", chain.exit.len());
        }
        Command::Walk(args) => {
            let l = load_problem(&args.problem)?;
            let field = loaded_committor(&l, &args.committor)?;
            let chain = build_controlled_chain(&l.generator, &field).stage("control")?;
            let rec = run_controlled_walk(&chain, &l.b, args.k_max, args.seed).stage("walk")?;
            save_trajectory(&rec, &args.output).stage("output")?;
            if let Some(p) = &args.segments_output {
                save_segments(&rec, p).stage("output")?;
            }
            println!("{} jumps, {} transitions", rec.jumps, rec.transitions());
        }
        Command::Meanpath(args) => {
            let cloud = load_cloud(&args.cloud, args.intrinsic_dim).stage("input")?;
            let rec = load_trajectory(&args.trajectory).stage("input")?;
            if let Some(&bad) = rec.states.iter().find(|&&i| i >= cloud.len()) {
                return Err(Error::InvalidArgument(format!("trajectory visits state {bad} outside the cloud")).in_stage("input"));
            }
            let all: Vec<usize> = (0..cloud.len()).collect();
            let a = nearest(&cloud, &all, &args.a_center).ok_or_else(|| Error::InvalidArgument("empty cloud".into()).in_stage("input"))?;
            let b = nearest(&cloud, &all, &args.b_center).unwrap();
            let visits = Visits::from_records(std::slice::from_ref(&rec), cloud.len());
            let state = (|| {
                let r0 = match args.r0.as_str() {
                    "median" => default_r0(&cloud),
                    "tuned" => {
                        let probe = init_path(&cloud, a, b, args.m, &visits, 1.0)?;
                        tune_r0(&visits, &cloud, &probe.points(&cloud), args.r0_samples)?
                    }
                    v => v.parse().map_err(|_| Error::InvalidArgument(format!("r0 must be median, tuned or a number, got {v:?}")))?,
                };
                let start = init_path(&cloud, a, b, args.m, &visits, r0)?;
                iterate_mean_path(&visits, &cloud, start, args.l_max, MEAN_PATH_TOL)
            })()
            .stage("meanpath")?;
            save_mean_path(&state, &cloud, &args.output).stage("output")?;
            if let Some(p) = &args.diagnostics_output {
                save_diagnostics(&state, p).stage("output")?;
            }
            println!("{} iterations, converged: {}, r0 = {}", state.iteration, state.converged, state.r0);
        }
        Command::Mep(args) => {
            let lm = mueller_landmarks(&Mueller::default()).stage("mep")?;
            let (land, geometry, a, b): (Box<dyn Landscape>, _, Vec<f64>, Vec<f64>) = match args.landscape {
                MepLandscape::PlaneMueller => (Box::new(Mueller::default()), StringGeometry::Flat, lm.x(1).location.clone(), lm.x(3).location.clone()),
                MepLandscape::SphereMueller => (
                    landscape(LandscapeKind::SphereMueller)?,
                    StringGeometry::Sphere,
                    lm.x(1).lift_to_sphere().to_vec(),
                    lm.x(3).lift_to_sphere().to_vec(),
                ),
                MepLandscape::TorusMueller => (
                    landscape(LandscapeKind::TorusMueller)?,
                    StringGeometry::Torus(torus()),
                    lm.x(1).lift_to_torus(&torus()).to_vec(),
                    lm.x(3).lift_to_torus(&torus()).to_vec(),
                ),
            };
            let opts = StringOptions {
                images: args.images,
                tol: args.tol,
                ..Default::default()
            };
            let s = string_mep(land.as_ref(), geometry, &a, &b, &opts).stage("mep")?;
            let action = fw_action(&s.images, land.as_ref()).stage("mep")?;
            save_mep(&s, &args.output).stage("output")?;
            println!("{} steps, residual {:e}, action S = {action}", s.steps, s.residual);
        }
        Command::Experiment(args) => {
            let mut map = match &args.config {
                Some(p) => read_text(p).and_then(|t| parse_config_text(&t)).stage("config")?,
                None => Default::default(),
            };
            map.extend(args.set);
            if let Some(o) = &args.output {
                map.insert("output".into(), o.display().to_string());
            }
            let config = ExperimentConfig::from_map(&map).stage("config")?;
            let run = run_experiment(&config)?;
            println!("{}", serde_json::to_string_pretty(&run.summary).map_err(Error::from).stage("output")?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
