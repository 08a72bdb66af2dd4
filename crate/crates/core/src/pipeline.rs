//! End-to-end experiment driver: sampling or ingestion, tessellation,
//! committor, reactive current, controlled sampling, mean path and the
//! zero-temperature reference.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use crate::alanine::{
    alanine_torus, crossing_indices, embed_dihedrals, enrich_transition_region, ingest_alanine, load_dihedrals, sparsify, synthetic_alanine, DihedralSeries,
};
use crate::committor::{save_committor, solve_committor, CommittorField};
use crate::config::{BallRadius, Experiment, ExperimentConfig};
use crate::control::{build_controlled_chain, save_exit_distribution, ControlledChain};
use crate::error::{read_text, Error, Result, StageExt};
use crate::generator::{build_generator, jump_chain, RateMatrix};
use crate::manifold::{wrap_angle, Torus};
use crate::meanpath::{default_r0, init_path, iterate_mean_path, save_diagnostics, save_mean_path, tune_r0, MeanPathState, Visits};
use crate::path::DiscretePath;
use crate::pointcloud::{
    build_tessellation, euclidean, load_cloud, nearest, sample_sphere_uniform, sample_torus_uniform, save_cloud, save_tessellation, PointCloud, Tessellation,
};
use crate::potentials::{
    equilibrium_weights, load_tabulated, mueller_landmarks, weights_from_energies, EquilibriumWeights, Landscape, Mueller, PerturbedMueller, SpherePullback,
    TabulatedLandscape, TorusCoordinates, TorusPullback,
};
use crate::reference::{fw_action, save_mep, string_mep, StringGeometry, StringOptions, StringState};
use crate::sampler::{run_controlled_walk, run_uncontrolled_walk, save_segments, save_trajectory, TrajectoryRecord};
use crate::tpt::{current_profile, dominant_path, reactive_current, save_current, save_dominant_path, DominantPath, ReactiveGraph};

pub const COMMITTOR_TOL: f64 = 1e-10;
pub const MEAN_PATH_TOL: f64 = 1e-8;
/// Number of smallest-current edges of the dominant path reported in the summary.
pub const WEAKEST_EDGES: usize = 5;

/// Zero-temperature reference problem for the string method.
pub struct MepProblem {
    pub landscape: Box<dyn Landscape>,
    pub geometry: StringGeometry,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

pub enum Energy {
    Landscape(Box<dyn Landscape>),
    Values(Vec<f64>),
}

/// Everything an experiment needs before the shared pipeline starts.
pub struct Problem {
    pub cloud: PointCloud,
    pub energy: Energy,
    pub a_center: Vec<f64>,
    pub b_center: Vec<f64>,
    /// Named stationary points in ambient coordinates.
    pub landmarks: Vec<(String, Vec<f64>)>,
    pub mep: Option<MepProblem>,
    pub extra: Value,
    /// Input data generated by the run rather than read from disk.
    pub synthetic_inputs: Option<(DihedralSeries, TabulatedLandscape)>,
}

pub struct RunArtifacts {
    pub config: ExperimentConfig,
    pub cloud: PointCloud,
    pub tessellation: Tessellation,
    pub weights: EquilibriumWeights,
    pub generator: RateMatrix,
    pub committor: CommittorField,
    pub reactive: ReactiveGraph,
    pub dominant: DominantPath,
    pub chain: ControlledChain,
    pub trajectory: TrajectoryRecord,
    pub uncontrolled: Option<TrajectoryRecord>,
    pub mean_path: MeanPathState,
    pub mep: Option<StringState>,
    pub action: Option<f64>,
    pub landmarks: Vec<(String, Vec<f64>)>,
    pub summary: Value,
}

impl RunArtifacts {
    /// `eps ln k_AB` for the unshifted weights `exp(-U / eps)`.
    pub fn eps_ln_rate(&self) -> f64 {
        self.config.eps * self.reactive.rate.ln() - self.weights.shift
    }

    /// The dominant-path edges with the smallest reactive current, smallest first.
    pub fn weakest_edges(&self, count: usize) -> Vec<(usize, usize, f64)> {
        let nodes = &self.dominant.nodes;
        let mut edges: Vec<(usize, usize, f64)> = nodes
            .windows(2)
            .map(|w| (w[0], w[1], self.reactive.current(w[0], w[1]).unwrap_or(0.0)))
            .collect();
        edges.sort_by(|x, y| x.2.total_cmp(&y.2).then(x.0.cmp(&y.0)));
        edges.truncate(count);
        edges
    }

    /// Distance from sample `i` to the nearest landmark, with its name.
    pub fn nearest_landmark(&self, i: usize) -> Option<(&str, f64)> {
        self.landmarks
            .iter()
            .map(|(name, p)| (name.as_str(), euclidean(self.cloud.point(i), p)))
            .min_by(|x, y| x.1.total_cmp(&y.1))
    }

    pub fn mean_path_hausdorff(&self) -> f64 {
        DiscretePath::from_points(self.mean_path.points(&self.cloud)).hausdorff(&self.dominant.to_path(&self.cloud))
    }
}

/// Samples within `radius` of `center`, or the single nearest sample when the ball is empty.
pub fn boundary_set(cloud: &PointCloud, center: &[f64], radius: f64) -> Vec<usize> {
    let ball = cloud.ball(center, radius);
    if !ball.is_empty() {
        return ball;
    }
    let all: Vec<usize> = (0..cloud.len()).collect();
    nearest(cloud, &all, center).into_iter().collect()
}

fn mueller_landmark_list(lift: impl Fn(&crate::potentials::StationaryPoint) -> Vec<f64>) -> Result<Vec<(String, Vec<f64>)>> {
    let lm = mueller_landmarks(&Mueller::default())?;
    Ok((1..=5).map(|k| (format!("X{k}"), lift(lm.x(k)))).collect())
}

fn sphere_problem(config: &ExperimentConfig) -> Result<Problem> {
    let cloud = sample_sphere_uniform(config.n_samples, config.seed)?;
    let landmarks = mueller_landmark_list(|p| p.lift_to_sphere().to_vec())?;
    let landscape = SpherePullback::new(Mueller::default())?;
    let (a, b) = (landmarks[0].1.clone(), landmarks[2].1.clone());
    Ok(Problem {
        cloud,
        energy: Energy::Landscape(Box::new(landscape.clone())),
        a_center: a.clone(),
        b_center: b.clone(),
        mep: config.mep.then(|| MepProblem {
            landscape: Box::new(landscape),
            geometry: StringGeometry::Sphere,
            a,
            b,
        }),
        landmarks,
        extra: json!({}),
        synthetic_inputs: None,
    })
}

fn torus_problem(config: &ExperimentConfig) -> Result<Problem> {
    let torus = Torus::new(2.0, 1.0)?;
    let cloud = sample_torus_uniform(config.n_samples, torus, config.torus_measure, config.seed)?;
    let landmarks = mueller_landmark_list(|p| p.lift_to_torus(&torus).to_vec())?;
    let landscape = TorusPullback::new(PerturbedMueller::default(), torus, TorusCoordinates::Scaled)?;
    let (a, b) = (landmarks[0].1.clone(), landmarks[2].1.clone());
    Ok(Problem {
        cloud,
        energy: Energy::Landscape(Box::new(landscape)),
        a_center: a.clone(),
        b_center: b.clone(),
        mep: config.mep.then(|| -> Result<MepProblem> {
            Ok(MepProblem {
                landscape: Box::new(TorusPullback::new(Mueller::default(), torus, TorusCoordinates::Scaled)?),
                geometry: StringGeometry::Torus(torus),
                a,
                b,
            })
        })
        .transpose()?,
        landmarks,
        extra: json!({}),
        synthetic_inputs: None,
    })
}

fn alanine_problem(config: &ExperimentConfig) -> Result<Problem> {
    let torus = alanine_torus();
    let (series, grid, model, synthetic) = match (&config.dihedrals, &config.free_energy) {
        (Some(d), Some(f)) => (load_dihedrals(d)?, load_tabulated(f)?, None, false),
        _ => {
            let (s, g, m) = synthetic_alanine(config.seed)?;
            (s, g, Some(m), true)
        }
    };
    let basins: Vec<(String, [f64; 2])> = match &model {
        Some(m) => m.basins.iter().map(|b| b.name.to_string()).zip(m.minima()?).collect(),
        None => Vec::new(),
    };
    let angle_center = |given: &Option<Vec<f64>>, name: &str| -> Result<[f64; 2]> {
        match given {
            Some(v) if v.len() == 2 => Ok([wrap_angle(v[0]), wrap_angle(v[1])]),
            Some(v) => Err(Error::InvalidArgument(format!("alanine centers are (phi, psi) pairs, got {} values", v.len()))),
            None => basins
                .iter()
                .find(|b| b.0 == name)
                .map(|b| b.1)
                .ok_or_else(|| Error::InvalidArgument(format!("no basin named {name:?}; give a_center and b_center as phi,psi"))),
        }
    };
    let a = angle_center(&config.a_center, "C_ax")?;
    let b = angle_center(&config.b_center, &config.target)?;

    let batch = sparsify(series.len(), config.batch, config.seed)?;
    let aux = enrich_transition_region(&series, config.window, config.n_aux, config.seed)?;
    let mut angles: Vec<(f64, f64)> = batch.iter().map(|&i| series.angles(i)).collect();
    angles.extend(&aux);
    let (nphi, npsi) = grid.shape();
    let data = ingest_alanine(&angles, grid.clone(), torus)?;
    let landmarks = basins
        .iter()
        .map(|(name, m)| (name.clone(), embed_dihedrals(&torus, m[0], m[1]).to_vec()))
        .collect();
    Ok(Problem {
        cloud: data.cloud,
        energy: Energy::Landscape(Box::new(data.landscape)),
        a_center: embed_dihedrals(&torus, a[0], a[1]).to_vec(),
        b_center: embed_dihedrals(&torus, b[0], b[1]).to_vec(),
        landmarks,
        mep: None,
        extra: json!({
            "synthetic": synthetic,
            "frames": series.len(),
            "crossings": crossing_indices(&series).len(),
            "grid": [nphi, npsi],
            "batch": batch.len(),
            "auxiliary": aux.len(),
            "duplicates": data.duplicates,
            "a_angles": a,
            "b_angles": b,
        }),
        synthetic_inputs: synthetic.then_some((series, grid)),
    })
}

/// Per-sample energies, one per line as `U` or `id,U`; a header line is skipped.
pub fn load_energies(path: &Path, n: usize) -> Result<Vec<f64>> {
    let text = read_text(path)?;
    let name = path.display().to_string();
    let mut out = Vec::with_capacity(n);
    for (row, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (row == 0 && line.starts_with(|c: char| c.is_ascii_alphabetic())) {
            continue;
        }
        let value = line.rsplit(',').next().unwrap().trim();
        out.push(value.parse::<f64>().map_err(|e| Error::Parse {
            source_name: name.clone(),
            row: row + 1,
            message: format!("{value:?}: {e}"),
        })?);
    }
    if out.len() != n {
        return Err(Error::InvalidArgument(format!("{name} has {} energies for {n} samples", out.len())));
    }
    Ok(out)
}

fn custom_problem(config: &ExperimentConfig) -> Result<Problem> {
    let cloud = load_cloud(config.cloud.as_ref().unwrap(), config.intrinsic_dim)?;
    let energies = load_energies(config.energies.as_ref().unwrap(), cloud.len())?;
    let (a, b) = (config.a_center.clone().unwrap(), config.b_center.clone().unwrap());
    if a.len() != cloud.dim() || b.len() != cloud.dim() {
        return Err(Error::InvalidArgument(format!("a_center and b_center need {} coordinates", cloud.dim())));
    }
    Ok(Problem {
        cloud,
        energy: Energy::Values(energies),
        a_center: a,
        b_center: b,
        landmarks: Vec::new(),
        mep: None,
        extra: json!({}),
        synthetic_inputs: None,
    })
}

pub fn build_problem(config: &ExperimentConfig) -> Result<Problem> {
    match config.experiment {
        Experiment::SphereMueller => sphere_problem(config),
        Experiment::TorusPerturbed => torus_problem(config),
        Experiment::Alanine => alanine_problem(config),
        Experiment::Custom => custom_problem(config),
    }
}

/// Run the whole pipeline; files are written when `config.output` is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunArtifacts> {
    config.validate().stage("config")?;
    let problem = build_problem(config).stage("input")?;
    run_problem(config, problem)
}

pub fn run_problem(config: &ExperimentConfig, problem: Problem) -> Result<RunArtifacts> {
    let Problem {
        cloud,
        energy,
        a_center,
        b_center,
        landmarks,
        mep,
        extra,
        synthetic_inputs,
    } = problem;
    let tess = build_tessellation(&cloud, config.k).stage("tessellate")?;
    let weights = match &energy {
        Energy::Landscape(l) => equilibrium_weights(&cloud, l.as_ref(), config.eps),
        Energy::Values(u) => weights_from_energies(u.clone(), config.eps),
    }
    .stage("weights")?;
    let generator = build_generator(&tess, &weights.weights, &cloud).stage("generator")?;

    let a = boundary_set(&cloud, &a_center, config.radius);
    let b = boundary_set(&cloud, &b_center, config.radius);
    let committor = solve_committor(&generator, &a, &b, COMMITTOR_TOL).stage("committor")?;
    let reactive = reactive_current(&generator, &committor).stage("tpt")?;
    let dominant = dominant_path(&reactive).stage("tpt")?;
    let profile = current_profile(&dominant.nodes, &reactive, &cloud).stage("tpt")?;

    let chain = build_controlled_chain(&generator, &committor).stage("control")?;
    let trajectory = run_controlled_walk(&chain, &b, config.k_max, config.seed).stage("walk")?;
    let a_rep = nearest(&cloud, &a, &a_center).unwrap();
    let b_rep = nearest(&cloud, &b, &b_center).unwrap();
    let uncontrolled = if config.uncontrolled {
        let jc = jump_chain(&generator).stage("walk")?;
        Some(run_uncontrolled_walk(&jc, &a, &b, a_rep, config.k_max, config.seed).stage("walk")?)
    } else {
        None
    };

    let visits = Visits::from_records(std::slice::from_ref(&trajectory), cloud.len());
    let mean_path = (|| -> Result<MeanPathState> {
        let r0 = match config.r0 {
            BallRadius::Median => default_r0(&cloud),
            BallRadius::Fixed(r) => r,
            BallRadius::Tuned => {
                let probe = init_path(&cloud, a_rep, b_rep, config.m, &visits, 1.0)?;
                tune_r0(&visits, &cloud, &probe.points(&cloud), config.r0_samples)?
            }
        };
        let start = init_path(&cloud, a_rep, b_rep, config.m, &visits, r0)?;
        iterate_mean_path(&visits, &cloud, start, config.l_max, MEAN_PATH_TOL)
    })()
    .stage("meanpath")?;

    let (mep_state, action) = match &mep {
        Some(p) => {
            let opts = StringOptions {
                images: config.mep_images,
                ..Default::default()
            };
            let s = string_mep(p.landscape.as_ref(), p.geometry, &p.a, &p.b, &opts).stage("mep")?;
            let action = fw_action(&s.images, p.landscape.as_ref()).stage("mep")?;
            (Some(s), Some(action))
        }
        None => (None, None),
    };

    let mut run = RunArtifacts {
        config: config.clone(),
        cloud,
        tessellation: tess,
        weights,
        generator,
        committor,
        reactive,
        dominant,
        chain,
        trajectory,
        uncontrolled,
        mean_path,
        mep: mep_state,
        action,
        landmarks,
        summary: Value::Null,
    };
    run.summary = summary(&run, a_rep, b_rep, extra);
    if let Some(dir) = &config.output {
        write_outputs(&run, dir, &profile, synthetic_inputs.as_ref()).stage("output")?;
    }
    Ok(run)
}

fn summary(run: &RunArtifacts, a_rep: usize, b_rep: usize, extra: Value) -> Value {
    let weakest: Vec<Value> = run
        .weakest_edges(WEAKEST_EDGES)
        .into_iter()
        .map(|(i, j, current)| {
            let near = run.nearest_landmark(i);
            json!({
                "from": i,
                "to": j,
                "current": current,
                "nearest_landmark": near.map(|n| n.0),
                "distance": near.map(|n| n.1),
            })
        })
        .collect();
    let bottleneck = run.dominant.bottlenecks.first();
    json!({
        "config": run.config.to_map(),
        "states": run.cloud.len(),
        "tessellation": {
            "faces": run.tessellation.face_count(),
            "clipped_cells": run.tessellation.clipped_cells().len(),
        },
        "weights": {
            "shift": run.weights.shift,
            "capped": run.weights.capped.len(),
        },
        "sets": {
            "a": run.committor.a.len(),
            "b": run.committor.b.len(),
            "a_representative": a_rep,
            "b_representative": b_rep,
        },
        "committor": {
            "method": format!("{:?}", run.committor.method).to_lowercase(),
            "residual": run.committor.residual,
            "iterations": run.committor.iterations,
        },
        "rate": {
            "k_ab_shifted": run.reactive.rate,
            "ln_k_ab": run.reactive.rate.ln() - run.weights.shift / run.config.eps,
            "eps_ln_k_ab": run.eps_ln_rate(),
            "positive_part": run.reactive.rate_positive,
            "dirichlet": run.reactive.dirichlet_rate,
        },
        "dominant_path": {
            "length": run.dominant.nodes.len(),
            "capacity": run.dominant.capacity(),
            "ties": run.dominant.ties(),
            "bottleneck": bottleneck.map(|b| json!([b.from, b.to])),
            "weakest_edges": weakest,
        },
        "walk": {
            "jumps": run.trajectory.jumps,
            "controlled_transitions": run.trajectory.transitions(),
            "total_time": run.trajectory.total_time(),
            "uncontrolled_transitions": run.uncontrolled.as_ref().map(TrajectoryRecord::transitions),
        },
        "mean_path": {
            "r0": run.mean_path.r0,
            "iterations": run.mean_path.iteration,
            "converged": run.mean_path.converged,
            "hausdorff_to_dominant": run.mean_path_hausdorff(),
        },
        "mep": run.mep.as_ref().map(|s| json!({
            "images": s.images.len(),
            "steps": s.steps,
            "residual": s.residual,
            "action": run.action,
        })),
        "experiment": extra,
        "files": {
            "cloud": "cloud.csv",
            "tessellation": "tess.json",
            "committor": "committor.csv",
            "current": "current.csv",
            "dominant_path": "dominant_path.csv",
            "current_profile": "current_profile.csv",
            "exit_distribution": "exit_distribution.csv",
            "trajectory": "trajectory.csv",
            "segments": "segments.csv",
            "mean_path": "mean_path.csv",
            "mean_path_diagnostics": "mean_path_diagnostics.csv",
            "mep": run.mep.as_ref().map(|_| "mep.csv"),
        },
    })
}

fn write_outputs(run: &RunArtifacts, dir: &Path, profile: &[(f64, f64)], synthetic: Option<&(DihedralSeries, TabulatedLandscape)>) -> Result<()> {
    fs::create_dir_all(dir)?;
    save_cloud(&run.cloud, &dir.join("cloud.csv"))?;
    save_tessellation(&run.tessellation, &dir.join("tess.json"))?;
    save_committor(&run.committor, &dir.join("committor.csv"))?;
    save_current(&run.reactive, &dir.join("current.csv"))?;
    save_dominant_path(&run.dominant.nodes, &run.committor.q, &run.cloud, &dir.join("dominant_path.csv"))?;
    let mut out = String::from("order,arc,J\n");
    for (k, (s, j)) in profile.iter().enumerate() {
        writeln!(out, "{k},{s},{j}").unwrap();
    }
    fs::write(dir.join("current_profile.csv"), out)?;
    save_exit_distribution(&run.chain, &dir.join("exit_distribution.csv"))?;
    save_trajectory(&run.trajectory, &dir.join("trajectory.csv"))?;
    save_segments(&run.trajectory, &dir.join("segments.csv"))?;
    save_mean_path(&run.mean_path, &run.cloud, &dir.join("mean_path.csv"))?;
    save_diagnostics(&run.mean_path, &dir.join("mean_path_diagnostics.csv"))?;
    if let Some(s) = &run.mep {
        save_mep(s, &dir.join("mep.csv"))?;
    }
    if let Some((series, grid)) = synthetic {
        series.save(&dir.join("dihedrals.csv"))?;
        grid.save(&dir.join("free_energy.csv"))?;
    }
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&run.summary)? + "\n")?;
    Ok(())
}
