//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{read_text, Error, Result};
use crate::pointcloud::{TorusMeasure, DEFAULT_NEIGHBORS};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    SphereMueller,
    TorusPerturbed,
    Alanine,
    Custom,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::SphereMueller => "sphere-mueller",
            Self::TorusPerturbed => "torus-perturbed",
            Self::Alanine => "alanine",
            Self::Custom => "custom",
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere-mueller" => Ok(Self::SphereMueller),
            "torus-perturbed" => Ok(Self::TorusPerturbed),
            "alanine" => Ok(Self::Alanine),
            "custom" => Ok(Self::Custom),
            _ => Err(Error::InvalidArgument(format!(
                "unknown experiment {s:?}; expected sphere-mueller, torus-perturbed, alanine or custom"
            ))),
        }
    }
}

/// How the mean-path ball radius is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BallRadius {
    /// Five times the median nearest-neighbour distance of the cloud.
    Median,
    /// Smallest radius giving every initial ball `r0_samples` visited states.
    Tuned,
    Fixed(f64),
}

impl FromStr for BallRadius {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "median" => Ok(Self::Median),
            "tuned" => Ok(Self::Tuned),
            _ => match s.parse::<f64>() {
                Ok(r) if r > 0.0 && r.is_finite() => Ok(Self::Fixed(r)),
                _ => Err(Error::InvalidArgument(format!("r0 must be median, tuned or a positive number, got {s:?}"))),
            },
        }
    }
}

impl fmt::Display for BallRadius {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Median => f.write_str("median"),
            Self::Tuned => f.write_str("tuned"),
            Self::Fixed(r) => write!(f, "{r}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n_samples: usize,
    pub eps: f64,
    /// Ambient radius of the A and B balls.
    pub radius: f64,
    pub k_max: usize,
    pub m: usize,
    pub l_max: usize,
    pub r0: BallRadius,
    pub r0_samples: usize,
    /// Tessellation neighbours.
    pub k: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub mep: bool,
    pub mep_images: usize,
    pub uncontrolled: bool,
    pub torus_measure: TorusMeasure,
    pub target: String,
    pub dihedrals: Option<PathBuf>,
    pub free_energy: Option<PathBuf>,
    pub batch: usize,
    pub n_aux: usize,
    pub window: usize,
    pub cloud: Option<PathBuf>,
    pub intrinsic_dim: usize,
    pub energies: Option<PathBuf>,
    pub a_center: Option<Vec<f64>>,
    pub b_center: Option<Vec<f64>>,
}

const KEYS: &[&str] = &[
    "experiment",
    "n_samples",
    "eps",
    "radius",
    "k_max",
    "m",
    "l_max",
    "r0",
    "r0_samples",
    "k",
    "seed",
    "output",
    "mep",
    "mep_images",
    "uncontrolled",
    "torus_measure",
    "target",
    "dihedrals",
    "free_energy",
    "batch",
    "n_aux",
    "window",
    "cloud",
    "intrinsic_dim",
    "energies",
    "a_center",
    "b_center",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::InvalidArgument(format!("config key {key}: cannot parse {value:?}: {e}")))
}

fn parse_point(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|s| parse::<f64>(key, s.trim())).collect()
}

/// Read `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (row, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            source_name: "config".into(),
            row: row + 1,
            message: format!("expected key = value, got {line:?}"),
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

impl ExperimentConfig {
    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let mut map = parse_config_text(&read_text(path)?)?;
        map.extend(overrides.iter().cloned());
        Self::from_map(&map)
    }

    /// Resolve a key map, filling experiment-specific defaults.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        if let Some(key) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(Error::InvalidArgument(format!("unknown config key {key:?}")));
        }
        let get = |k: &str| map.get(k).map(String::as_str);
        let experiment: Experiment = parse("experiment", get("experiment").unwrap_or("sphere-mueller"))?;
        let eps = match (get("eps"), experiment) {
            (Some(v), _) => parse("eps", v)?,
            (None, Experiment::SphereMueller | Experiment::TorusPerturbed) => 0.1,
            (None, e) => {
                return Err(Error::InvalidArgument(format!(
                    "eps is required for the {} experiment",
                    e.name()
                )))
            }
        };
        let path = |k: &str| get(k).map(PathBuf::from);
        let count = |k: &str, default: usize| get(k).map_or(Ok(default), |v| parse::<usize>(k, v));
        let l_default = match experiment {
            Experiment::SphereMueller | Experiment::TorusPerturbed => 20,
            _ => 200,
        };
        let config = Self {
            experiment,
            n_samples: count("n_samples", 4000)?,
            eps,
            radius: get("radius").map_or(Ok(0.05), |v| parse("radius", v))?,
            k_max: count("k_max", 100_000)?,
            m: count("m", 100)?,
            l_max: count("l_max", l_default)?,
            r0: get("r0").map_or(Ok(BallRadius::Median), |v| v.parse())?,
            r0_samples: count("r0_samples", 20)?,
            k: count("k", DEFAULT_NEIGHBORS)?,
            seed: get("seed").map_or(Ok(1), |v| parse("seed", v))?,
            output: path("output"),
            mep: get("mep").map_or(Ok(matches!(experiment, Experiment::SphereMueller | Experiment::TorusPerturbed)), |v| parse("mep", v))?,
            mep_images: count("mep_images", 100)?,
            uncontrolled: get("uncontrolled").map_or(Ok(true), |v| parse("uncontrolled", v))?,
            torus_measure: match get("torus_measure").unwrap_or("surface") {
                "surface" => TorusMeasure::SurfaceArea,
                "angular" => TorusMeasure::Angular,
                v => return Err(Error::InvalidArgument(format!("torus_measure must be surface or angular, got {v:?}"))),
            },
            target: get("target").unwrap_or("C_7eq").to_string(),
            dihedrals: path("dihedrals"),
            free_energy: path("free_energy"),
            batch: count("batch", 4000)?,
            n_aux: count("n_aux", 500)?,
            window: count("window", 10)?,
            cloud: path("cloud"),
            intrinsic_dim: count("intrinsic_dim", 2)?,
            energies: path("energies"),
            a_center: get("a_center").map(|v| parse_point("a_center", v)).transpose()?,
            b_center: get("b_center").map(|v| parse_point("b_center", v)).transpose()?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.radius > 0.0) {
            return Err(Error::InvalidArgument(format!("radius must be positive, got {}", self.radius)));
        }
        for (key, v) in [
            ("n_samples", self.n_samples),
            ("k_max", self.k_max),
            ("l_max", self.l_max),
            ("r0_samples", self.r0_samples),
            ("k", self.k),
            ("batch", self.batch),
            ("window", self.window),
        ] {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{key} must be positive")));
            }
        }
        if self.m < 3 || self.mep_images < 3 {
            return Err(Error::InvalidArgument("m and mep_images must be at least 3".into()));
        }
        if self.dihedrals.is_some() != self.free_energy.is_some() {
            return Err(Error::InvalidArgument("dihedrals and free_energy must be given together".into()));
        }
        if self.experiment == Experiment::Custom {
            if self.cloud.is_none() || self.energies.is_none() || self.a_center.is_none() || self.b_center.is_none() {
                return Err(Error::InvalidArgument(
                    "the custom experiment needs cloud, energies, a_center and b_center".into(),
                ));
            }
        }
        Ok(())
    }

    /// Every resolved key, for the run summary.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let opt = |p: &Option<PathBuf>| p.as_ref().map_or_else(String::new, |p| p.display().to_string());
        let point = |p: &Option<Vec<f64>>| {
            p.as_ref()
                .map_or_else(String::new, |v| v.iter().map(f64::to_string).collect::<Vec<_>>().join(","))
        };
        let entries: Vec<(&str, String)> = vec![
            ("experiment", self.experiment.name().into()),
            ("n_samples", self.n_samples.to_string()),
            ("eps", self.eps.to_string()),
            ("radius", self.radius.to_string()),
            ("k_max", self.k_max.to_string()),
            ("m", self.m.to_string()),
            ("l_max", self.l_max.to_string()),
            ("r0", self.r0.to_string()),
            ("r0_samples", self.r0_samples.to_string()),
            ("k", self.k.to_string()),
            ("seed", self.seed.to_string()),
            ("output", opt(&self.output)),
            ("mep", self.mep.to_string()),
            ("mep_images", self.mep_images.to_string()),
            ("uncontrolled", self.uncontrolled.to_string()),
            (
                "torus_measure",
                match self.torus_measure {
                    TorusMeasure::SurfaceArea => "surface".into(),
                    TorusMeasure::Angular => "angular".into(),
                },
            ),
            ("target", self.target.clone()),
            ("dihedrals", opt(&self.dihedrals)),
            ("free_energy", opt(&self.free_energy)),
            ("batch", self.batch.to_string()),
            ("n_aux", self.n_aux.to_string()),
            ("window", self.window.to_string()),
            ("cloud", opt(&self.cloud)),
            ("intrinsic_dim", self.intrinsic_dim.to_string()),
            ("energies", opt(&self.energies)),
            ("a_center", point(&self.a_center)),
            ("b_center", point(&self.b_center)),
        ];
        entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::from_map(&BTreeMap::new()).expect("defaults are valid")
    }
}
