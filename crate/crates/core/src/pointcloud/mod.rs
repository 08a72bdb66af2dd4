//! Point clouds on embedded manifolds, seeded samplers and the approximate
//! Voronoi tessellation consumed by the generator.

mod io;
mod neighbors;
mod tessellation;

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::manifold::Torus;

pub use io::{load_cloud, load_tessellation, save_cloud, save_tessellation};
pub use neighbors::{k_nearest, median_nearest_distance, nearest};
pub use tessellation::{build_tessellation, tangent_frame, TangentFrame, Tessellation, DEFAULT_NEIGHBORS};

/// Samples `y_1..y_n` in R^l, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    dim: usize,
    intrinsic_dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    /// Validates finiteness, `n >= 2` and that no two points coincide.
    pub fn from_flat(dim: usize, intrinsic_dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.len() % dim != 0 {
            return Err(Error::InvalidArgument(format!(
                "coordinate buffer of length {} does not hold points of dimension {dim}",
                coords.len()
            )));
        }
        if intrinsic_dim == 0 || intrinsic_dim > dim {
            return Err(Error::InvalidArgument(format!(
                "intrinsic dimension {intrinsic_dim} is incompatible with ambient dimension {dim}"
            )));
        }
        let n = coords.len() / dim;
        if n < 2 {
            return Err(Error::InvalidArgument(format!("a point cloud needs at least 2 points, got {n}")));
        }
        if let Some(pos) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(format!("point {} has a non-finite coordinate", pos / dim)));
        }
        let cloud = Self { dim, intrinsic_dim, coords };
        if let Some((i, j)) = cloud.find_duplicate() {
            return Err(Error::DuplicatePoint(i, j));
        }
        Ok(cloud)
    }

    pub fn new(points: &[Vec<f64>], intrinsic_dim: usize) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if let Some(i) = points.iter().position(|p| p.len() != dim) {
            return Err(Error::InvalidArgument(format!("point {i} has dimension {} instead of {dim}", points[i].len())));
        }
        Self::from_flat(dim, intrinsic_dim, points.concat())
    }

    fn find_duplicate(&self) -> Option<(usize, usize)> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            self.point(a)
                .iter()
                .zip(self.point(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        order
            .windows(2)
            .find(|w| self.point(w[0]) == self.point(w[1]))
            .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Ambient dimension l.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.intrinsic_dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        euclidean(self.point(i), self.point(j))
    }

    /// Indices of samples in the open ball `|y - center| < radius`.
    pub fn ball(&self, center: &[f64], radius: f64) -> Vec<usize> {
        self.points()
            .enumerate()
            .filter(|(_, p)| euclidean(p, center) < radius)
            .map(|(i, _)| i)
            .collect()
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Uniform samples on the unit sphere S^2 (normalised Gaussian vectors).
pub fn sample_sphere_uniform(n: usize, seed: u64) -> Result<PointCloud> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need n >= 2 samples, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = Vec::with_capacity(3 * n);
    while coords.len() < 3 * n {
        let v: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm < 1e-8 {
            continue;
        }
        coords.extend(v.iter().map(|c| c / norm));
    }
    PointCloud::from_flat(3, 2, coords)
}

/// Which measure torus samples are uniform with respect to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TorusMeasure {
    /// Uniform in surface area: density proportional to `R + r cos(theta)` in the angles.
    #[default]
    SurfaceArea,
    /// Uniform in `(theta, phi)`.
    Angular,
}

pub fn sample_torus_uniform(n: usize, torus: Torus, measure: TorusMeasure, seed: u64) -> Result<PointCloud> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need n >= 2 samples, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ceiling = torus.major + torus.minor;
    let mut coords = Vec::with_capacity(3 * n);
    while coords.len() < 3 * n {
        let theta = rng.random::<f64>() * TAU - std::f64::consts::PI;
        let phi = rng.random::<f64>() * TAU;
        if measure == TorusMeasure::SurfaceArea {
            let accept = rng.random::<f64>() * ceiling;
            if accept > torus.major + torus.minor * theta.cos() {
                continue;
            }
        }
        coords.extend(torus.embed(theta, phi));
    }
    PointCloud::from_flat(3, 2, coords)
}
