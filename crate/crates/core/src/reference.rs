//! Zero-temperature string method for minimum energy paths, and the
//! Freidlin–Wentzell action of a path.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::manifold::{sphere_closest_point, Torus};
use crate::meanpath::reparameterize;
use crate::path::DiscretePath;
use crate::potentials::Landscape;

pub const DEFAULT_STEP: f64 = 1e-4;
pub const DEFAULT_IMAGES: usize = 100;
pub const DEFAULT_MAX_STEPS: usize = 400_000;
pub const DEFAULT_TOL: f64 = 1e-6;
const MIN_STEP: f64 = 1e-14;
const ENDPOINT_GRADIENT: f64 = 1e-4;

/// Where the string lives; images are kept on it by closest-point maps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StringGeometry {
    Flat,
    Sphere,
    Torus(Torus),
}

impl StringGeometry {
    pub fn project(&self, p: &[f64]) -> Vec<f64> {
        match self {
            Self::Flat => p.to_vec(),
            Self::Sphere => sphere_closest_point(p).to_vec(),
            Self::Torus(t) => t.closest_point(p).to_vec(),
        }
    }

    fn normal(&self, p: &[f64]) -> Option<[f64; 3]> {
        match self {
            Self::Flat => None,
            Self::Sphere => Some(sphere_closest_point(p)),
            Self::Torus(t) => {
                let rho = p[0].hypot(p[1]);
                let c = [t.major * p[0] / rho, t.major * p[1] / rho, 0.0];
                let d = [p[0] - c[0], p[1] - c[1], p[2]];
                let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                Some([d[0] / n, d[1] / n, d[2] / n])
            }
        }
    }

    /// Remove the normal component of `v` at `p`.
    pub fn tangent(&self, p: &[f64], v: &mut [f64]) {
        if let Some(n) = self.normal(p) {
            let dot: f64 = v.iter().zip(&n).map(|(a, b)| a * b).sum();
            for (a, b) in v.iter_mut().zip(&n) {
                *a -= dot * b;
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct StringOptions {
    pub images: usize,
    pub step: f64,
    pub max_steps: usize,
    /// Stop once every interior image has normal force below this.
    pub tol: f64,
}

impl Default for StringOptions {
    fn default() -> Self {
        Self {
            images: DEFAULT_IMAGES,
            step: DEFAULT_STEP,
            max_steps: DEFAULT_MAX_STEPS,
            tol: DEFAULT_TOL,
        }
    }
}

#[derive(Clone, Debug)]
pub struct StringState {
    pub images: Vec<Vec<f64>>,
    pub energies: Vec<f64>,
    pub step: f64,
    /// Largest normal force over interior images.
    pub residual: f64,
    pub steps: usize,
}

impl StringState {
    pub fn path(&self) -> DiscretePath {
        DiscretePath::from_points(self.images.clone())
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn unit_tangent(images: &[Vec<f64>], k: usize) -> Vec<f64> {
    let t: Vec<f64> = images[k + 1].iter().zip(&images[k - 1]).map(|(a, b)| a - b).collect();
    let n = norm(&t);
    t.into_iter().map(|x| x / n).collect()
}

/// Component of the manifold gradient at image `k` orthogonal to the string.
fn normal_force<L: Landscape + ?Sized>(landscape: &L, geometry: &StringGeometry, images: &[Vec<f64>], k: usize) -> Result<Vec<f64>> {
    let p = &images[k];
    let mut g = landscape.gradient(p)?;
    geometry.tangent(p, &mut g);
    let mut tau = unit_tangent(images, k);
    geometry.tangent(p, &mut tau);
    let tn = norm(&tau);
    if tn > 0.0 {
        let dot: f64 = g.iter().zip(&tau).map(|(a, b)| a * b).sum::<f64>() / (tn * tn);
        for (a, b) in g.iter_mut().zip(&tau) {
            *a -= dot * b;
        }
    }
    Ok(g)
}

fn energies<L: Landscape + ?Sized>(landscape: &L, images: &[Vec<f64>]) -> Result<Vec<f64>> {
    images.iter().map(|p| landscape.energy(p)).collect()
}

fn max_normal_force<L: Landscape + ?Sized + Sync>(landscape: &L, geometry: &StringGeometry, images: &[Vec<f64>]) -> Result<f64> {
    let forces: Result<Vec<f64>> = (1..images.len() - 1)
        .into_par_iter()
        .map(|k| normal_force(landscape, geometry, images, k).map(|f| norm(&f)))
        .collect();
    Ok(forces?.into_iter().fold(0.0, f64::max))
}

/// The largest normal force over interior images of a path.
pub fn tangency_residual<L: Landscape + ?Sized + Sync>(landscape: &L, geometry: &StringGeometry, images: &[Vec<f64>]) -> Result<f64> {
    max_normal_force(landscape, geometry, images)
}

fn check_minimum<L: Landscape + ?Sized>(landscape: &L, geometry: &StringGeometry, p: &[f64], name: &str) -> Result<()> {
    let mut g = landscape.gradient(p)?;
    geometry.tangent(p, &mut g);
    let gn = norm(&g);
    if !(gn < ENDPOINT_GRADIENT) {
        return Err(Error::InvalidArgument(format!(
            "string endpoint {name} is not a minimum (|grad U| = {gn:e})"
        )));
    }
    Ok(())
}

/// Minimum energy path from `a` to `b`, starting from the projected chord.
pub fn string_mep<L: Landscape + ?Sized + Sync>(landscape: &L, geometry: StringGeometry, a: &[f64], b: &[f64], options: &StringOptions) -> Result<StringState> {
    if options.images < 3 {
        return Err(Error::InvalidArgument(format!("string needs at least 3 images, got {}", options.images)));
    }
    let n = options.images;
    let initial: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let t = k as f64 / (n - 1) as f64;
            let p: Vec<f64> = a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect();
            geometry.project(&p)
        })
        .collect();
    string_mep_from(landscape, geometry, initial, options)
}

/// String iteration from a given initial path; endpoints stay fixed.
pub fn string_mep_from<L: Landscape + ?Sized + Sync>(landscape: &L, geometry: StringGeometry, initial: Vec<Vec<f64>>, options: &StringOptions) -> Result<StringState> {
    let n = initial.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!("string needs at least 3 images, got {n}")));
    }
    if !(options.step > 0.0 && options.tol > 0.0) {
        return Err(Error::InvalidArgument("string step and tolerance must be positive".into()));
    }
    check_minimum(landscape, &geometry, &initial[0], "a")?;
    check_minimum(landscape, &geometry, &initial[n - 1], "b")?;

    let resample = |points: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> {
        let mut out = reparameterize(points)?;
        for p in out.iter_mut().take(n - 1).skip(1) {
            *p = geometry.project(p);
        }
        Ok(out)
    };
    let mut images = resample(&initial)?;
    let mut energy = energies(landscape, &images)?;
    let mut step = options.step;
    let mut residual = max_normal_force(landscape, &geometry, &images)?;
    let mut steps = 0;
    while residual >= options.tol {
        if steps == options.max_steps {
            return Err(Error::StringNotConverged { steps, displacement: residual * step });
        }
        let forces: Vec<Vec<f64>> = (1..n - 1)
            .into_par_iter()
            .map(|k| normal_force(landscape, &geometry, &images, k))
            .collect::<Result<_>>()?;
        let trial: Vec<Vec<f64>> = (0..n)
            .map(|k| {
                if k == 0 || k == n - 1 {
                    return images[k].clone();
                }
                let p: Vec<f64> = images[k].iter().zip(&forces[k - 1]).map(|(x, f)| x - step * f).collect();
                geometry.project(&p)
            })
            .collect();
        let trial_energy = energies(landscape, &trial)?;
        let (before, after): (f64, f64) = (energy.iter().sum(), trial_energy.iter().sum());
        if after > before + 1e-13 * before.abs().max(1.0) {
            step *= 0.5;
            if step < MIN_STEP {
                return Err(Error::StringNotConverged { steps, displacement: residual * step });
            }
            continue;
        }
        images = resample(&trial)?;
        energy = energies(landscape, &images)?;
        residual = max_normal_force(landscape, &geometry, &images)?;
        steps += 1;
    }
    Ok(StringState {
        images,
        energies: energy,
        step,
        residual,
        steps,
    })
}

/// Twice the total uphill energy gain along the path.
pub fn fw_action<L: Landscape + ?Sized>(path: &[Vec<f64>], landscape: &L) -> Result<f64> {
    if path.len() < 2 {
        return Err(Error::InvalidArgument("action needs a path with at least two points".into()));
    }
    let u = energies(landscape, path)?;
    Ok(2.0 * u.windows(2).map(|w| (w[1] - w[0]).max(0.0)).sum::<f64>())
}

/// Writes `order,x1..xl,U`.
pub fn save_mep(state: &StringState, path: &Path) -> Result<()> {
    let dim = state.images.first().map_or(0, Vec::len);
    let mut out = String::from("order");
    for k in 1..=dim {
        write!(out, ",x{k}").unwrap();
    }
    out.push_str(",U\n");
    for (order, (p, u)) in state.images.iter().zip(&state.energies).enumerate() {
        write!(out, "{order}").unwrap();
        for x in p {
            write!(out, ",{x}").unwrap();
        }
        writeln!(out, ",{u}").unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}
