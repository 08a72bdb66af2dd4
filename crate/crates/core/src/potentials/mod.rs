//! Energy landscapes: the Mueller potential and its perturbation, pullbacks to
//! the sphere and torus, tabulated free energies, equilibrium weights and
//! stationary points.

mod mueller;
mod pullback;
mod stationary;
mod tabulated;

use crate::error::{Error, Result};
use crate::pointcloud::PointCloud;

pub use mueller::{Mueller, MuellerParams, PerturbedMueller};
pub use pullback::{SpherePullback, TorusCoordinates, TorusPullback};
pub use stationary::{
    find_stationary_points, mueller_landmarks, MuellerLandmarks, StationaryKind, StationaryPoint, StationarySearch, MUELLER_BOX,
};
pub use tabulated::{load_tabulated, TabulatedLandscape};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Domain {
    Plane,
    Sphere,
    Torus,
    Grid,
}

/// A dimensionless energy `U` with an analytic gradient.
pub trait Landscape: Send + Sync {
    fn dim(&self) -> usize;

    fn domain(&self) -> Domain;

    /// Energy at a point of the domain; rejects points where `U` is undefined.
    fn energy(&self, x: &[f64]) -> Result<f64>;

    /// Gradient of the ambient extension of `U` (not projected to the manifold).
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Ambient extension of `U` near the domain, without on-manifold validation.
    fn extended_energy(&self, x: &[f64]) -> Result<f64> {
        self.energy(x)
    }

    /// Hessian by central differences of the analytic gradient.
    fn hessian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = self.dim();
        let h = 1e-6;
        let mut hess = vec![vec![0.0; n]; n];
        let mut p = x.to_vec();
        for k in 0..n {
            p[k] = x[k] + h;
            let gp = self.gradient(&p)?;
            p[k] = x[k] - h;
            let gm = self.gradient(&p)?;
            p[k] = x[k];
            for r in 0..n {
                hess[r][k] = (gp[r] - gm[r]) / (2.0 * h);
            }
        }
        for r in 0..n {
            for k in 0..r {
                let s = 0.5 * (hess[r][k] + hess[k][r]);
                hess[r][k] = s;
                hess[k][r] = s;
            }
        }
        Ok(hess)
    }
}

impl<L: Landscape + ?Sized> Landscape for Box<L> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn domain(&self) -> Domain {
        (**self).domain()
    }
    fn energy(&self, x: &[f64]) -> Result<f64> {
        (**self).energy(x)
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        (**self).gradient(x)
    }
    fn extended_energy(&self, x: &[f64]) -> Result<f64> {
        (**self).extended_energy(x)
    }
    fn hessian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        (**self).hessian(x)
    }
}

/// Largest central-difference discrepancy of the analytic gradient at `x`,
/// relative to `max(|grad U|_inf, 1)`.
pub fn gradient_error<L: Landscape + ?Sized>(landscape: &L, x: &[f64], h: f64) -> Result<f64> {
    let g = landscape.gradient(x)?;
    let scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut p = x.to_vec();
    let mut worst = 0.0f64;
    for k in 0..x.len() {
        p[k] = x[k] + h;
        let up = landscape.extended_energy(&p)?;
        p[k] = x[k] - h;
        let down = landscape.extended_energy(&p)?;
        p[k] = x[k];
        worst = worst.max(((up - down) / (2.0 * h) - g[k]).abs() / scale);
    }
    Ok(worst)
}


/// Weights more than this many multiples of `eps` above the minimum are held
/// at `exp(-WEIGHT_CEILING)` so they stay normal doubles.
pub const WEIGHT_CEILING: f64 = 600.0;

/// Equilibrium weights `pi_i = exp(-(U_i - min U) / eps)`.
#[derive(Clone, Debug)]
pub struct EquilibriumWeights {
    pub weights: Vec<f64>,
    /// Sample energies as evaluated (may contain `+inf` where `U` overflowed).
    pub energies: Vec<f64>,
    /// The subtracted minimum energy; `pi_i exp(-shift / eps)` are the unshifted weights.
    pub shift: f64,
    pub eps: f64,
    /// Samples whose weight was held at the ceiling.
    pub capped: Vec<usize>,
}

impl EquilibriumWeights {
    /// Shifted energies `-eps ln pi_i` (equal to `U_i - min U` below the ceiling).
    pub fn shifted_energies(&self) -> Vec<f64> {
        self.weights.iter().map(|w| -self.eps * w.ln()).collect()
    }
}

pub fn weights_from_energies(energies: Vec<f64>, eps: f64) -> Result<EquilibriumWeights> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    if let Some(i) = energies.iter().position(|u| u.is_nan() || *u == f64::NEG_INFINITY) {
        return Err(Error::NonFiniteEnergy(i));
    }
    let shift = energies.iter().copied().fold(f64::INFINITY, f64::min);
    if !shift.is_finite() {
        return Err(Error::NonFiniteEnergy(0));
    }
    let mut capped = Vec::new();
    let weights = energies
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let mut reduced = (u - shift) / eps;
            if !(reduced <= WEIGHT_CEILING) {
                capped.push(i);
                reduced = WEIGHT_CEILING;
            }
            (-reduced).exp()
        })
        .collect();
    Ok(EquilibriumWeights {
        weights,
        energies,
        shift,
        eps,
        capped,
    })
}

/// Evaluate `U` at every sample and convert to equilibrium weights.
///
/// Samples where the energy overflows to `+inf` are capped; NaN is an error.
pub fn equilibrium_weights<L: Landscape + ?Sized>(cloud: &PointCloud, landscape: &L, eps: f64) -> Result<EquilibriumWeights> {
    let energies = cloud
        .points()
        .enumerate()
        .map(|(i, p)| match landscape.energy(p) {
            Ok(u) if u.is_nan() => Err(Error::NonFiniteEnergy(i)),
            // U grows without bound towards the pole of the stereographic chart.
            Err(Error::Pole) => Ok(f64::INFINITY),
            other => other,
        })
        .collect::<Result<Vec<_>>>()?;
    weights_from_energies(energies, eps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_energy_gives_uniform_weights() {
        let w = weights_from_energies(vec![2.5; 6], 0.3).unwrap();
        assert!(w.weights.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn ln2_gap_doubles_weight() {
        let eps = 0.07;
        let w = weights_from_energies(vec![1.0, 1.0 + eps * 2f64.ln()], eps).unwrap();
        assert!((w.weights[0] / w.weights[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn shift_invariance() {
        let u = vec![0.3, -1.2, 4.0, 0.0];
        let a = weights_from_energies(u.clone(), 0.2).unwrap();
        let b = weights_from_energies(u.iter().map(|x| x + 17.0).collect(), 0.2).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let ra = a.weights[i] / a.weights[j];
                let rb = b.weights[i] / b.weights[j];
                assert!((ra - rb).abs() <= 1e-12 * ra.abs());
            }
        }
    }

    #[test]
    fn overflowing_energy_is_capped_not_zero() {
        let w = weights_from_energies(vec![0.0, f64::INFINITY, 1e6], 0.02).unwrap();
        assert_eq!(w.capped, vec![1, 2]);
        assert!(w.weights.iter().all(|&x| x > 0.0 && x.is_normal()));
        assert!(weights_from_energies(vec![0.0, f64::NAN], 1.0).is_err());
        assert!(weights_from_energies(vec![0.0], 0.0).is_err());
    }
}
