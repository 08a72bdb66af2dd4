use std::f64::consts::PI;

use super::{Domain, Landscape};
use crate::error::{Error, Result};

/// Coefficients of `U(X,Y) = sum_k A_k exp(a_k (X-alpha_k)^2 + b_k (X-alpha_k)(Y-beta_k) + c_k (Y-beta_k)^2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MuellerParams {
    pub amp: [f64; 4],
    pub a: [f64; 4],
    pub b: [f64; 4],
    pub c: [f64; 4],
    pub alpha: [f64; 4],
    pub beta: [f64; 4],
}

impl Default for MuellerParams {
    fn default() -> Self {
        Self {
            amp: [-2.0, -1.0, -1.7, 0.15],
            a: [-1.0, -1.0, -6.5, 0.7],
            b: [0.0, 0.0, 11.0, 0.6],
            c: [-10.0, -10.0, -6.5, 0.7],
            alpha: [1.0, 0.0, -0.5, -1.0],
            beta: [0.0, 0.5, 1.5, 1.0],
        }
    }
}

impl MuellerParams {
    /// Value and analytic gradient at `(x, y)`.
    pub fn eval(&self, x: f64, y: f64) -> (f64, [f64; 2]) {
        let mut u = 0.0;
        let mut g = [0.0; 2];
        for k in 0..4 {
            let dx = x - self.alpha[k];
            let dy = y - self.beta[k];
            let e = self.amp[k] * (self.a[k] * dx * dx + self.b[k] * dx * dy + self.c[k] * dy * dy).exp();
            u += e;
            g[0] += e * (2.0 * self.a[k] * dx + self.b[k] * dy);
            g[1] += e * (self.b[k] * dx + 2.0 * self.c[k] * dy);
        }
        (u, g)
    }

    pub fn hessian(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        let mut h = [[0.0; 2]; 2];
        for k in 0..4 {
            let dx = x - self.alpha[k];
            let dy = y - self.beta[k];
            let e = self.amp[k] * (self.a[k] * dx * dx + self.b[k] * dx * dy + self.c[k] * dy * dy).exp();
            let px = 2.0 * self.a[k] * dx + self.b[k] * dy;
            let py = self.b[k] * dx + 2.0 * self.c[k] * dy;
            h[0][0] += e * (px * px + 2.0 * self.a[k]);
            h[0][1] += e * (px * py + self.b[k]);
            h[1][1] += e * (py * py + 2.0 * self.c[k]);
        }
        h[1][0] = h[0][1];
        h
    }
}

fn planar(x: &[f64]) -> Result<(f64, f64)> {
    match x {
        [a, b] => Ok((*a, *b)),
        _ => Err(Error::InvalidArgument(format!("expected a point in R^2, got dimension {}", x.len()))),
    }
}

/// The Mueller potential on the plane.
#[derive(Clone, Debug, Default)]
pub struct Mueller {
    pub params: MuellerParams,
}

impl Mueller {
    pub fn new(params: MuellerParams) -> Self {
        Self { params }
    }
}

impl Landscape for Mueller {
    fn dim(&self) -> usize {
        2
    }
    fn domain(&self) -> Domain {
        Domain::Plane
    }
    fn energy(&self, x: &[f64]) -> Result<f64> {
        let (a, b) = planar(x)?;
        Ok(self.params.eval(a, b).0)
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (a, b) = planar(x)?;
        Ok(self.params.eval(a, b).1.to_vec())
    }
    fn hessian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let (a, b) = planar(x)?;
        Ok(self.params.hessian(a, b).iter().map(|r| r.to_vec()).collect())
    }
}

/// Mueller potential plus `amplitude * sin(wavenumber X) sin(wavenumber Y)`.
#[derive(Clone, Debug)]
pub struct PerturbedMueller {
    pub base: Mueller,
    pub amplitude: f64,
    pub wavenumber: f64,
}

impl Default for PerturbedMueller {
    fn default() -> Self {
        Self {
            base: Mueller::default(),
            amplitude: 0.15,
            wavenumber: 10.0 * PI,
        }
    }
}

impl Landscape for PerturbedMueller {
    fn dim(&self) -> usize {
        2
    }
    fn domain(&self) -> Domain {
        Domain::Plane
    }
    fn energy(&self, x: &[f64]) -> Result<f64> {
        let (a, b) = planar(x)?;
        let w = self.wavenumber;
        Ok(self.base.params.eval(a, b).0 + self.amplitude * (w * a).sin() * (w * b).sin())
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (a, b) = planar(x)?;
        let w = self.wavenumber;
        let g = self.base.params.eval(a, b).1;
        Ok(vec![
            g[0] + self.amplitude * w * (w * a).cos() * (w * b).sin(),
            g[1] + self.amplitude * w * (w * a).sin() * (w * b).cos(),
        ])
    }
    fn hessian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let (a, b) = planar(x)?;
        let w = self.wavenumber;
        let s = self.amplitude * w * w;
        let h = self.base.params.hessian(a, b);
        let (sa, ca, sb, cb) = ((w * a).sin(), (w * a).cos(), (w * b).sin(), (w * b).cos());
        let off = h[0][1] + s * ca * cb;
        Ok(vec![vec![h[0][0] - s * sa * sb, off], vec![off, h[1][1] - s * sa * sb]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::testing::assert_gradient_matches;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_parameters() {
        let p = MuellerParams::default();
        assert_eq!(p.amp, [-2.0, -1.0, -1.7, 0.15]);
        assert_eq!(p.b, [0.0, 0.0, 11.0, 0.6]);
        assert_eq!(p.beta, [0.0, 0.5, 1.5, 1.0]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vec<f64>> = (0..100).map(|_| vec![rng.random_range(-1.5..1.2), rng.random_range(-0.2..2.0)]).collect();
        assert_gradient_matches(&Mueller::default(), &pts);
        assert_gradient_matches(&PerturbedMueller::default(), &pts);
    }

    #[test]
    fn analytic_hessian_matches_gradient_differences() {
        let m = Mueller::default();
        let p = [-0.3, 0.9];
        let h = m.hessian(&p).unwrap();
        let eps = 1e-6;
        for k in 0..2 {
            let mut a = p;
            let mut b = p;
            a[k] += eps;
            b[k] -= eps;
            let ga = m.gradient(&a).unwrap();
            let gb = m.gradient(&b).unwrap();
            for r in 0..2 {
                let fd = (ga[r] - gb[r]) / (2.0 * eps);
                assert!((fd - h[r][k]).abs() < 1e-5 * (1.0 + fd.abs()));
            }
        }
    }

    #[test]
    fn perturbation_vanishes_on_axis_and_peaks_at_quarter_period() {
        let m = Mueller::default();
        let p = PerturbedMueller::default();
        for y in [-0.3, 0.1, 0.77, 1.9] {
            assert_eq!(p.energy(&[0.0, y]).unwrap(), m.energy(&[0.0, y]).unwrap());
        }
        let d = p.energy(&[0.05, 0.05]).unwrap() - m.energy(&[0.05, 0.05]).unwrap();
        assert!((d - 0.15).abs() < 1e-12);
    }

    #[test]
    fn perturbation_sup_norm_on_grid() {
        let m = Mueller::default();
        let p = PerturbedMueller::default();
        let mut sup: f64 = 0.0;
        for i in 0..200 {
            for j in 0..200 {
                let x = -1.5 + 2.7 * i as f64 / 199.0;
                let y = -0.2 + 2.2 * j as f64 / 199.0;
                sup = sup.max((p.energy(&[x, y]).unwrap() - m.energy(&[x, y]).unwrap()).abs());
            }
        }
        assert!((sup - 0.15).abs() < 1e-3, "sup {sup}");
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        assert!(Mueller::default().energy(&[1.0, 2.0, 3.0]).is_err());
    }
}
