//! Embeddings of the unit sphere and the torus in R^3, with their charts.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Points with `1 - z` below this are treated as the north pole.
pub const POLE_GUARD: f64 = 1e-12;

/// Inverse stereographic projection from the plane onto the unit sphere.
pub fn stereographic_lift(x: f64, y: f64) -> [f64; 3] {
    let s = x * x + y * y;
    let d = s + 1.0;
    [2.0 * x / d, 2.0 * y / d, (s - 1.0) / d]
}

/// Stereographic chart `(x, y, z) -> (x / (1 - z), y / (1 - z))`.
///
/// Defined on all of R^3 away from the plane `z = 1`; the caller decides
/// whether the point has to lie on the sphere.
pub fn stereographic_chart(p: &[f64]) -> Result<(f64, f64)> {
    let w = 1.0 - p[2];
    if !(w > POLE_GUARD) {
        return Err(Error::Pole);
    }
    Ok((p[0] / w, p[1] / w))
}

pub fn sphere_closest_point(p: &[f64]) -> [f64; 3] {
    let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    [p[0] / norm, p[1] / norm, p[2] / norm]
}

/// Wrap an angle into `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    if (-PI..PI).contains(&a) {
        return a;
    }
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

/// Torus of revolution about the z-axis, tube angle `theta` and azimuth `phi`:
/// `x = (R + r cos(theta)) cos(phi)`, `y = (R + r cos(theta)) sin(phi)`, `z = r sin(theta)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Torus {
    pub major: f64,
    pub minor: f64,
}

impl Torus {
    pub fn new(major: f64, minor: f64) -> Result<Self> {
        if !(minor > 0.0 && major > minor && major.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "torus radii must satisfy R > r > 0, got R = {major}, r = {minor}"
            )));
        }
        Ok(Self { major, minor })
    }

    pub fn embed(&self, theta: f64, phi: f64) -> [f64; 3] {
        let rho = self.major + self.minor * theta.cos();
        [rho * phi.cos(), rho * phi.sin(), self.minor * theta.sin()]
    }

    /// Recover `(theta, phi)` with `theta` in `[-pi, pi)` and `phi` in `[0, 2pi)`.
    pub fn angles(&self, p: &[f64]) -> (f64, f64) {
        let mut phi = p[1].atan2(p[0]);
        if phi < 0.0 {
            phi += TAU;
        }
        if phi >= TAU {
            phi = 0.0;
        }
        let rho = p[0].hypot(p[1]);
        let theta = wrap_angle(p[2].atan2(rho - self.major));
        (theta, phi)
    }

    /// Euclidean distance from `p` to the torus surface.
    pub fn distance(&self, p: &[f64]) -> f64 {
        let rho = p[0].hypot(p[1]);
        ((rho - self.major).hypot(p[2]) - self.minor).abs()
    }

    pub fn closest_point(&self, p: &[f64]) -> [f64; 3] {
        let (theta, phi) = self.angles(p);
        self.embed(theta, phi)
    }
}
