use super::{Domain, Landscape};
use crate::error::{Error, Result};
use crate::manifold::{stereographic_chart, Torus};

/// Points farther than this from the torus are rejected by [`TorusPullback::energy`].
pub const TORUS_TOLERANCE: f64 = 1e-8;

fn require_plane<L: Landscape>(base: &L) -> Result<()> {
    if base.dim() != 2 {
        return Err(Error::InvalidArgument(format!(
            "pullback needs a landscape on R^2, got dimension {}",
            base.dim()
        )));
    }
    Ok(())
}

fn require_ambient(x: &[f64]) -> Result<()> {
    if x.len() != 3 {
        return Err(Error::InvalidArgument(format!("expected a point in R^3, got dimension {}", x.len())));
    }
    Ok(())
}

/// `U(x / (1 - z), y / (1 - z))` on the unit sphere.
///
/// The chart is evaluated for any point off the plane `z = 1`, so the same
/// formula serves as the ambient extension.
#[derive(Clone, Debug)]
pub struct SpherePullback<L> {
    pub base: L,
}

impl<L: Landscape> SpherePullback<L> {
    pub fn new(base: L) -> Result<Self> {
        require_plane(&base)?;
        Ok(Self { base })
    }
}

impl<L: Landscape> Landscape for SpherePullback<L> {
    fn dim(&self) -> usize {
        3
    }
    fn domain(&self) -> Domain {
        Domain::Sphere
    }
    fn energy(&self, p: &[f64]) -> Result<f64> {
        require_ambient(p)?;
        let (x, y) = stereographic_chart(p)?;
        self.base.energy(&[x, y])
    }
    fn gradient(&self, p: &[f64]) -> Result<Vec<f64>> {
        require_ambient(p)?;
        let (x, y) = stereographic_chart(p)?;
        let g = self.base.gradient(&[x, y])?;
        let w = 1.0 - p[2];
        Ok(vec![g[0] / w, g[1] / w, (g[0] * p[0] + g[1] * p[1]) / (w * w)])
    }
}

/// How the torus angles feed the planar landscape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TorusCoordinates {
    /// `U(r theta, R phi)`: the planar landscape measured in arc length.
    Scaled,
    /// `U(theta, phi)`: the landscape is a function of the angles themselves.
    Angles,
}

/// Planar landscape pulled back to the torus through its angle chart.
#[derive(Clone, Debug)]
pub struct TorusPullback<L> {
    pub base: L,
    pub torus: Torus,
    pub coordinates: TorusCoordinates,
}

impl<L: Landscape> TorusPullback<L> {
    pub fn new(base: L, torus: Torus, coordinates: TorusCoordinates) -> Result<Self> {
        require_plane(&base)?;
        Ok(Self {
            base,
            torus,
            coordinates,
        })
    }

    fn chart(&self, p: &[f64]) -> [f64; 2] {
        let (theta, phi) = self.torus.angles(p);
        match self.coordinates {
            TorusCoordinates::Scaled => [self.torus.minor * theta, self.torus.major * phi],
            TorusCoordinates::Angles => [theta, phi],
        }
    }
}

impl<L: Landscape> Landscape for TorusPullback<L> {
    fn dim(&self) -> usize {
        3
    }
    fn domain(&self) -> Domain {
        Domain::Torus
    }
    fn energy(&self, p: &[f64]) -> Result<f64> {
        require_ambient(p)?;
        let distance = self.torus.distance(p);
        if !(distance <= TORUS_TOLERANCE) {
            return Err(Error::OffManifold {
                distance,
                tolerance: TORUS_TOLERANCE,
            });
        }
        self.base.energy(&self.chart(p))
    }
    fn extended_energy(&self, p: &[f64]) -> Result<f64> {
        require_ambient(p)?;
        self.base.energy(&self.chart(p))
    }
    fn gradient(&self, p: &[f64]) -> Result<Vec<f64>> {
        require_ambient(p)?;
        let g = self.base.gradient(&self.chart(p))?;
        let (sx, sy) = match self.coordinates {
            TorusCoordinates::Scaled => (self.torus.minor, self.torus.major),
            TorusCoordinates::Angles => (1.0, 1.0),
        };
        let rho2 = p[0] * p[0] + p[1] * p[1];
        let rho = rho2.sqrt();
        if !(rho > 0.0) {
            return Err(Error::OffManifold {
                distance: self.torus.distance(p),
                tolerance: TORUS_TOLERANCE,
            });
        }
        let s = rho - self.torus.major;
        let d = s * s + p[2] * p[2];
        let dtheta_drho = -p[2] / d;
        let dtheta = [dtheta_drho * p[0] / rho, dtheta_drho * p[1] / rho, s / d];
        let dphi = [-p[1] / rho2, p[0] / rho2, 0.0];
        let (gt, gp) = (sx * g[0], sy * g[1]);
        Ok((0..3).map(|k| gt * dtheta[k] + gp * dphi[k]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::stereographic_lift;
    use crate::pointcloud::{sample_sphere_uniform, sample_torus_uniform, TorusMeasure};
    use crate::potentials::testing::assert_gradient_matches;
    use crate::potentials::Mueller;
    use std::f64::consts::PI;

    fn sphere() -> SpherePullback<Mueller> {
        SpherePullback::new(Mueller::default()).unwrap()
    }

    fn torus() -> TorusPullback<Mueller> {
        TorusPullback::new(Mueller::default(), Torus::new(2.0, 1.0).unwrap(), TorusCoordinates::Scaled).unwrap()
    }

    #[test]
    fn equator_point_matches_plane() {
        let m = Mueller::default();
        assert_eq!(sphere().energy(&[1.0, 0.0, 0.0]).unwrap(), m.energy(&[1.0, 0.0]).unwrap());
    }

    #[test]
    fn lift_then_pullback_is_identity() {
        let m = Mueller::default();
        let s = sphere();
        for (x, y) in [(-0.558, 1.44), (0.62, 0.03), (-1.4, -0.1), (0.0, 0.0), (1.1, 1.9)] {
            let u = s.energy(&stereographic_lift(x, y)).unwrap();
            let expected = m.energy(&[x, y]).unwrap();
            assert!((u - expected).abs() <= 1e-12 * expected.abs().max(1.0), "({x},{y})");
        }
    }

    #[test]
    fn north_pole_is_rejected() {
        assert!(matches!(sphere().energy(&[0.0, 0.0, 1.0 - 1e-16]), Err(Error::Pole)));
        assert!(matches!(sphere().energy(&[0.0, 0.0, 1.0]), Err(Error::Pole)));
    }

    #[test]
    fn torus_angle_origin() {
        let m = Mueller::default();
        assert_eq!(torus().energy(&[3.0, 0.0, 0.0]).unwrap(), m.energy(&[0.0, 0.0]).unwrap());
    }

    #[test]
    fn torus_embed_then_pullback() {
        let m = Mueller::default();
        let t = torus();
        for (theta, phi) in [(0.3, 0.2), (-1.0, 0.4), (-PI, 0.1), (2.5, 6.0), (-0.4, 0.9)] {
            let u = t.energy(&t.torus.embed(theta, phi)).unwrap();
            let expected = m.energy(&[theta, 2.0 * phi]).unwrap();
            assert!((u - expected).abs() <= 1e-12 * expected.abs().max(1.0), "({theta},{phi}) {u} {expected}");
        }
    }

    #[test]
    fn off_torus_is_rejected() {
        assert!(matches!(torus().energy(&[0.0, 0.0, 0.0]), Err(Error::OffManifold { .. })));
        assert!(torus().energy(&[3.0 + 1e-6, 0.0, 0.0]).is_err());
    }

    #[test]
    fn sphere_gradient_matches_finite_differences() {
        let cloud = sample_sphere_uniform(400, 8).unwrap();
        let pts: Vec<Vec<f64>> = cloud.points().filter(|p| p[2] < 0.6).take(100).map(|p| p.to_vec()).collect();
        assert_gradient_matches(&sphere(), &pts);
    }

    #[test]
    fn torus_gradient_matches_finite_differences() {
        let t = torus();
        let cloud = sample_torus_uniform(300, t.torus, TorusMeasure::SurfaceArea, 4).unwrap();
        let pts: Vec<Vec<f64>> = cloud
            .points()
            .filter(|p| {
                let (_, phi) = t.torus.angles(p);
                phi > 0.05 && phi < 2.0 * PI - 0.05
            })
            .take(100)
            .map(|p| p.to_vec())
            .collect();
        assert_gradient_matches(&t, &pts);
    }
}
