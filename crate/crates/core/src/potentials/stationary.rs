use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{Landscape, Mueller};
use crate::error::{Error, Result};
use crate::manifold::{stereographic_lift, Torus};

const GRADIENT_TOL: f64 = 1e-10;
const MAX_NEWTON: usize = 100;
const MAX_STEP: f64 = 0.1;
const DEDUP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StationaryKind {
    Minimum,
    Saddle,
    Maximum,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StationaryPoint {
    pub location: Vec<f64>,
    pub kind: StationaryKind,
    pub energy: f64,
    pub gradient_norm: f64,
    /// Hessian eigenvalues, ascending.
    pub curvatures: Vec<f64>,
}

impl StationaryPoint {
    pub fn lift_to_sphere(&self) -> [f64; 3] {
        stereographic_lift(self.location[0], self.location[1])
    }

    /// Lift through the scaled torus chart `(X, Y) = (r theta, R phi)`.
    pub fn lift_to_torus(&self, torus: &Torus) -> [f64; 3] {
        torus.embed(self.location[0] / torus.minor, self.location[1] / torus.major)
    }
}

#[derive(Clone, Debug, Default)]
pub struct StationarySearch {
    /// Distinct stationary points, sorted by energy.
    pub points: Vec<StationaryPoint>,
    /// Starts from which Newton failed, with the reason.
    pub failed: Vec<(Vec<f64>, String)>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn newton<L: Landscape + ?Sized>(landscape: &L, start: &[f64]) -> std::result::Result<StationaryPoint, String> {
    let n = start.len();
    let mut x = start.to_vec();
    for _ in 0..MAX_NEWTON {
        let g = landscape.gradient(&x).map_err(|e| e.to_string())?;
        let gn = norm(&g);
        if !gn.is_finite() {
            return Err("non-finite gradient".into());
        }
        let h = landscape.hessian(&x).map_err(|e| e.to_string())?;
        let hm = DMatrix::from_fn(n, n, |r, c| h[r][c]);
        if gn < GRADIENT_TOL {
            let eig = SymmetricEigen::new(hm);
            let mut curv: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            curv.sort_by(f64::total_cmp);
            let scale = curv.iter().fold(0.0f64, |m, c| m.max(c.abs()));
            if curv.iter().any(|c| c.abs() <= 1e-8 * scale.max(1.0)) {
                return Err(format!("degenerate Hessian at {x:?}"));
            }
            let negative = curv.iter().filter(|c| **c < 0.0).count();
            let kind = match negative {
                0 => StationaryKind::Minimum,
                k if k == n => StationaryKind::Maximum,
                1 => StationaryKind::Saddle,
                k => return Err(format!("saddle of index {k} at {x:?}")),
            };
            let energy = landscape.energy(&x).map_err(|e| e.to_string())?;
            return Ok(StationaryPoint {
                location: x,
                kind,
                energy,
                gradient_norm: gn,
                curvatures: curv,
            });
        }
        let Some(step) = hm.lu().solve(&DVector::from_column_slice(&g)) else {
            return Err(format!("singular Hessian at {x:?}"));
        };
        let len = step.norm();
        let scale = if len > MAX_STEP { MAX_STEP / len } else { 1.0 };
        for k in 0..n {
            x[k] -= scale * step[k];
        }
    }
    Err(format!("no convergence in {MAX_NEWTON} Newton steps"))
}

/// Newton's method on `grad U = 0` from each start; results within `1e-6`
/// of one another are merged.
pub fn find_stationary_points<L: Landscape + ?Sized>(landscape: &L, starts: &[Vec<f64>]) -> Result<StationarySearch> {
    if let Some(s) = starts.iter().find(|s| s.len() != landscape.dim()) {
        return Err(Error::InvalidArgument(format!(
            "start {s:?} does not match landscape dimension {}",
            landscape.dim()
        )));
    }
    let mut search = StationarySearch::default();
    for start in starts {
        match newton(landscape, start) {
            Ok(p) => {
                let duplicate = search
                    .points
                    .iter()
                    .any(|q| q.location.iter().zip(&p.location).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() < DEDUP);
                if !duplicate {
                    search.points.push(p);
                }
            }
            Err(reason) => search.failed.push((start.clone(), reason)),
        }
    }
    search.points.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(search)
}

/// The five stationary points of the Mueller potential in
/// `[-1.5, 1.2] x [-0.2, 2.0]`, located by multi-start Newton.
///
/// `X1` is the deepest minimum, `X3` the second deepest and `X2` the shallow
/// intermediate one; `X4` is the higher saddle (between `X1` and `X2`) and
/// `X5` the lower (between `X2` and `X3`).
#[derive(Clone, Debug)]
pub struct MuellerLandmarks {
    pub points: [StationaryPoint; 5],
}

impl MuellerLandmarks {
    /// Landmark `X_k` for `k` in `1..=5`.
    pub fn x(&self, k: usize) -> &StationaryPoint {
        &self.points[k - 1]
    }

    pub fn minima(&self) -> [&StationaryPoint; 3] {
        [self.x(1), self.x(2), self.x(3)]
    }

    pub fn saddles(&self) -> [&StationaryPoint; 2] {
        [self.x(4), self.x(5)]
    }
}

pub const MUELLER_BOX: ([f64; 2], [f64; 2]) = ([-1.5, 1.2], [-0.2, 2.0]);

pub fn mueller_landmarks(mueller: &Mueller) -> Result<MuellerLandmarks> {
    let ([x0, x1], [y0, y1]) = MUELLER_BOX;
    let m = 30;
    let starts: Vec<Vec<f64>> = (0..m)
        .flat_map(|i| (0..m).map(move |j| vec![x0 + (x1 - x0) * (i as f64 + 0.5) / m as f64, y0 + (y1 - y0) * (j as f64 + 0.5) / m as f64]))
        .collect();
    let found = find_stationary_points(mueller, &starts)?;
    let inside: Vec<StationaryPoint> = found
        .points
        .into_iter()
        .filter(|p| p.location[0] >= x0 && p.location[0] <= x1 && p.location[1] >= y0 && p.location[1] <= y1)
        .collect();
    let mut minima: Vec<_> = inside.iter().filter(|p| p.kind == StationaryKind::Minimum).cloned().collect();
    let mut saddles: Vec<_> = inside.iter().filter(|p| p.kind == StationaryKind::Saddle).cloned().collect();
    if minima.len() != 3 || saddles.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "expected 3 minima and 2 saddles, found {} and {}",
            minima.len(),
            saddles.len()
        )));
    }
    minima.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    saddles.sort_by(|a, b| b.energy.total_cmp(&a.energy));
    let [deep, middle, shallow]: [StationaryPoint; 3] = minima.try_into().unwrap();
    let [high, low]: [StationaryPoint; 2] = saddles.try_into().unwrap();
    Ok(MuellerLandmarks {
        points: [deep, shallow, middle, high, low],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::Domain;

    struct Bowl;

    impl Landscape for Bowl {
        fn dim(&self) -> usize {
            2
        }
        fn domain(&self) -> Domain {
            Domain::Plane
        }
        fn energy(&self, x: &[f64]) -> Result<f64> {
            Ok(0.5 * (x[0] * x[0] + x[1] * x[1]))
        }
        fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
            Ok(x.to_vec())
        }
    }

    #[test]
    fn bowl_has_single_minimum() {
        let starts = vec![vec![1.0, 2.0], vec![-3.0, 0.5], vec![0.01, -0.02]];
        let s = find_stationary_points(&Bowl, &starts).unwrap();
        assert_eq!(s.points.len(), 1);
        assert_eq!(s.points[0].kind, StationaryKind::Minimum);
        assert!(s.points[0].location.iter().all(|x| x.abs() < 1e-10));
    }

    #[test]
    fn mueller_has_three_minima_and_two_saddles() {
        let m = Mueller::default();
        let lm = mueller_landmarks(&m).unwrap();
        for p in &lm.points {
            let g = m.gradient(&p.location).unwrap();
            assert!(norm(&g) < 1e-8);
        }
        assert!(lm.minima().iter().all(|p| p.kind == StationaryKind::Minimum && p.curvatures[0] > 0.0));
        assert!(lm.saddles().iter().all(|p| p.kind == StationaryKind::Saddle && p.curvatures[0] < 0.0 && p.curvatures[1] > 0.0));
        assert!(lm.x(1).energy < lm.x(3).energy && lm.x(3).energy < lm.x(2).energy);
        assert!(lm.x(5).energy < lm.x(4).energy);
        // X4 sits between the deep well and the shallow one.
        assert!(lm.x(4).location[1] > lm.x(2).location[1] && lm.x(4).location[1] < lm.x(1).location[1]);
        // X5 sits between the shallow well and the right-hand one.
        assert!(lm.x(5).location[0] > lm.x(2).location[0] && lm.x(5).location[0] < lm.x(3).location[0]);
    }

    #[test]
    fn lifts_land_on_manifolds() {
        let lm = mueller_landmarks(&Mueller::default()).unwrap();
        let t = Torus::new(2.0, 1.0).unwrap();
        for p in &lm.points {
            let s = p.lift_to_sphere();
            assert!(((s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt() - 1.0).abs() < 1e-12);
            assert!(t.distance(&p.lift_to_torus(&t)) < 1e-12);
        }
    }
}
