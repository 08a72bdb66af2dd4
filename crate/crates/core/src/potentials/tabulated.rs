use std::f64::consts::{PI, TAU};
use std::fs;
use std::path::Path;

use super::{Domain, Landscape};
use crate::error::{read_text, Error, Result};
use crate::manifold::wrap_angle;

/// Periodic bilinear interpolant of values on the grid
/// `phi_k = -pi + 2 pi k / nphi`, `psi_l = -pi + 2 pi l / npsi`.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedLandscape {
    nphi: usize,
    npsi: usize,
    /// `values[k * npsi + l]` is `U(phi_k, psi_l)`.
    values: Vec<f64>,
}

impl TabulatedLandscape {
    pub fn new(nphi: usize, npsi: usize, values: Vec<f64>) -> Result<Self> {
        if nphi < 2 || npsi < 2 {
            return Err(Error::InvalidArgument(format!("grid must be at least 2x2, got {nphi}x{npsi}")));
        }
        if values.len() != nphi * npsi {
            return Err(Error::InvalidArgument(format!(
                "{nphi}x{npsi} grid needs {} values, got {}",
                nphi * npsi,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEnergy(i));
        }
        Ok(Self { nphi, npsi, values })
    }

    /// Tabulate `f` at the grid nodes.
    pub fn from_fn(nphi: usize, npsi: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(nphi * npsi);
        for k in 0..nphi {
            for l in 0..npsi {
                values.push(f(node(k, nphi), node(l, npsi)));
            }
        }
        Self::new(nphi, npsi, values)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nphi, self.npsi)
    }

    pub fn node_value(&self, k: usize, l: usize) -> f64 {
        self.values[k * self.npsi + l]
    }

    fn at(&self, k: usize, l: usize) -> f64 {
        self.values[(k % self.nphi) * self.npsi + (l % self.npsi)]
    }

    fn locate(x: f64, n: usize) -> (usize, f64, f64) {
        let h = TAU / n as f64;
        let u = (wrap_angle(x) + PI) / h;
        let k = (u.floor() as usize).min(n - 1);
        (k, u - k as f64, h)
    }

    fn eval(&self, phi: f64, psi: f64) -> (f64, [f64; 2]) {
        let (k, f, hk) = Self::locate(phi, self.nphi);
        let (l, g, hl) = Self::locate(psi, self.npsi);
        let v00 = self.at(k, l);
        let v10 = self.at(k + 1, l);
        let v01 = self.at(k, l + 1);
        let v11 = self.at(k + 1, l + 1);
        let u = (1.0 - f) * (1.0 - g) * v00 + f * (1.0 - g) * v10 + (1.0 - f) * g * v01 + f * g * v11;
        let du = ((1.0 - g) * (v10 - v00) + g * (v11 - v01)) / hk;
        let dv = ((1.0 - f) * (v01 - v00) + f * (v11 - v10)) / hl;
        (u, [du, dv])
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = format!("nphi,npsi\n{},{}\nphi,psi,U\n", self.nphi, self.npsi);
        for k in 0..self.nphi {
            for l in 0..self.npsi {
                out.push_str(&format!("{},{},{}\n", node(k, self.nphi), node(l, self.npsi), self.node_value(k, l)));
            }
        }
        fs::write(path, out)?;
        Ok(())
    }
}

fn node(k: usize, n: usize) -> f64 {
    -PI + TAU * k as f64 / n as f64
}

/// Read a grid file: `nphi,npsi` header and sizes, then `phi,psi,U` rows
/// that must hit every node exactly once.
pub fn load_tabulated(path: &Path) -> Result<TabulatedLandscape> {
    let text = read_text(path)?;
    parse_tabulated(&text, &path.display().to_string())
}

pub(crate) fn parse_tabulated(text: &str, source_name: &str) -> Result<TabulatedLandscape> {
    let err = |row: usize, message: String| Error::Parse {
        source_name: source_name.to_string(),
        row,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let mut next = || lines.next();
    let (mut row, mut line) = next().ok_or_else(|| err(1, "empty file".into()))?;
    if line.eq_ignore_ascii_case("nphi,npsi") {
        (row, line) = next().ok_or_else(|| err(row + 1, "missing grid size".into()))?;
    }
    let sizes: Vec<usize> = line
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| err(row, format!("expected grid size nphi,npsi, found {line:?}")))?;
    let [nphi, npsi] = sizes[..] else {
        return Err(err(row, format!("expected grid size nphi,npsi, found {line:?}")));
    };
    if nphi < 2 || npsi < 2 {
        return Err(err(row, format!("grid must be at least 2x2, got {nphi}x{npsi}")));
    }
    let mut values = vec![f64::NAN; nphi * npsi];
    let mut seen = vec![false; nphi * npsi];
    for (row, line) in lines {
        if line.eq_ignore_ascii_case("phi,psi,U") {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| err(row, format!("cannot parse {line:?}")))?;
        let [phi, psi, u] = fields[..] else {
            return Err(Error::DimensionMismatch {
                source_name: source_name.to_string(),
                row,
                expected: 3,
                found: fields.len(),
            });
        };
        if !(phi.is_finite() && psi.is_finite() && u.is_finite()) {
            return Err(err(row, "non-finite value".into()));
        }
        let snap = |x: f64, n: usize| -> Option<usize> {
            let u = (wrap_angle(x) + PI) * n as f64 / TAU;
            let k = u.round();
            ((u - k).abs() < 1e-6).then_some(k as usize % n)
        };
        let (Some(k), Some(l)) = (snap(phi, nphi), snap(psi, npsi)) else {
            return Err(err(row, format!("({phi}, {psi}) is not a node of the {nphi}x{npsi} grid")));
        };
        let idx = k * npsi + l;
        if seen[idx] {
            return Err(err(row, format!("node ({phi}, {psi}) listed twice")));
        }
        seen[idx] = true;
        values[idx] = u;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(err(
            0,
            format!(
                "grid does not cover [-pi, pi)^2: node ({}, {}) missing",
                node(missing / npsi, nphi),
                node(missing % npsi, npsi)
            ),
        ));
    }
    TabulatedLandscape::new(nphi, npsi, values)
}

impl Landscape for TabulatedLandscape {
    fn dim(&self) -> usize {
        2
    }
    fn domain(&self) -> Domain {
        Domain::Grid
    }
    fn energy(&self, x: &[f64]) -> Result<f64> {
        let [phi, psi] = x else {
            return Err(Error::InvalidArgument(format!("expected (phi, psi), got dimension {}", x.len())));
        };
        Ok(self.eval(*phi, *psi).0)
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let [phi, psi] = x else {
            return Err(Error::InvalidArgument(format!("expected (phi, psi), got dimension {}", x.len())));
        };
        Ok(self.eval(*phi, *psi).1.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::testing::assert_gradient_matches;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample() -> TabulatedLandscape {
        TabulatedLandscape::from_fn(36, 24, |a, b| a.cos() + 0.5 * (2.0 * b).sin() + 0.3 * (a - b).cos()).unwrap()
    }

    #[test]
    fn reproduces_nodes_and_is_periodic() {
        let t = sample();
        assert!((t.energy(&[node(3, 36), node(5, 24)]).unwrap() - t.node_value(3, 5)).abs() < 1e-12);
        let a = t.energy(&[0.3, -2.0]).unwrap();
        let b = t.energy(&[0.3 + TAU, -2.0 - TAU]).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!((t.energy(&[PI, 0.0]).unwrap() - t.energy(&[-PI, 0.0]).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn bilinear_is_exact_for_bilinear_data() {
        let t = TabulatedLandscape::from_fn(4, 4, |a, b| if a < 0.0 && b < 0.0 { 2.0 + a + 3.0 * b + a * b } else { 0.0 }).unwrap();
        let (a, b) = (-PI + 0.4, -PI + 0.9);
        assert!((t.energy(&[a, b]).unwrap() - (2.0 + a + 3.0 * b + a * b)).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_inside_cells() {
        let t = sample();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = TAU / 36.0;
        let pts: Vec<Vec<f64>> = (0..100)
            .map(|_| {
                let k = rng.random_range(0..36) as f64;
                let l = rng.random_range(0..24) as f64;
                vec![-PI + h * (k + rng.random_range(0.1..0.9)), -PI + TAU / 24.0 * (l + rng.random_range(0.1..0.9))]
            })
            .collect();
        assert_gradient_matches(&t, &pts);
    }

    #[test]
    fn file_round_trip_and_coverage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.csv");
        let t = sample();
        t.save(&path).unwrap();
        assert_eq!(load_tabulated(&path).unwrap(), t);

        let text = fs::read_to_string(&path).unwrap();
        let truncated: String = text.lines().take(text.lines().count() - 1).map(|l| format!("{l}\n")).collect();
        let e = parse_tabulated(&truncated, "grid").unwrap_err();
        assert!(e.to_string().contains("does not cover"), "{e}");
        assert!(parse_tabulated("3,3\n0.1,0.2,1\n", "g").is_err());
    }
}
