//! Alanine dipeptide workload: dihedral time series, embedding on the torus,
//! transition-region enrichment and sparsification.
//!
//! No molecular dynamics data ships with the crate. [`synthetic_alanine`]
//! produces a stand-in: a periodic free-energy surface with three basins
//! placed where the C_ax, C_7eq and C'_7eq isomers sit on the Ramachandran
//! plot, and an overdamped Langevin trajectory on it.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{read_text, Error, Result};
use crate::manifold::{wrap_angle, Torus};
use crate::pointcloud::PointCloud;
use crate::potentials::{find_stationary_points, Domain, Landscape, StationaryKind, TabulatedLandscape, TorusCoordinates, TorusPullback};

pub const MAJOR_RADIUS: f64 = 2.0;
pub const MINOR_RADIUS: f64 = 1.0;
pub const ENRICHMENT_WINDOW: usize = 10;

/// Equidistant `(t, phi, psi)` samples with angles in `[-pi, pi)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DihedralSeries {
    t: Vec<f64>,
    phi: Vec<f64>,
    psi: Vec<f64>,
}

impl DihedralSeries {
    /// Angles are wrapped; times must be strictly increasing with constant spacing.
    pub fn new(t: Vec<f64>, phi: Vec<f64>, psi: Vec<f64>) -> Result<Self> {
        if t.is_empty() || t.len() != phi.len() || t.len() != psi.len() {
            return Err(Error::InvalidArgument(format!(
                "dihedral series needs equal nonempty columns, got {}, {}, {}",
                t.len(),
                phi.len(),
                psi.len()
            )));
        }
        if let Some(i) = (0..t.len()).find(|&i| !(t[i].is_finite() && phi[i].is_finite() && psi[i].is_finite())) {
            return Err(Error::InvalidArgument(format!("non-finite value in dihedral row {i}")));
        }
        if t.len() > 1 {
            let h = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
            if !(h > 0.0) {
                return Err(Error::InvalidArgument("dihedral times must increase".into()));
            }
            if let Some(i) = t.windows(2).position(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h) {
                return Err(Error::InvalidArgument(format!(
                    "dihedral times are not equidistant at row {}: step {} against {h}",
                    i + 1,
                    t[i + 1] - t[i]
                )));
            }
        }
        let phi = phi.into_iter().map(wrap_angle).collect();
        let psi = psi.into_iter().map(wrap_angle).collect();
        Ok(Self { t, phi, psi })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn angles(&self, i: usize) -> (f64, f64) {
        (self.phi[i], self.psi[i])
    }

    /// Writes `t,phi,psi`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::from("t,phi,psi\n");
        for i in 0..self.len() {
            writeln!(out, "{},{},{}", self.t[i], self.phi[i], self.psi[i]).unwrap();
        }
        fs::write(path, out)?;
        Ok(())
    }
}

/// Reads `t,phi,psi` rows; the header line is optional.
pub fn load_dihedrals(path: &Path) -> Result<DihedralSeries> {
    let text = read_text(path)?;
    let name = path.display().to_string();
    let (mut t, mut phi, mut psi) = (Vec::new(), Vec::new(), Vec::new());
    for (row, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (row == 0 && line.starts_with(|c: char| c.is_ascii_alphabetic())) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::DimensionMismatch {
                source_name: name,
                row: row + 1,
                expected: 3,
                found: fields.len(),
            });
        }
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|e| Error::Parse {
                source_name: name.clone(),
                row: row + 1,
                message: format!("{s:?}: {e}"),
            })
        };
        t.push(parse(fields[0])?);
        phi.push(parse(fields[1])?);
        psi.push(parse(fields[2])?);
    }
    DihedralSeries::new(t, phi, psi)
}

/// `phi` runs around the tube and `psi` around the axis, so `z = r sin(phi)`.
pub fn embed_dihedrals(torus: &Torus, phi: f64, psi: f64) -> [f64; 3] {
    torus.embed(phi, psi)
}

pub fn alanine_torus() -> Torus {
    Torus::new(MAJOR_RADIUS, MINOR_RADIUS).expect("valid radii")
}

pub type AlanineLandscape = TorusPullback<TabulatedLandscape>;

#[derive(Clone, Debug)]
pub struct AlanineData {
    pub cloud: PointCloud,
    pub landscape: AlanineLandscape,
    /// Input rows dropped because they embed onto an earlier row.
    pub duplicates: usize,
}

/// Embed `(phi, psi)` pairs on the torus, dropping repeats, and pull the
/// free-energy grid back to it.
pub fn ingest_alanine(angles: &[(f64, f64)], grid: TabulatedLandscape, torus: Torus) -> Result<AlanineData> {
    let mut seen = BTreeSet::new();
    let mut points = Vec::with_capacity(angles.len());
    for &(phi, psi) in angles {
        let (phi, psi) = (wrap_angle(phi), wrap_angle(psi));
        assert!((-PI..PI).contains(&phi) && (-PI..PI).contains(&psi));
        let p = embed_dihedrals(&torus, phi, psi);
        if seen.insert(p.map(f64::to_bits)) {
            points.push(p.to_vec());
        }
    }
    let duplicates = angles.len() - points.len();
    let cloud = PointCloud::new(&points, 2)?;
    let landscape = TorusPullback::new(grid, torus, TorusCoordinates::Angles)?;
    Ok(AlanineData {
        cloud,
        landscape,
        duplicates,
    })
}

/// Indices `j` with `z_j > 0` and `z_{j+1} < 0`.
pub fn crossing_indices(series: &DihedralSeries) -> Vec<usize> {
    (0..series.len().saturating_sub(1))
        .filter(|&j| series.phi[j].sin() > 0.0 && series.phi[j + 1].sin() < 0.0)
        .collect()
}

/// Frames `j - window ..= j` and `j ..= j + window` around every crossing, as index sets.
pub fn transition_windows(series: &DihedralSeries, window: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let crossings = crossing_indices(series);
    if crossings.is_empty() {
        return Err(Error::NoCrossings);
    }
    let last = series.len() - 1;
    let mut plus = BTreeSet::new();
    let mut minus = BTreeSet::new();
    for j in crossings {
        plus.extend(j.saturating_sub(window)..=j);
        minus.extend(j..=(j + window).min(last));
    }
    Ok((plus.into_iter().collect(), minus.into_iter().collect()))
}

/// Component-wise convex combination `beta * plus + (1 - beta) * minus`.
pub fn auxiliary_sample(plus: (f64, f64), minus: (f64, f64), beta1: f64, beta2: f64) -> (f64, f64) {
    (
        wrap_angle(beta1 * plus.0 + (1.0 - beta1) * minus.0),
        wrap_angle(beta2 * plus.1 + (1.0 - beta2) * minus.1),
    )
}

/// `n_aux` auxiliary samples from random pairs of frames on either side of the crossings.
pub fn enrich_transition_region(series: &DihedralSeries, window: usize, n_aux: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    let (plus, minus) = transition_windows(series, window)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n_aux)
        .map(|_| {
            let p = plus[rng.random_range(0..plus.len())];
            let m = minus[rng.random_range(0..minus.len())];
            let (b1, b2) = (rng.random::<f64>(), rng.random::<f64>());
            auxiliary_sample(series.angles(p), series.angles(m), b1, b2)
        })
        .collect())
}

/// Sorted uniform random subset of `0..len` of size `batch`, without replacement.
pub fn sparsify(len: usize, batch: usize, seed: u64) -> Result<Vec<usize>> {
    if batch > len {
        return Err(Error::InvalidArgument(format!("batch {batch} exceeds series length {len}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, len, batch).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// One basin of the synthetic surface: a periodic well of the given depth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Basin {
    pub name: &'static str,
    pub phi: f64,
    pub psi: f64,
    pub depth: f64,
    pub kappa_phi: f64,
    pub kappa_psi: f64,
}

/// Sum of von Mises wells on the flat torus `[-pi, pi)^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct RamachandranModel {
    pub basins: Vec<Basin>,
}

impl Default for RamachandranModel {
    fn default() -> Self {
        Self {
            basins: vec![
                Basin { name: "C_ax", phi: 1.22, psi: -1.22, depth: 7.0, kappa_phi: 2.5, kappa_psi: 2.0 },
                Basin { name: "C_7eq", phi: -1.45, psi: 1.25, depth: 9.0, kappa_phi: 2.0, kappa_psi: 1.5 },
                Basin { name: "C'_7eq", phi: -2.6, psi: 2.8, depth: 8.5, kappa_phi: 2.0, kappa_psi: 2.0 },
            ],
        }
    }
}

impl RamachandranModel {
    fn eval(&self, phi: f64, psi: f64) -> (f64, [f64; 2]) {
        let mut u = 0.0;
        let mut g = [0.0; 2];
        for b in &self.basins {
            let w = b.depth * (b.kappa_phi * ((phi - b.phi).cos() - 1.0) + b.kappa_psi * ((psi - b.psi).cos() - 1.0)).exp();
            u -= w;
            g[0] -= w * (-b.kappa_phi * (phi - b.phi).sin());
            g[1] -= w * (-b.kappa_psi * (psi - b.psi).sin());
        }
        (u, g)
    }

    pub fn tabulate(&self, nphi: usize, npsi: usize) -> Result<TabulatedLandscape> {
        TabulatedLandscape::from_fn(nphi, npsi, |phi, psi| self.eval(phi, psi).0)
    }

    /// Local minima near each basin centre, in basin order.
    pub fn minima(&self) -> Result<Vec<[f64; 2]>> {
        self.basins
            .iter()
            .map(|b| {
                let found = find_stationary_points(self, &[vec![b.phi, b.psi]])?;
                found
                    .points
                    .into_iter()
                    .find(|p| p.kind == StationaryKind::Minimum)
                    .map(|p| [wrap_angle(p.location[0]), wrap_angle(p.location[1])])
                    .ok_or_else(|| Error::InvalidArgument(format!("no minimum found near {}", b.name)))
            })
            .collect()
    }

    pub fn basin(&self, name: &str) -> Option<usize> {
        self.basins.iter().position(|b| b.name == name)
    }

    /// Overdamped Langevin dynamics `d theta = -grad U dt + sqrt(2 kT) dW`,
    /// recorded every `stride` steps.
    pub fn simulate(&self, start: [f64; 2], frames: usize, dt: f64, stride: usize, kt: f64, seed: u64) -> Result<DihedralSeries> {
        if frames == 0 || stride == 0 || !(dt > 0.0 && kt > 0.0) {
            return Err(Error::InvalidArgument("simulation needs positive frames, stride, dt and kT".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = (2.0 * kt * dt).sqrt();
        let (mut phi, mut psi) = (start[0], start[1]);
        let (mut t, mut ph, mut ps) = (Vec::with_capacity(frames), Vec::with_capacity(frames), Vec::with_capacity(frames));
        for frame in 0..frames {
            t.push(frame as f64 * dt * stride as f64);
            ph.push(wrap_angle(phi));
            ps.push(wrap_angle(psi));
            for _ in 0..stride {
                let (_, g) = self.eval(phi, psi);
                let (n1, n2): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
                phi = wrap_angle(phi - g[0] * dt + noise * n1);
                psi = wrap_angle(psi - g[1] * dt + noise * n2);
            }
        }
        DihedralSeries::new(t, ph, ps)
    }
}

impl Landscape for RamachandranModel {
    fn dim(&self) -> usize {
        2
    }
    fn domain(&self) -> Domain {
        Domain::Grid
    }
    fn energy(&self, p: &[f64]) -> Result<f64> {
        Ok(self.eval(p[0], p[1]).0)
    }
    fn gradient(&self, p: &[f64]) -> Result<Vec<f64>> {
        Ok(self.eval(p[0], p[1]).1.to_vec())
    }
}

pub const SYNTHETIC_FRAMES: usize = 50_000;
pub const SYNTHETIC_GRID: usize = 90;
const SYNTHETIC_DT: f64 = 1e-3;
const SYNTHETIC_STRIDE: usize = 200;
const SYNTHETIC_KT: f64 = 1.0;

/// Stand-in for the MD workload: a 50,000-frame series started in C_7eq and
/// the tabulated free energy it was drawn from.
pub fn synthetic_alanine(seed: u64) -> Result<(DihedralSeries, TabulatedLandscape, RamachandranModel)> {
    let model = RamachandranModel::default();
    let start = model.minima()?[1];
    let series = model.simulate(start, SYNTHETIC_FRAMES, SYNTHETIC_DT, SYNTHETIC_STRIDE, SYNTHETIC_KT, seed)?;
    let grid = model.tabulate(SYNTHETIC_GRID, SYNTHETIC_GRID)?;
    Ok((series, grid, model))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(phi: Vec<f64>) -> DihedralSeries {
        let n = phi.len();
        DihedralSeries::new((0..n).map(|i| i as f64 * 0.5).collect(), phi, vec![0.0; n]).unwrap()
    }

    #[test]
    fn series_validation_and_wrapping() {
        assert!(DihedralSeries::new(vec![0.0, 1.0, 2.5], vec![0.0; 3], vec![0.0; 3]).is_err());
        assert!(DihedralSeries::new(vec![0.0, 0.0], vec![0.0; 2], vec![0.0; 2]).is_err());
        assert!(DihedralSeries::new(vec![], vec![], vec![]).is_err());
        let s = DihedralSeries::new(vec![0.0, 0.1, 0.2], vec![PI, 4.0, -7.0], vec![-PI, 0.5, 10.0]).unwrap();
        assert!(s.phi().iter().chain(s.psi()).all(|a| (-PI..PI).contains(a)));
        assert_eq!(s.phi()[0], -PI);
    }

    #[test]
    fn series_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = DihedralSeries::new(vec![1.0, 1.25, 1.5], vec![0.3, -2.0, 3.0], vec![-0.1, 0.2, 1e-7]).unwrap();
        let path = dir.path().join("dihedrals.csv");
        s.save(&path).unwrap();
        assert_eq!(load_dihedrals(&path).unwrap(), s);
        fs::write(&path, "t,phi,psi\n0,1,2\n1,x,3\n").unwrap();
        assert!(matches!(load_dihedrals(&path), Err(Error::Parse { row: 3, .. })));
    }

    #[test]
    fn embedding_examples() {
        let torus = alanine_torus();
        assert_eq!(embed_dihedrals(&torus, 0.0, 0.0), [3.0, 0.0, 0.0]);
        for &(phi, psi) in &[(0.3, -2.9), (-3.1, 0.01), (2.0, 3.0), (-PI, -PI)] {
            let p = embed_dihedrals(&torus, phi, psi);
            let (a, b) = torus.angles(&p);
            assert!((a - phi).abs() < 1e-12 && (wrap_angle(b) - psi).abs() < 1e-12);
        }
    }

    #[test]
    fn ingestion_drops_duplicates() {
        let grid = RamachandranModel::default().tabulate(24, 24).unwrap();
        let angles = vec![(0.1, 0.2), (-PI, 0.2), (0.5, -1.0), (0.1, 0.2), (PI, 0.2), (1.0, 1.0)];
        let data = ingest_alanine(&angles, grid, alanine_torus()).unwrap();
        assert_eq!(data.cloud.len(), 4);
        assert_eq!(data.duplicates, 2);
        let u = data.landscape.energy(data.cloud.point(0)).unwrap();
        assert!(u.is_finite());
    }

    #[test]
    fn crossings_and_windows() {
        let s = series(vec![0.5, 0.4, -0.1, -0.5, 3.0, -3.0, -1.0]);
        assert_eq!(crossing_indices(&s), vec![1, 4]);
        let (plus, minus) = transition_windows(&s, 1).unwrap();
        assert_eq!(plus, vec![0, 1, 3, 4]);
        assert_eq!(minus, vec![1, 2, 4, 5]);
        let (plus, minus) = transition_windows(&s, 10).unwrap();
        assert_eq!(plus, (0..=4).collect::<Vec<_>>());
        assert_eq!(minus, (1..=6).collect::<Vec<_>>());
        assert!(matches!(transition_windows(&series(vec![-0.5, -1.0, 0.5]), 10), Err(Error::NoCrossings)));
        assert!(enrich_transition_region(&series(vec![0.5, 0.6]), 10, 5, 1).is_err());
    }

    #[test]
    fn forced_betas_reproduce_endpoints() {
        let (p, m) = ((0.7, -2.0), (-0.4, 1.5));
        assert_eq!(auxiliary_sample(p, m, 0.0, 0.0), m);
        assert_eq!(auxiliary_sample(p, m, 1.0, 1.0), p);
        let (a, b) = auxiliary_sample(p, m, 0.5, 0.25);
        assert!((a - 0.15).abs() < 1e-15 && (b - 0.625).abs() < 1e-15);
    }

    #[test]
    fn enrichment_is_seeded_and_bounded() {
        let s = series(vec![1.0, 0.8, 0.3, -0.2, -0.9, -1.2, 0.4, -0.3]);
        let a = enrich_transition_region(&s, 2, 50, 9).unwrap();
        assert_eq!(a, enrich_transition_region(&s, 2, 50, 9).unwrap());
        assert_ne!(a, enrich_transition_region(&s, 2, 50, 10).unwrap());
        assert_eq!(a.len(), 50);
        // Every sample is a component-wise combination of window members.
        let (lo, hi) = (-1.2, 1.0);
        assert!(a.iter().all(|&(phi, psi)| (lo..=hi).contains(&phi) && psi == 0.0));
    }

    #[test]
    fn sparsify_examples() {
        let all = sparsify(37, 37, 4).unwrap();
        assert_eq!(all, (0..37).collect::<Vec<_>>());
        let s = sparsify(50_000, 4000, 1).unwrap();
        assert_eq!(s.len(), 4000);
        assert!(s.windows(2).all(|w| w[0] < w[1]) && *s.last().unwrap() < 50_000);
        assert_eq!(s, sparsify(50_000, 4000, 1).unwrap());
        assert_ne!(s, sparsify(50_000, 4000, 2).unwrap());
        assert!(sparsify(10, 11, 0).is_err());
    }

    #[test]
    fn model_gradient_and_minima() {
        let model = RamachandranModel::default();
        let pts: Vec<Vec<f64>> = (0..25).map(|k| vec![-3.0 + 0.25 * k as f64, 2.9 - 0.23 * k as f64]).collect();
        crate::potentials::testing::assert_gradient_matches(&model, &pts);
        let minima = model.minima().unwrap();
        for (m, b) in minima.iter().zip(&model.basins) {
            assert!((m[0] - b.phi).abs() < 0.2 && (m[1] - b.psi).abs() < 0.2, "{} at {m:?}", b.name);
        }
    }

    #[test]
    fn synthetic_series_crosses_between_basins() {
        let (s, grid, _) = synthetic_alanine(7).unwrap();
        assert_eq!(s.len(), SYNTHETIC_FRAMES);
        assert_eq!(grid.shape(), (SYNTHETIC_GRID, SYNTHETIC_GRID));
        assert!(!crossing_indices(&s).is_empty());
        let positive = s.phi().iter().filter(|p| p.sin() > 0.0).count();
        assert!(positive > 500 && positive < SYNTHETIC_FRAMES - 500, "{positive}");
    }
}
