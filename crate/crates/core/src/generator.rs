//! The finite-volume generator on a tessellated point cloud and its jump chain.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::pointcloud::{PointCloud, Tessellation};

/// Sparse continuous-time generator with zero row sums, stored by rows.
///
/// Off-diagonal entries are kept in CSR form with ascending column indices.
/// Each stored edge also carries its conductance `m_i Q_ij`, which is
/// symmetric whenever the chain is reversible with respect to `m`.
#[derive(Clone, Debug)]
pub struct RateMatrix {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    rates: Vec<f64>,
    conductances: Vec<f64>,
    exit_rates: Vec<f64>,
    weights: Vec<f64>,
    volumes: Vec<f64>,
    measure: Vec<f64>,
    removed: Vec<bool>,
}

/// Builds `Q_ij = (pi_i + pi_j) |Gamma_ij| / (2 pi_i |C_i| |y_i - y_j|)`.
pub fn build_generator(tess: &Tessellation, pi: &[f64], cloud: &PointCloud) -> Result<RateMatrix> {
    let n = cloud.len();
    if tess.len() != n || pi.len() != n {
        return Err(Error::InvalidArgument(format!(
            "cloud has {n} points, tessellation {} cells, weights {} entries",
            tess.len(),
            pi.len()
        )));
    }
    if let Some(i) = pi.iter().position(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidArgument(format!("weight {} at state {i} is not positive and finite", pi[i])));
    }
    if let Some(i) = tess.volumes().iter().position(|v| !(*v > 0.0)) {
        return Err(Error::DegenerateGeometry {
            index: i,
            reason: "zero cell volume".into(),
        });
    }
    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0);
    let mut cols = Vec::new();
    let mut conductances = Vec::new();
    for i in 0..n {
        for (&j, &area) in tess.neighbors(i).iter().zip(tess.face_areas(i)) {
            let d = cloud.distance(i, j);
            if !(d > 0.0) {
                return Err(Error::DuplicatePoint(i.min(j), i.max(j)));
            }
            cols.push(j);
            conductances.push((pi[i] + pi[j]) * area / (2.0 * d));
        }
        offsets.push(cols.len());
    }
    let volumes = tess.volumes().to_vec();
    let mut rates = vec![0.0; cols.len()];
    for i in 0..n {
        let denom = pi[i] * volumes[i];
        for e in offsets[i]..offsets[i + 1] {
            let j = cols[e];
            let area = tess.face_areas(i)[e - offsets[i]];
            rates[e] = (pi[i] + pi[j]) * area / (2.0 * denom * cloud.distance(i, j));
        }
    }
    Ok(RateMatrix::from_parts(offsets, cols, rates, conductances, pi.to_vec(), volumes, vec![false; n]))
}

impl RateMatrix {
    pub(crate) fn from_parts(
        offsets: Vec<usize>,
        cols: Vec<usize>,
        rates: Vec<f64>,
        conductances: Vec<f64>,
        weights: Vec<f64>,
        volumes: Vec<f64>,
        removed: Vec<bool>,
    ) -> Self {
        let n = offsets.len() - 1;
        let exit_rates = (0..n).map(|i| rates[offsets[i]..offsets[i + 1]].iter().sum()).collect();
        let measure = weights.iter().zip(&volumes).map(|(p, v)| p * v).collect();
        Self {
            offsets,
            cols,
            rates,
            conductances,
            exit_rates,
            weights,
            volumes,
            measure,
            removed,
        }
    }

    /// Reversible generator with `Q_ij = c_ij / m_i` for symmetric conductances
    /// `c_ij` given once per unordered pair. Weights are `m` and volumes are 1.
    pub fn reversible(measure: Vec<f64>, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let n = measure.len();
        if let Some(i) = measure.iter().position(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(Error::InvalidArgument(format!("measure at state {i} must be positive")));
        }
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, c) in edges {
            if i >= n || j >= n || i == j || !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidArgument(format!("invalid edge ({i}, {j}, {c})")));
            }
            rows[i].push((j, c));
            rows[j].push((i, c));
        }
        let mut offsets = vec![0];
        let (mut cols, mut rates, mut conductances) = (Vec::new(), Vec::new(), Vec::new());
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::InvalidArgument(format!("repeated edge at state {i}")));
            }
            for &(j, c) in row.iter() {
                cols.push(j);
                conductances.push(c);
                rates.push(c / measure[i]);
            }
            offsets.push(cols.len());
        }
        Ok(Self::from_parts(offsets, cols, rates, conductances, measure, vec![1.0; n], vec![false; n]))
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn edge_count(&self) -> usize {
        self.cols.len()
    }

    /// States `j` with `Q_ij > 0`, ascending.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.cols[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Off-diagonal rates of row `i`, aligned with [`neighbors`](Self::neighbors).
    pub fn row_rates(&self, i: usize) -> &[f64] {
        &self.rates[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Conductances `m_i Q_ij` of row `i`.
    pub fn row_conductances(&self, i: usize) -> &[f64] {
        &self.conductances[self.offsets[i]..self.offsets[i + 1]]
    }

    /// `Q_ij`, including the diagonal; zero for non-adjacent states.
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return -self.exit_rates[i];
        }
        let nbrs = self.neighbors(i);
        match nbrs.binary_search(&j) {
            Ok(k) => self.row_rates(i)[k],
            Err(_) => 0.0,
        }
    }

    /// Jump rate `lambda_i = sum_{j != i} Q_ij`.
    pub fn exit_rate(&self, i: usize) -> f64 {
        self.exit_rates[i]
    }

    pub fn exit_rates(&self) -> &[f64] {
        &self.exit_rates
    }

    /// Equilibrium weights `pi` the generator was built from.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    /// Reference measure `m_i = pi_i |C_i|`.
    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    /// Whether state `i` has been taken out of the chain (its row is empty).
    pub fn is_removed(&self, i: usize) -> bool {
        self.removed[i]
    }

    /// Off-diagonal entries `(i, j, Q_ij)` in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.len()).flat_map(move |i| self.neighbors(i).iter().zip(self.row_rates(i)).map(move |(&j, &r)| (i, j, r)))
    }

    /// Largest `|m_i Q_ij - m_j Q_ji| / max(m_i Q_ij, m_j Q_ji)` over all edges.
    pub fn detailed_balance_error(&self) -> f64 {
        self.entries()
            .map(|(i, j, r)| {
                let a = self.measure[i] * r;
                let b = self.measure[j] * self.rate(j, i);
                (a - b).abs() / a.max(b)
            })
            .fold(0.0, f64::max)
    }

    /// Dense copy, for small instances and test oracles.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut d = vec![vec![0.0; n]; n];
        for i in 0..n {
            d[i][i] = -self.exit_rates[i];
        }
        for (i, j, r) in self.entries() {
            d[i][j] = r;
        }
        d
    }

    /// `sum_j Q_ij x_j` for every `i`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let s: f64 = self.neighbors(i).iter().zip(self.row_rates(i)).map(|(&j, &r)| r * x[j]).sum();
                s - self.exit_rates[i] * x[i]
            })
            .collect()
    }
}

/// Embedded jump chain: rates `lambda_i` and probabilities `P_ij = Q_ij / lambda_i`.
#[derive(Clone, Debug)]
pub struct JumpChain {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    probs: Vec<f64>,
    rates: Vec<f64>,
}

pub fn jump_chain(q: &RateMatrix) -> Result<JumpChain> {
    let n = q.len();
    let mut probs = vec![0.0; q.edge_count()];
    for i in 0..n {
        let lambda = q.exit_rate(i);
        if q.is_removed(i) {
            continue;
        }
        if !(lambda > 0.0) {
            return Err(Error::IsolatedState(i));
        }
        for e in q.offsets[i]..q.offsets[i + 1] {
            probs[e] = q.rates[e] / lambda;
        }
    }
    Ok(JumpChain {
        offsets: q.offsets.clone(),
        cols: q.cols.clone(),
        probs,
        rates: q.exit_rates.clone(),
    })
}

impl JumpChain {
    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn rate(&self, i: usize) -> f64 {
        self.rates[i]
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.cols[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Transition probabilities out of `i`, aligned with [`neighbors`](Self::neighbors).
    pub fn probabilities(&self, i: usize) -> &[f64] {
        &self.probs[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn probability(&self, i: usize, j: usize) -> f64 {
        match self.neighbors(i).binary_search(&j) {
            Ok(k) => self.probabilities(i)[k],
            Err(_) => 0.0,
        }
    }
}

/// `max_i |sum_j m_j Q_ji| / (lambda_i m_i)`: zero exactly when `m` is stationary.
pub fn stationarity_residual(q: &RateMatrix, m: &[f64]) -> Result<f64> {
    if m.len() != q.len() {
        return Err(Error::InvalidArgument(format!("measure has {} entries, generator {}", m.len(), q.len())));
    }
    let mut worst = 0.0f64;
    for i in 0..q.len() {
        if q.is_removed(i) || q.exit_rate(i) == 0.0 {
            continue;
        }
        let inflow: f64 = q.neighbors(i).iter().map(|&j| m[j] * q.rate(j, i)).sum();
        let net = inflow - m[i] * q.exit_rate(i);
        worst = worst.max(net.abs() / (q.exit_rate(i) * m[i]));
    }
    Ok(worst)
}

/// Writes `i,j,rate` triples and `i,pi,vol` measures.
pub fn save_generator(q: &RateMatrix, triples: &Path, measures: &Path) -> Result<()> {
    let mut out = String::from("i,j,rate\n");
    for (i, j, r) in q.entries() {
        writeln!(out, "{i},{j},{r}").unwrap();
    }
    fs::write(triples, out)?;
    let mut out = String::from("i,pi,vol\n");
    for i in 0..q.len() {
        writeln!(out, "{i},{},{}", q.weights[i], q.volumes[i]).unwrap();
    }
    fs::write(measures, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointcloud::{build_tessellation, sample_sphere_uniform};
    use crate::potentials::{equilibrium_weights, Mueller, SpherePullback};
    use nalgebra::{DMatrix, SymmetricEigen};
    use proptest::prelude::*;

    fn two_state() -> RateMatrix {
        let cloud = PointCloud::new(&[vec![0.0, 0.0], vec![1.0, 0.0]], 1).unwrap();
        let tess = Tessellation::from_faces(vec![1.0, 1.0], &[(0, 1, 1.0)]).unwrap();
        build_generator(&tess, &[1.0, 1.0], &cloud).unwrap()
    }

    #[test]
    fn two_state_rates() {
        let q = two_state();
        assert_eq!(q.to_dense(), vec![vec![-1.0, 1.0], vec![1.0, -1.0]]);
        let jc = jump_chain(&q).unwrap();
        assert_eq!(jc.rates(), &[1.0, 1.0]);
        assert_eq!(jc.probability(0, 1), 1.0);
        assert_eq!(jc.probability(1, 0), 1.0);
        assert_eq!(stationarity_residual(&q, &[1.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn path_graph_splits_evenly() {
        let q = RateMatrix::reversible(vec![1.0; 3], &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let jc = jump_chain(&q).unwrap();
        assert_eq!(jc.probability(1, 0), 0.5);
        assert_eq!(jc.probability(1, 2), 0.5);
        assert_eq!(jc.probability(0, 2), 0.0);
    }

    #[test]
    fn isolated_state_is_reported() {
        let q = RateMatrix::reversible(vec![1.0; 3], &[(0, 1, 1.0)]).unwrap();
        assert!(matches!(jump_chain(&q), Err(Error::IsolatedState(2))));
    }

    #[test]
    fn sphere_generator_properties() {
        let cloud = sample_sphere_uniform(4000, 11).unwrap();
        let tess = build_tessellation(&cloud, 20).unwrap();
        let landscape = SpherePullback::new(Mueller::default()).unwrap();
        let w = equilibrium_weights(&cloud, &landscape, 0.1).unwrap();
        let q = build_generator(&tess, &w.weights, &cloud).unwrap();
        for i in 0..q.len() {
            let s: f64 = q.row_rates(i).iter().sum::<f64>() + q.rate(i, i);
            assert!(s.abs() <= 1e-12 * q.exit_rate(i));
            assert_eq!(q.neighbors(i), tess.neighbors(i));
        }
        assert!(q.detailed_balance_error() <= 1e-12);
        assert!(stationarity_residual(&q, q.measure()).unwrap() <= 1e-12);
        let mut m = q.measure().to_vec();
        m[17] *= 2.0;
        assert!(stationarity_residual(&q, &m).unwrap() > 1e-3);
        let jc = jump_chain(&q).unwrap();
        for i in 0..jc.len() {
            assert!((jc.probabilities(i).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    fn small_instance(n: usize, seed: u64) -> (PointCloud, Tessellation) {
        let cloud = sample_sphere_uniform(n, seed).unwrap();
        let tess = build_tessellation(&cloud, (n - 1).min(12)).unwrap();
        (cloud, tess)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn spectrum_is_nonpositive_with_simple_zero(seed in 0u64..1000, n in 12usize..50, logw in prop::collection::vec(-3.0f64..3.0, 50)) {
            let (cloud, tess) = small_instance(n, seed);
            prop_assume!(tess.is_connected());
            let pi: Vec<f64> = logw[..n].iter().map(|l| l.exp()).collect();
            let q = build_generator(&tess, &pi, &cloud).unwrap();
            prop_assert!(q.detailed_balance_error() <= 1e-12);
            let m = q.measure();
            let d = q.to_dense();
            let sym = DMatrix::from_fn(n, n, |i, j| m[i].sqrt() * d[i][j] / m[j].sqrt());
            let sym = (&sym + sym.transpose()) * 0.5;
            let scale = q.exit_rates().iter().cloned().fold(0.0, f64::max);
            let eig = SymmetricEigen::new(sym).eigenvalues;
            prop_assert!(eig.iter().all(|&l| l <= 1e-10 * scale));
            let zeros = eig.iter().filter(|&&l| l.abs() <= 1e-10 * scale).count();
            prop_assert_eq!(zeros, 1);
        }

        #[test]
        fn common_weight_scale_leaves_rates_unchanged(seed in 0u64..1000, c in 1e-3f64..1e3) {
            let (cloud, tess) = small_instance(30, seed);
            let pi: Vec<f64> = (0..30).map(|i| 0.5 + ((i * 7 + seed as usize) % 11) as f64).collect();
            let scaled: Vec<f64> = pi.iter().map(|p| p * c).collect();
            let a = build_generator(&tess, &pi, &cloud).unwrap();
            let b = build_generator(&tess, &scaled, &cloud).unwrap();
            for ((_, _, x), (_, _, y)) in a.entries().zip(b.entries()) {
                prop_assert!((x - y).abs() <= 1e-14 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn export_writes_both_files() {
        let dir = tempfile::tempdir().unwrap();
        let q = two_state();
        save_generator(&q, &dir.path().join("q.csv"), &dir.path().join("m.csv")).unwrap();
        let t = fs::read_to_string(dir.path().join("q.csv")).unwrap();
        assert_eq!(t, "i,j,rate\n0,1,1\n1,0,1\n");
        let m = fs::read_to_string(dir.path().join("m.csv")).unwrap();
        assert_eq!(m, "i,pi,vol\n0,1,1\n1,1,1\n");
    }
}
