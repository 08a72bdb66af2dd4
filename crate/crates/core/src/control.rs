//! The optimally controlled chain `Q^q_ij = (q_j / q_i) Q_ij` with `A` removed.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::committor::CommittorField;
use crate::error::{Error, Result};
use crate::generator::{jump_chain, JumpChain, RateMatrix};
use crate::pointcloud::PointCloud;

/// Retained committor values below this are treated as underflow.
pub const VANISHING_COMMITTOR: f64 = 1e-300;

#[derive(Clone, Debug)]
pub struct ControlledChain {
    /// Controlled generator on the original indices; rows of `A` are empty.
    pub generator: RateMatrix,
    pub jump: JumpChain,
    pub a: Vec<usize>,
    /// Effective equilibrium `q^2 pi` (zero on `A`).
    pub effective_weights: Vec<f64>,
    /// Exit distribution `(j, probability)` over the neighbours of `A`, ascending in `j`.
    pub exit: Vec<(usize, f64)>,
    /// Normalizer of the exit distribution.
    pub exit_normalizer: f64,
}

pub fn build_controlled_chain(gen: &RateMatrix, field: &CommittorField) -> Result<ControlledChain> {
    let n = gen.len();
    let q = &field.q;
    if q.len() != n {
        return Err(Error::InvalidArgument(format!("committor has {} values, generator {n} states", q.len())));
    }
    if field.a.is_empty() {
        return Err(Error::InvalidArgument("set A is empty".into()));
    }
    let mut in_a = vec![false; n];
    for &i in &field.a {
        in_a[i] = true;
    }
    let vanishing: Vec<usize> = (0..n).filter(|&i| !in_a[i] && !(q[i] >= VANISHING_COMMITTOR)).collect();
    if !vanishing.is_empty() {
        return Err(Error::VanishingCommittor(vanishing));
    }

    let mut offsets = vec![0];
    let (mut cols, mut rates, mut conductances) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..n {
        if !in_a[i] {
            for ((&j, &r), &c) in gen.neighbors(i).iter().zip(gen.row_rates(i)).zip(gen.row_conductances(i)) {
                if !in_a[j] {
                    cols.push(j);
                    rates.push(q[j] / q[i] * r);
                    conductances.push(q[i] * q[j] * c);
                }
            }
        }
        offsets.push(cols.len());
    }
    let effective_weights: Vec<f64> = (0..n).map(|i| q[i] * q[i] * gen.weights()[i]).collect();
    let generator = RateMatrix::from_parts(
        offsets,
        cols,
        rates,
        conductances,
        effective_weights.clone(),
        gen.volumes().to_vec(),
        in_a.clone(),
    );
    let jump = jump_chain(&generator)?;

    let mut flux = vec![0.0; n];
    for &a in &field.a {
        for (&j, &c) in gen.neighbors(a).iter().zip(gen.row_conductances(a)) {
            if !in_a[j] {
                flux[j] += c * q[j];
            }
        }
    }
    let exit_normalizer: f64 = flux.iter().sum();
    if !(exit_normalizer > 0.0) {
        return Err(Error::InvalidArgument("A has no neighbours outside itself".into()));
    }
    let exit = (0..n).filter(|&j| flux[j] > 0.0).map(|j| (j, flux[j] / exit_normalizer)).collect();
    Ok(ControlledChain {
        generator,
        jump,
        a: field.a.clone(),
        effective_weights,
        exit,
        exit_normalizer,
    })
}

/// `U^e = U - 2 eps ln q`, `+inf` where `q = 0`.
pub fn effective_potential_field(u: &[f64], q: &[f64], eps: f64) -> Vec<f64> {
    u.iter()
        .zip(q)
        .map(|(&u, &q)| if q > 0.0 { u - 2.0 * eps * q.ln() } else { f64::INFINITY })
        .collect()
}

/// `v_ij = 2 (q_j - q_i) / |y_j - y_i| * 2 / (q_i + q_j)`.
pub fn control_value(qi: f64, qj: f64, distance: f64) -> Result<f64> {
    if !(qi + qj > 0.0) {
        return Err(Error::InvalidArgument("control undefined between two states of A".into()));
    }
    Ok(2.0 * (qj - qi) / distance * 2.0 / (qi + qj))
}

/// Control on every edge of `gen` with at least one endpoint outside `A`.
pub fn discrete_control_field(gen: &RateMatrix, q: &[f64], cloud: &PointCloud) -> Result<Vec<(usize, usize, f64)>> {
    let mut out = Vec::new();
    for (i, j, _) in gen.entries() {
        if q[i] + q[j] > 0.0 {
            out.push((i, j, control_value(q[i], q[j], cloud.distance(i, j))?));
        }
    }
    Ok(out)
}

pub fn save_exit_distribution(chain: &ControlledChain, path: &Path) -> Result<()> {
    let mut out = String::from("j,prob\n");
    for &(j, p) in &chain.exit {
        writeln!(out, "{j},{p}").unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::committor::solve_committor;
    use crate::generator::stationarity_residual;
    use nalgebra::{DMatrix, SymmetricEigen};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_reversible(n: usize, seed: u64) -> RateMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0f64..2.0).exp()).collect();
        // A ring plus chords, so no state hangs off A alone.
        let mut edges: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, (i + 1) % n, rng.random_range(-1.0f64..1.0).exp())).collect();
        for i in 0..n {
            let j = rng.random_range(0..n);
            if i != j && !edges.iter().any(|&(a, b, _)| (a, b) == (i, j) || (a, b) == (j, i)) {
                edges.push((i, j, rng.random_range(-1.0f64..1.0).exp()));
            }
        }
        RateMatrix::reversible(m, &edges).unwrap()
    }

    #[test]
    fn unit_committor_leaves_rates_unchanged() {
        let gen = random_reversible(10, 3);
        let mut q = vec![1.0; 10];
        q[0] = 0.0;
        let field = CommittorField {
            q,
            a: vec![0],
            b: vec![9],
            residual: 0.0,
            method: crate::committor::SolverMethod::Direct,
            iterations: 0,
        };
        let c = build_controlled_chain(&gen, &field).unwrap();
        for (i, j, r) in c.generator.entries() {
            assert_eq!(r, gen.rate(i, j));
        }
        assert!(c.generator.neighbors(0).is_empty());
    }

    #[test]
    fn effective_potential_examples() {
        let eps: f64 = 0.3;
        let ue = effective_potential_field(&[1.5, 2.0, 0.7], &[1.0, (-1.0 / (2.0 * eps)).exp(), 0.0], eps);
        assert_eq!(ue[0], 1.5);
        assert!((ue[1] - 3.0).abs() < 1e-12);
        assert_eq!(ue[2], f64::INFINITY);
    }

    #[test]
    fn control_examples() {
        assert_eq!(control_value(0.4, 0.4, 2.0).unwrap(), 0.0);
        assert_eq!(control_value(0.0, 1.0, 1.0).unwrap(), 4.0);
        assert!(control_value(0.0, 0.0, 1.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn controlled_chain_properties(seed in 0u64..10_000, n in 5usize..50) {
            let gen = random_reversible(n, seed);
            let field = solve_committor(&gen, &[0], &[n - 1], 1e-13).unwrap();
            let c = build_controlled_chain(&gen, &field).unwrap();
            let qq = &c.generator;
            let q = &field.q;
            prop_assert!(qq.detailed_balance_error() <= 1e-12);
            prop_assert!(stationarity_residual(qq, qq.measure()).unwrap() <= 1e-12);
            for i in 1..n {
                let s: f64 = qq.row_rates(i).iter().sum::<f64>() + qq.rate(i, i);
                prop_assert!(s.abs() <= 1e-12 * qq.exit_rate(i));
                if !gen.neighbors(i).contains(&0) {
                    for (&j, &r) in qq.neighbors(i).iter().zip(qq.row_rates(i)) {
                        prop_assert_eq!(r, q[j] / q[i] * gen.rate(i, j));
                    }
                }
            }
            let total: f64 = c.exit.iter().map(|e| e.1).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(c.exit.iter().all(|&(j, _)| gen.neighbors(0).contains(&j)));

            // Mass conservation of the forward equation for random densities.
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            let rho: Vec<f64> = (0..n).map(|i| if i == 0 { 0.0 } else { rng.random_range(0.0..1.0) }).collect();
            let mut sum = 0.0;
            let mut scale = 0.0f64;
            for (i, _, r) in qq.entries() {
                sum += rho[i] * qq.volumes()[i] * r;
                scale = scale.max((rho[i] * qq.volumes()[i] * r).abs());
            }
            for i in 1..n {
                sum -= rho[i] * qq.volumes()[i] * qq.exit_rate(i);
            }
            prop_assert!(sum.abs() <= 1e-12 * scale * n as f64);

            // Spectral gap of the symmetrized controlled generator on retained states.
            let keep: Vec<usize> = (1..n).collect();
            let m = qq.measure();
            let k = keep.len();
            let sym = DMatrix::from_fn(k, k, |r, s| {
                let (i, j) = (keep[r], keep[s]);
                m[i].sqrt() * qq.rate(i, j) / m[j].sqrt()
            });
            let sym = (&sym + sym.transpose()) * 0.5;
            let scale = qq.exit_rates().iter().cloned().fold(0.0, f64::max);
            let eig = SymmetricEigen::new(sym).eigenvalues;
            prop_assert!(eig.iter().all(|&l| l <= 1e-10 * scale));
            prop_assert_eq!(eig.iter().filter(|&&l| l.abs() <= 1e-10 * scale).count(), 1);

            let v = discrete_control_field(&gen, q, &crate::pointcloud::PointCloud::new(
                &(0..n).map(|i| vec![i as f64, (i * i % 7) as f64]).collect::<Vec<_>>(), 2).unwrap()).unwrap();
            for &(i, j, vij) in &v {
                let back = v.iter().find(|e| e.0 == j && e.1 == i).unwrap().2;
                prop_assert_eq!(vij, -back);
            }
        }
    }

    #[test]
    fn vanishing_committor_is_reported() {
        let gen = random_reversible(6, 1);
        let field = CommittorField {
            q: vec![0.0, 0.0, 0.5, 0.5, 0.5, 1.0],
            a: vec![0],
            b: vec![5],
            residual: 0.0,
            method: crate::committor::SolverMethod::Direct,
            iterations: 0,
        };
        assert!(matches!(build_controlled_chain(&gen, &field), Err(Error::VanishingCommittor(v)) if v == vec![1]));
    }
}
