//! The discrete committor: `sum_j Q_ij (q_j - q_i) = 0` off `A` and `B`,
//! with `q = 0` on `A` and `q = 1` on `B`.
//!
//! Multiplying row `i` by `m_i` turns the system into a weighted graph
//! Laplacian with symmetric conductances `c_ij = m_i Q_ij`. Two solvers are
//! provided. The direct one eliminates interior states one at a time in a
//! banded ordering and keeps the conductances to `A` and to `B` as separate
//! nonnegative quantities, so no subtraction ever happens and tiny committor
//! values near `A` keep full relative precision. The iterative one is
//! conjugate gradients with Jacobi preconditioning.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{read_text, Error, Result};
use crate::generator::RateMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverMethod {
    /// Direct elimination when the banded factor is small enough, otherwise PCG.
    Auto,
    Direct,
    Pcg,
}

#[derive(Clone, Copy, Debug)]
pub struct CommittorOptions {
    pub tol: f64,
    pub method: SolverMethod,
    /// Defaults to `10 n` for PCG.
    pub max_iterations: Option<usize>,
}

impl Default for CommittorOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            method: SolverMethod::Auto,
            max_iterations: None,
        }
    }
}

/// Banded factors above this many stored entries go to PCG in `Auto` mode.
const DIRECT_MAX_ENTRIES: usize = 20_000_000;
/// Likewise for the elimination work `n * bandwidth^2`.
const DIRECT_MAX_WORK: f64 = 4e9;

#[derive(Clone, Debug)]
pub struct CommittorField {
    pub q: Vec<f64>,
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    /// [`committor_residual`] of `q`.
    pub residual: f64,
    pub method: SolverMethod,
    /// PCG iterations, or the bandwidth of the direct factor.
    pub iterations: usize,
}

fn normalize_set(name: &str, set: &[usize], n: usize) -> Result<Vec<usize>> {
    let mut s = set.to_vec();
    s.sort_unstable();
    s.dedup();
    if s.is_empty() {
        return Err(Error::InvalidArgument(format!("set {name} is empty")));
    }
    if let Some(&i) = s.iter().find(|&&i| i >= n) {
        return Err(Error::InvalidArgument(format!("set {name} contains {i}, but there are {n} states")));
    }
    Ok(s)
}

/// Role of each state: 0 interior, 1 in `A`, 2 in `B`.
fn labels(n: usize, a: &[usize], b: &[usize]) -> Result<Vec<u8>> {
    let mut role = vec![0u8; n];
    for &i in a {
        role[i] = 1;
    }
    let overlap: Vec<usize> = b.iter().copied().filter(|&i| role[i] == 1).collect();
    if !overlap.is_empty() {
        return Err(Error::OverlappingSets(overlap));
    }
    for &i in b {
        role[i] = 2;
    }
    Ok(role)
}

/// Symmetrized conductance of the stored edge `(i, neighbors(i)[k])`.
fn conductance(gen: &RateMatrix, i: usize, k: usize) -> f64 {
    let j = gen.neighbors(i)[k];
    let cij = gen.row_conductances(i)[k];
    match gen.neighbors(j).binary_search(&i) {
        Ok(kk) => 0.5 * (cij + gen.row_conductances(j)[kk]),
        Err(_) => cij,
    }
}

fn check_reachability(gen: &RateMatrix, role: &[u8]) -> Result<()> {
    let n = gen.len();
    let mut seen: Vec<bool> = role.iter().map(|&r| r != 0).collect();
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| role[i] != 0).collect();
    while let Some(i) = queue.pop_front() {
        for &j in gen.neighbors(i) {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    let members: Vec<usize> = (0..n).filter(|&i| !seen[i]).collect();
    if members.is_empty() {
        Ok(())
    } else {
        Err(Error::DisconnectedComponent { members })
    }
}

pub fn solve_committor(gen: &RateMatrix, a: &[usize], b: &[usize], tol: f64) -> Result<CommittorField> {
    solve_committor_with(gen, a, b, &CommittorOptions { tol, ..Default::default() })
}

pub fn solve_committor_with(gen: &RateMatrix, a: &[usize], b: &[usize], opts: &CommittorOptions) -> Result<CommittorField> {
    let n = gen.len();
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let a = normalize_set("A", a, n)?;
    let b = normalize_set("B", b, n)?;
    let role = labels(n, &a, &b)?;
    check_reachability(gen, &role)?;
    let interior: Vec<usize> = (0..n).filter(|&i| role[i] == 0).collect();

    let mut q: Vec<f64> = role.iter().map(|&r| if r == 2 { 1.0 } else { 0.0 }).collect();
    let (method, iterations) = if interior.is_empty() {
        (SolverMethod::Direct, 0)
    } else {
        let system = InteriorSystem::new(gen, &role, &interior);
        let method = match opts.method {
            SolverMethod::Auto => {
                let entries = system.n() * system.bandwidth;
                let work = system.n() as f64 * (system.bandwidth as f64).powi(2);
                if entries <= DIRECT_MAX_ENTRIES && work <= DIRECT_MAX_WORK {
                    SolverMethod::Direct
                } else {
                    SolverMethod::Pcg
                }
            }
            m => m,
        };
        let (x, iterations) = match method {
            SolverMethod::Pcg => system.pcg(opts.tol, opts.max_iterations.unwrap_or(10 * n))?,
            _ => (system.eliminate(), system.bandwidth),
        };
        for (k, &i) in interior.iter().enumerate() {
            q[i] = x[k].clamp(0.0, 1.0);
        }
        (method, iterations)
    };
    let mut field = CommittorField {
        q,
        a,
        b,
        residual: 0.0,
        method,
        iterations,
    };
    field.residual = committor_residual(gen, &field);
    Ok(field)
}

/// `max_i |sum_j Q_ij (q_j - q_i)| / lambda_i` over interior states.
pub fn committor_residual(gen: &RateMatrix, field: &CommittorField) -> f64 {
    let n = gen.len();
    let mut boundary = vec![false; n];
    for &i in field.a.iter().chain(&field.b) {
        boundary[i] = true;
    }
    let q = &field.q;
    (0..n)
        .into_par_iter()
        .filter(|&i| !boundary[i])
        .map(|i| {
            let s: f64 = gen.neighbors(i).iter().zip(gen.row_rates(i)).map(|(&j, &r)| r * (q[j] - q[i])).sum();
            s.abs() / gen.exit_rate(i)
        })
        .reduce(|| 0.0, f64::max)
}

/// The interior block in reverse Cuthill-McKee order, with the summed
/// conductances from each state to `A` and to `B`.
struct InteriorSystem {
    order: Vec<usize>,
    /// `adj[p]`: (position, conductance) pairs of interior neighbours.
    adj: Vec<Vec<(usize, f64)>>,
    to_a: Vec<f64>,
    to_b: Vec<f64>,
    bandwidth: usize,
}

impl InteriorSystem {
    fn new(gen: &RateMatrix, role: &[u8], interior: &[usize]) -> Self {
        let n = gen.len();
        let mut local = vec![usize::MAX; n];
        for (k, &i) in interior.iter().enumerate() {
            local[i] = k;
        }
        let ni = interior.len();
        let mut graph: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ni];
        let mut to_a = vec![0.0; ni];
        let mut to_b = vec![0.0; ni];
        for (k, &i) in interior.iter().enumerate() {
            for (e, &j) in gen.neighbors(i).iter().enumerate() {
                let c = conductance(gen, i, e);
                match role[j] {
                    0 => graph[k].push((local[j], c)),
                    1 => to_a[k] += c,
                    _ => to_b[k] += c,
                }
            }
        }
        let order = reverse_cuthill_mckee(&graph);
        let mut position = vec![0; ni];
        for (p, &k) in order.iter().enumerate() {
            position[k] = p;
        }
        let mut adj = vec![Vec::new(); ni];
        let mut bandwidth = 0;
        for (k, row) in graph.iter().enumerate() {
            let p = position[k];
            for &(l, c) in row {
                let pl = position[l];
                bandwidth = bandwidth.max(pl.abs_diff(p));
                adj[p].push((pl, c));
            }
            adj[p].sort_by_key(|e| e.0);
        }
        let permute = |v: &[f64]| order.iter().map(|&k| v[k]).collect::<Vec<_>>();
        Self {
            to_a: permute(&to_a),
            to_b: permute(&to_b),
            order,
            adj,
            bandwidth: bandwidth.max(1),
        }
    }

    fn n(&self) -> usize {
        self.order.len()
    }

    fn unpermute(&self, x: Vec<f64>) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for (p, &k) in self.order.iter().enumerate() {
            out[k] = x[p];
        }
        out
    }

    /// Star-mesh elimination in band storage; every update adds nonnegative terms.
    fn eliminate(&self) -> Vec<f64> {
        let n = self.n();
        let w = self.bandwidth;
        // band[p * w + d] is the conductance between positions p and p + d + 1.
        let mut band = vec![0.0; n * w];
        for (p, row) in self.adj.iter().enumerate() {
            for &(t, c) in row {
                if t > p {
                    band[p * w + (t - p - 1)] = c;
                }
            }
        }
        let mut alpha = self.to_a.clone();
        let mut beta = self.to_b.clone();
        let mut diag = vec![0.0; n];
        for p in 0..n {
            let width = w.min(n - 1 - p);
            let row: Vec<f64> = band[p * w..p * w + width].to_vec();
            let d = row.iter().sum::<f64>() + alpha[p] + beta[p];
            diag[p] = d;
            for (s, &cs) in row.iter().enumerate() {
                if cs == 0.0 {
                    continue;
                }
                let f = cs / d;
                let ps = p + s + 1;
                alpha[ps] += f * alpha[p];
                beta[ps] += f * beta[p];
                let base = ps * w;
                for (t, &ct) in row.iter().enumerate().skip(s + 1) {
                    if ct != 0.0 {
                        band[base + (t - s - 1)] += f * ct;
                    }
                }
            }
        }
        let mut x = vec![0.0; n];
        for p in (0..n).rev() {
            let width = w.min(n - 1 - p);
            let mut s = beta[p];
            for d in 0..width {
                let c = band[p * w + d];
                if c != 0.0 {
                    s += c * x[p + d + 1];
                }
            }
            x[p] = s / diag[p];
        }
        self.unpermute(x)
    }

    fn diagonal(&self) -> Vec<f64> {
        self.adj
            .iter()
            .enumerate()
            .map(|(p, row)| row.iter().map(|e| e.1).sum::<f64>() + self.to_a[p] + self.to_b[p])
            .collect()
    }

    fn apply(&self, diag: &[f64], x: &[f64]) -> Vec<f64> {
        self.adj
            .par_iter()
            .enumerate()
            .map(|(p, row)| diag[p] * x[p] - row.iter().map(|&(t, c)| c * x[t]).sum::<f64>())
            .collect()
    }

    /// Jacobi-preconditioned conjugate gradients, stopped once the
    /// preconditioned residual `max_i |r_i| / D_i` is at most `tol`.
    fn pcg(&self, tol: f64, max_iterations: usize) -> Result<(Vec<f64>, usize)> {
        let diag = self.diagonal();
        let n = self.n();
        let mut x: Vec<f64> = (0..n).map(|p| self.to_b[p] / diag[p]).collect();
        let ax = self.apply(&diag, &x);
        let mut r: Vec<f64> = (0..n).map(|p| self.to_b[p] - ax[p]).collect();
        let mut z: Vec<f64> = (0..n).map(|p| r[p] / diag[p]).collect();
        let mut d = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let norm = |z: &[f64]| z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut it = 0;
        while norm(&z) > tol {
            if it >= max_iterations {
                return Err(Error::NotConverged {
                    iterations: it,
                    residual: norm(&z),
                });
            }
            let ad = self.apply(&diag, &d);
            let dad: f64 = d.iter().zip(&ad).map(|(a, b)| a * b).sum();
            let step = rz / dad;
            for p in 0..n {
                x[p] += step * d[p];
                r[p] -= step * ad[p];
                z[p] = r[p] / diag[p];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for p in 0..n {
                d[p] = z[p] + beta * d[p];
            }
            it += 1;
            if it % 50 == 0 {
                // Refresh the recursive residual against drift.
                let ax = self.apply(&diag, &x);
                for p in 0..n {
                    r[p] = self.to_b[p] - ax[p];
                    z[p] = r[p] / diag[p];
                }
            }
        }
        Ok((self.unpermute(x), it))
    }
}

/// Reverse Cuthill-McKee ordering of each connected component, starting
/// from a pseudo-peripheral vertex.
fn reverse_cuthill_mckee(graph: &[Vec<(usize, f64)>]) -> Vec<usize> {
    let n = graph.len();
    let degree: Vec<usize> = graph.iter().map(Vec::len).collect();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let bfs_levels = |start: usize, placed: &[bool]| -> (usize, usize) {
        let mut level = vec![usize::MAX; n];
        level[start] = 0;
        let mut queue = VecDeque::from([start]);
        let mut last = start;
        while let Some(i) = queue.pop_front() {
            last = i;
            for &(j, _) in &graph[i] {
                if level[j] == usize::MAX && !placed[j] {
                    level[j] = level[i] + 1;
                    queue.push_back(j);
                }
            }
        }
        (last, level[last])
    };
    for seed in 0..n {
        if placed[seed] {
            continue;
        }
        let mut start = seed;
        let (mut far, mut depth) = bfs_levels(start, &placed);
        for _ in 0..4 {
            let (next, d) = bfs_levels(far, &placed);
            if d <= depth {
                break;
            }
            start = far;
            far = next;
            depth = d;
        }
        let _ = start;
        let root = far;
        let begin = order.len();
        placed[root] = true;
        order.push(root);
        let mut head = begin;
        while head < order.len() {
            let i = order[head];
            head += 1;
            let mut next: Vec<usize> = graph[i].iter().map(|e| e.0).filter(|&j| !placed[j]).collect();
            next.sort_by_key(|&j| (degree[j], j));
            for j in next {
                placed[j] = true;
                order.push(j);
            }
        }
    }
    order.reverse();
    order
}

pub fn save_committor(field: &CommittorField, path: &Path) -> Result<()> {
    let mut out = String::from("id,q\n");
    for (i, q) in field.q.iter().enumerate() {
        writeln!(out, "{i},{q}").unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn load_committor(path: &Path) -> Result<Vec<f64>> {
    let text = read_text(path)?;
    let name = path.display().to_string();
    let mut q = Vec::new();
    for (line_no, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let value = line
            .split(',')
            .nth(1)
            .and_then(|s| s.trim().parse::<f64>().ok())
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::Parse {
                source_name: name.clone(),
                row: line_no + 1,
                message: format!("expected id,q, found {line:?}"),
            })?;
        q.push(value);
    }
    Ok(q)
}
