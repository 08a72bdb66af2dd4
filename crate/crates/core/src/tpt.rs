//! Reactive density and current, the transition rate, and the dominant
//! transition path through recursive bottleneck search.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::committor::CommittorField;
use crate::error::{Error, Result};
use crate::generator::RateMatrix;
use crate::path::DiscretePath;
use crate::pointcloud::PointCloud;

/// `rho_i = pi_i q_i (1 - q_i)`.
pub fn reactive_density(pi: &[f64], q: &[f64]) -> Result<Vec<f64>> {
    if pi.len() != q.len() {
        return Err(Error::InvalidArgument(format!("{} weights but {} committor values", pi.len(), q.len())));
    }
    Ok(pi.iter().zip(q).map(|(p, q)| p * q * (1.0 - q)).collect())
}

/// Directed edges carrying positive reactive current, `q` increasing along each.
#[derive(Clone, Debug)]
pub struct ReactiveGraph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    currents: Vec<f64>,
    pub q: Vec<f64>,
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    /// `sum_{i in A} sum_j J_ij` with signed currents.
    pub rate: f64,
    /// The same sum over positive currents only.
    pub rate_positive: f64,
    /// `sum_{i<j} m_i Q_ij (q_j - q_i)^2`, equal to the rate for an exact committor.
    pub dirichlet_rate: f64,
}

/// Builds `J_ij = pi_i |C_i| Q_ij (q_j - q_i)` on every edge with `q_j > q_i`.
pub fn reactive_current(gen: &RateMatrix, field: &CommittorField) -> Result<ReactiveGraph> {
    let n = gen.len();
    let q = &field.q;
    if q.len() != n {
        return Err(Error::InvalidArgument(format!("committor has {} values, generator {n} states", q.len())));
    }
    let m = gen.measure();
    let mut offsets = vec![0];
    let mut targets = Vec::new();
    let mut currents = Vec::new();
    let mut dirichlet = 0.0;
    for i in 0..n {
        for (&j, &r) in gen.neighbors(i).iter().zip(gen.row_rates(i)) {
            let dq = q[j] - q[i];
            if dq > 0.0 {
                let j_ij = m[i] * r * dq;
                targets.push(j);
                currents.push(j_ij);
                dirichlet += j_ij * dq;
            }
        }
        offsets.push(targets.len());
    }
    let mut rate = 0.0;
    let mut rate_positive = 0.0;
    for &i in &field.a {
        for (&j, &r) in gen.neighbors(i).iter().zip(gen.row_rates(i)) {
            let j_ij = m[i] * r * (q[j] - q[i]);
            rate += j_ij;
            rate_positive += j_ij.max(0.0);
        }
    }
    Ok(ReactiveGraph {
        offsets,
        targets,
        currents,
        q: q.clone(),
        a: field.a.clone(),
        b: field.b.clone(),
        rate,
        rate_positive,
        dirichlet_rate: dirichlet,
    })
}

/// `max_i |sum_j J_ij| / (m_i lambda_i)` over states outside `A` and `B`.
pub fn kirchhoff_residual(gen: &RateMatrix, field: &CommittorField) -> f64 {
    let n = gen.len();
    let mut boundary = vec![false; n];
    for &i in field.a.iter().chain(&field.b) {
        boundary[i] = true;
    }
    let m = gen.measure();
    (0..n)
        .filter(|&i| !boundary[i])
        .map(|i| {
            let s: f64 = gen
                .neighbors(i)
                .iter()
                .zip(gen.row_rates(i))
                .map(|(&j, &r)| m[i] * r * (field.q[j] - field.q[i]))
                .sum();
            s.abs() / (m[i] * gen.exit_rate(i))
        })
        .fold(0.0, f64::max)
}

/// Signed total current out of `A`.
pub fn transition_rate(graph: &ReactiveGraph) -> f64 {
    graph.rate
}

impl ReactiveGraph {
    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn currents(&self, i: usize) -> &[f64] {
        &self.currents[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn current(&self, i: usize, j: usize) -> Option<f64> {
        let k = self.successors(i).binary_search(&j).ok()?;
        Some(self.currents(i)[k])
    }

    /// `(i, j, J_ij)` in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.len()).flat_map(move |i| self.successors(i).iter().zip(self.currents(i)).map(move |(&j, &c)| (i, j, c)))
    }

    /// Graph from explicit directed edges, for tests and small examples.
    /// `q` must increase along every edge.
    pub fn from_edges(q: Vec<f64>, a: Vec<usize>, b: Vec<usize>, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let n = q.len();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, c) in edges {
            if i >= n || j >= n || !(q[j] > q[i]) || !(c > 0.0) {
                return Err(Error::InvalidArgument(format!("edge ({i}, {j}, {c}) is not a reactive edge")));
            }
            rows[i].push((j, c));
        }
        let mut offsets = vec![0];
        let (mut targets, mut currents) = (Vec::new(), Vec::new());
        for row in &mut rows {
            row.sort_by_key(|e| e.0);
            for &(j, c) in row.iter() {
                targets.push(j);
                currents.push(c);
            }
            offsets.push(targets.len());
        }
        let rate: f64 = a.iter().flat_map(|&i| rows[i].iter().map(|e| e.1)).sum();
        Ok(Self {
            offsets,
            targets,
            currents,
            q,
            a,
            b,
            rate,
            rate_positive: rate,
            dirichlet_rate: f64::NAN,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bottleneck {
    pub from: usize,
    pub to: usize,
    /// The max-min capacity `J_{b1 b2}`.
    pub capacity: f64,
    /// Number of edges sharing the capacity on surviving paths (1 when unique).
    pub tied: usize,
}

/// A subproblem: nodes with `q` in `[lo, hi]`, edges with current at least `floor`.
#[derive(Clone, Copy)]
struct Window {
    lo: f64,
    hi: f64,
    floor: f64,
}

impl Window {
    fn contains(&self, g: &ReactiveGraph, i: usize) -> bool {
        g.q[i] >= self.lo && g.q[i] <= self.hi
    }
}

fn reach(g: &ReactiveGraph, w: Window, from: &[usize], threshold: f64, forward: bool, rev: &Reverse) -> Vec<bool> {
    let n = g.len();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    for &s in from {
        if w.contains(g, s) && !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(i) = queue.pop_front() {
        let step = |j: usize, c: f64, seen: &mut Vec<bool>, queue: &mut VecDeque<usize>| {
            if c >= threshold && !seen[j] && w.contains(g, j) {
                seen[j] = true;
                queue.push_back(j);
            }
        };
        if forward {
            for (&j, &c) in g.successors(i).iter().zip(g.currents(i)) {
                step(j, c, &mut seen, &mut queue);
            }
        } else {
            for &(j, c) in &rev.rows[i] {
                step(j, c, &mut seen, &mut queue);
            }
        }
    }
    seen
}

struct Reverse {
    rows: Vec<Vec<(usize, f64)>>,
}

impl Reverse {
    fn new(g: &ReactiveGraph) -> Self {
        let mut rows = vec![Vec::new(); g.len()];
        for (i, j, c) in g.edges() {
            rows[j].push((i, c));
        }
        Self { rows }
    }
}

fn bottleneck_in(g: &ReactiveGraph, rev: &Reverse, w: Window, sources: &[usize], targets: &[usize]) -> Result<Bottleneck> {
    let mut weights: Vec<f64> = g
        .edges()
        .filter(|&(i, j, c)| c >= w.floor && w.contains(g, i) && w.contains(g, j))
        .map(|e| e.2)
        .collect();
    weights.sort_by(f64::total_cmp);
    weights.dedup();
    let hits = |threshold: f64| {
        let seen = reach(g, w, sources, threshold, true, rev);
        targets.iter().any(|&t| seen[t])
    };
    if weights.is_empty() || !hits(weights[0]) {
        return Err(Error::Unreachable);
    }
    // Largest index whose weight still connects sources to targets.
    let (mut lo, mut hi) = (0, weights.len() - 1);
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if hits(weights[mid]) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let capacity = weights[lo];
    let fwd = reach(g, w, sources, capacity, true, rev);
    let bwd = reach(g, w, targets, capacity, false, rev);
    let mut candidates = g
        .edges()
        .filter(|&(i, j, c)| c == capacity && fwd[i] && bwd[j] && w.contains(g, i) && w.contains(g, j));
    let (from, to, _) = candidates.next().expect("a surviving path uses an edge at the capacity");
    let tied = 1 + candidates.count();
    Ok(Bottleneck {
        from,
        to,
        capacity,
        tied,
    })
}

/// The max-min capacity edge from `A` to `B`: binary search over the distinct
/// edge currents with breadth-first reachability at each probe. Ties go to
/// the lexicographically smallest `(i, j)`.
pub fn bottleneck(graph: &ReactiveGraph) -> Result<Bottleneck> {
    let rev = Reverse::new(graph);
    bottleneck_in(graph, &rev, full_window(), &graph.a, &graph.b)
}

fn full_window() -> Window {
    Window {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
        floor: f64::NEG_INFINITY,
    }
}

#[derive(Clone, Debug)]
pub struct DominantPath {
    pub nodes: Vec<usize>,
    /// Every bottleneck found by the recursion, outermost first.
    pub bottlenecks: Vec<Bottleneck>,
}

impl DominantPath {
    pub fn capacity(&self) -> f64 {
        self.bottlenecks.first().map_or(f64::INFINITY, |b| b.capacity)
    }

    /// Bottlenecks whose capacity was shared by more than one edge.
    pub fn ties(&self) -> usize {
        self.bottlenecks.iter().filter(|b| b.tied > 1).count()
    }

    pub fn to_path(&self, cloud: &PointCloud) -> DiscretePath {
        DiscretePath::from_ids(cloud, self.nodes.clone())
    }
}

/// Recursive bottleneck decomposition: find `(b1, b2)`, then solve `A -> b1`
/// on `{q <= q_b1}` and `b2 -> B` on `{q >= q_b2}`, keeping only edges at
/// least as strong as `J_{b1 b2}`.
pub fn dominant_path(graph: &ReactiveGraph) -> Result<DominantPath> {
    let rev = Reverse::new(graph);
    let mut out = DominantPath {
        nodes: Vec::new(),
        bottlenecks: Vec::new(),
    };
    recurse(graph, &rev, full_window(), &graph.a, &graph.b, &mut out)?;
    Ok(out)
}

fn recurse(g: &ReactiveGraph, rev: &Reverse, w: Window, sources: &[usize], targets: &[usize], out: &mut DominantPath) -> Result<()> {
    if let Some(&s) = sources.iter().find(|s| targets.contains(s)) {
        out.nodes.push(s);
        return Ok(());
    }
    let bn = bottleneck_in(g, rev, w, sources, targets)?;
    out.bottlenecks.push(bn);
    let (b1, b2) = (bn.from, bn.to);
    let left = Window {
        lo: w.lo,
        hi: g.q[b1],
        floor: bn.capacity,
    };
    let right = Window {
        lo: g.q[b2],
        hi: w.hi,
        floor: bn.capacity,
    };
    let wrap = |e: Error| match e {
        Error::Unreachable => Error::EmptySubgraph(b1, b2),
        other => other,
    };
    recurse(g, rev, left, sources, &[b1], out).map_err(wrap)?;
    recurse(g, rev, right, &[b2], targets, out).map_err(wrap)?;
    Ok(())
}

/// `(arc position of the edge midpoint, J)` for each consecutive pair on the path.
pub fn current_profile(nodes: &[usize], graph: &ReactiveGraph, cloud: &PointCloud) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(nodes.len().saturating_sub(1));
    let mut s = 0.0;
    for w in nodes.windows(2) {
        let j = graph.current(w[0], w[1]).ok_or(Error::NotAdjacent(w[0], w[1]))?;
        let d = cloud.distance(w[0], w[1]);
        out.push((s + 0.5 * d, j));
        s += d;
    }
    Ok(out)
}

pub fn save_current(graph: &ReactiveGraph, path: &Path) -> Result<()> {
    let mut out = String::from("i,j,J\n");
    for (i, j, c) in graph.edges() {
        writeln!(out, "{i},{j},{c}").unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes `order,id,x1..xl,q`.
pub fn save_dominant_path(nodes: &[usize], q: &[f64], cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut out = String::from("order,id");
    for k in 1..=cloud.dim() {
        write!(out, ",x{k}").unwrap();
    }
    out.push_str(",q\n");
    for (order, &i) in nodes.iter().enumerate() {
        write!(out, "{order},{i}").unwrap();
        for x in cloud.point(i) {
            write!(out, ",{x}").unwrap();
        }
        writeln!(out, ",{}", q[i]).unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::committor::solve_committor;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn density_formula() {
        let rho = reactive_density(&[1.0, 2.0, 1.0, 3.0], &[0.0, 1.0, 0.5, 0.2]).unwrap();
        assert_eq!(rho, vec![0.0, 0.0, 0.25, 3.0 * 0.2 * (1.0 - 0.2)]);
        let q = [0.1, 0.45, 0.7, 0.58];
        let rho = reactive_density(&[1.0; 4], &q).unwrap();
        let best = (0..4).max_by(|&a, &b| rho[a].total_cmp(&rho[b])).unwrap();
        assert_eq!(best, 1);
    }

    fn path_graph() -> RateMatrix {
        RateMatrix::reversible(vec![1.0; 4], &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap()
    }

    #[test]
    fn path_graph_current_and_rate() {
        let gen = path_graph();
        let f = solve_committor(&gen, &[0], &[3], 1e-12).unwrap();
        let g = reactive_current(&gen, &f).unwrap();
        let edges: Vec<_> = g.edges().collect();
        assert_eq!(edges.len(), 3);
        for (i, j, c) in edges {
            assert_eq!(j, i + 1);
            assert!((c - 1.0 / 3.0).abs() < 1e-14);
        }
        assert!((transition_rate(&g) - 1.0 / 3.0).abs() < 1e-14);
        assert!((g.dirichlet_rate - 1.0 / 3.0).abs() < 1e-14);
        assert!(kirchhoff_residual(&gen, &f) < 1e-14);
    }

    #[test]
    fn two_adjacent_states() {
        let gen = RateMatrix::reversible(vec![2.0, 1.0], &[(0, 1, 3.0)]).unwrap();
        let f = solve_committor(&gen, &[0], &[1], 1e-12).unwrap();
        let g = reactive_current(&gen, &f).unwrap();
        // pi_0 |C_0| Q_01 with unit volumes.
        assert!((g.rate - 2.0 * gen.rate(0, 1)).abs() < 1e-14);
    }

    fn chain(weights: &[f64]) -> ReactiveGraph {
        let n = weights.len() + 1;
        let q = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let edges: Vec<_> = weights.iter().enumerate().map(|(i, &w)| (i, i + 1, w)).collect();
        ReactiveGraph::from_edges(q, vec![0], vec![n - 1], &edges).unwrap()
    }

    #[test]
    fn single_path_bottleneck_and_profile() {
        let g = chain(&[5.0, 2.0, 7.0]);
        let b = bottleneck(&g).unwrap();
        assert_eq!((b.from, b.to, b.capacity, b.tied), (1, 2, 2.0, 1));
        let p = dominant_path(&g).unwrap();
        assert_eq!(p.nodes, vec![0, 1, 2, 3]);
        let cloud = PointCloud::new(&[vec![0.0], vec![1.0], vec![2.0], vec![4.0]], 1).unwrap();
        let prof = current_profile(&p.nodes, &g, &cloud).unwrap();
        assert_eq!(prof.iter().map(|e| e.1).collect::<Vec<_>>(), vec![5.0, 2.0, 7.0]);
        assert_eq!(prof.iter().map(|e| e.0).collect::<Vec<_>>(), vec![0.5, 1.5, 3.0]);
        assert_eq!(prof.iter().map(|e| e.1).fold(f64::INFINITY, f64::min), p.capacity());
        assert!(matches!(current_profile(&[0, 2], &g, &cloud), Err(Error::NotAdjacent(0, 2))));
    }

    #[test]
    fn parallel_routes_take_the_stronger() {
        // 0 -> 1 -> 3 with min 0.3, 0 -> 2 -> 3 with min 0.1.
        let q = vec![0.0, 0.4, 0.5, 1.0];
        let g = ReactiveGraph::from_edges(q, vec![0], vec![3], &[(0, 1, 0.9), (1, 3, 0.3), (0, 2, 0.1), (2, 3, 2.0)]).unwrap();
        assert_eq!(bottleneck(&g).unwrap().capacity, 0.3);
        assert_eq!(dominant_path(&g).unwrap().nodes, vec![0, 1, 3]);
    }

    #[test]
    fn unreachable_target() {
        let q = vec![0.0, 0.5, 1.0];
        let g = ReactiveGraph::from_edges(q, vec![0], vec![2], &[(0, 1, 1.0)]).unwrap();
        assert!(matches!(bottleneck(&g), Err(Error::Unreachable)));
    }

    #[test]
    fn ties_are_broken_and_reported() {
        let g = chain(&[1.0, 1.0, 1.0]);
        let p = dominant_path(&g).unwrap();
        assert_eq!(p.nodes, vec![0, 1, 2, 3]);
        assert!(p.ties() > 0);
        assert_eq!(p.bottlenecks[0].from, 0);
    }

    /// Random DAG on nodes ordered by q, with A = {0} and B = {n-1}.
    fn random_dag(seed: u64, n: usize) -> ReactiveGraph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(0.35) {
                    // Coarse weights so ties occur.
                    edges.push((i, j, rng.random_range(1..8) as f64));
                }
            }
        }
        edges.push((0, rng.random_range(1..n), 1.0 + rng.random_range(0..3) as f64));
        edges.sort_by_key(|e| (e.0, e.1));
        edges.dedup_by_key(|e| (e.0, e.1));
        ReactiveGraph::from_edges(q, vec![0], vec![n - 1], &edges).unwrap()
    }

    fn brute_force_capacity(g: &ReactiveGraph, i: usize, target: usize) -> f64 {
        if i == target {
            return f64::INFINITY;
        }
        g.successors(i)
            .iter()
            .zip(g.currents(i))
            .map(|(&j, &c)| c.min(brute_force_capacity(g, j, target)))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn matches_exhaustive_enumeration_on_random_dags() {
        let mut checked = 0;
        for seed in 0..200u64 {
            let n = 3 + (seed % 10) as usize;
            let g = random_dag(seed, n);
            let best = brute_force_capacity(&g, 0, n - 1);
            match dominant_path(&g) {
                Ok(p) => {
                    checked += 1;
                    assert_eq!(p.capacity(), best, "seed {seed}");
                    assert_eq!(p.nodes[0], 0);
                    assert_eq!(*p.nodes.last().unwrap(), n - 1);
                    let mut cap = f64::INFINITY;
                    for w in p.nodes.windows(2) {
                        assert!(g.q[w[1]] > g.q[w[0]]);
                        cap = cap.min(g.current(w[0], w[1]).expect("consecutive nodes adjacent"));
                    }
                    assert_eq!(cap, best, "seed {seed}");
                }
                Err(Error::Unreachable) => assert_eq!(best, f64::NEG_INFINITY, "seed {seed}"),
                Err(e) => panic!("seed {seed}: {e}"),
            }
        }
        assert!(checked > 150);
    }

    fn random_reversible(n: usize, seed: u64) -> RateMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0f64..2.0).exp()).collect();
        let mut edges: Vec<(usize, usize, f64)> = (1..n).map(|i| (rng.random_range(0..i), i, rng.random_range(-1.0f64..1.0).exp())).collect();
        for i in 0..n {
            let j = rng.random_range(0..n);
            if i != j && !edges.iter().any(|&(a, b, _)| (a, b) == (i, j) || (a, b) == (j, i)) {
                edges.push((i, j, rng.random_range(-1.0f64..1.0).exp()));
            }
        }
        RateMatrix::reversible(m, &edges).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn kirchhoff_rate_symmetry_and_monotone_paths(seed in 0u64..10_000, n in 4usize..120) {
            let gen = random_reversible(n, seed);
            let f = solve_committor(&gen, &[0], &[n - 1], 1e-12).unwrap();
            prop_assert!(kirchhoff_residual(&gen, &f) <= 1e-11);
            let g = reactive_current(&gen, &f).unwrap();
            prop_assert!(g.rate > 0.0);
            prop_assert!((g.rate - g.dirichlet_rate).abs() <= 1e-10 * g.rate);
            for (i, j, c) in g.edges() {
                prop_assert!(c > 0.0 && f.q[j] > f.q[i]);
            }
            let back = solve_committor(&gen, &[n - 1], &[0], 1e-12).unwrap();
            let gb = reactive_current(&gen, &back).unwrap();
            prop_assert!((gb.rate - g.rate).abs() <= 1e-9 * g.rate);
            let p = dominant_path(&g).unwrap();
            for w in p.nodes.windows(2) {
                prop_assert!(f.q[w[1]] > f.q[w[0]]);
            }
        }
    }

    #[test]
    fn rate_matches_long_run_crossing_frequency() {
        // 8-state reversible chain; count A -> B reactive crossings along a long jump-chain run.
        let gen = random_reversible(8, 42);
        let (a, b) = (vec![0], vec![7]);
        let f = solve_committor(&gen, &a, &b, 1e-13).unwrap();
        let g = reactive_current(&gen, &f).unwrap();
        let total_mass: f64 = gen.measure().iter().sum();
        let predicted = g.rate / total_mass;

        let jc = crate::generator::jump_chain(&gen).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut state = 0;
        let mut last_in_a = true;
        let mut crossings = 0u64;
        let mut time = 0.0;
        for _ in 0..10_000_000u64 {
            let u: f64 = rng.random();
            time += -(1.0 - u).ln() / jc.rate(state);
            let eta: f64 = rng.random();
            let mut acc = 0.0;
            let probs = jc.probabilities(state);
            let mut next = *jc.neighbors(state).last().unwrap();
            for (k, &p) in probs.iter().enumerate() {
                acc += p;
                if acc >= eta {
                    next = jc.neighbors(state)[k];
                    break;
                }
            }
            state = next;
            if a.contains(&state) {
                last_in_a = true;
            } else if b.contains(&state) {
                if last_in_a {
                    crossings += 1;
                }
                last_in_a = false;
            }
        }
        let observed = crossings as f64 / time;
        assert!((observed / predicted - 1.0).abs() < 0.1, "observed {observed} predicted {predicted}");
    }
}
