//! Mean transition path from controlled-walk samples: time-weighted ball
//! averages, equal-spacing reparameterization, and projection back onto the
//! visited samples.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::path::cumulative_lengths;
use crate::pointcloud::{euclidean, median_nearest_distance, PointCloud};
use crate::sampler::TrajectoryRecord;

/// Fraction of empty balls above which an iteration aborts.
pub const MAX_EMPTY_FRACTION: f64 = 0.2;
pub const DEFAULT_R0_FACTOR: f64 = 5.0;
/// Relative chord spread at which resampling stops refining.
const SPACING_TOL: f64 = 1e-13;
/// Spread above which the sliding passes count as stalled, and below which
/// a polyline is already evenly spaced.
const STALLED_SPREAD: f64 = 1e-10;
pub const DEFAULT_TOL: f64 = 1e-8;

/// Total residence time per visited state, pooled over records.
#[derive(Clone, Debug)]
pub struct Visits {
    pub ids: Vec<usize>,
    pub weights: Vec<f64>,
}

impl Visits {
    pub fn from_records(records: &[TrajectoryRecord], n: usize) -> Self {
        let mut time = vec![0.0; n];
        let mut seen = vec![false; n];
        for r in records {
            for (&i, &dt) in r.states.iter().zip(&r.dt) {
                time[i] += dt;
                seen[i] = true;
            }
        }
        let ids: Vec<usize> = (0..n).filter(|&i| seen[i]).collect();
        let weights = ids.iter().map(|&i| time[i]).collect();
        Self { ids, weights }
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn total_time(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn nearest(&self, cloud: &PointCloud, p: &[f64]) -> Option<usize> {
        self.ids
            .iter()
            .map(|&i| (i, euclidean(cloud.point(i), p)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|e| e.0)
    }
}

/// Visited states within distance `r0` of `p`, each with its accumulated residence time.
pub fn collect_ball(visits: &Visits, cloud: &PointCloud, p: &[f64], r0: f64) -> Vec<(usize, f64)> {
    visits
        .ids
        .iter()
        .zip(&visits.weights)
        .filter(|(&i, _)| euclidean(cloud.point(i), p) <= r0)
        .map(|(&i, &w)| (i, w))
        .collect()
}

/// Weighted mean of `(point, weight)` pairs; `None` for an empty set.
pub fn local_mean<'a>(samples: impl IntoIterator<Item = (&'a [f64], f64)>) -> Option<Vec<f64>> {
    let mut total = 0.0;
    let mut acc: Vec<f64> = Vec::new();
    for (p, w) in samples {
        if acc.is_empty() {
            acc = vec![0.0; p.len()];
        }
        for (a, x) in acc.iter_mut().zip(p) {
            *a += w * x;
        }
        total += w;
    }
    if acc.is_empty() || !(total > 0.0) {
        return None;
    }
    Some(acc.into_iter().map(|a| a / total).collect())
}

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect()
}

/// Points `p_0..p_{m-2}` placed along the polyline, each the first exit of
/// the curve from the ball of radius `h` around its predecessor, together
/// with `|p_last - p_{m-2}| - h`. `None` when the polyline ends first.
fn march(points: &[Vec<f64>], h: f64, m: usize) -> Option<(Vec<Vec<f64>>, f64)> {
    let mut out = vec![points[0].clone()];
    let (mut seg, mut t) = (0, 0.0);
    for _ in 1..m - 1 {
        let p = out.last().unwrap().clone();
        loop {
            if seg + 1 >= points.len() {
                return None;
            }
            let (a, b) = (&points[seg], &points[seg + 1]);
            let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
            let dd: f64 = d.iter().map(|x| x * x).sum();
            if dd > 0.0 {
                let w: Vec<f64> = a.iter().zip(&p).map(|(x, y)| x - y).collect();
                let bq: f64 = d.iter().zip(&w).map(|(x, y)| x * y).sum();
                let c = w.iter().map(|x| x * x).sum::<f64>() - h * h;
                let disc = bq * bq - dd * c;
                if disc >= 0.0 {
                    let root = (-bq + disc.sqrt()) / dd;
                    if root >= t && root <= 1.0 {
                        t = root;
                        out.push(lerp(a, b, root));
                        break;
                    }
                }
            }
            seg += 1;
            t = 0.0;
        }
    }
    let residual = euclidean(&points[points.len() - 1], out.last().unwrap()) - h;
    Some((out, residual))
}

/// Point at arc length `s` along a polyline with cumulative lengths `cum`.
fn point_at(points: &[Vec<f64>], cum: &[f64], s: f64) -> Vec<f64> {
    let last = points.len() - 1;
    if s <= 0.0 {
        return points[0].clone();
    }
    if s >= cum[last] {
        return points[last].clone();
    }
    let k = cum.partition_point(|&c| c <= s).clamp(1, last) - 1;
    let span = cum[k + 1] - cum[k];
    let t = if span > 0.0 { (s - cum[k]) / span } else { 0.0 };
    lerp(&points[k], &points[k + 1], t)
}

/// Largest deviation of a chord from the mean chord, relative to the mean.
fn chord_spread(points: &[Vec<f64>]) -> f64 {
    let chords: Vec<f64> = points.windows(2).map(|w| euclidean(&w[0], &w[1])).collect();
    let mean = chords.iter().sum::<f64>() / chords.len() as f64;
    chords.iter().map(|c| (c - mean).abs()).fold(0.0, f64::max) / mean
}

/// Equal arc length by linear interpolation, then repeated passes that move
/// the points along the input until consecutive chords agree.
fn equalize_from_arc_length(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = points.len();
    let cum = cumulative_lengths(points);
    let total = cum[m - 1];
    let mut s: Vec<f64> = (0..m).map(|k| total * k as f64 / (m - 1) as f64).collect();
    let mut out: Vec<Vec<f64>> = s.iter().map(|&x| point_at(points, &cum, x)).collect();
    for _ in 0..200 {
        if chord_spread(&out) <= SPACING_TOL {
            break;
        }
        // Map equal chord targets back to arc length along the input.
        let chords = cumulative_lengths(&out);
        let d = chords[m - 1];
        s = (0..m)
            .map(|k| {
                let target = d * k as f64 / (m - 1) as f64;
                let j = chords.partition_point(|&c| c <= target).clamp(1, m - 1) - 1;
                let span = chords[j + 1] - chords[j];
                let t = if span > 0.0 { (target - chords[j]) / span } else { 0.0 };
                s[j] + t * (s[j + 1] - s[j])
            })
            .collect();
        out = s.iter().map(|&x| point_at(points, &cum, x)).collect();
    }
    out
}

/// Equal chords by bisection on the chord length, marching first exits.
fn equalize_by_shooting(points: &[Vec<f64>], total: f64) -> Option<Vec<Vec<f64>>> {
    let m = points.len();
    let (mut lo, mut hi) = (0.0, total / (m - 1) as f64);
    let mut best: Option<(Vec<Vec<f64>>, f64)> = None;
    for _ in 0..200 {
        let h = 0.5 * (lo + hi);
        if !(h > lo && h < hi) {
            break;
        }
        match march(points, h, m) {
            Some((out, r)) => {
                if best.as_ref().is_none_or(|b| r.abs() < b.1.abs()) {
                    best = Some((out, r));
                }
                if r == 0.0 {
                    break;
                }
                if r > 0.0 {
                    lo = h;
                } else {
                    hi = h;
                }
            }
            None => hi = h,
        }
    }
    best.map(|(mut out, _)| {
        out.push(points[m - 1].clone());
        out
    })
}

/// Resample a polyline to the same number of points with equal chords.
///
/// The first pass places the points at equal arc length by linear
/// interpolation; further passes slide them along the input until the
/// chords agree. Should that stall, the chord length is instead found by
/// bisection, marching first exits from the start, and the more even of the
/// two results is kept. A polyline whose chords already agree is returned
/// unchanged. Endpoints are preserved.
pub fn reparameterize(points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let m = points.len();
    if m < 2 {
        return Err(Error::InvalidArgument("reparameterization needs at least two points".into()));
    }
    let total = *cumulative_lengths(points).last().unwrap();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("path has zero length".into()));
    }
    if m == 2 {
        return Ok(points.to_vec());
    }
    if chord_spread(points) <= STALLED_SPREAD {
        return Ok(points.to_vec());
    }
    let mut out = equalize_from_arc_length(points);
    if chord_spread(&out) > STALLED_SPREAD {
        if let Some(shot) = equalize_by_shooting(points, total) {
            if chord_spread(&shot) < chord_spread(&out) {
                out = shot;
            }
        }
    }
    out[0] = points[0].clone();
    out[m - 1] = points[m - 1].clone();
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct MeanPathState {
    /// Sample indices of the projected path; endpoints are the A and B representatives.
    pub ids: Vec<usize>,
    /// Path before projection (the reparameterized averages).
    pub raw: Vec<Vec<f64>>,
    pub r0: f64,
    pub iteration: usize,
    pub converged: bool,
    pub diagnostics: Vec<IterationDiagnostics>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationDiagnostics {
    pub iteration: usize,
    pub max_displacement: f64,
    pub empty_balls: usize,
}

impl MeanPathState {
    pub fn points(&self, cloud: &PointCloud) -> Vec<Vec<f64>> {
        self.ids.iter().map(|&i| cloud.point(i).to_vec()).collect()
    }
}

/// The chord from `a` to `b` with `m` points, interior points moved to the
/// nearest visited sample.
pub fn init_path(cloud: &PointCloud, a: usize, b: usize, m: usize, visits: &Visits, r0: f64) -> Result<MeanPathState> {
    if m < 3 {
        return Err(Error::InvalidArgument(format!("mean path needs at least 3 points, got {m}")));
    }
    if a == b || cloud.point(a) == cloud.point(b) {
        return Err(Error::InvalidArgument("A and B representatives coincide".into()));
    }
    if visits.is_empty() {
        return Err(Error::InvalidArgument("no visited samples".into()));
    }
    if !(r0 > 0.0) {
        return Err(Error::InvalidArgument(format!("ball radius must be positive, got {r0}")));
    }
    let (pa, pb) = (cloud.point(a), cloud.point(b));
    let raw: Vec<Vec<f64>> = (0..m).map(|k| lerp(pa, pb, k as f64 / (m - 1) as f64)).collect();
    let mut ids: Vec<usize> = raw.iter().map(|p| visits.nearest(cloud, p).unwrap()).collect();
    ids[0] = a;
    ids[m - 1] = b;
    Ok(MeanPathState {
        ids,
        raw,
        r0,
        iteration: 0,
        converged: false,
        diagnostics: Vec::new(),
    })
}

/// Repeat ball averaging, reparameterization and projection until the
/// projected indices stop changing, the raw path moves less than `tol`, or
/// `max_iterations` is reached.
pub fn iterate_mean_path(visits: &Visits, cloud: &PointCloud, mut state: MeanPathState, max_iterations: usize, tol: f64) -> Result<MeanPathState> {
    let m = state.ids.len();
    let (a, b) = (state.ids[0], state.ids[m - 1]);
    while state.iteration < max_iterations && !state.converged {
        let current = state.points(cloud);
        let averaged: Vec<(Vec<f64>, bool)> = (0..m)
            .into_par_iter()
            .map(|k| {
                if k == 0 || k == m - 1 {
                    return (current[k].clone(), false);
                }
                let ball = collect_ball(visits, cloud, &current[k], state.r0);
                match local_mean(ball.iter().map(|&(i, w)| (cloud.point(i), w))) {
                    Some(p) => (p, false),
                    None => (current[k].clone(), true),
                }
            })
            .collect();
        let empty = averaged.iter().filter(|e| e.1).count();
        if empty as f64 > MAX_EMPTY_FRACTION * (m - 2) as f64 {
            return Err(Error::EmptyBalls {
                empty,
                total: m - 2,
                r0: state.r0,
            });
        }
        let smoothed: Vec<Vec<f64>> = averaged.into_iter().map(|e| e.0).collect();
        let raw = reparameterize(&smoothed)?;
        let displacement = raw.iter().zip(&state.raw).map(|(p, q)| euclidean(p, q)).fold(0.0, f64::max);
        let mut ids: Vec<usize> = raw.iter().map(|p| visits.nearest(cloud, p).unwrap()).collect();
        ids[0] = a;
        ids[m - 1] = b;
        state.iteration += 1;
        state.diagnostics.push(IterationDiagnostics {
            iteration: state.iteration,
            max_displacement: displacement,
            empty_balls: empty,
        });
        state.converged = ids == state.ids || displacement < tol;
        state.ids = ids;
        state.raw = raw;
    }
    Ok(state)
}

/// Smallest radius for which every ball centred at an interior point of the
/// path holds at least `min_samples` visited states.
pub fn tune_r0(visits: &Visits, cloud: &PointCloud, path: &[Vec<f64>], min_samples: usize) -> Result<f64> {
    if min_samples == 0 || visits.ids.len() < min_samples {
        return Err(Error::InvalidArgument(format!(
            "cannot fit {min_samples} samples per ball with {} visited states",
            visits.ids.len()
        )));
    }
    let interior = &path[1..path.len().saturating_sub(1).max(1)];
    Ok(interior
        .iter()
        .map(|p| {
            let mut d: Vec<f64> = visits.ids.iter().map(|&i| euclidean(cloud.point(i), p)).collect();
            d.select_nth_unstable_by(min_samples - 1, f64::total_cmp);
            d[min_samples - 1]
        })
        .fold(0.0, f64::max))
}

pub fn default_r0(cloud: &PointCloud) -> f64 {
    DEFAULT_R0_FACTOR * median_nearest_distance(cloud)
}

/// Writes `order,id,x1..xl`.
pub fn save_mean_path(state: &MeanPathState, cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut out = String::from("order,id");
    for k in 1..=cloud.dim() {
        write!(out, ",x{k}").unwrap();
    }
    out.push('\n');
    for (order, &i) in state.ids.iter().enumerate() {
        write!(out, "{order},{i}").unwrap();
        for x in cloud.point(i) {
            write!(out, ",{x}").unwrap();
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn save_diagnostics(state: &MeanPathState, path: &Path) -> Result<()> {
    let mut out = String::from("iter,max_displacement,empty_balls\n");
    for d in &state.diagnostics {
        writeln!(out, "{},{},{}", d.iteration, d.max_displacement, d.empty_balls).unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(states: Vec<usize>, dt: Vec<f64>) -> TrajectoryRecord {
        TrajectoryRecord {
            jumps: states.len() - 1,
            states,
            dt,
            segments: Vec::new(),
            seed: 0,
            stream: 0,
        }
    }

    fn line_cloud(n: usize) -> PointCloud {
        PointCloud::new(&(0..n).map(|i| vec![i as f64 / (n - 1) as f64, 0.0]).collect::<Vec<_>>(), 1).unwrap()
    }

    #[test]
    fn ball_collection() {
        let cloud = line_cloud(11);
        let rec = record(vec![1, 2, 2, 5, 9], vec![0.5, 1.0, 2.0, 1.0, 3.0]);
        let v = Visits::from_records(&[rec.clone()], 11);
        assert!(collect_ball(&v, &cloud, &[0.5, 0.5], 0.1).is_empty());
        let all = collect_ball(&v, &cloud, &[0.5, 0.0], f64::INFINITY);
        assert_eq!(all.iter().map(|e| e.1).sum::<f64>(), rec.total_time());
        assert_eq!(collect_ball(&v, &cloud, &[0.2, 0.0], 0.05), vec![(2, 3.0)]);
        let doubled = record(vec![1, 2, 2, 5, 9], vec![0.5, 2.0, 4.0, 1.0, 3.0]);
        let v2 = Visits::from_records(&[doubled], 11);
        assert_eq!(collect_ball(&v2, &cloud, &[0.2, 0.0], 0.05), vec![(2, 6.0)]);
    }

    #[test]
    fn weighted_means() {
        let p = [3.0, -1.0];
        assert_eq!(local_mean([(&p[..], 2.0)]).unwrap(), vec![3.0, -1.0]);
        let (a, b) = ([0.0, 0.0], [2.0, 4.0]);
        assert_eq!(local_mean([(&a[..], 1.0), (&b[..], 1.0)]).unwrap(), vec![1.0, 2.0]);
        let (x, y) = ([0.0], [1.0]);
        assert_eq!(local_mean([(&x[..], 1.0), (&y[..], 3.0)]).unwrap(), vec![0.75]);
        assert!(local_mean(std::iter::empty()).is_none());
    }

    #[test]
    fn reparameterize_examples() {
        let out = reparameterize(&[vec![0.0], vec![0.2], vec![1.0]]).unwrap();
        assert_eq!(out[0], vec![0.0]);
        assert!((out[1][0] - 0.5).abs() < 1e-12);
        assert_eq!(out[2], vec![1.0]);
        let uniform: Vec<Vec<f64>> = (0..7).map(|k| vec![k as f64 * 0.5, 1.0 - k as f64 * 0.25]).collect();
        let again = reparameterize(&uniform).unwrap();
        for (p, q) in uniform.iter().zip(&again) {
            assert!(euclidean(p, q) < 1e-12);
        }
        assert!(reparameterize(&[vec![1.0, 1.0], vec![1.0, 1.0]]).is_err());
    }

    #[test]
    fn interpolation_weights_favour_the_near_endpoint() {
        // Target 0.25 on [0, 1] lies at the start of segment [0.25, 1] of the input
        // 0 -> 0.25 -> 1, so it must map to the vertex 0.25 itself.
        let out = reparameterize(&[vec![0.0], vec![0.25], vec![1.0], vec![1.0 + 1e-9]]).unwrap();
        assert!((out[1][0] - (1.0 + 1e-9) / 3.0).abs() < 1e-12);
        let cum = [0.0, 0.25, 1.0];
        let pts = [vec![0.0], vec![0.25], vec![1.0]];
        assert_eq!(point_at(&pts, &cum, 0.25), vec![0.25]);
        assert_eq!(point_at(&pts, &cum, 0.0), vec![0.0]);
        assert_eq!(point_at(&pts, &cum, 1.0), vec![1.0]);
    }

    fn wiggly(seed: u64, m: usize) -> Vec<Vec<f64>> {
        (0..m)
            .map(|k| {
                let t = k as f64 / (m - 1) as f64;
                let s = seed as f64;
                vec![t * 3.0 + 0.1 * (7.0 * t + s).sin(), (2.0 * t + s).sin(), 0.3 * (t * 5.0 - s).cos()]
            })
            .collect()
    }

    proptest! {
        #[test]
        fn reparameterization_contracts(seed in 0u64..1000, m in 3usize..120, shift in prop::collection::vec(-5.0f64..5.0, 3)) {
            let path = wiggly(seed, m);
            let once = reparameterize(&path).unwrap();
            prop_assert_eq!(&once[0], &path[0]);
            prop_assert_eq!(&once[m - 1], &path[m - 1]);
            let lens: Vec<f64> = once.windows(2).map(|w| euclidean(&w[0], &w[1])).collect();
            let mean = lens.iter().sum::<f64>() / lens.len() as f64;
            prop_assert!(lens.iter().all(|l| (l - mean).abs() <= 1e-9 * mean));
            let twice = reparameterize(&once).unwrap();
            for (p, q) in once.iter().zip(&twice) {
                prop_assert!(euclidean(p, q) <= 1e-12);
            }
            let moved: Vec<Vec<f64>> = path.iter().map(|p| p.iter().zip(&shift).map(|(x, s)| x + s).collect()).collect();
            let moved_once = reparameterize(&moved).unwrap();
            for (p, q) in once.iter().zip(&moved_once) {
                for k in 0..3 {
                    prop_assert!((p[k] + shift[k] - q[k]).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn local_means_are_translation_equivariant() {
        let pts = [vec![0.1, 0.3], vec![-2.0, 0.5], vec![1.5, 1.5]];
        let w = [0.5, 2.0, 1.25];
        let m = local_mean(pts.iter().map(|p| &p[..]).zip(w)).unwrap();
        let shifted: Vec<Vec<f64>> = pts.iter().map(|p| vec![p[0] + 3.0, p[1] - 1.0]).collect();
        let ms = local_mean(shifted.iter().map(|p| &p[..]).zip(w)).unwrap();
        assert!((ms[0] - m[0] - 3.0).abs() < 1e-12 && (ms[1] - m[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn tuned_radius_fills_every_ball() {
        let cloud = line_cloud(101);
        let v = Visits::from_records(&[record((0..101).step_by(2).collect(), vec![1.0; 51])], 101);
        let path: Vec<Vec<f64>> = (0..11).map(|k| vec![k as f64 / 10.0, 0.0]).collect();
        let r0 = tune_r0(&v, &cloud, &path, 5).unwrap();
        assert!(path[1..10].iter().all(|p| collect_ball(&v, &cloud, p, r0).len() >= 5));
        assert!(path[1..10].iter().any(|p| collect_ball(&v, &cloud, p, r0 * 0.999).len() < 5));
        assert!(tune_r0(&v, &cloud, &path, 52).is_err());
    }

    #[test]
    fn init_path_validation_and_pinning() {
        let cloud = line_cloud(21);
        let v = Visits::from_records(&[record((3..18).collect(), vec![1.0; 15])], 21);
        assert!(init_path(&cloud, 4, 4, 5, &v, 0.1).is_err());
        let empty = Visits { ids: vec![], weights: vec![] };
        assert!(init_path(&cloud, 0, 20, 5, &empty, 0.1).is_err());
        let s = init_path(&cloud, 0, 20, 5, &v, 0.1).unwrap();
        assert_eq!(s.ids, vec![0, 5, 10, 15, 20]);
        assert!(s.points(&cloud).iter().all(|p| p[1] == 0.0));
    }

    #[test]
    fn straight_line_samples_give_uniform_path() {
        let n = 101;
        let cloud = line_cloud(n);
        let v = Visits::from_records(&[record((1..n - 1).collect(), vec![1.0; n - 2])], n);
        let s = init_path(&cloud, 0, n - 1, 11, &v, 0.05).unwrap();
        let s = iterate_mean_path(&v, &cloud, s, 50, 1e-8).unwrap();
        assert!(s.converged);
        assert_eq!(s.ids, (0..11).map(|k| k * 10).collect::<Vec<_>>());
        assert_eq!(s.ids[0], 0);
        assert_eq!(s.ids[10], n - 1);
    }
}
