//! Exhaustive nearest-neighbour queries. Ambient dimension is a runtime value
//! and clouds stay in the low thousands, so a linear scan per query is enough.

use rayon::prelude::*;

use super::{euclidean, PointCloud};

fn squared(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The `k` nearest other samples of point `i`, closest first (ties by index).
pub fn k_nearest(cloud: &PointCloud, i: usize, k: usize) -> Vec<usize> {
    let center = cloud.point(i);
    let mut cand: Vec<(f64, usize)> = cloud
        .points()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, p)| (squared(p, center), j))
        .collect();
    let k = k.min(cand.len());
    if k == 0 {
        return Vec::new();
    }
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, cmp);
        cand.truncate(k);
    }
    cand.sort_unstable_by(cmp);
    cand.into_iter().map(|(_, j)| j).collect()
}

pub(crate) fn all_k_nearest(cloud: &PointCloud, k: usize) -> Vec<Vec<usize>> {
    (0..cloud.len()).into_par_iter().map(|i| k_nearest(cloud, i, k)).collect()
}

/// Index into `candidates` of the candidate closest to `query` (first on ties).
pub fn nearest(cloud: &PointCloud, candidates: &[usize], query: &[f64]) -> Option<usize> {
    candidates
        .iter()
        .map(|&j| (squared(cloud.point(j), query), j))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, j)| j)
}

pub fn median_nearest_distance(cloud: &PointCloud) -> f64 {
    let mut d: Vec<f64> = (0..cloud.len())
        .into_par_iter()
        .map(|i| {
            let j = k_nearest(cloud, i, 1)[0];
            euclidean(cloud.point(i), cloud.point(j))
        })
        .collect();
    d.sort_by(f64::total_cmp);
    let m = d.len() / 2;
    if d.len() % 2 == 1 {
        d[m]
    } else {
        0.5 * (d[m - 1] + d[m])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_neighbours() {
        let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 0.0]).collect();
        let c = PointCloud::new(&pts, 1).unwrap();
        assert_eq!(k_nearest(&c, 2, 3), vec![1, 3, 0]);
        assert_eq!(k_nearest(&c, 0, 10).len(), 5);
        assert_eq!(nearest(&c, &[0, 4, 5], &[3.7, 1.0]), Some(4));
        assert!((median_nearest_distance(&c) - 1.0).abs() < 1e-15);
    }
}
