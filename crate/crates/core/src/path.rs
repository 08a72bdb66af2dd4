//! Ordered point sequences with arc-length bookkeeping.

use crate::pointcloud::{euclidean, PointCloud};

#[derive(Clone, Debug, PartialEq)]
pub struct DiscretePath {
    pub points: Vec<Vec<f64>>,
    /// Sample indices when the path lives on a point cloud.
    pub ids: Option<Vec<usize>>,
}

impl DiscretePath {
    pub fn from_points(points: Vec<Vec<f64>>) -> Self {
        Self { points, ids: None }
    }

    pub fn from_ids(cloud: &PointCloud, ids: Vec<usize>) -> Self {
        Self {
            points: ids.iter().map(|&i| cloud.point(i).to_vec()).collect(),
            ids: Some(ids),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Cumulative arc length at each point, starting from 0.
    pub fn arc_lengths(&self) -> Vec<f64> {
        cumulative_lengths(&self.points)
    }

    pub fn length(&self) -> f64 {
        self.arc_lengths().last().copied().unwrap_or(0.0)
    }

    /// Symmetric Hausdorff distance between the vertex sets.
    pub fn hausdorff(&self, other: &DiscretePath) -> f64 {
        hausdorff(&self.points, &other.points)
    }
}

pub fn cumulative_lengths(points: &[Vec<f64>]) -> Vec<f64> {
    let mut s = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    for (k, p) in points.iter().enumerate() {
        if k > 0 {
            acc += euclidean(&points[k - 1], p);
        }
        s.push(acc);
    }
    s
}

pub fn hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let directed = |x: &[Vec<f64>], y: &[Vec<f64>]| {
        x.iter()
            .map(|p| y.iter().map(|q| euclidean(p, q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}
