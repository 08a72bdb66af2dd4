//! Approximate Voronoi tessellation of a sampled manifold.
//!
//! Each cell is computed in the tangent plane of its generator: the k nearest
//! neighbours are projected onto the PCA tangent space and the cell is the
//! intersection of the bisector half-planes, which is exact for flat clouds.
//! Face measures are then symmetrised so that `|G_ij| = |G_ji|`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use super::neighbors::all_k_nearest;
use super::PointCloud;
use crate::error::{Error, Result};

pub const DEFAULT_NEIGHBORS: usize = 20;

/// Sides of the polygon standing in for the clipping disk.
const DISK_SIDES: usize = 64;
/// Faces shorter than this fraction of the local radius are dropped.
const FACE_FLOOR: f64 = 1e-12;

/// Orthonormal basis of the estimated tangent space at a sample.
#[derive(Clone, Debug)]
pub struct TangentFrame {
    pub origin: usize,
    pub basis: Vec<Vec<f64>>,
}

impl TangentFrame {
    /// Coordinates of `p - origin_point` in the frame.
    pub fn project(&self, origin_point: &[f64], p: &[f64]) -> Vec<f64> {
        self.basis
            .iter()
            .map(|b| b.iter().zip(p.iter().zip(origin_point)).map(|(e, (x, o))| e * (x - o)).sum())
            .collect()
    }
}

/// PCA tangent frame from the sample and its neighbours.
pub fn tangent_frame(cloud: &PointCloud, origin: usize, neighbors: &[usize]) -> Result<TangentFrame> {
    let dim = cloud.dim();
    let d = cloud.intrinsic_dim();
    let members: Vec<&[f64]> = std::iter::once(origin).chain(neighbors.iter().copied()).map(|j| cloud.point(j)).collect();
    let count = members.len() as f64;
    let mut mean = vec![0.0; dim];
    for p in &members {
        for (m, x) in mean.iter_mut().zip(p.iter()) {
            *m += x / count;
        }
    }
    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for p in &members {
        for a in 0..dim {
            let da = p[a] - mean[a];
            for b in a..dim {
                cov[(a, b)] += da * (p[b] - mean[b]);
            }
        }
    }
    for a in 0..dim {
        for b in 0..a {
            cov[(a, b)] = cov[(b, a)];
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]];
    let last = eig.eigenvalues[order[d - 1]];
    if !(top > 0.0) || last <= 1e-12 * top {
        return Err(Error::DegenerateGeometry {
            index: origin,
            reason: format!("neighbourhood spans fewer than {d} tangent directions"),
        });
    }
    let basis = order[..d]
        .iter()
        .map(|&k| eig.eigenvectors.column(k).iter().copied().collect())
        .collect();
    Ok(TangentFrame { origin, basis })
}

/// Cell volumes `|C_i|`, symmetric face measures `|G_ij|` and adjacency `VF(i)`,
/// stored as compressed rows with neighbours in ascending order.
#[derive(Clone, Debug, PartialEq)]
pub struct Tessellation {
    volumes: Vec<f64>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    areas: Vec<f64>,
    clipped: Vec<usize>,
}

impl Tessellation {
    /// Assemble from cell volumes and undirected faces `(i, j, area)`.
    pub fn from_faces(volumes: Vec<f64>, faces: &[(usize, usize, f64)]) -> Result<Self> {
        let n = volumes.len();
        if let Some(i) = volumes.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument(format!("cell {i} has non-positive volume {}", volumes[i])));
        }
        let mut directed = Vec::with_capacity(2 * faces.len());
        for &(i, j, a) in faces {
            if i >= n || j >= n || i == j {
                return Err(Error::InvalidArgument(format!("invalid face ({i}, {j}) for {n} cells")));
            }
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::InvalidArgument(format!("face ({i}, {j}) has non-positive area {a}")));
            }
            directed.push((i, j, a));
            directed.push((j, i, a));
        }
        directed.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        if let Some(w) = directed.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::InvalidArgument(format!("face ({}, {}) listed twice", w[0].0, w[0].1)));
        }
        Ok(Self::from_sorted_directed(volumes, &directed, Vec::new()))
    }

    fn from_sorted_directed(volumes: Vec<f64>, directed: &[(usize, usize, f64)], clipped: Vec<usize>) -> Self {
        let n = volumes.len();
        let mut offsets = vec![0; n + 1];
        for &(i, _, _) in directed {
            offsets[i + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        Self {
            volumes,
            offsets,
            neighbors: directed.iter().map(|e| e.1).collect(),
            areas: directed.iter().map(|e| e.2).collect(),
            clipped,
        }
    }

    /// Record which cells were clipped (as read back from a file).
    pub fn with_clipped(mut self, mut clipped: Vec<usize>) -> Self {
        clipped.sort_unstable();
        self.clipped = clipped;
        self
    }

    pub fn len(&self) -> usize {
        self.volumes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volumes.is_empty()
    }

    pub fn volume(&self, i: usize) -> f64 {
        self.volumes[i]
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    /// `VF(i)` in ascending order.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Face measures aligned with [`Self::neighbors`].
    pub fn face_areas(&self, i: usize) -> &[f64] {
        &self.areas[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn face_area(&self, i: usize, j: usize) -> f64 {
        self.neighbors(i).binary_search(&j).map_or(0.0, |k| self.face_areas(i)[k])
    }

    /// Undirected faces `(i, j, area)` with `i < j`.
    pub fn faces(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.len()).flat_map(move |i| {
            self.neighbors(i)
                .iter()
                .zip(self.face_areas(i))
                .filter(move |(&j, _)| j > i)
                .map(move |(&j, &a)| (i, j, a))
        })
    }

    pub fn face_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    /// Cells that were left open by their neighbours and cut off by the clipping disk.
    pub fn clipped_cells(&self) -> &[usize] {
        &self.clipped
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }

    /// Connected components of the adjacency graph, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut label = vec![usize::MAX; n];
        let mut comps = Vec::new();
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            let id = comps.len();
            let mut members = vec![s];
            label[s] = id;
            let mut head = 0;
            while head < members.len() {
                let u = members[head];
                head += 1;
                for &v in self.neighbors(u) {
                    if label[v] == usize::MAX {
                        label[v] = id;
                        members.push(v);
                    }
                }
            }
            members.sort_unstable();
            comps.push(members);
        }
        comps
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }
}

struct Cell {
    volume: f64,
    faces: Vec<(usize, f64)>,
    clipped: bool,
}

/// Build the tangent-plane Voronoi tessellation with `k` neighbours per sample.
pub fn build_tessellation(cloud: &PointCloud, k: usize) -> Result<Tessellation> {
    let d = cloud.intrinsic_dim();
    if d > 2 {
        return Err(Error::InvalidArgument(format!("tessellation supports intrinsic dimension 1 or 2, got {d}")));
    }
    if k < d + 2 {
        return Err(Error::InvalidArgument(format!("need k >= {} neighbours, got {k}", d + 2)));
    }
    if k >= cloud.len() {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds the {} other samples", cloud.len() - 1)));
    }
    let knn = all_k_nearest(cloud, k);
    let cells: Vec<Cell> = (0..cloud.len())
        .into_par_iter()
        .map(|i| local_cell(cloud, i, &knn[i]))
        .collect::<Result<_>>()?;

    let mut directed = Vec::new();
    let mut clipped = Vec::new();
    for (i, cell) in cells.iter().enumerate() {
        if cell.clipped {
            clipped.push(i);
        }
        for &(j, a) in &cell.faces {
            directed.push((i, j, 0.5 * a));
            directed.push((j, i, 0.5 * a));
        }
    }
    directed.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
    let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(directed.len());
    for e in directed {
        match merged.last_mut() {
            Some(last) if (last.0, last.1) == (e.0, e.1) => last.2 += e.2,
            _ => merged.push(e),
        }
    }
    // (a + b) / 2 is evaluated in the same order for (i, j) and (j, i).
    for e in merged.iter_mut() {
        let (lo, hi) = (e.0.min(e.1), e.0.max(e.1));
        let own = cells[lo].faces.iter().find(|f| f.0 == hi).map_or(0.0, |f| f.1);
        let other = cells[hi].faces.iter().find(|f| f.0 == lo).map_or(0.0, |f| f.1);
        e.2 = 0.5 * (own + other);
    }
    let volumes = cells.iter().map(|c| c.volume).collect();
    Ok(Tessellation::from_sorted_directed(volumes, &merged, clipped))
}

fn local_cell(cloud: &PointCloud, i: usize, neighbors: &[usize]) -> Result<Cell> {
    let frame = tangent_frame(cloud, i, neighbors)?;
    let origin = cloud.point(i);
    let projected: Vec<(usize, Vec<f64>)> = neighbors.iter().map(|&j| (j, frame.project(origin, cloud.point(j)))).collect();
    let radius = projected
        .iter()
        .map(|(_, p)| p.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    if !(radius > 0.0) {
        return Err(Error::DegenerateGeometry {
            index: i,
            reason: "all neighbours project onto the sample".into(),
        });
    }
    let cell = match cloud.intrinsic_dim() {
        1 => interval_cell(&projected, radius),
        _ => polygon_cell(&projected, radius),
    };
    if !(cell.volume > 0.0) {
        return Err(Error::DegenerateGeometry {
            index: i,
            reason: "empty Voronoi cell".into(),
        });
    }
    Ok(cell)
}

fn interval_cell(projected: &[(usize, Vec<f64>)], radius: f64) -> Cell {
    let mut left = (-radius, None);
    let mut right = (radius, None);
    for (j, p) in projected {
        let half = 0.5 * p[0];
        if p[0] < 0.0 && half > left.0 {
            left = (half, Some(*j));
        } else if p[0] > 0.0 && half < right.0 {
            right = (half, Some(*j));
        }
    }
    let faces = [left.1, right.1].into_iter().flatten().map(|j| (j, 1.0)).collect();
    Cell {
        volume: right.0 - left.0,
        faces,
        clipped: left.1.is_none() || right.1.is_none(),
    }
}

/// Convex polygon with a label per edge; edge `k` runs from vertex `k` to `k + 1`.
struct Polygon {
    vertices: Vec<[f64; 2]>,
    labels: Vec<Option<usize>>,
}

impl Polygon {
    fn disk(radius: f64) -> Self {
        let outer = radius / (PI / DISK_SIDES as f64).cos();
        let vertices = (0..DISK_SIDES)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / DISK_SIDES as f64;
                [outer * a.cos(), outer * a.sin()]
            })
            .collect();
        Self {
            vertices,
            labels: vec![None; DISK_SIDES],
        }
    }

    /// Keep `{x : x . normal <= offset}`; the new edge is labelled `label`.
    fn clip(&mut self, normal: [f64; 2], offset: f64, label: usize) {
        let m = self.vertices.len();
        let side = |v: &[f64; 2]| v[0] * normal[0] + v[1] * normal[1] - offset;
        let mut vertices = Vec::with_capacity(m + 1);
        let mut labels = Vec::with_capacity(m + 1);
        for k in 0..m {
            let cur = self.vertices[k];
            let nxt = self.vertices[(k + 1) % m];
            let (fc, fnx) = (side(&cur), side(&nxt));
            let cut = |t: f64| [cur[0] + t * (nxt[0] - cur[0]), cur[1] + t * (nxt[1] - cur[1])];
            if fc <= 0.0 {
                vertices.push(cur);
                labels.push(self.labels[k]);
                if fnx > 0.0 {
                    vertices.push(cut(fc / (fc - fnx)));
                    labels.push(Some(label));
                }
            } else if fnx <= 0.0 {
                vertices.push(cut(fc / (fc - fnx)));
                labels.push(self.labels[k]);
            }
        }
        self.vertices = vertices;
        self.labels = labels;
    }

    fn area(&self) -> f64 {
        let m = self.vertices.len();
        0.5 * (0..m)
            .map(|k| {
                let a = self.vertices[k];
                let b = self.vertices[(k + 1) % m];
                a[0] * b[1] - a[1] * b[0]
            })
            .sum::<f64>()
    }

    fn edge_lengths(&self) -> impl Iterator<Item = (Option<usize>, f64)> + '_ {
        let m = self.vertices.len();
        (0..m).map(move |k| {
            let a = self.vertices[k];
            let b = self.vertices[(k + 1) % m];
            (self.labels[k], (b[0] - a[0]).hypot(b[1] - a[1]))
        })
    }
}

fn polygon_cell(projected: &[(usize, Vec<f64>)], radius: f64) -> Cell {
    let mut poly = Polygon::disk(radius);
    for (j, p) in projected {
        let norm2 = p[0] * p[0] + p[1] * p[1];
        if norm2 <= (FACE_FLOOR * radius).powi(2) {
            continue;
        }
        poly.clip([p[0], p[1]], 0.5 * norm2, *j);
        if poly.vertices.len() < 3 {
            break;
        }
    }
    let floor = FACE_FLOOR * radius;
    let mut faces: Vec<(usize, f64)> = Vec::new();
    let mut clipped = false;
    for (label, len) in poly.edge_lengths() {
        if len <= floor {
            continue;
        }
        match label {
            None => clipped = true,
            Some(j) => match faces.iter_mut().find(|f| f.0 == j) {
                Some(f) => f.1 += len,
                None => faces.push((j, len)),
            },
        }
    }
    faces.retain(|f| f.1 > floor);
    faces.sort_by_key(|f| f.0);
    Cell {
        volume: if poly.vertices.len() < 3 { 0.0 } else { poly.area() },
        faces,
        clipped,
    }
}
