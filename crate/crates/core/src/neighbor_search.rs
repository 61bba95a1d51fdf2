//! Exact k-d tree search.
//!
//! [`KdTree`] works in any dimension and answers radius and k-nearest
//! queries exactly: subtrees are skipped only when their axis-aligned lower
//! bound already rules every point out, and the bound never exceeds the
//! floating-point distance of a point behind it. [`SpatialIndex`] is the 3-D
//! wrapper used for point neighborhoods; it counts the radius queries it serves.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};

const LEAF_SIZE: usize = 16;

/// Squared Euclidean distance, summed in axis order.
#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// [`squared_distance`], or `None` once the running sum exceeds `bound`.
/// The sum is accumulated in the same order, so returned values are
/// bit-identical to [`squared_distance`].
#[inline]
pub fn squared_distance_within(a: &[f64], b: &[f64], bound: f64) -> Option<f64> {
    let mut acc = 0.0;
    for (chunk_a, chunk_b) in a.chunks(8).zip(b.chunks(8)) {
        for (x, y) in chunk_a.iter().zip(chunk_b) {
            acc += (x - y) * (x - y);
        }
        if acc > bound {
            return None;
        }
    }
    Some(acc)
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Static balanced k-d tree over `n` points of dimension `dim`.
#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    /// Coordinates, permuted into leaf order after the build.
    data: Vec<f64>,
    /// Tree position to original index.
    order: Vec<usize>,
    /// Original index to tree position.
    position: Vec<usize>,
    nodes: Vec<Node>,
}

impl KdTree {
    /// `data` is row-major, `data.len() == n * dim`.
    pub fn build(dim: usize, data: Vec<f64>) -> Self {
        assert!(dim > 0 && data.len().is_multiple_of(dim), "data length must be a multiple of dim");
        let n = data.len() / dim;
        let mut tree = Self { dim, data, order: (0..n).collect(), position: Vec::new(), nodes: Vec::new() };
        if n > 0 {
            let mut order = std::mem::take(&mut tree.order);
            tree.build_node(&mut order, 0);
            tree.order = order;
        }
        // leaf scans then walk contiguous memory
        tree.data = tree.order.iter().flat_map(|&i| tree.data[i * dim..(i + 1) * dim].iter().copied()).collect();
        tree.position = vec![0; n];
        for (pos, &i) in tree.order.iter().enumerate() {
            tree.position[i] = pos;
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.at(self.position[i])
    }

    fn at(&self, pos: usize) -> &[f64] {
        &self.data[pos * self.dim..(pos + 1) * self.dim]
    }

    fn build_node(&mut self, order: &mut [usize], offset: usize) -> usize {
        let id = self.nodes.len();
        if order.len() <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start: offset, end: offset + order.len() });
            return id;
        }
        // widest axis
        let mut axis = 0;
        let mut widest = f64::NEG_INFINITY;
        for a in 0..self.dim {
            let (lo, hi) = order.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let c = self.data[i * self.dim + a];
                (lo.min(c), hi.max(c))
            });
            if hi - lo > widest {
                widest = hi - lo;
                axis = a;
            }
        }
        if widest <= 0.0 {
            // all points identical
            self.nodes.push(Node::Leaf { start: offset, end: offset + order.len() });
            return id;
        }
        let mid = order.len() / 2;
        let dim = self.dim;
        let data = &self.data;
        order.select_nth_unstable_by(mid, |&a, &b| {
            data[a * dim + axis].total_cmp(&data[b * dim + axis]).then(a.cmp(&b))
        });
        let value = self.data[order[mid] * dim + axis];
        self.nodes.push(Node::Split { axis, value, left: 0, right: 0 });
        let (lo, hi) = order.split_at_mut(mid);
        let left = self.build_node(lo, offset);
        let right = self.build_node(hi, offset + mid);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    /// Indices `s` with `squared_distance(p_s, query) < radius²`, ascending.
    pub fn radius_search(&self, query: &[f64], radius: f64) -> Vec<usize> {
        debug_assert_eq!(query.len(), self.dim);
        let mut out = Vec::new();
        if self.is_empty() || !(radius > 0.0) {
            return out;
        }
        let mut offsets = vec![0.0; self.dim];
        self.radius_rec(0, query, radius * radius, &mut offsets, &mut out);
        out.sort_unstable();
        out
    }

    fn radius_rec(&self, id: usize, query: &[f64], r2: f64, offsets: &mut [f64], out: &mut Vec<usize>) {
        match self.nodes[id] {
            Node::Leaf { start, end } => {
                if let [qx, qy, qz] = *query {
                    for (pos, p) in self.data[start * 3..end * 3].chunks_exact(3).enumerate() {
                        // same summation order as `squared_distance`
                        let (dx, dy, dz) = (p[0] - qx, p[1] - qy, p[2] - qz);
                        if dx * dx + dy * dy + dz * dz < r2 {
                            out.push(self.order[start + pos]);
                        }
                    }
                } else {
                    for pos in start..end {
                        if squared_distance(self.at(pos), query) < r2 {
                            out.push(self.order[pos]);
                        }
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let (near, far, diff) = split_sides(query, axis, value, left, right);
                self.radius_rec(near, query, r2, offsets, out);
                let saved = std::mem::replace(&mut offsets[axis], diff);
                if cell_bound(offsets) < r2 {
                    self.radius_rec(far, query, r2, offsets, out);
                }
                offsets[axis] = saved;
            }
        }
    }

    /// The `k` nearest points as `(squared distance, index)`, ordered by
    /// distance and then by index.
    pub fn nearest(&self, query: &[f64], k: usize) -> Vec<(f64, usize)> {
        debug_assert_eq!(query.len(), self.dim);
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        if k == 0 || self.is_empty() {
            return best;
        }
        let mut offsets = vec![0.0; self.dim];
        self.nearest_rec(0, query, k, &mut offsets, &mut best);
        best
    }

    fn nearest_rec(&self, id: usize, query: &[f64], k: usize, offsets: &mut [f64], best: &mut Vec<(f64, usize)>) {
        match self.nodes[id] {
            Node::Leaf { start, end } => {
                for pos in start..end {
                    let bound = if best.len() == k { best[k - 1].0 } else { f64::INFINITY };
                    if let Some(d) = squared_distance_within(self.at(pos), query, bound) {
                        insert_bounded(best, k, (d, self.order[pos]));
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let (near, far, diff) = split_sides(query, axis, value, left, right);
                self.nearest_rec(near, query, k, offsets, best);
                let saved = std::mem::replace(&mut offsets[axis], diff);
                // ties must still be visited for the index tie-break
                if best.len() < k || cell_bound(offsets) <= best[k - 1].0 {
                    self.nearest_rec(far, query, k, offsets, best);
                }
                offsets[axis] = saved;
            }
        }
    }
}

/// Near child, far child and the query's gap to the split plane.
/// Left holds coordinates <= value, right >= value.
fn split_sides(query: &[f64], axis: usize, value: f64, left: usize, right: usize) -> (usize, usize, f64) {
    let diff = query[axis] - value;
    if diff <= 0.0 {
        (left, right, diff)
    } else {
        (right, left, diff)
    }
}

/// Lower bound on the squared distance from the query to any point of a
/// cell whose per-axis gaps are `offsets`. Each term is at most the rounded
/// term of a point in the cell, and the sum runs in the same axis order as
/// [`squared_distance`], so the bound never exceeds a point's computed distance.
fn cell_bound(offsets: &[f64]) -> f64 {
    offsets.iter().map(|x| x * x).sum()
}

fn lex_less(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Keeps `best` sorted and at most `k` long.
pub(crate) fn insert_bounded(best: &mut Vec<(f64, usize)>, k: usize, cand: (f64, usize)) {
    if best.len() == k && !lex_less(cand, best[k - 1]) {
        return;
    }
    let pos = best.iter().position(|&b| lex_less(cand, b)).unwrap_or(best.len());
    best.insert(pos, cand);
    best.truncate(k);
}

/// Radius-search index over a point cloud. Immutable once built; queries
/// may run concurrently.
#[derive(Debug)]
pub struct SpatialIndex {
    tree: KdTree,
    queries: AtomicUsize,
}

impl SpatialIndex {
    pub fn build(cloud: &PointCloud) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let data = cloud.points().iter().flat_map(|p| [p.x, p.y, p.z]).collect();
        Ok(Self { tree: KdTree::build(3, data), queries: AtomicUsize::new(0) })
    }

    /// Exactly the indices `s` with `‖p_s − query‖ < radius` (compared
    /// squared), ascending. A member query point finds itself.
    pub fn radius_search(&self, query: &Point3, radius: f64) -> Vec<usize> {
        self.queries.fetch_add(1, Ordering::Relaxed);
        self.tree.radius_search(query.coords.as_slice(), radius)
    }

    /// Number of radius queries served so far.
    pub fn query_count(&self) -> usize {
        self.queries.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }
}
