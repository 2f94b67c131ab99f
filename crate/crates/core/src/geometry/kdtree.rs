//! Exact k-nearest-neighbour index over a point configuration.
//!
//! The index is a kd-tree whose queries agree exactly with a brute-force
//! scan, including tie cases: candidates are ordered by `(distance, index)`
//! and subtree pruning keeps subtrees whose splitting plane lies exactly at
//! the current worst distance, so an equally distant point with a lower
//! index is never missed.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::Error;
use crate::point_process::{dist_sq, PointSet};
use crate::Result;

/// A neighbour slot returned by [`KnnIndex::knn`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighbor {
    /// Index of a point of the configuration.
    Point(usize),
    /// Self-sentinel: fewer candidates than requested exist, and the k-th
    /// neighbour falls back to the query point itself.
    Query,
}

impl Neighbor {
    pub fn index(&self) -> Option<usize> {
        match self {
            Neighbor::Point(i) => Some(*i),
            Neighbor::Query => None,
        }
    }
}

#[derive(Debug)]
struct Node {
    point: usize,
    axis: usize,
    left: Option<Box<Node>>,
    right: Option<Box<Node>>,
}

/// Immutable exact k-NN index over the locations of a [`PointSet`].
/// Concurrent read-only queries are safe.
#[derive(Debug)]
pub struct KnnIndex {
    locations: Vec<Vec<f64>>,
    root: Option<Box<Node>>,
    dim: usize,
}

/// Max-heap entry ordered lexicographically by `(dist_sq, index)`.
#[derive(PartialEq)]
struct Candidate {
    d2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2
            .total_cmp(&other.d2)
            .then_with(|| self.index.cmp(&other.index))
    }
}

impl KnnIndex {
    /// Build the index. Construction is single-threaded.
    pub fn build(points: &PointSet) -> Self {
        let locations: Vec<Vec<f64>> = (0..points.len()).map(|i| points.location(i).to_vec()).collect();
        let mut order: Vec<usize> = (0..locations.len()).collect();
        let root = Self::build_node(&locations, &mut order, 0, points.dim());
        KnnIndex { locations, root, dim: points.dim() }
    }

    fn build_node(locations: &[Vec<f64>], order: &mut [usize], depth: usize, dim: usize) -> Option<Box<Node>> {
        if order.is_empty() {
            return None;
        }
        let axis = depth % dim;
        order.sort_unstable_by(|a, b| {
            locations[*a][axis]
                .total_cmp(&locations[*b][axis])
                .then_with(|| a.cmp(b))
        });
        let mid = order.len() / 2;
        let point = order[mid];
        let (left, rest) = order.split_at_mut(mid);
        let right = &mut rest[1..];
        Some(Box::new(Node {
            point,
            axis,
            left: Self::build_node(locations, left, depth + 1, dim),
            right: Self::build_node(locations, right, depth + 1, dim),
        }))
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The `k` nearest points to `query` (excluding `exclude` if given),
    /// sorted by nondecreasing distance with ties broken by lowest index.
    /// If fewer than `k` candidates exist, the list is padded with
    /// [`Neighbor::Query`].
    pub fn knn(&self, query: &[f64], k: usize, exclude: Option<usize>) -> Vec<Neighbor> {
        assert!(k >= 1, "k must be >= 1");
        assert_eq!(query.len(), self.dim, "query dimension mismatch");
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        self.search(self.root.as_deref(), query, k, exclude, &mut heap);
        let mut found: Vec<Candidate> = heap.into_sorted_vec();
        let mut out: Vec<Neighbor> = found.drain(..).map(|c| Neighbor::Point(c.index)).collect();
        while out.len() < k {
            out.push(Neighbor::Query);
        }
        out
    }

    fn search(
        &self,
        node: Option<&Node>,
        query: &[f64],
        k: usize,
        exclude: Option<usize>,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        let Some(node) = node else { return };
        if exclude != Some(node.point) {
            let cand = Candidate { d2: dist_sq(query, &self.locations[node.point]), index: node.point };
            if heap.len() < k {
                heap.push(cand);
            } else if cand < *heap.peek().expect("non-empty heap") {
                heap.pop();
                heap.push(cand);
            }
        }
        let delta = query[node.axis] - self.locations[node.point][node.axis];
        let (near, far) = if delta <= 0.0 {
            (node.left.as_deref(), node.right.as_deref())
        } else {
            (node.right.as_deref(), node.left.as_deref())
        };
        self.search(near, query, k, exclude, heap);
        // Descend the far side unless the plane is strictly beyond the
        // current worst candidate; an exactly-equal plane distance can still
        // hide an equal-distance point with a lower index.
        let prune = heap.len() == k && delta * delta > heap.peek().expect("full heap").d2;
        if !prune {
            self.search(far, query, k, exclude, heap);
        }
    }

    /// Index of the nearest point to `z` (lowest index on ties).
    pub fn nearest_nucleus(&self, z: &[f64]) -> Result<usize> {
        if self.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        Ok(self.knn(z, 1, None)[0].index().expect("non-empty index"))
    }
}

/// Brute-force k-NN with the same tie rule as [`KnnIndex::knn`]; the
/// independent oracle the index is tested against.
pub fn brute_force_knn(points: &PointSet, query: &[f64], k: usize, exclude: Option<usize>) -> Vec<Neighbor> {
    let mut cands: Vec<(f64, usize)> = (0..points.len())
        .filter(|i| Some(*i) != exclude)
        .map(|i| (dist_sq(query, points.location(i)), i))
        .collect();
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    let mut out: Vec<Neighbor> = cands.into_iter().take(k).map(|(_, i)| Neighbor::Point(i)).collect();
    while out.len() < k {
        out.push(Neighbor::Query);
    }
    out
}
