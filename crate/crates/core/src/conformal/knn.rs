//! Exact k-nearest-neighbour search under Euclidean distance.
//!
//! A k-d tree over the calibration features. Ties in distance are broken by
//! the lower point index, so results are identical to a brute-force scan that
//! sorts by `(distance, index)`.

use std::collections::BinaryHeap;

use crate::matrix::Matrix;

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
enum KdNode {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        dim: usize,
        value: f64,
        left: Box<KdNode>,
        right: Box<KdNode>,
    },
}

#[derive(Debug, Clone)]
pub struct KnnIndex {
    points: Matrix,
    /// Point indices permuted so every leaf owns a contiguous range.
    order: Vec<usize>,
    root: KdNode,
}

#[derive(PartialEq)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KnnIndex {
    pub fn new(points: Matrix) -> Self {
        let mut order: Vec<usize> = (0..points.rows()).collect();
        let n = order.len();
        let root = build(&points, &mut order, 0, n);
        KnnIndex { points, order, root }
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    /// Indices of the `k` nearest points to `query`, nearest first, skipping
    /// `exclude`. Returns fewer than `k` only if the index is smaller.
    pub fn nearest(&self, query: &[f64], k: usize, exclude: Option<usize>) -> Vec<usize> {
        if k == 0 {
            return Vec::new();
        }
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        self.search(&self.root, query, k, exclude, &mut heap);
        let mut out = heap.into_sorted_vec();
        out.truncate(k);
        out.into_iter().map(|c| c.index).collect()
    }

    fn search(
        &self,
        node: &KdNode,
        query: &[f64],
        k: usize,
        exclude: Option<usize>,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        match node {
            KdNode::Leaf { start, end } => {
                for &i in &self.order[*start..*end] {
                    if Some(i) == exclude {
                        continue;
                    }
                    let c = Candidate {
                        dist2: dist2(self.points.row(i), query),
                        index: i,
                    };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            KdNode::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = query[*dim] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, query, k, exclude, heap);
                // `<=` keeps equal-distance points on the far side reachable
                // for the index tie-break.
                if heap.len() < k || diff * diff <= heap.peek().expect("non-empty").dist2 {
                    self.search(far, query, k, exclude, heap);
                }
            }
        }
    }
}

fn build(points: &Matrix, order: &mut [usize], start: usize, end: usize) -> KdNode {
    let n = end - start;
    if n <= LEAF_SIZE || points.cols() == 0 {
        return KdNode::Leaf { start, end };
    }
    let slice = &mut order[start..end];
    // split on the widest dimension
    let dim = (0..points.cols())
        .map(|j| {
            let (lo, hi) = slice.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = points.get(i, j);
                (lo.min(v), hi.max(v))
            });
            (j, hi - lo)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(j, _)| j)
        .expect("at least one column");
    let mid = n / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        points.get(a, dim).total_cmp(&points.get(b, dim)).then(a.cmp(&b))
    });
    let value = points.get(slice[mid], dim);
    // left holds values <= `value`; right holds values >= `value`
    let left = build(points, order, start, start + mid);
    let right = build(points, order, start + mid, end);
    KdNode::Split {
        dim,
        value,
        left: Box::new(left),
        right: Box::new(right),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn brute(points: &Matrix, q: &[f64], k: usize, exclude: Option<usize>) -> Vec<usize> {
        let mut all: Vec<(f64, usize)> = (0..points.rows())
            .filter(|&i| Some(i) != exclude)
            .map(|i| (dist2(points.row(i), q), i))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.into_iter().take(k).map(|(_, i)| i).collect()
    }

    #[test]
    fn matches_brute_force_scan() {
        let mut rng = crate::seed::rng(3);
        for trial in 0..30 {
            let n = 1 + trial * 13;
            let d = 1 + trial % 4;
            // coarse grid values so distance ties are common
            let data: Vec<f64> = (0..n * d).map(|_| rng.random_range(0..6) as f64).collect();
            let pts = Matrix::from_vec(n, d, data).unwrap();
            let idx = KnnIndex::new(pts.clone());
            for _ in 0..20 {
                let q: Vec<f64> = (0..d).map(|_| rng.random_range(0..6) as f64 + 0.5 * rng.random_range(0..2) as f64).collect();
                let k = rng.random_range(1..=10);
                let ex = if rng.random_bool(0.5) { Some(rng.random_range(0..n)) } else { None };
                assert_eq!(idx.nearest(&q, k, ex), brute(&pts, &q, k, ex));
            }
        }
    }

    #[test]
    fn excluded_point_is_skipped() {
        let pts = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![5.0]]).unwrap();
        let idx = KnnIndex::new(pts);
        assert_eq!(idx.nearest(&[0.0], 1, None), vec![0]);
        assert_eq!(idx.nearest(&[0.0], 1, Some(0)), vec![1]);
        assert_eq!(idx.nearest(&[0.0], 5, Some(0)), vec![1, 2]);
    }
}
