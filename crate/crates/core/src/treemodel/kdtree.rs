//! A static 3-d tree over a point slice.
//!
//! Nearest queries order candidates by `(squared distance, point index)`, so
//! equidistant points resolve to the lowest index.

use crate::geometry::Vec3;

const LEAF_SIZE: usize = 8;

#[derive(Debug)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

#[derive(Debug)]
pub struct KdTree<'a> {
    points: &'a [Vec3],
    order: Vec<usize>,
    root: Option<Node>,
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a [Vec3]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let root = if points.is_empty() {
            None
        } else {
            let n = order.len();
            Some(build(points, &mut order, 0, n))
        };
        KdTree {
            points,
            order,
            root,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the nearest point and its squared distance.
    pub fn nearest(&self, query: &Vec3) -> Option<(usize, f64)> {
        let root = self.root.as_ref()?;
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_in(root, query, &mut best);
        Some(best)
    }

    fn nearest_in(&self, node: &Node, query: &Vec3, best: &mut (usize, f64)) {
        match node {
            Node::Leaf { start, end } => {
                for &i in &self.order[*start..*end] {
                    let d = (self.points[i] - query).norm_squared();
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let delta = query[*axis] - value;
                let (near, far) = if delta <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.nearest_in(near, query, best);
                // `<=` keeps equidistant points on the far side in play for the
                // index tie-break.
                if delta * delta <= best.1 {
                    self.nearest_in(far, query, best);
                }
            }
        }
    }

    /// Indices of all points within `radius` (inclusive) of `query`.
    pub fn within(&self, query: &Vec3, radius: f64, out: &mut Vec<usize>) {
        if let Some(root) = &self.root {
            self.within_in(root, query, radius * radius, radius, out);
        }
    }

    fn within_in(&self, node: &Node, query: &Vec3, r2: f64, r: f64, out: &mut Vec<usize>) {
        match node {
            Node::Leaf { start, end } => {
                out.extend(
                    self.order[*start..*end]
                        .iter()
                        .copied()
                        .filter(|&i| (self.points[i] - query).norm_squared() <= r2),
                );
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let delta = query[*axis] - value;
                if delta <= r {
                    self.within_in(left, query, r2, r, out);
                }
                if delta >= -r {
                    self.within_in(right, query, r2, r, out);
                }
            }
        }
    }
}

fn build(points: &[Vec3], order: &mut [usize], start: usize, end: usize) -> Node {
    if end - start <= LEAF_SIZE {
        return Node::Leaf { start, end };
    }
    let slice = &mut order[start..end];
    let (mut lo, mut hi) = (Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY));
    for &i in slice.iter() {
        lo = lo.inf(&points[i]);
        hi = hi.sup(&points[i]);
    }
    let axis = (hi - lo).imax();
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
    let value = points[slice[mid]][axis];
    // left holds [start, start+mid), all <= value; right holds the rest, all >= value
    let left = build(points, order, start, start + mid);
    let right = build(points, order, start + mid, end);
    Node::Split {
        axis,
        value,
        left: Box::new(left),
        right: Box::new(right),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_nearest(points: &[Vec3], q: &Vec3) -> usize {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, p) in points.iter().enumerate() {
            let d = (p - q).norm_squared();
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vec3> = (0..500)
            .map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen()))
            .collect();
        let tree = KdTree::new(&pts);
        for _ in 0..200 {
            let q = Vec3::new(rng.gen(), rng.gen(), rng.gen());
            assert_eq!(tree.nearest(&q).unwrap().0, brute_nearest(&pts, &q));
            let mut found = Vec::new();
            tree.within(&q, 0.1, &mut found);
            found.sort_unstable();
            let expected: Vec<usize> = (0..pts.len())
                .filter(|&i| (pts[i] - q).norm() <= 0.1)
                .collect();
            assert_eq!(found, expected);
        }
    }

    #[test]
    fn ties_pick_lowest_index() {
        // many duplicates spread across leaves
        let pts: Vec<Vec3> = (0..40)
            .map(|i| {
                if i % 3 == 0 {
                    Vec3::new(1.0, 0.0, 0.0)
                } else {
                    Vec3::new(-1.0, 0.0, 0.0)
                }
            })
            .collect();
        let tree = KdTree::new(&pts);
        assert_eq!(tree.nearest(&Vec3::zeros()).unwrap().0, 0);
        assert_eq!(tree.nearest(&Vec3::new(-0.5, 0.0, 0.0)).unwrap().0, 1);
    }
}
