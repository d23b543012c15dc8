use alloc::vec::Vec;
use core::cmp::Ordering;

use nalgebra::Point3;

const LEAF_SIZE: usize = 8;

/// Exact k-nearest-neighbour index over a fixed point set.
///
/// Results are ordered by `(squared distance, index)`, so ties resolve to the
/// lower index and queries are fully deterministic.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point3<f64>>,
    perm: Vec<u32>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: u32, end: u32 },
    Split { axis: u8, value: f64, left: u32, right: u32 },
}

impl KdTree {
    pub fn new(points: &[Point3<f64>]) -> Self {
        let mut tree = Self {
            points: points.to_vec(),
            perm: (0..points.len() as u32).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build(&mut self, start: usize, end: usize) -> u32 {
        let id = self.nodes.len() as u32;
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start: start as u32, end: end as u32 });
            return id;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.perm[start..end] {
            let p = &self.points[i as usize];
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let axis = (0..3).max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b]))).unwrap_or(0);
        let mid = (start + end) / 2;
        let pts = &self.points;
        self.perm[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            pts[a as usize][axis].total_cmp(&pts[b as usize][axis]).then(a.cmp(&b))
        });
        let value = self.points[self.perm[mid] as usize][axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id as usize] = Node::Split { axis: axis as u8, value, left, right };
        id
    }

    /// The `k` nearest points to `query`, optionally skipping one index.
    pub fn knn(&self, query: &Point3<f64>, k: usize, exclude: Option<usize>) -> Vec<usize> {
        self.knn_with_distances(query, k, exclude).into_iter().map(|(_, i)| i).collect()
    }

    /// Like [`KdTree::knn`] but also returns squared distances.
    pub fn knn_with_distances(&self, query: &Point3<f64>, k: usize, exclude: Option<usize>) -> Vec<(f64, usize)> {
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        if k == 0 || self.nodes.is_empty() {
            return best;
        }
        self.search(0, query, k, exclude, &mut best);
        best
    }

    fn search(&self, node: u32, q: &Point3<f64>, k: usize, exclude: Option<usize>, best: &mut Vec<(f64, usize)>) {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &i in &self.perm[start as usize..end as usize] {
                    let i = i as usize;
                    if Some(i) == exclude {
                        continue;
                    }
                    let d2 = (self.points[i] - q).norm_squared();
                    insert_bounded(best, k, (d2, i));
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis as usize] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, k, exclude, best);
                if best.len() < k || diff * diff <= best[best.len() - 1].0 {
                    self.search(far, q, k, exclude, best);
                }
            }
        }
    }

    /// Distance to the nearest indexed point, or `None` when empty.
    pub fn nearest_distance(&self, query: &Point3<f64>) -> Option<f64> {
        self.knn_with_distances(query, 1, None).first().map(|(d2, _)| libm::sqrt(*d2))
    }

    /// All indices within `radius` of `query`, in ascending index order.
    pub fn within_radius(&self, query: &Point3<f64>, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.nodes.is_empty() {
            self.radius_search(0, query, radius * radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn radius_search(&self, node: u32, q: &Point3<f64>, r2: f64, out: &mut Vec<usize>) {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                out.extend(
                    self.perm[start as usize..end as usize]
                        .iter()
                        .map(|&i| i as usize)
                        .filter(|&i| (self.points[i] - q).norm_squared() <= r2),
                );
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis as usize] - value;
                if diff < 0.0 || diff * diff <= r2 {
                    self.radius_search(left, q, r2, out);
                }
                if diff >= 0.0 || diff * diff <= r2 {
                    self.radius_search(right, q, r2, out);
                }
            }
        }
    }
}

fn cmp_entry(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

fn insert_bounded(best: &mut Vec<(f64, usize)>, k: usize, e: (f64, usize)) {
    if best.len() == k && cmp_entry(&e, &best[k - 1]) != Ordering::Less {
        return;
    }
    let pos = best.partition_point(|x| cmp_entry(x, &e) == Ordering::Less);
    best.insert(pos, e);
    best.truncate(k);
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(points: &[Point3<f64>], q: &Point3<f64>, k: usize, exclude: Option<usize>) -> Vec<usize> {
        let mut all: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != exclude)
            .map(|(i, p)| ((p - q).norm_squared(), i))
            .collect();
        all.sort_by(cmp_entry);
        all.into_iter().take(k).map(|(_, i)| i).collect()
    }

    proptest! {
        #[test]
        fn knn_matches_brute_force(
            raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 1..200),
            k in 1usize..20,
            qi in 0usize..200,
        ) {
            // Quantize so exact ties actually occur.
            let pts: Vec<_> = raw.iter().map(|&(x, y, z)| Point3::new((x * 8.0).round(), (y * 8.0).round(), (z * 8.0).round())).collect();
            let tree = KdTree::new(&pts);
            let q = pts[qi % pts.len()];
            prop_assert_eq!(tree.knn(&q, k, Some(qi % pts.len())), brute(&pts, &q, k, Some(qi % pts.len())));
            let r = 3.0;
            let expect: Vec<usize> = (0..pts.len()).filter(|&i| (pts[i] - q).norm_squared() <= r * r).collect();
            prop_assert_eq!(tree.within_radius(&q, r), expect);
        }
    }

    #[test]
    fn empty_tree() {
        let t = KdTree::new(&[]);
        assert!(t.knn(&Point3::origin(), 3, None).is_empty());
        assert!(t.nearest_distance(&Point3::origin()).is_none());
    }
}
