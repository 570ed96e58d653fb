use super::Vec3;

/// Exact nearest-neighbor search over a fixed set of 3D points.
///
/// Queries return precisely what an exhaustive scan would: the smallest
/// squared distance, ties broken toward the smallest point index. Subtrees
/// are only pruned when they cannot contain a point at a distance less than
/// or equal to the current best, so equal-distance candidates with smaller
/// indices are never skipped.
#[derive(Debug, Clone)]
pub struct KdTree3 {
    points: Vec<Vec3>,
    nodes: Vec<Node>,
    root: i32,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    point: u32,
    axis: u8,
    left: i32,
    right: i32,
}

impl KdTree3 {
    pub fn build(points: &[Vec3]) -> Self {
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = build_recursive(points, &mut order, 0, &mut nodes);
        Self { points: points.to_vec(), nodes, root }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the nearest point and its squared distance.
    pub fn nearest(&self, query: Vec3) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (u32::MAX, f64::INFINITY);
        self.descend(self.root, query, &mut best);
        Some((best.0 as usize, best.1))
    }

    fn descend(&self, node: i32, query: Vec3, best: &mut (u32, f64)) {
        if node < 0 {
            return;
        }
        let n = self.nodes[node as usize];
        let p = self.points[n.point as usize];
        let d2 = (p - query).norm_squared();
        if d2 < best.1 || (d2 == best.1 && n.point < best.0) {
            *best = (n.point, d2);
        }
        let diff = query[n.axis as usize] - p[n.axis as usize];
        let (near, far) = if diff < 0.0 { (n.left, n.right) } else { (n.right, n.left) };
        self.descend(near, query, best);
        if diff * diff <= best.1 {
            self.descend(far, query, best);
        }
    }

    /// The `k` nearest points sorted by (squared distance, index) ascending.
    /// Returns fewer entries when the tree holds fewer than `k` points.
    pub fn k_nearest(&self, query: Vec3, k: usize) -> Vec<(usize, f64)> {
        let mut best: Vec<(f64, u32)> = Vec::with_capacity(k + 1);
        if k > 0 {
            self.descend_k(self.root, query, k, &mut best);
        }
        best.into_iter().map(|(d2, i)| (i as usize, d2)).collect()
    }

    fn descend_k(&self, node: i32, query: Vec3, k: usize, best: &mut Vec<(f64, u32)>) {
        if node < 0 {
            return;
        }
        let n = self.nodes[node as usize];
        let p = self.points[n.point as usize];
        let d2 = (p - query).norm_squared();
        let key = (d2, n.point);
        if best.len() < k || key < *best.last().unwrap() {
            let pos = best.partition_point(|e| *e < key);
            best.insert(pos, key);
            best.truncate(k);
        }
        let diff = query[n.axis as usize] - p[n.axis as usize];
        let (near, far) = if diff < 0.0 { (n.left, n.right) } else { (n.right, n.left) };
        self.descend_k(near, query, k, best);
        if best.len() < k || diff * diff <= best.last().unwrap().0 {
            self.descend_k(far, query, k, best);
        }
    }
}

fn build_recursive(points: &[Vec3], order: &mut [u32], depth: usize, nodes: &mut Vec<Node>) -> i32 {
    if order.is_empty() {
        return -1;
    }
    let axis = depth % 3;
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        let ka = (points[a as usize][axis], a);
        let kb = (points[b as usize][axis], b);
        ka.partial_cmp(&kb).expect("finite coordinates")
    });
    let point = order[mid];
    let (lo, rest) = order.split_at_mut(mid);
    let hi = &mut rest[1..];
    let left = build_recursive(points, lo, depth + 1, nodes);
    let right = build_recursive(points, hi, depth + 1, nodes);
    nodes.push(Node { point, axis: axis as u8, left, right });
    nodes.len() as i32 - 1
}

/// Exhaustive reference scan: first index attaining the minimum distance.
pub fn nearest_linear(points: &[Vec3], query: Vec3) -> Option<(usize, f64)> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| (i, (p - query).norm_squared()))
        .min_by(|a, b| (a.1, a.0).partial_cmp(&(b.1, b.0)).unwrap())
}
