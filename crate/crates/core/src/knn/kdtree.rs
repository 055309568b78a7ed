//! Static k-d tree over a borrowed row-major point set, specialised for the
//! one query the entropy estimators need: the distance from each indexed point
//! to its k-th nearest *other* point.

const LEAF_SIZE: usize = 8;

#[derive(Debug)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug)]
pub(crate) struct KdTree<'a> {
    points: &'a [f64],
    dim: usize,
    order: Vec<usize>,
    nodes: Vec<Node>,
    /// Points copied in tree order, so leaves are contiguous.
    packed: Vec<f64>,
}

/// Squared Euclidean distance, accumulated in coordinate order.
#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

impl<'a> KdTree<'a> {
    pub(crate) fn build(points: &'a [f64], dim: usize) -> Self {
        debug_assert!(dim > 0 && points.len() % dim == 0);
        let n = points.len() / dim;
        let mut tree = KdTree {
            points,
            dim,
            order: (0..n).collect(),
            nodes: Vec::with_capacity(2 * n / LEAF_SIZE + 1),
            packed: Vec::new(),
        };
        if n > 0 {
            tree.build_node(0, n);
        }
        tree.packed = tree.order.iter().flat_map(|&i| &points[i * dim..(i + 1) * dim]).copied().collect();
        tree
    }

    /// Point at tree position `pos`.
    fn packed_point(&self, pos: usize) -> &[f64] {
        &self.packed[pos * self.dim..(pos + 1) * self.dim]
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        // widest axis
        let mut axis = 0;
        let mut best_spread = f64::NEG_INFINITY;
        for a in 0..self.dim {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &self.order[start..end] {
                let v = self.points[i * self.dim + a];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > best_spread {
                best_spread = hi - lo;
                axis = a;
            }
        }
        if best_spread <= 0.0 {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let (points, dim) = (self.points, self.dim);
        self.order[start..end].select_nth_unstable_by(mid - start, |&i, &j| {
            points[i * dim + axis].total_cmp(&points[j * dim + axis])
        });
        let value = points[self.order[mid] * dim + axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    /// Distance from every point to its `k`-th nearest other point, indexed
    /// like the input. Queries run in tree order for locality.
    pub(crate) fn all_kth_distances(&self, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.order.len()];
        let mut best = KBest::new(k);
        for (pos, &idx) in self.order.iter().enumerate() {
            best.clear();
            self.search(0, pos, self.packed_point(pos), &mut best);
            out[idx] = best.kth().sqrt();
        }
        out
    }

    fn search(&self, node: usize, query: usize, q: &[f64], best: &mut KBest) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for pos in start..end {
                    if pos != query {
                        best.offer(sq_dist(q, self.packed_point(pos)));
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let delta = q[axis] - value;
                let (near, far) = if delta < 0.0 { (left, right) } else { (right, left) };
                self.search(near, query, q, best);
                if delta * delta <= best.kth() {
                    self.search(far, query, q, best);
                }
            }
        }
    }
}

/// The k smallest values seen so far, kept sorted ascending.
struct KBest {
    k: usize,
    vals: Vec<f64>,
}

impl KBest {
    fn new(k: usize) -> Self {
        Self { k, vals: Vec::with_capacity(k + 1) }
    }

    fn clear(&mut self) {
        self.vals.clear();
    }

    #[inline]
    fn kth(&self) -> f64 {
        if self.vals.len() < self.k {
            f64::INFINITY
        } else {
            self.vals[self.k - 1]
        }
    }

    #[inline]
    fn offer(&mut self, d: f64) {
        if self.vals.len() == self.k {
            if d >= self.vals[self.k - 1] {
                return;
            }
            self.vals.pop();
        }
        let pos = self.vals.partition_point(|&v| v <= d);
        self.vals.insert(pos, d);
    }
}
