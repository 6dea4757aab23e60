//! Exact k-nearest-neighbour distances with a static kd-tree.

const LEAF: usize = 16;

#[derive(Debug)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { dim: usize, cut: f64, left: usize, right: usize },
}

#[derive(Debug)]
pub(crate) struct KdTree<'a> {
    points: &'a [f64],
    dim: usize,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl<'a> KdTree<'a> {
    /// `points` is row-major with `dim` coordinates per point.
    pub fn new(points: &'a [f64], dim: usize) -> Self {
        let n = points.len() / dim;
        let mut tree = KdTree {
            points,
            dim,
            order: (0..n).collect(),
            nodes: Vec::new(),
        };
        if n > 0 {
            tree.build(0, n);
        }
        tree
    }

    fn coord(&self, i: usize, k: usize) -> f64 {
        self.points[i * self.dim + k]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        // Split on the widest coordinate at its median.
        let mut best = (0, -1.0);
        for k in 0..self.dim {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &self.order[start..end] {
                let v = self.coord(i, k);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > best.1 {
                best = (k, hi - lo);
            }
        }
        let dim = best.0;
        if best.1 <= 0.0 {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let (points, d) = (self.points, self.dim);
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a * d + dim].total_cmp(&points[b * d + dim])
        });
        let cut = self.coord(self.order[mid], dim);
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split { dim, cut, left, right };
        id
    }

    /// Distance from `query` to its `k`-th nearest tree point, skipping the
    /// point with index `skip` (pass `usize::MAX` to skip nothing).
    pub fn kth_distance(&self, query: &[f64], k: usize, skip: usize) -> f64 {
        let mut best = Best::new(k);
        if !self.nodes.is_empty() {
            self.search(0, query, skip, &mut best);
        }
        best.worst().sqrt()
    }

    fn search(&self, node: usize, query: &[f64], skip: usize, best: &mut Best) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if i == skip {
                        continue;
                    }
                    let row = &self.points[i * self.dim..(i + 1) * self.dim];
                    let d2: f64 = row.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
                    best.offer(d2);
                }
            }
            Node::Split { dim, cut, left, right } => {
                let diff = query[dim] - cut;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, query, skip, best);
                if diff * diff <= best.worst() {
                    self.search(far, query, skip, best);
                }
            }
        }
    }
}

/// The `k` smallest squared distances seen so far, ascending.
struct Best {
    k: usize,
    d2: Vec<f64>,
}

impl Best {
    fn new(k: usize) -> Self {
        Best {
            k,
            d2: Vec::with_capacity(k + 1),
        }
    }

    fn worst(&self) -> f64 {
        if self.d2.len() < self.k {
            f64::INFINITY
        } else {
            self.d2[self.k - 1]
        }
    }

    fn offer(&mut self, d2: f64) {
        if d2 >= self.worst() {
            return;
        }
        let pos = self.d2.partition_point(|&v| v <= d2);
        self.d2.insert(pos, d2);
        self.d2.truncate(self.k);
    }
}
