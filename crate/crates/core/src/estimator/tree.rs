//! k-d tree over source particles for truncated Gaussian kernel sums.
//!
//! Coordinates are stored pre-divided by `ε`, so the kernel profile is
//! `e^{-|u|²/2}` with `u = (x - ξ) / ε`. A query skips every node whose
//! bounding box lies farther than the truncation radius. In one dimension,
//! nodes narrower than `ε / 2` carry Taylor moments of their sources about the
//! node centre,
//!
//! ```text
//! e^{-(t-s)²/2} = e^{-t²/2} e^{-s²/2} Σ_k (t s)^k / k!,
//! ```
//!
//! and are summed in `O(p)` instead of `O(points)`. The expansion order `p` is
//! picked so the per-source truncation error stays a thousandth of the
//! tolerance, keeping the total inside the tolerance contract.

const LEAF_SIZE: usize = 32;
/// Largest scaled half-width of an expansion node.
const MAX_EXPANSION_HALF_WIDTH: f64 = 0.25;
const NO_CHILD: u32 = u32::MAX;

#[derive(Clone, Debug)]
struct Node {
    start: usize,
    end: usize,
    left: u32,
    right: u32,
    /// Offset into `moments` (`order + 1` entries) for expansion nodes.
    expansion: Option<usize>,
    center: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct KdTree {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    nodes: Vec<Node>,
    moments: Vec<f64>,
    order: usize,
    radius2: f64,
}

/// Smallest `p` with `y^p / p! ≤ target`.
fn expansion_order(y: f64, target: f64) -> usize {
    let mut term = 1.0;
    let mut p = 0;
    while term > target || p < 2 {
        p += 1;
        term *= y / p as f64;
        if p > 200 {
            break;
        }
    }
    p
}

impl KdTree {
    /// `scaled_points` are the source positions divided by `ε`; `radius` is the scaled truncation radius.
    pub(crate) fn build(dim: usize, scaled_points: &[f64], weights: &[f64], radius: f64, tolerance: f64) -> Self {
        let n = weights.len();
        let order = if dim == 1 {
            let reach = radius + 2.0 * MAX_EXPANSION_HALF_WIDTH;
            let y = (radius + MAX_EXPANSION_HALF_WIDTH) * MAX_EXPANSION_HALF_WIDTH;
            // value error per source ≤ y^p/p! (units of K_ε(0)); gradient adds a factor |t - s| ≤ reach
            let target = 1e-3 * tolerance / (reach / (-0.5f64).exp()).max(1.0);
            expansion_order(y, target)
        } else {
            0
        };
        let mut tree = KdTree {
            dim,
            points: Vec::with_capacity(n * dim),
            weights: Vec::with_capacity(n),
            lo: Vec::new(),
            hi: Vec::new(),
            nodes: Vec::new(),
            moments: Vec::new(),
            order,
            radius2: radius * radius,
        };
        let mut index: Vec<usize> = (0..n).collect();
        if n > 0 {
            tree.build_node(scaled_points, &mut index, 0);
        }
        for &i in &index {
            tree.points.extend_from_slice(&scaled_points[i * dim..(i + 1) * dim]);
            tree.weights.push(weights[i]);
        }
        tree.fill_moments();
        tree
    }

    fn build_node(&mut self, pts: &[f64], index: &mut [usize], offset: usize) -> u32 {
        let d = self.dim;
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for &i in index.iter() {
            for j in 0..d {
                let v = pts[i * d + j];
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        let (split_dim, width) =
            (0..d).map(|j| (j, hi[j] - lo[j])).fold((0, f64::NEG_INFINITY), |acc, c| if c.1 > acc.1 { c } else { acc });
        let id = self.nodes.len() as u32;
        let count = index.len();
        let expandable = d == 1 && width <= 2.0 * MAX_EXPANSION_HALF_WIDTH && count >= self.order.max(8);
        self.nodes.push(Node {
            start: offset,
            end: offset + count,
            left: NO_CHILD,
            right: NO_CHILD,
            expansion: if expandable { Some(0) } else { None },
            center: 0.5 * (lo[0] + hi[0]),
        });
        self.lo.extend_from_slice(&lo);
        self.hi.extend_from_slice(&hi);
        if expandable || count <= LEAF_SIZE || width == 0.0 {
            return id;
        }
        let mid = count / 2;
        index.select_nth_unstable_by(mid, |&a, &b| pts[a * d + split_dim].total_cmp(&pts[b * d + split_dim]));
        let (left_idx, right_idx) = index.split_at_mut(mid);
        let left = self.build_node(pts, left_idx, offset);
        let right = self.build_node(pts, right_idx, offset + mid);
        self.nodes[id as usize].left = left;
        self.nodes[id as usize].right = right;
        id
    }

    fn fill_moments(&mut self) {
        let p = self.order;
        for node in self.nodes.iter_mut() {
            if node.expansion.is_none() {
                continue;
            }
            let offset = self.moments.len();
            self.moments.resize(offset + p + 1, 0.0);
            let a = &mut self.moments[offset..];
            for i in node.start..node.end {
                let s = self.points[i] - node.center;
                let mut term = self.weights[i] * (-0.5 * s * s).exp();
                for (k, ak) in a.iter_mut().enumerate() {
                    *ak += term;
                    term *= s / (k + 1) as f64;
                }
            }
            node.expansion = Some(offset);
        }
    }

    fn box_distance2(&self, node: usize, x: &[f64]) -> f64 {
        let d = self.dim;
        let lo = &self.lo[node * d..(node + 1) * d];
        let hi = &self.hi[node * d..(node + 1) * d];
        x.iter()
            .zip(lo.iter().zip(hi))
            .map(|(&v, (&l, &h))| {
                let gap = if v < l {
                    l - v
                } else if v > h {
                    v - h
                } else {
                    0.0
                };
                gap * gap
            })
            .sum()
    }

    /// Accumulates `Σ w e^{-|u|²/2}` and `Σ w e^{-|u|²/2} u`, `u = x - ξ` in scaled units.
    pub(crate) fn accumulate(&self, x: &[f64], grad_acc: &mut [f64]) -> f64 {
        let d = self.dim;
        let mut value_acc = 0.0;
        grad_acc.iter_mut().for_each(|g| *g = 0.0);
        if self.nodes.is_empty() {
            return 0.0;
        }
        let mut stack = vec![0u32];
        while let Some(id) = stack.pop() {
            let id = id as usize;
            if self.box_distance2(id, x) > self.radius2 {
                continue;
            }
            let node = &self.nodes[id];
            if let Some(off) = node.expansion {
                let a = &self.moments[off..off + self.order + 1];
                let t = x[0] - node.center;
                let mut poly = 0.0;
                let mut dpoly = 0.0;
                for k in (0..self.order).rev() {
                    poly = poly * t + a[k];
                    dpoly = dpoly * t + (k + 1) as f64 * a[k + 1];
                }
                let e = (-0.5 * t * t).exp();
                value_acc += e * poly;
                grad_acc[0] += e * (t * poly - dpoly);
            } else if node.left == NO_CHILD {
                for i in node.start..node.end {
                    let xi = &self.points[i * d..(i + 1) * d];
                    let r2: f64 = x.iter().zip(xi).map(|(a, b)| (a - b) * (a - b)).sum();
                    if r2 > self.radius2 {
                        continue;
                    }
                    let we = self.weights[i] * (-0.5 * r2).exp();
                    value_acc += we;
                    for j in 0..d {
                        grad_acc[j] += we * (x[j] - xi[j]);
                    }
                }
            } else {
                stack.push(node.right);
                stack.push(node.left);
            }
        }
        value_acc
    }

    #[cfg(test)]
    pub(crate) fn expansion_nodes(&self) -> usize {
        self.nodes.iter().filter(|n| n.expansion.is_some()).count()
    }
}
