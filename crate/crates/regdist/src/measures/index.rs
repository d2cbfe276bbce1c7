//! Static kd-tree over atom positions: nearest neighbour, ball mass, range
//! queries and point-to-box distance. Traversal order is fixed by the build,
//! so every query is deterministic.

const LEAF: usize = 8;

#[derive(Clone, Debug)]
struct Node {
    lo: Vec<f64>,
    hi: Vec<f64>,
    start: usize,
    end: usize,
    /// Children, or `None` for a leaf.
    kids: Option<(usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct KdTree {
    n: usize,
    pts: Vec<f64>,
    perm: Vec<usize>,
    nodes: Vec<Node>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn box_sq_dist(x: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        let d = if x[i] < lo[i] {
            lo[i] - x[i]
        } else if x[i] > hi[i] {
            x[i] - hi[i]
        } else {
            0.0
        };
        s += d * d;
    }
    s
}

fn box_box_sq_dist(alo: &[f64], ahi: &[f64], blo: &[f64], bhi: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..alo.len() {
        let d = if ahi[i] < blo[i] {
            blo[i] - ahi[i]
        } else if bhi[i] < alo[i] {
            alo[i] - bhi[i]
        } else {
            0.0
        };
        s += d * d;
    }
    s
}

impl KdTree {
    /// `pts` is row-major with `n` coordinates per point.
    pub fn build(n: usize, pts: &[f64]) -> Self {
        let count = pts.len() / n;
        let mut t = KdTree {
            n,
            pts: pts.to_vec(),
            perm: (0..count).collect(),
            nodes: Vec::new(),
        };
        if count > 0 {
            t.build_node(0, count);
        }
        t
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.pts[i * self.n..(i + 1) * self.n]
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let n = self.n;
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for &p in &self.perm[start..end] {
            for k in 0..n {
                let v = self.pts[p * n + k];
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
        let id = self.nodes.len();
        self.nodes.push(Node {
            lo: lo.clone(),
            hi: hi.clone(),
            start,
            end,
            kids: None,
        });
        if end - start > LEAF {
            let axis = (0..n).max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b]))).unwrap_or(0);
            let mid = (start + end) / 2;
            let pts = &self.pts;
            self.perm[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                pts[a * n + axis].total_cmp(&pts[b * n + axis]).then(a.cmp(&b))
            });
            let l = self.build_node(start, mid);
            let r = self.build_node(mid, end);
            self.nodes[id].kids = Some((l, r));
        }
        id
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// Index of the nearest point and its distance. Ties go to the lower index.
    pub fn nearest(&self, x: &[f64]) -> Option<(usize, f64)> {
        if self.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_rec(0, x, usize::MAX, &mut best);
        Some((best.0, best.1.sqrt()))
    }

    /// Nearest point other than index `skip`.
    pub fn nearest_other(&self, x: &[f64], skip: usize) -> Option<(usize, f64)> {
        if self.len() < 2 {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_rec(0, x, skip, &mut best);
        Some((best.0, best.1.sqrt()))
    }

    fn nearest_rec(&self, id: usize, x: &[f64], skip: usize, best: &mut (usize, f64)) {
        let node = &self.nodes[id];
        if box_sq_dist(x, &node.lo, &node.hi) > best.1 {
            return;
        }
        match node.kids {
            None => {
                for &p in &self.perm[node.start..node.end] {
                    if p == skip {
                        continue;
                    }
                    let d = sq_dist(x, self.point(p));
                    if d < best.1 || (d == best.1 && p < best.0) {
                        *best = (p, d);
                    }
                }
            }
            Some((l, r)) => {
                let dl = box_sq_dist(x, &self.nodes[l].lo, &self.nodes[l].hi);
                let dr = box_sq_dist(x, &self.nodes[r].lo, &self.nodes[r].hi);
                if dl <= dr {
                    self.nearest_rec(l, x, skip, best);
                    self.nearest_rec(r, x, skip, best);
                } else {
                    self.nearest_rec(r, x, skip, best);
                    self.nearest_rec(l, x, skip, best);
                }
            }
        }
    }

    /// Indices of points with `|y - x| ≤ r`, in ascending index order.
    pub fn within(&self, x: &[f64], r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.is_empty() {
            self.within_rec(0, x, r * r, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn within_rec(&self, id: usize, x: &[f64], r2: f64, out: &mut Vec<usize>) {
        let node = &self.nodes[id];
        if box_sq_dist(x, &node.lo, &node.hi) > r2 {
            return;
        }
        match node.kids {
            None => {
                for &p in &self.perm[node.start..node.end] {
                    if sq_dist(x, self.point(p)) <= r2 {
                        out.push(p);
                    }
                }
            }
            Some((l, r)) => {
                self.within_rec(l, x, r2, out);
                self.within_rec(r, x, r2, out);
            }
        }
    }

    /// `Σ w_i` over points in the closed ball, summed in index order.
    pub fn ball_mass(&self, x: &[f64], r: f64, weights: &[f64]) -> f64 {
        self.within(x, r).iter().map(|&i| weights[i]).sum()
    }

    /// Distance from the closest point to the axis-aligned box `[lo, hi]`.
    pub fn box_distance(&self, lo: &[f64], hi: &[f64]) -> f64 {
        if self.is_empty() {
            return f64::INFINITY;
        }
        let mut best = f64::INFINITY;
        self.box_rec(0, lo, hi, &mut best);
        best.sqrt()
    }

    fn box_rec(&self, id: usize, lo: &[f64], hi: &[f64], best: &mut f64) {
        let node = &self.nodes[id];
        if box_box_sq_dist(&node.lo, &node.hi, lo, hi) >= *best {
            return;
        }
        match node.kids {
            None => {
                for &p in &self.perm[node.start..node.end] {
                    let d = box_sq_dist(self.point(p), lo, hi);
                    if d < *best {
                        *best = d;
                    }
                }
            }
            Some((l, r)) => {
                self.box_rec(l, lo, hi, best);
                self.box_rec(r, lo, hi, best);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(count: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        (0..count * 2).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn nearest_matches_scan() {
        let p = cloud(3000);
        let t = KdTree::build(2, &p);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let x = [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)];
            let (i, d) = t.nearest(&x).unwrap();
            let (bi, bd) = (0..3000)
                .map(|k| (k, sq_dist(&x, &p[2 * k..2 * k + 2])))
                .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
            assert_eq!(i, bi);
            assert_eq!(d, bd.sqrt());
        }
    }

    #[test]
    fn ball_and_box_queries() {
        let p = cloud(2000);
        let t = KdTree::build(2, &p);
        let w = vec![1.0; 2000];
        let x = [0.1, -0.2];
        let m = t.ball_mass(&x, 0.3, &w);
        let brute = (0..2000).filter(|&k| sq_dist(&x, &p[2 * k..2 * k + 2]) <= 0.09).count();
        assert_eq!(m, brute as f64);
        let lo = [0.2, 0.2];
        let hi = [0.25, 0.3];
        let bd = (0..2000)
            .map(|k| box_sq_dist(&p[2 * k..2 * k + 2], &lo, &hi))
            .fold(f64::INFINITY, f64::min)
            .sqrt();
        assert_eq!(t.box_distance(&lo, &hi), bd);
    }
}
