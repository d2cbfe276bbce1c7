//! Treecode: kd-tree over atoms with centroid moments and a Cartesian Taylor
//! far field for `K(z)|z|^{-β}`, differentiated termwise for the gradient and
//! Hessian.

use super::sum::{sum_range, Acc, KernelRef};
use crate::num::{jet_len, space, Jet, Space};

const LEAF: usize = 16;
const JN: usize = jet_len(3, 8);

#[derive(Clone, Debug)]
struct Node {
    start: usize,
    end: usize,
    center: [f64; 3],
    radius: f64,
    mass: f64,
    abs_mass: f64,
    /// `Σ w (c - y)^k` indexed by the expansion space, degree ≤ p.
    moments: Vec<f64>,
    kids: Option<(usize, usize)>,
}

/// Precomputed index tables for contracting moments against Taylor coefficients.
#[derive(Clone, Debug)]
struct Plan {
    sp: &'static Space,
    /// `(k, [k + e_j], [[k + e_i + e_j]])` with the matching multiplicity factors.
    terms: Vec<Term>,
    /// `down[j][i]`: index of `exps[i] - e_j`, or `usize::MAX`.
    down: [Vec<usize>; 3],
}

#[derive(Clone, Debug)]
struct Term {
    k: usize,
    g: [(usize, f64); 3],
    h: [[(usize, f64); 3]; 3],
}

impl Plan {
    fn new(n: usize, p: usize) -> Plan {
        let sp = space(n, p + 2);
        let mut terms = Vec::new();
        for k in 0..sp.len {
            if sp.degree[k] > p {
                continue;
            }
            let e = sp.exps[k];
            let mut g = [(0usize, 0.0); 3];
            let mut h = [[(0usize, 0.0); 3]; 3];
            for j in 0..n {
                let kj = sp.shift[j][k];
                g[j] = (kj, e[j] as f64 + 1.0);
                for i in 0..n {
                    let kij = sp.shift[i][kj];
                    let extra = if i == j { 1.0 } else { 0.0 };
                    h[i][j] = (kij, (e[j] as f64 + 1.0) * (e[i] as f64 + extra + 1.0));
                }
            }
            terms.push(Term { k, g, h });
        }
        let down = std::array::from_fn(|j| {
            let mut d = vec![usize::MAX; sp.len];
            if j < n {
                for i in 0..sp.len {
                    let s = sp.shift[j][i];
                    if s != usize::MAX {
                        d[s] = i;
                    }
                }
            }
            d
        });
        Plan { sp, terms, down }
    }
}

#[derive(Clone, Debug)]
pub struct Tree {
    n: usize,
    order: usize,
    pts: Vec<f64>,
    w: Vec<f64>,
    nodes: Vec<Node>,
    plan: Plan,
    total_abs_mass: f64,
}

/// Traversal counters for one query.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TreeStats {
    pub far_nodes: usize,
    pub near_atoms: usize,
}

impl Tree {
    /// Builds the tree for atoms `pts` (row-major, `n` per point) with
    /// expansion order `p`.
    pub fn build(n: usize, pts: &[f64], w: &[f64], p: usize) -> Tree {
        let count = w.len();
        let mut perm: Vec<usize> = (0..count).collect();
        let mut t = Tree {
            n,
            order: p,
            pts: Vec::new(),
            w: Vec::new(),
            nodes: Vec::new(),
            plan: Plan::new(n, p),
            total_abs_mass: w.iter().map(|v| v.abs()).sum(),
        };
        if count > 0 {
            t.split(pts, &mut perm, 0, count);
        }
        t.pts = perm.iter().flat_map(|&i| pts[i * n..(i + 1) * n].iter().copied()).collect();
        t.w = perm.iter().map(|&i| w[i]).collect();
        for id in 0..t.nodes.len() {
            t.finish_node(id);
        }
        t
    }

    fn split(&mut self, pts: &[f64], perm: &mut [usize], start: usize, end: usize) -> usize {
        let n = self.n;
        let id = self.nodes.len();
        self.nodes.push(Node {
            start,
            end,
            center: [0.0; 3],
            radius: 0.0,
            mass: 0.0,
            abs_mass: 0.0,
            moments: Vec::new(),
            kids: None,
        });
        if end - start > LEAF {
            let mut lo = [f64::INFINITY; 3];
            let mut hi = [f64::NEG_INFINITY; 3];
            for &i in &perm[start..end] {
                for k in 0..n {
                    lo[k] = lo[k].min(pts[i * n + k]);
                    hi[k] = hi[k].max(pts[i * n + k]);
                }
            }
            let axis = (0..n).max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b]))).unwrap_or(0);
            let mid = (start + end) / 2;
            perm[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                pts[a * n + axis].total_cmp(&pts[b * n + axis]).then(a.cmp(&b))
            });
            let l = self.split(pts, perm, start, mid);
            let r = self.split(pts, perm, mid, end);
            self.nodes[id].kids = Some((l, r));
        }
        id
    }

    fn finish_node(&mut self, id: usize) {
        let n = self.n;
        let (start, end) = (self.nodes[id].start, self.nodes[id].end);
        let mut c = [0.0; 3];
        let mut abs_mass = 0.0;
        let mut mass = 0.0;
        for i in start..end {
            let a = self.w[i].abs();
            abs_mass += a;
            mass += self.w[i];
            for k in 0..n {
                c[k] += a * self.pts[i * n + k];
            }
        }
        if abs_mass > 0.0 {
            for v in c.iter_mut().take(n) {
                *v /= abs_mass;
            }
        } else {
            c[..n].copy_from_slice(&self.pts[start * n..start * n + n]);
        }
        let sp = self.plan.sp;
        let mut moments = vec![0.0; sp.len];
        let mut radius: f64 = 0.0;
        let mut pw = vec![[1.0; 3]; self.order + 1];
        for i in start..end {
            let mut h = [0.0; 3];
            for k in 0..n {
                h[k] = c[k] - self.pts[i * n + k];
            }
            radius = radius.max((h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt());
            for k in 0..n {
                for e in 1..=self.order {
                    pw[e][k] = pw[e - 1][k] * h[k];
                }
            }
            for (m, e) in moments.iter_mut().zip(&sp.exps) {
                let deg: usize = e.iter().map(|&v| v as usize).sum();
                if deg > self.order {
                    break;
                }
                let mut v = self.w[i];
                for k in 0..n {
                    v *= pw[e[k] as usize][k];
                }
                *m += v;
            }
        }
        let node = &mut self.nodes[id];
        node.center = c;
        node.radius = radius;
        node.mass = mass;
        node.abs_mass = abs_mass;
        node.moments = moments;
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Taylor coefficients of `|z0 + h|^{-β}` up to the plan order via the
    /// recurrence from `q·∇φ = -β z φ`.
    fn power_coeffs(&self, z0: &[f64; 3], beta: f64, out: &mut [f64]) {
        let sp = self.plan.sp;
        let nu = 0.5 * beta;
        let q0: f64 = z0.iter().take(self.n).map(|v| v * v).sum();
        out[0] = q0.powf(-nu);
        for k in 1..sp.len {
            let deg = sp.degree[k] as f64;
            let mut acc = 0.0;
            for j in 0..self.n {
                let d1 = self.plan.down[j][k];
                if d1 == usize::MAX {
                    continue;
                }
                acc += z0[j] * (2.0 * deg - 2.0 + 2.0 * nu) * out[d1];
                let d2 = self.plan.down[j][d1];
                if d2 != usize::MAX {
                    acc += (deg - 2.0 + 2.0 * nu) * out[d2];
                }
            }
            out[k] = -acc / (q0 * deg);
        }
    }

    /// Taylor coefficients of `K(z)|z|^{-β}` about `z0`.
    fn coeffs(&self, k: KernelRef, z0: &[f64; 3], beta: f64, out: &mut [f64]) {
        self.power_coeffs(z0, beta, out);
        match k {
            KernelRef::Const(c) => {
                for v in out.iter_mut() {
                    *v *= c;
                }
            }
            KernelRef::General(kern) => {
                let sp = self.plan.sp;
                let z = Jet::<JN>::point(sp, &z0[..self.n]);
                let kj = kern.eval_num(&z);
                let mut pj = Jet::<JN>::constant(sp, 0.0);
                pj.c[..sp.len].copy_from_slice(&out[..sp.len]);
                let prod = crate::num::Num::mul(&kj, &pj);
                out[..sp.len].copy_from_slice(&prod.c[..sp.len]);
            }
        }
    }

    fn far_field(&self, node: &Node, coeffs: &[f64], acc: &mut Acc) {
        let n = self.n;
        for t in &self.plan.terms {
            let m = node.moments[t.k];
            acc.v += m * coeffs[t.k];
            for j in 0..n {
                acc.g[j] += m * t.g[j].1 * coeffs[t.g[j].0];
                for i in 0..n {
                    acc.h[i][j] += m * t.h[i][j].1 * coeffs[t.h[i][j].0];
                }
            }
        }
    }

    /// Cheap monopole estimate of `R(x)` used to budget the error control.
    fn estimate(&self, k: KernelRef, beta: f64, x: &[f64]) -> f64 {
        let mut stack = vec![0usize];
        let mut total = 0.0;
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            let (z, dist) = self.offset(node, x);
            if node.radius <= 0.5 * dist || node.kids.is_none() {
                let kv = match k {
                    KernelRef::Const(c) => c,
                    KernelRef::General(kern) => kern.value(&z[..self.n]),
                };
                if node.kids.is_none() && node.radius > 0.5 * dist {
                    total += sum_range(k, beta, self.n, x, &self.pts, &self.w, node.start, node.end).v;
                } else {
                    total += node.mass * kv * dist.powf(-beta);
                }
                continue;
            }
            let (l, r) = node.kids.expect("internal node");
            stack.push(r);
            stack.push(l);
        }
        total
    }

    fn offset(&self, node: &Node, x: &[f64]) -> ([f64; 3], f64) {
        let mut z = [0.0; 3];
        for k in 0..self.n {
            z[k] = x[k] - node.center[k];
        }
        (z, (z[0] * z[0] + z[1] * z[1] + z[2] * z[2]).sqrt())
    }

    /// Sum with opening angle `theta`; with `eps > 0` a node is expanded only
    /// when its estimated truncation error also fits the budget
    /// `eps·max(R·|M|/|M_tot|, |node contribution|)`.
    pub fn eval(&self, k: KernelRef, beta: f64, x: &[f64], theta: f64, eps: f64) -> (Acc, TreeStats) {
        let mut acc = Acc::default();
        let mut stats = TreeStats::default();
        if self.is_empty() {
            return (acc, stats);
        }
        let p = self.order as f64;
        let r_est = if eps > 0.0 { self.estimate(k, beta, x).abs() } else { 0.0 };
        let binom = binomial(beta + p, p + 1.0);
        let mut coeffs = vec![0.0; self.plan.sp.len];
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            let (z, dist) = self.offset(node, x);
            let mut open = node.radius < theta * dist;
            if open && eps > 0.0 {
                // Cartesian Taylor series of |z|^{-β} converge at rate √2·r/dist.
                let t = std::f64::consts::SQRT_2 * node.radius / dist;
                let kv = match k {
                    KernelRef::Const(c) => c.abs(),
                    KernelRef::General(kern) => kern.value(&z[..self.n]).abs(),
                };
                let contrib = node.abs_mass * kv * dist.powf(-beta);
                let err = if t < 1.0 {
                    contrib * binom * t.powf(p + 1.0) / (1.0 - t).powf(beta + p + 1.0)
                } else {
                    f64::INFINITY
                };
                let budget = eps * (r_est * node.abs_mass / self.total_abs_mass).max(contrib);
                open = err <= budget;
            }
            if open {
                self.coeffs(k, &z, beta, &mut coeffs);
                self.far_field(node, &coeffs, &mut acc);
                stats.far_nodes += 1;
                continue;
            }
            match node.kids {
                None => {
                    acc.add(&sum_range(k, beta, self.n, x, &self.pts, &self.w, node.start, node.end));
                    stats.near_atoms += node.end - node.start;
                }
                Some((l, r)) => {
                    stack.push(r);
                    stack.push(l);
                }
            }
        }
        (acc, stats)
    }
}

fn binomial(a: f64, k: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    (ln_gamma(a + 1.0) - ln_gamma(k + 1.0) - ln_gamma(a - k + 1.0)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Kernel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, count: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..count * n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let w = (0..count).map(|_| rng.gen_range(0.5..1.5)).collect();
        (pts, w)
    }

    #[test]
    fn power_coefficients_match_one_dimensional_binomials() {
        let t = Tree::build(1, &[0.0], &[1.0], 4);
        let mut out = vec![0.0; t.plan.sp.len];
        let (z0, beta) = (1.3, 2.4);
        t.power_coeffs(&[z0, 0.0, 0.0], beta, &mut out);
        let mut expect = z0.powf(-beta);
        for (k, v) in out.iter().enumerate() {
            assert!((v - expect).abs() < 1e-12 * expect.abs(), "k={k} {v} {expect}");
            expect *= (-beta - k as f64) / ((k + 1) as f64 * z0);
        }
    }

    #[test]
    fn far_field_converges_with_order() {
        let (pts, w) = cloud(2, 3000, 1);
        let x = [0.5, 4.0];
        let exact = sum_range(KernelRef::Const(1.0), 1.5, 2, &x, &pts, &w, 0, 3000);
        let mut last = f64::INFINITY;
        for p in [0, 2, 4, 6] {
            let t = Tree::build(2, &pts, &w, p);
            let (a, _) = t.eval(KernelRef::Const(1.0), 1.5, &x, 0.5, 0.0);
            let e = (a.v - exact.v).abs() / exact.v;
            assert!(e < last, "p={p} {e}");
            last = e;
        }
        assert!(last < 1e-6);
    }

    #[test]
    fn general_kernel_far_field_matches_brute_force() {
        let (pts, w) = cloud(3, 2000, 2);
        let k = Kernel::radial_expr(3, "1 + 0.3*exp(-t)").unwrap();
        let kr = KernelRef::new(&k);
        let x = [0.3, 0.2, 2.5];
        let exact = sum_range(kr, 2.5, 3, &x, &pts, &w, 0, 2000);
        let t = Tree::build(3, &pts, &w, 5);
        let (a, _) = t.eval(kr, 2.5, &x, 0.5, 1e-9);
        assert!((a.v - exact.v).abs() < 1e-8 * exact.v);
        for i in 0..3 {
            assert!((a.g[i] - exact.g[i]).abs() < 1e-7 * exact.v);
            for j in 0..3 {
                assert!((a.h[i][j] - exact.h[i][j]).abs() < 1e-6 * exact.v);
            }
        }
    }
}
