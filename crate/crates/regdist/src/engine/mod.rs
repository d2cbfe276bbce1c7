//! Field evaluation: `R = Σ w_i K(x-y_i)|x-y_i|^{-d-α}`, its derivatives, the
//! regularized distance `D = R^{-1/α}` and the oscillation `F = δ|∇|∇D|²|`.

mod continuum;
mod flat;
mod sum;
mod tail;
mod tree;

pub use continuum::{plane_eval, plane_field, plane_ray, radial_plane_profile, split_normal, PlaneProfile};
pub use flat::{flat_oracle, FlatField};
pub use sum::{summand, Acc, KernelRef};
pub use tree::{Tree, TreeStats};

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::measures::{dist_to_support, DiscreteMeasure};
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    BruteForce,
    Tree { theta: f64, order: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SummationConfig {
    pub method: Method,
    pub tail_correction: bool,
    /// Error budget for the tree's far field; `0` uses the opening angle alone.
    pub target_rel_error: f64,
}

impl Default for SummationConfig {
    fn default() -> Self {
        SummationConfig {
            method: Method::BruteForce,
            tail_correction: false,
            target_rel_error: 0.0,
        }
    }
}

impl SummationConfig {
    pub fn brute() -> Self {
        Self::default()
    }
    pub fn tree(theta: f64, order: usize) -> Self {
        SummationConfig {
            method: Method::Tree { theta, order },
            ..Self::default()
        }
    }
    pub fn with_tail(mut self, on: bool) -> Self {
        self.tail_correction = on;
        self
    }
    pub fn with_target(mut self, eps: f64) -> Self {
        self.target_rel_error = eps;
        self
    }
}

/// `R` with gradient and Hessian; `tail` is the part contributed by the tail model.
#[derive(Clone, Debug, PartialEq)]
pub struct RDerivs {
    pub r: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<Vec<f64>>,
    pub tail: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldEval {
    pub x: Vec<f64>,
    pub r: f64,
    pub grad_r: Vec<f64>,
    pub hess_r: Vec<Vec<f64>>,
    pub d: f64,
    pub grad_d: Vec<f64>,
    /// `∇|∇D|²`.
    pub grad_sq_grad_d: Vec<f64>,
    pub f: f64,
    pub delta: f64,
    pub tail_r: f64,
}

impl FieldEval {
    pub fn grad_d_norm(&self) -> f64 {
        crate::geom::norm(&self.grad_d)
    }
    pub fn grad_d_sq(&self) -> f64 {
        crate::geom::dot(&self.grad_d, &self.grad_d)
    }
}

/// Chain rule from `(R, ∇R, ∇²R)` to `D`, `∇D`, `∇|∇D|²` and `F`.
pub fn assemble(x: &[f64], delta: f64, alpha: f64, rd: &RDerivs) -> FieldEval {
    let n = x.len();
    let r = rd.r;
    let g = &rd.grad;
    let g2: f64 = g.iter().map(|v| v * v).sum();
    let d = r.powf(-1.0 / alpha);
    let c1 = -r.powf(-1.0 / alpha - 1.0) / alpha;
    let grad_d: Vec<f64> = g.iter().map(|v| c1 * v).collect();
    let a2 = alpha * alpha;
    let p2 = r.powf(-2.0 / alpha - 2.0);
    let t1 = (-2.0 / alpha - 2.0) * p2 / r * g2 / a2;
    let t2 = 2.0 * p2 / a2;
    let grad_sq: Vec<f64> = (0..n)
        .map(|i| {
            let hg: f64 = (0..n).map(|j| rd.hess[i][j] * g[j]).sum();
            t1 * g[i] + t2 * hg
        })
        .collect();
    let f = delta * crate::geom::norm(&grad_sq);
    FieldEval {
        x: x.to_vec(),
        r,
        grad_r: g.clone(),
        hess_r: rd.hess.clone(),
        d,
        grad_d,
        grad_sq_grad_d: grad_sq,
        f,
        delta,
        tail_r: rd.tail,
    }
}

/// Prepared evaluator: validates the inputs once and owns the tree, if any.
pub struct Engine<'a> {
    kernel: &'a Kernel,
    mu: &'a DiscreteMeasure,
    alpha: f64,
    beta: f64,
    config: SummationConfig,
    tree: Option<Tree>,
}

impl<'a> Engine<'a> {
    pub fn new(kernel: &'a Kernel, mu: &'a DiscreteMeasure, alpha: f64, config: SummationConfig) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::BadSpec(format!("alpha must be positive, got {alpha}")));
        }
        if kernel.ambient_dim() != mu.ambient_dim() {
            return Err(Error::BadSpec(format!(
                "kernel dimension {} differs from measure dimension {}",
                kernel.ambient_dim(),
                mu.ambient_dim()
            )));
        }
        let available = kernel.derivative_order();
        if available < 2 {
            return Err(Error::OrderUnavailable { requested: 2, available });
        }
        if config.tail_correction && mu.tail().is_none() {
            return Err(Error::TailUnavailable);
        }
        let tree = match config.method {
            Method::Tree { theta, order } => {
                if !(0.0..1.0).contains(&theta) {
                    return Err(Error::BadSpec(format!("opening angle must lie in [0,1), got {theta}")));
                }
                if kernel.constant_value().is_none() && available < order + 2 {
                    return Err(Error::OrderUnavailable {
                        requested: order + 2,
                        available,
                    });
                }
                if order + 2 > crate::num::MAX_ORDER {
                    return Err(Error::BadSpec(format!("expansion order {order} above {}", crate::num::MAX_ORDER - 2)));
                }
                (theta > 0.0).then(|| Tree::build(mu.ambient_dim(), mu.points(), mu.weights(), order))
            }
            Method::BruteForce => None,
        };
        Ok(Engine {
            kernel,
            mu,
            alpha,
            beta: mu.hausdorff_dim() + alpha,
            config,
            tree,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn measure(&self) -> &DiscreteMeasure {
        self.mu
    }

    fn check_guard(&self, x: &[f64]) -> Result<f64> {
        let delta = dist_to_support(self.mu, x);
        let guard = 2.0 * self.mu.spacing();
        if !(delta >= guard) {
            return Err(Error::TooCloseToSupport { delta, guard });
        }
        Ok(delta)
    }

    /// Atom sum plus tail, without the guard check.
    pub fn raw(&self, x: &[f64]) -> Result<RDerivs> {
        let n = self.mu.ambient_dim();
        let k = KernelRef::new(self.kernel);
        let mut acc = match (&self.tree, self.config.method) {
            (Some(t), Method::Tree { theta, .. }) => t.eval(k, self.beta, x, theta, self.config.target_rel_error).0,
            _ => sum::sum_range(k, self.beta, n, x, self.mu.points(), self.mu.weights(), 0, self.mu.len()),
        };
        let mut tail_v = 0.0;
        if self.config.tail_correction {
            let t = self.mu.tail().ok_or(Error::TailUnavailable)?;
            let ta = tail::tail_sum(k, self.beta, self.alpha, t, x)?;
            tail_v = ta.v;
            acc.add(&ta);
        }
        Ok(RDerivs {
            r: acc.v,
            grad: acc.g[..n].to_vec(),
            hess: (0..n).map(|i| acc.h[i][..n].to_vec()).collect(),
            tail: tail_v,
        })
    }

    pub fn eval_r(&self, x: &[f64]) -> Result<RDerivs> {
        self.check_guard(x)?;
        self.raw(x)
    }

    pub fn eval_field(&self, x: &[f64]) -> Result<FieldEval> {
        let delta = self.check_guard(x)?;
        let rd = self.raw(x)?;
        if !(rd.r > 0.0) {
            return Err(Error::NonpositiveKernel {
                point: x.to_vec(),
                value: rd.r,
            });
        }
        Ok(assemble(x, delta, self.alpha, &rd))
    }

    /// Evaluates a batch in parallel; output order follows the input.
    pub fn eval_batch(&self, xs: &[Vec<f64>]) -> Vec<Result<FieldEval>> {
        par::map(xs, |x| self.eval_field(x))
    }

    pub fn eval_r_batch(&self, xs: &[Vec<f64>]) -> Vec<Result<RDerivs>> {
        par::map(xs, |x| self.eval_r(x))
    }

    /// Tree traversal counters at `x` (zero for brute force).
    pub fn tree_stats(&self, x: &[f64]) -> TreeStats {
        match (&self.tree, self.config.method) {
            (Some(t), Method::Tree { theta, .. }) => {
                t.eval(KernelRef::new(self.kernel), self.beta, x, theta, self.config.target_rel_error).1
            }
            _ => TreeStats::default(),
        }
    }
}

pub fn eval_r(k: &Kernel, mu: &DiscreteMeasure, alpha: f64, x: &[f64], config: SummationConfig) -> Result<RDerivs> {
    Engine::new(k, mu, alpha, config)?.eval_r(x)
}

pub fn eval_field(k: &Kernel, mu: &DiscreteMeasure, alpha: f64, x: &[f64], config: SummationConfig) -> Result<FieldEval> {
    Engine::new(k, mu, alpha, config)?.eval_field(x)
}

/// Fails with `TailModelInvalid` when the kernel has no limit at infinity
/// along the dyadic test sequence, so a flat tail model would be meaningless.
pub fn validate_tail_kernel(k: &Kernel) -> Result<()> {
    if k.constant_value().is_some() {
        return Ok(());
    }
    let lambdas = crate::kernels::dyadic_lambdas(crate::kernels::End::Infinity, 12);
    let rep = crate::kernels::limit_profile(k, &lambdas);
    if rep.cauchy {
        Ok(())
    } else {
        Err(Error::TailModelInvalid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{generate, SetGenerator};

    fn line(h: f64, l: f64) -> DiscreteMeasure {
        generate(&SetGenerator::Plane {
            n: 2,
            d: 1,
            half_extent: l,
            spacing: h,
        })
        .unwrap()
    }

    #[test]
    fn single_atom() {
        let mu = DiscreteMeasure::from_atoms(2, 1.0, vec![0.0, 0.0], vec![1.0], 1e-3).unwrap();
        let r = eval_r(&Kernel::constant(2, 1.0), &mu, 1.0, &[0.0, 2.0], SummationConfig::brute()).unwrap();
        assert_eq!(r.r, 0.25);
        assert_eq!(r.grad, vec![0.0, -0.25]);
    }

    #[test]
    fn line_with_tail_gives_pi() {
        let mu = line(1e-2, 20.0);
        let k = Kernel::constant(2, 1.0);
        let e = Engine::new(&k, &mu, 1.0, SummationConfig::brute().with_tail(true)).unwrap();
        for delta in [0.1, 0.5, 2.0] {
            let f = e.eval_field(&[0.003, delta]).unwrap();
            // Residual is the midpoint-rule end correction at the truncation.
            assert!((f.r * delta / std::f64::consts::PI - 1.0).abs() < 1e-8, "{}", f.r * delta);
            assert!(f.f < 1e-6, "{}", f.f);
        }
    }

    #[test]
    fn guard_and_tail_contracts() {
        let mu = line(1e-2, 1.0);
        let k = Kernel::constant(2, 1.0);
        let e = Engine::new(&k, &mu, 1.0, SummationConfig::brute()).unwrap();
        assert!(matches!(e.eval_r(&[0.0, 0.015]), Err(Error::TooCloseToSupport { .. })));
        let circle = generate(&SetGenerator::Sphere {
            n: 2,
            radius: 1.0,
            nodes: 64,
        })
        .unwrap();
        assert!(matches!(
            Engine::new(&k, &circle, 1.0, SummationConfig::brute().with_tail(true)),
            Err(Error::TailUnavailable)
        ));
    }

    #[test]
    fn zero_angle_tree_is_brute_force() {
        let mu = generate(&SetGenerator::FourCornerCantor { generation: 4 }).unwrap();
        let k = Kernel::radial_expr(2, "2 + sin(log(t))").unwrap();
        let a = Engine::new(&k, &mu, 0.7, SummationConfig::brute()).unwrap();
        let b = Engine::new(&k, &mu, 0.7, SummationConfig::tree(0.0, 4)).unwrap();
        let x = [0.3, 0.55];
        assert_eq!(a.eval_r(&x).unwrap(), b.eval_r(&x).unwrap());
    }
}
