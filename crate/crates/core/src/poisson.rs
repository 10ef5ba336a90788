//! Poisson approximation of a tree Ising model.
//!
//! The approximating field `N` has Poisson(lambda) marginals on the same tree:
//! the root is Poisson(lambda) and every other vertex is
//! `Binomial(N_parent, alpha_e) + Poisson(lambda (1 - alpha_e))`, the last
//! term independent of everything else. With `lambda = q` and the same edge
//! correlations, the sum `M = sum_v N_v` dominates `K` in convex order and
//! `d_TV(K, M) <= 1.2 d q^2`.
//!
//! The pgf of `M` is computed by a post-order pass. For a vertex `v` with
//! children `ch(v)`:
//!
//! ```text
//! z_v = t * prod_{i in ch(v)} b_i
//! b_v = 1 - alpha_v + alpha_v z_v
//! a_v = prod_{i in ch(v)} a_i * exp(lambda (1 - alpha_v) (z_v - 1))
//! P_M(t) = prod_{i in ch(r)} a_i * exp(lambda (z_r - 1))
//! ```
//!
//! `b_v` is the pgf of one thinned unit of the parent pushed through the
//! subtree of `v`, and `a_v` collects the innovations born in that subtree.

use rand_distr::{Binomial, Distribution, Poisson};
use statrs::function::factorial::{ln_binomial, ln_factorial};
use thiserror::Error;

use crate::model::{MeanParamIsing, Pmf, PmfError};
use crate::pgf::ComplexScalar;
use crate::sampler::RngStream;
use crate::sum::{DftPlan, SumError, CLIP_TOLERANCE};
use crate::tree::{Edge, RootedTree};

/// Largest dimension accepted by [`mpmrf_joint_pmf`].
pub const MAX_JOINT_DIM: usize = 6;

/// Largest tail mass beyond the transform length that is accepted.
pub const TRUNCATION_TOLERANCE: f64 = 1e-9;

/// Two marginals count as equal when they differ by at most this.
pub const COMMON_Q_TOLERANCE: f64 = 1e-12;

/// Slack allowed in the convex-order comparison.
pub const CONVEX_ORDER_TOLERANCE: f64 = 1e-9;

/// Longest transform tried when growing the length automatically.
const MAX_AUTO_LEN: usize = 1 << 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoissonError {
    #[error("marginals are not common: q[{vertex}] = {q} but q[0] = {q0}")]
    NotCommonQ { vertex: usize, q: f64, q0: f64 },
    #[error("alpha on edge {edge} is {alpha}; the approximation needs alpha in (0, 1)")]
    AlphaOutOfRange { edge: Edge, alpha: f64 },
    #[error("lambda must be positive and finite, got {0}")]
    InvalidLambda(f64),
    #[error("{0}")]
    DomainError(String),
    #[error("dimension {d} exceeds the joint evaluation limit {limit}")]
    DimensionTooLarge { d: usize, limit: usize },
    #[error("tail mass beyond length {n} may reach {bound:e}")]
    TruncationTooSevere { n: usize, bound: f64 },
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Sum(#[from] SumError),
    #[error(transparent)]
    Pmf(#[from] PmfError),
}

/// Poisson-marginal tree field with common mean `lambda` and per-edge
/// thinning probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct MpmrfModel {
    tree: RootedTree,
    lambda: f64,
    alpha: Vec<f64>,
}

impl MpmrfModel {
    pub fn new(tree: RootedTree, lambda: f64, alpha: Vec<f64>) -> Result<Self, PoissonError> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(PoissonError::InvalidLambda(lambda));
        }
        let edges = tree.topology().edges();
        if alpha.len() != edges.len() {
            return Err(PoissonError::LengthMismatch {
                expected: edges.len(),
                got: alpha.len(),
            });
        }
        if let Some((e, &a)) = alpha
            .iter()
            .enumerate()
            .find(|(_, &a)| !(a > 0.0 && a < 1.0))
        {
            return Err(PoissonError::AlphaOutOfRange {
                edge: edges[e],
                alpha: a,
            });
        }
        Ok(MpmrfModel {
            tree,
            lambda,
            alpha,
        })
    }

    pub fn tree(&self) -> &RootedTree {
        &self.tree
    }

    pub fn d(&self) -> usize {
        self.tree.d()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }
}

/// The approximation of a common-`q` Ising model with positive correlations.
pub fn build_approx(m: &MeanParamIsing) -> Result<MpmrfModel, PoissonError> {
    let q0 = m.q()[0];
    if let Some((vertex, &q)) = m
        .q()
        .iter()
        .enumerate()
        .find(|(_, &q)| (q - q0).abs() > COMMON_Q_TOLERANCE)
    {
        return Err(PoissonError::NotCommonQ { vertex, q, q0 });
    }
    MpmrfModel::new(m.tree().clone(), q0, m.alpha().to_vec())
}

fn poisson_pmf(mu: f64, k: u64) -> f64 {
    if mu == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (-mu + k as f64 * mu.ln() - ln_factorial(k)).exp()
}

fn binomial_pmf(n: u64, p: f64, j: u64) -> f64 {
    if p == 0.0 {
        return if j == 0 { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return if j == n { 1.0 } else { 0.0 };
    }
    (ln_binomial(n, j) + j as f64 * p.ln() + (n - j) as f64 * (1.0 - p).ln()).exp()
}

/// `Pr(N_v = k | N_parent = n_pa)`: `Binomial(n_pa, alpha)` convolved with
/// `Poisson(lambda (1 - alpha))`.
pub fn mpmrf_conditional_pmf(
    n_pa: u64,
    alpha: f64,
    lambda: f64,
    k: u64,
) -> Result<f64, PoissonError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(PoissonError::DomainError(format!(
            "alpha {alpha} is not in [0, 1]"
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(PoissonError::DomainError(format!(
            "lambda {lambda} is not a valid mean"
        )));
    }
    let mu = lambda * (1.0 - alpha);
    Ok((0..=n_pa.min(k))
        .map(|j| binomial_pmf(n_pa, alpha, j) * poisson_pmf(mu, k - j))
        .sum())
}

/// Joint pmf `Pr(N = x)` as the root Poisson pmf times the conditional
/// factors along edges. Only for small trees.
pub fn mpmrf_joint_pmf(model: &MpmrfModel, x: &[u64]) -> Result<f64, PoissonError> {
    let d = model.d();
    if d > MAX_JOINT_DIM {
        return Err(PoissonError::DimensionTooLarge {
            d,
            limit: MAX_JOINT_DIM,
        });
    }
    if x.len() != d {
        return Err(PoissonError::LengthMismatch {
            expected: d,
            got: x.len(),
        });
    }
    let rt = &model.tree;
    let mut p = poisson_pmf(model.lambda, x[rt.root()]);
    for &v in &rt.order()[1..] {
        let (pa, e) = (rt.parent(v).unwrap(), rt.parent_edge(v).unwrap());
        p *= mpmrf_conditional_pmf(x[pa], model.alpha[e], model.lambda, x[v])?;
    }
    Ok(p)
}

/// One realization of `N`.
pub fn sample_mpmrf(model: &MpmrfModel, rng: &mut RngStream) -> Vec<u64> {
    let rt = &model.tree;
    let mut out = vec![0u64; model.d()];
    let root = Poisson::new(model.lambda).expect("lambda checked at construction");
    out[rt.root()] = root.sample(rng) as u64;
    for &v in &rt.order()[1..] {
        let (pa, e) = (rt.parent(v).unwrap(), rt.parent_edge(v).unwrap());
        let a = model.alpha[e];
        let kept = Binomial::new(out[pa], a)
            .expect("alpha checked at construction")
            .sample(rng);
        let fresh = Poisson::new(model.lambda * (1.0 - a))
            .expect("alpha checked at construction")
            .sample(rng) as u64;
        out[v] = kept + fresh;
    }
    out
}

/// Reusable evaluator for the pgf of `M`.
#[derive(Debug, Clone)]
pub struct MpmrfPgfEvaluator {
    order: Vec<usize>,
    parent: Vec<Option<usize>>,
    alpha_in: Vec<f64>,
    lambda: f64,
    prod_a: Vec<ComplexScalar>,
    prod_b: Vec<ComplexScalar>,
}

impl MpmrfPgfEvaluator {
    pub fn new(model: &MpmrfModel) -> Self {
        let rt = &model.tree;
        let d = model.d();
        let alpha_in = (0..d)
            .map(|v| rt.parent_edge(v).map_or(0.0, |e| model.alpha[e]))
            .collect();
        MpmrfPgfEvaluator {
            order: rt.order().to_vec(),
            parent: (0..d).map(|v| rt.parent(v)).collect(),
            alpha_in,
            lambda: model.lambda,
            prod_a: vec![ComplexScalar::new(1.0, 0.0); d],
            prod_b: vec![ComplexScalar::new(1.0, 0.0); d],
        }
    }

    pub fn eval(&mut self, t: ComplexScalar) -> ComplexScalar {
        let one = ComplexScalar::new(1.0, 0.0);
        self.prod_a.fill(one);
        self.prod_b.fill(one);
        let lambda = self.lambda;
        for &v in self.order.iter().rev() {
            let z = t * self.prod_b[v];
            match self.parent[v] {
                Some(pa) => {
                    let a = self.alpha_in[v];
                    let b = (1.0 - a) + a * z;
                    let av = self.prod_a[v] * ((z - 1.0) * (lambda * (1.0 - a))).exp();
                    self.prod_a[pa] *= av;
                    self.prod_b[pa] *= b;
                }
                None => return self.prod_a[v] * ((z - 1.0) * lambda).exp(),
            }
        }
        unreachable!("topological order ends at the root")
    }
}

/// `E[t^M]`.
pub fn mpmrf_sum_pgf(model: &MpmrfModel, t: ComplexScalar) -> ComplexScalar {
    MpmrfPgfEvaluator::new(model).eval(t)
}

/// Default transform length: a power of two at least
/// `max(4 d lambda, d) + 64`.
pub fn default_mpmrf_len(model: &MpmrfModel) -> usize {
    let d = model.d() as f64;
    let cap = (4.0 * d * model.lambda).max(d).ceil() as usize + 64;
    cap.next_power_of_two()
}

/// Chernoff bound on `Pr(M >= n)`: `min_s P_M(s) / s^n` over a few `s > 1`.
pub fn mpmrf_tail_bound(model: &MpmrfModel, n: usize) -> f64 {
    let mut eval = MpmrfPgfEvaluator::new(model);
    [1.05, 1.1, 1.25, 1.5, 2.0, 4.0]
        .iter()
        .map(|&s: &f64| {
            let p = eval.eval(ComplexScalar::new(s, 0.0)).re;
            (p.ln() - n as f64 * s.ln()).exp()
        })
        .filter(|b| b.is_finite())
        .fold(1.0, f64::min)
}

/// Pmf of `M` on `{0, ..., n-1}` together with the bound on the mass that
/// lies at `n` or beyond.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedPmf {
    pub pmf: Pmf,
    pub tail_bound: f64,
}

/// Pmf of `M` by inverting its pgf at `n` roots of unity. With `n = None` the
/// length starts at [`default_mpmrf_len`] and doubles until the tail bound is
/// below [`TRUNCATION_TOLERANCE`]; an explicit `n` that is too short is an
/// error.
pub fn mpmrf_sum_pmf(model: &MpmrfModel, n: Option<usize>) -> Result<TruncatedPmf, PoissonError> {
    let mut len = n.unwrap_or_else(|| default_mpmrf_len(model));
    let mut tail_bound = mpmrf_tail_bound(model, len);
    while tail_bound > TRUNCATION_TOLERANCE {
        if n.is_some() || len >= MAX_AUTO_LEN {
            return Err(PoissonError::TruncationTooSevere {
                n: len,
                bound: tail_bound,
            });
        }
        len *= 2;
        tail_bound = mpmrf_tail_bound(model, len);
    }
    let plan = DftPlan::new(len)?;
    let mut eval = MpmrfPgfEvaluator::new(model);
    let raw = plan.invert_real_series(|t| eval.eval(t));
    let pmf = Pmf::from_raw(raw, CLIP_TOLERANCE)?;
    Ok(TruncatedPmf { pmf, tail_bound })
}

/// `1.2 d q^2`.
pub fn tv_bound(d: usize, q: f64) -> f64 {
    1.2 * d as f64 * q * q
}

/// Outcome of the convex-order comparison of `K` against `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexOrderReport {
    pub mean_k: f64,
    pub mean_m: f64,
    /// `pi_M(z) - pi_K(z)` for `z = 0, 1, ...` over the joint support.
    pub margins: Vec<f64>,
    pub holds: bool,
}

/// Check `K <=_cx M` through equal means and dominated stop-loss transforms
/// at every integer of the joint support.
pub fn check_convex_order(p_k: &Pmf, p_m: &Pmf) -> ConvexOrderReport {
    let len = p_k.len().max(p_m.len());
    let margins: Vec<f64> = (0..len)
        .map(|z| crate::sum::stop_loss(p_m, z as f64) - crate::sum::stop_loss(p_k, z as f64))
        .collect();
    let (mean_k, mean_m) = (p_k.mean(), p_m.mean());
    let holds = (mean_k - mean_m).abs() <= CONVEX_ORDER_TOLERANCE
        && margins.iter().all(|&m| m >= -CONVEX_ORDER_TOLERANCE);
    ConvexOrderReport {
        mean_k,
        mean_m,
        margins,
        holds,
    }
}
