//! Exponential-family parameterizations and their conversions.
//!
//! Three forms are supported besides the mean parameterization, all on a tree
//! and all over `x in {0,1}^d`:
//!
//! - natural: `sum_v eta_v x_v + sum_(u,v) eta_uv x_u x_v - A`
//! - canonical (spins `y = 2x - 1`): `sum_v theta_v y_v + sum_(u,v) theta_uv y_u y_v - Z`
//! - centered: `sum_v x_v logit(kappa_v) + sum_(u,v) eta_uv (x_u - kappa_u)(x_v - kappa_v) - B`
//!
//! Every conversion goes through the explicit probability table over
//! `{0,1}^d`, so all of this is limited to small `d`. Normalizing constants
//! are kept on the log scale.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::model::{MeanParamIsing, ModelError, MAX_BRUTE_FORCE_DIM};
use crate::tree::{TreeError, TreeTopology, Vertex};

/// Natural parameters of order three and above, and those of non-edge pairs,
/// must stay below this for a table to count as a tree Ising model.
pub const HIGHER_ORDER_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("dimension {d} exceeds the enumeration limit {limit}")]
    DimensionTooLarge { d: usize, limit: usize },
    #[error("{what}: expected {expected} values, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("interaction on vertex set {subset:?} is {value}, so the table is not an Ising model on this tree")]
    NotAnIsingModel { subset: Vec<Vertex>, value: f64 },
    #[error("invalid probability table: {0}")]
    InvalidTable(String),
    #[error("kappa[{vertex}] = {value} is not in (0, 1)")]
    KappaOutOfRange { vertex: Vertex, value: f64 },
    #[error("solver did not converge (residual {0})")]
    NoConvergence(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

fn guard(d: usize) -> Result<(), ParamError> {
    if d > MAX_BRUTE_FORCE_DIM {
        Err(ParamError::DimensionTooLarge {
            d,
            limit: MAX_BRUTE_FORCE_DIM,
        })
    } else {
        Ok(())
    }
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), ParamError> {
    if expected == got {
        Ok(())
    } else {
        Err(ParamError::LengthMismatch {
            what,
            expected,
            got,
        })
    }
}

fn bit(mask: usize, v: Vertex) -> f64 {
    ((mask >> v) & 1) as f64
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Dense table of `Pr(J = x)` over `{0,1}^d`; configuration `x` sits at index
/// `sum_v x_v 2^v`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    d: usize,
    probs: Vec<f64>,
}

impl JointTable {
    pub fn new(d: usize, probs: Vec<f64>) -> Result<Self, ParamError> {
        guard(d)?;
        check_len("table", 1 << d, probs.len())?;
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, &p)| p.is_nan() || p <= 0.0)
        {
            return Err(ParamError::InvalidTable(format!(
                "entry {i} is {p}, not positive"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(ParamError::InvalidTable(format!("total mass is {total}")));
        }
        Ok(JointTable { d, probs })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `Pr(J_v = 1)`.
    pub fn marginal(&self, v: Vertex) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .filter(|(mask, _)| (mask >> v) & 1 == 1)
            .map(|(_, p)| p)
            .sum()
    }

    /// `Pr(J_u = 1, J_v = 1)`.
    pub fn joint_ones(&self, u: Vertex, v: Vertex) -> f64 {
        let both = (1 << u) | (1 << v);
        self.probs
            .iter()
            .enumerate()
            .filter(|(mask, _)| mask & both == both)
            .map(|(_, p)| p)
            .sum()
    }

    pub fn max_abs_diff(&self, other: &JointTable) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// A parameterization written as an unnormalized log-probability.
pub trait ExponentialForm {
    fn topology(&self) -> &TreeTopology;

    /// Exponent at configuration `mask`, without the normalizing constant.
    fn exponent(&self, mask: usize) -> f64;

    /// Log normalizing constant.
    fn log_norm(&self) -> f64;
}

fn compute_log_norm(form: &impl ExponentialForm) -> f64 {
    let d = form.topology().d();
    log_sum_exp((0..1usize << d).map(|mask| form.exponent(mask)))
}

fn edge_term(
    topology: &TreeTopology,
    weights: &[f64],
    mut f: impl FnMut(Vertex, Vertex, f64) -> f64,
) -> f64 {
    topology
        .edges()
        .iter()
        .zip(weights)
        .map(|(e, &w)| f(e.u, e.v, w))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NaturalParamIsing {
    topology: TreeTopology,
    eta_vertex: Vec<f64>,
    eta_edge: Vec<f64>,
    log_norm: f64,
}

impl NaturalParamIsing {
    pub fn new(
        topology: TreeTopology,
        eta_vertex: Vec<f64>,
        eta_edge: Vec<f64>,
    ) -> Result<Self, ParamError> {
        guard(topology.d())?;
        check_len("eta_vertex", topology.d(), eta_vertex.len())?;
        check_len("eta_edge", topology.edges().len(), eta_edge.len())?;
        let mut out = NaturalParamIsing {
            topology,
            eta_vertex,
            eta_edge,
            log_norm: 0.0,
        };
        out.log_norm = compute_log_norm(&out);
        Ok(out)
    }

    pub fn eta_vertex(&self) -> &[f64] {
        &self.eta_vertex
    }

    pub fn eta_edge(&self) -> &[f64] {
        &self.eta_edge
    }
}

impl ExponentialForm for NaturalParamIsing {
    fn topology(&self) -> &TreeTopology {
        &self.topology
    }

    fn exponent(&self, mask: usize) -> f64 {
        let vertex: f64 = self
            .eta_vertex
            .iter()
            .enumerate()
            .map(|(v, eta)| eta * bit(mask, v))
            .sum();
        vertex
            + edge_term(&self.topology, &self.eta_edge, |u, v, w| {
                w * bit(mask, u) * bit(mask, v)
            })
    }

    fn log_norm(&self) -> f64 {
        self.log_norm
    }
}

/// Spin-valued (`y = 2x - 1`) parameterization.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalParamIsing {
    topology: TreeTopology,
    theta_vertex: Vec<f64>,
    theta_edge: Vec<f64>,
    log_norm: f64,
}

impl CanonicalParamIsing {
    pub fn new(
        topology: TreeTopology,
        theta_vertex: Vec<f64>,
        theta_edge: Vec<f64>,
    ) -> Result<Self, ParamError> {
        guard(topology.d())?;
        check_len("theta_vertex", topology.d(), theta_vertex.len())?;
        check_len("theta_edge", topology.edges().len(), theta_edge.len())?;
        let mut out = CanonicalParamIsing {
            topology,
            theta_vertex,
            theta_edge,
            log_norm: 0.0,
        };
        out.log_norm = compute_log_norm(&out);
        Ok(out)
    }

    pub fn theta_vertex(&self) -> &[f64] {
        &self.theta_vertex
    }

    pub fn theta_edge(&self) -> &[f64] {
        &self.theta_edge
    }
}

impl ExponentialForm for CanonicalParamIsing {
    fn topology(&self) -> &TreeTopology {
        &self.topology
    }

    fn exponent(&self, mask: usize) -> f64 {
        let spin = |v| 2.0 * bit(mask, v) - 1.0;
        let vertex: f64 = self
            .theta_vertex
            .iter()
            .enumerate()
            .map(|(v, th)| th * spin(v))
            .sum();
        vertex
            + edge_term(&self.topology, &self.theta_edge, |u, v, w| {
                w * spin(u) * spin(v)
            })
    }

    fn log_norm(&self) -> f64 {
        self.log_norm
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CenteredParamIsing {
    topology: TreeTopology,
    kappa: Vec<f64>,
    eta_edge: Vec<f64>,
    log_norm: f64,
}

impl CenteredParamIsing {
    pub fn new(
        topology: TreeTopology,
        kappa: Vec<f64>,
        eta_edge: Vec<f64>,
    ) -> Result<Self, ParamError> {
        guard(topology.d())?;
        check_len("kappa", topology.d(), kappa.len())?;
        check_len("eta_edge", topology.edges().len(), eta_edge.len())?;
        if let Some((vertex, &value)) = kappa
            .iter()
            .enumerate()
            .find(|(_, &k)| !(k > 0.0 && k < 1.0))
        {
            return Err(ParamError::KappaOutOfRange { vertex, value });
        }
        let mut out = CenteredParamIsing {
            topology,
            kappa,
            eta_edge,
            log_norm: 0.0,
        };
        out.log_norm = compute_log_norm(&out);
        Ok(out)
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn eta_edge(&self) -> &[f64] {
        &self.eta_edge
    }
}

impl ExponentialForm for CenteredParamIsing {
    fn topology(&self) -> &TreeTopology {
        &self.topology
    }

    fn exponent(&self, mask: usize) -> f64 {
        let vertex: f64 = self
            .kappa
            .iter()
            .enumerate()
            .map(|(v, &k)| bit(mask, v) * logit(k))
            .sum();
        let k = &self.kappa;
        vertex
            + edge_term(&self.topology, &self.eta_edge, |u, v, w| {
                w * (bit(mask, u) - k[u]) * (bit(mask, v) - k[v])
            })
    }

    fn log_norm(&self) -> f64 {
        self.log_norm
    }
}

/// Normalized probability table of an exponential-form model.
pub fn exponential_to_table(model: &impl ExponentialForm) -> Result<JointTable, ParamError> {
    let d = model.topology().d();
    guard(d)?;
    let a = model.log_norm();
    let probs = (0..1usize << d)
        .map(|m| (model.exponent(m) - a).exp())
        .collect();
    Ok(JointTable { d, probs })
}

/// Table of a mean-parameterized model.
pub fn mean_to_table(model: &MeanParamIsing) -> Result<JointTable, ParamError> {
    let probs = model.enumerate_joint()?;
    Ok(JointTable {
        d: model.d(),
        probs,
    })
}

/// All natural parameters `eta_W` of a table, by Moebius inversion of the log
/// probabilities: `eta_W = sum_{Z subset W} (-1)^{|W \ Z|} ln Pr(J = 1_Z)`.
/// Index `0` holds `ln Pr(J = 0) = -A`.
pub fn all_natural_parameters(table: &JointTable) -> Vec<f64> {
    let mut f: Vec<f64> = table.probs.iter().map(|p| p.ln()).collect();
    for i in 0..table.d {
        let b = 1usize << i;
        for mask in 0..f.len() {
            if mask & b != 0 {
                f[mask] -= f[mask ^ b];
            }
        }
    }
    f
}

/// Natural parameters of a table on `topology`. Fails with
/// [`ParamError::NotAnIsingModel`] when some non-edge pair or some set of three
/// or more vertices carries an interaction above [`HIGHER_ORDER_TOLERANCE`].
pub fn table_to_natural(
    table: &JointTable,
    topology: &TreeTopology,
) -> Result<NaturalParamIsing, ParamError> {
    check_len("table dimension", topology.d(), table.d)?;
    let eta = all_natural_parameters(table);
    let edge_masks: Vec<usize> = topology
        .edges()
        .iter()
        .map(|e| (1 << e.u) | (1 << e.v))
        .collect();
    let worst = eta
        .iter()
        .enumerate()
        .filter(|(mask, _)| mask.count_ones() >= 2 && !edge_masks.contains(mask))
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()));
    if let Some((mask, &value)) = worst {
        if value.abs() > HIGHER_ORDER_TOLERANCE {
            let subset = (0..table.d).filter(|v| (mask >> v) & 1 == 1).collect();
            return Err(ParamError::NotAnIsingModel { subset, value });
        }
    }
    let eta_vertex = (0..table.d).map(|v| eta[1 << v]).collect();
    let eta_edge = edge_masks.iter().map(|&m| eta[m]).collect();
    NaturalParamIsing::new(topology.clone(), eta_vertex, eta_edge)
}

/// Mean parameters read off a table: marginals and edge correlations.
pub fn table_to_mean(
    table: &JointTable,
    topology: &TreeTopology,
    root: Vertex,
) -> Result<MeanParamIsing, ParamError> {
    check_len("table dimension", topology.d(), table.d)?;
    let q: Vec<f64> = (0..table.d).map(|v| table.marginal(v)).collect();
    let alpha = topology
        .edges()
        .iter()
        .map(|e| {
            let (qu, qv) = (q[e.u], q[e.v]);
            (table.joint_ones(e.u, e.v) - qu * qv) / (qu * qv * (1.0 - qu) * (1.0 - qv)).sqrt()
        })
        .collect();
    Ok(MeanParamIsing::new(topology.root_at(root)?, q, alpha)?)
}

/// Mean parameters from natural ones through partial normalizing constants:
/// `q_i = 1 - exp(A*_i - A)` and `Pr(J_i = 0, J_j = 0) = exp(A**_ij - A)`,
/// where `A*`, `A**` restrict the sum to configurations with those
/// coordinates at zero. The result is rooted at vertex 0.
pub fn natural_to_mean(model: &NaturalParamIsing) -> Result<MeanParamIsing, ParamError> {
    let topology = &model.topology;
    let d = topology.d();
    guard(d)?;
    let exps: Vec<f64> = (0..1usize << d).map(|m| model.exponent(m)).collect();
    let restricted = |zeros: usize| {
        log_sum_exp(
            exps.iter()
                .enumerate()
                .filter(move |(mask, _)| mask & zeros == 0)
                .map(|(_, &x)| x),
        )
    };
    let a = model.log_norm;
    // 1 - q_i
    let p0: Vec<f64> = (0..d).map(|i| (restricted(1 << i) - a).exp()).collect();
    let q: Vec<f64> = p0.iter().map(|p| 1.0 - p).collect();
    let alpha = topology
        .edges()
        .iter()
        .map(|e| {
            let p00 = (restricted((1 << e.u) | (1 << e.v)) - a).exp();
            (p00 - p0[e.u] * p0[e.v]) / (p0[e.u] * q[e.u] * p0[e.v] * q[e.v]).sqrt()
        })
        .collect();
    Ok(MeanParamIsing::new(topology.root_at(0)?, q, alpha)?)
}

/// Natural parameters of a mean-parameterized model.
pub fn mean_to_natural(model: &MeanParamIsing) -> Result<NaturalParamIsing, ParamError> {
    table_to_natural(&mean_to_table(model)?, model.tree().topology())
}

/// `eta_v = logit(kappa_v) - sum_{j in nei(v)} kappa_j eta_vj`, edges unchanged.
pub fn centered_to_natural(model: &CenteredParamIsing) -> Result<NaturalParamIsing, ParamError> {
    let topology = &model.topology;
    let mut eta_vertex: Vec<f64> = model.kappa.iter().map(|&k| logit(k)).collect();
    for (e, w) in topology.edges().iter().zip(&model.eta_edge) {
        eta_vertex[e.u] -= model.kappa[e.v] * w;
        eta_vertex[e.v] -= model.kappa[e.u] * w;
    }
    NaturalParamIsing::new(topology.clone(), eta_vertex, model.eta_edge.clone())
}

fn softplus(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

/// Solve `logit(kappa_v) - sum_j kappa_j eta_vj = eta_v` for `kappa`.
///
/// The left side minus `eta_v` is the gradient of
///
/// ```text
/// F(kappa) = sum_v [kappa_v ln kappa_v + (1 - kappa_v) ln(1 - kappa_v) - eta_v kappa_v]
///          - sum_{uv} eta_uv kappa_u kappa_v
/// ```
///
/// whose gradient diverges at the faces of the unit cube, so its minimum is an
/// interior solution. `F` is minimized by Newton steps in `u = logit(kappa)`,
/// with the Hessian shifted where it is not positive definite. Solutions need
/// not be unique; any one reproduces the model.
pub fn natural_to_centered(model: &NaturalParamIsing) -> Result<CenteredParamIsing, ParamError> {
    const TOL: f64 = 1e-12;
    let topology = &model.topology;
    let d = topology.d();
    let mut coupling = DMatrix::<f64>::zeros(d, d);
    for (e, &w) in topology.edges().iter().zip(&model.eta_edge) {
        coupling[(e.u, e.v)] = w;
        coupling[(e.v, e.u)] = w;
    }
    let eta = DVector::from_column_slice(&model.eta_vertex);
    let energy = |u: &DVector<f64>| {
        let k = u.map(logistic);
        let entropy: f64 = u
            .iter()
            .zip(k.iter())
            .map(|(&x, &p)| p * x - softplus(x))
            .sum();
        entropy - eta.dot(&k) - 0.5 * k.dot(&(&coupling * &k))
    };

    let mut u = eta.clone();
    let mut f = energy(&u);
    let mut norm = f64::INFINITY;
    for _ in 0..1000 {
        let k = u.map(logistic);
        let grad = &u - &coupling * &k - &eta;
        norm = grad.amax();
        if norm < TOL {
            break;
        }
        let kbar = u.map(|x| logistic(-x));
        let var = k.component_mul(&kbar);
        let mut hess = -coupling.clone();
        for v in 0..d {
            hess[(v, v)] += 1.0 / var[v];
        }
        // shift the Hessian until it is positive definite
        let mut shift = 0.0;
        let chol = loop {
            let mut h = hess.clone();
            for v in 0..d {
                h[(v, v)] += shift;
            }
            if let Some(c) = h.cholesky() {
                break c;
            }
            shift = if shift == 0.0 { 1e-3 } else { shift * 4.0 };
        };
        let newton = shift == 0.0;
        let dk = -chol.solve(&grad);
        let slope = grad.dot(&dk);
        // step in kappa, kept inside the cube; u is rebuilt from kappa and
        // 1 - kappa so neither face loses precision
        let mut t: f64 = 1.0;
        for v in 0..d {
            if dk[v] < 0.0 {
                t = t.min(0.99 * k[v] / -dk[v]);
            } else if dk[v] > 0.0 {
                t = t.min(0.99 * kbar[v] / dk[v]);
            }
        }
        loop {
            let cand = DVector::from_fn(d, |v, _| {
                (k[v] + t * dk[v]).ln() - (kbar[v] - t * dk[v]).ln()
            });
            let fc = energy(&cand);
            // near the solution F is flat below rounding; judge by the gradient
            let smaller_grad =
                newton && (&cand - &coupling * cand.map(logistic) - &eta).amax() < 0.5 * norm;
            if fc <= f + 1e-4 * t * slope || smaller_grad {
                u = cand;
                f = fc;
                break;
            }
            t *= 0.5;
            if t < 1e-14 {
                return Err(ParamError::NoConvergence(norm));
            }
        }
    }
    if norm > 1e-10 {
        return Err(ParamError::NoConvergence(norm));
    }
    let kappa = u.iter().map(|&x| logistic(x)).collect();
    CenteredParamIsing::new(topology.clone(), kappa, model.eta_edge.clone())
}

/// Natural to spin parameters: `theta_uv = eta_uv / 4`,
/// `theta_v = eta_v / 2 + sum_j eta_vj / 4`.
pub fn natural_to_canonical(model: &NaturalParamIsing) -> Result<CanonicalParamIsing, ParamError> {
    let topology = &model.topology;
    let mut theta_vertex: Vec<f64> = model.eta_vertex.iter().map(|e| e / 2.0).collect();
    for (e, w) in topology.edges().iter().zip(&model.eta_edge) {
        theta_vertex[e.u] += w / 4.0;
        theta_vertex[e.v] += w / 4.0;
    }
    let theta_edge = model.eta_edge.iter().map(|w| w / 4.0).collect();
    CanonicalParamIsing::new(topology.clone(), theta_vertex, theta_edge)
}

/// Inverse of [`natural_to_canonical`].
pub fn canonical_to_natural(model: &CanonicalParamIsing) -> Result<NaturalParamIsing, ParamError> {
    let topology = &model.topology;
    let mut eta_vertex: Vec<f64> = model.theta_vertex.iter().map(|t| 2.0 * t).collect();
    for (e, th) in topology.edges().iter().zip(&model.theta_edge) {
        eta_vertex[e.u] -= 2.0 * th;
        eta_vertex[e.v] -= 2.0 * th;
    }
    let eta_edge = model.theta_edge.iter().map(|t| 4.0 * t).collect();
    NaturalParamIsing::new(topology.clone(), eta_vertex, eta_edge)
}

/// Mean parameters of a spin model, read from its probability table.
/// Rooted at vertex 0.
pub fn canonical_to_mean(model: &CanonicalParamIsing) -> Result<MeanParamIsing, ParamError> {
    table_to_mean(&exponential_to_table(model)?, &model.topology, 0)
}
