//! Joint probability generating function of a mean-parameterized tree Ising
//! model.
//!
//! For a rooted tree, every non-root vertex `v` carries two conditional
//! generating functions of its subtree,
//!
//! ```text
//! zeta_v = E[ t_v^J_v prod_{j in dsc(v)} t_j^J_j | J_pa(v) = 0 ]
//! xi_v   = E[ t_v^J_v prod_{j in dsc(v)} t_j^J_j | J_pa(v) = 1 ]
//! ```
//!
//! and both follow from the children's pairs:
//!
//! ```text
//! zeta_v = Pr(0|0) prod zeta_i + Pr(1|0) t_v prod xi_i
//! xi_v   = Pr(0|1) prod zeta_i + Pr(1|1) t_v prod xi_i
//! ```
//!
//! The root then gives `P(t) = (1 - q_r) prod zeta_i + q_r t_r prod xi_i`.
//! Keeping only the second term (rooted at `v`, all arguments equal) yields
//! the generating function of the expected allocations `E[J_v 1{K=k}]`.
//!
//! Evaluation walks the topological order backwards with one pair of child
//! products per vertex, so it is iterative and `O(d)` in time and memory.

use num_complex::Complex64;
use thiserror::Error;

use crate::model::{MeanParamIsing, ModelError};
use crate::tree::Vertex;

pub type ComplexScalar = Complex64;

/// Slack on `|t_v| <= 1` for arguments meant as distributional evaluations.
pub const UNIT_DISK_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PgfError {
    #[error("argument {index} = {value} is outside the closed unit disk")]
    OutsideUnitDisk { index: usize, value: ComplexScalar },
    #[error("argument {0} is not finite")]
    NotFinite(usize),
    #[error("expected {expected} arguments, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgfMode {
    /// The joint pgf.
    Full,
    /// Only the `J_root = 1` branch: `q_r t_r prod xi_i`.
    RootBranch,
}

/// Arguments of a joint pgf evaluation, one per vertex (by vertex index).
#[derive(Debug, Clone, PartialEq)]
pub struct PgfRequest {
    t: Vec<ComplexScalar>,
    mode: PgfMode,
}

impl PgfRequest {
    pub fn new(t: Vec<ComplexScalar>, mode: PgfMode) -> Result<Self, PgfError> {
        for (index, &value) in t.iter().enumerate() {
            if !value.re.is_finite() || !value.im.is_finite() {
                return Err(PgfError::NotFinite(index));
            }
            if value.norm() > 1.0 + UNIT_DISK_SLACK {
                return Err(PgfError::OutsideUnitDisk { index, value });
            }
        }
        Ok(PgfRequest { t, mode })
    }

    pub fn full(t: Vec<ComplexScalar>) -> Result<Self, PgfError> {
        Self::new(t, PgfMode::Full)
    }

    pub fn t(&self) -> &[ComplexScalar] {
        &self.t
    }

    pub fn mode(&self) -> PgfMode {
        self.mode
    }
}

/// Nodes evaluated together by [`PgfEvaluator::eval_uniform_batch`].
pub const LANES: usize = 8;

/// Partial products below this magnitude are rescaled; far from `t = 1` the
/// pgf of a large tree is astronomically small and would otherwise run
/// through subnormal arithmetic.
const RESCALE_BELOW: f64 = 1e-150;

/// Divide a child's pair by its magnitude when it gets tiny, returning the
/// log of the factor taken out.
#[inline]
fn rescale(z: &mut ComplexScalar, x: &mut ComplexScalar) -> f64 {
    let m = z.l1_norm().max(x.l1_norm());
    if m < RESCALE_BELOW && m > 0.0 {
        *z /= m;
        *x /= m;
        m.ln()
    } else {
        0.0
    }
}

/// The recursion of one rooted model, flattened for repeated evaluation.
#[derive(Debug, Clone)]
pub struct PgfEvaluator {
    root_q: f64,
    // indexed by topological position
    vertex: Vec<Vertex>,
    parent_pos: Vec<usize>,
    // Pr(0|0), Pr(1|0), Pr(0|1), Pr(1|1)
    rows: Vec<[f64; 4]>,
    zeta: Vec<ComplexScalar>,
    xi: Vec<ComplexScalar>,
    zeta_lanes: Vec<[ComplexScalar; LANES]>,
    xi_lanes: Vec<[ComplexScalar; LANES]>,
}

impl PgfEvaluator {
    pub fn new(model: &MeanParamIsing) -> Self {
        let tree = model.tree();
        let d = model.d();
        let order = tree.order();
        let mut parent_pos = vec![0; d];
        let mut rows = vec![[0.0; 4]; d];
        for (pos, &v) in order.iter().enumerate().skip(1) {
            let pa = tree.parent(v).expect("non-root");
            let e = tree.parent_edge(v).expect("non-root");
            let r0 = model.conditional_row(v, pa, e, 0);
            let r1 = model.conditional_row(v, pa, e, 1);
            parent_pos[pos] = tree.position(pa);
            rows[pos] = [r0[0], r0[1], r1[0], r1[1]];
        }
        let one = ComplexScalar::new(1.0, 0.0);
        PgfEvaluator {
            root_q: model.q()[tree.root()],
            vertex: order.to_vec(),
            parent_pos,
            rows,
            zeta: vec![one; d],
            xi: vec![one; d],
            zeta_lanes: Vec::new(),
            xi_lanes: Vec::new(),
        }
    }

    fn finish(
        &self,
        zeta: ComplexScalar,
        xi: ComplexScalar,
        t_root: ComplexScalar,
        mode: PgfMode,
    ) -> ComplexScalar {
        let branch = xi * t_root * self.root_q;
        match mode {
            PgfMode::Full => zeta * (1.0 - self.root_q) + branch,
            PgfMode::RootBranch => branch,
        }
    }

    /// Evaluate with `t(v)` as the argument of vertex `v`.
    pub fn eval_with(
        &mut self,
        t: impl Fn(Vertex) -> ComplexScalar,
        mode: PgfMode,
    ) -> ComplexScalar {
        let one = ComplexScalar::new(1.0, 0.0);
        self.zeta.fill(one);
        self.xi.fill(one);
        let mut log_scale = 0.0;
        for pos in (1..self.vertex.len()).rev() {
            let [p00, p10, p01, p11] = self.rows[pos];
            let z = self.zeta[pos];
            let x = t(self.vertex[pos]) * self.xi[pos];
            let mut nz = z * p00 + x * p10;
            let mut nx = z * p01 + x * p11;
            log_scale += rescale(&mut nz, &mut nx);
            let pp = self.parent_pos[pos];
            self.zeta[pp] *= nz;
            self.xi[pp] *= nx;
        }
        let out = self.finish(self.zeta[0], self.xi[0], t(self.vertex[0]), mode);
        if log_scale == 0.0 {
            out
        } else {
            out * log_scale.exp()
        }
    }

    /// Evaluate with the same argument at every vertex.
    pub fn eval_uniform(&mut self, t: ComplexScalar, mode: PgfMode) -> ComplexScalar {
        self.eval_with(|_| t, mode)
    }

    /// [`Self::eval_uniform`] at each entry of `ts`, sweeping the tree once per
    /// group of [`LANES`] arguments.
    pub fn eval_uniform_batch(
        &mut self,
        ts: &[ComplexScalar],
        mode: PgfMode,
        out: &mut [ComplexScalar],
    ) {
        assert_eq!(ts.len(), out.len(), "one output per argument");
        let d = self.vertex.len();
        let one = [ComplexScalar::new(1.0, 0.0); LANES];
        self.zeta_lanes.resize(d, one);
        self.xi_lanes.resize(d, one);
        for (tc, oc) in ts.chunks(LANES).zip(out.chunks_mut(LANES)) {
            let mut t = one;
            t[..tc.len()].copy_from_slice(tc);
            self.zeta_lanes.fill(one);
            self.xi_lanes.fill(one);
            let mut log_scale = [0.0; LANES];
            for pos in (1..d).rev() {
                let [p00, p10, p01, p11] = self.rows[pos];
                let z = self.zeta_lanes[pos];
                let x = self.xi_lanes[pos];
                let pp = self.parent_pos[pos];
                for l in 0..LANES {
                    let xl = t[l] * x[l];
                    let mut nz = z[l] * p00 + xl * p10;
                    let mut nx = z[l] * p01 + xl * p11;
                    log_scale[l] += rescale(&mut nz, &mut nx);
                    self.zeta_lanes[pp][l] *= nz;
                    self.xi_lanes[pp][l] *= nx;
                }
            }
            for (l, o) in oc.iter_mut().enumerate() {
                let v = self.finish(self.zeta_lanes[0][l], self.xi_lanes[0][l], t[l], mode);
                *o = if log_scale[l] == 0.0 {
                    v
                } else {
                    v * log_scale[l].exp()
                };
            }
        }
    }
}

/// `E[prod_v t_v^J_v]`.
pub fn joint_pgf(model: &MeanParamIsing, req: &PgfRequest) -> Result<ComplexScalar, PgfError> {
    if req.t.len() != model.d() {
        return Err(PgfError::LengthMismatch {
            expected: model.d(),
            got: req.t.len(),
        });
    }
    Ok(PgfEvaluator::new(model).eval_with(|v| req.t[v], req.mode))
}

/// Pgf of `K = sum_v J_v` at `t`. The pgf is a polynomial, so any complex
/// argument is accepted.
pub fn sum_pgf(model: &MeanParamIsing, t: ComplexScalar) -> ComplexScalar {
    PgfEvaluator::new(model).eval_uniform(t, PgfMode::Full)
}

/// `sum_k t^k E[J_v 1{K = k}]`.
pub fn ogfea_pgf(
    model: &MeanParamIsing,
    v: Vertex,
    t: ComplexScalar,
) -> Result<ComplexScalar, PgfError> {
    let rooted = model.reroot(v)?;
    Ok(PgfEvaluator::new(&rooted).eval_uniform(t, PgfMode::RootBranch))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{binary_tree_edges, build_tree, chain_edges, Edge};

    fn c(re: f64) -> ComplexScalar {
        ComplexScalar::new(re, 0.0)
    }

    fn mixed_model() -> MeanParamIsing {
        let t = build_tree(7, &binary_tree_edges(7))
            .unwrap()
            .root_at(0)
            .unwrap();
        let alpha = vec![0.4, -0.2, 0.6, 0.3, -0.1, 0.5];
        let q = vec![0.3, 0.6, 0.5, 0.45, 0.2, 0.55, 0.35];
        MeanParamIsing::new(t, q, alpha).unwrap()
    }

    #[test]
    fn normalization_and_origin() {
        let m = mixed_model();
        let one = PgfRequest::full(vec![c(1.0); 7]).unwrap();
        assert!((joint_pgf(&m, &one).unwrap() - c(1.0)).norm() < 1e-15);
        let zero = PgfRequest::full(vec![c(0.0); 7]).unwrap();
        let p0 = m.joint_pmf(&[0; 7]).unwrap();
        assert!((joint_pgf(&m, &zero).unwrap() - c(p0)).norm() < 1e-15);
    }

    #[test]
    fn independence_factorizes() {
        let t = build_tree(4, &chain_edges(4)).unwrap().root_at(1).unwrap();
        let q = vec![0.1, 0.5, 0.7, 0.25];
        let m = MeanParamIsing::new(t, q.clone(), vec![0.0; 3]).unwrap();
        let args: Vec<_> = [0.3, -0.8, 0.5, 0.9].iter().map(|&x| c(x)).collect();
        let got = joint_pgf(&m, &PgfRequest::full(args.clone()).unwrap()).unwrap();
        let want: ComplexScalar = (0..4).map(|v| c(1.0 - q[v]) + args[v] * q[v]).product();
        assert!((got - want).norm() < 1e-15);
    }

    #[test]
    fn two_vertex_expansion() {
        let t = build_tree(2, &[(0, 1)]).unwrap().root_at(0).unwrap();
        let m = MeanParamIsing::new(t, vec![0.3, 0.6], vec![0.25]).unwrap();
        let e = Edge::new(0, 1);
        let p = |a, b| m.pair_pmf(e, a, b).unwrap();
        let (tu, tv) = (ComplexScalar::new(0.2, 0.5), ComplexScalar::new(-0.6, 0.1));
        let want = c(p(0, 0)) + tv * p(0, 1) + tu * p(1, 0) + tu * tv * p(1, 1);
        let got = joint_pgf(&m, &PgfRequest::full(vec![tu, tv]).unwrap()).unwrap();
        assert!((got - want).norm() < 1e-15);
    }

    #[test]
    fn matches_enumeration() {
        let m = mixed_model();
        let table = m.enumerate_joint().unwrap();
        let args: Vec<_> = (0..7)
            .map(|v| ComplexScalar::from_polar(0.9, 0.7 * v as f64))
            .collect();
        let want: ComplexScalar = table
            .iter()
            .enumerate()
            .map(|(mask, &p)| {
                (0..7)
                    .filter(|v| (mask >> v) & 1 == 1)
                    .fold(c(p), |acc, v| acc * args[v])
            })
            .sum();
        let got = joint_pgf(&m, &PgfRequest::full(args).unwrap()).unwrap();
        assert!((got - want).norm() < 1e-12);
    }

    #[test]
    fn sum_pgf_binomial() {
        let t = build_tree(5, &chain_edges(5)).unwrap().root_at(0).unwrap();
        let m = MeanParamIsing::homogeneous(t, 0.2, 0.0).unwrap();
        for x in [-1.0, -0.3, 0.0, 0.4, 1.0] {
            let got = sum_pgf(&m, c(x));
            assert!((got - c((0.8 + 0.2 * x).powi(5))).norm() < 1e-15);
        }
        assert!((sum_pgf(&mixed_model(), c(1.0)) - c(1.0)).norm() < 1e-15);
    }

    #[test]
    fn ogfea_cases() {
        let m = mixed_model();
        for v in 0..7 {
            let total = ogfea_pgf(&m, v, c(1.0)).unwrap();
            assert!((total - c(m.q()[v])).norm() < 1e-15);
        }
        let single = build_tree(1, &[]).unwrap().root_at(0).unwrap();
        let m = MeanParamIsing::new(single, vec![0.4], vec![]).unwrap();
        let t = ComplexScalar::new(0.3, -0.2);
        assert!((ogfea_pgf(&m, 0, t).unwrap() - t * 0.4).norm() < 1e-15);

        let pair = build_tree(2, &[(0, 1)]).unwrap().root_at(0).unwrap();
        let q = 0.3;
        let m = MeanParamIsing::homogeneous(pair, q, 0.0).unwrap();
        let got = ogfea_pgf(&m, 1, t).unwrap();
        let want = t * q * (c(1.0 - q) + t * q);
        assert!((got - want).norm() < 1e-15);
    }

    #[test]
    fn request_checks() {
        assert!(PgfRequest::full(vec![c(1.0 + 1e-10)]).is_ok());
        assert!(matches!(
            PgfRequest::full(vec![c(0.0), c(1.1)]),
            Err(PgfError::OutsideUnitDisk { index: 1, .. })
        ));
        assert!(matches!(
            PgfRequest::full(vec![c(f64::NAN)]),
            Err(PgfError::NotFinite(0))
        ));
        let req = PgfRequest::full(vec![c(1.0)]).unwrap();
        assert!(matches!(
            joint_pgf(&mixed_model(), &req),
            Err(PgfError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn deep_chain_is_iterative() {
        let d = 100_000;
        let t = build_tree(d, &chain_edges(d)).unwrap().root_at(0).unwrap();
        let m = MeanParamIsing::homogeneous(t, 0.3, 0.5).unwrap();
        assert!((sum_pgf(&m, c(1.0)) - c(1.0)).norm() < 1e-10);
    }
}
