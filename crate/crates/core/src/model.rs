//! Mean-parameterized tree Ising models.
//!
//! A model is given by marginal means `q_v = E[J_v]` and, for every edge, the
//! Pearson correlation `alpha_e` between its endpoints. The joint pmf factors
//! along any rooting of the tree as the root marginal times one conditional
//! Bernoulli per non-root vertex.

use std::fmt;

use thiserror::Error;

use crate::tree::{Edge, RootedTree, TreeError, Vertex};

/// Margin kept from the boundary of the admissible correlation interval.
pub const ALPHA_MARGIN: f64 = 1e-12;

/// Largest dimension accepted by the `2^d` enumeration oracles.
pub const MAX_BRUTE_FORCE_DIM: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("probability {0} outside the open interval (0, 1)")]
    DomainError(f64),
    #[error("vertex {0} is the root and has no parent")]
    RootHasNoParent(Vertex),
    #[error("{0} is not an edge of the tree")]
    NotAnEdge(Edge),
    #[error("expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("value {0} is not a bit")]
    InvalidBit(u8),
    #[error("dimension {d} exceeds the enumeration limit {limit}")]
    DimensionTooLarge { d: usize, limit: usize },
    #[error("inadmissible parameters:\n{0}")]
    Invalid(ValidationReport),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// `sqrt(q_u q_v (1 - q_u)(1 - q_v))`
pub fn sigma(qu: f64, qv: f64) -> Result<f64, ModelError> {
    check_prob(qu)?;
    check_prob(qv)?;
    Ok((qu * qv * (1.0 - qu) * (1.0 - qv)).sqrt())
}

/// Open interval of correlations for which every pair probability of an
/// edge with marginals `qu`, `qv` is strictly positive.
pub fn alpha_bounds(qu: f64, qv: f64) -> Result<(f64, f64), ModelError> {
    check_prob(qu)?;
    check_prob(qv)?;
    let (pu, pv) = (1.0 - qu, 1.0 - qv);
    let lo = -f64::min((qu * qv / (pu * pv)).sqrt(), (pu * pv / (qu * qv)).sqrt());
    let hi = f64::min((pu * qv / (qu * pv)).sqrt(), (qu * pv / (pu * qv)).sqrt());
    Ok((lo, hi))
}

fn check_prob(q: f64) -> Result<(), ModelError> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(ModelError::DomainError(q))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    Marginal {
        vertex: Vertex,
        q: f64,
    },
    Correlation {
        edge: Edge,
        alpha: f64,
        lo: f64,
        hi: f64,
    },
}

/// Outcome of [`validate`]; empty means admissible.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return writeln!(f, "ok");
        }
        for v in &self.violations {
            match v {
                Violation::LengthMismatch {
                    what,
                    expected,
                    got,
                } => writeln!(f, "{what}: expected {expected} values, got {got}")?,
                Violation::Marginal { vertex, q } => {
                    writeln!(f, "vertex {vertex}: q = {q} is not in (0, 1)")?
                }
                Violation::Correlation {
                    edge,
                    alpha,
                    lo,
                    hi,
                } => writeln!(f, "edge {edge}: alpha = {alpha} is not in ({lo}, {hi})")?,
            }
        }
        Ok(())
    }
}

/// Check marginals and edge correlations against the admissible region.
/// `alpha` is indexed like the tree's edge list.
pub fn validate(rt: &RootedTree, q: &[f64], alpha: &[f64]) -> ValidationReport {
    let mut violations = Vec::new();
    let d = rt.d();
    let edges = rt.topology().edges();
    if q.len() != d {
        violations.push(Violation::LengthMismatch {
            what: "q",
            expected: d,
            got: q.len(),
        });
    }
    if alpha.len() != edges.len() {
        violations.push(Violation::LengthMismatch {
            what: "alpha",
            expected: edges.len(),
            got: alpha.len(),
        });
    }
    if !violations.is_empty() {
        return ValidationReport { violations };
    }
    for (vertex, &qv) in q.iter().enumerate() {
        if !(qv > 0.0 && qv < 1.0) {
            violations.push(Violation::Marginal { vertex, q: qv });
        }
    }
    for (e, edge) in edges.iter().enumerate() {
        let (Ok((lo, hi)), a) = (alpha_bounds(q[edge.u], q[edge.v]), alpha[e]) else {
            continue;
        };
        if !(a > lo + ALPHA_MARGIN && a < hi - ALPHA_MARGIN) {
            violations.push(Violation::Correlation {
                edge: *edge,
                alpha: a,
                lo,
                hi,
            });
        }
    }
    ValidationReport { violations }
}

/// Tree Ising model under mean parameterization. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanParamIsing {
    tree: RootedTree,
    q: Vec<f64>,
    alpha: Vec<f64>,
}

impl MeanParamIsing {
    pub fn new(tree: RootedTree, q: Vec<f64>, alpha: Vec<f64>) -> Result<Self, ModelError> {
        let report = validate(&tree, &q, &alpha);
        if !report.is_ok() {
            return Err(ModelError::Invalid(report));
        }
        Ok(MeanParamIsing { tree, q, alpha })
    }

    /// Common marginal `q` and common correlation `alpha` on every edge.
    pub fn homogeneous(tree: RootedTree, q: f64, alpha: f64) -> Result<Self, ModelError> {
        let d = tree.d();
        let m = tree.topology().edges().len();
        Self::new(tree, vec![q; d], vec![alpha; m])
    }

    pub fn tree(&self) -> &RootedTree {
        &self.tree
    }

    pub fn d(&self) -> usize {
        self.tree.d()
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    /// Edge correlations, indexed like `tree().topology().edges()`.
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Same distribution, rooted at `root`.
    pub fn reroot(&self, root: Vertex) -> Result<Self, ModelError> {
        Ok(MeanParamIsing {
            tree: self.tree.reroot(root)?,
            q: self.q.clone(),
            alpha: self.alpha.clone(),
        })
    }

    /// Covariance along edge `e`.
    pub fn edge_covariance(&self, e: usize) -> f64 {
        let edge = self.tree.topology().edges()[e];
        self.alpha[e] * self.edge_sigma(edge)
    }

    fn edge_sigma(&self, edge: Edge) -> f64 {
        let (qu, qv) = (self.q[edge.u], self.q[edge.v]);
        (qu * qv * (1.0 - qu) * (1.0 - qv)).sqrt()
    }

    /// `Pr(J_v = x_v | J_pa(v) = x_pa)` for a non-root vertex.
    pub fn conditional_pmf(&self, v: Vertex, x_v: u8, x_pa: u8) -> Result<f64, ModelError> {
        check_bit(x_v)?;
        check_bit(x_pa)?;
        if v >= self.d() {
            return Err(TreeError::IndexOutOfRange {
                index: v,
                d: self.d(),
            }
            .into());
        }
        let pa = self.tree.parent(v).ok_or(ModelError::RootHasNoParent(v))?;
        let e = self
            .tree
            .parent_edge(v)
            .expect("non-root has a parent edge");
        Ok(self.conditional_row(v, pa, e, x_pa)[x_v as usize])
    }

    /// `[Pr(J_v = 0 | J_pa = x_pa), Pr(J_v = 1 | J_pa = x_pa)]`.
    pub(crate) fn conditional_row(&self, v: Vertex, pa: Vertex, e: usize, x_pa: u8) -> [f64; 2] {
        let (qv, qp) = (self.q[v], self.q[pa]);
        let cov = self.alpha[e] * self.edge_sigma(Edge::new(v, pa));
        if x_pa == 0 {
            let shift = cov / (1.0 - qp);
            [1.0 - qv + shift, qv - shift]
        } else {
            let shift = cov / qp;
            [1.0 - qv - shift, qv + shift]
        }
    }

    /// Joint probability of an edge's endpoints, `x_u` for `edge.u`.
    pub fn pair_pmf(&self, edge: Edge, x_u: u8, x_v: u8) -> Result<f64, ModelError> {
        check_bit(x_u)?;
        check_bit(x_v)?;
        let e = self
            .tree
            .topology()
            .edge_index(edge.u, edge.v)
            .ok_or(ModelError::NotAnEdge(edge))?;
        let edge = self.tree.topology().edges()[e];
        let marg = |q: f64, x: u8| if x == 1 { q } else { 1.0 - q };
        let sign = if (x_u + x_v).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        Ok(marg(self.q[edge.u], x_u) * marg(self.q[edge.v], x_v)
            + sign * self.alpha[e] * self.edge_sigma(edge))
    }

    /// Joint pmf at `x` (indexed by vertex).
    pub fn joint_pmf(&self, x: &[u8]) -> Result<f64, ModelError> {
        if x.len() != self.d() {
            return Err(ModelError::LengthMismatch {
                expected: self.d(),
                got: x.len(),
            });
        }
        for &b in x {
            check_bit(b)?;
        }
        Ok(self.joint_pmf_unchecked(|v| x[v]))
    }

    fn joint_pmf_unchecked(&self, x: impl Fn(Vertex) -> u8) -> f64 {
        let r = self.tree.root();
        let mut p = if x(r) == 1 {
            self.q[r]
        } else {
            1.0 - self.q[r]
        };
        for &v in &self.tree.order()[1..] {
            let pa = self.tree.parent(v).expect("non-root");
            let e = self.tree.parent_edge(v).expect("non-root");
            p *= self.conditional_row(v, pa, e, x(pa))[x(v) as usize];
        }
        p
    }

    /// Pearson correlation of `J_u` and `J_v`: the product of edge correlations
    /// along the path joining them.
    pub fn correlation(&self, u: Vertex, v: Vertex) -> Result<f64, ModelError> {
        let topo = self.tree.topology();
        Ok(self
            .tree
            .path(u, v)?
            .iter()
            .map(|edge| self.alpha[topo.edge_index(edge.u, edge.v).expect("path edge")])
            .product())
    }

    fn guard(&self) -> Result<(), ModelError> {
        if self.d() > MAX_BRUTE_FORCE_DIM {
            Err(ModelError::DimensionTooLarge {
                d: self.d(),
                limit: MAX_BRUTE_FORCE_DIM,
            })
        } else {
            Ok(())
        }
    }

    /// Joint pmf of every configuration, configuration `x` at index
    /// `sum_v x_v 2^v`.
    pub fn enumerate_joint(&self) -> Result<Vec<f64>, ModelError> {
        self.guard()?;
        Ok((0..1usize << self.d())
            .map(|mask| self.joint_pmf_unchecked(|v| ((mask >> v) & 1) as u8))
            .collect())
    }

    /// Pmf of `K = sum_v J_v` by summing the joint pmf over `{0,1}^d`.
    pub fn brute_force_sum_pmf(&self) -> Result<Pmf, ModelError> {
        let mut out = vec![0.0; self.d() + 1];
        for (mask, p) in self.enumerate_joint()?.into_iter().enumerate() {
            out[mask.count_ones() as usize] += p;
        }
        Ok(Pmf::from_values_unchecked(out))
    }

    /// `E[J_v 1{K = k}]` for `k = 0..=d`, by enumeration.
    pub fn brute_force_allocations(&self, v: Vertex) -> Result<Vec<f64>, ModelError> {
        if v >= self.d() {
            return Err(TreeError::IndexOutOfRange {
                index: v,
                d: self.d(),
            }
            .into());
        }
        let mut out = vec![0.0; self.d() + 1];
        for (mask, p) in self.enumerate_joint()?.into_iter().enumerate() {
            if (mask >> v) & 1 == 1 {
                out[mask.count_ones() as usize] += p;
            }
        }
        Ok(out)
    }
}

fn check_bit(b: u8) -> Result<(), ModelError> {
    if b <= 1 {
        Ok(())
    } else {
        Err(ModelError::InvalidBit(b))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PmfError {
    #[error("entry {index} is {value}, below the tolerance {tolerance}")]
    NegativeMass {
        index: usize,
        value: f64,
        tolerance: f64,
    },
    #[error("total mass {total} differs from 1 by more than {tolerance}")]
    NotNormalized { total: f64, tolerance: f64 },
    #[error("pmf needs at least one entry")]
    Empty,
}

/// Probability vector on `{0, ..., len-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    values: Vec<f64>,
    tolerance: f64,
}

impl Pmf {
    /// Clip entries in `[-tolerance, 0)` to zero and renormalize when the total
    /// is within `tolerance` of one; anything worse is an error.
    pub fn from_raw(mut values: Vec<f64>, tolerance: f64) -> Result<Pmf, PmfError> {
        if values.is_empty() {
            return Err(PmfError::Empty);
        }
        for (index, x) in values.iter_mut().enumerate() {
            if *x < -tolerance || x.is_nan() {
                return Err(PmfError::NegativeMass {
                    index,
                    value: *x,
                    tolerance,
                });
            }
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > tolerance {
            return Err(PmfError::NotNormalized { total, tolerance });
        }
        values.iter_mut().for_each(|x| *x /= total);
        Ok(Pmf { values, tolerance })
    }

    /// Relative frequencies from counts.
    pub fn from_counts(counts: &[u64]) -> Pmf {
        let n: u64 = counts.iter().sum();
        let values = counts.iter().map(|&c| c as f64 / n.max(1) as f64).collect();
        Pmf {
            values,
            tolerance: 0.0,
        }
    }

    pub(crate) fn from_values_unchecked(values: Vec<f64>) -> Pmf {
        Pmf {
            values,
            tolerance: 0.0,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `Pr(X = k)`, zero outside the stored support.
    pub fn prob(&self, k: usize) -> f64 {
        self.values.get(k).copied().unwrap_or(0.0)
    }

    /// `Pr(X >= k)`.
    pub fn tail(&self, k: usize) -> f64 {
        self.values.iter().skip(k).sum()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values
            .iter()
            .enumerate()
            .map(|(k, p)| (k as f64 - m).powi(2) * p)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{binary_tree_edges, build_tree, chain_edges};

    fn pair_model(q: f64, alpha: f64) -> MeanParamIsing {
        let t = build_tree(2, &[(0, 1)]).unwrap().root_at(0).unwrap();
        MeanParamIsing::homogeneous(t, q, alpha).unwrap()
    }

    fn table1_model() -> MeanParamIsing {
        let t = build_tree(7, &binary_tree_edges(7))
            .unwrap()
            .root_at(0)
            .unwrap();
        MeanParamIsing::homogeneous(t, 0.01, 0.7).unwrap()
    }

    #[test]
    fn sigma_values() {
        assert!((sigma(0.5, 0.5).unwrap() - 0.25).abs() < 1e-15);
        assert!((sigma(0.01, 0.01).unwrap() - 0.0099).abs() < 1e-15);
        assert!((sigma(0.3, 0.7).unwrap() - sigma(0.3, 0.3).unwrap()).abs() < 1e-15);
        assert!(matches!(sigma(0.0, 0.5), Err(ModelError::DomainError(_))));
        assert!(sigma(0.5, 1.0).is_err());
    }

    #[test]
    fn bounds() {
        let (lo, hi) = alpha_bounds(0.5, 0.5).unwrap();
        assert!((lo + 1.0).abs() < 1e-15 && (hi - 1.0).abs() < 1e-15);
        let (lo, hi) = alpha_bounds(0.01, 0.01).unwrap();
        assert!((lo + 0.01 / 0.99).abs() < 1e-15);
        assert!((hi - 1.0).abs() < 1e-15);
        assert_eq!(
            alpha_bounds(0.2, 0.6).unwrap(),
            alpha_bounds(0.6, 0.2).unwrap()
        );
    }

    #[test]
    fn validation_reports() {
        let t = build_tree(3, &chain_edges(3)).unwrap().root_at(0).unwrap();
        assert!(validate(&t, &[0.5; 3], &[0.7; 2]).is_ok());

        let r = validate(&t, &[0.01; 3], &[0.7, -0.5]);
        assert_eq!(r.violations.len(), 1);
        match &r.violations[0] {
            Violation::Correlation { edge, lo, .. } => {
                assert_eq!(*edge, Edge::new(1, 2));
                assert!((lo + 0.0101010101).abs() < 1e-9);
            }
            other => panic!("unexpected {other:?}"),
        }
        let r = validate(&t, &[0.0, 0.5, 0.5], &[0.1, 0.1]);
        assert!(matches!(
            r.violations[0],
            Violation::Marginal { vertex: 0, .. }
        ));
        assert!(MeanParamIsing::new(t, vec![0.5; 3], vec![0.1]).is_err());
    }

    #[test]
    fn conditionals() {
        let m = pair_model(0.5, 0.7);
        assert!((m.conditional_pmf(1, 1, 1).unwrap() - 0.85).abs() < 1e-15);
        assert_eq!(
            m.conditional_pmf(0, 1, 1),
            Err(ModelError::RootHasNoParent(0))
        );

        let m = pair_model(0.3, 0.0);
        for x_pa in 0..2 {
            assert!((m.conditional_pmf(1, 1, x_pa).unwrap() - 0.3).abs() < 1e-15);
            assert!((m.conditional_pmf(1, 0, x_pa).unwrap() - 0.7).abs() < 1e-15);
        }

        let m = pair_model(0.01, 0.7);
        let p = m.conditional_pmf(1, 1, 0).unwrap();
        assert!((p - 0.003).abs() < 1e-15);
        // against the 2x2 table: p(1,0) / (1 - q)
        let p10 = m.pair_pmf(Edge::new(0, 1), 0, 1).unwrap();
        assert!((p - p10 / 0.99).abs() < 1e-15);

        for q in [0.1, 0.5, 0.9] {
            let m = pair_model(q, 0.3);
            for x_pa in 0..2 {
                let s =
                    m.conditional_pmf(1, 0, x_pa).unwrap() + m.conditional_pmf(1, 1, x_pa).unwrap();
                assert!((s - 1.0).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn pair_tables() {
        let m = pair_model(0.3, 0.0);
        let e = Edge::new(0, 1);
        assert!((m.pair_pmf(e, 1, 0).unwrap() - 0.21).abs() < 1e-15);

        let m = pair_model(0.5, 1.0 - 1e-9);
        assert!(m.pair_pmf(e, 0, 1).unwrap() < 1e-9);
        assert!((m.pair_pmf(e, 1, 1).unwrap() - 0.5).abs() < 1e-9);

        let m = pair_model(0.01, 0.7);
        let p11 = m.pair_pmf(e, 1, 1).unwrap();
        assert!((p11 - 0.00703).abs() < 1e-15);
        let via_cond = m.conditional_pmf(1, 1, 1).unwrap() * 0.01;
        assert!((p11 - via_cond).abs() < 1e-15);
        assert_eq!(
            m.pair_pmf(Edge::new(0, 0), 0, 0),
            Err(ModelError::NotAnEdge(Edge::new(0, 0)))
        );
    }

    #[test]
    fn joint_pmf_cases() {
        let t = build_tree(3, &chain_edges(3)).unwrap().root_at(1).unwrap();
        let m = MeanParamIsing::new(t, vec![0.2, 0.4, 0.7], vec![0.0, 0.0]).unwrap();
        let p = m.joint_pmf(&[1, 0, 1]).unwrap();
        assert!((p - 0.2 * 0.6 * 0.7).abs() < 1e-15);
        assert!(matches!(
            m.joint_pmf(&[1, 0]),
            Err(ModelError::LengthMismatch { .. })
        ));
        assert_eq!(m.joint_pmf(&[1, 0, 2]), Err(ModelError::InvalidBit(2)));

        let single = build_tree(1, &[]).unwrap().root_at(0).unwrap();
        let m = MeanParamIsing::new(single, vec![0.3], vec![]).unwrap();
        assert!((m.joint_pmf(&[1]).unwrap() - 0.3).abs() < 1e-15);
        assert!((m.joint_pmf(&[0]).unwrap() - 0.7).abs() < 1e-15);

        let total: f64 = table1_model().enumerate_joint().unwrap().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlations_match_enumeration() {
        let t = build_tree(7, &binary_tree_edges(7))
            .unwrap()
            .root_at(0)
            .unwrap();
        let alpha = [0.7, -0.3, 0.5, 0.2, 0.9, -0.6];
        let q = [0.3, 0.4, 0.5, 0.45, 0.6, 0.55, 0.35];
        let m = MeanParamIsing::new(t, q.to_vec(), alpha.to_vec()).unwrap();
        let table = m.enumerate_joint().unwrap();
        for u in 0..7 {
            for v in (u + 1)..7 {
                let e_uv: f64 = table
                    .iter()
                    .enumerate()
                    .filter(|(mask, _)| (mask >> u) & 1 == 1 && (mask >> v) & 1 == 1)
                    .map(|(_, p)| p)
                    .sum();
                let pearson = (e_uv - q[u] * q[v]) / sigma(q[u], q[v]).unwrap();
                assert!((pearson - m.correlation(u, v).unwrap()).abs() < 1e-10);
            }
        }
        let t = build_tree(3, &chain_edges(3)).unwrap().root_at(0).unwrap();
        let m = MeanParamIsing::homogeneous(t, 0.5, 0.7).unwrap();
        assert!((m.correlation(0, 2).unwrap() - 0.49).abs() < 1e-15);
        assert!((m.correlation(0, 1).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn brute_force_oracles() {
        let single = build_tree(1, &[]).unwrap().root_at(0).unwrap();
        let m = MeanParamIsing::new(single, vec![0.3], vec![]).unwrap();
        let p = m.brute_force_sum_pmf().unwrap();
        assert!((p.prob(0) - 0.7).abs() < 1e-15 && (p.prob(1) - 0.3).abs() < 1e-15);
        let a = m.brute_force_allocations(0).unwrap();
        assert_eq!(a[0], 0.0);
        assert!((a[1] - 0.3).abs() < 1e-15);

        // independence: Binomial(d, q)
        let d = 5;
        let q = 0.3;
        let t = build_tree(d, &chain_edges(d)).unwrap().root_at(2).unwrap();
        let m = MeanParamIsing::homogeneous(t, q, 0.0).unwrap();
        let p = m.brute_force_sum_pmf().unwrap();
        let binom = |k: usize| {
            let c = (0..k).fold(1.0, |acc, i| acc * (d - i) as f64 / (i + 1) as f64);
            c * q.powi(k as i32) * (1.0 - q).powi((d - k) as i32)
        };
        for k in 0..=d {
            assert!((p.prob(k) - binom(k)).abs() < 1e-14);
            let a = m.brute_force_allocations(3).unwrap();
            assert!((a[k] - k as f64 / d as f64 * binom(k)).abs() < 1e-14);
        }

        let p = table1_model().brute_force_sum_pmf().unwrap();
        assert!((p.prob(0) - 0.97231).abs() < 5e-6);
    }

    #[test]
    fn root_invariance() {
        let t = build_tree(7, &binary_tree_edges(7)).unwrap();
        let alpha = vec![0.4, -0.2, 0.6, 0.3, -0.1, 0.5];
        let q = vec![0.3, 0.6, 0.5, 0.45, 0.2, 0.55, 0.35];
        let base = MeanParamIsing::new(t.root_at(0).unwrap(), q, alpha).unwrap();
        let reference = base.enumerate_joint().unwrap();
        for r in 1..7 {
            let other = base.reroot(r).unwrap().enumerate_joint().unwrap();
            for (a, b) in reference.iter().zip(&other) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pmf_clipping_policy() {
        let p = Pmf::from_raw(vec![0.5, 0.5 + 1e-12, -1e-12], 1e-9).unwrap();
        assert_eq!(p.prob(2), 0.0);
        assert!((p.total() - 1.0).abs() < 1e-15);
        assert!(matches!(
            Pmf::from_raw(vec![1.0, -1e-6], 1e-9),
            Err(PmfError::NegativeMass { index: 1, .. })
        ));
        assert!(matches!(
            Pmf::from_raw(vec![0.5, 0.4], 1e-9),
            Err(PmfError::NotNormalized { .. })
        ));
        let p = Pmf::from_counts(&[1, 3]);
        assert_eq!(p.values(), &[0.25, 0.75]);
        assert!((p.mean() - 0.75).abs() < 1e-15);
        assert!((p.tail(1) - 0.75).abs() < 1e-15);
    }
}
