//! Distribution of `K = sum_v J_v` and expected allocations `E[J_v 1{K=k}]`
//! by discrete Fourier inversion of the pgf.
//!
//! Transform convention: the forward transform is
//! `X_l = sum_k x_k exp(-2 pi i k l / n)` and the inverse is
//! `x_k = (1/n) sum_l X_l exp(+2 pi i k l / n)`. With this pair the forward
//! transform of `(0, 1, 0, ..., 0)` is the node sequence
//! `w_l = exp(-2 pi i l / n)`, and the forward transform of a pmf `p` is
//! `P_K(w_l)`, so the inverse transform of the pgf values recovers `p`.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::model::{MeanParamIsing, ModelError, Pmf, PmfError};
use crate::pgf::{ComplexScalar, PgfEvaluator, PgfMode};
use crate::tree::Vertex;

/// Transform length commonly used in the literature; any power of two above
/// `d` gives the same result.
pub const LARGE_FFT_LEN: usize = 1 << 13;

/// Negative round-off tolerated (and clipped) in transformed pmf entries.
pub const CLIP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SumError {
    #[error("transform length {0} is not a power of two")]
    LengthNotPowerOfTwo(usize),
    #[error("transform length {n} must exceed the dimension {d}")]
    LengthTooShort { n: usize, d: usize },
    #[error("numerical tolerance exceeded: {0}")]
    ToleranceExceeded(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl From<PmfError> for SumError {
    fn from(e: PmfError) -> Self {
        SumError::ToleranceExceeded(e.to_string())
    }
}

/// Smallest power of two strictly greater than `d`.
pub fn default_fft_len(d: usize) -> usize {
    (d + 1).next_power_of_two()
}

/// Planned forward/inverse transforms of one power-of-two length.
#[derive(Clone)]
pub struct DftPlan {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for DftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DftPlan").field("n", &self.n).finish()
    }
}

impl DftPlan {
    pub fn new(n: usize) -> Result<Self, SumError> {
        if n == 0 || !n.is_power_of_two() {
            return Err(SumError::LengthNotPowerOfTwo(n));
        }
        let mut planner = FftPlanner::new();
        Ok(DftPlan {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, x: &mut [ComplexScalar]) {
        assert_eq!(x.len(), self.n, "buffer length must match the plan");
        self.forward.process(x);
    }

    pub fn inverse(&self, x: &mut [ComplexScalar]) {
        assert_eq!(x.len(), self.n, "buffer length must match the plan");
        self.inverse.process(x);
        let scale = 1.0 / self.n as f64;
        x.iter_mut().for_each(|v| *v *= scale);
    }

    /// Evaluation nodes: the forward transform of the unit impulse at index 1.
    pub fn nodes(&self) -> Vec<ComplexScalar> {
        let mut b = vec![ComplexScalar::new(0.0, 0.0); self.n];
        if self.n > 1 {
            b[1] = ComplexScalar::new(1.0, 0.0);
        } else {
            b[0] = ComplexScalar::new(1.0, 0.0);
        }
        self.forward(&mut b);
        b
    }

    /// Inverse transform of `g(w_l)` over all nodes, for a generating function
    /// `g` with real coefficients (only half the nodes are evaluated; the rest
    /// are conjugates).
    pub fn invert_real_series(
        &self,
        mut g: impl FnMut(ComplexScalar) -> ComplexScalar,
    ) -> Vec<f64> {
        self.invert_real_series_batch(|ts, out| {
            for (t, o) in ts.iter().zip(out) {
                *o = g(*t);
            }
        })
    }

    /// As [`Self::invert_real_series`], with `g(nodes, values)` filling all
    /// needed evaluations in one call.
    pub fn invert_real_series_batch(
        &self,
        g: impl FnOnce(&[ComplexScalar], &mut [ComplexScalar]),
    ) -> Vec<f64> {
        let nodes = self.nodes();
        let mut values = vec![ComplexScalar::new(0.0, 0.0); self.n];
        let half = self.n / 2;
        let used = half.min(self.n - 1) + 1;
        g(&nodes[..used], &mut values[..used]);
        for l in (half + 1)..self.n {
            values[l] = values[self.n - l].conj();
        }
        self.inverse(&mut values);
        values.into_iter().map(|v| v.re).collect()
    }
}

/// Forward transform of a power-of-two length sequence.
pub fn dft(x: &[ComplexScalar]) -> Result<Vec<ComplexScalar>, SumError> {
    let plan = DftPlan::new(x.len())?;
    let mut out = x.to_vec();
    plan.forward(&mut out);
    Ok(out)
}

/// Inverse of [`dft`].
pub fn idft(x: &[ComplexScalar]) -> Result<Vec<ComplexScalar>, SumError> {
    let plan = DftPlan::new(x.len())?;
    let mut out = x.to_vec();
    plan.inverse(&mut out);
    Ok(out)
}

/// Check that the coefficients above `keep` are round-off, then truncate.
fn trim_series(mut raw: Vec<f64>, keep: usize) -> Result<Vec<f64>, SumError> {
    if let Some((k, x)) = raw
        .iter()
        .enumerate()
        .skip(keep)
        .find(|(_, x)| x.abs() > CLIP_TOLERANCE)
    {
        return Err(SumError::ToleranceExceeded(format!(
            "coefficient {k} = {x} beyond the support"
        )));
    }
    raw.truncate(keep);
    Ok(raw)
}

/// Pmf of `K` on `{0, ..., d}` from a length-`n` transform (`n` a power of two
/// above `d`).
pub fn sum_pmf(model: &MeanParamIsing, n: usize) -> Result<Pmf, SumError> {
    let d = model.d();
    let plan = DftPlan::new(n)?;
    if n <= d {
        return Err(SumError::LengthTooShort { n, d });
    }
    let mut eval = PgfEvaluator::new(model);
    let raw =
        plan.invert_real_series_batch(|ts, out| eval.eval_uniform_batch(ts, PgfMode::Full, out));
    let values = trim_series(raw, d + 1)?;
    Ok(Pmf::from_raw(values, CLIP_TOLERANCE)?)
}

/// `E[J_v 1{K = k}]` for `k = 0..=d`.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationVector {
    pub vertex: Vertex,
    pub values: Vec<f64>,
}

impl AllocationVector {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Expected allocations of vertex `v`, by rerooting at `v` and inverting the
/// root-branch generating function.
pub fn expected_allocations(
    model: &MeanParamIsing,
    v: Vertex,
    n: usize,
) -> Result<AllocationVector, SumError> {
    let d = model.d();
    let plan = DftPlan::new(n)?;
    if n <= d {
        return Err(SumError::LengthTooShort { n, d });
    }
    let rooted = model.reroot(v)?;
    let mut eval = PgfEvaluator::new(&rooted);
    let raw = plan
        .invert_real_series_batch(|ts, out| eval.eval_uniform_batch(ts, PgfMode::RootBranch, out));
    let mut values = trim_series(raw, d + 1)?;
    for (k, x) in values.iter_mut().enumerate() {
        if *x < -CLIP_TOLERANCE {
            return Err(SumError::ToleranceExceeded(format!(
                "allocation at k = {k} is {x}"
            )));
        }
        *x = x.max(0.0);
    }
    Ok(AllocationVector { vertex: v, values })
}

/// Allocations of every vertex.
pub fn all_allocations(
    model: &MeanParamIsing,
    n: usize,
) -> Result<Vec<AllocationVector>, SumError> {
    (0..model.d())
        .map(|v| expected_allocations(model, v, n))
        .collect()
}

/// Stop-loss transform `E[(X - z)_+]`.
pub fn stop_loss(p: &Pmf, z: f64) -> f64 {
    p.values()
        .iter()
        .enumerate()
        .map(|(k, &pk)| (k as f64 - z).max(0.0) * pk)
        .sum()
}

/// Total variation distance: half the L1 distance, shorter support padded
/// with zeros.
pub fn tv_distance(p: &Pmf, q: &Pmf) -> f64 {
    let n = p.len().max(q.len());
    0.5 * (0..n).map(|k| (p.prob(k) - q.prob(k)).abs()).sum::<f64>()
}
