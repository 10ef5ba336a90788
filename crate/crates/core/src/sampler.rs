//! Direct sampling of tree Ising models and Monte-Carlo estimation of the
//! distribution of the sum.
//!
//! Vertices are drawn in topological order: the root from Bernoulli(q_r),
//! every other vertex from its conditional law given the realized parent bit.
//! Each vertex consumes exactly one uniform.
//!
//! Random numbers come from ChaCha8 keyed by a 64-bit seed with a separate
//! stream id per replication, so any replication can be regenerated on its
//! own and results do not depend on how work is split across threads.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{MeanParamIsing, Pmf};
use crate::tree::Vertex;

/// Rows per independent stream in [`sample_batch`].
pub const BATCH_CHUNK: usize = 1 << 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("symmetric sampler needs q = 0.5 at every vertex; q[{vertex}] = {q}")]
    NotSymmetricModel { vertex: Vertex, q: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Reproducible random source identified by `(seed, stream)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Which sampling scheme to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMethod {
    Direct,
    SymmetricFlip,
}

/// Precomputed topological schedule: for each position the vertex, the
/// position of its parent and the two thresholds `Pr(1 | parent = 0)`,
/// `Pr(1 | parent = 1)`. The root uses `q_r` in both slots.
#[derive(Debug, Clone)]
struct Schedule {
    steps: Vec<(Vertex, usize, [f64; 2])>,
}

impl Schedule {
    fn draw_into(&self, rng: &mut RngStream, out: &mut [u8]) {
        for &(v, pa, p1) in &self.steps {
            // the root's parent slot points at itself and is never read as 1
            let x_pa = if pa == v { 0 } else { out[pa] };
            out[v] = u8::from(rng.uniform() < p1[x_pa as usize]);
        }
    }
}

/// Single-pass sampler drawing each vertex from its conditional law.
#[derive(Debug, Clone)]
pub struct DirectSampler {
    schedule: Schedule,
    d: usize,
}

impl DirectSampler {
    pub fn new(model: &MeanParamIsing) -> Self {
        let rt = model.tree();
        let steps = rt
            .order()
            .iter()
            .map(|&v| match (rt.parent(v), rt.parent_edge(v)) {
                (Some(pa), Some(e)) => {
                    let p1 = [
                        model.conditional_row(v, pa, e, 0)[1],
                        model.conditional_row(v, pa, e, 1)[1],
                    ];
                    (v, pa, p1)
                }
                _ => (v, v, [model.q()[v]; 2]),
            })
            .collect();
        DirectSampler {
            schedule: Schedule { steps },
            d: model.d(),
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Fill `out` (indexed by vertex) with one realization.
    pub fn draw_into(&self, rng: &mut RngStream, out: &mut [u8]) {
        self.schedule.draw_into(rng, out)
    }

    pub fn draw(&self, rng: &mut RngStream) -> Vec<u8> {
        let mut out = vec![0; self.d];
        self.draw_into(rng, &mut out);
        out
    }
}

/// Sampler for `q = 0.5` everywhere: the root is a fair coin and each other
/// vertex copies its parent with probability `(1 + alpha) / 2`, flipping it
/// otherwise.
#[derive(Debug, Clone)]
pub struct SymmetricFlipSampler {
    steps: Vec<(Vertex, Option<Vertex>, f64)>,
    d: usize,
}

impl SymmetricFlipSampler {
    pub fn new(model: &MeanParamIsing) -> Result<Self, SamplerError> {
        if let Some((vertex, &q)) = model.q().iter().enumerate().find(|(_, &q)| q != 0.5) {
            return Err(SamplerError::NotSymmetricModel { vertex, q });
        }
        let rt = model.tree();
        let steps = rt
            .order()
            .iter()
            .map(|&v| match rt.parent_edge(v) {
                Some(e) => (v, rt.parent(v), 0.5 * (model.alpha()[e] + 1.0)),
                None => (v, None, 0.5),
            })
            .collect();
        Ok(SymmetricFlipSampler {
            steps,
            d: model.d(),
        })
    }

    pub fn draw_into(&self, rng: &mut RngStream, out: &mut [u8]) {
        for &(v, pa, beta) in &self.steps {
            let u = rng.uniform();
            out[v] = match pa {
                None => u8::from(u < beta),
                Some(pa) if u < beta => out[pa],
                Some(pa) => 1 - out[pa],
            };
        }
    }

    pub fn draw(&self, rng: &mut RngStream) -> Vec<u8> {
        let mut out = vec![0; self.d];
        self.draw_into(rng, &mut out);
        out
    }
}

/// One realization of the model.
pub fn sample_ising(model: &MeanParamIsing, rng: &mut RngStream) -> Vec<u8> {
    DirectSampler::new(model).draw(rng)
}

/// One realization by parent copying / flipping.
pub fn sample_symmetric_flip(
    model: &MeanParamIsing,
    rng: &mut RngStream,
) -> Result<Vec<u8>, SamplerError> {
    Ok(SymmetricFlipSampler::new(model)?.draw(rng))
}

/// Realizations stored row-major; column `v` is vertex `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    seed: u64,
    d: usize,
    bits: Vec<u8>,
}

impl SampleBatch {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn rows(&self) -> usize {
        self.bits.len().checked_div(self.d).unwrap_or(0)
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.bits[i * self.d..(i + 1) * self.d]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[u8]> {
        self.bits.chunks_exact(self.d)
    }

    /// Empirical `Pr(J_v = 1)` for every vertex.
    pub fn column_means(&self) -> Vec<f64> {
        let mut sums = vec![0u64; self.d];
        for row in self.iter_rows() {
            for (s, &b) in sums.iter_mut().zip(row) {
                *s += u64::from(b);
            }
        }
        let n = self.rows() as f64;
        sums.into_iter().map(|s| s as f64 / n).collect()
    }

    /// Empirical Pearson correlation between two columns.
    pub fn correlation(&self, u: Vertex, v: Vertex) -> f64 {
        let (mut su, mut sv, mut suv) = (0u64, 0u64, 0u64);
        for row in self.iter_rows() {
            let (a, b) = (u64::from(row[u]), u64::from(row[v]));
            su += a;
            sv += b;
            suv += a * b;
        }
        let n = self.rows() as f64;
        let (mu, mv) = (su as f64 / n, sv as f64 / n);
        (suv as f64 / n - mu * mv) / (mu * (1.0 - mu) * mv * (1.0 - mv)).sqrt()
    }

    /// Counts of `K = 0..=d`.
    pub fn sum_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.d + 1];
        for row in self.iter_rows() {
            counts[row.iter().map(|&b| b as usize).sum::<usize>()] += 1;
        }
        counts
    }

    /// Counts of each configuration, indexed by `sum_v x_v 2^v` (small `d`).
    pub fn joint_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; 1 << self.d];
        for row in self.iter_rows() {
            let mask = row
                .iter()
                .enumerate()
                .fold(0usize, |m, (v, &b)| m | ((b as usize) << v));
            counts[mask] += 1;
        }
        counts
    }
}

fn worker_count(jobs: usize) -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(jobs)
        .max(1)
}

/// Run `job(i)` for `i in 0..jobs`, spread over threads, returning results in
/// index order.
fn run_indexed<T: Send>(jobs: usize, job: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let workers = worker_count(jobs);
    if workers <= 1 {
        return (0..jobs).map(job).collect();
    }
    let job = &job;
    let mut parts: Vec<Vec<T>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| s.spawn(move || (w..jobs).step_by(workers).map(job).collect::<Vec<T>>()))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    let mut iters: Vec<_> = parts.iter_mut().map(|p| p.drain(..)).collect();
    (0..jobs)
        .map(|i| iters[i % workers].next().expect("missing result"))
        .collect()
}

/// `n` realizations. Rows are produced in chunks of [`BATCH_CHUNK`]; chunk
/// `c` uses stream `c` of `seed`.
pub fn sample_batch(
    model: &MeanParamIsing,
    n: usize,
    seed: u64,
    method: SamplingMethod,
) -> Result<SampleBatch, SamplerError> {
    let d = model.d();
    let direct = DirectSampler::new(model);
    let flip = match method {
        SamplingMethod::SymmetricFlip => Some(SymmetricFlipSampler::new(model)?),
        SamplingMethod::Direct => None,
    };
    let chunks = n.div_ceil(BATCH_CHUNK);
    let parts = run_indexed(chunks, |c| {
        let rows = BATCH_CHUNK.min(n - c * BATCH_CHUNK);
        let mut rng = RngStream::new(seed, c as u64);
        let mut bits = vec![0u8; rows * d];
        for row in bits.chunks_exact_mut(d.max(1)) {
            match &flip {
                Some(s) => s.draw_into(&mut rng, row),
                None => direct.draw_into(&mut rng, row),
            }
        }
        bits
    });
    Ok(SampleBatch {
        seed,
        d,
        bits: parts.concat(),
    })
}

/// Empirical pmf of `K` over `n` direct draws.
pub fn monte_carlo_sum_pmf(
    model: &MeanParamIsing,
    n: usize,
    rng: &mut RngStream,
) -> Result<Pmf, SamplerError> {
    if n == 0 {
        return Err(SamplerError::InvalidArgument(
            "need at least one draw".into(),
        ));
    }
    let sampler = DirectSampler::new(model);
    let mut counts = vec![0u64; model.d() + 1];
    let mut row = vec![0u8; model.d()];
    for _ in 0..n {
        sampler.draw_into(rng, &mut row);
        counts[row.iter().map(|&b| b as usize).sum::<usize>()] += 1;
    }
    Ok(Pmf::from_counts(&counts))
}

/// Closed interval of estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Empirical quantile taking the smallest order statistic whose ECDF value
/// reaches `p`.
pub fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let m = sorted.len();
    let idx = ((p * m as f64).ceil() as usize).clamp(1, m) - 1;
    sorted[idx]
}

/// Monte-Carlo pmf estimates from independent replications.
#[derive(Debug, Clone, PartialEq)]
pub struct McReplicates {
    n: usize,
    estimates: Vec<Vec<f64>>,
}

impl McReplicates {
    /// Draws per replication.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn reps(&self) -> usize {
        self.estimates.len()
    }

    /// One estimated pmf of `K` per replication.
    pub fn estimates(&self) -> &[Vec<f64>] {
        &self.estimates
    }

    /// Equal-tailed interval at `level` for a functional of the estimated pmf.
    pub fn interval(&self, level: f64, f: impl Fn(&[f64]) -> f64) -> Interval {
        let mut xs: Vec<f64> = self.estimates.iter().map(|p| f(p)).collect();
        xs.sort_by(f64::total_cmp);
        Interval {
            lo: empirical_quantile(&xs, (1.0 - level) / 2.0),
            hi: empirical_quantile(&xs, (1.0 + level) / 2.0),
        }
    }

    /// Interval for `Pr(K = k)` for every `k`.
    pub fn pmf_intervals(&self, level: f64) -> Vec<Interval> {
        let len = self.estimates.first().map_or(0, Vec::len);
        (0..len).map(|k| self.interval(level, |p| p[k])).collect()
    }

    /// Interval for `Pr(K >= k)`.
    pub fn tail_interval(&self, level: f64, k: usize) -> Interval {
        self.interval(level, |p| p.iter().skip(k).sum())
    }
}

/// `reps` independent estimates of the pmf of `K`, each from `n` draws;
/// replication `r` uses stream `r` of `seed`.
pub fn mc_replicates(
    model: &MeanParamIsing,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<McReplicates, SamplerError> {
    if n == 0 {
        return Err(SamplerError::InvalidArgument(
            "need at least one draw".into(),
        ));
    }
    if reps < 2 {
        return Err(SamplerError::InvalidArgument(format!(
            "need at least 2 replications, got {reps}"
        )));
    }
    let sampler = DirectSampler::new(model);
    let d = model.d();
    let estimates = run_indexed(reps, |r| {
        let mut rng = RngStream::new(seed, r as u64);
        let mut counts = vec![0u64; d + 1];
        let mut row = vec![0u8; d];
        for _ in 0..n {
            sampler.draw_into(&mut rng, &mut row);
            counts[row.iter().map(|&b| b as usize).sum::<usize>()] += 1;
        }
        counts.into_iter().map(|c| c as f64 / n as f64).collect()
    });
    Ok(McReplicates { n, estimates })
}

/// Per-`k` intervals for `Pr(K = k)` at `level`.
pub fn mc_confidence_intervals(
    model: &MeanParamIsing,
    n: usize,
    reps: usize,
    level: f64,
    seed: u64,
) -> Result<Vec<Interval>, SamplerError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(SamplerError::InvalidArgument(format!(
            "level {level} is not in (0, 1)"
        )));
    }
    Ok(mc_replicates(model, n, reps, seed)?.pmf_intervals(level))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{binary_tree_edges, build_tree, chain_edges};

    fn table1() -> MeanParamIsing {
        let t = build_tree(7, &binary_tree_edges(7))
            .unwrap()
            .root_at(0)
            .unwrap();
        MeanParamIsing::homogeneous(t, 0.01, 0.7).unwrap()
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| RngStream::new(7, 3).next_u64()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let mut x = RngStream::new(7, 3);
        let mut y = RngStream::new(7, 4);
        assert_ne!(x.next_u64(), y.next_u64());
    }

    #[test]
    fn batches_are_deterministic() {
        let m = table1();
        let a = sample_batch(&m, 1000, 11, SamplingMethod::Direct).unwrap();
        let b = sample_batch(&m, 1000, 11, SamplingMethod::Direct).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows(), 1000);
        assert!(a.iter_rows().all(|r| r.iter().all(|&x| x <= 1)));
    }

    #[test]
    fn comonotone_limit_copies_parent() {
        let t = build_tree(5, &chain_edges(5)).unwrap().root_at(0).unwrap();
        let m = MeanParamIsing::homogeneous(t, 0.3, 1.0 - 1e-9).unwrap();
        let mut rng = RngStream::new(1, 0);
        for _ in 0..1000 {
            let x = sample_ising(&m, &mut rng);
            assert!(x.iter().all(|&b| b == x[0]));
        }
    }

    #[test]
    fn symmetric_flip_limits() {
        let t = build_tree(6, &chain_edges(6)).unwrap().root_at(0).unwrap();
        let m = MeanParamIsing::homogeneous(t.clone(), 0.5, -1.0 + 1e-9).unwrap();
        let mut rng = RngStream::new(2, 0);
        for _ in 0..1000 {
            let x = sample_symmetric_flip(&m, &mut rng).unwrap();
            assert!(x.windows(2).all(|w| w[0] != w[1]));
        }
        let m = MeanParamIsing::homogeneous(t, 0.4, 0.2).unwrap();
        assert!(matches!(
            sample_symmetric_flip(&m, &mut rng),
            Err(SamplerError::NotSymmetricModel { .. })
        ));
    }

    #[test]
    fn point_mass_at_d() {
        let t = build_tree(3, &chain_edges(3)).unwrap().root_at(0).unwrap();
        let m = MeanParamIsing::homogeneous(t, 1.0 - 1e-9, 0.0).unwrap();
        let p = monte_carlo_sum_pmf(&m, 1, &mut RngStream::new(0, 0)).unwrap();
        assert_eq!(p.prob(3), 1.0);
    }

    #[test]
    fn two_replications_give_min_max() {
        let m = table1();
        let reps = mc_replicates(&m, 50, 2, 5).unwrap();
        let a = reps.estimates()[0][0];
        let b = reps.estimates()[1][0];
        let iv = reps.interval(0.9, |p| p[0]);
        assert_eq!((iv.lo, iv.hi), (a.min(b), a.max(b)));
        assert!(mc_replicates(&m, 50, 1, 5).is_err());
        assert!(mc_confidence_intervals(&m, 50, 10, 1.0, 5).is_err());
    }

    #[test]
    fn quantile_convention() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(empirical_quantile(&xs, 0.0), 1.0);
        assert_eq!(empirical_quantile(&xs, 0.25), 1.0);
        assert_eq!(empirical_quantile(&xs, 0.26), 2.0);
        assert_eq!(empirical_quantile(&xs, 1.0), 4.0);
    }

    #[test]
    fn parallel_split_keeps_order() {
        let out = run_indexed(37, |i| i * i);
        assert_eq!(out, (0..37).map(|i| i * i).collect::<Vec<_>>());
    }
}
