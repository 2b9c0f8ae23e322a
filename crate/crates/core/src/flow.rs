//! Closed-form patch flow.
//!
//! For a synthesis patch `psi` at flow time `t`, the velocity towards the
//! exemplar patch distribution is the Gaussian-mixture expectation
//!
//! ```text
//! v(psi, t) = 1/(1-t) * sum_j w_j (phi_j - psi),
//! w_j ∝ exp(-|psi - t phi_j|^2 / (2 (1-t)^2))
//! ```
//!
//! Restricting the sum to the `k` largest weights gives the top-k field; the
//! largest weights belong to the nearest neighbours of `psi / t`. A per-patch
//! [`MemoryTable`] keeps the best neighbours found so far so that only a
//! random fraction of the reference patches has to be scanned per step.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::patch::PatchSet;

/// Below this time the top-k query `psi / t` is undefined; the velocity is
/// taken with uniform weights over the whole candidate subset instead.
pub const T_EPS: f64 = 1e-6;

/// A reference patch index and its squared distance to a query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub sq_dist: f64,
}

impl Neighbor {
    #[inline]
    fn before(&self, other: &Neighbor) -> bool {
        self.sq_dist < other.sq_dist || (self.sq_dist == other.sq_dist && self.index < other.index)
    }
}

/// Uniformly draws `ceil(ratio * N)` distinct patch indices, sorted
/// ascending. `ratio == 1` returns every index without touching the RNG.
pub fn sample_candidates<R: Rng + ?Sized>(
    pset: &PatchSet,
    ratio: f64,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let n = pset.len();
    if n == 0 {
        return Err(Error::Empty("reference patch set"));
    }
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "subsampling ratio must lie in (0, 1], got {ratio}"
        )));
    }
    if ratio == 1.0 {
        return Ok((0..n).collect());
    }
    let m = ((ratio * n as f64).ceil() as usize).clamp(1, n);
    let mut idx = rand::seq::index::sample(rng, n, m).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Squared Euclidean distance, or `None` once the partial sum exceeds
/// `bound`. The summation order does not depend on `bound`.
#[inline]
fn sq_dist_bounded(a: &[f64], b: &[f64], bound: f64) -> Option<f64> {
    const LANES: usize = 8;
    const BLOCK: usize = 64;
    let mut total = 0.0;
    let mut ab = a.chunks(BLOCK).zip(b.chunks(BLOCK));
    for (ca, cb) in &mut ab {
        let mut acc = [0.0f64; LANES];
        let mut xa = ca.chunks_exact(LANES);
        let mut xb = cb.chunks_exact(LANES);
        for (la, lb) in (&mut xa).zip(&mut xb) {
            for l in 0..LANES {
                let d = la[l] - lb[l];
                acc[l] += d * d;
            }
        }
        for (x, y) in xa.remainder().iter().zip(xb.remainder()) {
            let d = x - y;
            acc[0] += d * d;
        }
        total += acc.iter().sum::<f64>();
        if total > bound {
            return None;
        }
    }
    Some(total)
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist_bounded(a, b, f64::INFINITY).expect("unbounded")
}

/// Bounded sorted list of the best neighbours seen so far.
struct TopK {
    k: usize,
    items: Vec<Neighbor>,
}

impl TopK {
    fn new(k: usize) -> Self {
        Self {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    #[inline]
    fn bound(&self) -> f64 {
        if self.items.len() < self.k {
            f64::INFINITY
        } else {
            self.items[self.k - 1].sq_dist
        }
    }

    #[inline]
    fn offer(&mut self, n: Neighbor) {
        if self.items.len() == self.k && !n.before(&self.items[self.k - 1]) {
            return;
        }
        if self.items.iter().any(|m| m.index == n.index) {
            return;
        }
        let pos = self.items.iter().position(|m| n.before(m)).unwrap_or(self.items.len());
        self.items.insert(pos, n);
        self.items.truncate(self.k);
    }

    fn finish(mut self) -> Vec<Neighbor> {
        if let Some(&best) = self.items.first() {
            while self.items.len() < self.k {
                self.items.push(best);
            }
        }
        self.items
    }
}

fn knn_iter(
    query: &[f64],
    pool: impl IntoIterator<Item = usize>,
    pset: &PatchSet,
    k: usize,
) -> Vec<Neighbor> {
    let mut top = TopK::new(k);
    for index in pool {
        if let Some(sq_dist) = sq_dist_bounded(query, pset.patch(index), top.bound()) {
            top.offer(Neighbor { index, sq_dist });
        }
    }
    top.finish()
}

/// Exact `k` nearest patches of `query` among the pool indices, ascending by
/// squared distance, lower index first on ties. A pool with fewer than `k`
/// distinct entries is padded by repeating the best match.
pub fn knn(query: &[f64], pool: &[usize], pset: &PatchSet, k: usize) -> Result<Vec<Neighbor>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if pool.is_empty() {
        return Err(Error::Empty("candidate pool"));
    }
    if query.len() != pset.dim() {
        return Err(Error::DimensionMismatch(format!(
            "query of length {} against patches of dim {}",
            query.len(),
            pset.dim()
        )));
    }
    if let Some(&bad) = pool.iter().find(|&&i| i >= pset.len()) {
        return Err(Error::InvalidArgument(format!(
            "pool index {bad} out of range for {} patches",
            pset.len()
        )));
    }
    Ok(knn_iter(query, pool.iter().copied(), pset, k))
}

/// Exact nearest patch of `query` over the whole set.
pub fn nearest_neighbor(query: &[f64], pset: &PatchSet) -> Result<Neighbor> {
    if pset.is_empty() {
        return Err(Error::Empty("reference patch set"));
    }
    if query.len() != pset.dim() {
        return Err(Error::DimensionMismatch(format!(
            "query of length {} against patches of dim {}",
            query.len(),
            pset.dim()
        )));
    }
    Ok(knn_iter(query, 0..pset.len(), pset, 1)[0])
}

/// Per-synthesis-patch cache of the best reference indices found so far.
///
/// Rows only ever accept better matches: each stored distance is the one
/// recorded when the entry was found, so a row's best distance never grows.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryTable {
    k: usize,
    rows: Vec<Vec<Neighbor>>,
}

impl MemoryTable {
    pub fn new(rows: usize, k: usize) -> Self {
        Self {
            k,
            rows: vec![Vec::new(); rows],
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[Neighbor] {
        &self.rows[i]
    }

    pub fn best_distance(&self, i: usize) -> Option<f64> {
        self.rows[i].first().map(|n| n.sq_dist)
    }

    pub fn update(&mut self, row: usize, new_matches: &[Neighbor]) {
        let merged = merge_row(&self.rows[row], new_matches, self.k);
        self.rows[row] = merged;
    }

    fn rows_mut(&mut self) -> &mut [Vec<Neighbor>] {
        &mut self.rows
    }
}

/// The `k` best distinct entries of `old ∪ new`; an index present in both
/// keeps its smaller distance.
pub fn merge_row(old: &[Neighbor], new: &[Neighbor], k: usize) -> Vec<Neighbor> {
    let mut all: Vec<Neighbor> = Vec::with_capacity(old.len() + new.len());
    for n in old.iter().chain(new) {
        match all.iter_mut().find(|m| m.index == n.index) {
            Some(m) if n.sq_dist < m.sq_dist => m.sq_dist = n.sq_dist,
            Some(_) => {}
            None => all.push(*n),
        }
    }
    all.sort_by(|a, b| a.sq_dist.total_cmp(&b.sq_dist).then(a.index.cmp(&b.index)));
    all.truncate(k);
    all
}

/// Normalized mixture weights over a set of neighbours.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &w) in self.0.iter().enumerate() {
            if w > self.0[best] {
                best = i;
            }
        }
        best
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!(
            "flow time must lie in [0, 1), got {t}"
        )));
    }
    Ok(())
}

/// Softmax of the given log-weights with max subtraction.
fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        sum += *l;
    }
    for l in logits.iter_mut() {
        *l /= sum;
    }
}

#[inline]
fn log_weight(psi: &[f64], t: f64, phi: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&x, &y) in psi.iter().zip(phi) {
        let d = x - t * y;
        acc += d * d;
    }
    let s = 1.0 - t;
    -acc / (2.0 * s * s)
}

/// `w_j ∝ exp(-|psi - t phi_j|^2 / (2 (1-t)^2))`, normalized over the given
/// neighbours in log space.
pub fn compute_weights(psi: &[f64], t: f64, neighbors: &[&[f64]]) -> Result<WeightVector> {
    check_time(t)?;
    if neighbors.is_empty() {
        return Err(Error::Empty("neighbour set"));
    }
    if neighbors.iter().any(|n| n.len() != psi.len()) {
        return Err(Error::DimensionMismatch("neighbour and query lengths differ".into()));
    }
    let mut logits: Vec<f64> = neighbors.iter().map(|phi| log_weight(psi, t, phi)).collect();
    if logits.iter().any(|l| l.is_nan()) {
        return Err(Error::NonFinite("weight exponents"));
    }
    softmax_in_place(&mut logits);
    Ok(WeightVector(logits))
}

fn velocity_into(psi: &[f64], t: f64, neighbors: &[&[f64]], weights: &[f64], out: &mut [f64]) {
    out.fill(0.0);
    for (phi, &w) in neighbors.iter().zip(weights) {
        for ((o, &p), &x) in out.iter_mut().zip(*phi).zip(psi) {
            *o += w * (p - x);
        }
    }
    let inv = 1.0 / (1.0 - t);
    out.iter_mut().for_each(|o| *o *= inv);
}

/// `1/(1-t) * sum_j w_j (phi_j - psi)`.
pub fn velocity(psi: &[f64], t: f64, neighbors: &[&[f64]], weights: &WeightVector) -> Result<Vec<f64>> {
    check_time(t)?;
    if neighbors.len() != weights.0.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} neighbours for {} weights",
            neighbors.len(),
            weights.0.len()
        )));
    }
    if neighbors.iter().any(|n| n.len() != psi.len()) {
        return Err(Error::DimensionMismatch("neighbour and query lengths differ".into()));
    }
    let finite = psi.iter().all(|v| v.is_finite())
        && neighbors.iter().all(|n| n.iter().all(|v| v.is_finite()))
        && weights.0.iter().all(|v| v.is_finite());
    if !finite {
        return Err(Error::NonFinite("velocity inputs"));
    }
    let mut out = vec![0.0; psi.len()];
    velocity_into(psi, t, neighbors, &weights.0, &mut out);
    Ok(out)
}

/// Full-mixture velocity over every patch of `pset`, without any top-k
/// truncation.
pub fn exact_velocity(psi: &[f64], t: f64, pset: &PatchSet) -> Result<Vec<f64>> {
    let neighbors: Vec<&[f64]> = pset.iter().collect();
    let weights = compute_weights(psi, t, &neighbors)?;
    velocity(psi, t, &neighbors, &weights)
}

/// Explicit Euler update `psi += (t_to - t_from) * v`.
pub fn euler_step(psi: &mut [f64], t_from: f64, t_to: f64, v: &[f64]) {
    assert!(t_to > t_from, "Euler step must move forward in time");
    assert_eq!(psi.len(), v.len());
    let dt = t_to - t_from;
    for (p, &vi) in psi.iter_mut().zip(v) {
        *p += dt * vi;
    }
}

/// Per-timestep options for [`patch_velocities`].
#[derive(Debug, Clone, Copy)]
pub struct FlowStep {
    pub t: f64,
    pub k: usize,
    pub use_memory: bool,
}

/// Velocities of every synthesis patch plus the number of patch distances
/// evaluated (a deterministic cost measure).
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub velocities: Vec<f64>,
    pub distance_evals: u64,
}

/// Top-k velocity for every patch of `synth` against the reference patches.
///
/// `candidates` must be sorted and distinct. When `use_memory` is set, each
/// patch additionally searches its memory row and the row is updated with
/// the new neighbours; `memory` must then have one row per synthesis patch.
pub fn patch_velocities(
    synth: &PatchSet,
    reference: &PatchSet,
    candidates: &[usize],
    memory: &mut MemoryTable,
    step: FlowStep,
) -> Result<StepOutput> {
    let FlowStep { t, k, use_memory } = step;
    check_time(t)?;
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if synth.dim() != reference.dim() {
        return Err(Error::DimensionMismatch(format!(
            "synthesis patches of dim {} against reference dim {}",
            synth.dim(),
            reference.dim()
        )));
    }
    if candidates.is_empty() {
        return Err(Error::Empty("candidate subset"));
    }
    if use_memory && memory.len() != synth.len() {
        return Err(Error::DimensionMismatch(format!(
            "memory has {} rows for {} synthesis patches",
            memory.len(),
            synth.len()
        )));
    }
    let dim = synth.dim();
    let mut velocities = vec![0.0; synth.len() * dim];

    if t < T_EPS {
        // Uniform weights over the candidate subset: v = mean - psi.
        let mut mean = vec![0.0; dim];
        for &c in candidates {
            for (m, &v) in mean.iter_mut().zip(reference.patch(c)) {
                *m += v;
            }
        }
        let n = candidates.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        let inv = 1.0 / (1.0 - t);
        velocities
            .par_chunks_mut(dim)
            .zip(synth.data().par_chunks(dim))
            .for_each(|(out, psi)| {
                for ((o, &m), &x) in out.iter_mut().zip(&mean).zip(psi) {
                    *o = (m - x) * inv;
                }
            });
        return Ok(StepOutput {
            velocities,
            distance_evals: 0,
        });
    }

    let mut scratch;
    let rows: &mut [Vec<Neighbor>] = if use_memory {
        memory.rows_mut()
    } else {
        scratch = vec![Vec::new(); synth.len()];
        &mut scratch
    };
    let inv_t = 1.0 / t;
    let evals: u64 = velocities
        .par_chunks_mut(dim)
        .zip(synth.data().par_chunks(dim))
        .zip(rows.par_iter_mut())
        .map(|((out, psi), row)| {
            let query: Vec<f64> = psi.iter().map(|v| v * inv_t).collect();
            let extra: Vec<usize> = if use_memory {
                row.iter()
                    .map(|n| n.index)
                    .filter(|i| candidates.binary_search(i).is_err())
                    .collect()
            } else {
                Vec::new()
            };
            let pool = candidates.iter().copied().chain(extra.iter().copied());
            let found = knn_iter(&query, pool, reference, k);
            if use_memory {
                *row = merge_row(row, &found, k);
            }
            let nbrs: Vec<&[f64]> = found.iter().map(|n| reference.patch(n.index)).collect();
            let mut logits: Vec<f64> = nbrs.iter().map(|phi| log_weight(psi, t, phi)).collect();
            softmax_in_place(&mut logits);
            velocity_into(psi, t, &nbrs, &logits, out);
            (candidates.len() + extra.len()) as u64
        })
        .sum();

    if velocities.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("patch velocities"));
    }
    Ok(StepOutput {
        velocities,
        distance_evals: evals,
    })
}
