//! Spiked sparse matrices `A = C⊙W + (θ/N) x xᵀ`.
//!
//! The noise `J = C⊙W` is stored in compressed-row form with both orientations
//! of every edge; the rank-one spike stays factored as `(x, θ)`.

mod io;

pub use io::{read_instance, write_instance, InstanceMeta};

use std::collections::HashSet;

use nalgebra::DMatrix;
use rand::Rng;

use crate::ensembles::{SpikeModel, WeightModel};
use crate::error::{invalid, Error, Result};

/// Symmetric sparse matrix with zero diagonal, no duplicate entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetric {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
}

impl SparseSymmetric {
    /// Build from undirected edges `(i, j, w)`; each edge is listed once in
    /// either orientation.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; n];
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(invalid(format!("edge ({i},{j}) out of range for N = {n}")));
            }
            if i == j {
                return Err(invalid(format!("self-loop at vertex {i}")));
            }
            if !w.is_finite() {
                return Err(invalid(format!("non-finite weight on edge ({i},{j})")));
            }
            counts[i] += 1;
            counts[j] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        for c in &counts {
            row_ptr.push(row_ptr.last().unwrap() + c);
        }
        let nnz = *row_ptr.last().unwrap();
        let mut fill = row_ptr[..n].to_vec();
        let mut entries = vec![(0usize, 0.0f64); nnz];
        for &(i, j, w) in edges {
            entries[fill[i]] = (j, w);
            fill[i] += 1;
            entries[fill[j]] = (i, w);
            fill[j] += 1;
        }
        for i in 0..n {
            let row = &mut entries[row_ptr[i]..row_ptr[i + 1]];
            row.sort_by_key(|e| e.0);
            if let Some(pair) = row.windows(2).find(|p| p[0].0 == p[1].0) {
                return Err(invalid(format!("duplicate edge ({i},{})", pair[0].0)));
            }
        }
        let (cols, weights) = entries.into_iter().unzip();
        Ok(Self {
            n,
            row_ptr,
            cols,
            weights,
        })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            n,
            row_ptr: vec![0; n + 1],
            cols: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Stored entries (twice the number of edges).
    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.degree(i)).collect()
    }

    /// Neighbours (ascending) and weights of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.weights[r])
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        let (cols, w) = self.row(i);
        cols.binary_search(&j).ok().map(|p| w[p])
    }

    /// Undirected edges `(i, j, w)` with `i < j`, ordered by `(i, j)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            let (cols, w) = self.row(i);
            cols.iter()
                .zip(w)
                .filter(move |(j, _)| **j > i)
                .map(move |(j, w)| (i, *j, *w))
        })
    }

    /// `out = J v`, rows summed in ascending column order.
    pub fn matvec_into(&self, v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let r = self.row_ptr[i]..self.row_ptr[i + 1];
            let mut acc = 0.0;
            for (j, w) in self.cols[r.clone()].iter().zip(&self.weights[r]) {
                acc += w * v[*j];
            }
            *o = acc;
        }
    }

    /// `max_i Σ_j |J_ij|`.
    pub fn gershgorin_radius(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).1.iter().map(|w| w.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, w) = self.row(i);
            for (j, w) in cols.iter().zip(w) {
                m[(i, *j)] = *w;
            }
        }
        m
    }
}

// ---------------------------------------------------------------------------
// Configuration model
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairingStrategy {
    /// Rejection when a simple pairing is reasonably likely, sequential otherwise.
    #[default]
    Auto,
    /// Uniform stub matching, restarted from scratch on any loop or multi-edge.
    /// Exactly uniform over simple graphs with the given degrees.
    Rejection,
    /// Pair random stubs one at a time, refusing unsuitable pairs; restart only
    /// when stuck. Asymptotically uniform for moderate degrees; needed for
    /// dense-ish sequences where whole-pairing rejection never succeeds.
    Sequential,
}

#[derive(Debug, Clone, Copy)]
pub struct PairingOptions {
    pub strategy: PairingStrategy,
    pub max_restarts: usize,
}

impl Default for PairingOptions {
    fn default() -> Self {
        Self {
            strategy: PairingStrategy::Auto,
            max_restarts: 10_000,
        }
    }
}

/// Asymptotic probability that a uniform stub matching is simple,
/// `exp(-ν/2 - ν²/4)` with `ν = Σk(k-1)/Σk`.
pub fn simple_pairing_probability(degrees: &[usize]) -> f64 {
    let s1: f64 = degrees.iter().map(|&k| k as f64).sum();
    if s1 == 0.0 {
        return 1.0;
    }
    let s2: f64 = degrees.iter().map(|&k| (k * k.saturating_sub(1)) as f64).sum();
    let nu = s2 / s1;
    (-nu / 2.0 - nu * nu / 4.0).exp()
}

fn check_sequence(degrees: &[usize]) -> Result<()> {
    let n = degrees.len();
    if let Some((i, k)) = degrees.iter().enumerate().find(|(_, k)| **k >= n) {
        return Err(Error::InfeasibleSequence(format!(
            "vertex {i} has degree {k} >= N = {n}"
        )));
    }
    if degrees.iter().sum::<usize>() % 2 == 1 {
        return Err(Error::InfeasibleSequence("degree sum is odd".into()));
    }
    Ok(())
}

/// Unweighted (unit-weight) simple graph with exactly the given degrees.
pub fn configuration_model<R: Rng + ?Sized>(degrees: &[usize], rng: &mut R) -> Result<SparseSymmetric> {
    configuration_model_with(degrees, PairingOptions::default(), rng)
}

pub fn configuration_model_with<R: Rng + ?Sized>(
    degrees: &[usize],
    options: PairingOptions,
    rng: &mut R,
) -> Result<SparseSymmetric> {
    check_sequence(degrees)?;
    let n = degrees.len();
    let stubs: Vec<usize> = degrees
        .iter()
        .enumerate()
        .flat_map(|(v, &k)| std::iter::repeat_n(v, k))
        .collect();
    let pairs = match options.strategy {
        PairingStrategy::Rejection => rejection_pairing(&stubs, options.max_restarts, rng)?,
        PairingStrategy::Sequential => sequential_pairing(&stubs, options.max_restarts, rng)?,
        PairingStrategy::Auto => {
            if simple_pairing_probability(degrees) >= 1e-3 {
                match rejection_pairing(&stubs, options.max_restarts, rng) {
                    Ok(p) => p,
                    Err(Error::RestartBudgetExhausted { .. }) => {
                        sequential_pairing(&stubs, options.max_restarts, rng)?
                    }
                    Err(e) => return Err(e),
                }
            } else {
                sequential_pairing(&stubs, options.max_restarts, rng)?
            }
        }
    };
    let edges: Vec<(usize, usize, f64)> = pairs.into_iter().map(|(a, b)| (a, b, 1.0)).collect();
    let graph = SparseSymmetric::from_edges(n, &edges)?;
    debug_assert_eq!(graph.degrees(), degrees);
    Ok(graph)
}

#[inline]
fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn rejection_pairing<R: Rng + ?Sized>(
    stubs: &[usize],
    max_restarts: usize,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>> {
    let mut work = stubs.to_vec();
    let mut seen = HashSet::with_capacity(stubs.len() / 2);
    let mut pairs = Vec::with_capacity(stubs.len() / 2);
    'attempt: for _ in 0..=max_restarts {
        work.copy_from_slice(stubs);
        seen.clear();
        pairs.clear();
        let len = work.len();
        let mut i = 0;
        while i < len {
            // Incremental Fisher-Yates: positions i, i+1 receive a uniform pair.
            let a = rng.random_range(i..len);
            work.swap(i, a);
            let b = rng.random_range(i + 1..len);
            work.swap(i + 1, b);
            let (u, v) = (work[i], work[i + 1]);
            if u == v || !seen.insert(edge_key(u, v)) {
                continue 'attempt;
            }
            pairs.push((u, v));
            i += 2;
        }
        return Ok(pairs);
    }
    Err(Error::RestartBudgetExhausted {
        restarts: max_restarts,
    })
}

fn sequential_pairing<R: Rng + ?Sized>(
    stubs: &[usize],
    max_restarts: usize,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>> {
    let mut seen = HashSet::with_capacity(stubs.len() / 2);
    let mut pairs = Vec::with_capacity(stubs.len() / 2);
    'attempt: for _ in 0..=max_restarts {
        let mut open = stubs.to_vec();
        seen.clear();
        pairs.clear();
        let mut misses = 0usize;
        while !open.is_empty() {
            let len = open.len();
            let a = rng.random_range(0..len);
            let b = rng.random_range(0..len);
            let (u, v) = (open[a], open[b]);
            if a == b || u == v || seen.contains(&edge_key(u, v)) {
                misses += 1;
                if misses >= 64 + 4 * len {
                    // Possibly stuck: look for any suitable pair among the leftovers.
                    let stuck = !(0..len).any(|x| {
                        (x + 1..len).any(|y| {
                            open[x] != open[y] && !seen.contains(&edge_key(open[x], open[y]))
                        })
                    });
                    if stuck {
                        continue 'attempt;
                    }
                    misses = 0;
                }
                continue;
            }
            misses = 0;
            seen.insert(edge_key(u, v));
            pairs.push((u, v));
            let (hi, lo) = if a > b { (a, b) } else { (b, a) };
            open.swap_remove(hi);
            open.swap_remove(lo);
        }
        return Ok(pairs);
    }
    Err(Error::RestartBudgetExhausted {
        restarts: max_restarts,
    })
}

/// Give every undirected edge one i.i.d. weight, stored in both orientations.
/// Edges are visited in `(i, j)` order with `i < j`.
pub fn assign_weights<R: Rng + ?Sized>(
    graph: &SparseSymmetric,
    model: &WeightModel,
    rng: &mut R,
) -> Result<SparseSymmetric> {
    let edges: Vec<(usize, usize, f64)> = graph
        .edges()
        .map(|(i, j, _)| (i, j, model.sample(rng)))
        .collect();
    SparseSymmetric::from_edges(graph.n(), &edges)
}

// ---------------------------------------------------------------------------
// Spiked matrix
// ---------------------------------------------------------------------------

/// `A = J + (θ/N) x xᵀ` with the spike kept factored.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikedMatrix {
    noise: SparseSymmetric,
    spike: Vec<f64>,
    theta: f64,
}

/// Draw `x` i.i.d. from `spike_model` and attach it to `noise`.
pub fn assemble_spiked<R: Rng + ?Sized>(
    noise: SparseSymmetric,
    spike_model: &SpikeModel,
    theta: f64,
    rng: &mut R,
) -> Result<SpikedMatrix> {
    let spike = (0..noise.n()).map(|_| spike_model.sample(rng)).collect();
    SpikedMatrix::new(noise, spike, theta)
}

impl SpikedMatrix {
    pub fn new(noise: SparseSymmetric, spike: Vec<f64>, theta: f64) -> Result<Self> {
        if !(theta.is_finite() && theta >= 0.0) {
            return Err(invalid(format!("theta must be finite and >= 0, got {theta}")));
        }
        if spike.len() != noise.n() {
            return Err(Error::DimensionMismatch {
                expected: noise.n(),
                got: spike.len(),
            });
        }
        Ok(Self { noise, spike, theta })
    }

    pub fn n(&self) -> usize {
        self.noise.n()
    }

    pub fn noise(&self) -> &SparseSymmetric {
        &self.noise
    }

    pub fn spike(&self) -> &[f64] {
        &self.spike
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `A v`, in `O(nnz + N)`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: v.len(),
            });
        }
        let mut out = vec![0.0; self.n()];
        self.apply_into(v, &mut out);
        Ok(out)
    }

    /// Unchecked product used by the eigensolvers; lengths must equal `N`.
    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        self.noise.matvec_into(v, out);
        if self.theta != 0.0 {
            let proj: f64 = self.spike.iter().zip(v).map(|(x, v)| x * v).sum();
            let scale = self.theta * proj / self.n() as f64;
            for (o, x) in out.iter_mut().zip(&self.spike) {
                *o += scale * x;
            }
        }
    }

    /// `trace(A) = θ‖x‖²/N` (the noise diagonal is zero).
    pub fn trace(&self) -> f64 {
        self.theta * self.spike.iter().map(|x| x * x).sum::<f64>() / self.n() as f64
    }

    /// Dense copy, for the dense eigensolver and small-N oracles only.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = self.noise.to_dense();
        let n = self.n() as f64;
        for i in 0..self.n() {
            for j in 0..self.n() {
                m[(i, j)] += self.theta * self.spike[i] * self.spike[j] / n;
            }
        }
        m
    }
}
