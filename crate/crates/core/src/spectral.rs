//! Top eigenpairs of spiked sparse matrices.
//!
//! Thick-restart Lanczos with full reorthogonalization. Every new Krylov
//! vector is orthogonalized twice against the whole basis and against any
//! locked vectors, so the projected matrix stays symmetric to working
//! precision and the solver restricted to the complement of the locked
//! vectors behaves like the deflated operator.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graphgen::{SparseSymmetric, SpikedMatrix};

/// A symmetric operator known only through its action on vectors.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, v: &[f64], out: &mut [f64]);
}

impl LinearOperator for SpikedMatrix {
    fn dim(&self) -> usize {
        self.n()
    }
    fn apply(&self, v: &[f64], out: &mut [f64]) {
        self.apply_into(v, out)
    }
}

impl LinearOperator for SparseSymmetric {
    fn dim(&self) -> usize {
        self.n()
    }
    fn apply(&self, v: &[f64], out: &mut [f64]) {
        self.matvec_into(v, out)
    }
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    /// Relative residual target `‖Av − λv‖ / (scale·‖v‖)`.
    pub tol: f64,
    /// Budget of operator applications.
    pub max_iter: usize,
    /// Basis size before a restart.
    pub krylov_dim: usize,
    /// Ritz vectors kept across a restart.
    pub keep: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
            krylov_dim: 120,
            keep: 30,
        }
    }
}

/// Converged eigenpair; `vector` has unit Euclidean norm.
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (y, x) in y.iter_mut().zip(x) {
        *y += alpha * x;
    }
}

/// Two passes of classical Gram-Schmidt against `vs`; returns the summed
/// coefficients.
fn orthogonalize(w: &mut [f64], vs: &[Vec<f64>]) -> Vec<f64> {
    let mut coeffs = vec![0.0; vs.len()];
    for _ in 0..2 {
        for (c, v) in coeffs.iter_mut().zip(vs) {
            let p = dot(v, w);
            axpy(-p, v, w);
            *c += p;
        }
    }
    coeffs
}

/// Largest eigenvalue of `op` restricted to the orthogonal complement of the
/// orthonormal vectors in `locked`.
pub fn lanczos_largest<O, R>(
    op: &O,
    locked: &[Vec<f64>],
    options: &LanczosOptions,
    rng: &mut R,
) -> Result<Eigenpair>
where
    O: LinearOperator + ?Sized,
    R: Rng + ?Sized,
{
    let n = op.dim();
    let avail = n.saturating_sub(locked.len());
    if avail == 0 {
        return Err(Error::InvalidParameter("no directions left after locking".into()));
    }
    let m = options.krylov_dim.clamp(2, usize::MAX).min(avail);
    let keep = options.keep.clamp(1, m.saturating_sub(1).max(1));

    let random_unit = |rng: &mut R, basis: &[Vec<f64>]| -> Option<Vec<f64>> {
        for _ in 0..8 {
            let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            orthogonalize(&mut v, locked);
            orthogonalize(&mut v, basis);
            let nv = norm(&v);
            if nv > 1e-8 * (n as f64).sqrt() {
                v.iter_mut().for_each(|x| *x /= nv);
                return Some(v);
            }
        }
        None
    };

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    basis.push(random_unit(rng, &[]).expect("random start vector"));
    // Projected matrix H = Qᵀ A Q, grown column by column.
    let mut h = DMatrix::<f64>::zeros(m, m);
    let mut iterations = 0usize;
    let mut w = vec![0.0; n];
    let mut best = f64::INFINITY;
    let mut since_best = 0usize;

    loop {
        // Extend the basis to m vectors.
        let mut residual_vec: Option<Vec<f64>> = None;
        let mut beta;
        let mut j = basis.len() - 1;
        loop {
            op.apply(&basis[j], &mut w);
            iterations += 1;
            orthogonalize(&mut w, locked);
            let coeffs = orthogonalize(&mut w, &basis);
            for (i, c) in coeffs.iter().enumerate() {
                // The thick-restart block is diagonal in exact arithmetic; keep
                // the symmetric average so tiny asymmetries do not accumulate.
                if i == j {
                    h[(j, j)] = *c;
                } else if i < j {
                    let s = 0.5 * (c + h[(j, i)]);
                    h[(i, j)] = s;
                    h[(j, i)] = s;
                }
            }
            beta = norm(&w);
            let scale = h.view((0, 0), (j + 1, j + 1)).amax().max(f64::MIN_POSITIVE);
            let broke_down = beta <= 1e-12 * scale;
            if j + 1 == m || broke_down || iterations >= options.max_iter {
                if broke_down {
                    beta = 0.0;
                    if j + 1 < m && iterations < options.max_iter {
                        // Invariant subspace: continue with a fresh direction so
                        // components absent from the start vector are still found.
                        if let Some(v) = random_unit(rng, &basis) {
                            basis.push(v);
                            j += 1;
                            continue;
                        }
                    }
                } else {
                    w.iter_mut().for_each(|x| *x /= beta);
                    residual_vec = Some(w.clone());
                }
                break;
            }
            w.iter_mut().for_each(|x| *x /= beta);
            h[(j, j + 1)] = beta;
            h[(j + 1, j)] = beta;
            basis.push(w.clone());
            j += 1;
        }

        let k = basis.len();
        let eig = SymmetricEigen::new(h.view((0, 0), (k, k)).into_owned());
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let top = order[0];
        let theta = eig.eigenvalues[top];
        let scale = eig.eigenvalues.amax().max(theta.abs());
        let estimate = (beta * eig.eigenvectors[(k - 1, top)]).abs();

        if estimate <= options.tol * scale || beta == 0.0 || iterations >= options.max_iter {
            let y = ritz_vector(&basis, eig.eigenvectors.column(top).as_slice());
            let (value, residual) = rayleigh_residual(op, locked, &y, &mut w);
            iterations += 1;
            let rel = if scale > 0.0 { residual / scale } else { residual };
            if rel <= options.tol {
                return Ok(Eigenpair {
                    value,
                    vector: y,
                    residual: rel,
                    iterations,
                });
            }
            if iterations >= options.max_iter {
                return Err(Error::NotConverged {
                    iterations,
                    residual: rel,
                });
            }
        }

        let rel_est = if scale > 0.0 { estimate / scale } else { estimate };
        if rel_est < 0.99 * best {
            best = rel_est;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= 25 {
                return Err(Error::Stagnated {
                    iterations,
                    residual: rel_est,
                });
            }
        }

        // Thick restart: keep the top Ritz vectors and the residual direction.
        let kept = keep.min(k);
        let mut new_basis = Vec::with_capacity(m + 1);
        h.fill(0.0);
        for (slot, &idx) in order.iter().take(kept).enumerate() {
            new_basis.push(ritz_vector(&basis, eig.eigenvectors.column(idx).as_slice()));
            h[(slot, slot)] = eig.eigenvalues[idx];
        }
        match residual_vec {
            Some(r) => {
                for (slot, &idx) in order.iter().take(kept).enumerate() {
                    let c = beta * eig.eigenvectors[(k - 1, idx)];
                    h[(slot, kept)] = c;
                    h[(kept, slot)] = c;
                }
                new_basis.push(r);
            }
            None => {
                let v = random_unit(rng, &new_basis).expect("fresh direction");
                new_basis.push(v);
            }
        }
        basis = new_basis;
    }
}

fn ritz_vector(basis: &[Vec<f64>], coeffs: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; basis[0].len()];
    for (c, q) in coeffs.iter().zip(basis) {
        axpy(*c, q, &mut y);
    }
    let ny = norm(&y);
    y.iter_mut().for_each(|x| *x /= ny);
    y
}

/// Rayleigh quotient of unit `y` and `‖P A y − ρ y‖` with `P` the projector
/// onto the complement of `locked`.
fn rayleigh_residual<O: LinearOperator + ?Sized>(
    op: &O,
    locked: &[Vec<f64>],
    y: &[f64],
    w: &mut [f64],
) -> (f64, f64) {
    op.apply(y, w);
    orthogonalize(w, locked);
    let rho = dot(y, w);
    axpy(-rho, y, w);
    (rho, norm(w))
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct EigReport {
    pub lambda_top: f64,
    pub lambda_second: f64,
    /// Top eigenvector scaled to `‖v‖² = N`, sign chosen so `⟨x, v⟩ ≥ 0`.
    pub v_top: Vec<f64>,
    /// `⟨x, v_top⟩ / N ≥ 0`.
    pub overlap: f64,
    pub overlap_sq: f64,
    /// `⟨x, v⟩ / N` with the sign of `v` fixed without looking at `x`
    /// (`Σv ≥ 0`, ties broken by the first nonzero entry).
    pub blind_overlap: f64,
    pub residual_top: f64,
    pub residual_second: f64,
    pub iterations: usize,
    /// `λ_top − λ_second ≤ 1e-6·|λ_top|`.
    pub near_degenerate: bool,
}

/// Top eigenpair, eigenvector scaled to `‖v‖² = N`.
pub fn top_eigenpair<O, R>(op: &O, options: &LanczosOptions, rng: &mut R) -> Result<Eigenpair>
where
    O: LinearOperator + ?Sized,
    R: Rng + ?Sized,
{
    if op.dim() < 2 {
        return Err(Error::InvalidParameter("eigensolver needs N >= 2".into()));
    }
    let mut pair = lanczos_largest(op, &[], options, rng)?;
    let s = (op.dim() as f64).sqrt();
    pair.vector.iter_mut().for_each(|x| *x *= s);
    Ok(pair)
}

/// Largest eigenvalue on the complement of `v_top` (any normalisation).
pub fn second_eigenvalue<O, R>(op: &O, v_top: &[f64], options: &LanczosOptions, rng: &mut R) -> Result<Eigenpair>
where
    O: LinearOperator + ?Sized,
    R: Rng + ?Sized,
{
    if v_top.len() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            got: v_top.len(),
        });
    }
    let nv = norm(v_top);
    let unit: Vec<f64> = v_top.iter().map(|x| x / nv).collect();
    lanczos_largest(op, &[unit], options, rng)
}

fn blind_sign(v: &[f64]) -> f64 {
    let s: f64 = v.iter().sum();
    let tie = 1e-12 * v.iter().map(|x| x.abs()).sum::<f64>();
    if s > tie {
        1.0
    } else if s < -tie {
        -1.0
    } else {
        v.iter().find(|x| **x != 0.0).map_or(1.0, |x| x.signum())
    }
}

/// Top and second eigenvalues of `a` plus the recovery observables.
pub fn analyze<R: Rng + ?Sized>(a: &SpikedMatrix, options: &LanczosOptions, rng: &mut R) -> Result<EigReport> {
    let top = top_eigenpair(a, options, rng)?;
    let second = second_eigenvalue(a, &top.vector, options, rng)?;
    let n = a.n() as f64;
    let mut v = top.vector;
    let proj = dot(a.spike(), &v) / n;
    let blind_overlap = proj * blind_sign(&v);
    if proj < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let overlap = proj.abs();
    Ok(EigReport {
        lambda_top: top.value,
        lambda_second: second.value,
        v_top: v,
        overlap,
        overlap_sq: overlap * overlap,
        blind_overlap,
        residual_top: top.residual,
        residual_second: second.residual,
        iterations: top.iterations + second.iterations,
        near_degenerate: top.value - second.value <= 1e-6 * top.value.abs(),
    })
}

/// Per-instance samples for comparison with cavity densities.
#[derive(Debug, Clone)]
pub struct EmpiricalObservables {
    pub overlap: f64,
    pub overlap_sq: f64,
    /// Entries `v_i` of the gauge-fixed top eigenvector.
    pub components: Vec<f64>,
    /// Products `x_i v_i`.
    pub overlap_components: Vec<f64>,
}

pub fn empirical_observables(a: &SpikedMatrix, report: &EigReport) -> EmpiricalObservables {
    let mut v = report.v_top.clone();
    if dot(a.spike(), &v) < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let overlap_components: Vec<f64> = a.spike().iter().zip(&v).map(|(x, v)| x * v).collect();
    let overlap = overlap_components.iter().sum::<f64>() / a.n() as f64;
    EmpiricalObservables {
        overlap,
        overlap_sq: overlap * overlap,
        components: v,
        overlap_components,
    }
}

// ---------------------------------------------------------------------------
// Dense path
// ---------------------------------------------------------------------------

pub const DEFAULT_DENSE_CAP: usize = 3000;

/// Ascending eigenvalues and matching eigenvector columns of a dense
/// symmetric matrix.
pub fn dense_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

/// All eigenvalues of `a`, ascending, via a dense decomposition.
pub fn full_spectrum(a: &SpikedMatrix, cap: usize) -> Result<Vec<f64>> {
    if a.n() > cap {
        return Err(Error::CapExceeded { n: a.n(), cap });
    }
    Ok(dense_eigen(a.to_dense()).0)
}
