//! Closed-form and semi-analytic predictions.
//!
//! The cavity average `m(λ) = 𝔼[1/ω]` solves
//! `m = ⟨⟨1/(λ − (k−1) 𝔼[W²] m)⟩⟩`, and `Q(λ) = ⟨1/(λ − k 𝔼[W²] m)⟩`.
//! The signal eigenvalue is the root of `θ σ_x² Q(λ) = 1` and the squared
//! overlap is `−1/(σ_x² θ² Q'(λ_θ))`.

use crate::ensembles::{DegreeModel, Ensemble};
use crate::error::{invalid, Error, Result};
use crate::popdyn::{alphas, Estimate, Population};

const M_TOL: f64 = 1e-13;
const M_MAX_ITER: usize = 100_000;
const DAMPING: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MSolution {
    pub m: f64,
    pub iterations: usize,
    /// `|F(m) − m|` at the returned value.
    pub residual: f64,
}

/// Degree tables in the form the fixed point needs.
#[derive(Debug, Clone)]
struct Tables {
    /// `(k, r_k)` with `r_k > 0`.
    r: Vec<(f64, f64)>,
    /// `(k, p_k)` with `p_k > 0`.
    p: Vec<(f64, f64)>,
    k_max: f64,
}

impl Tables {
    fn new(degree: &DegreeModel) -> Result<Self> {
        let r = degree
            .degree_corrected()?
            .iter()
            .enumerate()
            .filter(|(_, r)| **r > 0.0)
            .map(|(k, r)| (k as f64, *r))
            .collect();
        let p: Vec<(f64, f64)> = degree
            .probabilities()
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(k, p)| (k as f64, *p))
            .collect();
        let k_max = p.last().map_or(0.0, |e| e.0);
        Ok(Self { r, p, k_max })
    }

    /// `F(m)` and `∂F/∂m`, or `None` if a denominator is not positive.
    fn f(&self, lambda: f64, s: f64, m: f64) -> Option<(f64, f64)> {
        let mut f = 0.0;
        let mut fm = 0.0;
        for &(k, r) in &self.r {
            let d = lambda - (k - 1.0) * s * m;
            if !(d > 0.0) {
                return None;
            }
            f += r / d;
            fm += r * (k - 1.0) * s / (d * d);
        }
        Some((f, fm))
    }
}

fn solve_m_tables(lambda: f64, t: &Tables, s: f64) -> Result<MSolution> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("lambda must be positive, got {lambda}")));
    }
    let mut m = 1.0 / lambda;
    for it in 1..=M_MAX_ITER {
        let (f, _) = t.f(lambda, s, m).ok_or(Error::NegativeDenominator { lambda })?;
        let next = (1.0 - DAMPING) * m + DAMPING * f;
        let step = (next - m).abs();
        m = next;
        if step < M_TOL {
            // Newton polish on F(m) − m; the damped iterate is already in the
            // basin of the stable branch.
            let mut best = m;
            let (f, _) = t.f(lambda, s, m).ok_or(Error::NegativeDenominator { lambda })?;
            let mut best_res = (f - m).abs();
            for _ in 0..4 {
                let Some((f, fm)) = t.f(lambda, s, best) else { break };
                if fm >= 1.0 {
                    break;
                }
                let cand = best - (f - best) / (fm - 1.0);
                match t.f(lambda, s, cand) {
                    Some((fc, _)) if (fc - cand).abs() < best_res => {
                        best_res = (fc - cand).abs();
                        best = cand;
                    }
                    _ => break,
                }
            }
            let (_, fm) = t.f(lambda, s, best).ok_or(Error::NegativeDenominator { lambda })?;
            if fm >= 1.0 {
                // Converged onto the unstable branch or the edge itself.
                return Err(Error::NoConvergence { lambda });
            }
            return Ok(MSolution {
                m: best,
                iterations: it,
                residual: best_res,
            });
        }
    }
    Err(Error::NoConvergence { lambda })
}

/// Stable-branch solution of the `m` fixed point by damped iteration from
/// `m₀ = 1/λ`.
pub fn solve_m(lambda: f64, degree: &DegreeModel, ew2: f64) -> Result<MSolution> {
    solve_m_tables(lambda, &Tables::new(degree)?, ew2)
}

/// Explicit truncated-Poisson form
/// `Q̃ = (c/c̄) m + p_{k_max} / (λ − k_max 𝔼[W²] m)`.
pub fn q_tilde(lambda: f64, degree: &DegreeModel, ew2: f64) -> Result<f64> {
    let (c_bar, k_max) = degree
        .poisson_parameters()
        .ok_or_else(|| invalid("q_tilde needs a truncated Poisson degree model"))?;
    let m = solve_m(lambda, degree, ew2)?.m;
    let tail = lambda - k_max as f64 * ew2 * m;
    if !(tail > 0.0) {
        return Err(Error::NegativeDenominator { lambda });
    }
    Ok(degree.mean() / c_bar * m + degree.probability(k_max) / tail)
}

/// Mean-field predictions for one ensemble.
#[derive(Debug, Clone)]
pub struct MeanField {
    tables: Tables,
    ew2: f64,
    zeta: f64,
    sigma2: f64,
}

/// Values of `m`, `Q` and their λ-derivatives at one λ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QPoint {
    pub lambda: f64,
    pub m: MSolution,
    pub q: f64,
    pub dm: f64,
    pub dq: f64,
}

impl MeanField {
    pub fn new(ens: &Ensemble) -> Result<Self> {
        Ok(Self {
            tables: Tables::new(&ens.degree)?,
            ew2: ens.weight.second_moment(),
            zeta: ens.weight.zeta(),
            sigma2: ens.spike.variance(),
        })
    }

    pub fn m(&self, lambda: f64) -> Result<MSolution> {
        solve_m_tables(lambda, &self.tables, self.ew2)
    }

    /// `Q`, `m` and the implicit derivatives `m'`, `Q'`.
    pub fn point(&self, lambda: f64) -> Result<QPoint> {
        let sol = self.m(lambda)?;
        let (s, m) = (self.ew2, sol.m);
        let mut f_m = 0.0;
        let mut f_l = 0.0;
        for &(k, r) in &self.tables.r {
            let d = lambda - (k - 1.0) * s * m;
            f_m += r * (k - 1.0) * s / (d * d);
            f_l -= r / (d * d);
        }
        let dm = f_l / (1.0 - f_m);
        let mut q = 0.0;
        let mut dq = 0.0;
        for &(k, p) in &self.tables.p {
            let d = lambda - k * s * m;
            if !(d > 0.0) {
                return Err(Error::NegativeDenominator { lambda });
            }
            q += p / d;
            dq -= p * (1.0 - k * s * dm) / (d * d);
        }
        Ok(QPoint {
            lambda,
            m: sol,
            q,
            dm,
            dq,
        })
    }

    pub fn q(&self, lambda: f64) -> Result<f64> {
        self.point(lambda).map(|p| p.q)
    }

    /// Central difference of `Q` with step `1e-6·λ`.
    pub fn dq_finite(&self, lambda: f64) -> Result<f64> {
        let h = 1e-6 * lambda;
        Ok((self.q(lambda + h)? - self.q(lambda - h)?) / (2.0 * h))
    }

    pub fn gershgorin(&self) -> f64 {
        self.tables.k_max * self.zeta
    }

    /// Smallest λ (to relative precision `1e-12`) where `m` and `Q` are
    /// well defined: geometric backtracking from the Gershgorin bound, then
    /// bisection.
    pub fn admissible_edge(&self) -> Result<f64> {
        let ok = |l: f64| self.point(l).is_ok();
        let mut hi = self.gershgorin().max(f64::MIN_POSITIVE);
        let mut grow = 0;
        while !ok(hi) {
            hi *= 2.0;
            grow += 1;
            if grow > 60 {
                return Err(Error::NoConvergence { lambda: hi });
            }
        }
        let mut lo = hi;
        loop {
            lo *= 0.9;
            if lo < 1e-12 * hi {
                return Ok(0.0);
            }
            if !ok(lo) {
                break;
            }
            hi = lo;
        }
        while hi - lo > 1e-12 * hi {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// Root of `Q(λ) = 1/(θσ²)` above the admissible edge.
    pub fn lambda_signal(&self, theta: f64) -> Result<f64> {
        if !(theta > 0.0) {
            return Err(invalid("theta must be positive"));
        }
        let target = 1.0 / (theta * self.sigma2);
        let edge = self.admissible_edge()?;
        let q_edge = self.q(edge)?;
        if !(q_edge > target) {
            return Err(Error::RootNotBracketed { target, edge });
        }
        let mut lo = edge;
        let mut hi = self.gershgorin() + 2.0 * theta * self.sigma2;
        while self.q(hi)? > target {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.q(mid)? > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Squared overlap at `θ`, with the implicit `Q'` cross-checked against a
    /// central difference (relative agreement `1e-6`).
    pub fn overlap_sq(&self, theta: f64) -> Result<f64> {
        let lambda = self.lambda_signal(theta)?;
        let p = self.point(lambda)?;
        let fd = self.dq_finite(lambda)?;
        if (fd - p.dq).abs() > 1e-6 * p.dq.abs() {
            return Err(Error::DerivativeMismatch {
                implicit: p.dq,
                finite: fd,
            });
        }
        Ok(-1.0 / (self.sigma2 * theta * theta * p.dq))
    }

    /// `1/(σ² Q(λ_{θ=0}))`.
    pub fn theta_crit(&self, lambda_structural: f64) -> Result<f64> {
        Ok(1.0 / (self.sigma2 * self.q(lambda_structural)?))
    }
}

/// Population estimate `Q̂ = 𝔼[1/(λ − Σ_k W²/ω)]` with `k ~ p_k`.
pub fn q_general(pop: &Population, ens: &Ensemble, samples: usize, seed: u64) -> Result<Estimate> {
    alphas(pop, ens, samples, seed).map(|a| a.q_hat)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticReport {
    pub theta: f64,
    pub theta_crit: f64,
    /// Signal eigenvalue; the top eigenvalue when `θ > θ_crit`.
    pub lambda_theta: Option<f64>,
    /// `λ_θ` above threshold, `λ_{θ=0}` otherwise.
    pub lambda_top: f64,
    /// Zero at or below threshold.
    pub overlap_sq: f64,
    pub theta_b: Option<f64>,
    pub c_crit: Option<f64>,
    pub c_b: Option<f64>,
    pub lambda_structural: f64,
    pub bulk_edge: Option<f64>,
    /// `m` at `λ_top` from the fixed point, when it was used.
    pub m: Option<f64>,
    pub m_iterations: usize,
    pub m_residual: f64,
}

/// `c(c−2) / (σ²(c−1))`.
pub fn rr_theta_crit(c: usize, sigma2: f64) -> f64 {
    let c = c as f64;
    c * (c - 2.0) / (sigma2 * (c - 1.0))
}

/// Random-regular graph with unit weights.
pub fn rr_report(c: usize, sigma2: f64, theta: f64) -> Result<AnalyticReport> {
    if c <= 2 {
        return Err(invalid(format!("closed forms need c > 2, got {c}")));
    }
    if !(sigma2 > 0.0 && theta >= 0.0) {
        return Err(invalid("need sigma2 > 0 and theta >= 0"));
    }
    let cf = c as f64;
    let ts = theta * sigma2;
    let root = (ts * ts + 4.0).sqrt();
    let theta_crit = rr_theta_crit(c, sigma2);
    let theta_b = (cf - 2.0) / (sigma2 * (cf - 1.0).sqrt());
    let lambda_theta = (cf * root - (cf - 2.0) * ts) / 2.0;
    let above = theta > theta_crit;
    let overlap_sq = if above {
        cf * theta * sigma2 * sigma2 / (2.0 * root) - (cf - 2.0) * sigma2 / 2.0
    } else {
        0.0
    };
    Ok(AnalyticReport {
        theta,
        theta_crit,
        lambda_theta: (theta > theta_b).then_some(lambda_theta),
        lambda_top: if above { lambda_theta } else { cf },
        overlap_sq,
        theta_b: Some(theta_b),
        c_crit: Some((2.0 + ts + root) / 2.0),
        c_b: Some((ts + root).powi(2) / 4.0 + 1.0),
        lambda_structural: cf,
        bulk_edge: Some(2.0 * (cf - 1.0).sqrt()),
        m: None,
        m_iterations: 0,
        m_residual: 0.0,
    })
}

/// Generic pipeline: mean-field `Q` with a supplied structural eigenvalue.
pub fn general_report(ens: &Ensemble, theta: f64, lambda_structural: f64) -> Result<AnalyticReport> {
    let mf = MeanField::new(ens)?;
    let theta_crit = mf.theta_crit(lambda_structural)?;
    let (lambda_theta, overlap_sq) = if theta > theta_crit {
        (Some(mf.lambda_signal(theta)?), mf.overlap_sq(theta)?)
    } else {
        (None, 0.0)
    };
    let lambda_top = lambda_theta.unwrap_or(lambda_structural);
    let sol = mf.m(lambda_top)?;
    Ok(AnalyticReport {
        theta,
        theta_crit,
        lambda_theta,
        lambda_top,
        overlap_sq,
        theta_b: None,
        c_crit: None,
        c_b: None,
        lambda_structural,
        bulk_edge: None,
        m: Some(sol.m),
        m_iterations: sol.iterations,
        m_residual: sol.residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseLimit {
    pub theta_crit: f64,
    pub lambda_theta: f64,
    pub overlap_sq: f64,
}

/// Fully connected limit (weights `Z/√c`, `c → ∞`). Below threshold the top
/// eigenvalue sits at the bulk edge 2 and the overlap vanishes.
pub fn dense_limit_report(theta: f64, sigma2: f64) -> Result<DenseLimit> {
    if !(sigma2 > 0.0 && theta >= 0.0) {
        return Err(invalid("need sigma2 > 0 and theta >= 0"));
    }
    let theta_crit = 1.0 / sigma2;
    let ts = theta * sigma2;
    if theta <= theta_crit {
        return Ok(DenseLimit {
            theta_crit,
            lambda_theta: 2.0,
            overlap_sq: 0.0,
        });
    }
    Ok(DenseLimit {
        theta_crit,
        lambda_theta: ts + 1.0 / ts,
        overlap_sq: sigma2 - 1.0 / (theta * theta * sigma2),
    })
}
