//! Population dynamics for the joint law `π(ω, h)` of cavity precisions and
//! bias fields.
//!
//! A population of `N_p` pairs is updated by random replacement:
//!
//! ```text
//! ω_new = λ − Σ_{ℓ<k} W_ℓ² / ω_ℓ
//! h_new = Σ_{ℓ<k} h_ℓ W_ℓ / ω_ℓ + θ q X
//! ```
//!
//! with `k ~ r_k`. The parameters `q` and `λ` are then rescaled until the two
//! normalisation conditions `α₁ = α₂ = 1` hold.
//!
//! Structural draws (degrees, members, weights, replacement slots) and spike
//! draws come from separate streams, so the ω-dynamics does not depend on the
//! spike at all.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::Ensemble;
use crate::error::{invalid, Error, Result};
use crate::seeding::{stream, Stream};
use crate::stats::Moments;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopDynConfig {
    pub population_size: usize,
    pub omega_init: (f64, f64),
    pub h_init: (f64, f64),
    pub q_init: f64,
    pub lambda_init: f64,
    /// Sweeps per plateau window; one sweep is `N_p` replacements.
    pub plateau_window: usize,
    pub plateau_tol: f64,
    pub max_sweeps: usize,
    pub alpha_tol: f64,
    pub max_rescales: usize,
    pub alpha_samples: usize,
    /// Factor applied to λ when the update leaves the admissible region.
    pub lambda_raise: f64,
    pub max_lambda_raises: usize,
    /// Rescale the h-population together with q (off by default).
    pub rescale_h: bool,
    /// Sweeps per trial λ in the structural-eigenvalue search.
    pub structural_sweeps: usize,
}

impl Default for PopDynConfig {
    fn default() -> Self {
        Self {
            population_size: 200_000,
            omega_init: (5.0, 20.0),
            h_init: (0.0, 10.0),
            q_init: 0.5,
            lambda_init: 10.0,
            plateau_window: 20,
            plateau_tol: 1e-3,
            max_sweeps: 2000,
            alpha_tol: 1e-2,
            max_rescales: 50,
            alpha_samples: 1_000_000,
            lambda_raise: 1.5,
            max_lambda_raises: 40,
            rescale_h: false,
            structural_sweeps: 100,
        }
    }
}

impl PopDynConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("plateau_tol", self.plateau_tol),
            ("alpha_tol", self.alpha_tol),
            ("q_init", self.q_init),
            ("lambda_init", self.lambda_init),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        let counts = [
            ("population_size", self.population_size),
            ("plateau_window", self.plateau_window),
            ("max_sweeps", self.max_sweeps),
            ("max_rescales", self.max_rescales),
            ("alpha_samples", self.alpha_samples),
            ("structural_sweeps", self.structural_sweeps),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(invalid(format!("{name} must be positive")));
            }
        }
        if self.population_size < 2 {
            return Err(invalid("population_size must be at least 2"));
        }
        let (lo, hi) = self.omega_init;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(invalid("omega_init must be a positive range"));
        }
        let (lo, hi) = self.h_init;
        if !(lo.is_finite() && hi.is_finite() && hi >= lo) {
            return Err(invalid("h_init must be a finite range"));
        }
        if !(self.lambda_raise > 1.0) {
            return Err(invalid("lambda_raise must exceed 1"));
        }
        Ok(())
    }
}

/// Structural and spike streams of one population.
#[derive(Debug, Clone)]
pub struct PopRng {
    pub structure: Stream,
    pub spike: Stream,
}

impl PopRng {
    pub fn new(master: u64, index: u64) -> Self {
        Self {
            structure: stream(master, index, "popdyn/structure"),
            spike: stream(master, index, "popdyn/spike"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub omega: Vec<f64>,
    pub h: Vec<f64>,
    pub q: f64,
    pub lambda: f64,
    pub theta: f64,
    pub sweep_count: usize,
}

impl Population {
    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// Mean and variance of ω and of h.
    pub fn moments(&self) -> [f64; 4] {
        let (mw, vw) = mean_var(&self.omega);
        let (mh, vh) = mean_var(&self.h);
        [mw, vw, mh, vh]
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// Central fourth moment, for the standard error of a variance.
fn central_m4(xs: &[f64], mean: f64) -> f64 {
    xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / xs.len() as f64
}

pub fn init_population(theta: f64, config: &PopDynConfig, rng: &mut PopRng) -> Result<Population> {
    config.validate()?;
    if !(theta.is_finite() && theta >= 0.0) {
        return Err(invalid(format!("theta must be finite and >= 0, got {theta}")));
    }
    let n = config.population_size;
    let (wlo, whi) = config.omega_init;
    let (hlo, hhi) = config.h_init;
    let mut omega = Vec::with_capacity(n);
    let mut h = Vec::with_capacity(n);
    for _ in 0..n {
        omega.push(uniform(&mut rng.structure, wlo, whi));
        h.push(uniform(&mut rng.structure, hlo, hhi));
    }
    Ok(Population {
        omega,
        h,
        q: config.q_init,
        lambda: config.lambda_init,
        theta,
        sweep_count: 0,
    })
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// One replacement. On a non-positive ω the population is left untouched.
pub fn update_step(pop: &mut Population, ens: &Ensemble, rng: &mut PopRng) -> Result<()> {
    let n = pop.len();
    let k = ens.degree.sample_size_biased(&mut rng.structure);
    let mut sum_w2 = 0.0;
    let mut sum_h = 0.0;
    for _ in 1..k {
        let m = rng.structure.random_range(0..n);
        let w = ens.weight.sample(&mut rng.structure);
        let inv = 1.0 / pop.omega[m];
        sum_w2 += w * w * inv;
        sum_h += pop.h[m] * w * inv;
    }
    let x = ens.spike.sample(&mut rng.spike);
    let target = rng.structure.random_range(0..n);
    let omega = pop.lambda - sum_w2;
    if !(omega > 0.0) {
        return Err(Error::NonPositiveOmega {
            omega,
            lambda: pop.lambda,
        });
    }
    pop.omega[target] = omega;
    pop.h[target] = if pop.theta != 0.0 {
        sum_h + pop.theta * pop.q * x
    } else {
        sum_h
    };
    Ok(())
}

fn check_ensemble(ens: &Ensemble) -> Result<()> {
    ens.degree.degree_corrected().map(|_| ())
}

/// `N_p` replacements.
pub fn sweep(pop: &mut Population, ens: &Ensemble, rng: &mut PopRng) -> Result<()> {
    check_ensemble(ens)?;
    for _ in 0..pop.len() {
        update_step(pop, ens, rng)?;
    }
    pop.sweep_count += 1;
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Equilibration {
    pub sweeps: usize,
    /// Per-sweep `[mean ω, var ω, mean h, var h]`.
    pub traces: Vec<[f64; 4]>,
}

/// Per-moment noise floor and reference scale, from the current population.
fn plateau_scales(pop: &Population) -> ([f64; 4], [f64; 4]) {
    let n = pop.len() as f64;
    let [mw, vw, mh, vh] = pop.moments();
    let m4w = central_m4(&pop.omega, mw);
    let m4h = central_m4(&pop.h, mh);
    let se = [
        (vw / n).sqrt(),
        ((m4w - vw * vw).max(0.0) / n).sqrt(),
        (vh / n).sqrt(),
        ((m4h - vh * vh).max(0.0) / n).sqrt(),
    ];
    let scale = [
        mw.abs(),
        vw.max(1e-12 * mw * mw),
        vh.sqrt().max(mh.abs()),
        vh.max(1e-12 * mh * mh),
    ];
    (se, scale)
}

/// Run sweeps until the window averages of the four moments stop drifting.
///
/// The last two windows of `plateau_window` sweeps are compared; a moment has
/// settled when the change is below `plateau_tol` times its scale plus three
/// Monte Carlo standard errors of the population estimate.
pub fn equilibrate(
    pop: &mut Population,
    ens: &Ensemble,
    config: &PopDynConfig,
    rng: &mut PopRng,
) -> Result<Equilibration> {
    let w = config.plateau_window;
    let mut out = Equilibration::default();
    let h_ref = pop
        .h
        .iter()
        .map(|x| x.abs())
        .sum::<f64>()
        .max(pop.len() as f64 * (pop.theta * pop.q.abs() * ens.spike.variance().sqrt()).max(1.0))
        / pop.len() as f64;
    for _ in 0..config.max_sweeps {
        sweep(pop, ens, rng)?;
        out.sweeps += 1;
        let m = pop.moments();
        if m.iter().any(|x| !x.is_finite()) || m[2].abs() + m[3].sqrt() > 1e8 * h_ref {
            return Err(Error::FieldsDiverged { lambda: pop.lambda });
        }
        out.traces.push(m);
        if out.traces.len() >= 2 * w {
            let t = &out.traces[out.traces.len() - 2 * w..];
            let (se, scale) = plateau_scales(pop);
            let settled = (0..4).all(|i| {
                let prev = t[..w].iter().map(|r| r[i]).sum::<f64>() / w as f64;
                let last = t[w..].iter().map(|r| r[i]).sum::<f64>() / w as f64;
                (last - prev).abs() <= config.plateau_tol * scale[i] + 3.0 * se[i]
            });
            if settled {
                return Ok(out);
            }
        }
    }
    Err(Error::MaxSweepsExceeded {
        sweeps: config.max_sweeps,
    })
}

// ---------------------------------------------------------------------------
// Cavity estimators
// ---------------------------------------------------------------------------

/// One draw of the single-site cavity quantities with `k ~ p_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityDraw {
    pub k: usize,
    /// `Σ_{ℓ≤k} h_ℓ W_ℓ / ω_ℓ`.
    pub field: f64,
    /// `λ − Σ_{ℓ≤k} W_ℓ² / ω_ℓ`.
    pub denominator: f64,
    pub x: f64,
}

impl CavityDraw {
    /// Top-eigenvector component `u = (field + θ q X) / denominator`.
    pub fn component(&self, theta: f64, q: f64) -> f64 {
        (self.field + theta * q * self.x) / self.denominator
    }

    /// Overlap component `X·u`.
    pub fn overlap_component(&self, theta: f64, q: f64) -> f64 {
        self.x * self.component(theta, q)
    }
}

pub fn cavity_draw<R: Rng + ?Sized>(pop: &Population, ens: &Ensemble, rng: &mut R) -> Result<CavityDraw> {
    let n = pop.len();
    let k = ens.degree.sample(rng);
    let mut sum_w2 = 0.0;
    let mut field = 0.0;
    for _ in 0..k {
        let m = rng.random_range(0..n);
        let w = ens.weight.sample(rng);
        let inv = 1.0 / pop.omega[m];
        sum_w2 += w * w * inv;
        field += pop.h[m] * w * inv;
    }
    let x = ens.spike.sample(rng);
    let denominator = pop.lambda - sum_w2;
    if !(denominator > 0.0) {
        return Err(Error::NonPositiveDenominator { value: denominator });
    }
    Ok(CavityDraw {
        k,
        field,
        denominator,
        x,
    })
}

const CHUNK: usize = 1 << 15;

/// `samples` cavity draws, generated in fixed-size chunks with one stream per
/// chunk so the result is independent of the number of worker threads.
pub fn cavity_draws(pop: &Population, ens: &Ensemble, samples: usize, seed: u64) -> Result<Vec<CavityDraw>> {
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<Result<Vec<CavityDraw>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, c as u64, "popdyn/cavity");
            let len = CHUNK.min(samples - c * CHUNK);
            (0..len).map(|_| cavity_draw(pop, ens, &mut rng)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(samples);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    fn from_moments(m: &Moments, factor: f64) -> Self {
        Self {
            value: factor * m.mean(),
            se: factor.abs() * m.se(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alphas {
    /// `𝔼[u²]`.
    pub alpha1: Estimate,
    /// `θ σ_x² Q̂`.
    pub alpha2: Estimate,
    /// `Q̂ = 𝔼[1 / denominator]`.
    pub q_hat: Estimate,
}

/// Both normalisation estimators from one shared set of draws.
pub fn alphas(pop: &Population, ens: &Ensemble, samples: usize, seed: u64) -> Result<Alphas> {
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<Result<(Moments, Moments)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, c as u64, "popdyn/cavity");
            let len = CHUNK.min(samples - c * CHUNK);
            let (mut u2, mut inv) = (Moments::default(), Moments::default());
            for _ in 0..len {
                let d = cavity_draw(pop, ens, &mut rng)?;
                u2.push(d.component(pop.theta, pop.q).powi(2));
                inv.push(1.0 / d.denominator);
            }
            Ok((u2, inv))
        })
        .collect();
    let (mut u2, mut inv) = (Moments::default(), Moments::default());
    for p in parts {
        let (a, b) = p?;
        u2.merge(&a);
        inv.merge(&b);
    }
    let factor = pop.theta * ens.spike.variance();
    Ok(Alphas {
        alpha1: Estimate::from_moments(&u2, 1.0),
        alpha2: Estimate::from_moments(&inv, factor),
        q_hat: Estimate::from_moments(&inv, 1.0),
    })
}

pub fn alpha1(pop: &Population, ens: &Ensemble, samples: usize, seed: u64) -> Result<Estimate> {
    alphas(pop, ens, samples, seed).map(|a| a.alpha1)
}

pub fn alpha2(pop: &Population, ens: &Ensemble, samples: usize, seed: u64) -> Result<Estimate> {
    if pop.q == 0.0 {
        return Err(invalid("alpha2 requires q != 0"));
    }
    alphas(pop, ens, samples, seed).map(|a| a.alpha2)
}

// ---------------------------------------------------------------------------
// Rescaling loop
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaleStep {
    pub q: f64,
    pub lambda: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub sweeps: usize,
    pub lambda_raises: usize,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub population: Population,
    pub q: f64,
    pub lambda: f64,
    pub alphas: Alphas,
    pub trajectory: Vec<RescaleStep>,
}

/// Equilibrate, raising λ whenever the dynamics leaves the admissible region.
fn equilibrate_admissible(
    pop: &mut Population,
    ens: &Ensemble,
    config: &PopDynConfig,
    rng: &mut PopRng,
) -> Result<(Equilibration, usize)> {
    let mut raises = 0;
    loop {
        match equilibrate(pop, ens, config, rng) {
            Ok(eq) => return Ok((eq, raises)),
            Err(e @ (Error::NonPositiveOmega { .. } | Error::FieldsDiverged { .. })) => {
                if raises >= config.max_lambda_raises {
                    return Err(e);
                }
                raises += 1;
                pop.lambda *= config.lambda_raise;
                if matches!(e, Error::FieldsDiverged { .. }) || pop.h.iter().any(|x| !x.is_finite()) {
                    let scale = pop.h.iter().map(|x| x.abs()).fold(0.0, f64::max);
                    if scale.is_finite() && scale > 0.0 {
                        pop.h.iter_mut().for_each(|x| *x /= scale);
                    } else {
                        pop.h.iter_mut().for_each(|x| *x = 0.0);
                    }
                }
            }
            Err(e) => return Err(e),
        }
    }
}

/// Solve for `(q, λ_θ)` at signal strength `theta`. `warm` replaces the
/// configured initial `(λ, q)`.
pub fn solve(
    theta: f64,
    ens: &Ensemble,
    config: &PopDynConfig,
    seed: u64,
    warm: Option<(f64, f64)>,
) -> Result<Solution> {
    if !(theta > 0.0) {
        return Err(invalid("the rescaling loop needs theta > 0"));
    }
    check_ensemble(ens)?;
    let mut rng = PopRng::new(seed, 0);
    let mut pop = init_population(theta, config, &mut rng)?;
    if let Some((lambda, q)) = warm {
        if !(lambda > 0.0 && q > 0.0) {
            return Err(invalid("warm start needs positive lambda and q"));
        }
        pop.lambda = lambda;
        pop.q = q;
    }
    let mut trajectory = Vec::new();
    let mut last = None;
    for r in 0..config.max_rescales {
        let (eq, raises) = equilibrate_admissible(&mut pop, ens, config, &mut rng)?;
        let a = alphas(&pop, ens, config.alpha_samples, crate::seeding::derive_seed(seed, r as u64, "popdyn/alphas"))?;
        trajectory.push(RescaleStep {
            q: pop.q,
            lambda: pop.lambda,
            alpha1: a.alpha1.value,
            alpha2: a.alpha2.value,
            sweeps: eq.sweeps,
            lambda_raises: raises,
        });
        last = Some(a);
        if (a.alpha1.value - 1.0).abs() <= config.alpha_tol && (a.alpha2.value - 1.0).abs() <= config.alpha_tol {
            let (q, lambda) = (pop.q, pop.lambda);
            return Ok(Solution {
                population: pop,
                q,
                lambda,
                alphas: a,
                trajectory,
            });
        }
        let factor = 1.0 / a.alpha1.value.sqrt();
        pop.q *= factor;
        if config.rescale_h {
            pop.h.iter_mut().for_each(|x| *x *= factor);
        }
        pop.lambda *= a.alpha2.value;
    }
    let a = last.expect("at least one rescale");
    Err(Error::MaxRescalesExceeded {
        rescales: config.max_rescales,
        alpha1: a.alpha1.value,
        alpha2: a.alpha2.value,
    })
}

// ---------------------------------------------------------------------------
// Structural eigenvalue
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Structural {
    pub lambda: f64,
    /// Final bisection bracket.
    pub bracket: (f64, f64),
    pub trials: usize,
}

/// Mean growth factor of the bias fields per generation at fixed λ, with
/// θ = 0: `⟨⟨k−1⟩⟩ 𝔼[W] 𝔼[h/ω] / 𝔼[h]`. `None` when λ is inadmissible.
pub fn field_growth(lambda: f64, ens: &Ensemble, config: &PopDynConfig, seed: u64) -> Result<Option<f64>> {
    let mut rng = PopRng::new(seed, 0);
    let mut pop = init_population(0.0, config, &mut rng)?;
    pop.lambda = lambda;
    let branching = ens.degree.size_biased_mean(|k| k.saturating_sub(1) as f64)? * ens.weight.mean();
    for _ in 0..config.structural_sweeps {
        match sweep(&mut pop, ens, &mut rng) {
            Ok(()) => {}
            Err(Error::NonPositiveOmega { .. }) => return Ok(None),
            Err(e) => return Err(e),
        }
        let mean_h = pop.h.iter().sum::<f64>() / pop.len() as f64;
        if !(mean_h.is_finite() && mean_h.abs() > 0.0) {
            return Ok(None);
        }
        pop.h.iter_mut().for_each(|x| *x /= mean_h);
    }
    let ratio = pop.h.iter().zip(&pop.omega).map(|(h, w)| h / w).sum::<f64>() / pop.len() as f64;
    Ok(Some(branching * ratio))
}

/// Top eigenvalue of the unspiked ensemble: the smallest λ at which the
/// θ = 0 fields stop growing. Requires `𝔼[W] ≠ 0`.
pub fn structural_eigenvalue(ens: &Ensemble, config: &PopDynConfig, seed: u64, tol: f64) -> Result<Structural> {
    check_ensemble(ens)?;
    if ens.weight.mean() == 0.0 {
        return Err(invalid("structural eigenvalue search needs E[W] != 0"));
    }
    let mut hi = ens.degree.k_max() as f64 * ens.weight.zeta() * (1.0 + 1e-9) + f64::EPSILON;
    let mut trials = 0;
    // The Gershgorin bound is an upper bound; make sure the fields decay there.
    loop {
        trials += 1;
        match field_growth(hi, ens, config, seed)? {
            Some(mu) if mu <= 1.0 => break,
            _ => hi *= 1.5,
        }
        if trials > 60 {
            return Err(Error::NoConvergence { lambda: hi });
        }
    }
    let mut lo = 0.0;
    while hi - lo > tol * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        trials += 1;
        match field_growth(mid, ens, config, seed)? {
            Some(mu) if mu <= 1.0 => hi = mid,
            _ => lo = mid,
        }
    }
    Ok(Structural {
        lambda: hi,
        bracket: (lo, hi),
        trials,
    })
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

/// Text checkpoint: a key/value header followed by one `ω h` pair per line.
pub fn write_checkpoint(pop: &Population, seed: u64, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "q {:?}", pop.q)?;
    writeln!(out, "lambda {:?}", pop.lambda)?;
    writeln!(out, "theta {:?}", pop.theta)?;
    writeln!(out, "seed {seed}")?;
    writeln!(out, "sweeps {}", pop.sweep_count)?;
    writeln!(out, "size {}", pop.len())?;
    for (w, h) in pop.omega.iter().zip(&pop.h) {
        writeln!(out, "{w:?} {h:?}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<(Population, u64)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let mut header = |key: &str| -> Result<String> {
        let (i, l) = lines.next().ok_or(Error::Parse {
            line: 0,
            message: format!("missing '{key}'"),
        })?;
        match l.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.trim().to_string()),
            _ => Err(Error::Parse {
                line: i + 1,
                message: format!("expected '{key}'"),
            }),
        }
    };
    fn num<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
        s.parse().map_err(|_| Error::Parse {
            line,
            message: format!("bad number '{s}'"),
        })
    }
    let q = num(&header("q")?, 1)?;
    let lambda = num(&header("lambda")?, 2)?;
    let theta = num(&header("theta")?, 3)?;
    let seed = num(&header("seed")?, 4)?;
    let sweep_count = num(&header("sweeps")?, 5)?;
    let size: usize = num(&header("size")?, 6)?;
    let mut omega = Vec::with_capacity(size);
    let mut h = Vec::with_capacity(size);
    for (i, l) in lines {
        if l.trim().is_empty() {
            continue;
        }
        let mut toks = l.split_whitespace();
        let (Some(a), Some(b)) = (toks.next(), toks.next()) else {
            return Err(Error::Parse {
                line: i + 1,
                message: "expected 'omega h'".into(),
            });
        };
        let w: f64 = num(a, i + 1)?;
        if !(w > 0.0) {
            return Err(Error::Parse {
                line: i + 1,
                message: "omega must be positive".into(),
            });
        }
        omega.push(w);
        h.push(num(b, i + 1)?);
    }
    if omega.len() != size {
        return Err(Error::DimensionMismatch {
            expected: size,
            got: omega.len(),
        });
    }
    Ok((
        Population {
            omega,
            h,
            q,
            lambda,
            theta,
            sweep_count,
        },
        seed,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{regular, table, SpikeModel, WeightModel};

    fn small_config(np: usize) -> PopDynConfig {
        PopDynConfig {
            population_size: np,
            ..Default::default()
        }
    }

    #[test]
    fn initial_population_ranges() {
        let mut rng = PopRng::new(0, 0);
        let pop = init_population(1.0, &small_config(10), &mut rng).unwrap();
        assert_eq!(pop.len(), 10);
        assert!(pop.omega.iter().all(|w| (5.0..=20.0).contains(w)));
        assert!(pop.h.iter().all(|h| (0.0..=10.0).contains(h)));
        assert_eq!((pop.q, pop.lambda), (0.5, 10.0));
        let again = init_population(1.0, &small_config(10), &mut PopRng::new(0, 0)).unwrap();
        assert_eq!(pop, again);
    }

    #[test]
    fn regular_update_at_the_fixed_point() {
        let ens = Ensemble::regular_unit(4, 1.0).unwrap();
        let mut rng = PopRng::new(1, 0);
        let mut pop = init_population(0.0, &small_config(50), &mut rng).unwrap();
        pop.omega.iter_mut().for_each(|w| *w = 3.0);
        pop.lambda = 4.0;
        let before = pop.clone();
        update_step(&mut pop, &ens, &mut rng).unwrap();
        let changed: Vec<usize> = (0..50).filter(|&i| pop.h[i] != before.h[i]).collect();
        assert!(changed.len() <= 1);
        assert!(pop.omega.iter().all(|w| (w - 3.0).abs() < 1e-15));
    }

    #[test]
    fn degree_one_gives_lambda_exactly() {
        let ens = Ensemble::new(table(vec![0.0, 1.0]).unwrap(), WeightModel::constant(1.0).unwrap(), SpikeModel::gaussian(1.0).unwrap());
        let mut rng = PopRng::new(2, 0);
        let mut pop = init_population(2.0, &small_config(20), &mut rng).unwrap();
        pop.lambda = 7.25;
        pop.q = 0.5;
        for _ in 0..200 {
            update_step(&mut pop, &ens, &mut rng).unwrap();
        }
        // Every slot has been replaced with overwhelming probability.
        assert!(pop.omega.iter().all(|w| *w == 7.25));
        // h = θ q X with X standard Gaussian.
        assert!(pop.h.iter().all(|h| h.abs() < 10.0));
    }

    #[test]
    fn omega_dynamics_ignores_the_spike() {
        let ens = Ensemble::poisson_unit(3.0, 12, 1.0).unwrap();
        let cfg = small_config(500);
        let mut a = init_population(0.0, &cfg, &mut PopRng::new(3, 0)).unwrap();
        let mut b = init_population(5.0, &cfg, &mut PopRng::new(3, 0)).unwrap();
        a.lambda = 8.0;
        b.lambda = 8.0;
        let (mut ra, mut rb) = (PopRng::new(3, 1), PopRng::new(3, 1));
        for _ in 0..5 {
            sweep(&mut a, &ens, &mut ra).unwrap();
            sweep(&mut b, &ens, &mut rb).unwrap();
        }
        assert_eq!(a.omega, b.omega);
        assert_ne!(a.h, b.h);
    }

    #[test]
    fn low_lambda_is_rejected_without_storing() {
        let ens = Ensemble::regular_unit(4, 1.0).unwrap();
        let mut rng = PopRng::new(4, 0);
        let mut pop = init_population(0.0, &small_config(100), &mut rng).unwrap();
        pop.omega.iter_mut().for_each(|w| *w = 0.5);
        pop.lambda = 1.0;
        let before = pop.clone();
        assert!(matches!(update_step(&mut pop, &ens, &mut rng), Err(Error::NonPositiveOmega { .. })));
        assert_eq!(pop, before);
    }

    #[test]
    fn regular_population_collapses() {
        let ens = Ensemble::regular_unit(4, 1.0).unwrap();
        let cfg = small_config(2000);
        let mut rng = PopRng::new(5, 0);
        let mut pop = init_population(0.0, &cfg, &mut rng).unwrap();
        pop.lambda = 4.0;
        equilibrate(&mut pop, &ens, &cfg, &mut rng).unwrap();
        let (m, v) = mean_var(&pop.omega);
        assert!((m - 3.0).abs() < 1e-9, "{m}");
        assert!(v < 1e-18);
    }

    #[test]
    fn alpha2_is_linear_in_theta_and_vanishes_at_large_lambda() {
        let ens = Ensemble::poisson_unit(3.0, 12, 1.0).unwrap();
        let cfg = small_config(1000);
        let mut rng = PopRng::new(6, 0);
        let mut pop = init_population(2.0, &cfg, &mut rng).unwrap();
        pop.lambda = 6.0;
        for _ in 0..30 {
            sweep(&mut pop, &ens, &mut rng).unwrap();
        }
        let a = alpha2(&pop, &ens, 50_000, 9).unwrap().value;
        let mut doubled = pop.clone();
        doubled.theta = 4.0;
        let b = alpha2(&doubled, &ens, 50_000, 9).unwrap().value;
        assert!((b - 2.0 * a).abs() < 1e-12 * b);
        let mut far = pop.clone();
        far.lambda = 1e9;
        assert!(alpha2(&far, &ens, 10_000, 9).unwrap().value < 1e-8);
    }

    #[test]
    fn estimators_do_not_depend_on_thread_count() {
        let ens = Ensemble::poisson_unit(3.0, 12, 1.0).unwrap();
        let cfg = small_config(500);
        let mut rng = PopRng::new(7, 0);
        let mut pop = init_population(2.0, &cfg, &mut rng).unwrap();
        pop.lambda = 6.0;
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let a = one.install(|| alphas(&pop, &ens, 100_000, 1).unwrap());
        let b = alphas(&pop, &ens, 100_000, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn regular_structural_eigenvalue() {
        let ens = Ensemble::regular_unit(4, 1.0).unwrap();
        let cfg = PopDynConfig {
            population_size: 2000,
            ..Default::default()
        };
        let s = structural_eigenvalue(&ens, &cfg, 0, 1e-9).unwrap();
        assert!((s.lambda - 4.0).abs() < 1e-6, "{s:?}");
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = PopRng::new(8, 0);
        let mut pop = init_population(1.5, &small_config(30), &mut rng).unwrap();
        pop.sweep_count = 17;
        let path = dir.path().join("pop.txt");
        write_checkpoint(&pop, 1234, &path).unwrap();
        let (back, seed) = read_checkpoint(&path).unwrap();
        assert_eq!(back, pop);
        assert_eq!(seed, 1234);
        let _ = regular(3).unwrap();
    }
}
