//! Acceptance suite: one `[ACCEPTANCE] Cn PASS|FAIL` line per criterion.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sparsespike::analytic::{rr_report, MeanField};
use sparsespike::ensembles::{regular, table, truncated_poisson, Ensemble, SpikeModel, WeightModel};
use sparsespike::farm::{analyze_instance, generate_instance, run_instances, summarize_instances, InstanceSpec};
use sparsespike::observables::{rho_ov, rho_top, Binning};
use sparsespike::popdyn::{solve, structural_eigenvalue, PopDynConfig};
use sparsespike::spectral::{analyze, dense_eigen, empirical_observables, LanczosOptions};
use sparsespike::stats::{ks_distance, summarize};
use sparsespike::Result;

const N: usize = 2000;
const DENSITY_SAMPLES: usize = 1_000_000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn poisson() -> Ensemble {
    Ensemble::poisson_unit(4.0, 20, 1.0).unwrap()
}

fn c1() -> Result<Outcome> {
    let ens = Ensemble::regular_unit(4, 1.0)?;
    let results = run_instances(&InstanceSpec::new(ens, N, 4.0), 101, 10, &LanczosOptions::default())?;
    let s = summarize_instances(&results);
    let lambda = 4.0 * 5f64.sqrt() - 4.0;
    let ov2 = 4.0 / 5f64.sqrt() - 1.0;
    let ok_l = (s.lambda_top.mean - lambda).abs() <= 3.0 * s.lambda_top.se;
    let ok_o = (s.overlap_sq.mean - ov2).abs() <= 3.0 * s.overlap_sq.se;
    outcome(
        ok_l && ok_o,
        format!(
            "lambda_top {:.4} ± {:.4} (target {lambda:.4}), overlap² {:.4} ± {:.4} (target {ov2:.4})",
            s.lambda_top.mean, s.lambda_top.se, s.overlap_sq.mean, s.overlap_sq.se
        ),
    )
}

fn c2() -> Result<Outcome> {
    let (c, edge) = (4.0f64, 2.0 * 3f64.sqrt());
    let closed = rr_report(4, 1.0, 1.0)?;
    let (theta_b, theta_crit) = (closed.theta_b.unwrap(), closed.theta_crit);
    let lambda_theta = |t: f64| (c * (t * t + 4.0).sqrt() - (c - 2.0) * t) / 2.0;
    let mut pass = true;
    let mut parts = Vec::new();
    for theta in [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0] {
        let ens = Ensemble::regular_unit(4, 1.0)?;
        let s = summarize_instances(&run_instances(&InstanceSpec::new(ens, N, theta), 102, 10, &LanczosOptions::default())?);
        let (top, second, ov2) = (s.lambda_top.mean, s.lambda_second.mean, s.overlap_sq.mean);
        let ok = if theta < theta_b {
            rel(second, edge) <= 0.05
        } else if theta < theta_crit {
            rel(second, lambda_theta(theta)) <= 0.05 && rel(top, c) <= 0.05
        } else {
            rel(top, lambda_theta(theta)) <= 0.05 && ov2 > 0.3
        };
        pass &= ok;
        parts.push(format!(
            "θ={theta}: top {top:.4} second {second:.4} ov² {ov2:.3} λθ {:.4}{}",
            lambda_theta(theta),
            if ok { "" } else { " ✗" }
        ));
    }
    outcome(pass, parts.join("; "))
}

fn c3_solution() -> Result<(sparsespike::popdyn::Solution, f64)> {
    let ens = poisson();
    let sol = solve(6.0, &ens, &PopDynConfig::default(), 103, None)?;
    let analytic = MeanField::new(&ens)?.lambda_signal(6.0)?;
    Ok((sol, analytic))
}

fn c3(sol: &sparsespike::popdyn::Solution, analytic: f64) -> Result<Outcome> {
    let a = sol.alphas;
    let r = rel(sol.lambda, analytic);
    let ok = r <= 5e-3 && (a.alpha1.value - 1.0).abs() <= 1e-2 && (a.alpha2.value - 1.0).abs() <= 1e-2;
    outcome(
        ok,
        format!(
            "popdyn λ {:.5} vs analytic {analytic:.5} (rel {r:.2e}), α₁ {:.4}, α₂ {:.4}, {} rescales",
            sol.lambda,
            a.alpha1.value,
            a.alpha2.value,
            sol.trajectory.len()
        ),
    )
}

/// The criterion-3 stopping rule `|α − 1| ≤ 1e-2` is far looser than the
/// Monte Carlo error of `𝔼[u²]`, so the densities come from the same model
/// and population size converged to `|α − 1| ≤ 2e-3`.
fn c4(c3: &sparsespike::popdyn::Solution) -> Result<Outcome> {
    let ens = poisson();
    let cfg = PopDynConfig {
        alpha_tol: 2e-3,
        alpha_samples: 4_000_000,
        ..PopDynConfig::default()
    };
    let sol = solve(6.0, &ens, &cfg, 109, Some((c3.lambda, c3.q)))?;
    let binning = Binning::FreedmanDiaconis;
    let top = rho_top(&sol.population, &ens, DENSITY_SAMPLES, 104, &binning)?;
    let ov = rho_ov(&sol.population, &ens, DENSITY_SAMPLES, 105, &binning)?;
    let spec = InstanceSpec::new(ens.clone(), N, 6.0);
    let opts = LanczosOptions::default();
    let (mut u, mut xu) = (Vec::new(), Vec::new());
    for i in 0..25 {
        let (a, r) = analyze_instance(&spec, 106, i, &opts)?;
        let e = empirical_observables(&a, &r.report);
        u.extend(e.components);
        xu.extend(e.overlap_components);
    }
    let ks_top = ks_distance(&top.samples, &u);
    let ks_ov = ks_distance(&ov.samples, &xu);
    let u2 = summarize(&top.samples.iter().map(|x| x * x).collect::<Vec<_>>());
    let ok_u2 = (u2.mean - 1.0).abs() <= 3.0 * u2.se;
    let loose = rho_top(&c3.population, &ens, DENSITY_SAMPLES, 104, &binning)?;
    let loose_u2 = summarize(&loose.samples.iter().map(|x| x * x).collect::<Vec<_>>());
    outcome(
        ks_top <= 0.05 && ks_ov <= 0.05 && ok_u2,
        format!(
            "KS(ρ_top) {ks_top:.4}, KS(ρ_ov) {ks_ov:.4}, E[u²] {:.5} ± {:.5} ({:+.1} SE from 1; α₁ {:.5}); \
             at the 1e-2 stopping rule E[u²] {:.5} ± {:.5} ({:+.1} SE)",
            u2.mean,
            u2.se,
            (u2.mean - 1.0) / u2.se,
            sol.alphas.alpha1.value,
            loose_u2.mean,
            loose_u2.se,
            (loose_u2.mean - 1.0) / loose_u2.se
        ),
    )
}

fn c5() -> Result<Outcome> {
    let c = 200usize;
    let ens = Ensemble::new(
        regular(c)?,
        WeightModel::rademacher_scaled(1.0 / (c as f64).sqrt())?,
        SpikeModel::gaussian(1.0)?,
    );
    let s = summarize_instances(&run_instances(&InstanceSpec::new(ens, 4000, 2.0), 105, 5, &LanczosOptions::default())?);
    let (top, ov2, edge) = (s.lambda_top.mean, s.overlap_sq.mean, s.lambda_second.mean);
    let ok = rel(top, 2.5) <= 0.05 && rel(ov2, 0.75) <= 0.07 && rel(edge, 2.0) <= 0.03;
    outcome(
        ok,
        format!(
            "λ_top {top:.4} (rel {:.3}), overlap² {ov2:.4} (rel {:.3}), bulk edge (λ_second) {edge:.4} (rel {:.3})",
            rel(top, 2.5),
            rel(ov2, 0.75),
            rel(edge, 2.0)
        ),
    )
}

fn c6() -> Result<Outcome> {
    let ens = Ensemble::regular_unit(4, 1.0)?;
    let cfg = PopDynConfig {
        population_size: 20_000,
        ..PopDynConfig::default()
    };
    let structural = structural_eigenvalue(&ens, &cfg, 106, 1e-9)?;
    let s = summarize_instances(&run_instances(&InstanceSpec::new(ens, N, 0.0), 107, 25, &LanczosOptions::default())?);
    let b = s.blind_overlap;
    let ok = (structural.lambda - 4.0).abs() <= 1e-6 && b.mean.abs() <= 3.0 * b.se;
    outcome(
        ok,
        format!(
            "popdyn structural λ {:.9}, mean λ_top {:.6}, blind mean overlap {:.5} ± {:.5}",
            structural.lambda, s.lambda_top.mean, b.mean, b.se
        ),
    )
}

fn random_ensemble(rng: &mut ChaCha8Rng) -> Result<Ensemble> {
    let degree = match rng.random_range(0..3) {
        0 => truncated_poisson(rng.random_range(1.0..6.0), rng.random_range(4..15))?,
        1 => regular(rng.random_range(2..7))?,
        _ => {
            let w: Vec<f64> = (0..rng.random_range(3..8)).map(|_| rng.random::<f64>()).collect();
            let t: f64 = w.iter().sum();
            table(w.into_iter().map(|x| x / t).collect())?
        }
    };
    let weight = match rng.random_range(0..3) {
        0 => WeightModel::constant(rng.random_range(0.2..2.0))?,
        1 => WeightModel::rademacher_scaled(rng.random_range(0.2..2.0))?,
        _ => WeightModel::new(sparsespike::ensembles::WeightSpec::CustomTable {
            values: vec![-1.5, 0.5, 2.0],
            probabilities: vec![0.25, 0.5, 0.25],
        })?,
    };
    let spike = match rng.random_range(0..2) {
        0 => SpikeModel::gaussian(rng.random_range(0.5..2.0))?,
        _ => SpikeModel::rademacher(rng.random_range(0.5..2.0))?,
    };
    Ok(Ensemble::new(degree, weight, spike))
}

fn c7() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let opts = LanczosOptions::default();
    let (mut done, mut skipped) = (0, 0);
    let (mut worst_eig, mut worst_mv) = (0.0f64, 0.0f64);
    while done < 50 {
        let ens = random_ensemble(&mut rng)?;
        let n = rng.random_range(2..=50);
        let theta = rng.random_range(0.0..8.0);
        let seed = rng.random::<u64>();
        // Small N can make a degree sequence unrealisable; draw another.
        let Ok(a) = generate_instance(&InstanceSpec::new(ens, n, theta), seed, 0) else {
            skipped += 1;
            continue;
        };
        let dense = a.to_dense();
        let (values, _) = dense_eigen(dense.clone());
        let r = analyze(&a, &opts, &mut ChaCha8Rng::seed_from_u64(seed))?;
        worst_eig = worst_eig.max((r.lambda_top - values[n - 1]).abs());
        worst_eig = worst_eig.max((r.lambda_second - values[n - 2]).abs());
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sparse = a.matvec(&v)?;
        let reference = &dense * nalgebra::DVector::from_vec(v);
        for (s, d) in sparse.iter().zip(reference.iter()) {
            worst_mv = worst_mv.max((s - d).abs());
        }
        done += 1;
    }
    outcome(
        worst_eig <= 1e-9 && worst_mv <= 1e-12,
        format!("50 instances ({skipped} unrealisable draws skipped): max eigenvalue error {worst_eig:.2e}, max matvec error {worst_mv:.2e}"),
    )
}

fn c8() -> Result<Outcome> {
    let mut worst = 0.0f64;
    let rr_crit = rr_report(4, 1.0, 1.0)?.theta_crit;
    for i in 0..10 {
        let theta = rr_crit + 0.5 + i as f64;
        let h = 1e-4 * theta;
        let lp = rr_report(4, 1.0, theta + h)?.lambda_top;
        let lm = rr_report(4, 1.0, theta - h)?.lambda_top;
        let ov = rr_report(4, 1.0, theta)?.overlap_sq;
        worst = worst.max(rel((lp - lm) / (2.0 * h), ov));
    }
    let ens = poisson();
    let cfg = PopDynConfig {
        population_size: 20_000,
        ..PopDynConfig::default()
    };
    let structural = structural_eigenvalue(&ens, &cfg, 108, 1e-6)?.lambda;
    let mf = MeanField::new(&ens)?;
    let p_crit = mf.theta_crit(structural)?;
    for i in 0..10 {
        let theta = p_crit + 0.5 + i as f64;
        let h = 1e-4 * theta;
        let slope = (mf.lambda_signal(theta + h)? - mf.lambda_signal(theta - h)?) / (2.0 * h);
        worst = worst.max(rel(slope, mf.overlap_sq(theta)?));
    }
    outcome(
        worst <= 1e-4,
        format!("RR θ_crit {rr_crit:.4}, Poisson θ_crit {p_crit:.4} (structural λ {structural:.4}); max relative deviation {worst:.2e}"),
    )
}

fn report(name: &str, start: Instant, r: Result<Outcome>) -> bool {
    let secs = start.elapsed().as_secs_f64();
    match r {
        Ok(o) => {
            println!("[ACCEPTANCE] {name} {} {} [{secs:.1}s]", if o.pass { "PASS" } else { "FAIL" }, o.detail);
            o.pass
        }
        Err(e) => {
            println!("[ACCEPTANCE] {name} FAIL error: {e} [{secs:.1}s]");
            false
        }
    }
}

fn main() -> ExitCode {
    let mut all = true;
    let t = Instant::now();
    all &= report("C1", t, c1());
    let t = Instant::now();
    all &= report("C2", t, c2());
    let t = Instant::now();
    match c3_solution() {
        Ok((sol, analytic)) => {
            all &= report("C3", t, c3(&sol, analytic));
            let t = Instant::now();
            all &= report("C4", t, c4(&sol));
        }
        Err(e) => {
            println!("[ACCEPTANCE] C3 FAIL error: {e}");
            println!("[ACCEPTANCE] C4 FAIL needs the criterion-3 population");
            all = false;
        }
    }
    let t = Instant::now();
    all &= report("C5", t, c5());
    let t = Instant::now();
    all &= report("C6", t, c6());
    let t = Instant::now();
    all &= report("C7", t, c7());
    let t = Instant::now();
    all &= report("C8", t, c8());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
