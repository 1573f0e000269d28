//! Mode dispatch and artifact writing.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sparsespike::analytic::{general_report, rr_report, AnalyticReport};
use sparsespike::ensembles::Ensemble;
use sparsespike::farm::{analyze_instance, generate_instance, InstanceResult, InstanceSpec};
use sparsespike::graphgen::write_instance;
use sparsespike::observables::{
    histogram, marginals, overlap_moments, rho_ov, rho_top, write_cdf_csv, write_degree_split_csv, write_histogram_csv,
    write_samples_csv, Binning,
};
use sparsespike::popdyn::{solve, structural_eigenvalue, write_checkpoint, Solution};
use sparsespike::seeding::derive_seed;
use sparsespike::spectral::{empirical_observables, full_spectrum, DEFAULT_DENSE_CAP};
use sparsespike::stats::{ks_distance, summarize, Summary};
use sparsespike::{Error, Result};

use crate::config::{ExperimentConfig, GridPoint, Mode};

const STRUCTURAL_TOL: f64 = 1e-6;
const CDF_POINTS: usize = 512;

/// Shared state of one run: the validated config and its grid.
pub struct Run {
    cfg: ExperimentConfig,
    points: Vec<GridPoint>,
    thetas: Vec<f64>,
}

impl Run {
    pub fn new(cfg: ExperimentConfig, points: Vec<GridPoint>) -> Self {
        let thetas = cfg.thetas();
        Self { cfg, points, thetas }
    }

    pub fn execute(&self) -> Result<()> {
        fs::create_dir_all(&self.cfg.out_dir)?;
        match self.cfg.mode {
            Mode::Analytic => self.analytic(),
            Mode::Popdyn => self.popdyn(),
            Mode::Diag => self.diag(),
            Mode::Densities => self.densities(),
            Mode::Sweep => self.sweep(),
        }
    }

    fn header(&self) -> Vec<String> {
        vec![format!("config: {}", self.cfg.echo()), format!("seed: {}", self.cfg.seed)]
    }

    fn path(&self, name: &str) -> PathBuf {
        self.cfg.out_dir.join(name)
    }

    fn subdir(&self, name: &str) -> Result<PathBuf> {
        let dir = self.path(name);
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    fn write_csv(&self, path: &Path, columns: &str, rows: &[String]) -> Result<()> {
        let mut out = std::io::BufWriter::new(fs::File::create(path)?);
        for l in self.header() {
            writeln!(out, "# {l}")?;
        }
        writeln!(out, "{columns}")?;
        for r in rows {
            writeln!(out, "{r}")?;
        }
        out.flush()?;
        Ok(())
    }

    /// Structural eigenvalue: configured, exact for regular graphs with a
    /// constant weight, otherwise from the bias-field growth criterion.
    fn lambda_structural(&self, pi: usize, point: &GridPoint) -> Result<f64> {
        if let Some(l) = self.cfg.lambda_structural {
            return Ok(l);
        }
        let ens = &point.ensemble;
        if let (Some(c), Some(w)) = (ens.degree.regular_degree(), ens.weight.constant_value()) {
            return Ok(c as f64 * w.abs());
        }
        let seed = derive_seed(self.cfg.seed, pi as u64, "structural");
        structural_eigenvalue(ens, &self.cfg.popdyn, seed, STRUCTURAL_TOL).map(|s| s.lambda)
    }

    fn analytic_report(&self, ens: &Ensemble, theta: f64, lambda_structural: f64) -> Result<AnalyticReport> {
        match (ens.degree.regular_degree(), ens.weight.constant_value()) {
            (Some(c), Some(w)) if w == 1.0 && c > 2 => rr_report(c, ens.spike.variance(), theta),
            _ => general_report(ens, theta, lambda_structural),
        }
    }

    fn master(&self, pi: usize) -> u64 {
        derive_seed(self.cfg.seed, pi as u64, "farm")
    }

    fn point_seed(&self, pi: usize, ti: usize, tag: &str) -> u64 {
        derive_seed(derive_seed(self.cfg.seed, pi as u64, tag), ti as u64, tag)
    }

    // -----------------------------------------------------------------------

    fn analytic(&self) -> Result<()> {
        let mut rows = Vec::new();
        let mut columns = String::new();
        let mut stdout = String::new();
        for (pi, point) in self.points.iter().enumerate() {
            let ls = self.lambda_structural(pi, point)?;
            for &theta in &self.thetas {
                let r = self.analytic_report(&point.ensemble, theta, ls)?;
                for (k, v) in analytic_fields(point.c, &r) {
                    let _ = writeln!(stdout, "{k}={v}");
                }
                stdout.push('\n');
                let (keys, values): (Vec<_>, Vec<_>) = analytic_fields(point.c, &r).into_iter().unzip();
                columns = keys.join(",");
                rows.push(values.join(","));
            }
        }
        self.write_csv(&self.path("analytic.csv"), &columns, &rows)?;
        print!("{stdout}{columns}\n{}\n", rows.join("\n"));
        Ok(())
    }

    fn solve_point(&self, pi: usize, ti: usize, point: &GridPoint, theta: f64) -> Result<Solution> {
        let warm = if self.cfg.warm_start {
            let ls = self.lambda_structural(pi, point)?;
            let r = self.analytic_report(&point.ensemble, theta, ls)?;
            match r.lambda_theta {
                Some(l) if r.overlap_sq > 0.0 => Some((l, r.overlap_sq.sqrt())),
                _ => None,
            }
        } else {
            None
        };
        solve(theta, &point.ensemble, &self.cfg.popdyn, self.point_seed(pi, ti, "popdyn"), warm)
    }

    fn popdyn(&self) -> Result<()> {
        let ckpt = self.subdir("checkpoints")?;
        let mut rows = Vec::new();
        let mut traj = Vec::new();
        for (pi, point) in self.points.iter().enumerate() {
            for (ti, &theta) in self.thetas.iter().enumerate() {
                let sol = self.solve_point(pi, ti, point, theta)?;
                let a = sol.alphas;
                rows.push(format!(
                    "{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{}",
                    fmt_opt(point.c),
                    theta,
                    sol.lambda,
                    sol.q,
                    a.alpha1.value,
                    a.alpha1.se,
                    a.alpha2.value,
                    a.alpha2.se,
                    a.q_hat.value,
                    a.q_hat.se,
                    sol.trajectory.len()
                ));
                for (r, s) in sol.trajectory.iter().enumerate() {
                    traj.push(format!(
                        "{},{:?},{},{:?},{:?},{:?},{:?},{},{}",
                        fmt_opt(point.c),
                        theta,
                        r,
                        s.lambda,
                        s.q,
                        s.alpha1,
                        s.alpha2,
                        s.sweeps,
                        s.lambda_raises
                    ));
                }
                let seed = self.point_seed(pi, ti, "popdyn");
                write_checkpoint(&sol.population, seed, &ckpt.join(format!("p{pi}_t{ti}.txt")))?;
            }
        }
        self.write_csv(
            &self.path("popdyn.csv"),
            "c,theta,lambda,q,alpha1,alpha1_se,alpha2,alpha2_se,q_hat,q_hat_se,rescales",
            &rows,
        )?;
        self.write_csv(
            &self.path("popdyn_trajectory.csv"),
            "c,theta,rescale,lambda,q,alpha1,alpha2,sweeps,lambda_raises",
            &traj,
        )
    }

    /// Every (grid point, θ, instance) task, run as one parallel queue and
    /// returned in task order.
    fn farm(&self) -> Result<Vec<Vec<Vec<InstanceResult>>>> {
        let opts = self.cfg.lanczos.options();
        let np = self.points.len();
        let nt = self.thetas.len();
        let ni = self.cfg.instances;
        let specs: Vec<Vec<InstanceSpec>> = self
            .points
            .iter()
            .map(|p| self.thetas.iter().map(|&t| InstanceSpec::new(p.ensemble.clone(), self.cfg.n, t)).collect())
            .collect();
        let flat: Vec<Result<InstanceResult>> = (0..np * nt * ni)
            .into_par_iter()
            .map(|task| {
                let (pi, rest) = (task / (nt * ni), task % (nt * ni));
                let (ti, i) = (rest / ni, rest % ni);
                analyze_instance(&specs[pi][ti], self.master(pi), i as u64, &opts).map(|(_, r)| r)
            })
            .collect();
        let mut flat = flat.into_iter();
        let mut out = Vec::with_capacity(np);
        for _ in 0..np {
            let mut per_theta = Vec::with_capacity(nt);
            for _ in 0..nt {
                per_theta.push(flat.by_ref().take(ni).collect::<Result<Vec<_>>>()?);
            }
            out.push(per_theta);
        }
        Ok(out)
    }

    fn diag(&self) -> Result<()> {
        let results = self.farm()?;
        let mut rows = Vec::new();
        for (pi, point) in self.points.iter().enumerate() {
            for (ti, &theta) in self.thetas.iter().enumerate() {
                for r in &results[pi][ti] {
                    let e = &r.report;
                    rows.push(format!(
                        "{},{:?},{},{},{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{},{}",
                        fmt_opt(point.c),
                        theta,
                        self.cfg.n,
                        r.index,
                        r.seed,
                        e.lambda_top,
                        e.lambda_second,
                        e.overlap,
                        e.overlap_sq,
                        e.blind_overlap,
                        e.residual_top,
                        e.residual_second,
                        e.iterations,
                        e.near_degenerate
                    ));
                }
            }
        }
        self.write_csv(
            &self.path("diag.csv"),
            "c,theta,n,instance,seed,lambda_top,lambda_second,overlap,overlap_sq,blind_overlap,residual_top,residual_second,iterations,near_degenerate",
            &rows,
        )?;
        if self.cfg.dump_instances {
            self.dump_instances()?;
        }
        if self.cfg.spectrum {
            self.spectra()?;
        }
        Ok(())
    }

    fn for_each_instance(&self, mut f: impl FnMut(usize, usize, usize, &InstanceSpec) -> Result<()>) -> Result<()> {
        for (pi, point) in self.points.iter().enumerate() {
            for (ti, &theta) in self.thetas.iter().enumerate() {
                let spec = InstanceSpec::new(point.ensemble.clone(), self.cfg.n, theta);
                for i in 0..self.cfg.instances {
                    f(pi, ti, i, &spec)?;
                }
            }
        }
        Ok(())
    }

    fn dump_instances(&self) -> Result<()> {
        let dir = self.subdir("instances")?;
        self.for_each_instance(|pi, ti, i, spec| {
            let a = generate_instance(spec, self.master(pi), i as u64)?;
            let seed = sparsespike::farm::instance_seed(self.master(pi), i as u64);
            let stem = format!("p{pi}_t{ti}_i{i}");
            write_instance(&a, seed, &dir.join(format!("{stem}.edges")), &dir.join(format!("{stem}.side")))
        })
    }

    /// Pooled eigenvalue histogram per (grid point, θ).
    fn spectra(&self) -> Result<()> {
        if self.cfg.n > DEFAULT_DENSE_CAP {
            return Err(Error::InvalidParameter(format!(
                "spectrum needs n <= {DEFAULT_DENSE_CAP}, got {}",
                self.cfg.n
            )));
        }
        let dir = self.subdir("spectra")?;
        let header = self.header();
        for (pi, point) in self.points.iter().enumerate() {
            for (ti, &theta) in self.thetas.iter().enumerate() {
                let spec = InstanceSpec::new(point.ensemble.clone(), self.cfg.n, theta);
                let parts: Vec<Result<Vec<f64>>> = (0..self.cfg.instances as u64)
                    .into_par_iter()
                    .map(|i| full_spectrum(&generate_instance(&spec, self.master(pi), i)?, DEFAULT_DENSE_CAP))
                    .collect();
                let mut pooled = Vec::new();
                for p in parts {
                    pooled.extend(p?);
                }
                let h = histogram(&pooled, &Binning::FreedmanDiaconis)?;
                write_histogram_csv(&dir.join(format!("p{pi}_t{ti}.csv")), &header, &h)?;
            }
        }
        Ok(())
    }

    fn densities(&self) -> Result<()> {
        let dir = self.subdir("densities")?;
        let header = self.header();
        let binning = Binning::FreedmanDiaconis;
        let mut rows = Vec::new();
        for (pi, point) in self.points.iter().enumerate() {
            for (ti, &theta) in self.thetas.iter().enumerate() {
                let sol = self.solve_point(pi, ti, point, theta)?;
                let pop = &sol.population;
                let ens = &point.ensemble;
                let seed = self.point_seed(pi, ti, "densities");
                let top = rho_top(pop, ens, self.cfg.density_samples, derive_seed(seed, 0, "rho_top"), &binning)?;
                let ov = rho_ov(pop, ens, self.cfg.density_samples, derive_seed(seed, 0, "rho_ov"), &binning)?;
                let stem = format!("p{pi}_t{ti}");
                for (name, d) in [("rho_top", &top), ("rho_ov", &ov)] {
                    write_histogram_csv(&dir.join(format!("{stem}_{name}.csv")), &header, &d.histogram)?;
                    write_degree_split_csv(&dir.join(format!("{stem}_{name}_by_degree.csv")), &header, d)?;
                    write_samples_csv(&dir.join(format!("{stem}_{name}_samples.csv")), &header, d, self.cfg.sample_dump_cap)?;
                    write_cdf_csv(&dir.join(format!("{stem}_{name}_cdf.csv")), &header, &d.cdf(), CDF_POINTS)?;
                }
                let m = marginals(pop);
                write_cdf_csv(&dir.join(format!("{stem}_omega_cdf.csv")), &header, &m.omega, CDF_POINTS)?;
                write_cdf_csv(&dir.join(format!("{stem}_h_cdf.csv")), &header, &m.h, CDF_POINTS)?;

                let u2: Vec<f64> = top.samples.iter().map(|u| u * u).collect();
                let u2 = summarize(&u2);
                let om = overlap_moments(&ov);
                let (ks_top, ks_ov) = if self.cfg.compare_instances {
                    let (a, b) = self.empirical_components(pi, point, theta)?;
                    (Some(ks_distance(&top.samples, &a)), Some(ks_distance(&ov.samples, &b)))
                } else {
                    (None, None)
                };
                rows.push(format!(
                    "{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{},{}",
                    fmt_opt(point.c),
                    theta,
                    sol.lambda,
                    sol.q,
                    sol.alphas.alpha1.value,
                    sol.alphas.alpha2.value,
                    u2.mean,
                    u2.se,
                    om.mean,
                    om.mean_se,
                    om.squared_mean,
                    om.second_moment,
                    m.omega_atom,
                    m.omega_atom_mass,
                    fmt_opt(ks_top),
                    fmt_opt(ks_ov)
                ));
            }
        }
        self.write_csv(
            &self.path("densities.csv"),
            "c,theta,lambda,q,alpha1,alpha2,u2_mean,u2_se,overlap_mean,overlap_se,overlap_squared_mean,overlap_second_moment,omega_atom,omega_atom_mass,ks_top,ks_ov",
            &rows,
        )
    }

    /// Pooled top-eigenvector and overlap components of the configured instances.
    fn empirical_components(&self, pi: usize, point: &GridPoint, theta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let spec = InstanceSpec::new(point.ensemble.clone(), self.cfg.n, theta);
        let opts = self.cfg.lanczos.options();
        let parts: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..self.cfg.instances as u64)
            .into_par_iter()
            .map(|i| {
                let (a, r) = analyze_instance(&spec, self.master(pi), i, &opts)?;
                let e = empirical_observables(&a, &r.report);
                Ok((e.components, e.overlap_components))
            })
            .collect();
        let (mut u, mut ov) = (Vec::new(), Vec::new());
        for p in parts {
            let (a, b) = p?;
            u.extend(a);
            ov.extend(b);
        }
        Ok((u, ov))
    }

    fn sweep(&self) -> Result<()> {
        let results = self.farm()?;
        let mut rows = Vec::new();
        for (pi, point) in self.points.iter().enumerate() {
            // Analytic columns are left empty where the theory does not apply.
            let ls = self.lambda_structural(pi, point).ok();
            for (ti, &theta) in self.thetas.iter().enumerate() {
                let rs = &results[pi][ti];
                let col = |f: fn(&InstanceResult) -> f64| summarize(&rs.iter().map(f).collect::<Vec<_>>());
                let top = col(|r| r.report.lambda_top);
                let second = col(|r| r.report.lambda_second);
                let ov = col(|r| r.report.overlap);
                let ov2 = col(|r| r.report.overlap_sq);
                let an = ls.and_then(|l| self.analytic_report(&point.ensemble, theta, l).ok());
                rows.push(format!(
                    "{:?},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    theta,
                    fmt_opt(point.c),
                    rs.len(),
                    stat(&top),
                    stat(&second),
                    stat(&ov),
                    stat(&ov2),
                    fmt_opt(an.and_then(|a| a.lambda_theta)),
                    fmt_opt(an.map(|a| a.lambda_top)),
                    fmt_opt(an.map(|a| a.overlap_sq)),
                    fmt_opt(an.map(|a| a.theta_crit)),
                    fmt_opt(an.and_then(|a| a.theta_b)),
                    rs.iter().filter(|r| r.report.near_degenerate).count(),
                    if rs.len() < 2 { "single_instance" } else { "" }
                ));
            }
        }
        self.write_csv(
            &self.path("sweep.csv"),
            "theta,c,instances,\
             lambda_top_mean,lambda_top_sd,lambda_top_se,\
             lambda_second_mean,lambda_second_sd,lambda_second_se,\
             overlap_mean,overlap_sd,overlap_se,\
             overlap_sq_mean,overlap_sq_sd,overlap_sq_se,\
             analytic_lambda_theta,analytic_lambda_top,analytic_overlap_sq,theta_crit,theta_b,near_degenerate,flag",
            &rows,
        )
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:?}")).unwrap_or_default()
}

/// `mean,sd,se`; sd and se are empty for a single instance.
fn stat(s: &Summary) -> String {
    let f = |x: f64| if x.is_finite() { format!("{x:?}") } else { String::new() };
    format!("{:?},{},{}", s.mean, f(s.sd), f(s.se))
}

fn analytic_fields(c: Option<f64>, r: &AnalyticReport) -> Vec<(&'static str, String)> {
    vec![
        ("c", fmt_opt(c)),
        ("theta", format!("{:?}", r.theta)),
        ("theta_crit", format!("{:?}", r.theta_crit)),
        ("theta_b", fmt_opt(r.theta_b)),
        ("c_crit", fmt_opt(r.c_crit)),
        ("c_b", fmt_opt(r.c_b)),
        ("lambda_structural", format!("{:?}", r.lambda_structural)),
        ("bulk_edge", fmt_opt(r.bulk_edge)),
        ("lambda_theta", fmt_opt(r.lambda_theta)),
        ("lambda_top", format!("{:?}", r.lambda_top)),
        ("overlap_sq", format!("{:?}", r.overlap_sq)),
        ("m", fmt_opt(r.m)),
        ("m_iterations", r.m_iterations.to_string()),
        ("m_residual", format!("{:?}", r.m_residual)),
    ]
}
