//! Distributional observables of an equilibrated population: eigenvector
//! component densities, overlap component densities, marginal CDFs and
//! overlap moments.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::ensembles::Ensemble;
use crate::error::{invalid, Result};
use crate::popdyn::{cavity_draws, Population};

/// Histogram normalised to unit mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `bins + 1` ascending edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// `counts / total`.
    pub mass: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Binning {
    #[default]
    FreedmanDiaconis,
    Count(usize),
    Edges(Vec<f64>),
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Bin count from the Freedman–Diaconis width `2·IQR·n^{-1/3}`, clamped to
/// `[1, 10⁴]`.
pub fn freedman_diaconis_bins(samples: &[f64]) -> usize {
    if samples.len() < 2 {
        return 1;
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25);
    let range = s[s.len() - 1] - s[0];
    if !(iqr > 0.0) || !(range > 0.0) {
        return 1;
    }
    let width = 2.0 * iqr / (s.len() as f64).cbrt();
    ((range / width).ceil() as usize).clamp(1, 10_000)
}

fn edges_for(samples: &[f64], binning: &Binning) -> Vec<f64> {
    match binning {
        Binning::Edges(e) => e.clone(),
        _ => {
            let bins = match binning {
                Binning::Count(b) => (*b).max(1),
                _ => freedman_diaconis_bins(samples),
            };
            let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let (lo, hi) = if lo.is_finite() && hi > lo {
                (lo, hi)
            } else if lo.is_finite() {
                (lo - 0.5, lo + 0.5)
            } else {
                (0.0, 1.0)
            };
            (0..=bins)
                .map(|i| if i == bins { hi } else { lo + (hi - lo) * i as f64 / bins as f64 })
                .collect()
        }
    }
}

/// Histogram over fixed edges; samples outside the range land in the
/// nearest end bin, and the last bin is closed on the right.
pub fn histogram_with_edges(samples: &[f64], edges: &[f64]) -> Histogram {
    let bins = edges.len() - 1;
    let mut counts = vec![0usize; bins];
    for &x in samples {
        let b = edges.partition_point(|e| *e <= x).saturating_sub(1).min(bins - 1);
        counts[b] += 1;
    }
    let total = samples.len().max(1) as f64;
    let mass = counts.iter().map(|c| *c as f64 / total).collect();
    Histogram {
        edges: edges.to_vec(),
        counts,
        mass,
    }
}

pub fn histogram(samples: &[f64], binning: &Binning) -> Result<Histogram> {
    let edges = edges_for(samples, binning);
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("histogram edges must be strictly increasing"));
    }
    Ok(histogram_with_edges(samples, &edges))
}

/// Empirical CDF as a step function over the sorted distinct sample values.
#[derive(Debug, Clone, PartialEq)]
pub struct Cdf {
    pub x: Vec<f64>,
    pub f: Vec<f64>,
}

impl Cdf {
    pub fn new(samples: &[f64]) -> Self {
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len() as f64;
        let mut x = Vec::new();
        let mut f = Vec::new();
        for (i, v) in s.iter().enumerate() {
            if i + 1 < s.len() && s[i + 1] == *v {
                continue;
            }
            x.push(*v);
            f.push((i + 1) as f64 / n);
        }
        Self { x, f }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let i = self.x.partition_point(|v| *v <= t);
        if i == 0 {
            0.0
        } else {
            self.f[i - 1]
        }
    }

    /// Values on an evenly spaced grid of `points` between the extremes.
    pub fn grid(&self, points: usize) -> Vec<(f64, f64)> {
        let (Some(lo), Some(hi)) = (self.x.first(), self.x.last()) else {
            return Vec::new();
        };
        let points = points.max(2);
        (0..points)
            .map(|i| {
                let t = lo + (hi - lo) * i as f64 / (points - 1) as f64;
                (t, self.eval(t))
            })
            .collect()
    }
}

/// Samples of a single-site observable, each tagged with its degree.
#[derive(Debug, Clone)]
pub struct DensityEstimate {
    pub samples: Vec<f64>,
    pub degrees: Vec<usize>,
    pub histogram: Histogram,
    pub theta: f64,
    pub lambda: f64,
    pub q: f64,
}

/// One degree class of a density: its sample fraction and conditional
/// histogram on the shared edges.
#[derive(Debug, Clone)]
pub struct DegreeComponent {
    pub k: usize,
    pub fraction: f64,
    pub histogram: Histogram,
}

impl DensityEstimate {
    fn build(samples: Vec<f64>, degrees: Vec<usize>, pop: &Population, binning: &Binning) -> Result<Self> {
        let histogram = histogram(&samples, binning)?;
        Ok(Self {
            samples,
            degrees,
            histogram,
            theta: pop.theta,
            lambda: pop.lambda,
            q: pop.q,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn cdf(&self) -> Cdf {
        Cdf::new(&self.samples)
    }

    /// Conditional histograms per degree; `Σ fraction·mass` recovers the
    /// total histogram.
    pub fn by_degree(&self) -> Vec<DegreeComponent> {
        let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for (x, k) in self.samples.iter().zip(&self.degrees) {
            groups.entry(*k).or_default().push(*x);
        }
        let n = self.samples.len() as f64;
        groups
            .into_iter()
            .map(|(k, xs)| DegreeComponent {
                k,
                fraction: xs.len() as f64 / n,
                histogram: histogram_with_edges(&xs, &self.histogram.edges),
            })
            .collect()
    }
}

/// Top-eigenvector component density from `n_samples` cavity draws.
pub fn rho_top(pop: &Population, ens: &Ensemble, n_samples: usize, seed: u64, binning: &Binning) -> Result<DensityEstimate> {
    let draws = cavity_draws(pop, ens, n_samples, seed)?;
    let samples = draws.iter().map(|d| d.component(pop.theta, pop.q)).collect();
    let degrees = draws.iter().map(|d| d.k).collect();
    DensityEstimate::build(samples, degrees, pop, binning)
}

/// Overlap component density `X·u`.
pub fn rho_ov(pop: &Population, ens: &Ensemble, n_samples: usize, seed: u64, binning: &Binning) -> Result<DensityEstimate> {
    let draws = cavity_draws(pop, ens, n_samples, seed)?;
    let samples = draws.iter().map(|d| d.overlap_component(pop.theta, pop.q)).collect();
    let degrees = draws.iter().map(|d| d.k).collect();
    DensityEstimate::build(samples, degrees, pop, binning)
}

#[derive(Debug, Clone)]
pub struct Marginals {
    pub omega: Cdf,
    pub h: Cdf,
    /// The value `ω = λ` produced by degree-one updates.
    pub omega_atom: f64,
    /// Fraction of the population sitting exactly on the atom.
    pub omega_atom_mass: f64,
}

pub fn marginals(pop: &Population) -> Marginals {
    let hits = pop.omega.iter().filter(|w| **w == pop.lambda).count();
    Marginals {
        omega: Cdf::new(&pop.omega),
        h: Cdf::new(&pop.h),
        omega_atom: pop.lambda,
        omega_atom_mass: hits as f64 / pop.len() as f64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapMoments {
    pub mean: f64,
    pub mean_se: f64,
    pub second_moment: f64,
    pub second_moment_se: f64,
    /// `mean²`, the squared overlap of a self-averaging overlap.
    pub squared_mean: f64,
    pub squared_mean_se: f64,
}

pub fn overlap_moments(density: &DensityEstimate) -> OverlapMoments {
    let xs = &density.samples;
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| x * x).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| x.powi(4)).sum::<f64>() / n;
    let var = (m2 - mean * mean).max(0.0);
    let mean_se = (var / n).sqrt();
    OverlapMoments {
        mean,
        mean_se,
        second_moment: m2,
        second_moment_se: ((m4 - m2 * m2).max(0.0) / n).sqrt(),
        squared_mean: mean * mean,
        squared_mean_se: 2.0 * mean.abs() * mean_se,
    }
}

// ---------------------------------------------------------------------------
// CSV exports
// ---------------------------------------------------------------------------

fn header(out: &mut impl Write, lines: &[String]) -> std::io::Result<()> {
    for l in lines {
        writeln!(out, "# {l}")?;
    }
    Ok(())
}

/// `bin_left,bin_right,mass`.
pub fn write_histogram_csv(path: &Path, header_lines: &[String], h: &Histogram) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    header(&mut out, header_lines)?;
    writeln!(out, "bin_left,bin_right,mass")?;
    for (i, m) in h.mass.iter().enumerate() {
        writeln!(out, "{:?},{:?},{:?}", h.edges[i], h.edges[i + 1], m)?;
    }
    out.flush()?;
    Ok(())
}

/// `k,fraction,bin_left,bin_right,mass` for every degree class.
pub fn write_degree_split_csv(path: &Path, header_lines: &[String], d: &DensityEstimate) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    header(&mut out, header_lines)?;
    writeln!(out, "k,fraction,bin_left,bin_right,mass")?;
    for c in d.by_degree() {
        for (i, m) in c.histogram.mass.iter().enumerate() {
            writeln!(
                out,
                "{},{:?},{:?},{:?},{:?}",
                c.k,
                c.fraction,
                c.histogram.edges[i],
                c.histogram.edges[i + 1],
                m
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Raw `u,k` samples, at most `cap` rows.
pub fn write_samples_csv(path: &Path, header_lines: &[String], d: &DensityEstimate, cap: usize) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    header(&mut out, header_lines)?;
    writeln!(out, "u,k")?;
    for (u, k) in d.samples.iter().zip(&d.degrees).take(cap) {
        writeln!(out, "{u:?},{k}")?;
    }
    out.flush()?;
    Ok(())
}

/// `x,cdf` on a grid.
pub fn write_cdf_csv(path: &Path, header_lines: &[String], cdf: &Cdf, points: usize) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    header(&mut out, header_lines)?;
    writeln!(out, "x,cdf")?;
    for (x, f) in cdf.grid(points) {
        writeln!(out, "{x:?},{f:?}")?;
    }
    out.flush()?;
    Ok(())
}
