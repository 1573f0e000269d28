//! Degree distributions, bond-weight densities and spike-component densities.
//!
//! Each model is declared by a small serializable spec (`DegreeSpec`,
//! `WeightSpec`, `SpikeSpec`) and built into an immutable model that caches its
//! moments and a sampler. Models are `Sync` and take the caller's stream for
//! every draw.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Compensated (Neumaier) summation over an iterator, in iteration order.
pub(crate) fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn validate_table(probabilities: &[f64], what: &str) -> Result<()> {
    if probabilities.is_empty() {
        return Err(invalid(format!("{what}: empty probability table")));
    }
    if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(invalid(format!("{what}: probabilities must be finite and non-negative")));
    }
    let total = neumaier_sum(probabilities.iter().copied());
    if (total - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("{what}: probabilities sum to {total}, not 1")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Degrees
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DegreeSpec {
    /// `p_k ∝ c̄^k / k!` on `0..=k_max`.
    TruncatedPoisson { c_bar: f64, k_max: usize },
    /// Every vertex has degree `c`.
    Regular { c: usize },
    /// Explicit `p_k`, indexed from `k = 0`.
    Table { probabilities: Vec<f64> },
}

impl DegreeSpec {
    pub fn build(&self) -> Result<DegreeModel> {
        match self {
            DegreeSpec::TruncatedPoisson { c_bar, k_max } => truncated_poisson(*c_bar, *k_max),
            DegreeSpec::Regular { c } => regular(*c),
            DegreeSpec::Table { probabilities } => table(probabilities.clone()),
        }
    }

    /// The same family with its connectivity parameter replaced (`c` or `c̄`).
    pub fn with_connectivity(&self, c: f64) -> Result<DegreeSpec> {
        match self {
            DegreeSpec::TruncatedPoisson { k_max, .. } => Ok(DegreeSpec::TruncatedPoisson {
                c_bar: c,
                k_max: *k_max,
            }),
            DegreeSpec::Regular { .. } => {
                if c.fract() != 0.0 || c < 2.0 {
                    return Err(invalid(format!("regular degree must be an integer > 1, got {c}")));
                }
                Ok(DegreeSpec::Regular { c: c as usize })
            }
            DegreeSpec::Table { .. } => Err(invalid("a degree table has no connectivity parameter")),
        }
    }

    /// The connectivity parameter of the family, if it has one.
    pub fn connectivity(&self) -> Option<f64> {
        match self {
            DegreeSpec::TruncatedPoisson { c_bar, .. } => Some(*c_bar),
            DegreeSpec::Regular { c } => Some(*c as f64),
            DegreeSpec::Table { .. } => None,
        }
    }
}

/// A degree distribution with bounded support `0..=k_max`.
#[derive(Debug, Clone)]
pub struct DegreeModel {
    spec: DegreeSpec,
    probabilities: Vec<f64>,
    mean: f64,
    second_moment: f64,
    size_biased: Option<Vec<f64>>,
    sampler: WeightedIndex<f64>,
    size_biased_sampler: Option<WeightedIndex<f64>>,
}

/// Truncated Poisson law `p_k = c̄^k / (Γ k!)`, `Γ = Σ_{k ≤ k_max} c̄^k / k!`.
///
/// Terms are formed in log space and normalised against the largest one, so
/// large `c̄` neither overflows nor loses the tail.
pub fn truncated_poisson(c_bar: f64, k_max: usize) -> Result<DegreeModel> {
    if !(c_bar.is_finite() && c_bar > 0.0) {
        return Err(invalid(format!("truncated Poisson needs c_bar > 0, got {c_bar}")));
    }
    if k_max < 1 {
        return Err(invalid("truncated Poisson needs k_max >= 1"));
    }
    let ln_c = c_bar.ln();
    let mut log_terms = Vec::with_capacity(k_max + 1);
    let mut ln_fact = 0.0f64;
    for k in 0..=k_max {
        if k > 0 {
            ln_fact += (k as f64).ln();
        }
        log_terms.push(k as f64 * ln_c - ln_fact);
    }
    let top = log_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let terms: Vec<f64> = log_terms.iter().map(|l| (l - top).exp()).collect();
    let gamma = neumaier_sum(terms.iter().copied());
    let probabilities = terms.iter().map(|t| t / gamma).collect();
    DegreeModel::from_parts(DegreeSpec::TruncatedPoisson { c_bar, k_max }, probabilities)
}

/// `p_k = δ_{k,c}`.
pub fn regular(c: usize) -> Result<DegreeModel> {
    if c < 2 {
        return Err(invalid(format!("regular degree must be > 1, got {c}")));
    }
    let mut probabilities = vec![0.0; c + 1];
    probabilities[c] = 1.0;
    DegreeModel::from_parts(DegreeSpec::Regular { c }, probabilities)
}

/// Arbitrary table `p_0, p_1, …, p_{k_max}`.
pub fn table(probabilities: Vec<f64>) -> Result<DegreeModel> {
    validate_table(&probabilities, "degree table")?;
    let mut probabilities = probabilities;
    while probabilities.len() > 1 && *probabilities.last().unwrap() == 0.0 {
        probabilities.pop();
    }
    let total = neumaier_sum(probabilities.iter().copied());
    let probabilities: Vec<f64> = probabilities.iter().map(|p| p / total).collect();
    DegreeModel::from_parts(
        DegreeSpec::Table {
            probabilities: probabilities.clone(),
        },
        probabilities,
    )
}

impl DegreeModel {
    fn from_parts(spec: DegreeSpec, probabilities: Vec<f64>) -> Result<Self> {
        let mean = neumaier_sum(probabilities.iter().enumerate().map(|(k, p)| k as f64 * p));
        let second_moment =
            neumaier_sum(probabilities.iter().enumerate().map(|(k, p)| (k * k) as f64 * p));
        let sampler = WeightedIndex::new(&probabilities)
            .map_err(|e| invalid(format!("degree table: {e}")))?;
        let (size_biased, size_biased_sampler) = if mean > 0.0 {
            let r: Vec<f64> = probabilities
                .iter()
                .enumerate()
                .map(|(k, p)| k as f64 * p / mean)
                .collect();
            let s = WeightedIndex::new(&r).map_err(|e| invalid(format!("size-biased table: {e}")))?;
            (Some(r), Some(s))
        } else {
            (None, None)
        };
        Ok(Self {
            spec,
            probabilities,
            mean,
            second_moment,
            size_biased,
            sampler,
            size_biased_sampler,
        })
    }

    pub fn spec(&self) -> &DegreeSpec {
        &self.spec
    }

    /// `p_k` for `k = 0..=k_max`.
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, k: usize) -> f64 {
        self.probabilities.get(k).copied().unwrap_or(0.0)
    }

    pub fn k_max(&self) -> usize {
        self.probabilities.len() - 1
    }

    /// `c = ⟨k⟩`.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `⟨k²⟩`.
    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    /// `Some(c)` for the random-regular family.
    pub fn regular_degree(&self) -> Option<usize> {
        match self.spec {
            DegreeSpec::Regular { c } => Some(c),
            _ => None,
        }
    }

    /// `Some((c̄, k_max))` for the truncated Poisson family.
    pub fn poisson_parameters(&self) -> Option<(f64, usize)> {
        match self.spec {
            DegreeSpec::TruncatedPoisson { c_bar, k_max } => Some((c_bar, k_max)),
            _ => None,
        }
    }

    /// Degree-corrected table `r_k = k p_k / ⟨k⟩` (with `r_0 = 0`).
    pub fn degree_corrected(&self) -> Result<&[f64]> {
        self.size_biased
            .as_deref()
            .ok_or(Error::DegenerateDistribution)
    }

    /// `⟨⟨f(k)⟩⟩ = Σ_k r_k f(k)`.
    pub fn size_biased_mean(&self, f: impl Fn(usize) -> f64) -> Result<f64> {
        let r = self.degree_corrected()?;
        Ok(neumaier_sum(r.iter().enumerate().map(|(k, rk)| rk * f(k))))
    }

    /// `⟨f(k)⟩ = Σ_k p_k f(k)`.
    pub fn average(&self, f: impl Fn(usize) -> f64) -> f64 {
        neumaier_sum(self.probabilities.iter().enumerate().map(|(k, p)| p * f(k)))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.sampler.sample(rng)
    }

    /// Draw from `r_k`.
    ///
    /// # Panics
    /// If the model has zero mean degree; check `degree_corrected()` first.
    pub fn sample_size_biased<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.size_biased_sampler
            .as_ref()
            .expect("size-biased sampling of a zero-mean degree model")
            .sample(rng)
    }
}

/// `n` i.i.d. degrees from `model`, with an even sum.
///
/// An odd sum is repaired by redrawing one uniformly chosen entry until the
/// parity flips. If every supported degree has the same parity the repair can
/// never succeed and an error is returned instead.
pub fn sample_degree_sequence<R: Rng + ?Sized>(
    model: &DegreeModel,
    n: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if n < 2 {
        return Err(invalid(format!("degree sequence needs N >= 2, got {n}")));
    }
    let mut degrees: Vec<usize> = (0..n).map(|_| model.sample(rng)).collect();
    let mut total: usize = degrees.iter().sum();
    if total % 2 == 1 {
        let has_even = model.probabilities().iter().step_by(2).any(|p| *p > 0.0);
        let has_odd = model.probabilities().iter().skip(1).step_by(2).any(|p| *p > 0.0);
        if !(has_even && has_odd) {
            return Err(Error::ParityUnrepairable {
                parity: if has_odd { "odd" } else { "even" },
                n,
            });
        }
        while total % 2 == 1 {
            let i = rng.random_range(0..n);
            let fresh = model.sample(rng);
            total = total - degrees[i] + fresh;
            degrees[i] = fresh;
        }
    }
    Ok(degrees)
}

// ---------------------------------------------------------------------------
// Bond weights
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    Constant { w: f64 },
    /// `±scale` with probability 1/2 each.
    RademacherScaled { scale: f64 },
    CustomTable { values: Vec<f64>, probabilities: Vec<f64> },
}

impl WeightSpec {
    pub fn build(&self) -> Result<WeightModel> {
        WeightModel::new(self.clone())
    }
}

/// A compactly supported bond-weight density `ρ_W`.
#[derive(Debug, Clone)]
pub struct WeightModel {
    spec: WeightSpec,
    mean: f64,
    second_moment: f64,
    zeta: f64,
    table: Option<(Vec<f64>, WeightedIndex<f64>)>,
}

impl WeightModel {
    pub fn new(spec: WeightSpec) -> Result<Self> {
        let (mean, second_moment, zeta, table) = match &spec {
            WeightSpec::Constant { w } => {
                if !w.is_finite() {
                    return Err(invalid("constant weight must be finite"));
                }
                (*w, w * w, w.abs(), None)
            }
            WeightSpec::RademacherScaled { scale } => {
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(invalid(format!("rademacher scale must be > 0, got {scale}")));
                }
                (0.0, scale * scale, *scale, None)
            }
            WeightSpec::CustomTable {
                values,
                probabilities,
            } => {
                if values.len() != probabilities.len() {
                    return Err(invalid("weight table: values and probabilities differ in length"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("weight table: values must be finite"));
                }
                validate_table(probabilities, "weight table")?;
                let mean = neumaier_sum(values.iter().zip(probabilities).map(|(v, p)| v * p));
                let m2 = neumaier_sum(values.iter().zip(probabilities).map(|(v, p)| v * v * p));
                let zeta = values
                    .iter()
                    .zip(probabilities)
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(v, _)| v.abs())
                    .fold(0.0, f64::max);
                let sampler = WeightedIndex::new(probabilities)
                    .map_err(|e| invalid(format!("weight table: {e}")))?;
                (mean, m2, zeta, Some((values.clone(), sampler)))
            }
        };
        if second_moment <= 0.0 {
            return Err(invalid("bond weights need E[W^2] > 0"));
        }
        Ok(Self {
            spec,
            mean,
            second_moment,
            zeta,
            table,
        })
    }

    pub fn constant(w: f64) -> Result<Self> {
        Self::new(WeightSpec::Constant { w })
    }

    pub fn rademacher_scaled(scale: f64) -> Result<Self> {
        Self::new(WeightSpec::RademacherScaled { scale })
    }

    pub fn spec(&self) -> &WeightSpec {
        &self.spec
    }

    /// `𝔼[W]`.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `𝔼[W²]`.
    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    /// Largest absolute support point.
    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    /// `Some(w)` when the density is a single atom.
    pub fn constant_value(&self) -> Option<f64> {
        match self.spec {
            WeightSpec::Constant { w } => Some(w),
            _ => None,
        }
    }

    /// Constant weights consume nothing from `rng`.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.spec {
            WeightSpec::Constant { w } => *w,
            WeightSpec::RademacherScaled { scale } => {
                if rng.random::<bool>() {
                    *scale
                } else {
                    -*scale
                }
            }
            WeightSpec::CustomTable { .. } => {
                let (values, sampler) = self.table.as_ref().expect("table weights carry a sampler");
                values[sampler.sample(rng)]
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Spike components
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpikeSpec {
    Gaussian { variance: f64 },
    /// `±σ` with probability 1/2 each.
    Rademacher { variance: f64 },
    Custom { values: Vec<f64>, probabilities: Vec<f64> },
}

impl SpikeSpec {
    pub fn build(&self) -> Result<SpikeModel> {
        SpikeModel::new(self.clone())
    }
}

/// A centred spike-component density `ρ_x` with finite variance.
#[derive(Debug, Clone)]
pub struct SpikeModel {
    spec: SpikeSpec,
    variance: f64,
    normal: Option<Normal<f64>>,
    table: Option<(Vec<f64>, WeightedIndex<f64>)>,
}

impl SpikeModel {
    pub fn new(spec: SpikeSpec) -> Result<Self> {
        let check_var = |v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(v)
            } else {
                Err(invalid(format!("spike variance must be finite and > 0, got {v}")))
            }
        };
        let mut normal = None;
        let mut table = None;
        let variance = match &spec {
            SpikeSpec::Gaussian { variance } => {
                let v = check_var(*variance)?;
                normal = Some(Normal::new(0.0, v.sqrt()).map_err(|e| invalid(e.to_string()))?);
                v
            }
            SpikeSpec::Rademacher { variance } => check_var(*variance)?,
            SpikeSpec::Custom {
                values,
                probabilities,
            } => {
                if values.len() != probabilities.len() {
                    return Err(invalid("spike table: values and probabilities differ in length"));
                }
                validate_table(probabilities, "spike table")?;
                let mean = neumaier_sum(values.iter().zip(probabilities).map(|(v, p)| v * p));
                let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                if mean.abs() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
                    return Err(Error::UncenteredSpike { mean });
                }
                let v = neumaier_sum(values.iter().zip(probabilities).map(|(v, p)| v * v * p));
                let sampler = WeightedIndex::new(probabilities)
                    .map_err(|e| invalid(format!("spike table: {e}")))?;
                table = Some((values.clone(), sampler));
                check_var(v)?
            }
        };
        Ok(Self {
            spec,
            variance,
            normal,
            table,
        })
    }

    pub fn gaussian(variance: f64) -> Result<Self> {
        Self::new(SpikeSpec::Gaussian { variance })
    }

    pub fn rademacher(variance: f64) -> Result<Self> {
        Self::new(SpikeSpec::Rademacher { variance })
    }

    pub fn spec(&self) -> &SpikeSpec {
        &self.spec
    }

    /// `σ_x² = 𝔼[X²]`.
    pub fn variance(&self) -> f64 {
        self.variance
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.spec {
            SpikeSpec::Gaussian { .. } => self.normal.as_ref().expect("gaussian").sample(rng),
            SpikeSpec::Rademacher { variance } => {
                let s = variance.sqrt();
                if rng.random::<bool>() {
                    s
                } else {
                    -s
                }
            }
            SpikeSpec::Custom { .. } => {
                let (values, sampler) = self.table.as_ref().expect("table spike carries a sampler");
                values[sampler.sample(rng)]
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Full model
// ---------------------------------------------------------------------------

/// Degree, weight and spike laws of one ensemble.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub degree: DegreeModel,
    pub weight: WeightModel,
    pub spike: SpikeModel,
}

impl Ensemble {
    pub fn new(degree: DegreeModel, weight: WeightModel, spike: SpikeModel) -> Self {
        Self {
            degree,
            weight,
            spike,
        }
    }

    /// Random-regular graph with unit weights and a Gaussian spike.
    pub fn regular_unit(c: usize, spike_variance: f64) -> Result<Self> {
        Ok(Self::new(
            regular(c)?,
            WeightModel::constant(1.0)?,
            SpikeModel::gaussian(spike_variance)?,
        ))
    }

    /// Truncated Poisson graph with unit weights and a Gaussian spike.
    pub fn poisson_unit(c_bar: f64, k_max: usize, spike_variance: f64) -> Result<Self> {
        Ok(Self::new(
            truncated_poisson(c_bar, k_max)?,
            WeightModel::constant(1.0)?,
            SpikeModel::gaussian(spike_variance)?,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::stream;
    use approx::assert_relative_eq;

    #[test]
    fn poisson_two_term_normalisation() {
        let m = truncated_poisson(1.0, 1).unwrap();
        assert_relative_eq!(m.probabilities()[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(m.probabilities()[1], 0.5, epsilon = 1e-15);
        assert_relative_eq!(m.mean(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn poisson_mean_matches_direct_series() {
        // Direct summation of the truncated series, independent of the log-space path.
        let (c, kmax) = (4.0f64, 20usize);
        let mut term = 1.0f64;
        let (mut gamma, mut first) = (0.0f64, 0.0f64);
        for k in 0..=kmax {
            if k > 0 {
                term *= c / k as f64;
            }
            gamma += term;
            first += k as f64 * term;
        }
        let m = truncated_poisson(c, kmax).unwrap();
        assert_relative_eq!(m.mean(), first / gamma, max_relative = 1e-13);
        assert!((m.mean() - 4.0).abs() < 1e-4);
        let total: f64 = m.probabilities().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn poisson_mean_approaches_c_bar() {
        let gaps: Vec<f64> = [6usize, 10, 15, 30]
            .iter()
            .map(|&k| (truncated_poisson(4.0, k).unwrap().mean() - 4.0).abs())
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]));
        assert!(gaps[3] < 1e-12);
    }

    #[test]
    fn large_c_bar_does_not_overflow() {
        let m = truncated_poisson(700.0, 1200).unwrap();
        assert!(m.probabilities().iter().all(|p| p.is_finite()));
        assert!((m.mean() - 700.0).abs() < 1e-6);
    }

    #[test]
    fn regular_is_a_single_atom() {
        let m = regular(4).unwrap();
        assert_eq!(m.mean(), 4.0);
        assert_eq!(m.second_moment(), 16.0);
        let r = m.degree_corrected().unwrap();
        assert_eq!(r[4], 1.0);
        assert!(r.iter().enumerate().all(|(k, v)| k == 4 || *v == 0.0));
    }

    #[test]
    fn size_biasing_two_point_table() {
        let m = table(vec![0.5, 0.5]).unwrap();
        let r = m.degree_corrected().unwrap();
        assert_eq!(r[0], 0.0);
        assert_eq!(r[1], 1.0);
    }

    #[test]
    fn size_biased_poisson_is_normalised() {
        let m = truncated_poisson(4.0, 20).unwrap();
        let r = m.degree_corrected().unwrap();
        assert_eq!(r[0], 0.0);
        assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // r_k ∝ k 4^k / k!, normalised independently.
        let mut w = [0.0f64; 21];
        let mut term = 1.0f64;
        for (k, wk) in w.iter_mut().enumerate().skip(1) {
            term *= 4.0 / k as f64;
            *wk = k as f64 * term;
        }
        let z: f64 = w.iter().sum();
        for k in 0..=20 {
            assert_relative_eq!(r[k], w[k] / z, max_relative = 1e-12, epsilon = 1e-300);
        }
    }

    #[test]
    fn degenerate_model_has_no_size_biased_table() {
        let m = table(vec![1.0]).unwrap();
        assert!(matches!(m.degree_corrected(), Err(Error::DegenerateDistribution)));
    }

    #[test]
    fn regular_sequence_is_constant() {
        let m = regular(4).unwrap();
        let mut rng = stream(1, 0, "t");
        let d = sample_degree_sequence(&m, 100, &mut rng).unwrap();
        assert!(d.iter().all(|&k| k == 4));
        assert_eq!(d.iter().sum::<usize>(), 400);
    }

    #[test]
    fn parity_cannot_be_fixed_when_all_degrees_odd() {
        let m = table(vec![0.0, 1.0]).unwrap();
        let mut rng = stream(1, 0, "t");
        assert!(matches!(
            sample_degree_sequence(&m, 3, &mut rng),
            Err(Error::ParityUnrepairable { parity: "odd", n: 3 })
        ));
        // With an even N the same table is fine.
        let d = sample_degree_sequence(&m, 4, &mut rng).unwrap();
        assert_eq!(d.iter().sum::<usize>(), 4);
    }

    #[test]
    fn parity_repair_triggers_and_succeeds() {
        let m = table(vec![0.0, 0.5, 0.5]).unwrap();
        for seed in 0..50 {
            let mut rng = stream(seed, 0, "t");
            let d = sample_degree_sequence(&m, 3, &mut rng).unwrap();
            assert_eq!(d.iter().sum::<usize>() % 2, 0);
        }
    }

    #[test]
    fn poisson_sequence_mean_within_standard_error() {
        let m = truncated_poisson(4.0, 20).unwrap();
        let mut rng = stream(3, 0, "t");
        let n = 10_000;
        let d = sample_degree_sequence(&m, n, &mut rng).unwrap();
        let mean = d.iter().sum::<usize>() as f64 / n as f64;
        let var = m.second_moment() - m.mean() * m.mean();
        let se = (var / n as f64).sqrt();
        assert!((mean - m.mean()).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn rademacher_scaled_moments() {
        let w = WeightModel::rademacher_scaled(1.0 / 200f64.sqrt()).unwrap();
        assert_relative_eq!(w.second_moment(), 1.0 / 200.0, max_relative = 1e-15);
        assert_eq!(w.mean(), 0.0);
        assert_relative_eq!(w.zeta(), 1.0 / 200f64.sqrt());
    }

    #[test]
    fn constant_weight_is_constant() {
        let w = WeightModel::constant(1.0).unwrap();
        let mut rng = stream(1, 0, "t");
        assert!((0..100).all(|_| w.sample(&mut rng) == 1.0));
        assert!(WeightModel::constant(0.0).is_err());
    }

    #[test]
    fn weight_table_zeta_is_largest_magnitude() {
        let w = WeightSpec::CustomTable {
            values: vec![-3.0, 0.5, 2.0],
            probabilities: vec![0.2, 0.5, 0.3],
        }
        .build()
        .unwrap();
        assert_eq!(w.zeta(), 3.0);
        assert_relative_eq!(w.mean(), -0.6 + 0.25 + 0.6, epsilon = 1e-15);
    }

    #[test]
    fn gaussian_spike_sample_mean() {
        let s = SpikeModel::gaussian(1.0).unwrap();
        let mut rng = stream(9, 0, "t");
        let n = 1_000_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let x = s.sample(&mut rng);
            s1 += x;
            s2 += x * x;
        }
        let mean = s1 / n as f64;
        assert!(mean.abs() < 4e-3, "mean {mean}");
        let m2 = s2 / n as f64;
        // 4 std-err of the second moment of a standard normal: sqrt(2/n).
        assert!((m2 - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn uncentred_spike_is_rejected() {
        let err = SpikeSpec::Custom {
            values: vec![0.0, 1.0],
            probabilities: vec![0.5, 0.5],
        }
        .build()
        .unwrap_err();
        assert!(matches!(err, Error::UncenteredSpike { .. }));
        let ok = SpikeSpec::Custom {
            values: vec![-1.0, 0.0, 1.0],
            probabilities: vec![0.25, 0.5, 0.25],
        }
        .build()
        .unwrap();
        assert_relative_eq!(ok.variance(), 0.5);
    }
}
