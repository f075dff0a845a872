//! Kernel density estimation over achieved goals.
//!
//! Samples are z-scored per dimension before fitting, and every density is
//! reported in that normalized space (no Jacobian correction). Ranking
//! candidates, entropy traces and the KL used for OMEGA's `α` all compare
//! densities under one normalization, so the constant offset cancels.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

/// Lower clamp on per-dimension standard deviations.
pub const SIGMA_MIN: f64 = 1e-6;
/// At most this many points are kept per fit.
pub const FIT_SAMPLE_CAP: usize = 10_000;
/// Upper clamp for KL estimates; stands in for an infinite divergence.
pub const KL_MAX: f64 = 50.0;
pub const DEFAULT_BANDWIDTH: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum DensityError {
    #[error("cannot fit a density model to an empty sample set")]
    EmptySamples,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("non-finite coordinate in density query")]
    NonFinite,
    #[error("entropy estimate needs at least one evaluation sample")]
    EmptyEvalSet,
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
    #[error("KL estimate needs at least one sample")]
    NoKlSamples,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Kernel {
    #[default]
    Gaussian,
    Exponential,
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Gaussian => write!(f, "gaussian"),
            Kernel::Exponential => write!(f, "exponential"),
        }
    }
}

impl FromStr for Kernel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Kernel::Gaussian),
            "exponential" => Ok(Kernel::Exponential),
            other => Err(format!("unknown kernel '{other}'")),
        }
    }
}

/// `ln Γ(k/2)` for integer `k ≥ 1`.
fn ln_gamma_half(k: usize) -> f64 {
    let (mut x, mut acc) = if k % 2 == 0 {
        (1.0, 0.0)
    } else {
        (0.5, 0.5 * PI.ln())
    };
    while 2.0 * x < k as f64 {
        acc += x.ln();
        x += 1.0;
    }
    acc
}

impl Kernel {
    /// Log of the kernel's normalizing constant in `dim` dimensions at bandwidth `h`.
    fn log_norm(self, dim: usize, h: f64) -> f64 {
        let d = dim as f64;
        match self {
            Kernel::Gaussian => -0.5 * d * (2.0 * PI * h * h).ln(),
            Kernel::Exponential => {
                // ∫ exp(-|x|) dx over R^d = 2 π^{d/2} Γ(d) / Γ(d/2)
                let log_cd = 2f64.ln() + 0.5 * d * PI.ln() + ln_gamma_half(2 * dim)
                    - ln_gamma_half(dim);
                -(log_cd + d * h.ln())
            }
        }
    }

    fn log_profile(self, sq_dist: f64, h: f64) -> f64 {
        match self {
            Kernel::Gaussian => -sq_dist / (2.0 * h * h),
            Kernel::Exponential => -sq_dist.sqrt() / h,
        }
    }
}

/// A fitted kernel density estimator.
///
/// Identical normalized points are stored once with a multiplicity, which is
/// exact for the mixture and makes discrete goal spaces cheap to query.
#[derive(Debug, Clone)]
pub struct DensityModel {
    bandwidth: f64,
    kernel: Kernel,
    norm_mean: Vec<f64>,
    norm_std: Vec<f64>,
    points: Vec<f64>,
    log_weights: Vec<f64>,
    multiplicity: Vec<usize>,
    n_fitted: usize,
    log_const: f64,
}

fn check_bandwidth(bandwidth: f64) -> Result<(), DensityError> {
    if bandwidth.is_finite() && bandwidth > 0.0 {
        Ok(())
    } else {
        Err(DensityError::InvalidBandwidth(bandwidth))
    }
}

fn check_shape<S: AsRef<[f64]>>(samples: &[S]) -> Result<usize, DensityError> {
    let dim = samples.first().ok_or(DensityError::EmptySamples)?.as_ref().len();
    for s in samples {
        if s.as_ref().len() != dim {
            return Err(DensityError::ShapeMismatch {
                expected: dim,
                found: s.as_ref().len(),
            });
        }
    }
    Ok(dim)
}

/// Fits a KDE to `samples`.
///
/// The normalization statistics are the per-dimension mean and population
/// standard deviation of all samples (std clamped to [`SIGMA_MIN`]). When there
/// are more than [`FIT_SAMPLE_CAP`] samples, a uniform subset of that size is
/// kept as kernel centres.
pub fn fit_kde<S: AsRef<[f64]>, R: Rng + ?Sized>(
    samples: &[S],
    bandwidth: f64,
    kernel: Kernel,
    rng: &mut R,
) -> Result<DensityModel, DensityError> {
    check_bandwidth(bandwidth)?;
    let dim = check_shape(samples)?;
    let n = samples.len() as f64;

    let mut mean = vec![0.0; dim];
    for s in samples {
        for (m, x) in mean.iter_mut().zip(s.as_ref()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut std = vec![0.0; dim];
    for s in samples {
        for ((v, x), m) in std.iter_mut().zip(s.as_ref()).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    std.iter_mut()
        .for_each(|v| *v = (*v / n).sqrt().max(SIGMA_MIN));

    let chosen: Vec<&[f64]> = if samples.len() > FIT_SAMPLE_CAP {
        rand::seq::index::sample(rng, samples.len(), FIT_SAMPLE_CAP)
            .into_iter()
            .map(|i| samples[i].as_ref())
            .collect()
    } else {
        samples.iter().map(|s| s.as_ref()).collect()
    };
    let normalized: Vec<Vec<f64>> = chosen
        .iter()
        .map(|s| {
            s.iter()
                .zip(&mean)
                .zip(&std)
                .map(|((x, m), sd)| (x - m) / sd)
                .collect()
        })
        .collect();
    Ok(DensityModel::build(normalized, mean, std, bandwidth, kernel))
}

/// Convenience wrapper: fits to the coordinates of a goal list.
pub fn fit_kde_goals<G: crate::goal::Goal, R: Rng + ?Sized>(
    goals: &[G],
    bandwidth: f64,
    kernel: Kernel,
    rng: &mut R,
) -> Result<DensityModel, DensityError> {
    let coords: Vec<Vec<f64>> = goals.iter().map(|g| g.coords()).collect();
    fit_kde(&coords, bandwidth, kernel, rng)
}

fn cmp_points(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

impl DensityModel {
    /// Builds a model whose points are already normalized (identity
    /// normalization: mean 0, std 1).
    pub fn from_normalized<S: AsRef<[f64]>>(
        points: &[S],
        bandwidth: f64,
        kernel: Kernel,
    ) -> Result<Self, DensityError> {
        check_bandwidth(bandwidth)?;
        let dim = check_shape(points)?;
        let pts = points.iter().map(|p| p.as_ref().to_vec()).collect();
        Ok(Self::build(pts, vec![0.0; dim], vec![1.0; dim], bandwidth, kernel))
    }

    fn build(
        mut normalized: Vec<Vec<f64>>,
        norm_mean: Vec<f64>,
        norm_std: Vec<f64>,
        bandwidth: f64,
        kernel: Kernel,
    ) -> Self {
        let dim = norm_mean.len();
        let n_fitted = normalized.len();
        normalized.sort_by(|a, b| cmp_points(a, b));
        let mut points = Vec::new();
        let mut multiplicity: Vec<usize> = Vec::new();
        let mut last: Option<&Vec<f64>> = None;
        for p in &normalized {
            if last.is_some_and(|l| cmp_points(l, p).is_eq()) {
                *multiplicity.last_mut().unwrap() += 1;
            } else {
                points.extend_from_slice(p);
                multiplicity.push(1);
                last = Some(p);
            }
        }
        let log_weights = multiplicity.iter().map(|&m| (m as f64).ln()).collect();
        let log_const = kernel.log_norm(dim, bandwidth) - (n_fitted as f64).ln();
        Self {
            bandwidth,
            kernel,
            norm_mean,
            norm_std,
            points,
            log_weights,
            multiplicity,
            n_fitted,
            log_const,
        }
    }

    pub fn dim(&self) -> usize {
        self.norm_mean.len()
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn norm_mean(&self) -> &[f64] {
        &self.norm_mean
    }

    pub fn norm_std(&self) -> &[f64] {
        &self.norm_std
    }

    /// Number of kernel centres, counting repeats.
    pub fn fitted_count(&self) -> usize {
        self.n_fitted
    }

    /// Number of distinct kernel centres.
    pub fn distinct_count(&self) -> usize {
        self.multiplicity.len()
    }

    /// All kernel centres with repeats, in sorted order.
    pub fn fitted_points(&self) -> Vec<Vec<f64>> {
        let dim = self.dim().max(1);
        self.points
            .chunks(dim)
            .zip(&self.multiplicity)
            .flat_map(|(p, &m)| std::iter::repeat_n(p.to_vec(), m))
            .collect()
    }

    /// z-scores a raw goal vector with the model's statistics.
    pub fn normalize(&self, point: &[f64]) -> Result<Vec<f64>, DensityError> {
        if point.len() != self.dim() {
            return Err(DensityError::ShapeMismatch {
                expected: self.dim(),
                found: point.len(),
            });
        }
        if point.iter().any(|x| !x.is_finite()) {
            return Err(DensityError::NonFinite);
        }
        Ok(point
            .iter()
            .zip(&self.norm_mean)
            .zip(&self.norm_std)
            .map(|((x, m), s)| (x - m) / s)
            .collect())
    }

    /// Log-density (nats, normalized space) of a raw goal vector.
    pub fn log_density(&self, point: &[f64]) -> Result<f64, DensityError> {
        let z = self.normalize(point)?;
        Ok(self.log_density_normalized(&z))
    }

    /// Log-density of a point that is already in normalized coordinates.
    pub fn log_density_normalized(&self, z: &[f64]) -> f64 {
        let dim = self.dim();
        // online log-sum-exp
        let mut max = f64::NEG_INFINITY;
        let mut acc = 0.0;
        for (j, lw) in self.log_weights.iter().enumerate() {
            let centre = &self.points[j * dim..(j + 1) * dim];
            let sq: f64 = centre.iter().zip(z).map(|(c, x)| (x - c) * (x - c)).sum();
            let t = lw + self.kernel.log_profile(sq, self.bandwidth);
            if t > max {
                acc = acc * (max - t).exp() + 1.0;
                max = t;
            } else {
                acc += (t - max).exp();
            }
        }
        self.log_const + max + acc.ln()
    }
}

/// Monte-Carlo plug-in entropy: the negative mean log-density of `eval_samples`.
///
/// Log-densities are summed in sorted order so the result does not depend on
/// the order of the samples.
pub fn estimate_entropy<S: AsRef<[f64]>>(
    model: &DensityModel,
    eval_samples: &[S],
) -> Result<f64, DensityError> {
    if eval_samples.is_empty() {
        return Err(DensityError::EmptyEvalSet);
    }
    let mut logs = eval_samples
        .iter()
        .map(|s| model.log_density(s.as_ref()))
        .collect::<Result<Vec<_>, _>>()?;
    logs.sort_by(f64::total_cmp);
    Ok(-logs.iter().sum::<f64>() / logs.len() as f64)
}

/// Monte-Carlo estimate of `D_KL(p_dg || p̂_ag)`, clamped to `[0, KL_MAX]`.
///
/// `desired_log_density` must be expressed in the same normalized space as
/// `ag_model` (i.e. include the model's normalization).
pub fn estimate_kl<R, F, L>(
    ag_model: &DensityModel,
    mut desired_sampler: F,
    desired_log_density: L,
    n_samples: usize,
    rng: &mut R,
) -> Result<f64, DensityError>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> Vec<f64>,
    L: Fn(&[f64]) -> f64,
{
    if n_samples == 0 {
        return Err(DensityError::NoKlSamples);
    }
    let mut total = 0.0;
    for _ in 0..n_samples {
        let g = desired_sampler(rng);
        total += desired_log_density(&g) - ag_model.log_density(&g)?;
    }
    let kl = total / n_samples as f64;
    Ok(if kl.is_nan() { KL_MAX } else { kl.clamp(0.0, KL_MAX) })
}
