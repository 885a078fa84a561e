//! Population quantities for a (model, kernel) pair: the kernel distribution
//! `H_F`, its quantile brackets, the centering functional, the projection
//! functions and their covariance matrix.
//!
//! Two computation routes exist. For the max-of-m and identity kernels the
//! kernel distribution is `F^m`, and every quantity reduces to closed forms
//! or one-dimensional integrals against `dF` / `d(F^p)`, which are piecewise
//! polynomial for the built-in models and integrated exactly. For general
//! kernels the kernel distribution is calibrated empirically and the
//! conditional expectations defining the projections are estimated by nested
//! Monte Carlo; second moments use split-half inner estimates so that the
//! usual O(1/K_inner) product bias drops out.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::empirical::{exact_ceil_index, exact_floor_index};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::model::DataModel;
use crate::quadrature::integrate_piecewise;
use crate::rng::{splitmix, uniform_open01, SeedSpec, STREAMS_CALIBRATION, STREAMS_POPULATION_MC};
use crate::trim::TrimSpec;

/// Smallest and largest population quantiles of `H_F` at one level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileBracket {
    pub gamma: f64,
    /// inf{x : H_F(x) >= gamma}
    pub xi_minus: f64,
    /// sup{x : H_F(x) <= gamma}
    pub xi_plus: f64,
    /// xi_plus - xi_minus; positive exactly when the quantile function jumps.
    pub delta: f64,
    /// H_F(xi_minus)
    pub level_at_minus: f64,
    /// H_F(xi_plus-)
    pub level_before_plus: f64,
}

impl QuantileBracket {
    pub fn new(
        gamma: f64,
        xi_minus: f64,
        xi_plus: f64,
        level_at_minus: f64,
        level_before_plus: f64,
    ) -> Result<Self> {
        if !(xi_minus <= xi_plus) {
            return Err(Error::InvalidArgument(format!(
                "quantile bracket endpoints out of order: {xi_minus} > {xi_plus}"
            )));
        }
        let delta = xi_plus - xi_minus;
        if delta > 0.0
            && ((level_at_minus - gamma).abs() > 1e-9 || (level_before_plus - gamma).abs() > 1e-9)
        {
            return Err(Error::InvalidArgument(format!(
                "gap bracket at level {gamma} must have a flat CDF across it, got H({xi_minus}) = \
                 {level_at_minus}, H({xi_plus}-) = {level_before_plus}"
            )));
        }
        Ok(Self { gamma, xi_minus, xi_plus, delta, level_at_minus, level_before_plus })
    }
}

/// Number of independent kernel draws used to calibrate an empirical `H_F`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalibrationSpec {
    pub draws: usize,
}

pub const MIN_CALIBRATION_DRAWS: usize = 1_000_000;

/// The distribution function of `h(X_1, ..., X_m)`.
#[derive(Debug, Clone)]
pub struct KernelDistribution {
    source: Source,
}

#[derive(Debug, Clone)]
enum Source {
    /// H_F = F^power (max kernel: power = m; identity: power = 1).
    Analytic { model: DataModel, power: u32 },
    /// Sorted independent kernel draws.
    Empirical { sorted: Vec<f64> },
}

/// Builds `H_F` for the pair, analytically when the kernel admits it and
/// otherwise from at least [`MIN_CALIBRATION_DRAWS`] independent draws.
pub fn kernel_distribution(
    model: &DataModel,
    kernel: &Kernel,
    seed: SeedSpec,
    calibration: Option<&CalibrationSpec>,
) -> Result<KernelDistribution> {
    match kernel.name() {
        "max_m" => Ok(KernelDistribution {
            source: Source::Analytic { model: model.clone(), power: kernel.arity() as u32 },
        }),
        "identity" => {
            Ok(KernelDistribution { source: Source::Analytic { model: model.clone(), power: 1 } })
        }
        _ => {
            let spec = calibration.ok_or_else(|| Error::MissingCalibration {
                model: model.name().into(),
                kernel: kernel.name().into(),
            })?;
            if spec.draws < MIN_CALIBRATION_DRAWS {
                return Err(Error::InvalidParam(format!(
                    "calibration needs at least {MIN_CALIBRATION_DRAWS} draws, got {}",
                    spec.draws
                )));
            }
            Ok(KernelDistribution {
                source: Source::Empirical { sorted: draw_kernel_values(model, kernel, spec, seed) },
            })
        }
    }
}

fn draw_kernel_values(
    model: &DataModel,
    kernel: &Kernel,
    spec: &CalibrationSpec,
    seed: SeedSpec,
) -> Vec<f64> {
    const BLOCK: usize = 8192;
    let m = kernel.arity();
    let blocks = spec.draws.div_ceil(BLOCK);
    let mut draws: Vec<f64> = (0..blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = seed.substream(STREAMS_CALIBRATION, b as u64).rng();
            let count = BLOCK.min(spec.draws - b * BLOCK);
            let mut tuple = vec![0.0f64; m];
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                for slot in tuple.iter_mut() {
                    *slot = model.inverse_cdf(uniform_open01(&mut rng));
                }
                out.push(kernel.eval_unchecked(&tuple));
            }
            out
        })
        .collect();
    draws.par_sort_unstable_by(f64::total_cmp);
    draws
}

impl KernelDistribution {
    /// H_F(t).
    pub fn hf(&self, t: f64) -> f64 {
        match &self.source {
            Source::Analytic { model, power } => model.cdf(t).powi(*power as i32),
            Source::Empirical { sorted } => {
                sorted.partition_point(|&h| h <= t) as f64 / sorted.len() as f64
            }
        }
    }

    /// H_F(t-).
    pub fn hf_left(&self, t: f64) -> f64 {
        match &self.source {
            Source::Analytic { model, power } => model.cdf_left(t).powi(*power as i32),
            Source::Empirical { sorted } => {
                sorted.partition_point(|&h| h < t) as f64 / sorted.len() as f64
            }
        }
    }

    fn analytic(&self) -> Option<(&DataModel, u32)> {
        match &self.source {
            Source::Analytic { model, power } => Some((model, *power)),
            Source::Empirical { .. } => None,
        }
    }

    /// The quantile bracket at `gamma`, by closed form (analytic sources) or
    /// order statistics (empirical sources).
    pub fn bracket(&self, gamma: f64) -> Result<QuantileBracket> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::QuantileLevel(gamma));
        }
        match &self.source {
            Source::Analytic { model, power } => {
                // quantiles of F^p at gamma are quantiles of F at gamma^(1/p)
                let u = crate::model::mth_root(gamma, *power);
                let xi_minus = model.inverse_cdf(u);
                let xi_plus = model.upper_inverse_cdf(u);
                QuantileBracket::new(gamma, xi_minus, xi_plus, self.hf(xi_minus), self.hf_left(xi_plus))
            }
            Source::Empirical { sorted } => {
                let m = sorted.len();
                let xi_minus = sorted[exact_ceil_index(gamma, m) - 1];
                let xi_plus = sorted[exact_floor_index(gamma, m).min(m - 1)];
                QuantileBracket::new(
                    gamma,
                    xi_minus,
                    xi_plus,
                    self.hf(xi_minus),
                    self.hf_left(xi_plus),
                )
            }
        }
    }

    /// Bracket search by monotone bisection on the CDF, to absolute
    /// tolerance 1e-12. Closed forms short-circuit this in [`Self::bracket`];
    /// kept as the generic route and as a cross-check of the closed forms.
    pub(crate) fn bracket_bisect(&self, gamma: f64) -> Result<QuantileBracket> {
        let (model, _) = self
            .analytic()
            .ok_or_else(|| Error::InvalidArgument("bisection requires an analytic CDF".into()))?;
        let (lo, hi) = model.support();
        let span = (hi - lo).max(1.0);
        // xi_minus: smallest x with H(x) >= gamma
        let (mut a, mut b) = (lo - span, hi);
        while b - a > 1e-12 {
            let mid = 0.5 * (a + b);
            if self.hf(mid) >= gamma {
                b = mid;
            } else {
                a = mid;
            }
        }
        let xi_minus = b;
        // xi_plus: sup of {x : H(x) <= gamma}
        let (mut a, mut b) = (lo - span, hi + span);
        while b - a > 1e-12 {
            let mid = 0.5 * (a + b);
            if self.hf(mid) <= gamma {
                a = mid;
            } else {
                b = mid;
            }
        }
        let xi_plus = a.max(xi_minus);
        QuantileBracket::new(gamma, xi_minus, xi_plus, self.hf(xi_minus), self.hf_left(xi_plus))
    }
}

/// Operation-style alias for [`KernelDistribution::bracket`].
pub fn pop_quantiles(dist: &KernelDistribution, gamma: f64) -> Result<QuantileBracket> {
    dist.bracket(gamma)
}

/// A point estimate with Monte Carlo standard error (zero when exact).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// The centering functional: the integral of the winsorized-style integrand
/// against `dH_F`, equal to `beta xi_minus_beta - alpha xi_plus_alpha -
/// integral of H_F over [xi_plus_alpha, xi_minus_beta]`.
pub fn theta(
    dist: &KernelDistribution,
    trim: &TrimSpec,
    bracket_alpha: &QuantileBracket,
    bracket_beta: &QuantileBracket,
) -> Estimate {
    let alpha = trim.alpha_f64();
    let beta = trim.beta_f64();
    let xa = bracket_alpha.xi_plus;
    let xb = bracket_beta.xi_minus;
    match &dist.source {
        Source::Analytic { model, power } => {
            let p = *power as i32;
            let integral = integrate_piecewise(
                &|x| model.cdf(x).powi(p),
                xa,
                xb,
                &model.breakpoints(),
            );
            Estimate { value: beta * xb - alpha * xa - integral, std_error: 0.0 }
        }
        Source::Empirical { sorted } => {
            // Monte Carlo average of the defining integrand over the h-draws
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for &h in sorted {
                let a_part = if h <= xb { h - xb } else { 0.0 } + beta * xb;
                let b_part = if h < xa { h - xa } else { 0.0 } + alpha * xa;
                let v = a_part - b_part;
                sum += v;
                sumsq += v * v;
            }
            let k = sorted.len() as f64;
            let mean = sum / k;
            let var = (sumsq / k - mean * mean).max(0.0);
            Estimate { value: mean, std_error: (var / k).sqrt() }
        }
    }
}

/// How the projection functions evaluate their conditional expectations.
#[derive(Debug, Clone, Copy)]
pub enum GMode {
    /// Closed forms; available for the identity and max kernels on built-in
    /// models.
    Analytic,
    /// Nested Monte Carlo with `k_inner` draws of (X_2, ..., X_m) per call.
    NestedMc { k_inner: usize },
}

/// The centered projection functions g_alpha, g, g_beta with their shared
/// context (brackets, centering constants).
pub struct Projections {
    kernel: Kernel,
    model: DataModel,
    pub bracket_alpha: QuantileBracket,
    pub bracket_beta: QuantileBracket,
    pub theta: f64,
    pub theta_alpha: f64,
    pub theta_beta: f64,
    alpha: f64,
    beta: f64,
    mode: Mode,
    bound: f64,
    seed: SeedSpec,
}

enum Mode {
    /// m = 1: the conditional expectations are the integrand itself.
    Exact,
    /// Max kernel with closed-form conditionals; c1 and c3 are the constant
    /// integrals of the centered core term.
    AnalyticMax { c1: f64, c3: f64, pow_alpha: f64, pow_beta: f64 },
    /// Split-half nested Monte Carlo.
    NestedMc { k_inner: usize },
}

/// Builds the projection functions for a population context.
pub fn projections(
    model: &DataModel,
    kernel: &Kernel,
    trim: &TrimSpec,
    dist: &KernelDistribution,
    mode: GMode,
    seed: SeedSpec,
) -> Result<Projections> {
    let bracket_alpha = dist.bracket(trim.alpha_f64())?;
    let bracket_beta = dist.bracket(trim.beta_f64())?;
    let theta_alpha = bracket_alpha.level_before_plus;
    let theta_beta = bracket_beta.level_at_minus;
    let theta_est = theta(dist, trim, &bracket_alpha, &bracket_beta);
    let xa = bracket_alpha.xi_plus;
    let xb = bracket_beta.xi_minus;

    let mode = match mode {
        GMode::Analytic => match kernel.name() {
            "identity" => Mode::Exact,
            "max_m" => {
                let measure = Measure { model };
                let m = kernel.arity() as u32;
                let iv = Interval::closed(xa, xb);
                let c1 = measure.integrate_dfp(1, &|y| y * model.cdf(y).powi(m as i32 - 1), iv, &[]);
                let c3 = measure.integrate_dfp(m - 1, &|y| model.cdf_left(y) * y, iv, &[]);
                Mode::AnalyticMax {
                    c1,
                    c3,
                    pow_alpha: model.cdf_left(xa).powi(m as i32 - 1),
                    pow_beta: model.cdf(xb).powi(m as i32 - 1),
                }
            }
            other => return Err(Error::MissingCalibration {
                model: model.name().into(),
                kernel: other.into(),
            }),
        },
        GMode::NestedMc { k_inner } => {
            if kernel.arity() > 1 && k_inner < 2 {
                return Err(Error::InvalidParam("nested MC requires k_inner >= 2".into()));
            }
            Mode::NestedMc { k_inner }
        }
    };

    Ok(Projections {
        kernel: kernel.clone(),
        model: model.clone(),
        bracket_alpha,
        bracket_beta,
        theta: theta_est.value,
        theta_alpha,
        theta_beta,
        alpha: trim.alpha_f64(),
        beta: trim.beta_f64(),
        mode,
        bound: 4.0 * (xa.abs() + xb.abs()),
        seed,
    })
}

impl Projections {
    pub fn g(&self, x: f64) -> f64 {
        self.g_all(x).1
    }

    pub fn g_alpha(&self, x: f64) -> f64 {
        self.g_all(x).0
    }

    pub fn g_beta(&self, x: f64) -> f64 {
        self.g_all(x).2
    }

    /// (g_alpha(x), g(x), g_beta(x)). Monte Carlo modes draw from a stream
    /// derived from the bits of `x`, so evaluation is pure.
    pub fn g_all(&self, x: f64) -> (f64, f64, f64) {
        let (a, b) = self.g_pair_seeded(x, self.seed.stream(self.seed.stream_id ^ splitmix(x.to_bits())));
        let g = (
            0.5 * (a[0] + b[0]),
            0.5 * (a[1] + b[1]),
            0.5 * (a[2] + b[2]),
        );
        self.assert_bound(g.1);
        g
    }

    /// Two independent estimates of (g_alpha, g, g_beta) at `x` (identical
    /// in analytic modes). Split halves give unbiased second moments.
    fn g_pair_seeded(&self, x: f64, seed: SeedSpec) -> ([f64; 3], [f64; 3]) {
        match &self.mode {
            Mode::Exact => {
                let v = self.kernel.eval_unchecked(&[x]);
                let g = self.g_from_value(v);
                (g, g)
            }
            Mode::AnalyticMax { c1, c3, pow_alpha, pow_beta } => {
                let xa = self.bracket_alpha.xi_plus;
                let xb = self.bracket_beta.xi_minus;
                let m = self.kernel.arity() as u32;
                let g_alpha = if x < xa { pow_alpha - self.theta_alpha } else { -self.theta_alpha };
                let g_beta = if x <= xb { pow_beta - self.theta_beta } else { -self.theta_beta };
                let core = if xa <= x && x <= xb {
                    x * self.model.cdf(x).powi(m as i32 - 1)
                } else {
                    0.0
                };
                let t_of_x = self.tail_integral(x);
                let g_ab = core + t_of_x - c1 - c3;
                let g = g_ab + xa * g_alpha - xb * g_beta;
                let out = [g_alpha, g, g_beta];
                (out, out)
            }
            Mode::NestedMc { k_inner } => {
                let m = self.kernel.arity();
                if m == 1 {
                    let v = self.kernel.eval_unchecked(&[x]);
                    let g = self.g_from_value(v);
                    return (g, g);
                }
                let mut rng = seed.rng();
                let half = k_inner / 2;
                let mut tuple = vec![0.0f64; m];
                tuple[0] = x;
                let mut estimate = |count: usize, rng: &mut rand_chacha::ChaCha8Rng| {
                    let xa = self.bracket_alpha.xi_plus;
                    let xb = self.bracket_beta.xi_minus;
                    let mut core = 0.0;
                    let (mut hits_a, mut hits_b) = (0usize, 0usize);
                    for _ in 0..count {
                        for slot in tuple[1..].iter_mut() {
                            *slot = self.model.inverse_cdf(uniform_open01(rng));
                        }
                        let v = self.kernel.eval_unchecked(&tuple);
                        if v <= xb {
                            core += v - xb;
                            hits_b += 1;
                        }
                        if v < xa {
                            core -= v - xa;
                            hits_a += 1;
                        }
                    }
                    let k = count as f64;
                    [
                        hits_a as f64 / k - self.theta_alpha,
                        core / k + self.beta * xb - self.alpha * xa - self.theta,
                        hits_b as f64 / k - self.theta_beta,
                    ]
                };
                let first = estimate(half, &mut rng);
                let second = estimate(k_inner - half, &mut rng);
                (first, second)
            }
        }
    }

    /// m = 1 projections from the kernel value itself.
    fn g_from_value(&self, v: f64) -> [f64; 3] {
        let xa = self.bracket_alpha.xi_plus;
        let xb = self.bracket_beta.xi_minus;
        let g_alpha = if v < xa { 1.0 - self.theta_alpha } else { -self.theta_alpha };
        let g_beta = if v <= xb { 1.0 - self.theta_beta } else { -self.theta_beta };
        let a_part = if v <= xb { v - xb } else { 0.0 } + self.beta * xb;
        let b_part = if v < xa { v - xa } else { 0.0 } + self.alpha * xa;
        [g_alpha, a_part - b_part - self.theta, g_beta]
    }

    /// T(x) = integral of I{y > x} y over [xi_plus_alpha, xi_minus_beta]
    /// against d(F^(m-1)).
    fn tail_integral(&self, x: f64) -> f64 {
        let xa = self.bracket_alpha.xi_plus;
        let xb = self.bracket_beta.xi_minus;
        if x >= xb {
            return 0.0;
        }
        let m = self.kernel.arity() as u32;
        let iv = if x < xa {
            Interval::closed(xa, xb)
        } else {
            Interval { lo: x, lo_incl: false, hi: xb, hi_incl: true }
        };
        Measure { model: &self.model }.integrate_dfp(m - 1, &|y| y, iv, &[])
    }

    fn assert_bound(&self, g: f64) {
        assert!(
            g.abs() <= self.bound + 1e-9 * (1.0 + self.bound),
            "|g| = {} exceeds the bound 4(|xi_plus_alpha| + |xi_minus_beta|) = {}",
            g.abs(),
            self.bound
        );
    }

    pub fn model(&self) -> &DataModel {
        &self.model
    }
}

/// A covariance matrix estimate for (g_alpha, g, g_beta), row-major, with
/// entrywise standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovMatrix {
    pub matrix: [f64; 9],
    pub std_errors: [f64; 9],
}

impl CovMatrix {
    pub fn as_3x3(&self) -> [[f64; 3]; 3] {
        let m = &self.matrix;
        [[m[0], m[1], m[2]], [m[3], m[4], m[5]], [m[6], m[7], m[8]]]
    }

    pub fn sigma_g_sq(&self) -> f64 {
        self.matrix[4]
    }
}

/// Second moments by exact integration against dF (analytic projections on
/// built-in models).
pub fn covariance_analytic(proj: &Projections) -> Result<CovMatrix> {
    if matches!(proj.mode, Mode::NestedMc { .. }) {
        return Err(Error::InvalidArgument(
            "analytic covariance needs analytic projections".into(),
        ));
    }
    let measure = Measure { model: &proj.model };
    let (lo, hi) = proj.model.support();
    let iv = Interval::closed(lo, hi);
    let mut breaks = proj.model.breakpoints();
    breaks.push(proj.bracket_alpha.xi_plus);
    breaks.push(proj.bracket_beta.xi_minus);
    let mut matrix = [0.0; 9];
    for i in 0..3 {
        for j in i..3 {
            let value = measure.integrate_dfp(
                1,
                &|x| {
                    let g = proj.g_all(x);
                    let g = [g.0, g.1, g.2];
                    g[i] * g[j]
                },
                iv,
                &breaks,
            );
            matrix[3 * i + j] = value;
            matrix[3 * j + i] = value;
        }
    }
    Ok(CovMatrix { matrix, std_errors: [0.0; 9] })
}

/// Second moments by Monte Carlo over `k_outer` draws of X. Inner
/// conditional expectations come from the projection mode; products pair the
/// two split-half estimates, so inner noise does not bias them.
pub fn covariance_mc(proj: &Projections, k_outer: usize, seed: SeedSpec) -> CovMatrix {
    let xs = proj.model.sample(k_outer, seed.substream(STREAMS_POPULATION_MC, 0));
    let pairs: Vec<([f64; 3], [f64; 3])> = xs
        .par_iter()
        .enumerate()
        .map(|(j, &x)| proj.g_pair_seeded(x, seed.substream(STREAMS_POPULATION_MC, 1 + j as u64)))
        .collect();
    let mut sums = [0.0f64; 9];
    let mut sums_sq = [0.0f64; 9];
    for (u, v) in &pairs {
        for i in 0..3 {
            for j in 0..3 {
                let prod = 0.5 * (u[i] * v[j] + u[j] * v[i]);
                sums[3 * i + j] += prod;
                sums_sq[3 * i + j] += prod * prod;
            }
        }
    }
    let k = k_outer as f64;
    let mut matrix = [0.0; 9];
    let mut std_errors = [0.0; 9];
    for e in 0..9 {
        let mean = sums[e] / k;
        let var = (sums_sq[e] / k - mean * mean).max(0.0);
        matrix[e] = mean;
        std_errors[e] = (var / k).sqrt();
    }
    CovMatrix { matrix, std_errors }
}

/// How a population summary was computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SummaryMethod {
    #[serde(rename = "analytic")]
    Analytic,
    #[serde(rename = "monte-carlo")]
    MonteCarlo { k_outer: usize, k_inner: usize },
}

/// Method echo carried inside the emitted summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MethodTag {
    #[serde(rename = "analytic")]
    Analytic,
    #[serde(rename = "monte-carlo")]
    MonteCarlo { k_outer: usize, k_inner: usize, root_seed: u64, stream_id: u64 },
}

/// Monte Carlo standard errors of the summary fields (zero when exact).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardErrors {
    pub theta: f64,
    pub cov: [f64; 9],
}

/// Everything the limit law and the experiment need about the population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSummary {
    pub theta: f64,
    pub theta_alpha: f64,
    pub theta_beta: f64,
    /// Row-major second-moment matrix of (g_alpha, g, g_beta).
    pub cov: [f64; 9],
    pub xi_minus_alpha: f64,
    pub xi_plus_alpha: f64,
    pub xi_minus_beta: f64,
    pub xi_plus_beta: f64,
    pub delta_alpha: f64,
    pub delta_beta: f64,
    pub method: MethodTag,
    pub standard_errors: StandardErrors,
}

impl PopulationSummary {
    pub fn sigma_g_sq(&self) -> f64 {
        self.cov[4]
    }

    pub fn cov_3x3(&self) -> [[f64; 3]; 3] {
        let m = &self.cov;
        [[m[0], m[1], m[2]], [m[3], m[4], m[5]], [m[6], m[7], m[8]]]
    }

    pub fn bracket_alpha(&self) -> QuantileBracket {
        QuantileBracket {
            gamma: f64::NAN,
            xi_minus: self.xi_minus_alpha,
            xi_plus: self.xi_plus_alpha,
            delta: self.delta_alpha,
            level_at_minus: f64::NAN,
            level_before_plus: self.theta_alpha,
        }
    }

    pub fn bracket_beta(&self) -> QuantileBracket {
        QuantileBracket {
            gamma: f64::NAN,
            xi_minus: self.xi_minus_beta,
            xi_plus: self.xi_plus_beta,
            delta: self.delta_beta,
            level_at_minus: self.theta_beta,
            level_before_plus: f64::NAN,
        }
    }
}

/// Computes the full population summary for (model, kernel, trim).
///
/// Returns the summary plus any degeneracy warnings. The Monte Carlo method
/// reuses analytic brackets and centering when the kernel admits them and
/// estimates only the projections by nested MC; otherwise everything rests
/// on the calibrated empirical `H_F`.
pub fn population_summary(
    model: &DataModel,
    kernel: &Kernel,
    trim: &TrimSpec,
    method: SummaryMethod,
    seed: SeedSpec,
    calibration: Option<&CalibrationSpec>,
) -> Result<(PopulationSummary, Vec<String>)> {
    let dist = kernel_distribution(model, kernel, seed, calibration)?;
    let (gmode, tag) = match method {
        SummaryMethod::Analytic => (GMode::Analytic, MethodTag::Analytic),
        SummaryMethod::MonteCarlo { k_outer, k_inner } => (
            GMode::NestedMc { k_inner },
            MethodTag::MonteCarlo {
                k_outer,
                k_inner,
                root_seed: seed.root_seed,
                stream_id: seed.stream_id,
            },
        ),
    };
    let proj = projections(model, kernel, trim, &dist, gmode, seed)?;
    let theta_est = theta(&dist, trim, &proj.bracket_alpha, &proj.bracket_beta);
    let cov = match method {
        SummaryMethod::Analytic => covariance_analytic(&proj)?,
        SummaryMethod::MonteCarlo { k_outer, .. } => covariance_mc(&proj, k_outer, seed),
    };

    let mut warnings = Vec::new();
    let sigma_g_sq = cov.sigma_g_sq();
    let sigma_g_se = cov.std_errors[4];
    if sigma_g_sq <= 4.0 * sigma_g_se {
        warnings.push(format!(
            "sigma_g^2 = {sigma_g_sq:.3e} (se {sigma_g_se:.3e}) is degenerate; the limit theorem \
             requires sigma_g^2 > 0"
        ));
    }

    let summary = PopulationSummary {
        theta: theta_est.value,
        theta_alpha: proj.theta_alpha,
        theta_beta: proj.theta_beta,
        cov: cov.matrix,
        xi_minus_alpha: proj.bracket_alpha.xi_minus,
        xi_plus_alpha: proj.bracket_alpha.xi_plus,
        xi_minus_beta: proj.bracket_beta.xi_minus,
        xi_plus_beta: proj.bracket_beta.xi_plus,
        delta_alpha: proj.bracket_alpha.delta,
        delta_beta: proj.bracket_beta.delta,
        method: tag,
        standard_errors: StandardErrors { theta: theta_est.std_error, cov: cov.std_errors },
    };
    Ok((summary, warnings))
}

// ---------------------------------------------------------------------------
// Stieltjes integration against dF and d(F^p)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct Interval {
    lo: f64,
    lo_incl: bool,
    hi: f64,
    hi_incl: bool,
}

impl Interval {
    fn closed(lo: f64, hi: f64) -> Self {
        Self { lo, lo_incl: true, hi, hi_incl: true }
    }

    fn contains(&self, x: f64) -> bool {
        (x > self.lo || (self.lo_incl && x == self.lo))
            && (x < self.hi || (self.hi_incl && x == self.hi))
    }
}

struct Measure<'a> {
    model: &'a DataModel,
}

impl Measure<'_> {
    /// Integral of `phi` against `d(F^p)` over the interval: density pieces
    /// contribute `p F^(p-1) F'`, atoms contribute the jump of `F^p`.
    /// Endpoint inclusivity matters only at atoms.
    fn integrate_dfp(&self, p: u32, phi: &dyn Fn(f64) -> f64, iv: Interval, breaks: &[f64]) -> f64 {
        debug_assert!(p >= 1);
        let mut acc = 0.0;
        if iv.hi < iv.lo {
            return 0.0;
        }
        for seg in self.model.density_segments() {
            let lo = seg.lo.max(iv.lo);
            let hi = seg.hi.min(iv.hi);
            if hi > lo {
                let model = self.model;
                let weighted = |y: f64| {
                    phi(y) * p as f64 * model.cdf(y).powi(p as i32 - 1) * seg.slope
                };
                acc += integrate_piecewise(&weighted, lo, hi, breaks);
            }
        }
        for atom in self.model.atoms() {
            if iv.contains(atom.x) {
                let jump = self.model.cdf(atom.x).powi(p as i32)
                    - self.model.cdf_left(atom.x).powi(p as i32);
                acc += phi(atom.x) * jump;
            }
        }
        acc
    }
}
