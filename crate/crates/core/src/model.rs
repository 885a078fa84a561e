//! Sampling distributions for the observations.
//!
//! Each model exposes its distribution function, the generalized inverse
//! `inf{t : F(t) >= u}`, and the matching upper inverse `sup{t : F(t) <= u}`.
//! Flat CDF stretches and atoms are first-class: the two inverses disagree
//! exactly where the quantile function jumps, which is the regime the trimmed
//! statistics have to survive.

use crate::error::{Error, Result};
use crate::rng::{uniform_open01, SeedSpec};

/// A one-dimensional data distribution with closed-form CDF and inverses.
#[derive(Debug, Clone, PartialEq)]
pub struct DataModel {
    name: String,
    kind: ModelKind,
}

#[derive(Debug, Clone, PartialEq)]
enum ModelKind {
    /// F(t) = t on [0, 1).
    Uniform01,
    /// The piecewise CDF with flat stretches at levels a = alpha^(1/m) and
    /// b = beta^(1/m); support [0, 2]. Built so that the distribution of a
    /// max-of-m kernel has quantile gaps exactly at levels alpha and beta.
    PaperPiecewise { a: f64, b: f64 },
    /// Mass 1/k on each of {1, ..., k}.
    DiscreteUniform { k: u32 },
}

/// Continuity class of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelClass {
    ContinuousAnalytic,
    DiscreteAtomic,
}

/// One linear piece of the CDF with nonzero slope (density piece).
#[derive(Debug, Clone, Copy)]
pub(crate) struct DensitySegment {
    pub lo: f64,
    pub hi: f64,
    pub slope: f64,
}

/// A point mass.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Atom {
    pub x: f64,
    pub mass: f64,
}

impl DataModel {
    pub fn uniform01() -> Self {
        Self { name: "uniform01".into(), kind: ModelKind::Uniform01 }
    }

    pub fn paper_piecewise(alpha: f64, beta: f64, m: u32) -> Result<Self> {
        if !(alpha > 0.0 && alpha < beta && beta < 1.0) {
            return Err(Error::InvalidParam(format!(
                "paper_piecewise requires 0 < alpha < beta < 1, got ({alpha}, {beta})"
            )));
        }
        if m < 1 {
            return Err(Error::InvalidParam("paper_piecewise requires m >= 1".into()));
        }
        Ok(Self {
            name: format!("paper_piecewise({alpha},{beta},{m})"),
            kind: ModelKind::PaperPiecewise { a: mth_root(alpha, m), b: mth_root(beta, m) },
        })
    }

    pub fn discrete_uniform(k: u32) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidParam("discrete_uniform requires k >= 1".into()));
        }
        Ok(Self { name: format!("discrete_uniform({k})"), kind: ModelKind::DiscreteUniform { k } })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn class(&self) -> ModelClass {
        match self.kind {
            ModelKind::Uniform01 | ModelKind::PaperPiecewise { .. } => {
                ModelClass::ContinuousAnalytic
            }
            ModelKind::DiscreteUniform { .. } => ModelClass::DiscreteAtomic,
        }
    }

    /// Closed support interval.
    pub fn support(&self) -> (f64, f64) {
        match self.kind {
            ModelKind::Uniform01 => (0.0, 1.0),
            ModelKind::PaperPiecewise { .. } => (0.0, 2.0),
            ModelKind::DiscreteUniform { k } => (1.0, k as f64),
        }
    }

    /// Right-continuous distribution function.
    pub fn cdf(&self, t: f64) -> f64 {
        match self.kind {
            ModelKind::Uniform01 => {
                if t < 0.0 {
                    0.0
                } else if t < 1.0 {
                    t
                } else {
                    1.0
                }
            }
            ModelKind::PaperPiecewise { a, b } => {
                if t < 0.0 {
                    0.0
                } else if t < 0.5 * a {
                    2.0 * t
                } else if t < a {
                    a
                } else if t < b {
                    t
                } else if t < 2.0 * b {
                    b
                } else if t < 2.0 {
                    0.5 * t
                } else {
                    1.0
                }
            }
            ModelKind::DiscreteUniform { k } => {
                if t < 1.0 {
                    0.0
                } else if t >= k as f64 {
                    1.0
                } else {
                    t.floor() / k as f64
                }
            }
        }
    }

    /// Left limit of the CDF at `t`. Differs from `cdf` only at atoms.
    pub fn cdf_left(&self, t: f64) -> f64 {
        match self.kind {
            ModelKind::Uniform01 | ModelKind::PaperPiecewise { .. } => self.cdf(t),
            ModelKind::DiscreteUniform { k } => {
                if t <= 1.0 {
                    0.0
                } else if t > k as f64 {
                    1.0
                } else {
                    let below = if t.fract() == 0.0 { t - 1.0 } else { t.floor() };
                    below / k as f64
                }
            }
        }
    }

    /// Generalized inverse: `inf{t : F(t) >= u}` for `u` in (0, 1].
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        debug_assert!(u > 0.0 && u <= 1.0, "inverse_cdf level {u} outside (0, 1]");
        match self.kind {
            ModelKind::Uniform01 => u,
            ModelKind::PaperPiecewise { a, b } => {
                if u <= a {
                    0.5 * u
                } else if u <= b {
                    u
                } else {
                    2.0 * u
                }
            }
            ModelKind::DiscreteUniform { k } => {
                let kf = k as f64;
                let mut j = (u * kf).ceil().clamp(1.0, kf);
                // float fix-ups so that j is the smallest integer with j/k >= u
                if j > 1.0 && (j - 1.0) / kf >= u {
                    j -= 1.0;
                }
                if j < kf && j / kf < u {
                    j += 1.0;
                }
                j
            }
        }
    }

    /// Upper inverse: `sup{t : F(t) <= u}` for `u` in (0, 1].
    ///
    /// Flat-piece detection compares `u` against the flat levels exactly, so
    /// callers probing a plateau must pass the level bit-identically (the
    /// population quantile code does).
    pub fn upper_inverse_cdf(&self, u: f64) -> f64 {
        debug_assert!(u > 0.0 && u <= 1.0, "upper_inverse_cdf level {u} outside (0, 1]");
        match self.kind {
            ModelKind::Uniform01 => u.min(1.0),
            ModelKind::PaperPiecewise { a, b } => {
                if u < a {
                    0.5 * u
                } else if u == a {
                    a
                } else if u < b {
                    u
                } else if u == b {
                    2.0 * b
                } else if u < 1.0 {
                    2.0 * u
                } else {
                    2.0
                }
            }
            ModelKind::DiscreteUniform { k } => {
                let kf = k as f64;
                if u >= 1.0 {
                    return kf;
                }
                let mut j = (u * kf).floor();
                // largest integer j with j/k <= u
                if (j + 1.0) / kf <= u {
                    j += 1.0;
                }
                if j / kf > u {
                    j -= 1.0;
                }
                (j + 1.0).min(kf)
            }
        }
    }

    /// `n` i.i.d. draws by inverse-CDF transform, deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: SeedSpec) -> Vec<f64> {
        let mut rng = seed.rng();
        (0..n).map(|_| self.inverse_cdf(uniform_open01(&mut rng))).collect()
    }

    /// Joints of the piecewise CDF, in increasing order (integration grid).
    pub(crate) fn breakpoints(&self) -> Vec<f64> {
        match self.kind {
            ModelKind::Uniform01 => vec![0.0, 1.0],
            ModelKind::PaperPiecewise { a, b } => {
                vec![0.0, 0.5 * a, a, b, 2.0 * b, 2.0]
            }
            ModelKind::DiscreteUniform { k } => (1..=k).map(f64::from).collect(),
        }
    }

    /// Linear CDF pieces with nonzero slope.
    pub(crate) fn density_segments(&self) -> Vec<DensitySegment> {
        match self.kind {
            ModelKind::Uniform01 => {
                vec![DensitySegment { lo: 0.0, hi: 1.0, slope: 1.0 }]
            }
            ModelKind::PaperPiecewise { a, b } => vec![
                DensitySegment { lo: 0.0, hi: 0.5 * a, slope: 2.0 },
                DensitySegment { lo: a, hi: b, slope: 1.0 },
                DensitySegment { lo: 2.0 * b, hi: 2.0, slope: 0.5 },
            ],
            ModelKind::DiscreteUniform { .. } => Vec::new(),
        }
    }

    /// Point masses of the distribution.
    pub(crate) fn atoms(&self) -> Vec<Atom> {
        match self.kind {
            ModelKind::Uniform01 | ModelKind::PaperPiecewise { .. } => Vec::new(),
            ModelKind::DiscreteUniform { k } => {
                let mass = 1.0 / k as f64;
                (1..=k).map(|j| Atom { x: j as f64, mass }).collect()
            }
        }
    }
}

/// Builds a built-in model from its CLI-facing name and parameters.
pub fn builtin_model(name: &str, params: &ModelParams) -> Result<DataModel> {
    match name {
        "uniform01" => Ok(DataModel::uniform01()),
        "paper_piecewise" => {
            let (alpha, beta, m) = match (params.alpha, params.beta, params.m) {
                (Some(a), Some(b), Some(m)) => (a, b, m),
                _ => {
                    return Err(Error::InvalidParam(
                        "paper_piecewise requires alpha, beta and m".into(),
                    ))
                }
            };
            DataModel::paper_piecewise(alpha, beta, m)
        }
        "discrete_uniform" => {
            let k = params
                .k
                .ok_or_else(|| Error::InvalidParam("discrete_uniform requires k".into()))?;
            DataModel::discrete_uniform(k)
        }
        other => Err(Error::UnknownModel(other.into())),
    }
}

/// Optional parameters accepted by [`builtin_model`].
#[derive(Debug, Clone, Copy, Default)]
pub struct ModelParams {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub m: Option<u32>,
    pub k: Option<u32>,
}

/// `x^(1/m)`, routed so every caller gets bit-identical results: plateau
/// levels stored by the piecewise model must match the levels probed by the
/// quantile-bracket code exactly.
pub(crate) fn mth_root(x: f64, m: u32) -> f64 {
    match m {
        1 => x,
        2 => x.sqrt(),
        _ => x.powf(1.0 / m as f64),
    }
}
