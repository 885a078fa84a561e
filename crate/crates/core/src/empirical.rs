//! Kernel-value enumeration, the empirical distribution of U-statistical
//! structure, and the trimmed statistics.
//!
//! All definitions work on the nondecreasing kernel values `h_(1) <= ... <=
//! h_(N)`, `N = C(n, m)`. Ties are ordinary: every operation is expressed
//! through value comparisons (`<`, `<=`) or exact floor/ceil counts, so tie
//! order cannot change any output. The index-form representation of the
//! generalized L-statistic (`L_ab = N^-1 * sum of h_(i), i = Nbar_a ..
//! Nbar_b - 1`) is the implementation; it coincides with the truncated
//! integral of `x dH_n` whenever the truncation points are untied, and stays
//! well defined when they are not.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::population::QuantileBracket;
use crate::trim::TrimSpec;

/// Sorted kernel evaluations over all strictly increasing index m-tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelValues {
    n: usize,
    m: usize,
    sorted: Vec<f64>,
}

impl KernelValues {
    /// Wraps already-sorted values (test fixtures, calibration runs).
    ///
    /// `sorted` must be nondecreasing and of length `C(n, m)`.
    pub fn from_sorted(n: usize, m: usize, sorted: Vec<f64>) -> Result<Self> {
        if n < m || m == 0 {
            return Err(Error::SampleTooSmall { n, m });
        }
        if sorted.len() != binomial(n, m) {
            return Err(Error::InvalidArgument(format!(
                "expected C({n}, {m}) = {} values, got {}",
                binomial(n, m),
                sorted.len()
            )));
        }
        if sorted.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::InvalidArgument("values not nondecreasing".into()));
        }
        Ok(Self { n, m, sorted })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// N = C(n, m).
    pub fn count(&self) -> usize {
        self.sorted.len()
    }

    /// The ordered values h_(1) <= ... <= h_(N).
    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }
}

/// Exact binomial coefficient; panics on overflow (desk scale only).
pub fn binomial(n: usize, m: usize) -> usize {
    if m > n {
        return 0;
    }
    let m = m.min(n - m);
    let mut result: usize = 1;
    for i in 1..=m {
        // numerator grows in lockstep so each division is exact
        result = result
            .checked_mul(n - (m - i))
            .expect("binomial coefficient overflow") / i;
    }
    result
}

/// Evaluates the kernel at every strictly increasing index m-tuple and sorts.
pub fn enumerate(sample: &[f64], kernel: &Kernel) -> Result<KernelValues> {
    let n = sample.len();
    let m = kernel.arity();
    if n < m {
        return Err(Error::SampleTooSmall { n, m });
    }
    let mut values = Vec::with_capacity(binomial(n, m));
    let mut idx: Vec<usize> = (0..m).collect();
    let mut buf = vec![0.0f64; m];
    loop {
        for (slot, &i) in buf.iter_mut().zip(&idx) {
            *slot = sample[i];
        }
        values.push(kernel.eval_unchecked(&buf));
        if !next_combination(&mut idx, n) {
            break;
        }
    }
    if values.len() >= 1 << 16 {
        values.par_sort_unstable_by(f64::total_cmp);
    } else {
        values.sort_unstable_by(f64::total_cmp);
    }
    Ok(KernelValues { n, m, sorted: values })
}

/// Advances `idx` to the next strictly increasing m-tuple below `n`.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let m = idx.len();
    let mut pos = m;
    while pos > 0 {
        pos -= 1;
        if idx[pos] < n - m + pos {
            idx[pos] += 1;
            for j in pos + 1..m {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Empirical CDF `H_n(y) = N^-1 #{i : h_i <= y}`; right-continuous.
pub fn ecdf(values: &KernelValues, y: f64) -> f64 {
    let below = values.sorted.partition_point(|&h| h <= y);
    below as f64 / values.count() as f64
}

/// Left limit `H_n(y-) = N^-1 #{i : h_i < y}`.
pub fn ecdf_left(values: &KernelValues, y: f64) -> f64 {
    let below = values.sorted.partition_point(|&h| h < y);
    below as f64 / values.count() as f64
}

/// Empirical quantile function: `h_(i)` with `i = ceil(t * N)` for `t > 0`,
/// and `h_(1)` at `t = 0`.
///
/// The index is computed on the exact binary value of `t`, so
/// `equantile(gamma) == h_(Nbar_gamma)` holds for every representable level.
pub fn equantile(values: &KernelValues, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::QuantileLevel(t));
    }
    let i = exact_ceil_index(t, values.count());
    Ok(values.sorted[i - 1])
}

/// Smallest index `i >= 1` with `i >= t * N`, exact in the value of `t`.
pub(crate) fn exact_ceil_index(t: f64, n_values: usize) -> usize {
    if t <= 0.0 {
        return 1;
    }
    if t >= 1.0 {
        return n_values;
    }
    match exact_fraction(t) {
        Some((num, den)) => ((num * n_values as u128 + den - 1) / den) as usize,
        // t < 2^-57 and N < 2^57, so t * N < 1
        None => 1,
    }
}

/// `floor(t * N)`, exact in the value of `t` in [0, 1).
pub(crate) fn exact_floor_index(t: f64, n_values: usize) -> usize {
    if t <= 0.0 {
        return 0;
    }
    match exact_fraction(t) {
        Some((num, den)) => (num * n_values as u128 / den) as usize,
        None => 0,
    }
}

/// `t` in (0, 1) as an exact `num / 2^k` pair, or `None` when the exponent
/// is too small to matter at any supported N.
fn exact_fraction(t: f64) -> Option<(u128, u128)> {
    let bits = t.to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (num, shift) = if raw_exp == 0 {
        (frac as u128, 1074i64)
    } else {
        ((frac | (1u64 << 52)) as u128, 1075 - raw_exp)
    };
    if shift > 110 {
        return None;
    }
    Some((num, 1u128 << shift))
}

/// `U = N^-1 sum h_(i)`.
pub fn u_statistic(values: &KernelValues) -> f64 {
    values.sorted.iter().sum::<f64>() / values.count() as f64
}

/// Floor/ceiling trim counts at both levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrimCounts {
    /// N_alpha = floor(alpha * N)
    pub n_alpha: usize,
    /// N_beta = floor(beta * N)
    pub n_beta: usize,
    /// Nbar_alpha = ceil(alpha * N)
    pub nbar_alpha: usize,
    /// Nbar_beta = ceil(beta * N)
    pub nbar_beta: usize,
    /// N_alphabeta = N_beta - N_alpha
    pub n_alphabeta: usize,
}

impl TrimCounts {
    /// Exact counts for `n_values` kernel values. Never fails; a zero
    /// `n_alphabeta` is reported by [`trim_counts`] instead.
    pub fn compute(trim: &TrimSpec, n_values: usize) -> Self {
        let n_alpha = trim.alpha().floor_mul(n_values);
        let n_beta = trim.beta().floor_mul(n_values);
        Self {
            n_alpha,
            n_beta,
            nbar_alpha: trim.alpha().ceil_mul(n_values),
            nbar_beta: trim.beta().ceil_mul(n_values),
            n_alphabeta: n_beta - n_alpha,
        }
    }
}

/// Trim counts for a value set, rejecting the degenerate case
/// `N_beta == N_alpha` (the rank-trimmed mean would divide by zero).
pub fn trim_counts(values: &KernelValues, trim: &TrimSpec) -> Result<TrimCounts> {
    let counts = TrimCounts::compute(trim, values.count());
    if counts.n_alphabeta == 0 {
        return Err(Error::DegenerateTrim {
            n_values: values.count(),
            n_alpha: counts.n_alpha,
        });
    }
    Ok(counts)
}

/// Strict and inclusive counts at a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThresholdCounts {
    /// #{i : h_i < xi}
    pub strictly_below: usize,
    /// #{i : h_i <= xi}
    pub at_or_below: usize,
}

pub fn threshold_counts(values: &KernelValues, xi: f64) -> ThresholdCounts {
    ThresholdCounts {
        strictly_below: values.sorted.partition_point(|&h| h < xi),
        at_or_below: values.sorted.partition_point(|&h| h <= xi),
    }
}

/// Rank-trimmed U-statistic: mean of `h_(i)` for `i = N_alpha + 1 .. N_beta`.
pub fn trimmed_u(values: &KernelValues, trim: &TrimSpec) -> Result<f64> {
    let counts = trim_counts(values, trim)?;
    let slice = &values.sorted[counts.n_alpha..counts.n_beta];
    Ok(slice.iter().sum::<f64>() / counts.n_alphabeta as f64)
}

/// Generalized L-statistic: `N^-1 sum of h_(i)` for
/// `i = Nbar_alpha .. Nbar_beta - 1`.
///
/// This is the integral of `x` over `[h_(Nbar_alpha), h_(Nbar_beta))`
/// against `dH_n` expressed through order-statistic ranks; an empty rank
/// range yields 0.
pub fn trimmed_l(values: &KernelValues, trim: &TrimSpec) -> f64 {
    let counts = TrimCounts::compute(trim, values.count());
    let slice = &values.sorted[counts.nbar_alpha - 1..counts.nbar_beta - 1];
    slice.iter().sum::<f64>() / values.count() as f64
}

/// Sum of the trimmed block `h_(i)`, `i = N_alpha + 1 .. N_beta` (the left
/// side of the exact decomposition below).
pub fn trimmed_block_sum(values: &KernelValues, trim: &TrimSpec) -> f64 {
    let counts = TrimCounts::compute(trim, values.count());
    values.sorted[counts.n_alpha..counts.n_beta].iter().sum()
}

/// The exact finite-sample decomposition of the trimmed block sum into a
/// bounded-core sum, count terms at the quantile brackets, quantile-gap
/// corrections, and the boundary remainders `L_alpha`, `L_beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    /// sum_i I{xi_plus_alpha <= h_i <= xi_minus_beta} h_i
    pub core_sum: f64,
    /// xi_plus_alpha * (Ndot_plus_alpha - N_alpha)
    pub alpha_count_term: f64,
    /// xi_minus_beta * (Nminus_beta - N_beta)
    pub beta_count_term: f64,
    /// delta_alpha * I{N_alpha < Ndot_plus_alpha} * (Ndot_plus_alpha - N_alpha)
    pub alpha_gap_term: f64,
    /// delta_beta * I{Nminus_beta < N_beta} * (Nminus_beta - N_beta)
    pub beta_gap_term: f64,
    /// L_alpha = j_alpha - jbar_alpha
    pub l_alpha: f64,
    /// L_beta = jbar_beta - j_beta
    pub l_beta: f64,
    pub j_alpha: f64,
    pub jbar_alpha: f64,
    pub j_beta: f64,
    pub jbar_beta: f64,
}

impl Decomposition {
    /// Recombines the six right-hand terms with their printed signs.
    pub fn reconstruction(&self) -> f64 {
        self.core_sum + self.alpha_count_term - self.beta_count_term - self.alpha_gap_term
            - self.beta_gap_term
            + self.l_alpha
            + self.l_beta
    }
}

/// Computes every term of the exact decomposition literally from its
/// defining sum. `bracket_alpha` and `bracket_beta` are the population
/// quantile brackets at the trim levels.
pub fn lemma21_decompose(
    values: &KernelValues,
    trim: &TrimSpec,
    bracket_alpha: &QuantileBracket,
    bracket_beta: &QuantileBracket,
) -> Decomposition {
    let counts = TrimCounts::compute(trim, values.count());
    let sorted = &values.sorted;

    let xi_minus_alpha = bracket_alpha.xi_minus;
    let xi_plus_alpha = bracket_alpha.xi_plus;
    let xi_minus_beta = bracket_beta.xi_minus;
    let xi_plus_beta = bracket_beta.xi_plus;

    // Ndot_plus_alpha = #{h < xi_plus_alpha}, Nminus_beta = #{h <= xi_minus_beta}
    let ndot_plus_alpha = sorted.partition_point(|&h| h < xi_plus_alpha);
    let nminus_beta = sorted.partition_point(|&h| h <= xi_minus_beta);

    let core_sum: f64 = sorted
        .iter()
        .filter(|&&h| xi_plus_alpha <= h && h <= xi_minus_beta)
        .sum();

    let alpha_diff = ndot_plus_alpha as f64 - counts.n_alpha as f64;
    let beta_diff = nminus_beta as f64 - counts.n_beta as f64;

    let alpha_count_term = xi_plus_alpha * alpha_diff;
    let beta_count_term = xi_minus_beta * beta_diff;

    let alpha_gap_term = if counts.n_alpha < ndot_plus_alpha {
        bracket_alpha.delta * alpha_diff
    } else {
        0.0
    };
    let beta_gap_term = if nminus_beta < counts.n_beta {
        bracket_beta.delta * beta_diff
    } else {
        0.0
    };

    let j_alpha = if counts.n_alpha < ndot_plus_alpha {
        shifted_range_sum(sorted, counts.n_alpha, ndot_plus_alpha, xi_minus_alpha)
    } else {
        0.0
    };
    let jbar_alpha = if ndot_plus_alpha <= counts.n_alpha {
        shifted_range_sum(sorted, ndot_plus_alpha, counts.n_alpha, xi_plus_alpha)
    } else {
        0.0
    };
    let j_beta = if counts.n_beta < nminus_beta {
        shifted_range_sum(sorted, counts.n_beta, nminus_beta, xi_minus_beta)
    } else {
        0.0
    };
    let jbar_beta = if nminus_beta <= counts.n_beta {
        shifted_range_sum(sorted, nminus_beta, counts.n_beta, xi_plus_beta)
    } else {
        0.0
    };

    Decomposition {
        core_sum,
        alpha_count_term,
        beta_count_term,
        alpha_gap_term,
        beta_gap_term,
        l_alpha: j_alpha - jbar_alpha,
        l_beta: jbar_beta - j_beta,
        j_alpha,
        jbar_alpha,
        j_beta,
        jbar_beta,
    }
}

/// `sum (h_(i) - xi)` over the 1-based ranks `from + 1 ..= to`; empty if
/// `to <= from`.
fn shifted_range_sum(sorted: &[f64], from: usize, to: usize, xi: f64) -> f64 {
    if to <= from {
        return 0.0;
    }
    sorted[from..to].iter().map(|&h| h - xi).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::builtin_kernel;
    use crate::model::DataModel;
    use crate::rng::SeedSpec;
    use rand::Rng;

    fn fixture(sorted: &[f64]) -> KernelValues {
        // m = 1 fixtures: N = n
        KernelValues::from_sorted(sorted.len(), 1, sorted.to_vec()).unwrap()
    }

    #[test]
    fn enumerate_half_squared_diff_by_hand() {
        let k = builtin_kernel("half_squared_diff", None).unwrap();
        let values = enumerate(&[1.0, 2.0, 3.0], &k).unwrap();
        assert_eq!(values.sorted(), &[0.5, 0.5, 2.0]);
    }

    #[test]
    fn enumerate_max_by_hand() {
        let k = builtin_kernel("max_m", Some(2)).unwrap();
        let values = enumerate(&[1.0, 2.0, 3.0], &k).unwrap();
        assert_eq!(values.sorted(), &[2.0, 3.0, 3.0]);
    }

    #[test]
    fn enumerate_count_is_binomial() {
        let k = builtin_kernel("half_squared_diff", None).unwrap();
        let sample: Vec<f64> = (0..20).map(|i| i as f64).collect();
        assert_eq!(enumerate(&sample, &k).unwrap().count(), 190);
        assert_eq!(binomial(20, 2), 190);
        assert_eq!(binomial(12, 3), 220);
        assert_eq!(binomial(5, 5), 1);
        assert_eq!(binomial(3, 4), 0);
    }

    #[test]
    fn enumerate_rejects_small_samples() {
        let k = builtin_kernel("max_m", Some(3)).unwrap();
        assert!(matches!(
            enumerate(&[1.0, 2.0], &k),
            Err(Error::SampleTooSmall { n: 2, m: 3 })
        ));
    }

    #[test]
    fn ecdf_examples() {
        let v = fixture(&[2.0, 3.0, 3.0]);
        assert_eq!(ecdf(&v, 2.5), 1.0 / 3.0);
        assert_eq!(ecdf(&v, 1.0), 0.0);
        assert_eq!(ecdf(&v, 3.0), 1.0);
        assert_eq!(ecdf(&v, 10.0), 1.0);
        let ties = fixture(&[0.5, 0.5, 2.0]);
        assert_eq!(ecdf(&ties, 0.5), 2.0 / 3.0);
    }

    #[test]
    fn equantile_examples() {
        let v = fixture(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(equantile(&v, 0.5).unwrap(), 2.0);
        assert_eq!(equantile(&v, 0.0).unwrap(), 1.0);
        assert_eq!(equantile(&v, 1.0).unwrap(), 4.0);
        assert!(equantile(&v, -0.1).is_err());
        assert!(equantile(&v, 1.1).is_err());
    }

    #[test]
    fn u_statistic_examples() {
        assert_eq!(u_statistic(&fixture(&[0.5, 0.5, 2.0])), 1.0);
        assert_eq!(u_statistic(&fixture(&[2.0, 3.0, 3.0])), 8.0 / 3.0);
        assert_eq!(u_statistic(&fixture(&[7.25; 6])), 7.25);
    }

    #[test]
    fn trim_count_examples() {
        let trim = TrimSpec::from_decimal("0.25", "0.75").unwrap();
        let c = TrimCounts::compute(&trim, 4);
        assert_eq!((c.n_alpha, c.n_beta, c.nbar_alpha, c.nbar_beta), (1, 3, 1, 3));

        let c10 = TrimCounts::compute(&trim, 10);
        assert_eq!((c10.n_alpha, c10.nbar_alpha), (2, 3));

        // degenerate trim is reported, not divided by
        let narrow = TrimSpec::from_decimal("0.81", "0.82").unwrap();
        let v = fixture(&[1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(trim_counts(&v, &narrow), Err(Error::DegenerateTrim { .. })));
    }

    #[test]
    fn threshold_count_examples() {
        let v = fixture(&[1.0, 2.0, 2.0, 3.0]);
        let c = threshold_counts(&v, 2.0);
        assert_eq!((c.strictly_below, c.at_or_below), (1, 3));
        let lo = threshold_counts(&v, 0.0);
        assert_eq!((lo.strictly_below, lo.at_or_below), (0, 0));
        let hi = threshold_counts(&v, 3.0);
        assert_eq!((hi.strictly_below, hi.at_or_below), (3, 4));
    }

    #[test]
    fn trimmed_u_examples() {
        let v = fixture(&[1.0, 2.0, 3.0, 4.0]);
        let trim = TrimSpec::from_decimal("0.25", "0.75").unwrap();
        assert_eq!(trimmed_u(&v, &trim).unwrap(), 2.5);

        // no trimming reduces to the U-statistic
        let wide = TrimSpec::from_decimal("0.1", "0.99").unwrap();
        let w = fixture(&[5.0, 6.0, 7.0]);
        assert_eq!(trimmed_u(&w, &wide).unwrap(), u_statistic(&w));

        // direct-enumeration oracle: N_alpha = 1, N_beta = 2 -> h_(2) = 3
        let v2 = fixture(&[2.0, 3.0, 3.0]);
        let t2 = TrimSpec::from_decimal("0.4", "0.9").unwrap();
        assert_eq!(trimmed_u(&v2, &t2).unwrap(), 3.0);
    }

    #[test]
    fn trimmed_l_examples() {
        let v = fixture(&[1.0, 2.0, 3.0, 4.0]);
        let trim = TrimSpec::from_decimal("0.25", "0.75").unwrap();
        // Nbar_alpha = 1, Nbar_beta = 3 -> (h_(1) + h_(2)) / 4
        assert_eq!(trimmed_l(&v, &trim), 0.75);

        // constant data: (Nbar_beta - Nbar_alpha) * 5 / 4 for any trim
        let ties = fixture(&[5.0, 5.0, 5.0, 5.0]);
        for (a, b) in [("0.1", "0.9"), ("0.3", "0.4"), ("0.2", "0.8")] {
            let t = TrimSpec::from_decimal(a, b).unwrap();
            let c = TrimCounts::compute(&t, 4);
            let expect = (c.nbar_beta - c.nbar_alpha) as f64 * 5.0 / 4.0;
            assert_eq!(trimmed_l(&ties, &t), expect, "trim ({a}, {b})");
        }
    }

    /// Rank form vs the truncated-integral form, evaluated independently
    /// through value indicators. Both sum the same contiguous run of sorted
    /// values left to right, so agreement is bit-exact on untied data.
    #[test]
    fn trimmed_l_matches_integral_form_on_continuous_data() {
        let kernel = builtin_kernel("half_squared_diff", None).unwrap();
        let model = DataModel::uniform01();
        let trim = TrimSpec::from_decimal("0.3", "0.8").unwrap();
        for rep in 0..50 {
            let sample = model.sample(6, SeedSpec::new(311, rep));
            let values = enumerate(&sample, &kernel).unwrap();
            let c = TrimCounts::compute(&trim, values.count());
            let h_alpha = values.sorted()[c.nbar_alpha - 1];
            let h_beta = values.sorted()[c.nbar_beta - 1];
            let integral: f64 = values
                .sorted()
                .iter()
                .filter(|&&x| h_alpha <= x && x < h_beta)
                .sum::<f64>()
                / values.count() as f64;
            assert_eq!(trimmed_l(&values, &trim), integral, "rep {rep}");
        }
    }

    /// N * trimmed_l reproduces the rank-range sum directly, for tied and
    /// untied data across a trim grid.
    #[test]
    fn trimmed_l_rank_identity_with_ties() {
        let mut rng = SeedSpec::new(77, 0).rng();
        for case in 0..100 {
            let n = rng.random_range(1..=12usize);
            let tied = case % 2 == 0;
            let data: Vec<f64> = (0..n)
                .map(|_| {
                    if tied {
                        rng.random_range(0..4) as f64
                    } else {
                        rng.random::<f64>()
                    }
                })
                .collect();
            let mut sorted = data.clone();
            sorted.sort_by(f64::total_cmp);
            let values = KernelValues::from_sorted(n, 1, sorted.clone()).unwrap();
            for i in 1..19u64 {
                for j in (i + 1)..20u64 {
                    let trim = TrimSpec::from_levels(
                        crate::trim::TrimLevel::from_ratio(i, 20).unwrap(),
                        crate::trim::TrimLevel::from_ratio(j, 20).unwrap(),
                    )
                    .unwrap();
                    let c = TrimCounts::compute(&trim, n);
                    let oracle: f64 =
                        sorted[c.nbar_alpha - 1..c.nbar_beta - 1].iter().sum::<f64>() / n as f64;
                    assert_eq!(trimmed_l(&values, &trim), oracle);
                }
            }
        }
    }

    #[test]
    fn decomposition_on_tied_discrete_case() {
        // m = 1 data (1, 2, 2, 3) with brackets from the discrete uniform
        // on {1, 2, 3}: both sides of the decomposition agree to 1e-12.
        let v = fixture(&[1.0, 2.0, 2.0, 3.0]);
        let trim = TrimSpec::from_decimal("0.25", "0.75").unwrap();
        let ba = QuantileBracket::new(0.25, 1.0, 1.0, 1.0 / 3.0, 0.0).unwrap();
        let bb = QuantileBracket::new(0.75, 3.0, 3.0, 1.0, 2.0 / 3.0).unwrap();
        let d = lemma21_decompose(&v, &trim, &ba, &bb);
        let lhs = trimmed_block_sum(&v, &trim);
        assert!((d.reconstruction() - lhs).abs() <= 1e-12, "{} vs {lhs}", d.reconstruction());
        assert_eq!(d.l_alpha, d.j_alpha - d.jbar_alpha);
        assert_eq!(d.l_beta, d.jbar_beta - d.j_beta);
    }

    #[test]
    fn decomposition_gap_terms_vanish_for_continuous_brackets() {
        let kernel = builtin_kernel("max_m", Some(2)).unwrap();
        let model = DataModel::uniform01();
        let trim = TrimSpec::from_decimal("0.25", "0.64").unwrap();
        // uniform01 + max_2: xi = sqrt(level) on both sides, delta = 0
        let ba = QuantileBracket::new(0.25, 0.5, 0.5, 0.25, 0.25).unwrap();
        let bb = QuantileBracket::new(0.64, 0.8, 0.8, 0.64, 0.64).unwrap();
        for rep in 0..20 {
            let sample = model.sample(12, SeedSpec::new(41, rep));
            let values = enumerate(&sample, &kernel).unwrap();
            let d = lemma21_decompose(&values, &trim, &ba, &bb);
            assert_eq!(d.alpha_gap_term, 0.0);
            assert_eq!(d.beta_gap_term, 0.0);
            let lhs = trimmed_block_sum(&values, &trim);
            assert!(
                (d.reconstruction() - lhs).abs() <= 1e-10 * (1.0 + lhs.abs()),
                "rep {rep}: {} vs {lhs}",
                d.reconstruction()
            );
        }
    }

    #[test]
    fn decomposition_with_quantile_gaps() {
        // paper model with max kernel: gaps at both trim levels
        let kernel = builtin_kernel("max_m", Some(2)).unwrap();
        let model = DataModel::paper_piecewise(0.25, 0.64, 2).unwrap();
        let trim = TrimSpec::from_decimal("0.25", "0.64").unwrap();
        let ba = QuantileBracket::new(0.25, 0.25, 0.5, 0.25, 0.25).unwrap();
        let bb = QuantileBracket::new(0.64, 0.8, 1.6, 0.64, 0.64).unwrap();
        assert_eq!(ba.delta, 0.25);
        assert_eq!(bb.delta, 0.8);
        for rep in 0..50 {
            let sample = model.sample(40, SeedSpec::new(42, rep));
            let values = enumerate(&sample, &kernel).unwrap();
            let d = lemma21_decompose(&values, &trim, &ba, &bb);
            let lhs = trimmed_block_sum(&values, &trim);
            assert!(
                (d.reconstruction() - lhs).abs() <= 1e-10 * (1.0 + lhs.abs()),
                "rep {rep}: {} vs {lhs}",
                d.reconstruction()
            );
        }
    }

    #[test]
    fn count_identities_hold_exactly() {
        let mut rng = SeedSpec::new(13, 0).rng();
        for _ in 0..200 {
            let n = rng.random_range(1..30usize);
            let mut data: Vec<f64> =
                (0..n).map(|_| rng.random_range(0..6) as f64 / 2.0).collect();
            data.sort_by(f64::total_cmp);
            let v = KernelValues::from_sorted(n, 1, data.clone()).unwrap();
            // probe at data points and off-lattice points
            for _ in 0..6 {
                let xi = if rng.random::<bool>() {
                    data[rng.random_range(0..n)]
                } else {
                    rng.random_range(-0.5..3.5)
                };
                let c = threshold_counts(&v, xi);
                assert_eq!(ecdf_left(&v, xi) * n as f64, c.strictly_below as f64);
                assert_eq!(ecdf(&v, xi) * n as f64, c.at_or_below as f64);
                assert!(c.strictly_below <= c.at_or_below && c.at_or_below <= n);
            }
        }
    }

    #[test]
    fn quantile_cdf_event_coincidence() {
        let mut rng = SeedSpec::new(14, 0).rng();
        for _ in 0..200 {
            let n = rng.random_range(1..25usize);
            let mut data: Vec<f64> =
                (0..n).map(|_| rng.random_range(0..5) as f64).collect();
            data.sort_by(f64::total_cmp);
            let v = KernelValues::from_sorted(n, 1, data).unwrap();
            for _ in 0..5 {
                let t: f64 = rng.random();
                let x: f64 = rng.random_range(-1.0..5.0);
                let q = equantile(&v, t).unwrap();
                let hn = ecdf(&v, x);
                assert_eq!(q > x, t > hn, "t={t}, x={x}");
                assert_eq!(q <= x, t <= hn, "t={t}, x={x}");
            }
        }
    }

    /// The empirical quantile at level gamma is the order statistic of rank
    /// Nbar_gamma, for exact-rational and float levels alike.
    #[test]
    fn equantile_agrees_with_ceil_counts() {
        let mut rng = SeedSpec::new(15, 0).rng();
        for _ in 0..100 {
            let n = rng.random_range(1..40usize);
            let mut data: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            data.sort_by(f64::total_cmp);
            let v = KernelValues::from_sorted(n, 1, data.clone()).unwrap();
            for _ in 0..10 {
                let gamma: f64 = rng.random();
                if gamma <= 0.0 || gamma >= 1.0 {
                    continue;
                }
                let level = crate::trim::TrimLevel::from_f64(gamma).unwrap();
                let nbar = level.ceil_mul(n).max(1);
                assert_eq!(equantile(&v, gamma).unwrap(), data[nbar - 1], "gamma={gamma}");
            }
        }
    }

    #[test]
    fn enumerate_is_permutation_invariant() {
        let kernel = builtin_kernel("max_m", Some(3)).unwrap();
        let mut rng = SeedSpec::new(16, 0).rng();
        let mut sample: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
        let reference = enumerate(&sample, &kernel).unwrap();
        for _ in 0..10 {
            // Fisher-Yates shuffle
            for i in (1..sample.len()).rev() {
                let j = rng.random_range(0..=i);
                sample.swap(i, j);
            }
            let shuffled = enumerate(&sample, &kernel).unwrap();
            assert_eq!(shuffled.sorted(), reference.sorted());
        }
    }
}
