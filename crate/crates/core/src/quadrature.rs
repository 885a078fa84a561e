//! Fixed-order Gauss-Legendre quadrature on piecewise-smooth integrands.
//!
//! The population integrands are piecewise polynomials of low degree once
//! the integration range is split at the CDF joints, so a 24-point rule
//! (exact through degree 47) integrates them to rounding error. Nodes are
//! computed once by Newton iteration on the Legendre recurrence rather than
//! transcribed from tables.

use std::sync::OnceLock;

const GL_ORDER: usize = 24;

fn gl_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| legendre_rule(GL_ORDER))
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
fn legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_eval(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-15 * x.abs().max(1.0) {
                let (p2, d2) = legendre_eval(n, x);
                dp = d2;
                x -= p2 / d2;
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Legendre polynomial P_n and its derivative at x, by three-term recurrence.
fn legendre_eval(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// Integral of `f` over `[lo, hi]` with the fixed rule; exact for
/// polynomials of degree <= 2 * GL_ORDER - 1.
pub(crate) fn integrate_smooth(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let (nodes, weights) = gl_rule();
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut acc = 0.0;
    for (&x, &w) in nodes.iter().zip(weights) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// Integral of `f` over `[lo, hi]`, splitting at the given breakpoints so
/// each subinterval is smooth.
pub(crate) fn integrate_piecewise(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, breaks: &[f64]) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&b| b > lo && b < hi).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut acc = 0.0;
    let mut left = lo;
    for cut in cuts {
        acc += integrate_smooth(f, left, cut);
        left = cut;
    }
    acc + integrate_smooth(f, left, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_integrate_polynomials_exactly() {
        // odd powers vanish on [-1, 1]; even powers have closed forms
        for p in 0..40u32 {
            let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
            let got = integrate_smooth(&|x| x.powi(p as i32), -1.0, 1.0);
            assert!((got - exact).abs() < 1e-14, "degree {p}: {got} vs {exact}");
        }
    }

    #[test]
    fn piecewise_split_handles_kinks() {
        // |x| over [-2, 3] = 2 + 4.5
        let got = integrate_piecewise(&|x| x.abs(), -2.0, 3.0, &[0.0]);
        assert!((got - 6.5).abs() < 1e-13);
        // without the breakpoint the rule is inexact; with it, exact
        let got_q = integrate_piecewise(&|x| x.abs() * x * x, -1.0, 1.0, &[0.0]);
        assert!((got_q - 0.5).abs() < 1e-14);
    }

    #[test]
    fn empty_and_degenerate_ranges() {
        assert_eq!(integrate_smooth(&|x| x, 1.0, 1.0), 0.0);
        assert_eq!(integrate_piecewise(&|x| x, 2.0, 1.0, &[1.5]), 0.0);
    }
}
