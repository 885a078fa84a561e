//! Symmetric kernels of U-statistics.

use crate::error::{Error, Result};

/// A symmetric real-valued function of `m` sample points.
///
/// Symmetry is exact: permuting the argument tuple yields a bit-identical
/// result for every built-in. Built-ins reduce with order-independent
/// operations (total-order max, squared differences), so no permutation can
/// change even the rounding of the result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Kernel {
    name: String,
    arity: usize,
    form: KernelForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum KernelForm {
    /// m = 1, h(x) = x.
    Identity,
    /// m = 2, h(x, y) = (x - y)^2 / 2.
    HalfSquaredDiff,
    /// m >= 2, h(x_1, ..., x_m) = max(x_1, ..., x_m).
    Max,
}

impl Kernel {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Evaluates the kernel at an m-tuple.
    pub fn eval(&self, points: &[f64]) -> Result<f64> {
        if points.len() != self.arity {
            return Err(Error::ArityMismatch { expected: self.arity, got: points.len() });
        }
        Ok(self.eval_unchecked(points))
    }

    /// Evaluation without the arity check, for enumeration inner loops.
    #[inline]
    pub(crate) fn eval_unchecked(&self, points: &[f64]) -> f64 {
        match self.form {
            KernelForm::Identity => points[0],
            KernelForm::HalfSquaredDiff => {
                let d = points[0] - points[1];
                0.5 * d * d
            }
            // total_cmp makes max(-0.0, 0.0) order-independent.
            KernelForm::Max => points
                .iter()
                .copied()
                .reduce(|a, b| if b.total_cmp(&a).is_gt() { b } else { a })
                .expect("arity >= 1"),
        }
    }
}

/// Looks up a built-in kernel by name.
///
/// `max_m` needs the arity as a second argument; `identity` and
/// `half_squared_diff` have fixed arities 1 and 2.
pub fn builtin_kernel(name: &str, arity: Option<usize>) -> Result<Kernel> {
    match name {
        "identity" => Ok(Kernel { name: name.into(), arity: 1, form: KernelForm::Identity }),
        "half_squared_diff" => {
            Ok(Kernel { name: name.into(), arity: 2, form: KernelForm::HalfSquaredDiff })
        }
        "max_m" => {
            let m = arity
                .ok_or_else(|| Error::InvalidParam("max_m requires an arity m >= 2".into()))?;
            if m < 2 {
                return Err(Error::InvalidParam(format!("max_m requires m >= 2, got {m}")));
            }
            Ok(Kernel { name: name.into(), arity: m, form: KernelForm::Max })
        }
        other => Err(Error::UnknownKernel(other.into())),
    }
}

/// Convenience wrapper matching the operation-style API.
pub fn eval_kernel(kernel: &Kernel, points: &[f64]) -> Result<f64> {
    kernel.eval(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn max_kernel_examples() {
        let k = builtin_kernel("max_m", Some(2)).unwrap();
        assert_eq!(k.eval(&[0.2, 0.7]).unwrap(), 0.7);
        let k3 = builtin_kernel("max_m", Some(3)).unwrap();
        assert_eq!(k3.arity(), 3);
        assert_eq!(k3.eval(&[1.0, 5.0, 2.0]).unwrap(), 5.0);
    }

    #[test]
    fn half_squared_diff_examples() {
        let k = builtin_kernel("half_squared_diff", None).unwrap();
        assert_eq!(k.arity(), 2);
        assert_eq!(k.eval(&[3.0, 1.0]).unwrap(), 2.0);
    }

    #[test]
    fn identity_examples() {
        let k = builtin_kernel("identity", None).unwrap();
        assert_eq!(k.arity(), 1);
        assert_eq!(k.eval(&[-5.5]).unwrap(), -5.5);
    }

    #[test]
    fn arity_mismatch_is_an_error() {
        let k = builtin_kernel("max_m", Some(2)).unwrap();
        assert!(matches!(
            k.eval(&[1.0, 2.0, 3.0]),
            Err(Error::ArityMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn unknown_kernel_is_an_error() {
        assert!(matches!(builtin_kernel("median", None), Err(Error::UnknownKernel(_))));
        assert!(builtin_kernel("max_m", Some(1)).is_err());
        assert!(builtin_kernel("max_m", None).is_err());
    }

    /// Every permutation of a random tuple must give one distinct value,
    /// bit for bit.
    #[test]
    fn builtin_kernels_are_exactly_symmetric() {
        let kernels = [
            builtin_kernel("identity", None).unwrap(),
            builtin_kernel("half_squared_diff", None).unwrap(),
            builtin_kernel("max_m", Some(2)).unwrap(),
            builtin_kernel("max_m", Some(3)).unwrap(),
            builtin_kernel("max_m", Some(4)).unwrap(),
        ];
        let mut rng = crate::SeedSpec::new(0x5e11, 0).rng();
        for kernel in &kernels {
            for _ in 0..1000 {
                let tuple: Vec<f64> =
                    (0..kernel.arity()).map(|_| rng.random_range(-10.0..10.0)).collect();
                let reference = kernel.eval(&tuple).unwrap().to_bits();
                for perm in permutations(&tuple) {
                    assert_eq!(kernel.eval(&perm).unwrap().to_bits(), reference);
                }
            }
        }
    }

    #[test]
    fn max_handles_signed_zero_symmetrically() {
        let k = builtin_kernel("max_m", Some(2)).unwrap();
        let a = k.eval(&[0.0, -0.0]).unwrap();
        let b = k.eval(&[-0.0, 0.0]).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    fn permutations(tuple: &[f64]) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        let mut work = tuple.to_vec();
        let len = work.len();
        heap_permute(&mut work, len, &mut out);
        out
    }

    fn heap_permute(work: &mut [f64], k: usize, out: &mut Vec<Vec<f64>>) {
        if k <= 1 {
            out.push(work.to_vec());
            return;
        }
        for i in 0..k {
            heap_permute(work, k - 1, out);
            if k % 2 == 0 {
                work.swap(i, k - 1);
            } else {
                work.swap(0, k - 1);
            }
        }
    }
}
