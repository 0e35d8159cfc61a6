use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::special::student_t_two_sided;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest<T> {
    pub t: T,
    /// Welch–Satterthwaite degrees of freedom.
    pub df: T,
    /// Two-sided p-value.
    pub p: T,
}

pub(crate) fn mean_and_variance<T: Scalar>(xs: &[T]) -> (T, T) {
    let n = T::of_usize(xs.len());
    let mean = xs.iter().copied().sum::<T>() / n;
    let ss: T = xs.iter().map(|&x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - T::one()))
}

/// Welch's unequal-variance two-sample t-test, two-sided.
pub fn welch_t_test<T: Scalar>(a: &[T], b: &[T]) -> Result<TTest<T>> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "t-test needs at least 2 values per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (mean_a, var_a) = mean_and_variance(a);
    let (mean_b, var_b) = mean_and_variance(b);
    let se_a = var_a / T::of_usize(a.len());
    let se_b = var_b / T::of_usize(b.len());
    let se2 = se_a + se_b;
    if !(se2 > T::zero()) {
        return Err(Error::ZeroVariance);
    }
    let t = (mean_a - mean_b) / se2.sqrt();
    let df = se2 * se2
        / (se_a * se_a / T::of_usize(a.len() - 1) + se_b * se_b / T::of_usize(b.len() - 1));
    let p = student_t_two_sided(t, df).max(T::zero()).min(T::one());
    Ok(TTest { t, df, p })
}
