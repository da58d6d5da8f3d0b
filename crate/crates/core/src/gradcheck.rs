//! Central-finite-difference gradient verification.
//!
//! The trainers in this crate use hand-derived backpropagation, so the test
//! suite checks each analytic gradient against
//! `(f(p + h) - f(p - h)) / (2h)` with `h = 1e-5`. Agreement is measured by
//! the standard normalized distance
//! `||a - n||_2 / max(||a||_2 + ||n||_2, floor)`, reported per tensor; the
//! suite requires the worst tensor to stay below `1e-4`.

use crate::scalar::Scalar;
use ndarray::Array2;

/// Step size for central differences.
pub const FD_STEP: f64 = 1e-5;

/// Normalized distance between an analytic and a numeric gradient sample.
/// Returns 0 for two all-zero vectors.
pub fn gradient_distance<T: Scalar>(analytic: &[T], numeric: &[T]) -> T {
    assert_eq!(analytic.len(), numeric.len());
    let mut diff = T::zero();
    let mut na = T::zero();
    let mut nn = T::zero();
    for (&a, &n) in analytic.iter().zip(numeric) {
        diff += (a - n) * (a - n);
        na += a * a;
        nn += n * n;
    }
    let denom = (na.sqrt() + nn.sqrt()).max(T::of(1e-12));
    diff.sqrt() / denom
}

/// Numeric gradient of `loss` with respect to every entry of `param`,
/// by central differences. `loss` must be a pure function of the current
/// parameter contents.
pub fn numeric_gradient<T: Scalar>(
    param: &mut Array2<T>,
    mut loss: impl FnMut(&Array2<T>) -> T,
) -> Array2<T> {
    let h = T::of(FD_STEP);
    let two_h = T::of(2.0 * FD_STEP);
    let mut grad = Array2::zeros(param.raw_dim());
    for idx in 0..param.len() {
        let (r, c) = (idx / param.ncols(), idx % param.ncols());
        let orig = param[[r, c]];
        param[[r, c]] = orig + h;
        let up = loss(param);
        param[[r, c]] = orig - h;
        let down = loss(param);
        param[[r, c]] = orig;
        grad[[r, c]] = (up - down) / two_h;
    }
    grad
}

/// Numeric gradient restricted to a sample of coordinates (for big tensors
/// where the full sweep would dominate test time). Returns pairs of
/// `(flat_index, derivative)`.
pub fn numeric_gradient_sampled<T: Scalar>(
    param: &mut Array2<T>,
    coords: &[usize],
    mut loss: impl FnMut(&Array2<T>) -> T,
) -> Vec<(usize, T)> {
    let h = T::of(FD_STEP);
    let two_h = T::of(2.0 * FD_STEP);
    let cols = param.ncols();
    coords
        .iter()
        .map(|&idx| {
            let (r, c) = (idx / cols, idx % cols);
            let orig = param[[r, c]];
            param[[r, c]] = orig + h;
            let up = loss(param);
            param[[r, c]] = orig - h;
            let down = loss(param);
            param[[r, c]] = orig;
            (idx, (up - down) / two_h)
        })
        .collect()
}

/// Distance between an analytic gradient tensor and a sampled numeric
/// gradient over the same coordinates.
pub fn sampled_distance<T: Scalar>(analytic: &Array2<T>, numeric: &[(usize, T)]) -> T {
    let cols = analytic.ncols();
    let a: Vec<T> = numeric
        .iter()
        .map(|&(idx, _)| analytic[[idx / cols, idx % cols]])
        .collect();
    let n: Vec<T> = numeric.iter().map(|&(_, v)| v).collect();
    gradient_distance(&a, &n)
}
