//! Composite Simpson quadrature with Richardson error control, used as the
//! deterministic oracle behind the divergence estimators.

/// Composite Simpson's rule on [a, b] with `n` (even, >= 2) subintervals.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, n: usize) -> f64 {
    assert!(n >= 2 && n.is_multiple_of(2), "Simpson needs an even interval count");
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for k in 1..n {
        let x = a + h * k as f64;
        sum += if k % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    sum * h / 3.0
}

/// Result of an adaptive pass: the Richardson-extrapolated value and the
/// error estimate `|I_2n - I_n| / 15` at the final refinement.
#[derive(Clone, Copy, Debug)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
}

/// Doubles the grid until the Richardson error estimate drops below
/// `tol * max(1, |I|)` or the interval budget is exhausted; returns the
/// extrapolated value with its final error estimate.
pub fn simpson_adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    max_intervals: usize,
) -> QuadratureResult {
    let mut n = 64usize;
    let mut coarse = simpson(f, a, b, n);
    loop {
        n *= 2;
        let fine = simpson(f, a, b, n);
        let err = (fine - coarse).abs() / 15.0;
        let value = fine + (fine - coarse) / 15.0;
        if err <= tol * value.abs().max(1.0) || n >= max_intervals {
            return QuadratureResult {
                value,
                error_estimate: err,
            };
        }
        coarse = fine;
    }
}

/// Tensor-product Simpson on a rectangle with `n` subintervals per axis.
pub fn simpson2d<F: Fn(f64, f64) -> f64>(
    f: &F,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    n: usize,
) -> f64 {
    let g = |y: f64| simpson(&|x| f(x, y), x0, x1, n);
    simpson(&g, y0, y1, n)
}

/// 2-d analogue of [`simpson_adaptive`], doubling both axes together.
pub fn simpson2d_adaptive<F: Fn(f64, f64) -> f64>(
    f: &F,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    tol: f64,
    max_intervals_per_axis: usize,
) -> QuadratureResult {
    let mut n = 32usize;
    let mut coarse = simpson2d(f, x0, x1, y0, y1, n);
    loop {
        n *= 2;
        let fine = simpson2d(f, x0, x1, y0, y1, n);
        let err = (fine - coarse).abs() / 15.0;
        let value = fine + (fine - coarse) / 15.0;
        if err <= tol * value.abs().max(1.0) || n >= max_intervals_per_axis {
            return QuadratureResult {
                value,
                error_estimate: err,
            };
        }
        coarse = fine;
    }
}
