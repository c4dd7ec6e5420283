//! Modified Bessel function of the first kind, order zero.

const SERIES_LIMIT: f64 = 30.0;

/// Exponentially scaled `I₀(x)·e^{-|x|}`, finite for every real `x`.
pub fn i0e(x: f64) -> f64 {
    let x = x.abs();
    if x <= SERIES_LIMIT {
        // Σ (x²/4)^k / (k!)², all terms positive.
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        while term > 1e-17 * sum {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
        }
        sum * (-x).exp()
    } else {
        // Hankel expansion: Σ ((2k-1)!!)² / (k! 8^k x^k).
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0_f64;
        loop {
            let next = term * (2.0 * k - 1.0).powi(2) / (8.0 * k * x);
            if next < 1e-17 * sum || next > term {
                break;
            }
            term = next;
            sum += term;
            k += 1.0;
        }
        sum / (2.0 * std::f64::consts::PI * x).sqrt()
    }
}

pub fn i0(x: f64) -> f64 {
    i0e(x) * x.abs().exp()
}

/// `exp(-a)·I₀(b)` for `a ≥ |b|`, evaluated without forming either factor.
pub fn exp_neg_i0(a: f64, b: f64) -> f64 {
    (-(a - b.abs())).exp() * i0e(b)
}
