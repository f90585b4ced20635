//! Normal-distribution helpers, the inverse Mills ratio and Student-t tail
//! probabilities.

use core::f64::consts::SQRT_2;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Standard normal density.
pub fn norm_pdf(z: f64) -> f64 {
    libm::exp(-0.5 * z * z - LN_SQRT_2PI)
}

/// Standard normal distribution function.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// `ln Φ(z)`, accurate in both tails.
pub fn ln_norm_cdf(z: f64) -> f64 {
    if z < -5.0 {
        // Φ(z) = φ(z)·R(−z) with R the Mills ratio of the upper tail.
        -0.5 * z * z - LN_SQRT_2PI + libm::log(mills_ratio_upper(-z))
    } else if z > 5.0 {
        libm::log1p(-0.5 * libm::erfc(z / SQRT_2))
    } else {
        libm::log(norm_cdf(z))
    }
}

/// Upper-tail Mills ratio `R(x) = (1 − Φ(x)) / φ(x)` for `x ≥ 5`, by the
/// classical continued fraction `1/(x+1/(x+2/(x+3/(x+…))))` evaluated
/// backwards.
fn mills_ratio_upper(x: f64) -> f64 {
    debug_assert!(x >= 5.0);
    let mut tail = x;
    for k in (1..=120).rev() {
        tail = x + k as f64 / tail;
    }
    1.0 / tail
}

/// Inverse Mills ratio `λ(z) = φ(z) / Φ(z)`.
///
/// Stable over the whole real line: for `z ≪ 0` it follows the asymptote
/// `−z + 1/(−z) − …` without forming the vanishing `Φ(z)`, and for large
/// positive `z` it is evaluated through logarithms. Beyond `z ≈ 38.6` the
/// true value is below the smallest subnormal `f64` and the result is `0`;
/// use [`ln_inverse_mills`] when the tail itself matters.
pub fn inverse_mills(z: f64) -> f64 {
    if z < -5.0 {
        1.0 / mills_ratio_upper(-z)
    } else if z <= 5.0 {
        norm_pdf(z) / norm_cdf(z)
    } else {
        libm::exp(ln_inverse_mills(z))
    }
}

/// `ln λ(z)`, finite for every finite `z`.
pub fn ln_inverse_mills(z: f64) -> f64 {
    if z < -5.0 {
        -libm::log(mills_ratio_upper(-z))
    } else if z <= 5.0 {
        libm::log(norm_pdf(z) / norm_cdf(z))
    } else {
        -0.5 * z * z - LN_SQRT_2PI - libm::log1p(-0.5 * libm::erfc(z / SQRT_2))
    }
}

/// `λ'(z) = −λ(z)(z + λ(z))`.
pub fn inverse_mills_derivative(z: f64) -> f64 {
    let l = inverse_mills(z);
    -l * (z + l)
}

/// Two-sided normal p-value for a z statistic.
pub fn normal_two_sided_p(z: f64) -> f64 {
    libm::erfc(libm::fabs(z) / SQRT_2)
}

/// Two-sided Student-t p-value `P(|T_df| ≥ |t|)`.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return if t.is_nan() { f64::NAN } else { 0.0 };
    }
    if df.is_infinite() {
        return normal_two_sided_p(t);
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(x, 0.5 * df, 0.5)
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b)
        + a * libm::log(x)
        + b * libm::log1p(-x);
    let front = libm::exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if libm::fabs(d) < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if libm::fabs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if libm::fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if libm::fabs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if libm::fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if libm::fabs(del - 1.0) < 1e-15 {
            break;
        }
    }
    h
}

/// `√(2/π)`, the value of the inverse Mills ratio at zero.
pub const LAMBDA_AT_ZERO: f64 = 0.797_884_560_802_865_4;
