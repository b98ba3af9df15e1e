//! Error function, its inverse, and the standard normal cdf.
//!
//! `erf` and `erfc` come from `libm`. `erf_inv` starts from a single-precision
//! rational approximation and is polished with Halley steps, solving against
//! `erfc` in the tails where `erf(x) − y` would cancel.

use std::f64::consts::PI;

/// `2/√π`
pub const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
/// `1/√π`
pub const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;
/// `√(2/π)`
pub const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Rational approximation good to roughly single precision.
fn erf_inv_initial(y: f64) -> f64 {
    let mut w = -((1.0 - y) * (1.0 + y)).ln();
    let p = if w < 5.0 {
        w -= 2.5;
        [
            2.810_226_36e-08,
            3.432_739_39e-07,
            -3.523_387_7e-06,
            -4.391_506_54e-06,
            0.000_218_580_87,
            -0.001_253_725_03,
            -0.004_177_681_64,
            0.246_640_727,
            1.501_409_41,
        ]
        .iter()
        .fold(0.0, |acc, c| c + acc * w)
    } else {
        w = w.sqrt() - 3.0;
        [
            -0.000_200_214_257,
            0.000_100_950_558,
            0.001_349_343_22,
            -0.003_673_428_44,
            0.005_739_507_73,
            -0.007_622_461_3,
            0.009_438_870_47,
            1.001_674_06,
            2.832_976_82,
        ]
        .iter()
        .fold(0.0, |acc, c| c + acc * w)
    };
    p * y
}

/// Inverse error function on `(−1, 1)`; returns `±∞` at `±1` and NaN outside.
pub fn erf_inv(y: f64) -> f64 {
    if y.is_nan() || !(-1.0..=1.0).contains(&y) {
        return f64::NAN;
    }
    if y == 0.0 {
        return 0.0;
    }
    if y.abs() == 1.0 {
        return y * f64::INFINITY;
    }
    let (sign, a) = (y.signum(), y.abs());
    // residual of the positive root, taken against erfc once erf saturates
    let residual = |x: f64| if a > 0.5 { (1.0 - a) - erfc(x) } else { erf(x) - a };
    let mut x = erf_inv_initial(a);
    for _ in 0..3 {
        let slope = FRAC_2_SQRT_PI * (-x * x).exp();
        if slope == 0.0 {
            break;
        }
        let u = residual(x) / slope;
        // Halley: f'' = −2x f'
        x -= u / (1.0 + x * u);
    }
    sign * x
}

/// Standard normal cumulative distribution.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// Standard normal density.
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}
