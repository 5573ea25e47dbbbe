//! Error function and its inverse.
//!
//! `erf` uses the positive-term series `2/√π · e^{-x²} · Σ 2ⁿ x^{2n+1} / (2n+1)!!`
//! below |x| = 3 and a Lentz continued fraction for `erfc` above it.
//! `erf_inv` starts from Giles' single-precision rational approximation and
//! polishes it with Newton steps against `erf`.

use std::f64::consts::{FRAC_2_SQRT_PI, PI};

use crate::{Error, Result};

pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let ax = x.abs();
    let v = if ax < 3.0 {
        erf_series(ax)
    } else {
        1.0 - erfc_continued_fraction(ax)
    };
    v.copysign(x)
}

pub fn erfc(x: f64) -> f64 {
    if x < 3.0 {
        1.0 - erf(x)
    } else {
        erfc_continued_fraction(x)
    }
}

fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
    }
    FRAC_2_SQRT_PI * (-x2).exp() * sum
}

/// erfc(x) = e^{-x²}/√π · 1/(x + 1/2/(x + 1/(x + 3/2/(x + ...)))) for x > 0,
/// evaluated with the modified Lentz algorithm.
fn erfc_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64 / 2.0;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (PI.sqrt() * f)
}

/// Inverse of [`erf`] on the open interval (−1, 1).
pub fn erf_inv(y: f64) -> Result<f64> {
    if y.is_nan() || y.abs() >= 1.0 {
        return Err(Error::Domain(format!("erf_inv requires |y| < 1, got {y}")));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let mut x = giles_initial_guess(y);
    for _ in 0..50 {
        let err = erf(x) - y;
        let slope = FRAC_2_SQRT_PI * (-x * x).exp();
        // Halley correction: erf'' = -2x erf'
        let newton = err / slope;
        let dx = newton / (1.0 + x * newton);
        x -= dx;
        if dx.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    Ok(x)
}

fn giles_initial_guess(y: f64) -> f64 {
    let w = -((1.0 - y) * (1.0 + y)).ln();
    let p = if w < 5.0 {
        let w = w - 2.5;
        let mut p = 2.810_226_36e-08;
        p = 3.432_739_39e-07 + p * w;
        p = -3.523_387_7e-06 + p * w;
        p = -4.391_506_54e-06 + p * w;
        p = 0.000_218_580_87 + p * w;
        p = -0.001_253_725_03 + p * w;
        p = -0.004_177_681_64 + p * w;
        p = 0.246_640_727 + p * w;
        1.501_409_41 + p * w
    } else {
        let w = w.sqrt() - 3.0;
        let mut p = -0.000_200_214_257;
        p = 0.000_100_950_558 + p * w;
        p = 0.001_349_343_22 + p * w;
        p = -0.003_673_428_44 + p * w;
        p = 0.005_739_507_73 + p * w;
        p = -0.007_622_461_3 + p * w;
        p = 0.009_438_870_47 + p * w;
        p = 1.001_674_06 + p * w;
        2.832_976_82 + p * w
    };
    p * y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erf_reference_values() {
        // Abramowitz & Stegun table values.
        assert!((erf(0.5) - 0.520_499_877_813_046_5).abs() < 1e-15);
        assert!((erf(1.0) - 0.842_700_792_949_714_9).abs() < 1e-15);
        assert!((erf(2.0) - 0.995_322_265_018_952_7).abs() < 1e-15);
        assert!((erfc(4.0) - 1.541_725_790_028_002e-8).abs() < 1e-20);
        assert_eq!(erf(0.0), 0.0);
        assert_eq!(erf(-1.0), -erf(1.0));
    }

    #[test]
    fn branches_agree_at_switch() {
        let below = erf_series(3.0);
        let above = 1.0 - erfc_continued_fraction(3.0);
        assert!((below - above).abs() < 1e-15);
    }

    #[test]
    fn erf_inv_rejects_out_of_domain() {
        for y in [1.0, -1.0, 1.5, f64::NAN, f64::INFINITY] {
            assert!(erf_inv(y).is_err());
        }
    }

    #[test]
    fn erf_inv_zero_is_exact() {
        assert_eq!(erf_inv(0.0).unwrap(), 0.0);
    }

    #[test]
    fn erf_inv_is_odd() {
        for y in [0.1, 0.5, 0.9, 0.999] {
            assert_eq!(erf_inv(-y).unwrap(), -erf_inv(y).unwrap());
        }
    }
}
