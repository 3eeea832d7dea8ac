//! Globally adaptive Gauss-Kronrod (7/15) quadrature.
//!
//! Works for real and complex integrands. The interval with the largest
//! error estimate is bisected until the summed estimate drops below the
//! requested tolerance or the evaluation budget runs out.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Values that can be integrated: a vector space over the reals with a norm.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_evals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 0.0,
            max_evals: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: f64,
    pub evals: usize,
}

struct Segment<T> {
    lo: f64,
    hi: f64,
    value: T,
    error: f64,
}

fn gk15<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, lo: f64, hi: f64) -> (T, f64) {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod = kronrod + pair * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + pair * WG[j / 2];
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).magnitude();
    (value, error)
}

/// Integrate `f` over `[lo, hi]`.
pub fn integrate<T, F>(mut f: F, lo: f64, hi: f64, opts: QuadOptions) -> Result<QuadResult<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    if lo == hi {
        return Ok(QuadResult {
            value: T::zero(),
            error: 0.0,
            evals: 0,
        });
    }
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Domain(format!("integration bounds [{lo}, {hi}] must be finite")));
    }
    let (sign, lo, hi) = if lo < hi { (1.0, lo, hi) } else { (-1.0, hi, lo) };

    let (value, error) = gk15(&mut f, lo, hi);
    let mut evals = 15;
    let mut segments = vec![Segment { lo, hi, value, error }];
    let mut total = value;
    let mut total_err = error;

    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * total.magnitude());
        if total_err <= tol {
            break;
        }
        if evals + 30 > opts.max_evals {
            return Err(Error::Quadrature {
                evals,
                error: total_err,
            });
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
            .map(|(i, _)| i)
            .expect("at least one segment");
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.lo + seg.hi);
        if mid <= seg.lo || mid >= seg.hi {
            // interval cannot be split further in floating point
            return Err(Error::Quadrature {
                evals,
                error: total_err,
            });
        }
        let (lv, le) = gk15(&mut f, seg.lo, mid);
        let (rv, re) = gk15(&mut f, mid, seg.hi);
        evals += 30;
        total = total - seg.value + lv + rv;
        total_err = total_err - seg.error + le + re;
        segments.push(Segment {
            lo: seg.lo,
            hi: mid,
            value: lv,
            error: le,
        });
        segments.push(Segment {
            lo: mid,
            hi: seg.hi,
            value: rv,
            error: re,
        });
        // guard against drift in the running sums
        if segments.len() % 64 == 0 {
            total = segments.iter().fold(T::zero(), |acc, s| acc + s.value);
            total_err = segments.iter().map(|s| s.error).sum();
        }
    }

    let value = segments.iter().fold(T::zero(), |acc, s| acc + s.value);
    Ok(QuadResult {
        value: value * sign,
        error: total_err,
        evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x: f64| x.powi(5) - 2.0 * x, 0.0, 2.0, QuadOptions::default()).unwrap();
        assert!((r.value - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
        assert_eq!(r.evals, 15);
    }

    #[test]
    fn endpoint_singularity() {
        let r = integrate(|x: f64| x.powf(-0.5), 0.0, 1.0, QuadOptions::default()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let r = integrate(|x: f64| x.exp(), 1.0, 0.0, QuadOptions::default()).unwrap();
        assert!((r.value + (std::f64::consts::E - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn complex_oscillatory() {
        let r = integrate(
            |x: f64| Complex64::new(0.0, 5.0 * x).exp(),
            0.0,
            3.0,
            QuadOptions::default(),
        )
        .unwrap();
        let exact = (Complex64::new(0.0, 15.0).exp() - 1.0) / Complex64::new(0.0, 5.0);
        assert!((r.value - exact).norm() < 1e-10);
    }

    #[test]
    fn budget_exhaustion_is_an_error() {
        let opts = QuadOptions {
            abs_tol: 1e-14,
            rel_tol: 0.0,
            max_evals: 100,
        };
        assert!(integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, opts).is_err());
    }
}
