//! Spectrally positive α-stable driving noise.
//!
//! Normalization: the driver `Z` satisfies `E[exp(-λ Z_t)] = exp(t λ^α / α)`
//! for `λ >= 0`. For `α = 2` this is standard Brownian motion; for
//! `α ∈ (1, 2)` it is the compensated stable process with Lévy measure
//! `dz / (α Γ(-α) z^{α+1})` on `(0, ∞)`.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{Mutex, OnceLock};

use num_complex::Complex64;
use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::rng;

/// Stability index of the driver.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StableSpec {
    alpha: f64,
}

impl StableSpec {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha <= 2.0) {
            return Err(Error::InvalidParameter(format!(
                "stability index must lie in (1, 2], got {alpha}"
            )));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn is_gaussian(&self) -> bool {
        self.alpha == 2.0
    }

    /// `ψ(λ) = λ^α / α`, so that `E[exp(-λ Z_t)] = exp(t ψ(λ))`.
    ///
    /// `lam` must be nonnegative; negative arguments yield NaN.
    pub fn laplace_exponent(&self, lam: f64) -> f64 {
        if lam == 0.0 {
            return 0.0;
        }
        lam.powf(self.alpha) / self.alpha
    }

    /// Characteristic function of `Z_1`: `E[exp(i u Z_1)] = exp((-iu)^α / α)`.
    pub fn char_fn(&self, u: f64) -> Complex64 {
        if u == 0.0 {
            return Complex64::new(1.0, 0.0);
        }
        let phase = -FRAC_PI_2 * self.alpha * u.signum();
        let modulus = u.abs().powf(self.alpha) / self.alpha;
        Complex64::from_polar(modulus, phase).exp()
    }

    /// Constant `c` in `P(Z_1 > x) ~ c x^{-α}`; the mass the Lévy measure
    /// puts on `(x, ∞)` is `x^{-α} / (α² Γ(-α))`.
    pub fn right_tail_constant(&self) -> Result<f64> {
        if self.is_gaussian() {
            return Err(Error::Domain("the Gaussian driver has no power tail".into()));
        }
        Ok(1.0 / (self.alpha * self.alpha * gamma_of_neg(self.alpha)))
    }
}

/// `Γ(-α)` for non-integer `α > 0`, by reflection from the log-gamma of
/// `1 + α`. Positive for `α ∈ (1, 2)`.
pub fn gamma_of_neg(alpha: f64) -> f64 {
    PI / ((-PI * alpha).sin() * ln_gamma(1.0 + alpha).exp())
}

/// Draws increments of the driver.
///
/// Uses the Chambers-Mallows-Stuck construction with skewness +1. The raw
/// construction has characteristic function
/// `exp(-|u|^α (1 - i sign(u) tan(πα/2)))`, whose Laplace exponent is
/// `λ^α / |cos(πα/2)|`; multiplying by `(|cos(πα/2)| / α)^{1/α}` times the
/// skewness scale `|sec(πα/2)|^{1/α}` collapses to `(1/α)^{1/α}`.
#[derive(Debug, Clone, Copy)]
pub struct StableSampler {
    spec: StableSpec,
    shift: f64,
    unit_scale: f64,
    inv_alpha: f64,
    tail_power: f64,
}

impl StableSampler {
    pub fn new(spec: StableSpec) -> Self {
        let alpha = spec.alpha;
        Self {
            spec,
            shift: FRAC_PI_2 - PI / alpha,
            unit_scale: (1.0 / alpha).powf(1.0 / alpha),
            inv_alpha: 1.0 / alpha,
            tail_power: (1.0 - alpha) / alpha,
        }
    }

    pub fn spec(&self) -> StableSpec {
        self.spec
    }

    /// One draw of `Z_1`. May be non-finite only if the generator misbehaves.
    #[inline]
    pub fn sample_unit<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.spec.is_gaussian() {
            return rng.sample(StandardNormal);
        }
        let u: f64 = rng.sample(Open01);
        let v = PI * (u - 0.5);
        let w: f64 = rng.sample(Exp1);
        let arg = self.spec.alpha * (v + self.shift);
        let head = arg.sin() / v.cos().powf(self.inv_alpha);
        let tail = ((v - arg).cos() / w).powf(self.tail_power);
        self.unit_scale * head * tail
    }

    /// Increment of the driver over a step of length `dt`.
    #[inline]
    pub fn sample_increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> Result<f64> {
        let z = dt.powf(self.inv_alpha) * self.sample_unit(rng);
        if z.is_finite() {
            Ok(z)
        } else {
            Err(Error::NonFinite {
                step: 0,
                what: "stable increment".into(),
            })
        }
    }
}

/// Increment over `dt` drawn from a fresh sampler; see [`StableSampler`].
pub fn sample_increment<R: Rng + ?Sized>(spec: StableSpec, dt: f64, rng: &mut R) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("step must be positive, got {dt}")));
    }
    StableSampler::new(spec).sample_increment(dt, rng)
}

/// Draw count for the cached absolute-moment estimates.
pub const ABS_MOMENT_DRAWS: usize = 10_000_000;
const ABS_MOMENT_SEED: u64 = 0x05ee_dab5_0001;

fn moment_cache() -> &'static Mutex<HashMap<(u64, u64), f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, u64), f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// `E[|Z_1|^p]` for `0 < p < α`, estimated once per `(α, p)` by Monte Carlo
/// with a fixed seed and cached for the life of the process.
pub fn abs_moment(spec: StableSpec, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < spec.alpha) {
        return Err(Error::Domain(format!(
            "absolute moment of order {p} is infinite or undefined for alpha = {}",
            spec.alpha
        )));
    }
    let key = (spec.alpha.to_bits(), p.to_bits());
    if let Some(&m) = moment_cache().lock().expect("moment cache poisoned").get(&key) {
        return Ok(m);
    }
    let sampler = StableSampler::new(spec);
    let mut rng = rng::stream(rng::mix64(ABS_MOMENT_SEED ^ key.0));
    let mut acc = 0.0;
    let mut comp = 0.0;
    for _ in 0..ABS_MOMENT_DRAWS {
        let y = sampler.sample_unit(&mut rng).abs().powf(p) - comp;
        let t = acc + y;
        comp = (t - acc) - y;
        acc = t;
    }
    let m = acc / ABS_MOMENT_DRAWS as f64;
    moment_cache()
        .lock()
        .expect("moment cache poisoned")
        .insert(key, m);
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn rejects_out_of_range_index() {
        assert!(StableSpec::new(1.0).is_err());
        assert!(StableSpec::new(2.5).is_err());
        assert!(StableSpec::new(f64::NAN).is_err());
        assert!(StableSpec::new(2.0).is_ok());
    }

    #[test]
    fn laplace_exponent_examples() {
        let g = StableSpec::new(2.0).unwrap();
        assert!((g.laplace_exponent(3.0) - 4.5).abs() < 1e-15);
        let s = StableSpec::new(1.5).unwrap();
        assert_eq!(s.laplace_exponent(0.0), 0.0);
        assert!((s.laplace_exponent(1.0) - 1.0 / 1.5).abs() < 1e-15);
    }

    #[test]
    fn gamma_of_neg_alpha_values() {
        // Γ(-1.5) = 4√π/3
        let expect = 4.0 * PI.sqrt() / 3.0;
        assert!((gamma_of_neg(1.5) - expect).abs() < 1e-12);
        for a in [1.01, 1.3, 1.7, 1.99] {
            assert!(gamma_of_neg(a) > 0.0);
        }
    }

    #[test]
    fn char_fn_matches_laplace_continuation() {
        // at α = 2 the characteristic function is exp(-u²/2)
        let g = StableSpec::new(2.0).unwrap();
        let c = g.char_fn(1.3);
        assert!((c.re - (-0.5f64 * 1.69).exp()).abs() < 1e-14 && c.im.abs() < 1e-14);
        let s = StableSpec::new(1.5).unwrap();
        assert!(s.char_fn(0.7).norm() <= 1.0);
        assert!((s.char_fn(-0.7) - s.char_fn(0.7).conj()).norm() < 1e-15);
    }

    #[test]
    fn gaussian_increment_variance() {
        let spec = StableSpec::new(2.0).unwrap();
        let sampler = StableSampler::new(spec);
        let mut rng = stream(11);
        let n = 1_000_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let z = sampler.sample_increment(0.25, &mut rng).unwrap();
            s += z;
            s2 += z * z;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!((var - 0.25).abs() / 0.25 < 0.01, "variance {var}");
    }

    #[test]
    fn abs_moment_domain() {
        let g = StableSpec::new(2.0).unwrap();
        assert!(abs_moment(g, 2.0).is_err());
        assert!(abs_moment(g, 0.0).is_err());
    }

    #[test]
    fn rejects_nonpositive_step() {
        let spec = StableSpec::new(1.5).unwrap();
        assert!(sample_increment(spec, 0.0, &mut stream(1)).is_err());
    }
}
