//! Analytic side of the model: cumulant semigroup, transition and
//! stationary Laplace transforms, moments, tail constants and the
//! ergodicity bound.
//!
//! The branching mechanism is `φ(z) = b z + (σ^α / α) z^α` and the cumulant
//! `v_t(λ)` solves `∂_t v = -φ(v)`, `v_0 = λ`. That is a Bernoulli equation;
//! with `κ = σ^α / (α b)` its solution is
//!
//! ```text
//! v_t(λ) = e^{-bt} λ [1 + κ λ^{α-1} (1 - e^{-(α-1)bt})]^{-1/(α-1)}
//! ```
//!
//! and letting `λ → ∞` gives `v̄_t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadOptions};
use crate::stable_noise::{gamma_of_neg, StableSpec};

/// Model constants `(a, b, σ, α)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    a: f64,
    b: f64,
    sigma: f64,
    alpha: f64,
}

/// `γ = e^{-b}` and `ρ = a (1 - γ) / b`: the coefficients of the unit-lag
/// autoregression `X_k = ρ + γ X_{k-1} + ε_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub gamma: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailConstants {
    pub t: f64,
    pub p_alpha_t: f64,
    pub q_alpha_t: f64,
    /// `c` in `μ(x, ∞) ~ c x^{-α}`.
    pub stationary_tail: f64,
}

impl ModelParams {
    pub fn new(a: f64, b: f64, sigma: f64, alpha: f64) -> Result<Self> {
        for (name, v) in [("a", a), ("b", b), ("sigma", sigma)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        StableSpec::new(alpha)?;
        Ok(Self { a, b, sigma, alpha })
    }

    /// Same as [`ModelParams::new`] but allows `σ = 0`, which turns the model
    /// into the deterministic skeleton `dX = (a - bX) dt`. Only meant for
    /// testing limits.
    #[doc(hidden)]
    pub fn degenerate(a: f64, b: f64, sigma: f64, alpha: f64) -> Result<Self> {
        if sigma == 0.0 {
            let p = Self::new(a, b, 1.0, alpha)?;
            return Ok(Self { sigma: 0.0, ..p });
        }
        Self::new(a, b, sigma, alpha)
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn stable_spec(&self) -> StableSpec {
        StableSpec::new(self.alpha).expect("validated on construction")
    }

    pub fn derived(&self) -> DerivedParams {
        let gamma = (-self.b).exp();
        DerivedParams {
            gamma,
            rho: self.a / self.b * (-(-self.b).exp_m1()),
        }
    }

    /// `κ = σ^α / (α b)`.
    fn kappa(&self) -> f64 {
        self.sigma.powf(self.alpha) / (self.alpha * self.b)
    }

    /// Branching mechanism `φ(z) = b z + σ^α z^α / α`.
    pub fn branching(&self, z: f64) -> f64 {
        self.b * z + self.sigma.powf(self.alpha) * z.powf(self.alpha) / self.alpha
    }

    /// Cumulant `v_t(λ)`.
    pub fn v(&self, lam: f64, t: f64) -> f64 {
        if lam == 0.0 {
            return 0.0;
        }
        if t == 0.0 {
            return lam;
        }
        let am1 = self.alpha - 1.0;
        let growth = -(-am1 * self.b * t).exp_m1();
        let inner = self.kappa() * lam.powf(am1) * growth;
        (-self.b * t).exp() * lam * (-inner.ln_1p() / am1).exp()
    }

    /// `∫_0^t v_s(λ) ds`, by adaptive quadrature.
    pub fn int_v(&self, lam: f64, t: f64) -> Result<f64> {
        if lam == 0.0 || t == 0.0 {
            return Ok(0.0);
        }
        let r = integrate(|s| self.v(lam, s), 0.0, t, QuadOptions::default())?;
        Ok(r.value)
    }

    /// `E_x[exp(-λ X_t)] = exp(-x v_t(λ) - a ∫_0^t v_s(λ) ds)`.
    pub fn transition_laplace(&self, x: f64, t: f64, lam: f64) -> Result<f64> {
        Ok((-x * self.v(lam, t) - self.a * self.int_v(lam, t)?).exp())
    }

    /// `E_x[X_t] = x e^{-bt} + a (1 - e^{-bt}) / b`.
    pub fn transition_mean(&self, x: f64, t: f64) -> f64 {
        x * (-self.b * t).exp() - self.a / self.b * (-self.b * t).exp_m1()
    }

    /// Laplace transform of the stationary law,
    /// `exp(-∫_0^λ α a dz / (α b + σ^α z^{α-1}))`.
    pub fn stationary_laplace(&self, lam: f64) -> Result<f64> {
        if lam == 0.0 {
            return Ok(1.0);
        }
        let (a, b, al) = (self.a, self.b, self.alpha);
        let s = self.sigma.powf(al);
        let r = integrate(
            |z: f64| al * a / (al * b + s * z.powf(al - 1.0)),
            0.0,
            lam,
            QuadOptions::default(),
        )?;
        Ok((-r.value).exp())
    }

    pub fn stationary_mean(&self) -> f64 {
        self.a / self.b
    }

    /// `p_α(t) = (e^{-bt} - e^{-αbt}) / (b (α - 1))`.
    pub fn p_alpha(&self, t: f64) -> f64 {
        let (b, al) = (self.b, self.alpha);
        if t == 0.0 {
            return 0.0;
        }
        // e^{-bt}(1 - e^{-(α-1)bt})
        (-b * t).exp() * (-(-(al - 1.0) * b * t).exp_m1()) / (b * (al - 1.0))
    }

    /// `q_α(t) = (a/b) [(1 - e^{-αbt}) / (αb) - p_α(t)]`.
    pub fn q_alpha(&self, t: f64) -> f64 {
        let (a, b, al) = (self.a, self.b, self.alpha);
        a / b * (-(-al * b * t).exp_m1() / (al * b) - self.p_alpha(t))
    }

    /// `c` in `μ(x, ∞) ~ c x^{-α}`: `a σ^α / (α³ b² Γ(-α))`. Defined only for
    /// `α < 2`.
    pub fn stationary_tail_constant(&self) -> Result<f64> {
        let al = self.alpha;
        if al >= 2.0 {
            return Err(Error::Domain("the stationary law has no power tail at alpha = 2".into()));
        }
        Ok(self.a * self.sigma.powf(al) / (al.powi(3) * self.b * self.b * gamma_of_neg(al)))
    }

    pub fn tail_constants(&self, t: f64) -> Result<TailConstants> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
        }
        Ok(TailConstants {
            t,
            p_alpha_t: self.p_alpha(t),
            q_alpha_t: self.q_alpha(t),
            stationary_tail: self.stationary_tail_constant()?,
        })
    }

    /// `v̄_t = lim_{λ→∞} v_t(λ) = e^{-bt} [κ (1 - e^{-(α-1)bt})]^{-1/(α-1)}`.
    pub fn vbar(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("vbar is infinite at t = {t}")));
        }
        let am1 = self.alpha - 1.0;
        let growth = -(-am1 * self.b * t).exp_m1();
        Ok((-self.b * t).exp() * (self.kappa() * growth).powf(-1.0 / am1))
    }

    /// Total-variation bound
    /// `2(1 - exp(-v̄_1 x e^{-b(t-1)})) + 2 v̄_1 a e^{-b(t-1)} / b` for `t >= 1`.
    pub fn tv_bound(&self, x: f64, t: f64) -> Result<f64> {
        if !(t >= 1.0) {
            return Err(Error::Domain(format!("the ergodicity bound needs t >= 1, got {t}")));
        }
        let vb1 = self.vbar(1.0)?;
        let decay = (-self.b * (t - 1.0)).exp();
        Ok(-2.0 * (-vb1 * x * decay).exp_m1() + 2.0 * vb1 * self.a / self.b * decay)
    }

    /// Smallest `t >= 1` (to within 1e-6) with `tv_bound(x, t) < tol`.
    pub fn time_to_tv(&self, x: f64, tol: f64) -> Result<f64> {
        if self.tv_bound(x, 1.0)? < tol {
            return Ok(1.0);
        }
        let mut hi = 2.0;
        while self.tv_bound(x, hi)? >= tol {
            hi *= 2.0;
            if hi > 1e9 {
                return Err(Error::Domain("ergodicity bound never drops below tolerance".into()));
            }
        }
        let mut lo = 1.0;
        while hi - lo > 1e-6 {
            let mid = 0.5 * (lo + hi);
            if self.tv_bound(x, mid)? < tol {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// `E[G]` for `G = σ^α ∫_0^1 e^{-αb(1-t)} X_t dt` under stationarity.
    pub fn mean_g(&self) -> f64 {
        let (a, b, al) = (self.a, self.b, self.alpha);
        a * self.sigma.powf(al) * (-(-al * b).exp_m1()) / (al * b * b)
    }
}
