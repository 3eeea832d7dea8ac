//! Limit laws of the normalized partial sums behind the drift estimators.
//!
//! `(U_1, U_2)` is the α-stable limit of `a_n^{-1} (Σ ε_k, Σ ε_k / (1 + X_{k-1}))`
//! and drives the weighted estimator; `(S_1, S_2)` is the limit of
//! `(a_n^{-2} Σ X_{k-1}², c_n^{-1} Σ X_{k-1} ε_k)` and drives the ordinary
//! one. Both are characterized through their characteristic functions.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::CompensatedSum;
use crate::format::g17;
use crate::model::ModelParams;
use crate::quadrature::{integrate, QuadOptions};
use crate::simulator::v_scale;
use crate::stable_noise::{gamma_of_neg, StableSpec};

/// Upper end of the stability range where the ordinary estimator has the
/// `(S_1, S_2)` limit: the golden ratio.
pub const CLSE_ALPHA_MAX: f64 = 1.618_033_988_749_895;

/// Normalizing sequences at sample size `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSchedule {
    pub n: usize,
    /// `n^{1/α}`
    pub a_n: f64,
    /// `n^{(α+1)/α²}`
    pub c_n: f64,
    /// `n^{(α-1)/α}`
    pub wclse_rate: f64,
    /// `n^{(α-1)/α²}`
    pub clse_rate: f64,
}

impl NormalizationSchedule {
    pub fn new(n: usize, alpha: f64) -> Result<Self> {
        StableSpec::new(alpha)?;
        if n == 0 {
            return Err(Error::Domain("sample size must be positive".into()));
        }
        let nf = n as f64;
        Ok(Self {
            n,
            a_n: nf.powf(1.0 / alpha),
            c_n: nf.powf((alpha + 1.0) / (alpha * alpha)),
            wclse_rate: nf.powf((alpha - 1.0) / alpha),
            clse_rate: nf.powf((alpha - 1.0) / (alpha * alpha)),
        })
    }
}

/// Smallest `|F|` accepted before dividing by it.
pub const F_MIN: f64 = 1e-3;

/// `λ̄ = E[1/(1 + X_0)]` under the stationary law and
/// `F = (1 + a/b) λ̄ - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErgodicFunctionals {
    pub lambda_bar: f64,
    pub f: f64,
}

impl ErgodicFunctionals {
    fn from_lambda_bar(params: &ModelParams, lambda_bar: f64) -> Result<Self> {
        let f = (1.0 + params.stationary_mean()) * lambda_bar - 1.0;
        if !(f.abs() >= F_MIN) {
            return Err(Error::Domain(format!("F = {f} is too close to zero to invert")));
        }
        Ok(Self { lambda_bar, f })
    }
}

/// `λ̄` by averaging `1/(1 + x)` over stationary draws.
pub fn estimate_ergodic_functionals(params: &ModelParams, draws: &[f64]) -> Result<ErgodicFunctionals> {
    if draws.is_empty() {
        return Err(Error::Domain("no stationary draws".into()));
    }
    let mut acc = CompensatedSum::default();
    for &x in draws {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(Error::Domain(format!("stationary draw {x} is not a finite nonnegative number")));
        }
        acc.add(1.0 / (1.0 + x));
    }
    ErgodicFunctionals::from_lambda_bar(params, acc.value() / draws.len() as f64)
}

/// `λ̄` by quadrature, from `E[1/(1 + X)] = ∫_0^∞ e^{-s} E[e^{-s X}] ds`
/// with the stationary Laplace transform.
pub fn exact_ergodic_functionals(params: &ModelParams) -> Result<ErgodicFunctionals> {
    let mut failure = None;
    // s = -ln u maps (0, ∞) onto (0, 1)
    let r = integrate(
        |u: f64| match params.stationary_laplace(-u.ln()) {
            Ok(l) => l,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        0.0,
        1.0,
        QuadOptions {
            abs_tol: 1e-11,
            ..QuadOptions::default()
        },
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    ErgodicFunctionals::from_lambda_bar(params, r.value)
}

fn in_u_domain(lam1: f64, lam2: f64) -> bool {
    lam1 >= 0.0 && lam1 + lam2 >= 0.0
}

/// Characteristic function of `(U_1, U_2)`,
///
/// ```text
/// exp{(σ^α/α) E[(λ_1 + λ_2/(1+X_0))^α (q_α + p_α X_0)] e^{-iπα/2}},
/// ```
///
/// with `p_α, q_α` at `t = 1` and the expectation over the supplied
/// stationary draws. Needs `λ_1 >= 0` and `λ_1 + λ_2 >= 0`.
///
/// The part `λ_1^α (q_α + p_α a/b)` of the expectation is exact; only the
/// bounded remainder is averaged.
pub fn charfn_u(params: &ModelParams, lam1: f64, lam2: f64, draws: &[f64]) -> Result<Complex64> {
    if !in_u_domain(lam1, lam2) {
        return Err(Error::Domain(format!(
            "(λ1, λ2) = ({lam1}, {lam2}) needs λ1 >= 0 and λ1 + λ2 >= 0"
        )));
    }
    if draws.is_empty() {
        return Err(Error::Domain("no stationary draws".into()));
    }
    let al = params.alpha();
    let (p, q) = (params.p_alpha(1.0), params.q_alpha(1.0));
    let head = if lam1 == 0.0 { 0.0 } else { lam1.powf(al) };
    let mut acc = CompensatedSum::default();
    for &x in draws {
        let base = (lam1 + lam2 / (1.0 + x)).max(0.0);
        acc.add((base.powf(al) - head) * (q + p * x));
    }
    let mean = head * (q + p * params.stationary_mean()) + acc.value() / draws.len() as f64;
    let phase = Complex64::from_polar(1.0, -PI * al / 2.0);
    Ok((params.sigma().powf(al) / al * mean * phase).exp())
}

/// [`charfn_u`] extended to the reflected region `λ_1 <= 0, λ_1 + λ_2 <= 0`
/// by conjugate symmetry.
pub fn charfn_u_symmetric(params: &ModelParams, lam1: f64, lam2: f64, draws: &[f64]) -> Result<Complex64> {
    if !in_u_domain(lam1, lam2) && in_u_domain(-lam1, -lam2) {
        return Ok(charfn_u(params, -lam1, -lam2, draws)?.conj());
    }
    charfn_u(params, lam1, lam2, draws)
}

/// Whether `(λ_1, λ_2)` can be evaluated by [`charfn_u_symmetric`].
pub fn u_evaluable(lam1: f64, lam2: f64) -> bool {
    in_u_domain(lam1, lam2) || in_u_domain(-lam1, -lam2)
}

/// Law of `V = σ ((e^{-b} - e^{-αb}) / ((α-1) b))^{1/α} Z_1`, accessed
/// through its characteristic function.
pub trait VLaw {
    fn char_fn(&self, u: f64) -> Complex64;

    /// `u` beyond which `|E e^{iuV}|` is below `tol`, if the law has such a
    /// bound.
    fn decay_point(&self, tol: f64) -> Option<f64>;
}

/// The exact characteristic function of `V`.
#[derive(Debug, Clone, Copy)]
pub struct AnalyticV {
    spec: StableSpec,
    scale: f64,
}

impl AnalyticV {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            spec: params.stable_spec(),
            scale: v_scale(params),
        }
    }
}

impl VLaw for AnalyticV {
    fn char_fn(&self, u: f64) -> Complex64 {
        self.spec.char_fn(self.scale * u)
    }

    fn decay_point(&self, tol: f64) -> Option<f64> {
        // |E e^{iuV}| = exp(-|s u|^α |cos(πα/2)| / α)
        let al = self.spec.alpha();
        let damping = (PI * al / 2.0).cos().abs() / al;
        if damping == 0.0 || self.scale == 0.0 {
            return None;
        }
        Some((-tol.ln() / damping).powf(1.0 / al) / self.scale)
    }
}

/// Empirical characteristic function of a sample of `V`, used uncentered
/// since `V` has mean zero.
#[derive(Debug, Clone)]
pub struct EmpiricalV {
    draws: Vec<f64>,
}

impl EmpiricalV {
    pub fn new(draws: Vec<f64>) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::Domain("no draws of V".into()));
        }
        Ok(Self { draws })
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }
}

impl VLaw for EmpiricalV {
    fn char_fn(&self, u: f64) -> Complex64 {
        let (mut re, mut im) = (CompensatedSum::default(), CompensatedSum::default());
        for &v in &self.draws {
            let (s, c) = (u * v).sin_cos();
            re.add(c);
            im.add(s);
        }
        Complex64::new(re.value(), im.value()) / self.draws.len() as f64
    }

    fn decay_point(&self, _tol: f64) -> Option<f64> {
        None
    }
}

/// Numerical settings for [`charfn_s`].
#[derive(Debug, Clone, Copy)]
pub struct SQuadOptions {
    /// Absolute tolerance on the integral.
    pub abs_tol: f64,
    /// The integral is truncated where the integrand is below this bound.
    pub truncation: f64,
    pub max_evals: usize,
}

impl Default for SQuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            truncation: 1e-10,
            max_evals: 2_000_000,
        }
    }
}

/// `∫_0^∞ (1 - e^{-zu}) u^{-s-1} du = -Γ(-s) z^s` for `Re z >= 0`, `0 < s < 1`.
fn power_integral(z: Complex64, s: f64) -> Complex64 {
    if z == Complex64::new(0.0, 0.0) {
        return z;
    }
    let gamma_neg_s = PI / ((-PI * s).sin() * statrs::function::gamma::gamma(1.0 + s));
    -gamma_neg_s * z.powf(s)
}

/// Characteristic function of `(S_1, S_2)`:
///
/// ```text
/// exp{-K ∫_0^∞ E[1 - e^{iλ_1 y² + iλ_2 y^β V_1}] E[e^{iAy² + i c λ_2 y^β V_2}] dy / y^{α+1}}
/// ```
///
/// with `K = a σ^α / (α² b² Γ(-α))`, `β = (α+1)/α`,
/// `A = λ_1 e^{-2b} / (1 - e^{-2b})`, `c = e^{-bβ} / (1 - e^{-b(α+1)})^{1/α}`
/// and `V_1, V_2` independent copies of `V`. Defined for
/// `1 < α < (1 + √5)/2`.
pub fn charfn_s<L: VLaw>(
    params: &ModelParams,
    lam1: f64,
    lam2: f64,
    v_law: &L,
    opts: SQuadOptions,
) -> Result<Complex64> {
    let al = params.alpha();
    if !(al < CLSE_ALPHA_MAX) {
        return Err(Error::Domain(format!(
            "the (S1, S2) limit needs alpha < {CLSE_ALPHA_MAX}, got {al}"
        )));
    }
    if !(lam1.is_finite() && lam2.is_finite()) {
        return Err(Error::Domain("arguments must be finite".into()));
    }
    let b = params.b();
    let k = params.a() * params.sigma().powf(al) / (al * al * b * b * gamma_of_neg(al));
    let damp2 = -(-2.0 * b).exp_m1();
    let aa = lam1 * (-2.0 * b).exp() / damp2;
    let bb = lam1 / damp2;
    let beta = (al + 1.0) / al;
    let c = (-b * beta).exp() / (-(-b * (al + 1.0)).exp_m1()).powf(1.0 / al);

    if lam2 == 0.0 {
        // with u = y² the integral is ½ ∫ (e^{iAu} - e^{iBu}) u^{-α/2-1} du
        let s = al / 2.0;
        let integral = 0.5 * (power_integral(Complex64::new(0.0, -bb), s) - power_integral(Complex64::new(0.0, -aa), s));
        return Ok((-k * integral).exp());
    }

    let integrand = |y: f64| -> Complex64 {
        if y == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let yb = y.powf(beta);
        let inner = v_law.char_fn(c * lam2 * yb);
        let outer = v_law.char_fn(lam2 * yb);
        let e_a = Complex64::from_polar(1.0, aa * y * y);
        let e_b = Complex64::from_polar(1.0, bb * y * y);
        (e_a * inner - e_b * outer * inner) / y.powf(al + 1.0)
    };

    // beyond y_max either the characteristic functions have died out, or
    // the y^{-α-1} envelope (|numerator| <= 2) is below the truncation bound
    let envelope = (2.0 / (al * opts.truncation)).powf(1.0 / al);
    let y_max = match v_law.decay_point(opts.truncation) {
        Some(u) => (u / (c * lam2.abs())).powf(1.0 / beta).min(envelope),
        None => envelope,
    };
    // y = r⁴ removes the y^{1-α} singularity at the origin
    let r_max = y_max.powf(0.25);
    let quad = QuadOptions {
        abs_tol: opts.abs_tol,
        rel_tol: 0.0,
        max_evals: opts.max_evals,
    };
    let r = integrate(
        |r: f64| {
            let y = r * r * r * r;
            integrand(y) * (4.0 * r * r * r)
        },
        0.0,
        r_max,
        quad,
    )?;
    Ok((-k * r.value).exp())
}

/// The linear map taking `(U_1, U_2)` to the limit of
/// `n^{(α-1)/α} (b̌_n - b, ǎ_n - a)`:
///
/// ```text
/// F^{-1} (e^b (U_2 - λ̄ U_1),
///         (1 - e^{-b})^{-1} [a λ̄ + b (λ̄ - 1)] U_1 + (a/b) e^b (U_2 - λ̄ U_1))
/// ```
pub fn limit_map_wclse(u1: f64, u2: f64, params: &ModelParams, erg: &ErgodicFunctionals) -> (f64, f64) {
    let m = wclse_limit_matrix(params, erg);
    (m[0][0] * u1 + m[0][1] * u2, m[1][0] * u1 + m[1][1] * u2)
}

/// Matrix of [`limit_map_wclse`], row-major.
pub fn wclse_limit_matrix(params: &ModelParams, erg: &ErgodicFunctionals) -> [[f64; 2]; 2] {
    let (a, b) = (params.a(), params.b());
    let lb = erg.lambda_bar;
    let eb = b.exp();
    let ratio = a / b;
    let c = (a * lb + b * (lb - 1.0)) / (-(-b).exp_m1());
    let inv_f = 1.0 / erg.f;
    [
        [-eb * lb * inv_f, eb * inv_f],
        [(c - ratio * eb * lb) * inv_f, ratio * eb * inv_f],
    ]
}

/// Characteristic function of the limit of `n^{(α-1)/α} (b̌_n - b, ǎ_n - a)`
/// at `(t_1, t_2)`, i.e. that of `(U_1, U_2)` at `Mᵀ t`, where `M` is
/// [`wclse_limit_matrix`].
pub fn wclse_limit_charfn(
    params: &ModelParams,
    erg: &ErgodicFunctionals,
    t1: f64,
    t2: f64,
    draws: &[f64],
) -> Result<Complex64> {
    let (l1, l2) = wclse_dual_point(params, erg, t1, t2);
    charfn_u_symmetric(params, l1, l2, draws)
}

/// `Mᵀ t` for the matrix `M` of [`wclse_limit_matrix`].
pub fn wclse_dual_point(params: &ModelParams, erg: &ErgodicFunctionals, t1: f64, t2: f64) -> (f64, f64) {
    let m = wclse_limit_matrix(params, erg);
    (m[0][0] * t1 + m[1][0] * t2, m[0][1] * t1 + m[1][1] * t2)
}

/// `(t_1, t_2)` with `Mᵀ t = (λ_1, λ_2)`.
pub fn wclse_primal_point(
    params: &ModelParams,
    erg: &ErgodicFunctionals,
    lam1: f64,
    lam2: f64,
) -> Result<(f64, f64)> {
    let m = wclse_limit_matrix(params, erg);
    // Mᵀ = [[m00, m10], [m01, m11]]
    let det = m[0][0] * m[1][1] - m[1][0] * m[0][1];
    if !(det.abs() > 0.0) || !det.is_finite() {
        return Err(Error::Domain("the limit map is singular".into()));
    }
    Ok((
        (m[1][1] * lam1 - m[1][0] * lam2) / det,
        (m[0][0] * lam2 - m[0][1] * lam1) / det,
    ))
}

/// The map taking `(S_1, S_2)` to the limit of
/// `n^{(α-1)/α²} (b̂_n - b, â_n - a)`: `-e^b (1, a/b) S_2 / S_1`.
pub fn limit_map_clse(s1: f64, s2: f64, params: &ModelParams) -> Result<(f64, f64)> {
    if s1 == 0.0 || !s1.is_finite() {
        return Err(Error::Domain(format!("S1 must be finite and nonzero, got {s1}")));
    }
    let first = -params.b().exp() * s2 / s1;
    Ok((first, first * params.stationary_mean()))
}

/// `(1/N) Σ exp{i(λ_1 v_1 + λ_2 v_2)}`.
pub fn empirical_charfn(samples: &[[f64; 2]], lam1: f64, lam2: f64) -> Result<Complex64> {
    if samples.is_empty() {
        return Err(Error::Domain("no samples".into()));
    }
    let (mut re, mut im) = (CompensatedSum::default(), CompensatedSum::default());
    for v in samples {
        let (s, c) = (lam1 * v[0] + lam2 * v[1]).sin_cos();
        re.add(c);
        im.add(s);
    }
    Ok(Complex64::new(re.value(), im.value()) / samples.len() as f64)
}

/// One row of a theory-versus-simulation characteristic function table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfRow {
    pub lam1: f64,
    pub lam2: f64,
    pub theory: (f64, f64),
    pub empirical: (f64, f64),
}

impl CfRow {
    pub fn new(lam1: f64, lam2: f64, theory: Complex64, empirical: Complex64) -> Self {
        Self {
            lam1,
            lam2,
            theory: (theory.re, theory.im),
            empirical: (empirical.re, empirical.im),
        }
    }

    pub fn abs_err(&self) -> f64 {
        Complex64::new(self.theory.0 - self.empirical.0, self.theory.1 - self.empirical.1).norm()
    }
}

/// Writes `lam1,lam2,re_theory,im_theory,re_emp,im_emp,abs_err`.
pub fn write_cf_table<W: Write>(out: W, rows: &[CfRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lam1", "lam2", "re_theory", "im_theory", "re_emp", "im_emp", "abs_err"])?;
    for r in rows {
        w.write_record([
            g17(r.lam1),
            g17(r.lam2),
            g17(r.theory.0),
            g17(r.theory.1),
            g17(r.empirical.0),
            g17(r.empirical.1),
            g17(r.abs_err()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Arguments in the region `λ_1 >= 0, λ_1 + λ_2 >= 0` where the
/// `(U_1, U_2)` characteristic function is evaluated by default.
pub const U_GRID: [(f64, f64); 9] = [
    (0.5, 0.0),
    (1.0, 0.0),
    (2.0, 0.0),
    (0.5, 0.5),
    (1.0, -0.5),
    (0.3, 1.0),
    (2.0, -1.0),
    (1.0, 1.0),
    (0.0, 1.0),
];

/// Default arguments for the `(S_1, S_2)` characteristic function.
pub const S_GRID: [(f64, f64); 6] = [(0.5, 0.0), (1.0, 0.0), (0.0, 0.5), (0.0, 1.0), (0.5, 0.5), (1.0, -0.5)];

/// Theory versus samples of `(U_{1,n}, U_{2,n})`.
pub fn u_cf_table(
    params: &ModelParams,
    samples: &[[f64; 2]],
    draws: &[f64],
    grid: &[(f64, f64)],
) -> Result<Vec<CfRow>> {
    grid.iter()
        .map(|&(l1, l2)| {
            Ok(CfRow::new(
                l1,
                l2,
                charfn_u_symmetric(params, l1, l2, draws)?,
                empirical_charfn(samples, l1, l2)?,
            ))
        })
        .collect()
}

/// Theory versus samples of `n^{(α-1)/α} (b̌_n - b, ǎ_n - a)`. Each point
/// `(λ_1, λ_2)` of `dual_grid` is an argument of the `(U_1, U_2)`
/// characteristic function; the row holds the matching argument `t` with
/// `Mᵀ t = λ` of the estimator-error characteristic function.
pub fn wclse_cf_table(
    params: &ModelParams,
    erg: &ErgodicFunctionals,
    scaled_errors: &[[f64; 2]],
    draws: &[f64],
    dual_grid: &[(f64, f64)],
) -> Result<Vec<CfRow>> {
    dual_grid
        .iter()
        .map(|&(l1, l2)| {
            let (t1, t2) = wclse_primal_point(params, erg, l1, l2)?;
            Ok(CfRow::new(
                t1,
                t2,
                charfn_u_symmetric(params, l1, l2, draws)?,
                empirical_charfn(scaled_errors, t1, t2)?,
            ))
        })
        .collect()
}

/// Theory versus samples of `(a_n^{-2} S_{1,n}, c_n^{-1} S_{2,n})`.
pub fn s_cf_table<L: VLaw>(
    params: &ModelParams,
    samples: &[[f64; 2]],
    v_law: &L,
    grid: &[(f64, f64)],
) -> Result<Vec<CfRow>> {
    grid.iter()
        .map(|&(l1, l2)| {
            Ok(CfRow::new(
                l1,
                l2,
                charfn_s(params, l1, l2, v_law, SQuadOptions::default())?,
                empirical_charfn(samples, l1, l2)?,
            ))
        })
        .collect()
}

/// Normalized partial sums of one low-frequency sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialSums {
    /// `a_n^{-1} Σ ε_k`
    pub u1: f64,
    /// `a_n^{-1} Σ ε_k / (1 + X_{k-1})`
    pub u2: f64,
    /// `a_n^{-2} Σ X_{k-1}²`
    pub s1: f64,
    /// `c_n^{-1} Σ X_{k-1} ε_k`
    pub s2: f64,
}

/// Partial sums built from the true residuals
/// `ε_k = X_k - γ X_{k-1} - ρ`.
pub fn partial_sums(params: &ModelParams, x: &[f64]) -> Result<PartialSums> {
    if x.len() < 2 {
        return Err(Error::Domain("need at least two observations".into()));
    }
    let sched = NormalizationSchedule::new(x.len() - 1, params.alpha())?;
    let d = params.derived();
    let mut u1 = CompensatedSum::default();
    let mut u2 = CompensatedSum::default();
    let mut s1 = CompensatedSum::default();
    let mut s2 = CompensatedSum::default();
    for w in x.windows(2) {
        let eps = w[1] - d.gamma * w[0] - d.rho;
        u1.add(eps);
        u2.add(eps / (1.0 + w[0]));
        s1.add(w[0] * w[0]);
        s2.add(w[0] * eps);
    }
    Ok(PartialSums {
        u1: u1.value() / sched.a_n,
        u2: u2.value() / sched.a_n,
        s1: s1.value() / (sched.a_n * sched.a_n),
        s2: s2.value() / sched.c_n,
    })
}
