//! Volterra kernels K(t,s) for the four supported Gaussian families —
//! Brownian motion, the Ornstein–Uhlenbeck process, fractional Brownian
//! motion (Molčan–Golosov representation), the Riemann–Liouville fractional
//! Brownian motion, and the fractional Ornstein–Uhlenbeck process — together
//! with their cell integrals, covariances, and regularity diagnostics.
//!
//! The fractional kernel is evaluated in the scaled form
//! `K(t,s) = c_H · s^{H-1/2} · F_H(r)` with `r = (t-s)/s`, which makes the
//! singular structure at `s → 0` and `s → t` explicit and keeps every inner
//! integral smooth after an endpoint substitution. Quadrature integrands are
//! driven through [`crate::quad::integrate_singular`], which supplies the
//! distance to each endpoint without cancellation; the near-diagonal gap
//! `t - u` must always be taken from there, never recomputed as a difference
//! of times.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;
use crate::quad::{self, QuadOpts};
use crate::stats;

/// Supported kernel families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Brownian,
    OrnsteinUhlenbeck,
    Fbm,
    RiemannLiouville,
    FractionalOu,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Brownian => "brownian",
            KernelFamily::OrnsteinUhlenbeck => "ornstein_uhlenbeck",
            KernelFamily::Fbm => "fbm",
            KernelFamily::RiemannLiouville => "riemann_liouville",
            KernelFamily::FractionalOu => "fractional_ou",
        }
    }

    fn uses_hurst(self) -> bool {
        matches!(
            self,
            KernelFamily::Fbm | KernelFamily::RiemannLiouville | KernelFamily::FractionalOu
        )
    }

    fn uses_mean_reversion(self) -> bool {
        matches!(
            self,
            KernelFamily::OrnsteinUhlenbeck | KernelFamily::FractionalOu
        )
    }
}

/// Declarative description of a Volterra kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    /// Hurst parameter, ignored for `brownian` and `ornstein_uhlenbeck`.
    #[serde(default = "default_hurst")]
    pub h: f64,
    /// Mean-reversion rate, OU families only.
    #[serde(default)]
    pub a: f64,
    /// Time horizon.
    pub t_horizon: f64,
}

fn default_hurst() -> f64 {
    0.5
}

impl KernelSpec {
    pub fn brownian(t_horizon: f64) -> Result<Self> {
        KernelSpec {
            family: KernelFamily::Brownian,
            h: 0.5,
            a: 0.0,
            t_horizon,
        }
        .validated()
    }

    pub fn ornstein_uhlenbeck(a: f64, t_horizon: f64) -> Result<Self> {
        KernelSpec {
            family: KernelFamily::OrnsteinUhlenbeck,
            h: 0.5,
            a,
            t_horizon,
        }
        .validated()
    }

    pub fn fbm(h: f64, t_horizon: f64) -> Result<Self> {
        KernelSpec {
            family: KernelFamily::Fbm,
            h,
            a: 0.0,
            t_horizon,
        }
        .validated()
    }

    pub fn riemann_liouville(h: f64, t_horizon: f64) -> Result<Self> {
        KernelSpec {
            family: KernelFamily::RiemannLiouville,
            h,
            a: 0.0,
            t_horizon,
        }
        .validated()
    }

    pub fn fractional_ou(h: f64, a: f64, t_horizon: f64) -> Result<Self> {
        KernelSpec {
            family: KernelFamily::FractionalOu,
            h,
            a,
            t_horizon,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_horizon > 0.0) || !self.t_horizon.is_finite() {
            return Err(Error::domain("kernel.t_horizon: must be finite and > 0"));
        }
        if self.family.uses_hurst() && !(self.h > 0.0 && self.h < 1.0) {
            return Err(Error::domain(
                "kernel.h: Hurst parameter must lie in (0, 1)",
            ));
        }
        if self.family.uses_mean_reversion() && !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::domain("kernel.a: mean-reversion rate must be > 0"));
        }
        Ok(())
    }

    /// Hurst index governing the kernel's L² modulus (1/2 for the Brownian
    /// and Ornstein–Uhlenbeck kernels).
    pub fn intrinsic_hurst(&self) -> f64 {
        if self.family.uses_hurst() {
            self.h
        } else {
            0.5
        }
    }

    fn check_time(&self, label: &str, v: f64) -> Result<()> {
        if !(0.0..=self.t_horizon).contains(&v) {
            return Err(Error::domain(format!(
                "{label} = {v} outside [0, {}]",
                self.t_horizon
            )));
        }
        Ok(())
    }
}

/// Discretized covariance C(t_i, t_j) over a time grid.
#[derive(Debug, Clone)]
pub struct CovarianceGrid {
    pub times: Vec<f64>,
    pub matrix: SquareMatrix,
}

/// Normalizer of the Molčan–Golosov kernel.
pub fn fbm_normalizer(h: f64) -> f64 {
    (2.0 * h * libm::tgamma(1.5 - h) / (libm::tgamma(h + 0.5) * libm::tgamma(2.0 - 2.0 * h))).sqrt()
}

/// Closed-form fBm covariance ½(t^{2H} + s^{2H} − |t−s|^{2H}).
pub fn fbm_covariance_closed_form(h: f64, t: f64, s: f64) -> f64 {
    let p = 2.0 * h;
    0.5 * (t.powf(p) + s.powf(p) - (t - s).abs().powf(p))
}

const J_SPLIT: f64 = 1.0;
const J_TAIL_CUTOFF: f64 = 1e12;

/// ∫_0^c (1+u)^gamma u^delta du for c ≤ 1 with delta ∈ (-1, 0); substitution
/// u = v^{1/(1+delta)} leaves a smooth integrand.
fn j_lower(c: f64, gamma: f64, delta: f64) -> Result<f64> {
    if c <= 0.0 {
        return Ok(0.0);
    }
    let q = 1.0 / (1.0 + delta);
    let vmax = c.powf(1.0 / q);
    quad::integrate(
        |v| q * (1.0 + v.powf(q)).powf(gamma),
        0.0,
        vmax,
        QuadOpts::tight(),
    )
}

/// ∫_1^r (1+u)^gamma u^delta du in log space.
fn j_upper(r: f64, gamma: f64, delta: f64) -> Result<f64> {
    if r <= J_SPLIT {
        return Ok(0.0);
    }
    quad::integrate(
        |x| {
            let ex = x.exp();
            (1.0 + ex).powf(gamma) * (x * (delta + 1.0)).exp()
        },
        0.0,
        r.ln(),
        QuadOpts::tight(),
    )
}

/// ∫_0^r (1+u)^gamma u^delta du with an asymptotic continuation for very
/// large r, where (1+u)^gamma u^delta ≈ u^{gamma+delta}.
fn j_integral(r: f64, gamma: f64, delta: f64) -> Result<f64> {
    let r_eff = r.min(J_TAIL_CUTOFF);
    let mut total = j_lower(r_eff.min(J_SPLIT), gamma, delta)? + j_upper(r_eff, gamma, delta)?;
    if r > J_TAIL_CUTOFF {
        let p = gamma + delta + 1.0;
        if p.abs() > 1e-12 {
            let r_cap = r.min(1e280);
            total += (r_cap.powf(p) - J_TAIL_CUTOFF.powf(p)) / p;
        }
    }
    Ok(total)
}

/// Scaled Molčan–Golosov profile: K(s(1+r), s) = c_H s^{H-1/2} F_H(r).
fn fbm_profile(h: f64, r: f64) -> Result<f64> {
    if h > 0.5 {
        Ok((h - 0.5) * j_integral(r, h - 0.5, h - 1.5)?)
    } else {
        Ok(((1.0 + r) * r).powf(h - 0.5) + (0.5 - h) * j_integral(r, h - 1.5, h - 0.5)?)
    }
}

/// K(s + gap, s) for the fBm kernel, gap > 0.
fn fbm_eval_gap(h: f64, s: f64, gap: f64) -> Result<f64> {
    if h == 0.5 {
        return Ok(1.0);
    }
    if s == 0.0 {
        return Ok(f64::INFINITY);
    }
    let r = gap / s;
    Ok(fbm_normalizer(h) * s.powf(h - 0.5) * fbm_profile(h, r)?)
}

/// Build-once tabulation of ln F_H against ln r, shared across threads. The
/// profile depends on the Hurst index alone, so one table serves every
/// (t, s) pair; it is refined until it reproduces the direct quadrature to
/// `PROFILE_TOL` at probe points, and evaluation falls back to the exact
/// route outside the tabulated range.
struct FbmProfileTable {
    h: f64,
    ln_r_min: f64,
    step: f64,
    ln_values: Vec<f64>,
}

const PROFILE_TOL: f64 = 1e-7;

impl FbmProfileTable {
    fn build(h: f64) -> Result<FbmProfileTable> {
        let (ln_r_min, ln_r_max) = (-21.0, 21.0);
        let mut n = 2048usize;
        loop {
            let step = (ln_r_max - ln_r_min) / (n - 1) as f64;
            let mut ln_values = Vec::with_capacity(n);
            for i in 0..n {
                let r = (ln_r_min + i as f64 * step).exp();
                ln_values.push(fbm_profile(h, r)?.ln());
            }
            let table = FbmProfileTable {
                h,
                ln_r_min,
                step,
                ln_values,
            };
            // Validate against the direct route at off-node probes.
            let mut ok = true;
            for k in 0..48 {
                let ln_r = ln_r_min
                    + 2.0 * step
                    + (ln_r_max - ln_r_min - 4.0 * step) * (k as f64 + 0.37) / 48.0;
                let r = ln_r.exp();
                let direct = fbm_profile(h, r)?;
                let interp = table.eval(r).expect("probe inside table range");
                if (interp - direct).abs() > PROFILE_TOL * direct.abs() {
                    ok = false;
                    break;
                }
            }
            if ok {
                return Ok(table);
            }
            n *= 2;
            if n > 32_768 {
                return Err(Error::Estimation(
                    "fbm profile table failed to converge".into(),
                ));
            }
        }
    }

    /// Catmull–Rom interpolation of ln F in ln r; None outside the range.
    fn eval(&self, r: f64) -> Option<f64> {
        let x = (r.ln() - self.ln_r_min) / self.step;
        if !(x >= 1.0) || x >= (self.ln_values.len() - 3) as f64 {
            return None;
        }
        let i = x as usize;
        let t = x - i as f64;
        let (p0, p1, p2, p3) = (
            self.ln_values[i - 1],
            self.ln_values[i],
            self.ln_values[i + 1],
            self.ln_values[i + 2],
        );
        let v = p1
            + 0.5
                * t
                * (p2 - p0
                    + t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + t * (3.0 * (p1 - p2) + p3 - p0)));
        Some(v.exp())
    }
}

fn profile_table(h: f64) -> Result<std::sync::Arc<FbmProfileTable>> {
    use std::collections::HashMap;
    use std::sync::{Arc, Mutex, OnceLock};
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<FbmProfileTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = h.to_bits();
    if let Some(t) = cache.lock().expect("profile cache lock").get(&key) {
        return Ok(t.clone());
    }
    // Built outside the lock; a racing duplicate build is harmless.
    let table = Arc::new(FbmProfileTable::build(h)?);
    cache
        .lock()
        .expect("profile cache lock")
        .entry(key)
        .or_insert(table.clone());
    Ok(table)
}

/// Tabulated fBm kernel evaluation used inside the fractional-OU
/// convolution; exact quadrature outside the table range.
fn fbm_eval_gap_tabulated(table: &FbmProfileTable, s: f64, gap: f64) -> Result<f64> {
    let h = table.h;
    if h == 0.5 {
        return Ok(1.0);
    }
    if s == 0.0 {
        return Ok(f64::INFINITY);
    }
    let r = gap / s;
    let profile = match table.eval(r) {
        Some(v) => v,
        None => fbm_profile(h, r)?,
    };
    Ok(fbm_normalizer(h) * s.powf(h - 0.5) * profile)
}

fn fou_eval_gap(h: f64, a: f64, s: f64, gap: f64) -> Result<f64> {
    let base = fbm_eval_gap(h, s, gap)?;
    let table = profile_table(h)?;
    // Convolution a ∫_0^gap e^{-a(gap-w)} K_H(s+w, s) dw, singular like
    // w^{H-1/2} at w → 0 for H < 1/2.
    let conv = quad::integrate_singular(
        |_, da, db| (-a * db).exp() * fbm_eval_gap_tabulated(&table, s, da).unwrap_or(f64::NAN),
        0.0,
        gap,
        (h - 0.5).min(0.0),
        0.0,
        QuadOpts::default(),
    )?;
    Ok(base - a * conv)
}

/// Raw kernel value for `gap = t - s > 0`; the zero-measure diagonal and the
/// region above it are handled by [`kernel_eval`].
fn eval_gap(spec: &KernelSpec, s: f64, gap: f64) -> Result<f64> {
    match spec.family {
        KernelFamily::Brownian => Ok(1.0),
        KernelFamily::OrnsteinUhlenbeck => Ok((-spec.a * gap).exp()),
        KernelFamily::RiemannLiouville => Ok(gap.powf(spec.h - 0.5) / libm::tgamma(spec.h + 0.5)),
        KernelFamily::Fbm => fbm_eval_gap(spec.h, s, gap),
        KernelFamily::FractionalOu => fou_eval_gap(spec.h, spec.a, s, gap),
    }
}

/// Limit of K(t, s) as s ↑ t where finite, 0 where the kernel diverges.
fn diagonal_value(spec: &KernelSpec) -> f64 {
    match spec.family {
        KernelFamily::Brownian | KernelFamily::OrnsteinUhlenbeck => 1.0,
        KernelFamily::RiemannLiouville | KernelFamily::Fbm | KernelFamily::FractionalOu => {
            if spec.h == 0.5 {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Endpoint singularity exponents of s ↦ K(t, s): at s → 0 and at s ↑ t.
fn single_hints(spec: &KernelSpec) -> (f64, f64) {
    let h = spec.h;
    match spec.family {
        KernelFamily::Brownian | KernelFamily::OrnsteinUhlenbeck => (0.0, 0.0),
        KernelFamily::RiemannLiouville => (0.0, (h - 0.5).min(0.0)),
        KernelFamily::Fbm | KernelFamily::FractionalOu => (-(h - 0.5).abs(), (h - 0.5).min(0.0)),
    }
}

/// Endpoint exponents for integrands quadratic in the kernel (covariance and
/// modulus integrals).
fn squared_hints(spec: &KernelSpec) -> (f64, f64) {
    let (z, d) = single_hints(spec);
    (2.0 * z, 2.0 * d)
}

/// K(t, s). Zero above the diagonal and at t = 0; on the diagonal the limit
/// from below where finite, 0 where the kernel diverges.
pub fn kernel_eval(spec: &KernelSpec, t: f64, s: f64) -> Result<f64> {
    spec.validate()?;
    spec.check_time("t", t)?;
    spec.check_time("s", s)?;
    if t <= 0.0 || t < s {
        return Ok(0.0);
    }
    if t == s {
        return Ok(diagonal_value(spec));
    }
    eval_gap(spec, s, t - s)
}

/// ∫_{u_lo}^{min(u_hi, t)} K(t, u) du; zero if u_lo ≥ t.
pub fn kernel_cell_integral(spec: &KernelSpec, t: f64, u_lo: f64, u_hi: f64) -> Result<f64> {
    spec.validate()?;
    spec.check_time("t", t)?;
    spec.check_time("u_lo", u_lo)?;
    spec.check_time("u_hi", u_hi)?;
    if u_lo > u_hi {
        return Err(Error::domain(format!("cell [{u_lo}, {u_hi}] is reversed")));
    }
    let hi = u_hi.min(t);
    if u_lo >= hi {
        return Ok(0.0);
    }
    match spec.family {
        KernelFamily::Brownian => Ok(hi - u_lo),
        KernelFamily::OrnsteinUhlenbeck => {
            let a = spec.a;
            Ok(((-a * (t - hi)).exp() - (-a * (t - u_lo)).exp()) / a)
        }
        KernelFamily::RiemannLiouville => {
            let p = spec.h + 0.5;
            Ok(((t - u_lo).powf(p) - (t - hi).powf(p)) / (p * libm::tgamma(p)))
        }
        KernelFamily::Fbm | KernelFamily::FractionalOu => {
            let (alpha_zero, alpha_diag) = single_hints(spec);
            let alpha_a = if u_lo == 0.0 { alpha_zero } else { 0.0 };
            let alpha_b = if hi == t { alpha_diag } else { 0.0 };
            let tail = t - hi;
            quad::integrate_singular(
                |u, da, db| {
                    let base = if u_lo == 0.0 { da } else { u };
                    eval_gap(spec, base, tail + db).unwrap_or(f64::NAN)
                },
                u_lo,
                hi,
                alpha_a,
                alpha_b,
                QuadOpts::default(),
            )
        }
    }
}

/// Covariance C(t, s) = ∫_0^{min(t,s)} K(t,u) K(s,u) du by adaptive
/// quadrature.
pub fn covariance(spec: &KernelSpec, t: f64, s: f64) -> Result<f64> {
    spec.validate()?;
    spec.check_time("t", t)?;
    spec.check_time("s", s)?;
    let (lo_time, hi_time) = if t <= s { (t, s) } else { (s, t) };
    if lo_time <= 0.0 {
        return Ok(0.0);
    }
    match spec.family {
        KernelFamily::Brownian => Ok(lo_time),
        KernelFamily::OrnsteinUhlenbeck => {
            let a = spec.a;
            Ok((-a * (hi_time - lo_time)).exp() * (1.0 - (-2.0 * a * lo_time).exp()) / (2.0 * a))
        }
        _ => {
            let (alpha_zero, _) = squared_hints(spec);
            let (_, single_diag) = single_hints(spec);
            let alpha_b = if lo_time == hi_time {
                2.0 * single_diag
            } else {
                single_diag
            };
            let offset = hi_time - lo_time;
            quad::integrate_singular(
                |_, da, db| {
                    let base = da; // exact near zero, equals u elsewhere
                    let k_near = eval_gap(spec, base, db).unwrap_or(f64::NAN);
                    let k_far = eval_gap(spec, base, offset + db).unwrap_or(f64::NAN);
                    k_near * k_far
                },
                0.0,
                lo_time,
                alpha_zero,
                alpha_b,
                QuadOpts::default(),
            )
        }
    }
}

/// Covariance used by the matrix builders: the fBm closed form where it
/// applies (validated against the quadrature by the acceptance suite), the
/// quadrature of [`covariance`] otherwise.
pub(crate) fn covariance_fast(spec: &KernelSpec, t: f64, s: f64) -> Result<f64> {
    match spec.family {
        KernelFamily::Fbm => Ok(fbm_covariance_closed_form(spec.h, t, s)),
        _ => covariance(spec, t, s),
    }
}

/// E[B_s B̂_t] = ∫_0^{min(s,t)} K(t, u) du.
pub fn cross_covariance(spec: &KernelSpec, s_brownian: f64, t_volterra: f64) -> Result<f64> {
    spec.validate()?;
    spec.check_time("s_brownian", s_brownian)?;
    spec.check_time("t_volterra", t_volterra)?;
    if t_volterra <= 0.0 || s_brownian <= 0.0 {
        return Ok(0.0);
    }
    kernel_cell_integral(spec, t_volterra, 0.0, s_brownian.min(t_volterra))
}

/// Covariance matrix over an arbitrary time grid (quadrature-based).
pub fn covariance_grid(spec: &KernelSpec, times: &[f64]) -> Result<CovarianceGrid> {
    spec.validate()?;
    for w in times.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::domain(
                "covariance grid times must be strictly increasing",
            ));
        }
    }
    if let Some(&last) = times.last() {
        spec.check_time("grid time", last)?;
    }
    if let Some(&first) = times.first() {
        if first < 0.0 {
            return Err(Error::domain("covariance grid times must be nonnegative"));
        }
    }
    let n = times.len();
    let mut matrix = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let c = covariance(spec, times[i], times[j])?;
            matrix.set(i, j, c);
            matrix.set(j, i, c);
        }
    }
    Ok(CovarianceGrid {
        times: times.to_vec(),
        matrix,
    })
}

/// One L² increment integral ∫_0^T |K(t+h, s) − K(t, s)|² ds.
///
/// The result scales like h^{2H}, which for small steps and large H sits far
/// below the default absolute quadrature floor, so the tolerance here is
/// relative-dominated.
fn increment_l2(spec: &KernelSpec, t1: f64, h: f64) -> Result<f64> {
    let opts = QuadOpts {
        abs_tol: 1e-14,
        rel_tol: 1e-9,
        max_intervals: 2400,
    };
    let t2 = t1 + h;
    let (alpha_zero_sq, alpha_diag_sq) = squared_hints(spec);
    // Piece over [0, t1]: both kernels live; difference squared.
    let piece1 = if t1 > 0.0 {
        quad::integrate_singular(
            |_, da, db| {
                let k1 = eval_gap(spec, da, db).unwrap_or(f64::NAN);
                let k2 = eval_gap(spec, da, h + db).unwrap_or(f64::NAN);
                let d = k1 - k2;
                d * d
            },
            0.0,
            t1,
            alpha_zero_sq,
            alpha_diag_sq,
            opts,
        )?
    } else {
        0.0
    };
    // Piece over [t1, t2]: only K(t2, ·) is non-zero.
    let piece2 = quad::integrate_singular(
        |u, _, db| {
            let k2 = eval_gap(spec, u, db).unwrap_or(f64::NAN);
            k2 * k2
        },
        t1,
        t2,
        if t1 == 0.0 { alpha_zero_sq } else { 0.0 },
        alpha_diag_sq,
        opts,
    )?;
    Ok(piece1 + piece2)
}

/// Modulus M(h): max over sampled pairs t₂ = t₁ + h of the L² increment
/// integral, with t₁ on a uniform grid of `t_samples` points in [0, T − h].
pub fn modulus_l2(spec: &KernelSpec, h: f64, t_samples: usize) -> Result<f64> {
    spec.validate()?;
    if !(h > 0.0 && h <= spec.t_horizon) {
        return Err(Error::domain(format!(
            "modulus step h = {h} must lie in (0, {}]",
            spec.t_horizon
        )));
    }
    if t_samples == 0 {
        return Err(Error::domain("t_samples must be at least 1"));
    }
    let span = spec.t_horizon - h;
    let mut worst = 0.0_f64;
    for i in 0..t_samples {
        let t1 = if t_samples == 1 {
            span
        } else {
            span * i as f64 / (t_samples - 1) as f64
        };
        worst = worst.max(increment_l2(spec, t1, h)?);
    }
    Ok(worst)
}

/// Least-squares slope of log M(h) against log h; estimates the Hölder
/// exponent α = 2H of the kernel's L² modulus.
pub fn holder_slope(spec: &KernelSpec, h_grid: &[f64]) -> Result<f64> {
    spec.validate()?;
    if h_grid.len() < 2 {
        return Err(Error::domain("h_grid needs at least two points"));
    }
    let mut lo = f64::INFINITY;
    let mut hi = 0.0_f64;
    for &h in h_grid {
        if !(h > 0.0 && h <= spec.t_horizon) {
            return Err(Error::domain(format!("h = {h} outside (0, T]")));
        }
        lo = lo.min(h);
        hi = hi.max(h);
    }
    if hi / lo < 100.0 {
        return Err(Error::domain("h_grid must span at least two decades"));
    }
    let mut log_h = Vec::with_capacity(h_grid.len());
    let mut log_m = Vec::with_capacity(h_grid.len());
    for &h in h_grid {
        log_h.push(h.ln());
        log_m.push(modulus_l2(spec, h, 5)?.ln());
    }
    Ok(stats::ols(&log_h, &log_m).slope)
}

/// Relative defect of the self-similarity identity
/// K(t,s) = ε^{1/2−H} K(εt, εs), maximized over sampled pairs s < t.
pub fn self_similarity_defect(spec: &KernelSpec, eps: f64, samples: usize) -> Result<f64> {
    spec.validate()?;
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::domain("eps must lie in (0, 1]"));
    }
    if samples == 0 {
        return Err(Error::domain("samples must be at least 1"));
    }
    let h = spec.intrinsic_hurst();
    let fractions = [0.15, 0.35, 0.55, 0.75, 0.95];
    let mut worst = 0.0_f64;
    for i in 1..=samples {
        let t = spec.t_horizon * i as f64 / samples as f64;
        for &fr in &fractions {
            let s = fr * t;
            let k = kernel_eval(spec, t, s)?;
            let k_scaled = eps.powf(0.5 - h) * kernel_eval(spec, eps * t, eps * s)?;
            worst = worst.max((k - k_scaled).abs() / (1.0 + k.abs()));
        }
    }
    Ok(worst)
}

/// Gate tolerance used by small-time workflows.
pub const SELF_SIMILARITY_GATE: f64 = 1e-6;

/// Evaluate the self-similarity gate: Ok(defect) when it passes, the
/// gate-refusal error otherwise.
pub fn self_similarity_gate(spec: &KernelSpec) -> Result<f64> {
    let defect = self_similarity_defect(spec, 0.5, 12)?;
    if defect > SELF_SIMILARITY_GATE {
        return Err(Error::GateRefused {
            defect,
            tolerance: SELF_SIMILARITY_GATE,
        });
    }
    Ok(defect)
}

/// Minimal kernel interface needed by the rate solver; implemented by
/// [`KernelSpec`] and by the unit-interval rescaling used for small-time rate
/// functions.
pub(crate) trait VolterraKernel {
    fn horizon(&self) -> f64;
    fn cell_integral(&self, t: f64, u_lo: f64, u_hi: f64) -> Result<f64>;
}

impl VolterraKernel for KernelSpec {
    fn horizon(&self) -> f64 {
        self.t_horizon
    }

    fn cell_integral(&self, t: f64, u_lo: f64, u_hi: f64) -> Result<f64> {
        kernel_cell_integral(self, t, u_lo, u_hi)
    }
}

/// K̃_T(r, u) = T^{1/2−H} K(Tr, Tu) on the unit interval.
pub(crate) struct RescaledKernel<'a> {
    pub base: &'a KernelSpec,
    pub h: f64,
}

impl VolterraKernel for RescaledKernel<'_> {
    fn horizon(&self) -> f64 {
        1.0
    }

    fn cell_integral(&self, t: f64, u_lo: f64, u_hi: f64) -> Result<f64> {
        let t_big = self.base.t_horizon;
        let scale = t_big.powf(-0.5 - self.h);
        Ok(scale * kernel_cell_integral(self.base, t_big * t, t_big * u_lo, t_big * u_hi)?)
    }
}
