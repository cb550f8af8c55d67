//! Asymptotic outputs: binary-option log-price limits, call/put log-price
//! asymptotes, the implied-volatility limit |y|/√(2I), and a Black–Scholes
//! implied-volatility inverter for comparing Monte Carlo prices against the
//! limits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels;
use crate::mc::ModelSpec;
use crate::rate::{self, HatMethod, RateResult, SolverConfig};
use crate::stats::normal_cdf;

/// Asymptotic regime: ε ↓ 0 at fixed horizon, or maturity ↓ 0 for
/// self-similar kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    SmallNoise,
    SmallTime,
}

/// Option side for the call/put asymptote.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionSide {
    Call,
    Put,
}

fn rate_for(model: &ModelSpec, y: f64, regime: Regime, cfg: &SolverConfig) -> Result<RateResult> {
    match regime {
        Regime::SmallNoise => rate::rate_function(&model.kernel, &model.sigma, model.rho, y, cfg),
        Regime::SmallTime => {
            let h = model.h_scaling;
            if !(h > 0.0 && h < 1.0) {
                return Err(Error::domain("small-time regime requires H in (0, 1)"));
            }
            if (h - model.kernel.intrinsic_hurst()).abs() > 1e-12 {
                return Err(Error::domain(
                    "small-time regime requires h_scaling equal to the kernel's Hurst index",
                ));
            }
            kernels::self_similarity_gate(&model.kernel)?;
            rate::rate_function_hat(
                &model.kernel,
                &model.sigma,
                model.rho,
                h,
                y,
                cfg,
                HatMethod::Direct,
            )
        }
    }
}

/// Binary-option log-asymptote: −I_T(y) (small noise) or −Î(y) (small time),
/// for y ≠ 0. Positive log-moneyness uses the upper ray, negative the lower.
pub fn binary_asymptote(
    model: &ModelSpec,
    y: f64,
    regime: Regime,
    cfg: &SolverConfig,
) -> Result<f64> {
    model.validate()?;
    if y == 0.0 {
        return Err(Error::domain("binary asymptote requires y != 0"));
    }
    Ok(-rate_for(model, y, regime, cfg)?.value)
}

/// Call/put log-price asymptote, equal to the binary asymptote.
#[derive(Debug, Clone, Copy)]
pub struct CallPutAsymptote {
    pub value: f64,
    pub side: OptionSide,
    /// Set when σ violates the linear growth condition: the asymptote is
    /// still computed, but the martingality hypothesis behind it fails.
    pub growth_warning: bool,
}

pub fn call_put_asymptote(
    model: &ModelSpec,
    y: f64,
    side: OptionSide,
    regime: Regime,
    cfg: &SolverConfig,
) -> Result<CallPutAsymptote> {
    model.validate()?;
    match side {
        OptionSide::Call if y <= 0.0 => {
            return Err(Error::domain("call asymptote requires y > 0"));
        }
        OptionSide::Put if y >= 0.0 => {
            return Err(Error::domain("put asymptote requires y < 0"));
        }
        _ => {}
    }
    Ok(CallPutAsymptote {
        value: -rate_for(model, y, regime, cfg)?.value,
        side,
        growth_warning: model.growth_warning(),
    })
}

const DEGENERATE_RATE_TOL: f64 = 1e-10;

/// Implied-volatility limit |y|/√(2 I(y)); errors when the rate is
/// numerically zero (the limit is undefined there).
pub fn implied_vol_limit(
    model: &ModelSpec,
    y: f64,
    regime: Regime,
    cfg: &SolverConfig,
) -> Result<f64> {
    model.validate()?;
    if y == 0.0 {
        return Err(Error::domain("implied-volatility limit requires y != 0"));
    }
    let rate = rate_for(model, y, regime, cfg)?.value;
    if rate <= DEGENERATE_RATE_TOL {
        return Err(Error::DegenerateRate { rate });
    }
    Ok(y.abs() / (2.0 * rate).sqrt())
}

/// Undiscounted Black–Scholes call price with zero rate.
pub fn bs_call_price(spot: f64, strike: f64, maturity: f64, vol: f64) -> f64 {
    if vol <= 0.0 || maturity <= 0.0 {
        return (spot - strike).max(0.0);
    }
    let total = vol * maturity.sqrt();
    let d1 = ((spot / strike).ln() + 0.5 * total * total) / total;
    let d2 = d1 - total;
    spot * normal_cdf(d1) - strike * normal_cdf(d2)
}

/// Vega of the zero-rate Black–Scholes call.
fn bs_vega(spot: f64, strike: f64, maturity: f64, vol: f64) -> f64 {
    let total = vol * maturity.sqrt();
    let d1 = ((spot / strike).ln() + 0.5 * total * total) / total;
    let phi = (-0.5 * d1 * d1).exp() / (2.0 * std::f64::consts::PI).sqrt();
    spot * phi * maturity.sqrt()
}

/// Implied volatility of a call price by safeguarded Newton/bisection to
/// 1e-10 in volatility. The price must lie strictly inside the no-arbitrage
/// band ((spot − strike)⁺, spot).
pub fn bs_implied_vol(price: f64, spot: f64, strike: f64, maturity: f64) -> Result<f64> {
    if !(spot > 0.0 && strike > 0.0 && maturity > 0.0) {
        return Err(Error::domain("spot, strike, and maturity must be positive"));
    }
    let intrinsic = (spot - strike).max(0.0);
    if !(price > intrinsic && price < spot) {
        return Err(Error::domain(format!(
            "price {price} outside the no-arbitrage band ({intrinsic}, {spot})"
        )));
    }
    // Bracket the root: C(σ) is strictly increasing from intrinsic to spot.
    let mut lo = 1e-12;
    let mut hi = 1.0;
    while bs_call_price(spot, strike, maturity, hi) < price {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Estimation(
                "implied volatility bracket failed".into(),
            ));
        }
    }
    let mut vol = 0.5 * (lo + hi);
    for _ in 0..200 {
        let diff = bs_call_price(spot, strike, maturity, vol) - price;
        if diff > 0.0 {
            hi = vol;
        } else {
            lo = vol;
        }
        let vega = bs_vega(spot, strike, maturity, vol);
        let mut next = if vega > 1e-14 {
            vol - diff / vega
        } else {
            f64::NAN
        };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - vol).abs() <= 1e-10 {
            return Ok(next);
        }
        vol = next;
    }
    Ok(vol)
}

/// Row state in a smile table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmileFlag {
    Ok,
    ZeroLogMoneyness,
    DegenerateRate,
}

/// One smile row: rate values, binary/call log-asymptote, and the
/// implied-volatility limit (NaN on flagged rows).
#[derive(Debug, Clone)]
pub struct SmileRow {
    pub y: f64,
    pub rate: f64,
    pub rate_hat: f64,
    pub binary: f64,
    pub ivol_limit: f64,
    pub side: Option<OptionSide>,
    pub flag: SmileFlag,
}

#[derive(Debug, Clone)]
pub struct SmileTable {
    pub regime: Regime,
    pub rows: Vec<SmileRow>,
    pub growth_warning: bool,
}

/// Assemble the per-y asymptotics into a table; failed rows are flagged and
/// skipped rather than aborting the sweep. In the small-time regime the
/// self-similarity gate is checked once up front.
pub fn smile(
    model: &ModelSpec,
    y_grid: &[f64],
    regime: Regime,
    cfg: &SolverConfig,
) -> Result<SmileTable> {
    model.validate()?;
    if regime == Regime::SmallTime {
        kernels::self_similarity_gate(&model.kernel)?;
    }
    let hat_available = regime == Regime::SmallTime
        || (model.h_scaling < 1.0
            && (model.h_scaling - model.kernel.intrinsic_hurst()).abs() <= 1e-12
            && kernels::self_similarity_gate(&model.kernel).is_ok());
    let mut rows = Vec::with_capacity(y_grid.len());
    for &y in y_grid {
        if y == 0.0 {
            rows.push(SmileRow {
                y,
                rate: f64::NAN,
                rate_hat: f64::NAN,
                binary: f64::NAN,
                ivol_limit: f64::NAN,
                side: None,
                flag: SmileFlag::ZeroLogMoneyness,
            });
            continue;
        }
        let rate = rate::rate_function(&model.kernel, &model.sigma, model.rho, y, cfg)?.value;
        let rate_hat = if hat_available {
            rate::rate_function_hat(
                &model.kernel,
                &model.sigma,
                model.rho,
                model.h_scaling,
                y,
                cfg,
                HatMethod::Direct,
            )?
            .value
        } else {
            f64::NAN
        };
        let governing = match regime {
            Regime::SmallNoise => rate,
            Regime::SmallTime => rate_hat,
        };
        let side = Some(if y > 0.0 {
            OptionSide::Call
        } else {
            OptionSide::Put
        });
        if governing <= DEGENERATE_RATE_TOL {
            rows.push(SmileRow {
                y,
                rate,
                rate_hat,
                binary: -governing,
                ivol_limit: f64::NAN,
                side,
                flag: SmileFlag::DegenerateRate,
            });
            continue;
        }
        rows.push(SmileRow {
            y,
            rate,
            rate_hat,
            binary: -governing,
            ivol_limit: y.abs() / (2.0 * governing).sqrt(),
            side,
            flag: SmileFlag::Ok,
        });
    }
    Ok(SmileTable {
        regime,
        rows,
        growth_warning: model.growth_warning(),
    })
}
