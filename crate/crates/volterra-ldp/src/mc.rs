//! Monte Carlo verification harness: simulate the scaled log-price, estimate
//! tail probabilities over an ε (or maturity) grid, and regress the decay
//! slope against the variational rate function.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{PathGrid, PathSampler};
use crate::kernels::{self, KernelSpec};
use crate::rate::{self, HatMethod, SigmaSpec, SolverConfig};
use crate::rng::sub_seed;
use crate::stats;

/// Full model: kernel, volatility function, correlation, scaling exponent,
/// and spot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kernel: KernelSpec,
    pub sigma: SigmaSpec,
    pub rho: f64,
    /// Scaling exponent H of the ε^{-2H}-speed large deviation principle.
    pub h_scaling: f64,
    /// Spot price s₀ > 0.
    pub s0: f64,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        self.sigma.validate()?;
        if !self.rho.is_finite() || self.rho.abs() >= 1.0 - 1e-9 {
            return Err(Error::domain("model.rho: must lie strictly inside (-1, 1)"));
        }
        if !(self.h_scaling > 0.0) || !self.h_scaling.is_finite() {
            return Err(Error::domain("model.h_scaling: must be > 0"));
        }
        if !(self.s0 > 0.0) || !self.s0.is_finite() {
            return Err(Error::domain("model.s0: spot must be > 0"));
        }
        Ok(())
    }

    /// True when σ violates the linear growth condition, in which case the
    /// asset price may fail to be a martingale and call-price asymptotics
    /// lose their hypothesis.
    pub fn growth_warning(&self) -> bool {
        !self.sigma.linear_growth_ok()
    }

    pub fn x0(&self) -> f64 {
        self.s0.ln()
    }
}

/// One LDP slope experiment: per-ε probabilities with standard errors, the
/// scaled logs ε^{2H} log P, the regression slope, and the solver's rate.
#[derive(Debug, Clone)]
pub struct LdpEstimate {
    pub eps_grid: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub scaled_logs: Vec<f64>,
    /// Points excluded from the regression (zero observed hits).
    pub excluded: Vec<bool>,
    pub slope_estimate: f64,
    pub theory: f64,
    /// Regression residuals show a one-sided sign pattern at 95% confidence.
    pub residual_sign_pattern: bool,
}

const SIM_CHUNK: usize = 8192;

/// Left-point Euler samples of the scaled terminal log-price X_T^{ε,H}.
///
/// One pass per path: X accumulates −½ε σ(ε^H B̂)² dt (when `include_drift`)
/// plus √ε σ(ε^H B̂)(ρ̄ ΔW + ρ ΔB), with σ evaluated at the left grid point
/// and B̂(t₀) = 0. Deterministic for fixed seed regardless of thread count.
pub fn simulate_scaled_logprice(
    model: &ModelSpec,
    eps: f64,
    grid: &PathGrid,
    paths: usize,
    seed: u64,
    include_drift: bool,
) -> Result<Vec<f64>> {
    model.validate()?;
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::domain("eps must lie in (0, 1]"));
    }
    if paths == 0 {
        return Err(Error::domain("paths must be at least 1"));
    }
    let sampler = PathSampler::new(&model.kernel, grid)?;
    let n = grid.n;
    let dt = grid.dt();
    let sqrt_eps = eps.sqrt();
    let eps_h = eps.powf(model.h_scaling);
    let rho = model.rho;
    let rho_bar = (1.0 - rho * rho).sqrt();
    let x0 = model.x0();
    let sigma = model.sigma;

    let mut out = vec![0.0_f64; paths];
    out.par_chunks_mut(SIM_CHUNK)
        .enumerate()
        .for_each(|(chunk_idx, chunk)| {
            let mut w = vec![0.0; n];
            let mut b = vec![0.0; n];
            let mut bh = vec![0.0; n];
            let base = chunk_idx * SIM_CHUNK;
            for (k, slot) in chunk.iter_mut().enumerate() {
                let p = (base + k) as u64;
                sampler.sample_into(seed, p, &mut w, &mut b, &mut bh);
                let mut x = x0;
                let mut bhat_left = 0.0;
                for i in 0..n {
                    let s = sigma.eval(eps_h * bhat_left);
                    if include_drift {
                        x -= 0.5 * eps * s * s * dt;
                    }
                    x += sqrt_eps * s * (rho_bar * w[i] + rho * b[i]);
                    bhat_left = bh[i];
                }
                *slot = x;
            }
        });
    Ok(out)
}

fn tail_frequency(samples: &[f64], x0: f64, scale: f64, y: f64) -> (usize, f64) {
    let hits = if y > 0.0 {
        samples.iter().filter(|&&x| scale * (x - x0) > y).count()
    } else {
        samples.iter().filter(|&&x| scale * (x - x0) < y).count()
    };
    let p = hits as f64 / samples.len() as f64;
    (hits, p)
}

fn regress_slope(xs: &[f64], log_ps: &[f64]) -> Result<(f64, bool)> {
    if xs.len() < 3 {
        return Err(Error::Estimation(format!(
            "only {} usable grid points: need at least 3 for the slope regression",
            xs.len()
        )));
    }
    let fit = stats::ols(xs, log_ps);
    Ok((
        -fit.slope,
        stats::residuals_show_sign_pattern(&fit.residuals),
    ))
}

fn theory_rate(model: &ModelSpec, y: f64, solver: &SolverConfig) -> Result<f64> {
    Ok(rate::rate_function(&model.kernel, &model.sigma, model.rho, y, solver)?.value)
}

/// Estimate P(ε^{H−1/2}(X_T^{ε,H} − x₀) ∈ A) for A = (y, ∞) or (−∞, y) over
/// an ε grid, and regress log P on −ε^{−2H} to estimate the rate.
#[allow(clippy::too_many_arguments)]
pub fn ldp_slope(
    model: &ModelSpec,
    y: f64,
    eps_grid: &[f64],
    grid: &PathGrid,
    paths: usize,
    seed: u64,
    include_drift: bool,
    solver: &SolverConfig,
) -> Result<LdpEstimate> {
    model.validate()?;
    if y == 0.0 {
        return Err(Error::domain("y must be nonzero"));
    }
    if eps_grid.len() < 3 {
        return Err(Error::domain("eps_grid needs at least 3 points"));
    }
    let h = model.h_scaling;
    let mut probabilities = Vec::with_capacity(eps_grid.len());
    let mut ses = Vec::with_capacity(eps_grid.len());
    let mut scaled_logs = Vec::with_capacity(eps_grid.len());
    let mut excluded = Vec::with_capacity(eps_grid.len());
    let mut reg_x = Vec::new();
    let mut reg_y = Vec::new();
    for (k, &eps) in eps_grid.iter().enumerate() {
        let samples = simulate_scaled_logprice(
            model,
            eps,
            grid,
            paths,
            sub_seed(seed, k as u64),
            include_drift,
        )?;
        let scale = eps.powf(h - 0.5);
        let (hits, p) = tail_frequency(&samples, model.x0(), scale, y);
        probabilities.push(p);
        ses.push(stats::binomial_se(p, paths));
        if hits == 0 {
            scaled_logs.push(f64::NEG_INFINITY);
            excluded.push(true);
        } else {
            scaled_logs.push(eps.powf(2.0 * h) * p.ln());
            excluded.push(false);
            reg_x.push(eps.powf(-2.0 * h));
            reg_y.push(p.ln());
        }
    }
    let (slope_estimate, residual_sign_pattern) = regress_slope(&reg_x, &reg_y)?;
    Ok(LdpEstimate {
        eps_grid: eps_grid.to_vec(),
        probabilities,
        standard_errors: ses,
        scaled_logs,
        excluded,
        slope_estimate,
        theory: theory_rate(model, y, solver)?,
        residual_sign_pattern,
    })
}

/// Small-time verification report.
#[derive(Debug, Clone)]
pub struct SmalltimeReport {
    /// Slope estimate over the maturity grid (the `eps_grid` field holds the
    /// maturities).
    pub estimate: LdpEstimate,
    /// Two-sample Kolmogorov–Smirnov distance between X_T^{ε,H} and X_{εT}.
    pub ks_statistic: f64,
    pub ks_threshold: f64,
    /// Measured self-similarity defect of the kernel (gate diagnostic).
    pub gate_defect: f64,
}

/// Simulate the unscaled model at small maturities, regress t^{2H} log P
/// against the small-time rate, and verify the scaling identity
/// X_T^{ε,H} = X_{εT} in law. Requires the self-similarity gate to pass and
/// the scaling exponent to match the kernel's own Hurst index.
pub fn smalltime_check(
    model: &ModelSpec,
    y: f64,
    t_grid: &[f64],
    grid_n: usize,
    paths: usize,
    seed: u64,
    solver: &SolverConfig,
) -> Result<SmalltimeReport> {
    model.validate()?;
    if y == 0.0 {
        return Err(Error::domain("y must be nonzero"));
    }
    let h = model.h_scaling;
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::domain(
            "small-time verification requires H in (0, 1)",
        ));
    }
    if (h - model.kernel.intrinsic_hurst()).abs() > 1e-12 {
        return Err(Error::domain(
            "small-time verification requires h_scaling equal to the kernel's Hurst index",
        ));
    }
    if t_grid.len() < 3 {
        return Err(Error::domain("t_grid needs at least 3 maturities"));
    }
    for &t in t_grid {
        if !(t > 0.0 && t <= model.kernel.t_horizon) {
            return Err(Error::domain(format!("maturity {t} outside (0, T]")));
        }
    }
    let gate_defect = kernels::self_similarity_gate(&model.kernel)?;

    let mut probabilities = Vec::with_capacity(t_grid.len());
    let mut ses = Vec::with_capacity(t_grid.len());
    let mut scaled_logs = Vec::with_capacity(t_grid.len());
    let mut excluded = Vec::with_capacity(t_grid.len());
    let mut reg_x = Vec::new();
    let mut reg_y = Vec::new();
    for (k, &t) in t_grid.iter().enumerate() {
        // Restrict the kernel to [0, t] and simulate the unscaled model.
        let mut restricted = model.clone();
        restricted.kernel.t_horizon = t;
        let grid = PathGrid::new(grid_n, t)?;
        let samples = simulate_scaled_logprice(
            &restricted,
            1.0,
            &grid,
            paths,
            sub_seed(seed, k as u64),
            true,
        )?;
        let scale = t.powf(h - 0.5);
        let (hits, p) = tail_frequency(&samples, model.x0(), scale, y);
        probabilities.push(p);
        ses.push(stats::binomial_se(p, paths));
        if hits == 0 {
            scaled_logs.push(f64::NEG_INFINITY);
            excluded.push(true);
        } else {
            scaled_logs.push(t.powf(2.0 * h) * p.ln());
            excluded.push(false);
            reg_x.push(t.powf(-2.0 * h));
            reg_y.push(p.ln());
        }
    }
    let (slope_estimate, residual_sign_pattern) = regress_slope(&reg_x, &reg_y)?;
    let theory = rate::rate_function_hat(
        &model.kernel,
        &model.sigma,
        model.rho,
        h,
        y,
        solver,
        HatMethod::Direct,
    )?
    .value;

    // Law-equality check at the middle maturity: X_T^{ε,H} with ε = t/T
    // against X_t from the runs above's configuration, fresh seeds.
    let t_star = t_grid[t_grid.len() / 2];
    let eps_star = t_star / model.kernel.t_horizon;
    let ks_paths = paths.min(20_000);
    let grid_full = PathGrid::new(grid_n, model.kernel.t_horizon)?;
    let scaled = simulate_scaled_logprice(
        model,
        eps_star,
        &grid_full,
        ks_paths,
        sub_seed(seed, 7001),
        true,
    )?;
    let mut restricted = model.clone();
    restricted.kernel.t_horizon = t_star;
    let grid_small = PathGrid::new(grid_n, t_star)?;
    let unscaled = simulate_scaled_logprice(
        &restricted,
        1.0,
        &grid_small,
        ks_paths,
        sub_seed(seed, 7002),
        true,
    )?;
    let ks_statistic = stats::ks_statistic(&scaled, &unscaled);
    let ks_threshold = stats::ks_threshold(ks_paths, ks_paths, 1.95);

    Ok(SmalltimeReport {
        estimate: LdpEstimate {
            eps_grid: t_grid.to_vec(),
            probabilities,
            standard_errors: ses,
            scaled_logs,
            excluded,
            slope_estimate,
            theory,
            residual_sign_pattern,
        },
        ks_statistic,
        ks_threshold,
        gate_defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs_model(sigma0: f64, rho: f64) -> ModelSpec {
        ModelSpec {
            kernel: KernelSpec::brownian(1.0).unwrap(),
            sigma: SigmaSpec::Constant { sigma0 },
            rho,
            h_scaling: 0.5,
            s0: 1.0,
        }
    }

    #[test]
    fn black_scholes_moments_at_eps_one() {
        let model = bs_model(0.2, 0.0);
        let grid = PathGrid::new(32, 1.0).unwrap();
        let paths = 100_000;
        let xs = simulate_scaled_logprice(&model, 1.0, &grid, paths, 5, true).unwrap();
        let shifted: Vec<f64> = xs.iter().map(|x| x - model.x0()).collect();
        let m = stats::mean(&shifted);
        let v = stats::sample_variance(&shifted);
        let se_mean = (0.04_f64 / paths as f64).sqrt();
        assert!((m + 0.02).abs() < 3.0 * se_mean, "mean {m}");
        let se_var = 0.04 * (2.0 / paths as f64).sqrt();
        assert!((v - 0.04).abs() < 3.0 * se_var, "var {v}");
    }

    #[test]
    fn drift_identity_is_exact_at_scheme_level() {
        let model = ModelSpec {
            kernel: KernelSpec::fbm(0.3, 1.0).unwrap(),
            sigma: SigmaSpec::ShiftedAbs { delta: 0.2 },
            rho: -0.5,
            h_scaling: 0.3,
            s0: 1.0,
        };
        let grid = PathGrid::new(16, 1.0).unwrap();
        let eps = 0.3;
        let paths = 64;
        let seed = 12;
        let with = simulate_scaled_logprice(&model, eps, &grid, paths, seed, true).unwrap();
        let without = simulate_scaled_logprice(&model, eps, &grid, paths, seed, false).unwrap();
        // Recompute the drift from the shared B̂ draws and check pathwise.
        let sampler = PathSampler::new(&model.kernel, &grid).unwrap();
        let n = grid.n;
        let dt = grid.dt();
        let eps_h = eps.powf(model.h_scaling);
        let mut w = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut bh = vec![0.0; n];
        for p in 0..paths {
            sampler.sample_into(seed, p as u64, &mut w, &mut b, &mut bh);
            let mut drift = 0.0;
            let mut left = 0.0;
            for i in 0..n {
                let s = model.sigma.eval(eps_h * left);
                drift += 0.5 * eps * s * s * dt;
                left = bh[i];
            }
            let diff = without[p] - with[p];
            assert!((diff - drift).abs() < 1e-14, "path {p}: {diff} vs {drift}");
        }
    }

    #[test]
    fn simulation_is_deterministic_and_seed_sensitive() {
        let model = ModelSpec {
            kernel: KernelSpec::fbm(0.3, 1.0).unwrap(),
            sigma: SigmaSpec::Exponential {
                sigma0: 0.2,
                beta: 0.4,
            },
            rho: -0.7,
            h_scaling: 0.3,
            s0: 1.0,
        };
        let grid = PathGrid::new(16, 1.0).unwrap();
        let a = simulate_scaled_logprice(&model, 0.5, &grid, 256, 3, true).unwrap();
        let b = simulate_scaled_logprice(&model, 0.5, &grid, 256, 3, true).unwrap();
        assert_eq!(a, b);
        let c = simulate_scaled_logprice(&model, 0.5, &grid, 256, 4, true).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn ldp_slope_matches_gaussian_tail_smoke() {
        // Cheap version of the end-to-end oracle: H = 1/2, constant σ.
        let model = bs_model(0.2, 0.0);
        let grid = PathGrid::new(16, 1.0).unwrap();
        let eps_grid = [0.05, 0.0707, 0.1, 0.1414, 0.2];
        let est = ldp_slope(
            &model,
            0.1,
            &eps_grid,
            &grid,
            40_000,
            21,
            true,
            &SolverConfig {
                n: 16,
                starts: 2,
                ..SolverConfig::default()
            },
        )
        .unwrap();
        assert!((est.theory - 0.125).abs() < 1e-4);
        // Wide tolerance: small grid, coarse asymptotics.
        assert!(
            (est.slope_estimate - 0.125).abs() / 0.125 < 0.5,
            "{}",
            est.slope_estimate
        );
        for (k, &eps) in eps_grid.iter().enumerate() {
            let z = (0.1 + eps * 0.04 / 2.0) / (0.2 * eps.sqrt());
            let want = stats::normal_tail(z);
            assert!(
                (est.probabilities[k] - want).abs() <= 3.0 * est.standard_errors[k].max(1e-4),
                "eps {eps}: {} vs {want}",
                est.probabilities[k]
            );
        }
    }

    #[test]
    fn ldp_slope_fractional_scaling_matches_gaussian_oracle() {
        // H = 0.3 with constant σ: the scaled log-price is exactly Gaussian,
        // so the per-ε tails have a closed form and the slope has the same
        // kernel-independent rate y²/(2σ₀²T).
        let model = ModelSpec {
            kernel: KernelSpec::fbm(0.3, 1.0).unwrap(),
            sigma: SigmaSpec::Constant { sigma0: 0.2 },
            rho: -0.4,
            h_scaling: 0.3,
            s0: 1.0,
        };
        let grid = PathGrid::new(32, 1.0).unwrap();
        let eps_grid = [0.001, 0.0019, 0.0036, 0.0068, 0.013];
        let est = ldp_slope(
            &model,
            0.1,
            &eps_grid,
            &grid,
            150_000,
            55,
            true,
            &SolverConfig {
                n: 32,
                starts: 2,
                ..SolverConfig::default()
            },
        )
        .unwrap();
        assert!((est.theory - 0.125).abs() < 1e-4, "theory {}", est.theory);
        for (k, &eps) in eps_grid.iter().enumerate() {
            let h: f64 = 0.3;
            let z = (0.1 * eps.powf(0.5 - h) + 0.5 * eps * 0.04) / (0.2 * eps.sqrt());
            let want = stats::normal_tail(z);
            assert!(
                (est.probabilities[k] - want).abs() <= 3.5 * est.standard_errors[k].max(2e-4),
                "eps {eps}: {} vs {want}",
                est.probabilities[k]
            );
        }
        assert!(
            (est.slope_estimate - 0.125).abs() / 0.125 < 0.2,
            "slope {}",
            est.slope_estimate
        );
    }

    #[test]
    fn ldp_slope_rejects_zero_y() {
        let model = bs_model(0.2, 0.0);
        let grid = PathGrid::new(8, 1.0).unwrap();
        let r = ldp_slope(
            &model,
            0.0,
            &[0.1, 0.2, 0.3],
            &grid,
            100,
            1,
            true,
            &SolverConfig::default(),
        );
        assert!(r.is_err());
    }

    /// Standard error of an OLS slope of log p̂ on ε^{-2H}, from the binomial
    /// standard errors of the per-point estimates.
    fn slope_se(est: &LdpEstimate, h: f64) -> f64 {
        let xs: Vec<f64> = est.eps_grid.iter().map(|e| e.powf(-2.0 * h)).collect();
        let xbar = stats::mean(&xs);
        let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
        let mut var = 0.0;
        for k in 0..xs.len() {
            let se_log = est.standard_errors[k] / est.probabilities[k];
            let w = (xs[k] - xbar) / sxx;
            var += w * w * se_log * se_log;
        }
        var.sqrt()
    }

    #[test]
    fn ldp_slopes_symmetric_in_y_at_zero_rho() {
        // Driftless variant: the driving law is invariant under
        // (W, B) → (−W, −B), so the y and −y tails estimate the same
        // probabilities and the slopes differ by Monte Carlo noise alone.
        let model = ModelSpec {
            kernel: KernelSpec::fbm(0.3, 1.0).unwrap(),
            sigma: SigmaSpec::ShiftedAbs { delta: 0.2 },
            rho: 0.0,
            h_scaling: 0.3,
            s0: 1.0,
        };
        let grid = PathGrid::new(16, 1.0).unwrap();
        let eps_grid = [0.05, 0.1, 0.2, 0.4];
        let solver = SolverConfig {
            n: 16,
            starts: 2,
            ..SolverConfig::default()
        };
        let plus = ldp_slope(&model, 0.15, &eps_grid, &grid, 60_000, 91, false, &solver).unwrap();
        let minus = ldp_slope(&model, -0.15, &eps_grid, &grid, 60_000, 92, false, &solver).unwrap();
        let se = (slope_se(&plus, 0.3).powi(2) + slope_se(&minus, 0.3).powi(2)).sqrt();
        assert!(
            (plus.slope_estimate - minus.slope_estimate).abs() <= 4.0 * se,
            "slopes {} vs {} (4 SE = {})",
            plus.slope_estimate,
            minus.slope_estimate,
            4.0 * se
        );
        assert!((plus.theory - minus.theory).abs() <= 1e-8);
    }

    #[test]
    fn ldp_slope_errors_when_all_points_empty() {
        let model = bs_model(0.2, 0.0);
        let grid = PathGrid::new(8, 1.0).unwrap();
        // y far in the tail with tiny path count: zero hits everywhere.
        let r = ldp_slope(
            &model,
            5.0,
            &[0.01, 0.02, 0.04],
            &grid,
            50,
            1,
            true,
            &SolverConfig {
                n: 8,
                starts: 1,
                ..SolverConfig::default()
            },
        );
        assert!(matches!(r, Err(Error::Estimation(_))));
    }

    #[test]
    fn smalltime_gate_refuses_fractional_ou() {
        let model = ModelSpec {
            kernel: KernelSpec::fractional_ou(0.3, 1.0, 1.0).unwrap(),
            sigma: SigmaSpec::Constant { sigma0: 0.2 },
            rho: 0.0,
            h_scaling: 0.3,
            s0: 1.0,
        };
        let r = smalltime_check(
            &model,
            0.3,
            &[0.05, 0.1, 0.2],
            8,
            500,
            1,
            &SolverConfig::default(),
        );
        assert!(matches!(r, Err(Error::GateRefused { .. })));
    }

    #[test]
    fn smalltime_requires_matching_hurst() {
        let model = ModelSpec {
            kernel: KernelSpec::riemann_liouville(0.3, 1.0).unwrap(),
            sigma: SigmaSpec::Constant { sigma0: 0.2 },
            rho: 0.0,
            h_scaling: 0.4,
            s0: 1.0,
        };
        let r = smalltime_check(
            &model,
            0.3,
            &[0.05, 0.1, 0.2],
            8,
            500,
            1,
            &SolverConfig::default(),
        );
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn smalltime_smoke_on_brownian() {
        // H = 1/2 Brownian: the law-equality is exact and the slope has a
        // closed-form Gaussian oracle; loose tolerances at smoke scale.
        let model = bs_model(0.2, 0.0);
        let report = smalltime_check(
            &model,
            0.25,
            &[0.05, 0.0841, 0.1414, 0.2379, 0.4],
            16,
            60_000,
            33,
            &SolverConfig {
                n: 16,
                starts: 2,
                ..SolverConfig::default()
            },
        )
        .unwrap();
        assert!(report.gate_defect <= 1e-6);
        assert!(
            report.ks_statistic < report.ks_threshold,
            "{} vs {}",
            report.ks_statistic,
            report.ks_threshold
        );
        let want = 0.25 * 0.25 / (2.0 * 0.04);
        assert!((report.estimate.theory - want).abs() / want < 1e-4);
        assert!(
            (report.estimate.slope_estimate - want).abs() / want < 0.5,
            "slope {}",
            report.estimate.slope_estimate
        );
    }
}
