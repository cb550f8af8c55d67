//! Acceptance suite: every criterion runs at its stated tolerance and prints
//! one PASS line (run with `--nocapture` to see them). Monte Carlo criteria
//! use fixed seeds so the suite is deterministic.

use std::sync::OnceLock;
use std::time::Instant;

use volterra_ldp::asymptotics::{
    binary_asymptote, bs_implied_vol, call_put_asymptote, implied_vol_limit, smile, OptionSide,
    Regime,
};
use volterra_ldp::gaussian::{exp_moment_mc, kl_spectrum, moment_bound};
use volterra_ldp::kernels::{
    covariance, fbm_covariance_closed_form, holder_slope, modulus_l2, KernelSpec,
};
use volterra_ldp::mc::{ldp_slope, simulate_scaled_logprice, smalltime_check, ModelSpec};
use volterra_ldp::rate::{rate_function, rate_function_hat, HatMethod, SigmaSpec, SolverConfig};
use volterra_ldp::stats;
use volterra_ldp::{Error, LdpEstimate, PathGrid, PathSampler};

const H_SET: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

fn pass(criterion: &str, detail: String, started: Instant) {
    println!(
        "AC-{criterion} PASS: {detail} ({} ms)",
        started.elapsed().as_millis()
    );
}

#[test]
fn ac01_fbm_covariance_oracle() {
    let started = Instant::now();
    let pts = 20;
    let mut worst = 0.0_f64;
    for &h in &H_SET {
        let spec = KernelSpec::fbm(h, 1.0).unwrap();
        for i in 1..=pts {
            for j in 1..=i {
                let t = i as f64 / pts as f64;
                let s = j as f64 / pts as f64;
                let got = covariance(&spec, t, s).unwrap();
                let want = fbm_covariance_closed_form(h, t, s);
                worst = worst.max((got - want).abs() / want);
            }
        }
    }
    assert!(worst <= 1e-3, "max covariance relative error {worst}");
    pass(
        "1",
        format!("fBm covariance vs closed form, max rel err {worst:.2e}"),
        started,
    );
}

#[test]
fn ac02_holder_modulus_and_slope() {
    let started = Instant::now();
    // Exact modulus identity for fBm: M(h) = h^{2H} within 1e-6 relative.
    let mut worst_mod = 0.0_f64;
    for &h in &H_SET {
        let spec = KernelSpec::fbm(h, 1.0).unwrap();
        for &step in &[0.1, 0.01] {
            let m = modulus_l2(&spec, step, 4).unwrap();
            let want = step.powf(2.0 * h);
            worst_mod = worst_mod.max((m - want).abs() / want);
        }
    }
    assert!(worst_mod <= 1e-6, "fBm modulus relative error {worst_mod}");

    // Hölder slope within ±0.05 of 2H for both fractional families. The h
    // range sits low enough that the Riemann–Liouville modulus, which only
    // approaches c·h^{2H} asymptotically, has shed its finite-h correction.
    let grid: Vec<f64> = (0..7).map(|i| 1e-5 * 10f64.powf(i as f64 / 3.0)).collect();
    let mut worst_slope = 0.0_f64;
    for &h in &H_SET {
        for spec in [
            KernelSpec::fbm(h, 1.0).unwrap(),
            KernelSpec::riemann_liouville(h, 1.0).unwrap(),
        ] {
            let slope = holder_slope(&spec, &grid).unwrap();
            let err = (slope - 2.0 * h).abs();
            assert!(err <= 0.05, "{} H={h}: slope {slope}", spec.family.name());
            worst_slope = worst_slope.max(err);
        }
    }
    pass(
        "2",
        format!("modulus rel err {worst_mod:.2e}; slope max |Δ2H| {worst_slope:.3}"),
        started,
    );
}

#[test]
fn ac03_rate_function_analytic_oracle() {
    let started = Instant::now();
    let spec = KernelSpec::brownian(1.0).unwrap();
    let sigma0 = 0.2;
    let sigma = SigmaSpec::Constant { sigma0 };
    let cfg = SolverConfig {
        n: 64,
        starts: 4,
        seed: 2,
        ..SolverConfig::default()
    };
    let mut worst = 0.0_f64;
    for &rho in &[-0.7, 0.0, 0.7] {
        for &x in &[-0.2, -0.1, -0.05, 0.05, 0.1, 0.2] {
            let r = rate_function(&spec, &sigma, rho, x, &cfg).unwrap();
            let want = x * x / (2.0 * sigma0 * sigma0);
            let rel = (r.value - want).abs() / want;
            assert!(rel <= 1e-4, "rho={rho} x={x}: I={} want {want}", r.value);
            worst = worst.max(rel);
        }
    }
    pass(
        "3",
        format!("constant-σ oracle, max rel err {worst:.2e} at n=64"),
        started,
    );
}

#[test]
fn ac04_rate_function_paper_properties() {
    let started = Instant::now();
    let spec = KernelSpec::fbm(0.3, 1.0).unwrap();
    let sigma = SigmaSpec::ShiftedAbs { delta: 0.2 };
    let cfg = SolverConfig {
        n: 32,
        starts: 3,
        seed: 4,
        ..SolverConfig::default()
    };

    // I(0) = 0.
    let zero = rate_function(&spec, &sigma, -0.5, 0.0, &cfg).unwrap();
    assert!(zero.value <= 1e-10, "I(0) = {}", zero.value);

    // Monotonicity on both half-lines with slack 1e-6, warm-starting each
    // solve with the previous optimizer.
    for sign in [1.0, -1.0] {
        let xs: Vec<f64> = [0.04, 0.08, 0.12, 0.16, 0.2]
            .iter()
            .map(|v| sign * v)
            .collect();
        let mut prev_value = 0.0;
        let mut warm: Option<Vec<f64>> = None;
        for &x in &xs {
            let mut c = cfg.clone();
            if let Some(w) = &warm {
                c.extra_starts = vec![w.clone()];
            }
            let r = rate_function(&spec, &sigma, -0.5, x, &c).unwrap();
            assert!(
                prev_value <= r.value + 1e-6,
                "monotonicity violated at x={x}: {prev_value} > {}",
                r.value
            );
            prev_value = r.value;
            warm = Some(r.optimizer_path.fdot.clone());
        }
    }

    // Evenness at ρ = 0 within 1e-8.
    let plus = rate_function(&spec, &sigma, 0.0, 0.12, &cfg).unwrap();
    let minus = rate_function(&spec, &sigma, 0.0, -0.12, &cfg).unwrap();
    let even_gap = (plus.value - minus.value).abs();
    assert!(even_gap <= 1e-8, "evenness gap {even_gap}");

    // Scaling identity: direct unit-interval evaluation vs the rescaled
    // small-noise rate, within 1e-3 relative, on a non-unit horizon.
    let spec_t2 = KernelSpec::fbm(0.3, 2.0).unwrap();
    let y = 0.15;
    let direct =
        rate_function_hat(&spec_t2, &sigma, -0.3, 0.3, y, &cfg, HatMethod::Direct).unwrap();
    let scaled = rate_function_hat(
        &spec_t2,
        &sigma,
        -0.3,
        0.3,
        y,
        &cfg,
        HatMethod::ScalingIdentity,
    )
    .unwrap();
    let scale_rel = (direct.value - scaled.value).abs() / direct.value.max(1e-300);
    assert!(
        scale_rel <= 1e-3,
        "scaling identity gap {scale_rel}: {} vs {}",
        direct.value,
        scaled.value
    );

    pass(
        "4",
        format!(
            "I(0)={:.1e}; monotone; evenness gap {even_gap:.1e}; scaling gap {scale_rel:.1e}",
            zero.value
        ),
        started,
    );
}

#[test]
fn ac05_gradient_check() {
    let started = Instant::now();
    use rand::Rng;
    use rand_distr::StandardNormal;
    let sigmas = [
        SigmaSpec::Constant { sigma0: 0.2 },
        SigmaSpec::Exponential {
            sigma0: 0.2,
            beta: 0.6,
        },
        SigmaSpec::SqrtLinear { c1: 0.04, c2: 1.5 },
    ];
    let specs = [
        KernelSpec::brownian(1.0).unwrap(),
        KernelSpec::fbm(0.3, 1.0).unwrap(),
        KernelSpec::riemann_liouville(0.7, 1.0).unwrap(),
    ];
    let mut worst = 0.0_f64;
    let mut rng = volterra_ldp::rng::stream_rng(5, 0);
    let grid = PathGrid::new(16, 1.0).unwrap();
    for case in 0..20 {
        let sigma = sigmas[case % sigmas.len()];
        let spec = &specs[case % specs.len()];
        let rho = -0.8 + 0.15 * (case % 11) as f64;
        let x = -0.3 + 0.06 * (case % 10) as f64;
        let fdot: Vec<f64> = (0..16)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let rel = volterra_ldp::rate::gradient_check(spec, &sigma, rho, x, &grid, &fdot).unwrap();
        assert!(rel <= 1e-5, "case {case}: gradient mismatch {rel}");
        worst = worst.max(rel);
    }
    pass(
        "5",
        format!("analytic vs central-difference gradients, max rel {worst:.2e}"),
        started,
    );
}

fn bs_model() -> ModelSpec {
    ModelSpec {
        kernel: KernelSpec::brownian(1.0).unwrap(),
        sigma: SigmaSpec::Constant { sigma0: 0.2 },
        rho: 0.0,
        h_scaling: 0.5,
        s0: 1.0,
    }
}

const AC6_EPS_GRID: [f64; 5] = [0.02, 0.02353, 0.02768, 0.03256, 0.0383];
const AC6_PATHS: usize = 1_000_000;
const AC6_SEED: u64 = 61;

fn ac6_solver() -> SolverConfig {
    SolverConfig {
        n: 32,
        starts: 2,
        seed: 6,
        ..SolverConfig::default()
    }
}

fn drifted_estimate() -> &'static LdpEstimate {
    static CELL: OnceLock<LdpEstimate> = OnceLock::new();
    CELL.get_or_init(|| {
        let grid = PathGrid::new(64, 1.0).unwrap();
        ldp_slope(
            &bs_model(),
            0.1,
            &AC6_EPS_GRID,
            &grid,
            AC6_PATHS,
            AC6_SEED,
            true,
            &ac6_solver(),
        )
        .unwrap()
    })
}

#[test]
fn ac06_end_to_end_gaussian_oracle() {
    let started = Instant::now();
    let est = drifted_estimate();
    // Closed-form normal tail at every ε, within 3 standard errors.
    for (k, &eps) in est.eps_grid.iter().enumerate() {
        let z = (0.1 + eps * 0.04 / 2.0) / (0.2 * eps.sqrt());
        let want = stats::normal_tail(z);
        let gap = (est.probabilities[k] - want).abs();
        assert!(
            gap <= 3.0 * est.standard_errors[k],
            "eps {eps}: p̂ {} vs tail {want} (3SE {})",
            est.probabilities[k],
            3.0 * est.standard_errors[k]
        );
    }
    let rel = (est.slope_estimate - 0.125).abs() / 0.125;
    assert!(rel <= 0.15, "slope {} vs 0.125", est.slope_estimate);
    assert!((est.theory - 0.125).abs() / 0.125 < 1e-4);
    assert!(!est.residual_sign_pattern, "residuals show a sign pattern");
    pass(
        "6",
        format!(
            "tails within 3 SE; slope {:.4} vs 0.125 ({:.1}% off)",
            est.slope_estimate,
            100.0 * rel
        ),
        started,
    );
}

#[test]
fn ac07_drift_equivalence() {
    let started = Instant::now();
    // Pathwise identity X − X̂ = −½ε∫σ(ε^H B̂)² dt, exact at the scheme level.
    let model = ModelSpec {
        kernel: KernelSpec::fbm(0.3, 1.0).unwrap(),
        sigma: SigmaSpec::Exponential {
            sigma0: 0.2,
            beta: 0.5,
        },
        rho: -0.6,
        h_scaling: 0.3,
        s0: 1.0,
    };
    let grid = PathGrid::new(32, 1.0).unwrap();
    let eps = 0.4;
    let paths = 128;
    let seed = 71;
    let with = simulate_scaled_logprice(&model, eps, &grid, paths, seed, true).unwrap();
    let without = simulate_scaled_logprice(&model, eps, &grid, paths, seed, false).unwrap();
    let sampler = PathSampler::new(&model.kernel, &grid).unwrap();
    let (n, dt) = (grid.n, grid.dt());
    let eps_h = eps.powf(model.h_scaling);
    let (mut w, mut b, mut bh) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut worst_gap = 0.0_f64;
    for p in 0..paths {
        sampler.sample_into(seed, p as u64, &mut w, &mut b, &mut bh);
        let mut drift = 0.0;
        let mut left = 0.0;
        for i in 0..n {
            let s = model.sigma.eval(eps_h * left);
            drift += 0.5 * eps * s * s * dt;
            left = bh[i];
        }
        worst_gap = worst_gap.max(((without[p] - with[p]) - drift).abs());
    }
    assert!(
        worst_gap <= 1e-13,
        "pathwise drift identity gap {worst_gap}"
    );

    // Slope estimates with and without drift agree within 5%.
    let drifted = drifted_estimate();
    let grid64 = PathGrid::new(64, 1.0).unwrap();
    let driftless = ldp_slope(
        &bs_model(),
        0.1,
        &AC6_EPS_GRID,
        &grid64,
        AC6_PATHS,
        AC6_SEED,
        false,
        &ac6_solver(),
    )
    .unwrap();
    let gap = (drifted.slope_estimate - driftless.slope_estimate).abs() / drifted.slope_estimate;
    assert!(
        gap <= 0.05,
        "drifted {} vs driftless {}",
        drifted.slope_estimate,
        driftless.slope_estimate
    );
    pass(
        "7",
        format!(
            "pathwise identity gap {worst_gap:.1e}; slope agreement {:.2}%",
            100.0 * gap
        ),
        started,
    );
}

#[test]
fn ac08_small_time_slope_and_gate() {
    let started = Instant::now();
    let model = ModelSpec {
        kernel: KernelSpec::riemann_liouville(0.3, 1.0).unwrap(),
        sigma: SigmaSpec::Constant { sigma0: 0.2 },
        rho: 0.0,
        h_scaling: 0.3,
        s0: 1.0,
    };
    let t_grid = [0.05, 0.0707, 0.1, 0.1414, 0.2];
    let solver = SolverConfig {
        n: 32,
        starts: 2,
        seed: 8,
        ..SolverConfig::default()
    };
    let report = smalltime_check(&model, 0.3, &t_grid, 64, 1_000_000, 81, &solver).unwrap();
    let want = 0.3 * 0.3 / (2.0 * 0.04); // Î(y) = y²/(2σ₀²) = 1.125
    let rel = (report.estimate.slope_estimate - want).abs() / want;
    assert!(
        rel <= 0.15,
        "slope {} vs {want}",
        report.estimate.slope_estimate
    );
    assert!((report.estimate.theory - want).abs() / want < 1e-4);
    assert!(
        report.ks_statistic <= report.ks_threshold,
        "law-equality KS {} vs {}",
        report.ks_statistic,
        report.ks_threshold
    );

    // The gate must refuse the fractional OU kernel.
    let fou = ModelSpec {
        kernel: KernelSpec::fractional_ou(0.3, 1.0, 1.0).unwrap(),
        ..model
    };
    let refused = smalltime_check(&fou, 0.3, &t_grid, 8, 100, 1, &solver);
    assert!(matches!(refused, Err(Error::GateRefused { .. })));
    pass(
        "8",
        format!(
            "slope {:.4} vs {want} ({:.1}% off); KS {:.4} ≤ {:.4}; fOU refused",
            report.estimate.slope_estimate,
            100.0 * rel,
            report.ks_statistic,
            report.ks_threshold
        ),
        started,
    );
}

#[test]
fn ac09_kl_spectrum_and_moment_bound() {
    let started = Instant::now();
    let spec = KernelSpec::brownian(1.0).unwrap();
    let grid = PathGrid::new(512, 1.0).unwrap();
    let kl = kl_spectrum(&spec, &grid, 10).unwrap();
    let mut worst = 0.0_f64;
    for (k, &l) in kl.eigenvalues.iter().enumerate() {
        let want = 1.0 / (((k + 1) as f64 - 0.5).powi(2) * std::f64::consts::PI.powi(2));
        let rel = (l - want).abs() / want;
        assert!(rel <= 1e-3, "k={}: λ {} vs {want}", k + 1, l);
        worst = worst.max(rel);
    }

    // Moment bound at a = 1, ε = 0.5 · threshold.
    let a = 1.0;
    let threshold = 1.0 / (4.0 * a * kl.eigenvalues[0]);
    let eps = 0.5 * threshold;
    let bound = moment_bound(&kl, a, eps).unwrap();
    let mc_grid = PathGrid::new(256, 1.0).unwrap();
    let (est, se) = exp_moment_mc(&spec, &mc_grid, a, eps, 30_000, 91).unwrap();
    assert!(
        est <= bound.bound * (1.0 + 3.0 * se / est),
        "MC moment {est} ± {se} above bound {}",
        bound.bound
    );
    pass(
        "9",
        format!(
            "λ max rel err {worst:.2e}; MC moment {est:.4} ± {se:.4} ≤ bound {:.4}",
            bound.bound
        ),
        started,
    );
}

#[test]
fn ac10_smile_consistency() {
    let started = Instant::now();
    let rl_model = ModelSpec {
        kernel: KernelSpec::riemann_liouville(0.3, 1.0).unwrap(),
        sigma: SigmaSpec::Constant { sigma0: 0.2 },
        rho: 0.0,
        h_scaling: 0.3,
        s0: 1.0,
    };
    let bs = bs_model();
    let cfg = SolverConfig {
        n: 32,
        starts: 2,
        seed: 10,
        ..SolverConfig::default()
    };

    // Analytic limits: σ₀ in the small-time regime, σ₀√T (T = 1) small-noise.
    for &y in &[-0.17, 0.1, 0.23] {
        let st = implied_vol_limit(&rl_model, y, Regime::SmallTime, &cfg).unwrap();
        assert!((st - 0.2).abs() <= 1e-6, "small-time limit {st} at y={y}");
        let sn = implied_vol_limit(&bs, y, Regime::SmallNoise, &cfg).unwrap();
        assert!((sn - 0.2).abs() <= 1e-6, "small-noise limit {sn} at y={y}");
    }

    // Binary and call/put asymptotes coincide per y.
    for &(y, side) in &[(0.1, OptionSide::Call), (-0.15, OptionSide::Put)] {
        let b = binary_asymptote(&rl_model, y, Regime::SmallTime, &cfg).unwrap();
        let c = call_put_asymptote(&rl_model, y, side, Regime::SmallTime, &cfg).unwrap();
        assert!(
            (b - c.value).abs() <= 1e-12,
            "binary {b} vs call/put {}",
            c.value
        );
    }

    // Smile rows at constant σ form a flat column at σ₀.
    let table = smile(&rl_model, &[-0.2, -0.1, 0.1, 0.2], Regime::SmallTime, &cfg).unwrap();
    for row in &table.rows {
        assert!((row.ivol_limit - 0.2).abs() <= 1e-6);
    }

    // Monte Carlo prices inverted through Black–Scholes approach the limit
    // within 5% at the smallest feasible ε (small noise) and maturity
    // (small time).
    let y = 0.1;
    let paths = 400_000;
    let grid = PathGrid::new(64, 1.0).unwrap();
    let eps = 0.1;
    let xs = simulate_scaled_logprice(&bs, eps, &grid, paths, 101, true).unwrap();
    let strike = (y * eps.powf(0.5 - bs.h_scaling)).exp(); // = e^y for H = 1/2
    let price = xs.iter().map(|x| (x.exp() - strike).max(0.0)).sum::<f64>() / paths as f64;
    let iv_sn = bs_implied_vol(price, 1.0, strike, eps).unwrap();
    let rel_sn = (iv_sn - 0.2).abs() / 0.2;
    assert!(rel_sn <= 0.05, "small-noise MC implied vol {iv_sn}");

    let t_small = 0.1;
    let mut restricted = rl_model.clone();
    restricted.kernel.t_horizon = t_small;
    let grid_t = PathGrid::new(64, t_small).unwrap();
    let xs_t = simulate_scaled_logprice(&restricted, 1.0, &grid_t, paths, 102, true).unwrap();
    let strike_t = (y * t_small.powf(0.5 - rl_model.h_scaling)).exp();
    let price_t = xs_t
        .iter()
        .map(|x| (x.exp() - strike_t).max(0.0))
        .sum::<f64>()
        / paths as f64;
    let iv_st = bs_implied_vol(price_t, 1.0, strike_t, t_small).unwrap();
    let rel_st = (iv_st - 0.2).abs() / 0.2;
    assert!(rel_st <= 0.05, "small-time MC implied vol {iv_st}");

    pass(
        "10",
        format!(
            "limits exact to 1e-6; MC IVs {iv_sn:.4}/{iv_st:.4} within {:.2}%/{:.2}%",
            100.0 * rel_sn,
            100.0 * rel_st
        ),
        started,
    );
}
