//! One function per subcommand. Each writes its CSV artifacts into the
//! output directory and records summary values in the manifest.

use std::fmt::Write as _;
use std::path::Path;

use volterra_ldp::asymptotics;
use volterra_ldp::kernels::{self, KernelFamily};
use volterra_ldp::mc;
use volterra_ldp::rate;
use volterra_ldp::{Error, PathGrid, Result, SolverConfig};

use crate::config::RunConfig;
use crate::manifest::Manifest;

fn write_artifact(dir: &Path, name: &str, text: &str, manifest: &mut Manifest) -> Result<()> {
    std::fs::write(dir.join(name), text)
        .map_err(|e| Error::Estimation(format!("write {name}: {e}")))?;
    manifest.put("artifact", name);
    Ok(())
}

fn solver_or_default(s: &Option<SolverConfig>, seed: u64) -> SolverConfig {
    let mut cfg = s.clone().unwrap_or_default();
    cfg.seed = seed;
    cfg
}

pub fn kernel_check(cfg: &RunConfig, dir: &Path, manifest: &mut Manifest) -> Result<()> {
    let block = cfg
        .kernel_check
        .as_ref()
        .ok_or_else(|| Error::domain("config: missing `kernel_check` block"))?;
    let kernel = &cfg.model.kernel;
    let mut csv = String::from("metric,value\n");
    let h = kernel.intrinsic_hurst();

    let slope = kernels::holder_slope(kernel, &block.h_grid)?;
    let _ = writeln!(csv, "holder_slope,{slope}");
    let _ = writeln!(csv, "holder_slope_target,{}", 2.0 * h);
    manifest.put("holder_slope", slope);

    let defect = kernels::self_similarity_defect(kernel, 0.5, 12)?;
    let _ = writeln!(csv, "self_similarity_defect,{defect}");
    manifest.put("self_similarity_defect", defect);

    // Quadrature covariance against the closed form, where one exists.
    if matches!(kernel.family, KernelFamily::Fbm | KernelFamily::Brownian) {
        let pts = block.cov_points.max(2);
        let mut worst = 0.0_f64;
        for i in 1..=pts {
            for j in 1..=i {
                let t = kernel.t_horizon * i as f64 / pts as f64;
                let s = kernel.t_horizon * j as f64 / pts as f64;
                let q = kernels::covariance(kernel, t, s)?;
                let c = kernels::fbm_covariance_closed_form(h, t, s);
                worst = worst.max((q - c).abs() / c.abs().max(1e-300));
            }
        }
        let _ = writeln!(csv, "cov_max_rel_err,{worst}");
        manifest.put("cov_max_rel_err", worst);

        let m = kernels::modulus_l2(kernel, block.modulus_h, 5)?;
        let target = block.modulus_h.powf(2.0 * h);
        let rel = (m - target).abs() / target;
        let _ = writeln!(csv, "modulus_rel_err,{rel}");
        manifest.put("modulus_rel_err", rel);
    }

    write_artifact(dir, "kernel_check.csv", &csv, manifest)
}

pub fn rate_function(cfg: &RunConfig, dir: &Path, manifest: &mut Manifest) -> Result<()> {
    let block = cfg
        .rate
        .as_ref()
        .ok_or_else(|| Error::domain("config: missing `rate` block"))?;
    let mut solver = solver_or_default(&block.solver, cfg.seed);
    solver.refine = true;
    let results = rate::rate_function_grid(
        &cfg.model.kernel,
        &cfg.model.sigma,
        cfg.model.rho,
        &block.x_grid,
        &solver,
    )?;
    let mut csv = String::from("x,I,converged,starts,n,value_at_2n\n");
    for (x, r) in block.x_grid.iter().zip(&results) {
        let at_2n = r
            .grid_refinement
            .last()
            .map(|&(_, v)| v)
            .unwrap_or(f64::NAN);
        let _ = writeln!(
            csv,
            "{x},{},{},{},{},{at_2n}",
            r.value, r.converged, r.starts_tried, solver.n
        );
    }
    write_artifact(dir, "rate_function.csv", &csv, manifest)
}

pub fn smile(cfg: &RunConfig, dir: &Path, manifest: &mut Manifest) -> Result<()> {
    let block = cfg
        .smile
        .as_ref()
        .ok_or_else(|| Error::domain("config: missing `smile` block"))?;
    let solver = solver_or_default(&block.solver, cfg.seed);
    let table = asymptotics::smile(&cfg.model, &block.y_grid, block.regime, &solver)?;
    let mut csv = String::from("y,I,I_hat,binary,ivol_limit,flag\n");
    for row in &table.rows {
        let flag = match row.flag {
            asymptotics::SmileFlag::Ok => "ok",
            asymptotics::SmileFlag::ZeroLogMoneyness => "zero_log_moneyness",
            asymptotics::SmileFlag::DegenerateRate => "degenerate_rate",
        };
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{flag}",
            row.y, row.rate, row.rate_hat, row.binary, row.ivol_limit
        );
    }
    manifest.put("growth_warning", table.growth_warning);
    write_artifact(dir, "smile.csv", &csv, manifest)
}

fn ldp_csv(est: &mc::LdpEstimate) -> String {
    let mut csv = String::from("eps,prob,se,scaled_log,theory_I,slope\n");
    for (k, &eps) in est.eps_grid.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{eps},{},{},{},{},{}",
            est.probabilities[k],
            est.standard_errors[k],
            est.scaled_logs[k],
            est.theory,
            est.slope_estimate
        );
    }
    csv
}

pub fn mc_verify(cfg: &RunConfig, dir: &Path, manifest: &mut Manifest) -> Result<()> {
    let block = cfg
        .mc
        .as_ref()
        .ok_or_else(|| Error::domain("config: missing `mc` block"))?;
    let solver = solver_or_default(&block.solver, cfg.seed);
    let grid = PathGrid::new(block.grid_n, cfg.model.kernel.t_horizon)?;
    let est = mc::ldp_slope(
        &cfg.model,
        block.y,
        &block.eps_grid,
        &grid,
        block.paths,
        cfg.seed,
        block.include_drift,
        &solver,
    )?;
    manifest.put("slope", est.slope_estimate);
    manifest.put("theory_I", est.theory);
    manifest.put("residual_sign_pattern", est.residual_sign_pattern);
    write_artifact(dir, "mc_verify.csv", &ldp_csv(&est), manifest)
}

pub fn smalltime_verify(cfg: &RunConfig, dir: &Path, manifest: &mut Manifest) -> Result<()> {
    let block = cfg
        .smalltime
        .as_ref()
        .ok_or_else(|| Error::domain("config: missing `smalltime` block"))?;
    let solver = solver_or_default(&block.solver, cfg.seed);
    let report = mc::smalltime_check(
        &cfg.model,
        block.y,
        &block.t_grid,
        block.grid_n,
        block.paths,
        cfg.seed,
        &solver,
    )?;
    manifest.put("slope", report.estimate.slope_estimate);
    manifest.put("theory_I_hat", report.estimate.theory);
    manifest.put("ks_statistic", report.ks_statistic);
    manifest.put("ks_threshold", report.ks_threshold);
    manifest.put("gate_defect", report.gate_defect);
    write_artifact(
        dir,
        "smalltime_verify.csv",
        &ldp_csv(&report.estimate),
        manifest,
    )
}

pub fn simulate(cfg: &RunConfig, dir: &Path, manifest: &mut Manifest) -> Result<()> {
    let block = cfg
        .simulate
        .as_ref()
        .ok_or_else(|| Error::domain("config: missing `simulate` block"))?;
    let grid = PathGrid::new(block.grid_n, cfg.model.kernel.t_horizon)?;
    let batch =
        volterra_ldp::gaussian::sample_paths(&cfg.model.kernel, &grid, block.paths, cfg.seed)?;
    let times = grid.times();
    let mut csv = String::from("path,t,W,B,Bhat\n");
    for p in 0..batch.paths {
        let _ = writeln!(csv, "{p},0,0,0,0");
        let mut w_cum = 0.0;
        let mut b_cum = 0.0;
        for i in 0..batch.n {
            w_cum += batch.w_row(p)[i];
            b_cum += batch.b_row(p)[i];
            let _ = writeln!(
                csv,
                "{p},{},{w_cum},{b_cum},{}",
                times[i],
                batch.bhat_row(p)[i]
            );
        }
    }
    manifest.put("paths", batch.paths);
    manifest.put("grid_n", batch.n);
    write_artifact(dir, "paths.csv", &csv, manifest)
}

pub fn eigen(cfg: &RunConfig, dir: &Path, manifest: &mut Manifest) -> Result<()> {
    let block = cfg
        .eigen
        .as_ref()
        .ok_or_else(|| Error::domain("config: missing `eigen` block"))?;
    let grid = PathGrid::new(block.grid_n, cfg.model.kernel.t_horizon)?;
    let kl = volterra_ldp::gaussian::kl_spectrum(&cfg.model.kernel, &grid, block.count)?;
    let mut csv = String::from("k,lambda\n");
    for (k, l) in kl.eigenvalues.iter().enumerate() {
        let _ = writeln!(csv, "{},{l}", k + 1);
    }
    manifest.put("trace_estimate", kl.trace_estimate);
    manifest.put("truncation_error", kl.truncation_error);
    if let Some(a) = block.a {
        let lambda1 = kl.eigenvalues.first().copied().unwrap_or(f64::NAN);
        let threshold = 1.0 / (4.0 * a * lambda1);
        let eps = block.eps_factor * threshold;
        let bound = volterra_ldp::gaussian::moment_bound(&kl, a, eps)?;
        manifest.put("moment_threshold", bound.threshold);
        manifest.put("moment_eps", eps);
        manifest.put("moment_bound", bound.bound);
        if block.mc_paths > 0 {
            let (est, se) = volterra_ldp::gaussian::exp_moment_mc(
                &cfg.model.kernel,
                &grid,
                a,
                eps,
                block.mc_paths,
                cfg.seed,
            )?;
            manifest.put("moment_mc", est);
            manifest.put("moment_mc_se", se);
            manifest.put(
                "moment_mc_within_bound",
                est <= bound.bound * (1.0 + 3.0 * se / est.max(1e-300)),
            );
        }
    }
    write_artifact(dir, "eigen.csv", &csv, manifest)
}
