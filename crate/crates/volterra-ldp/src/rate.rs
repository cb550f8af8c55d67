//! Variational rate functions for the scaled log-price.
//!
//! `rate_function` minimizes the functional
//!
//! ```text
//! (x − ρ ∫ σ(f̂(s)) ḟ(s) ds)² / (2 ρ̄² ∫ σ(f̂(s))² ds) + ½ ∫ ḟ(s)² ds
//! ```
//!
//! over piecewise-constant Cameron–Martin derivatives ḟ, where
//! f̂(s) = ∫_0^s K(s,u) ḟ(u) du is the kernel lift. `rate_function_hat`
//! evaluates the small-time rate either directly on the unit-interval
//! rescaled kernel or through the scaling identity; the two routes
//! cross-validate each other.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::PathGrid;
use crate::kernels::{KernelSpec, RescaledKernel, VolterraKernel};
use crate::lbfgs::{self, LbfgsOpts};
use crate::rng::{stream_rng, sub_seed};

/// Volatility function families. All are positive on the whole real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SigmaSpec {
    /// σ(x) = σ₀
    Constant { sigma0: f64 },
    /// σ(x) = σ₀ e^{βx}
    Exponential { sigma0: f64, beta: f64 },
    /// σ(x) = δ + |x|
    ShiftedAbs { delta: f64 },
    /// σ(x) = √(c₁ + c₂ x²)
    SqrtLinear { c1: f64, c2: f64 },
}

impl SigmaSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            SigmaSpec::Constant { sigma0 } => sigma0 > 0.0,
            SigmaSpec::Exponential { sigma0, beta } => sigma0 > 0.0 && beta.is_finite(),
            SigmaSpec::ShiftedAbs { delta } => delta > 0.0,
            SigmaSpec::SqrtLinear { c1, c2 } => c1 > 0.0 && c2 >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain("sigma: parameters must keep σ positive"))
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            SigmaSpec::Constant { sigma0 } => sigma0,
            SigmaSpec::Exponential { sigma0, beta } => sigma0 * (beta * x).exp(),
            SigmaSpec::ShiftedAbs { delta } => delta + x.abs(),
            SigmaSpec::SqrtLinear { c1, c2 } => (c1 + c2 * x * x).sqrt(),
        }
    }

    /// Derivative where σ is smooth; meaningless for `ShiftedAbs`, whose
    /// minimization uses finite differences instead.
    pub fn deriv(&self, x: f64) -> f64 {
        match *self {
            SigmaSpec::Constant { .. } => 0.0,
            SigmaSpec::Exponential { sigma0, beta } => sigma0 * beta * (beta * x).exp(),
            SigmaSpec::ShiftedAbs { .. } => x.signum(),
            SigmaSpec::SqrtLinear { c1, c2 } => c2 * x / (c1 + c2 * x * x).sqrt(),
        }
    }

    pub fn is_smooth(&self) -> bool {
        !matches!(self, SigmaSpec::ShiftedAbs { .. })
    }

    /// σ(x)² ≤ c₁ + c₂x² for some constants: fails only for the exponential
    /// family with β ≠ 0, where the martingality guarantee is lost.
    pub fn linear_growth_ok(&self) -> bool {
        match *self {
            SigmaSpec::Exponential { beta, .. } => beta == 0.0,
            _ => true,
        }
    }
}

/// Piecewise-constant control derivative ḟ on a uniform grid.
#[derive(Debug, Clone)]
pub struct ControlPath {
    pub grid: PathGrid,
    pub fdot: Vec<f64>,
}

impl ControlPath {
    pub fn new(grid: PathGrid, fdot: Vec<f64>) -> Result<Self> {
        if fdot.len() != grid.n {
            return Err(Error::domain("fdot length must equal the grid step count"));
        }
        Ok(ControlPath { grid, fdot })
    }

    /// Cameron–Martin energy ½ ∫ ḟ².
    pub fn energy(&self) -> f64 {
        0.5 * self.grid.dt() * self.fdot.iter().map(|v| v * v).sum::<f64>()
    }
}

/// Result of a rate-function minimization.
#[derive(Debug, Clone)]
pub struct RateResult {
    pub value: f64,
    pub optimizer_path: ControlPath,
    /// Kernel lift f̂ of the optimizer at the grid points t_0..t_n.
    pub fhat: Vec<f64>,
    pub starts_tried: usize,
    pub converged: bool,
    pub grid_refinement: Vec<(usize, f64)>,
}

/// Solver configuration; the defaults implement the documented stopping
/// rules (gradient sup-norm 1e-8, relative objective change 1e-12 over five
/// iterations, 2000-iteration cap, eight perturbed starts).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
    #[serde(default = "default_obj_rel_tol")]
    pub obj_rel_tol: f64,
    #[serde(default = "default_perturb_scale")]
    pub perturb_scale: f64,
    /// Also solve on the doubled grid and record both values.
    #[serde(default)]
    pub refine: bool,
    /// Additional caller-supplied starting controls (length n).
    #[serde(default, skip)]
    pub extra_starts: Vec<Vec<f64>>,
}

fn default_n() -> usize {
    64
}
fn default_starts() -> usize {
    8
}
fn default_max_iter() -> usize {
    2000
}
fn default_grad_tol() -> f64 {
    1e-8
}
fn default_obj_rel_tol() -> f64 {
    1e-12
}
fn default_perturb_scale() -> f64 {
    0.25
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            n: default_n(),
            starts: default_starts(),
            seed: 0,
            max_iter: default_max_iter(),
            grad_tol: default_grad_tol(),
            obj_rel_tol: default_obj_rel_tol(),
            perturb_scale: default_perturb_scale(),
            refine: false,
            extra_starts: Vec::new(),
        }
    }
}

fn validate_rho(rho: f64) -> Result<f64> {
    if !rho.is_finite() || rho.abs() >= 1.0 - 1e-9 {
        return Err(Error::domain("rho must lie strictly inside (-1, 1)"));
    }
    Ok((1.0 - rho * rho).sqrt())
}

/// Precomputed cell-integral matrices of a kernel on a uniform grid:
/// `mid[i][j] = ∫_{u_{j-1}}^{min(u_j, m_i)} K(m_i, u) du` for cell midpoints
/// m_i, and the same at the grid nodes for reporting the lift.
pub(crate) struct DiscretizedKernel {
    pub n: usize,
    pub dt: f64,
    mid: Vec<f64>,
    node: Vec<f64>,
}

impl DiscretizedKernel {
    pub fn build(kernel: &dyn VolterraKernel, n: usize) -> Result<Self> {
        let horizon = kernel.horizon();
        let dt = horizon / n as f64;
        let mut mid = vec![0.0_f64; n * n];
        let mut node = vec![0.0_f64; n * n];
        for i in 0..n {
            let m_i = (i as f64 + 0.5) * dt;
            let t_i = (i as f64 + 1.0) * dt;
            for j in 0..=i {
                let lo = j as f64 * dt;
                let hi = ((j + 1) as f64 * dt).min(horizon);
                mid[i * n + j] = kernel.cell_integral(m_i, lo, hi)?;
                node[i * n + j] = kernel.cell_integral(t_i, lo, hi)?;
            }
        }
        Ok(DiscretizedKernel { n, dt, mid, node })
    }

    /// Lift at cell midpoints: out[i] = Σ_j mid[i][j] fdot[j].
    fn lift_mid(&self, fdot: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let row = &self.mid[i * self.n..i * self.n + i + 1];
            out[i] = row.iter().zip(&fdot[..=i]).map(|(m, f)| m * f).sum();
        }
    }

    /// Lift at grid nodes t_1..t_n.
    fn lift_node(&self, fdot: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let row = &self.node[i * self.n..i * self.n + i + 1];
                row.iter().zip(&fdot[..=i]).map(|(m, f)| m * f).sum()
            })
            .collect()
    }
}

/// The discretized variational objective and its gradient.
pub(crate) struct ObjectiveEval<'a> {
    disc: &'a DiscretizedKernel,
    sigma: &'a SigmaSpec,
    rho: f64,
    rho_bar_sq: f64,
    x: f64,
}

impl<'a> ObjectiveEval<'a> {
    pub fn new(
        disc: &'a DiscretizedKernel,
        sigma: &'a SigmaSpec,
        rho: f64,
        rho_bar: f64,
        x: f64,
    ) -> Self {
        ObjectiveEval {
            disc,
            sigma,
            rho,
            rho_bar_sq: rho_bar * rho_bar,
            x,
        }
    }

    pub fn value(&self, fdot: &[f64]) -> f64 {
        let n = self.disc.n;
        let dt = self.disc.dt;
        let mut fhat = vec![0.0; n];
        self.disc.lift_mid(fdot, &mut fhat);
        let mut a = 0.0;
        let mut b = 0.0;
        let mut energy = 0.0;
        for i in 0..n {
            let s = self.sigma.eval(fhat[i]);
            a += s * fdot[i];
            b += s * s;
            energy += fdot[i] * fdot[i];
        }
        a *= dt;
        b *= dt;
        energy *= 0.5 * dt;
        let r = self.x - self.rho * a;
        r * r / (2.0 * self.rho_bar_sq * b) + energy
    }

    /// Analytic gradient; valid for smooth σ families.
    pub fn grad_analytic(&self, fdot: &[f64]) -> Vec<f64> {
        let n = self.disc.n;
        let dt = self.disc.dt;
        let mut fhat = vec![0.0; n];
        self.disc.lift_mid(fdot, &mut fhat);
        let mut sig = vec![0.0; n];
        let mut dsig = vec![0.0; n];
        let mut a = 0.0;
        let mut b = 0.0;
        for i in 0..n {
            sig[i] = self.sigma.eval(fhat[i]);
            dsig[i] = self.sigma.deriv(fhat[i]);
            a += sig[i] * fdot[i];
            b += sig[i] * sig[i];
        }
        a *= dt;
        b *= dt;
        let r = self.x - self.rho * a;
        let denom = 2.0 * self.rho_bar_sq * b;
        // dO = -ρ r/(ρ̄² B) dA - r²/(2ρ̄² B²) dB + ḟ_j dt
        let ca = -self.rho * r / (self.rho_bar_sq * b);
        let cb = -r * r / (denom * b);
        let mut grad = vec![0.0; n];
        // Direct terms: dA/dḟ_j includes σ_j dt; dB has no direct term.
        for j in 0..n {
            grad[j] = ca * sig[j] * dt + fdot[j] * dt;
        }
        // Chain terms through f̂(m_i) = Σ_j M_ij ḟ_j (M lower-triangular).
        for i in 0..n {
            let wa = ca * dsig[i] * fdot[i] * dt;
            let wb = cb * 2.0 * sig[i] * dsig[i] * dt;
            let w = wa + wb;
            if w != 0.0 {
                let row = &self.disc.mid[i * n..i * n + i + 1];
                for (j, m) in row.iter().enumerate() {
                    grad[j] += w * m;
                }
            }
        }
        grad
    }

    /// Central finite-difference gradient with step 1e-6·(1+|ḟ_j|), used for
    /// the nonsmooth σ family.
    pub fn grad_fd(&self, fdot: &[f64]) -> Vec<f64> {
        let n = self.disc.n;
        let mut grad = vec![0.0; n];
        let mut work = fdot.to_vec();
        for j in 0..n {
            let h = 1e-6 * (1.0 + fdot[j].abs());
            work[j] = fdot[j] + h;
            let up = self.value(&work);
            work[j] = fdot[j] - h;
            let down = self.value(&work);
            work[j] = fdot[j];
            grad[j] = (up - down) / (2.0 * h);
        }
        grad
    }

    pub fn grad(&self, fdot: &[f64]) -> Vec<f64> {
        if self.sigma.is_smooth() {
            self.grad_analytic(fdot)
        } else {
            self.grad_fd(fdot)
        }
    }
}

/// Relative L² gap between the analytic and central-difference gradients of
/// the objective at one control; diagnostic for the smooth σ families.
pub fn gradient_check(
    spec: &KernelSpec,
    sigma: &SigmaSpec,
    rho: f64,
    x: f64,
    grid: &PathGrid,
    fdot: &[f64],
) -> Result<f64> {
    spec.validate()?;
    sigma.validate()?;
    let rho_bar = validate_rho(rho)?;
    if fdot.len() != grid.n {
        return Err(Error::domain("fdot length must equal the grid step count"));
    }
    let disc = DiscretizedKernel::build(spec, grid.n)?;
    let eval = ObjectiveEval::new(&disc, sigma, rho, rho_bar, x);
    let ga = eval.grad_analytic(fdot);
    let gf = eval.grad_fd(fdot);
    let gap: f64 = ga
        .iter()
        .zip(&gf)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = ga.iter().map(|a| a * a).sum::<f64>().sqrt();
    Ok(gap / norm.max(1e-12))
}

/// Kernel lift f̂ of a control at the grid points t_0..t_n (f̂(0) = 0 first).
pub fn lift_control(spec: &KernelSpec, path: &ControlPath) -> Result<Vec<f64>> {
    spec.validate()?;
    if (path.grid.t_horizon - spec.t_horizon).abs() > 1e-12 * spec.t_horizon {
        return Err(Error::domain(
            "control grid horizon must match the kernel horizon",
        ));
    }
    let disc = DiscretizedKernel::build(spec, path.grid.n)?;
    let mut out = vec![0.0];
    out.extend(disc.lift_node(&path.fdot));
    Ok(out)
}

/// The variational objective at a given control.
pub fn objective(
    spec: &KernelSpec,
    sigma: &SigmaSpec,
    rho: f64,
    x: f64,
    path: &ControlPath,
) -> Result<f64> {
    spec.validate()?;
    sigma.validate()?;
    let rho_bar = validate_rho(rho)?;
    let disc = DiscretizedKernel::build(spec, path.grid.n)?;
    Ok(ObjectiveEval::new(&disc, sigma, rho, rho_bar, x).value(&path.fdot))
}

fn solve_on(
    kernel: &dyn VolterraKernel,
    sigma: &SigmaSpec,
    rho: f64,
    rho_bar: f64,
    x: f64,
    n: usize,
    cfg: &SolverConfig,
) -> Result<(f64, Vec<f64>, usize, bool, DiscretizedKernel)> {
    let disc = DiscretizedKernel::build(kernel, n)?;
    let (value, fdot, starts, converged) =
        solve_with(&disc, kernel.horizon(), sigma, rho, rho_bar, x, cfg);
    Ok((value, fdot, starts, converged, disc))
}

fn solve_with(
    disc: &DiscretizedKernel,
    horizon: f64,
    sigma: &SigmaSpec,
    rho: f64,
    rho_bar: f64,
    x: f64,
    cfg: &SolverConfig,
) -> (f64, Vec<f64>, usize, bool) {
    let n = disc.n;
    let eval = ObjectiveEval::new(disc, sigma, rho, rho_bar, x);

    // Deterministic multistart: the constant control that is optimal in the
    // constant-σ reduction, plus seeded Gaussian perturbations of it.
    let base_level = rho * x / (sigma.eval(0.0) * horizon);
    let mut starts: Vec<Vec<f64>> = vec![vec![base_level; n]];
    for k in 0..cfg.starts {
        let mut rng = stream_rng(sub_seed(cfg.seed, k as u64 + 1), 0);
        let scale = cfg.perturb_scale * (1.0 + base_level.abs());
        starts.push(
            (0..n)
                .map(|_| base_level + scale * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        );
    }
    for extra in &cfg.extra_starts {
        if extra.len() == n {
            starts.push(extra.clone());
        }
    }

    let opts = LbfgsOpts {
        max_iter: cfg.max_iter,
        grad_tol: cfg.grad_tol,
        obj_rel_tol: cfg.obj_rel_tol,
        ..LbfgsOpts::default()
    };
    let mut best: Option<(f64, f64, Vec<f64>, bool)> = None; // (value, energy, fdot, converged)
    let mut any_converged = false;
    let starts_tried = starts.len();
    for start in starts {
        let out = lbfgs::minimize(|v| eval.value(v), |v| eval.grad(v), start, opts);
        any_converged |= out.converged;
        let energy = 0.5 * disc.dt * out.x.iter().map(|v| v * v).sum::<f64>();
        let better = match &best {
            None => true,
            Some((bv, be, _, _)) => {
                out.value < bv - 1e-14 || (out.value <= bv + 1e-14 && energy < *be)
            }
        };
        if better {
            best = Some((out.value, energy, out.x, out.converged));
        }
    }
    let (value, _, fdot, _) = best.expect("at least one start");
    (value, fdot, starts_tried, any_converged)
}

fn rate_function_on(
    kernel: &dyn VolterraKernel,
    sigma: &SigmaSpec,
    rho: f64,
    x: f64,
    cfg: &SolverConfig,
) -> Result<RateResult> {
    sigma.validate()?;
    let rho_bar = validate_rho(rho)?;
    if !x.is_finite() {
        return Err(Error::domain("target x must be finite"));
    }
    if cfg.n == 0 {
        return Err(Error::domain("solver grid size must be positive"));
    }
    let (value, fdot, starts_tried, converged, disc) =
        solve_on(kernel, sigma, rho, rho_bar, x, cfg.n, cfg)?;
    let mut refinement = vec![(cfg.n, value)];
    if cfg.refine {
        // Warm-start the doubled grid with the coarse optimizer.
        let mut warm = Vec::with_capacity(2 * cfg.n);
        for v in &fdot {
            warm.push(*v);
            warm.push(*v);
        }
        let mut cfg2 = cfg.clone();
        cfg2.extra_starts = vec![warm];
        cfg2.refine = false;
        let (v2, _, _, _, _) = solve_on(kernel, sigma, rho, rho_bar, x, 2 * cfg.n, &cfg2)?;
        refinement.push((2 * cfg.n, v2));
    }
    let grid = PathGrid::new(cfg.n, kernel.horizon())?;
    let mut fhat = vec![0.0];
    fhat.extend(disc.lift_node(&fdot));
    Ok(RateResult {
        value,
        optimizer_path: ControlPath::new(grid, fdot)?,
        fhat,
        starts_tried,
        converged,
        grid_refinement: refinement,
    })
}

/// Small-noise rate function I_T(x): multistart quasi-Newton minimization of
/// the variational objective. The returned value is an upper bound on the
/// true infimum that converges under grid refinement.
pub fn rate_function(
    spec: &KernelSpec,
    sigma: &SigmaSpec,
    rho: f64,
    x: f64,
    cfg: &SolverConfig,
) -> Result<RateResult> {
    spec.validate()?;
    rate_function_on(spec, sigma, rho, x, cfg)
}

/// Rate function over a grid of targets, sharing one kernel discretization
/// and warm-starting each solve with the previous optimizer. Results align
/// with `xs`.
pub fn rate_function_grid(
    spec: &KernelSpec,
    sigma: &SigmaSpec,
    rho: f64,
    xs: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<RateResult>> {
    spec.validate()?;
    sigma.validate()?;
    let rho_bar = validate_rho(rho)?;
    if cfg.n == 0 {
        return Err(Error::domain("solver grid size must be positive"));
    }
    let horizon = spec.t_horizon;
    let disc = DiscretizedKernel::build(spec, cfg.n)?;
    let disc_fine = if cfg.refine {
        Some(DiscretizedKernel::build(spec, 2 * cfg.n)?)
    } else {
        None
    };
    let mut out = Vec::with_capacity(xs.len());
    let mut warm: Option<Vec<f64>> = None;
    for &x in xs {
        if !x.is_finite() {
            return Err(Error::domain("target x must be finite"));
        }
        let mut cfg_x = cfg.clone();
        if let Some(w) = &warm {
            cfg_x.extra_starts.push(w.clone());
        }
        let (value, fdot, starts_tried, converged) =
            solve_with(&disc, horizon, sigma, rho, rho_bar, x, &cfg_x);
        let mut refinement = vec![(cfg.n, value)];
        if let Some(fine) = &disc_fine {
            let mut warm_fine = Vec::with_capacity(2 * cfg.n);
            for v in &fdot {
                warm_fine.push(*v);
                warm_fine.push(*v);
            }
            let mut cfg_fine = cfg.clone();
            cfg_fine.extra_starts = vec![warm_fine];
            let (v2, _, _, _) = solve_with(fine, horizon, sigma, rho, rho_bar, x, &cfg_fine);
            refinement.push((2 * cfg.n, v2));
        }
        let grid = PathGrid::new(cfg.n, horizon)?;
        let mut fhat = vec![0.0];
        fhat.extend(disc.lift_node(&fdot));
        warm = Some(fdot.clone());
        out.push(RateResult {
            value,
            optimizer_path: ControlPath::new(grid, fdot)?,
            fhat,
            starts_tried,
            converged,
            grid_refinement: refinement,
        });
    }
    Ok(out)
}

/// Evaluation route for the small-time rate function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HatMethod {
    /// Minimize directly over the unit interval with the rescaled kernel
    /// K̃_T(r, u) = T^{1/2−H} K(Tr, Tu).
    Direct,
    /// Use Î_T(y) = T^{2H} I_T(T^{1/2−H} y).
    ScalingIdentity,
}

/// Small-time rate function Î_T(y) for a kernel with self-similarity index
/// `h_scaling` ∈ (0, 1). Both routes are exposed so they can cross-validate
/// each other; callers gate self-similarity separately.
pub fn rate_function_hat(
    spec: &KernelSpec,
    sigma: &SigmaSpec,
    rho: f64,
    h_scaling: f64,
    y: f64,
    cfg: &SolverConfig,
    method: HatMethod,
) -> Result<RateResult> {
    spec.validate()?;
    if !(h_scaling > 0.0 && h_scaling < 1.0) {
        return Err(Error::domain("small-time rate requires H in (0, 1)"));
    }
    match method {
        HatMethod::Direct => {
            let rescaled = RescaledKernel {
                base: spec,
                h: h_scaling,
            };
            rate_function_on(&rescaled, sigma, rho, y, cfg)
        }
        HatMethod::ScalingIdentity => {
            let t = spec.t_horizon;
            let inner_x = t.powf(0.5 - h_scaling) * y;
            let inner = rate_function_on(spec, sigma, rho, inner_x, cfg)?;
            let scale = t.powf(2.0 * h_scaling);
            Ok(RateResult {
                value: scale * inner.value,
                grid_refinement: inner
                    .grid_refinement
                    .iter()
                    .map(|&(n, v)| (n, scale * v))
                    .collect(),
                ..inner
            })
        }
    }
}
