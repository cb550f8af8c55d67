//! Exact joint simulation of (W, B, B̂) on a uniform grid through a Cholesky
//! factorization of the joint covariance of (B, B̂), plus the Nyström
//! Karhunen–Loève spectrum of B̂ and the exponential-moment bound built on it.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{covariance_fast, kernel_cell_integral, KernelSpec};
use crate::linalg::{cholesky_with_jitter, CholeskyFactor, SquareMatrix};
use crate::rng::stream_rng;

pub const MAX_JITTER_ATTEMPTS: u32 = 20;

/// Uniform simulation grid t_i = i·T/n, i = 0..n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathGrid {
    pub n: usize,
    pub t_horizon: f64,
}

impl PathGrid {
    pub fn new(n: usize, t_horizon: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("grid needs at least one step"));
        }
        if !(t_horizon > 0.0) || !t_horizon.is_finite() {
            return Err(Error::domain("grid horizon must be finite and positive"));
        }
        Ok(PathGrid { n, t_horizon })
    }

    pub fn dt(&self) -> f64 {
        self.t_horizon / self.n as f64
    }

    /// Simulation times t_1, …, t_n (the origin is implicit).
    pub fn times(&self) -> Vec<f64> {
        (1..=self.n).map(|i| i as f64 * self.dt()).collect()
    }

    /// Cell midpoints (i − ½)·dt used by the Nyström discretization.
    pub fn midpoints(&self) -> Vec<f64> {
        (1..=self.n).map(|i| (i as f64 - 0.5) * self.dt()).collect()
    }
}

/// Batch of jointly sampled paths, row-major `paths × n`.
#[derive(Debug, Clone)]
pub struct JointPathBatch {
    pub paths: usize,
    pub n: usize,
    pub w_increments: Vec<f64>,
    pub b_increments: Vec<f64>,
    pub bhat_values: Vec<f64>,
    pub seed: u64,
}

impl JointPathBatch {
    pub fn w_row(&self, p: usize) -> &[f64] {
        &self.w_increments[p * self.n..(p + 1) * self.n]
    }

    pub fn b_row(&self, p: usize) -> &[f64] {
        &self.b_increments[p * self.n..(p + 1) * self.n]
    }

    pub fn bhat_row(&self, p: usize) -> &[f64] {
        &self.bhat_values[p * self.n..(p + 1) * self.n]
    }
}

/// Covariance of (B_{t_1}, …, B_{t_n}, B̂_{t_1}, …, B̂_{t_n}).
pub fn build_joint_covariance(spec: &KernelSpec, grid: &PathGrid) -> Result<SquareMatrix> {
    spec.validate()?;
    if grid.t_horizon > spec.t_horizon + 1e-12 * spec.t_horizon {
        return Err(Error::domain("grid horizon exceeds the kernel horizon"));
    }
    let times = grid.times();
    let n = grid.n;
    let mut m = SquareMatrix::zeros(2 * n);
    for i in 0..n {
        for j in 0..=i {
            let v = times[j]; // = min(t_i, t_j)
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    for i in 0..n {
        for j in 0..n {
            // E[B_{t_i} B̂_{t_j}] = ∫_0^{t_i ∧ t_j} K(t_j, u) du
            let v = kernel_cell_integral(spec, times[j], 0.0, times[i].min(times[j]))?;
            m.set(i, n + j, v);
            m.set(n + j, i, v);
        }
    }
    for i in 0..n {
        for j in 0..=i {
            let v = covariance_fast(spec, times[i], times[j])?;
            m.set(n + i, n + j, v);
            m.set(n + j, n + i, v);
        }
    }
    Ok(m)
}

/// Shared immutable sampler: one factorization, any number of worker draws.
pub struct PathSampler {
    pub grid: PathGrid,
    factor: CholeskyFactor,
}

impl PathSampler {
    pub fn new(spec: &KernelSpec, grid: &PathGrid) -> Result<Self> {
        let cov = build_joint_covariance(spec, grid)?;
        let factor = cholesky_with_jitter(&cov, MAX_JITTER_ATTEMPTS)?;
        Ok(PathSampler {
            grid: *grid,
            factor,
        })
    }

    pub fn jitter(&self) -> f64 {
        self.factor.jitter
    }

    /// Fill one path. Draw order per path stream: 2n joint normals for
    /// (B, B̂), then n independent normals for W.
    pub fn sample_into(
        &self,
        seed: u64,
        path_index: u64,
        w_inc: &mut [f64],
        b_inc: &mut [f64],
        bhat: &mut [f64],
    ) {
        let n = self.grid.n;
        debug_assert!(w_inc.len() == n && b_inc.len() == n && bhat.len() == n);
        let mut rng = stream_rng(seed, path_index);
        let mut z = vec![0.0_f64; 2 * n];
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        let mut joint = vec![0.0_f64; 2 * n];
        self.factor.apply(&z, &mut joint);
        let mut prev = 0.0;
        for i in 0..n {
            b_inc[i] = joint[i] - prev;
            prev = joint[i];
            bhat[i] = joint[n + i];
        }
        let sqrt_dt = self.grid.dt().sqrt();
        for wi in w_inc.iter_mut() {
            let g: f64 = rng.sample(StandardNormal);
            *wi = g * sqrt_dt;
        }
    }
}

/// Sample a full batch. Deterministic for fixed `(seed, spec, grid, paths)`
/// regardless of the worker count: every path has its own derived stream.
pub fn sample_paths(
    spec: &KernelSpec,
    grid: &PathGrid,
    paths: usize,
    seed: u64,
) -> Result<JointPathBatch> {
    if paths == 0 {
        return Err(Error::domain("paths must be at least 1"));
    }
    let sampler = PathSampler::new(spec, grid)?;
    let n = grid.n;
    let mut w = vec![0.0_f64; paths * n];
    let mut b = vec![0.0_f64; paths * n];
    let mut bhat = vec![0.0_f64; paths * n];
    w.par_chunks_mut(n)
        .zip(b.par_chunks_mut(n))
        .zip(bhat.par_chunks_mut(n))
        .enumerate()
        .for_each(|(p, ((wr, br), hr))| {
            sampler.sample_into(seed, p as u64, wr, br, hr);
        });
    Ok(JointPathBatch {
        paths,
        n,
        w_increments: w,
        b_increments: b,
        bhat_values: bhat,
        seed,
    })
}

/// Karhunen–Loève spectrum of B̂ on [0, T].
#[derive(Debug, Clone)]
pub struct KLSpectrum {
    /// Largest eigenvalues, decreasing, strictly positive.
    pub eigenvalues: Vec<f64>,
    pub count: usize,
    /// Discrete trace Σ C(m_i, m_i)·dt ≈ ∫_0^T C(t,t) dt.
    pub trace_estimate: f64,
    /// Trace mass not carried by the retained eigenvalues.
    pub truncation_error: f64,
}

/// Nyström eigenvalues of the covariance operator: the symmetric matrix
/// C(m_i, m_j)·dt over cell midpoints m_i. Negative numerical eigenvalues are
/// clamped to zero and excluded.
pub fn kl_spectrum(spec: &KernelSpec, grid: &PathGrid, count: usize) -> Result<KLSpectrum> {
    spec.validate()?;
    if count == 0 || count > grid.n {
        return Err(Error::domain("count must lie in 1..=n"));
    }
    let mids = grid.midpoints();
    let dt = grid.dt();
    let n = grid.n;
    let mut m = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let v = covariance_fast(spec, mids[i], mids[j])? * dt;
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    let trace_estimate = (0..n).map(|i| m.get(i, i)).sum::<f64>();
    let mut eigs = crate::linalg::symmetric_eigenvalues(&m)?;
    eigs.reverse(); // decreasing
    let eigenvalues: Vec<f64> = eigs.into_iter().take(count).filter(|&l| l > 0.0).collect();
    let retained: f64 = eigenvalues.iter().sum();
    Ok(KLSpectrum {
        count: eigenvalues.len(),
        eigenvalues,
        trace_estimate,
        truncation_error: trace_estimate - retained,
    })
}

/// Exponential-moment bound from the KL spectrum: valid threshold
/// (4aλ₁)⁻¹ and, below it, the bound exp(2aΣλ_k).
#[derive(Debug, Clone, Copy)]
pub struct MomentBound {
    pub threshold: f64,
    pub bound: f64,
}

pub fn moment_bound(spectrum: &KLSpectrum, a: f64, eps: f64) -> Result<MomentBound> {
    if !(a > 0.0) {
        return Err(Error::domain("a must be positive"));
    }
    let lambda1 = *spectrum
        .eigenvalues
        .first()
        .ok_or_else(|| Error::domain("empty KL spectrum"))?;
    let threshold = 1.0 / (4.0 * a * lambda1);
    if !(eps > 0.0 && eps < threshold) {
        return Err(Error::MomentRange { eps, threshold });
    }
    Ok(MomentBound {
        threshold,
        bound: (2.0 * a * spectrum.trace_estimate).exp(),
    })
}

/// Monte Carlo estimate (mean, standard error) of E[exp(a·eps·∫_0^T B̂_u² du)]
/// with the time integral by the trapezoid rule on the grid.
pub fn exp_moment_mc(
    spec: &KernelSpec,
    grid: &PathGrid,
    a: f64,
    eps: f64,
    paths: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if paths < 2 {
        return Err(Error::domain("paths must be at least 2"));
    }
    let sampler = PathSampler::new(spec, grid)?;
    let n = grid.n;
    let dt = grid.dt();
    // Fixed chunking keeps the reduction order independent of thread count.
    let chunk = 4096usize;
    let ranges: Vec<(usize, usize)> = (0..paths)
        .step_by(chunk)
        .map(|lo| (lo, (lo + chunk).min(paths)))
        .collect();
    let partials: Vec<(f64, f64)> = ranges
        .par_iter()
        .map(|&(lo, hi)| {
            let mut w = vec![0.0; n];
            let mut b = vec![0.0; n];
            let mut bh = vec![0.0; n];
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for p in lo..hi {
                sampler.sample_into(seed, p as u64, &mut w, &mut b, &mut bh);
                // Trapezoid with B̂(0) = 0.
                let mut integral = 0.5 * bh[n - 1] * bh[n - 1];
                for v in &bh[..n - 1] {
                    integral += v * v;
                }
                integral *= dt;
                let val = (a * eps * integral).exp();
                sum += val;
                sum_sq += val * val;
            }
            (sum, sum_sq)
        })
        .collect();
    let (sum, sum_sq) = partials
        .iter()
        .fold((0.0, 0.0), |(s, q), &(ps, pq)| (s + ps, q + pq));
    let np = paths as f64;
    let mean = sum / np;
    let var = (sum_sq - np * mean * mean).max(0.0) / (np - 1.0);
    Ok((mean, (var / np).sqrt()))
}
