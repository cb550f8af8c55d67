//! Limited-memory quasi-Newton minimizer with backtracking line search.
//!
//! Stopping rules follow the solver contract: gradient sup-norm below
//! `grad_tol`, or relative objective change below `obj_rel_tol` over
//! `obj_window` consecutive iterations, with a hard iteration cap.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy)]
pub struct LbfgsOpts {
    pub memory: usize,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub obj_rel_tol: f64,
    pub obj_window: usize,
}

impl Default for LbfgsOpts {
    fn default() -> Self {
        LbfgsOpts {
            memory: 10,
            max_iter: 2000,
            grad_tol: 1e-8,
            obj_rel_tol: 1e-12,
            obj_window: 5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Minimize `f` with gradient `grad`, starting from `x0`.
pub fn minimize<F, G>(f: F, grad: G, x0: Vec<f64>, opts: LbfgsOpts) -> LbfgsOutcome
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let n = x0.len();
    let mut x = x0;
    let mut fx = f(&x);
    let mut g = grad(&x);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut small_changes = 0usize;

    for iter in 0..opts.max_iter {
        if sup_norm(&g) <= opts.grad_tol {
            return LbfgsOutcome {
                x,
                value: fx,
                iterations: iter,
                converged: true,
            };
        }

        // Two-loop recursion for the search direction.
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let alpha = rho * dot(s, &d);
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= alpha * yi;
            }
            alphas.push(alpha);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y).max(f64::MIN_POSITIVE);
            for di in d.iter_mut() {
                *di *= gamma;
            }
        }
        for ((s, y, rho), alpha) in history.iter().zip(alphas.iter().rev()) {
            let beta = rho * dot(y, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (alpha - beta) * si;
            }
        }

        // Fall back to steepest descent if the direction is not a descent
        // direction (can happen with finite-difference gradients).
        let mut gd = dot(&g, &d);
        if gd >= 0.0 {
            d = g.iter().map(|v| -v).collect();
            gd = -dot(&g, &g);
            history.clear();
        }

        // Backtracking Armijo search.
        let mut step = if history.is_empty() {
            (1.0 / sup_norm(&g).max(1.0)).min(1.0)
        } else {
            1.0
        };
        let c1 = 1e-4;
        let mut x_new = vec![0.0; n];
        let mut f_new = f64::INFINITY;
        let mut ok = false;
        for _ in 0..50 {
            for i in 0..n {
                x_new[i] = x[i] + step * d[i];
            }
            f_new = f(&x_new);
            if f_new.is_finite() && f_new <= fx + c1 * step * gd {
                ok = true;
                break;
            }
            step *= 0.5;
        }
        if !ok {
            // No acceptable step along this direction: converged only if the
            // gradient already satisfies the tolerance (checked above).
            return LbfgsOutcome {
                x,
                value: fx,
                iterations: iter,
                converged: false,
            };
        }

        let g_new = grad(&x_new);
        let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }

        let rel_change = (fx - f_new).abs() / fx.abs().max(1e-300).max(f_new.abs());
        if rel_change <= opts.obj_rel_tol {
            small_changes += 1;
        } else {
            small_changes = 0;
        }
        x = x_new;
        fx = f_new;
        g = g_new;
        if small_changes >= opts.obj_window {
            return LbfgsOutcome {
                x,
                value: fx,
                iterations: iter + 1,
                converged: true,
            };
        }
    }
    let converged = sup_norm(&g) <= opts.grad_tol;
    LbfgsOutcome {
        x,
        value: fx,
        iterations: opts.max_iter,
        converged,
    }
}
