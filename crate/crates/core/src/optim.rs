//! Unconstrained smooth minimization on flat `f64` vectors.
//!
//! Two methods share one report type: limited-memory BFGS with a backtracking Armijo
//! search, and a Barzilai–Borwein gradient flow whose steps are also safeguarded by
//! Armijo backtracking so that recorded values never increase.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::{abs, sqrt};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    GradientFlow,
    QuasiNewton,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    pub method: Method,
    pub max_iters: usize,
    /// Stop when `grad_scale · max|∇f| < grad_tol`.
    pub grad_tol: f64,
    pub grad_scale: f64,
    /// Stop when the accepted step moves no coordinate by more than this.
    pub step_tol: f64,
    /// Stop when the value drops by at most `value_tol · max(1, |f|)` over the last
    /// `value_window` iterations; zero disables the test.
    pub value_tol: f64,
    pub value_window: usize,
    /// L-BFGS history length.
    pub memory: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            method: Method::QuasiNewton,
            max_iters: 1000,
            grad_tol: 1e-10,
            grad_scale: 1.0,
            step_tol: 0.0,
            value_tol: 0.0,
            value_window: 10,
            memory: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    GradientTolerance,
    StepTolerance,
    ValueTolerance,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Report {
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: Status,
}

impl Report {
    pub fn converged(&self) -> bool {
        matches!(
            self.status,
            Status::GradientTolerance | Status::StepTolerance | Status::ValueTolerance
        )
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(abs(*v)))
}

/// Minimizes `f` starting from `x`, which holds the best point on return.
///
/// `f(x, g)` returns the value and writes the gradient into `g`. `observe` receives
/// `(iteration, value, scaled gradient norm)` once before the first step and after
/// every accepted step.
pub fn minimize<F, O>(x: &mut [f64], mut f: F, opts: &Options, mut observe: O) -> Report
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
    O: FnMut(usize, f64, f64),
{
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut value = f(x, &mut g);
    let mut evaluations = 1;
    let mut gnorm = opts.grad_scale * max_abs(&g);
    observe(0, value, gnorm);

    let mut trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];
    let mut dir = vec![0.0; n];
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut bb_step: Option<f64> = None;
    let mut recent: VecDeque<f64> = VecDeque::new();
    recent.push_back(value);

    let mut iterations = 0;
    let status = loop {
        if !value.is_finite() {
            break Status::LineSearchFailed;
        }
        if gnorm < opts.grad_tol {
            break Status::GradientTolerance;
        }
        if iterations >= opts.max_iters {
            break Status::MaxIterations;
        }

        let mut t0 = 1.0;
        match opts.method {
            Method::QuasiNewton => {
                lbfgs_direction(&g, &history, &mut dir);
                if history.is_empty() {
                    let gl2 = sqrt(dot(&g, &g));
                    t0 = if gl2 > 0.0 { 1.0 / gl2.max(1.0) } else { 1.0 };
                }
            }
            Method::GradientFlow => {
                for (d, gi) in dir.iter_mut().zip(&g) {
                    *d = -gi;
                }
                t0 = bb_step.unwrap_or_else(|| {
                    let gl2 = sqrt(dot(&g, &g));
                    if gl2 > 0.0 {
                        1e-3 / gl2.max(1e-3)
                    } else {
                        1.0
                    }
                });
            }
        }
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            // not a descent direction: restart from steepest descent
            history.clear();
            for (d, gi) in dir.iter_mut().zip(&g) {
                *d = -gi;
            }
            slope = dot(&g, &dir);
            t0 = 1.0 / sqrt(-slope).max(1.0);
        }

        let mut t = t0;
        let mut accepted = None;
        for _ in 0..60 {
            for i in 0..n {
                trial[i] = x[i] + t * dir[i];
            }
            let v = f(&trial, &mut g_trial);
            evaluations += 1;
            if v.is_finite() && v <= value + 1e-4 * t * slope {
                accepted = Some(v);
                break;
            }
            t *= 0.5;
        }
        let Some(v_new) = accepted else {
            break Status::LineSearchFailed;
        };

        let mut s = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut max_step: f64 = 0.0;
        for i in 0..n {
            s[i] = trial[i] - x[i];
            y[i] = g_trial[i] - g[i];
            max_step = max_step.max(abs(s[i]));
        }
        x.copy_from_slice(&trial);
        g.copy_from_slice(&g_trial);
        value = v_new;
        gnorm = opts.grad_scale * max_abs(&g);
        iterations += 1;
        observe(iterations, value, gnorm);

        let sy = dot(&s, &y);
        match opts.method {
            Method::QuasiNewton => {
                if sy > 1e-12 * sqrt(dot(&s, &s) * dot(&y, &y)) {
                    if history.len() == opts.memory.max(1) {
                        history.pop_front();
                    }
                    history.push_back((s, y, 1.0 / sy));
                }
            }
            Method::GradientFlow => {
                let ss = dot(&s, &s);
                bb_step = if sy > 0.0 {
                    // alternate the two Barzilai–Borwein step lengths
                    Some(if iterations % 2 == 0 { ss / sy } else { sy / dot(&y, &y) })
                } else {
                    Some(2.0 * t)
                };
            }
        }
        if max_step < opts.step_tol {
            break Status::StepTolerance;
        }
        recent.push_back(value);
        if recent.len() > opts.value_window.max(1) {
            let oldest = recent.pop_front().unwrap_or(value);
            if opts.value_tol > 0.0 && oldest - value <= opts.value_tol * abs(value).max(1.0) {
                break Status::ValueTolerance;
            }
        }
    };

    Report {
        value,
        grad_norm: gnorm,
        iterations,
        evaluations,
        status,
    }
}

fn lbfgs_direction(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, dir: &mut [f64]) {
    dir.copy_from_slice(g);
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, dir);
        for (d, yi) in dir.iter_mut().zip(y) {
            *d -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        for d in dir.iter_mut() {
            *d *= gamma;
        }
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, dir);
        for (d, si) in dir.iter_mut().zip(s) {
            *d += (a - b) * si;
        }
    }
    for d in dir.iter_mut() {
        *d = -*d;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64], g: &mut [f64]) -> f64 {
        let (a, b) = (x[0], x[1]);
        g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
        g[1] = 200.0 * (b - a * a);
        (1.0 - a) * (1.0 - a) + 100.0 * (b - a * a) * (b - a * a)
    }

    #[test]
    fn quasi_newton_solves_rosenbrock() {
        let mut x = [-1.2, 1.0];
        let opts = Options {
            max_iters: 500,
            grad_tol: 1e-10,
            ..Options::default()
        };
        let r = minimize(&mut x, rosenbrock, &opts, |_, _, _| {});
        assert!(r.converged(), "{r:?}");
        assert!(abs(x[0] - 1.0) < 1e-8 && abs(x[1] - 1.0) < 1e-8);
    }

    #[test]
    fn gradient_flow_is_monotone_on_a_quadratic() {
        let diag = [1.0, 10.0, 100.0];
        let f = |x: &[f64], g: &mut [f64]| {
            let mut v = 0.0;
            for i in 0..3 {
                g[i] = diag[i] * x[i];
                v += 0.5 * diag[i] * x[i] * x[i];
            }
            v
        };
        let mut x = [1.0, 1.0, 1.0];
        let mut trace = Vec::new();
        let opts = Options {
            method: Method::GradientFlow,
            max_iters: 2000,
            grad_tol: 1e-10,
            ..Options::default()
        };
        let r = minimize(&mut x, f, &opts, |_, v, _| trace.push(v));
        assert!(r.converged());
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(max_abs(&x) < 1e-9);
    }

    #[test]
    fn already_critical_point_takes_no_steps() {
        let mut x = [0.0, 0.0];
        let r = minimize(
            &mut x,
            |x, g| {
                g[0] = x[0];
                g[1] = x[1];
                0.0
            },
            &Options::default(),
            |_, _, _| {},
        );
        assert_eq!(r.iterations, 0);
        assert_eq!(r.status, Status::GradientTolerance);
    }
}
