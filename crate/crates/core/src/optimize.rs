//! Limited-memory BFGS with a strong-Wolfe line search.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LbfgsOptions {
    pub memory: usize,
    /// Stop when `‖∇f‖₂ < tol_g`.
    pub tol_g: f64,
    /// Stop when `|f_prev − f| ≤ tol_f · max(1, |f|)`.
    pub tol_f: f64,
    pub max_iters: usize,
    pub c1: f64,
    pub c2: f64,
    pub max_line_evals: usize,
    /// Consecutive line-search failures tolerated (each resets the memory).
    pub max_restarts: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self { memory: 10, tol_g: 1e-9, tol_f: 1e-12, max_iters: 2000, c1: 1e-4, c2: 0.9, max_line_evals: 30, max_restarts: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Gradient,
    EnergyChange,
    MaxIters,
    LineSearch,
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub f_initial: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub reason: StopReason,
}

impl OptimResult {
    pub fn converged(&self) -> bool {
        matches!(self.reason, StopReason::Gradient | StopReason::EnergyChange)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Point {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

struct Objective<'a, F> {
    f: &'a mut F,
    evals: usize,
    best: Option<Point>,
}

impl<F: FnMut(&[f64]) -> (f64, Vec<f64>)> Objective<'_, F> {
    fn eval(&mut self, x: Vec<f64>) -> Point {
        let (f, g) = (self.f)(&x);
        self.evals += 1;
        let p = Point { x, f, g };
        if f.is_finite() && self.best.as_ref().map_or(true, |b| f < b.f) {
            self.best = Some(Point { x: p.x.clone(), f, g: p.g.clone() });
        }
        p
    }
}

/// Minimizer of the cubic through `(a, fa, da)` and `(b, fb, db)`, clamped to
/// the interior of the bracket.
fn cubic_step(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let margin = 0.1 * (hi - lo);
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    let t = if disc >= 0.0 {
        let d2 = (b - a).signum() * disc.sqrt();
        b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2)
    } else {
        0.5 * (a + b)
    };
    if t.is_finite() {
        t.clamp(lo + margin, hi - margin)
    } else {
        0.5 * (a + b)
    }
}

/// Strong-Wolfe line search along `d` from `p0`. Returns the accepted point.
fn line_search<F: FnMut(&[f64]) -> (f64, Vec<f64>)>(
    obj: &mut Objective<'_, F>,
    p0: &Point,
    d: &[f64],
    a_init: f64,
    opts: &LbfgsOptions,
) -> Option<Point> {
    let dphi0 = dot(&p0.g, d);
    if dphi0 >= 0.0 {
        return None;
    }
    let step = |a: f64| -> Vec<f64> { p0.x.iter().zip(d).map(|(x, di)| x + a * di).collect() };
    let armijo = |a: f64, f: f64| f <= p0.f + opts.c1 * a * dphi0;
    let curvature = |dphi: f64| dphi.abs() <= -opts.c2 * dphi0;

    let (mut a_prev, mut f_prev, mut d_prev) = (0.0, p0.f, dphi0);
    let mut a = a_init;
    let mut evals = 0;
    // Bracketing phase.
    let (mut lo, mut hi) = loop {
        if evals >= opts.max_line_evals {
            return None;
        }
        let p = obj.eval(step(a));
        evals += 1;
        let dphi = dot(&p.g, d);
        if !p.f.is_finite() {
            // Back off into the finite region.
            a = 0.5 * (a_prev + a);
            continue;
        }
        if !armijo(a, p.f) || (evals > 1 && p.f >= f_prev) {
            break ((a_prev, f_prev, d_prev), (a, p.f, dphi));
        }
        if curvature(dphi) {
            return Some(p);
        }
        if dphi >= 0.0 {
            break ((a, p.f, dphi), (a_prev, f_prev, d_prev));
        }
        a_prev = a;
        f_prev = p.f;
        d_prev = dphi;
        a *= 2.5;
    };
    // Zoom phase.
    while evals < opts.max_line_evals {
        let a = cubic_step(lo.0, lo.1, lo.2, hi.0, hi.1, hi.2);
        if (hi.0 - lo.0).abs() < 1e-16 * lo.0.abs().max(1.0) {
            break;
        }
        let p = obj.eval(step(a));
        evals += 1;
        let dphi = dot(&p.g, d);
        if !p.f.is_finite() || !armijo(a, p.f) || p.f >= lo.1 {
            hi = (a, p.f, dphi);
        } else {
            if curvature(dphi) {
                return Some(p);
            }
            if dphi * (hi.0 - lo.0) >= 0.0 {
                hi = lo;
            }
            lo = (a, p.f, dphi);
        }
    }
    // Accept the best sufficient-decrease point seen in the bracket, if any.
    if lo.0 > 0.0 && lo.1 < p0.f {
        let p = obj.eval(step(lo.0));
        return Some(p);
    }
    None
}

/// Minimize `f` (returning value and gradient) from `x0`.
pub fn minimize<F: FnMut(&[f64]) -> (f64, Vec<f64>)>(mut f: F, x0: &[f64], opts: &LbfgsOptions) -> OptimResult {
    let mut obj = Objective { f: &mut f, evals: 0, best: None };
    let mut cur = obj.eval(x0.to_vec());
    let f_initial = cur.f;
    let n = x0.len();
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut iterations = 0;
    let mut failures = 0;
    let finish = |obj: Objective<'_, F>, cur: Point, iterations: usize, reason: StopReason| {
        let best = match obj.best {
            Some(b) if b.f < cur.f => b,
            _ => cur,
        };
        OptimResult { grad_norm: norm(&best.g), x: best.x, f: best.f, f_initial, iterations, evaluations: obj.evals, reason }
    };
    if n == 0 {
        return finish(obj, cur, 0, StopReason::Gradient);
    }
    loop {
        if norm(&cur.g) < opts.tol_g {
            return finish(obj, cur, iterations, StopReason::Gradient);
        }
        if iterations >= opts.max_iters {
            return finish(obj, cur, iterations, StopReason::MaxIters);
        }
        // Two-loop recursion.
        let mut q = cur.g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        let gamma = hist.back().map_or(1.0, |(s, y, _)| dot(s, y) / dot(y, y));
        q.iter_mut().for_each(|qi| *qi *= gamma);
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let d: Vec<f64> = q.iter().map(|x| -x).collect();
        let a_init = if hist.is_empty() { (1.0 / norm(&cur.g)).min(1.0) } else { 1.0 };

        match line_search(&mut obj, &cur, &d, a_init, opts) {
            Some(next) => {
                failures = 0;
                iterations += 1;
                let s: Vec<f64> = next.x.iter().zip(&cur.x).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = next.g.iter().zip(&cur.g).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &y);
                if sy > 1e-16 * norm(&s) * norm(&y) {
                    if hist.len() == opts.memory {
                        hist.pop_front();
                    }
                    hist.push_back((s, y, 1.0 / sy));
                }
                let df = (cur.f - next.f).abs();
                let small = df <= opts.tol_f * next.f.abs().max(1.0);
                cur = next;
                if small {
                    let reason = if norm(&cur.g) < opts.tol_g { StopReason::Gradient } else { StopReason::EnergyChange };
                    return finish(obj, cur, iterations, reason);
                }
            }
            None => {
                failures += 1;
                if failures > opts.max_restarts || hist.is_empty() && failures > 1 {
                    return finish(obj, cur, iterations, StopReason::LineSearch);
                }
                hist.clear();
            }
        }
    }
}
