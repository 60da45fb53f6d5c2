//! Limited-memory BFGS with box constraints handled by projection.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop when one iteration improves the objective by less than
    /// `f_tol * (1 + |f|)`.
    pub f_tol: f64,
    /// Stop when the projected gradient's sup-norm drops below this.
    pub g_tol: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iter: 200,
            f_tol: 1e-8,
            g_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    SmallImprovement,
    SmallGradient,
    MaxIterations,
    LineSearchFailed,
    InitialEvaluationFailed,
}

impl StopReason {
    pub fn converged(self) -> bool {
        matches!(self, StopReason::SmallImprovement | StopReason::SmallGradient)
    }
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub f_initial: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub reason: StopReason,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lower[i], upper[i]);
    }
}

/// Coordinates pinned at a bound with the gradient pushing outward.
fn active_set(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> Vec<bool> {
    (0..x.len())
        .map(|i| (x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0))
        .collect()
}

/// Minimizes `f` over the box `[lower, upper]` starting from `x0`.
///
/// `f` returns the value and gradient, or `None` when the point cannot be
/// evaluated; such points are treated as `+inf` by the line search.
pub fn minimize<F>(mut f: F, x0: &[f64], lower: &[f64], upper: &[f64], cfg: &LbfgsConfig) -> OptimResult
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let mut evaluations = 1;
    let (mut fx, mut g) = match f(&x) {
        Some((v, g)) if v.is_finite() && g.iter().all(|d| d.is_finite()) => (v, g),
        _ => {
            return OptimResult {
                x,
                f: f64::INFINITY,
                f_initial: f64::INFINITY,
                iterations: 0,
                evaluations,
                reason: StopReason::InitialEvaluationFailed,
            }
        }
    };
    let f_initial = fx;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.memory);
    let mut reason = StopReason::MaxIterations;
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        let active = active_set(&x, &g, lower, upper);
        let pg_norm = (0..n)
            .filter(|&i| !active[i])
            .map(|i| g[i].abs())
            .fold(0.0, f64::max);
        if pg_norm < cfg.g_tol {
            reason = StopReason::SmallGradient;
            break;
        }

        let mut accepted = None;
        for attempt in 0..2 {
            let steepest = attempt == 1 || history.is_empty();
            let d = if steepest {
                (0..n).map(|i| if active[i] { 0.0 } else { -g[i] }).collect()
            } else {
                let d = two_loop(&history, &g, &active);
                if dot(&d, &g) < 0.0 {
                    d
                } else {
                    (0..n).map(|i| if active[i] { 0.0 } else { -g[i] }).collect()
                }
            };
            let mut step = if steepest {
                let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if dmax > 1.0 {
                    1.0 / dmax
                } else {
                    1.0
                }
            } else {
                1.0
            };
            for _ in 0..40 {
                let mut xn: Vec<f64> = (0..n).map(|i| x[i] + step * d[i]).collect();
                project(&mut xn, lower, upper);
                let moved: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
                let decrease = dot(&g, &moved);
                if moved.iter().all(|v| *v == 0.0) {
                    break;
                }
                evaluations += 1;
                if let Some((fv, gv)) = f(&xn) {
                    if fv.is_finite()
                        && gv.iter().all(|d| d.is_finite())
                        && fv <= fx + 1e-4 * decrease.min(0.0)
                    {
                        accepted = Some((xn, fv, gv));
                        break;
                    }
                }
                step *= 0.5;
            }
            if accepted.is_some() || steepest {
                break;
            }
            history.clear();
        }

        iterations += 1;
        let Some((xn, fn_, gn)) = accepted else {
            reason = StopReason::LineSearchFailed;
            break;
        };
        let s: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
        let yv: Vec<f64> = (0..n).map(|i| gn[i] - g[i]).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-10 * dot(&yv, &yv).sqrt() * dot(&s, &s).sqrt() {
            if history.len() == cfg.memory {
                history.pop_front();
            }
            history.push_back((s, yv, 1.0 / sy));
        }
        let improvement = fx - fn_;
        x = xn;
        fx = fn_;
        g = gn;
        if improvement < cfg.f_tol * (1.0 + fx.abs()) {
            reason = StopReason::SmallImprovement;
            break;
        }
    }

    OptimResult {
        x,
        f: fx,
        f_initial,
        iterations,
        evaluations,
        reason,
    }
}

fn two_loop(history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, g: &[f64], active: &[bool]) -> Vec<f64> {
    let n = g.len();
    let mut q: Vec<f64> = (0..n).map(|i| if active[i] { 0.0 } else { g[i] }).collect();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for i in 0..n {
            q[i] -= a * y[i];
        }
        alphas.push(a);
    }
    let (s, y, _) = history.back().expect("non-empty history");
    let gamma = dot(s, y) / dot(y, y);
    for v in q.iter_mut() {
        *v *= gamma;
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for i in 0..n {
            q[i] += (a - b) * s[i];
        }
    }
    (0..n).map(|i| if active[i] { 0.0 } else { -q[i] }).collect()
}
