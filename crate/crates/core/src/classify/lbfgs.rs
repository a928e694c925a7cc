//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! Deterministic: no randomness, fixed evaluation order, so repeated runs
//! from the same start produce identical iterates. The caller supplies a
//! combined objective/gradient closure.

use std::collections::VecDeque;

const C1: f64 = 1e-4; // sufficient decrease
const C2: f64 = 0.9; // curvature
const MAX_LINE_SEARCH: usize = 60;

#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// ∞-norm of the gradient at the returned point.
    pub final_grad_norm: f64,
    pub converged: bool,
    /// Objective value at the start point and after every accepted step.
    pub objective_history: Vec<f64>,
}

pub fn minimize<F>(
    f: F,
    x0: Vec<f64>,
    history: usize,
    tol: f64,
    max_iter: usize,
) -> MinimizeResult
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = x0;
    let (mut fx, mut grad) = f(&x);
    let mut objective_history = vec![fx];
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(history);
    let mut iterations = 0;
    let mut converged = inf_norm(&grad) <= tol;

    while !converged && iterations < max_iter {
        let mut direction = two_loop_direction(&grad, &pairs);
        let mut slope = dot(&direction, &grad);
        if slope >= 0.0 {
            // numerical breakdown of the curvature pairs: restart from
            // steepest descent
            pairs.clear();
            direction = grad.iter().map(|g| -g).collect();
            slope = dot(&direction, &grad);
        }
        let initial_step = if pairs.is_empty() {
            (1.0 / norm2(&grad)).min(1.0)
        } else {
            1.0
        };
        let Some(step) = wolfe_search(&f, &x, fx, &direction, slope, initial_step) else {
            break; // line search failed; report non-convergence
        };

        let s: Vec<f64> = direction.iter().map(|d| d * step.alpha).collect();
        let y: Vec<f64> = step
            .grad
            .iter()
            .zip(&grad)
            .map(|(new, old)| new - old)
            .collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * norm2(&s) * norm2(&y) {
            if pairs.len() == history {
                pairs.pop_front();
            }
            let rho = 1.0 / sy;
            pairs.push_back((s, y, rho));
        }

        x = step.x;
        fx = step.objective;
        grad = step.grad;
        objective_history.push(fx);
        iterations += 1;
        converged = inf_norm(&grad) <= tol;
    }

    MinimizeResult {
        final_grad_norm: inf_norm(&grad),
        x,
        objective: fx,
        iterations,
        converged,
        objective_history,
    }
}

/// H·g via the two-loop recursion, negated into a descent direction.
fn two_loop_direction(grad: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = grad.to_vec();
    if pairs.is_empty() {
        for v in &mut q {
            *v = -*v;
        }
        return q;
    }
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        axpy(-a, y, &mut q);
        alphas.push(a);
    }
    let (s_last, y_last, _) = pairs.back().expect("non-empty");
    let gamma = dot(s_last, y_last) / dot(y_last, y_last);
    for v in &mut q {
        *v *= gamma;
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        axpy(a - b, s, &mut q);
    }
    for v in &mut q {
        *v = -*v;
    }
    q
}

struct Accepted {
    alpha: f64,
    x: Vec<f64>,
    objective: f64,
    grad: Vec<f64>,
}

/// Strong-Wolfe line search: bracketing phase with doubling steps, then
/// bisection zoom. Returns `None` when no acceptable step is found.
fn wolfe_search<F>(
    f: &F,
    x: &[f64],
    fx0: f64,
    direction: &[f64],
    slope0: f64,
    initial_step: f64,
) -> Option<Accepted>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    debug_assert!(slope0 < 0.0);
    let eval = |alpha: f64| -> (Vec<f64>, f64, Vec<f64>, f64) {
        let xa: Vec<f64> = x
            .iter()
            .zip(direction)
            .map(|(xi, di)| xi + alpha * di)
            .collect();
        let (fa, ga) = f(&xa);
        let slope = dot(&ga, direction);
        (xa, fa, ga, slope)
    };
    let armijo = |alpha: f64, fa: f64| fa <= fx0 + C1 * alpha * slope0;

    let mut alpha_prev = 0.0;
    let mut f_prev = fx0;
    let mut alpha = initial_step.max(f64::MIN_POSITIVE);
    let mut bracket: Option<(f64, f64, f64, f64)> = None; // lo, f_lo, hi, f_hi

    for i in 0..MAX_LINE_SEARCH {
        let (xa, fa, ga, slope) = eval(alpha);
        if !armijo(alpha, fa) || (i > 0 && fa >= f_prev) {
            bracket = Some((alpha_prev, f_prev, alpha, fa));
            break;
        }
        if slope.abs() <= -C2 * slope0 {
            return Some(Accepted {
                alpha,
                x: xa,
                objective: fa,
                grad: ga,
            });
        }
        if slope >= 0.0 {
            bracket = Some((alpha, fa, alpha_prev, f_prev));
            break;
        }
        alpha_prev = alpha;
        f_prev = fa;
        alpha *= 2.0;
        if alpha > 1e12 {
            return None;
        }
    }

    let (mut lo, mut f_lo, mut hi, mut _f_hi) = bracket?;
    let mut best: Option<Accepted> = None;
    for _ in 0..MAX_LINE_SEARCH {
        let alpha = 0.5 * (lo + hi);
        if !(alpha.is_finite()) || alpha == lo || alpha == hi {
            break;
        }
        let (xa, fa, ga, slope) = eval(alpha);
        if !armijo(alpha, fa) || fa >= f_lo {
            hi = alpha;
            _f_hi = fa;
        } else {
            if slope.abs() <= -C2 * slope0 {
                return Some(Accepted {
                    alpha,
                    x: xa,
                    objective: fa,
                    grad: ga,
                });
            }
            if slope * (hi - lo) >= 0.0 {
                hi = lo;
                _f_hi = f_lo;
            }
            lo = alpha;
            f_lo = fa;
            // remember the best Armijo point in case curvature never holds
            best = Some(Accepted {
                alpha,
                x: xa,
                objective: fa,
                grad: ga,
            });
        }
    }
    best
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_a_quadratic_bowl() {
        // f = Σ (x_i - c_i)^2, minimum at c
        let center = [3.0, -1.0, 0.5];
        let f = |x: &[f64]| {
            let obj: f64 = x.iter().zip(&center).map(|(xi, ci)| (xi - ci).powi(2)).sum();
            let grad: Vec<f64> = x.iter().zip(&center).map(|(xi, ci)| 2.0 * (xi - ci)).collect();
            (obj, grad)
        };
        let result = minimize(f, vec![0.0; 3], 10, 1e-8, 100);
        assert!(result.converged);
        for (xi, ci) in result.x.iter().zip(&center) {
            assert!((xi - ci).abs() < 1e-6);
        }
    }

    #[test]
    fn minimizes_rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let obj = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let grad = vec![
                -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                200.0 * (b - a * a),
            ];
            (obj, grad)
        };
        let result = minimize(f, vec![-1.2, 1.0], 10, 1e-8, 500);
        assert!(result.converged, "grad norm {}", result.final_grad_norm);
        assert!((result.x[0] - 1.0).abs() < 1e-5);
        assert!((result.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn objective_history_is_monotone_non_increasing() {
        let f = |x: &[f64]| {
            let obj = x[0].powi(4) + x[1].powi(2) + 0.3 * x[0];
            let grad = vec![4.0 * x[0].powi(3) + 0.3, 2.0 * x[1]];
            (obj, grad)
        };
        let result = minimize(f, vec![2.0, -3.0], 10, 1e-10, 200);
        for w in result.objective_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "objective rose: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn already_optimal_start_converges_immediately() {
        let f = |x: &[f64]| (x[0] * x[0], vec![2.0 * x[0]]);
        let result = minimize(f, vec![0.0], 10, 1e-9, 50);
        assert!(result.converged);
        assert_eq!(result.iterations, 0);
        assert_eq!(result.objective_history.len(), 1);
    }
}
