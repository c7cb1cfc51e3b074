//! Line searches: strong Wolfe (bracketing + zoom with safeguarded cubic
//! interpolation) for L-BFGS, and Armijo backtracking on the composite
//! objective for the proximal steps.

use super::lbfgs::dot;
use super::SmoothFn;

#[derive(Debug, Clone, Copy)]
pub struct WolfeParams {
    pub c1: f64,
    pub c2: f64,
    pub max_evals: usize,
    pub max_step: f64,
}

impl Default for WolfeParams {
    fn default() -> Self {
        Self {
            c1: 1e-4,
            c2: 0.9,
            max_evals: 40,
            max_step: 1e10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LineSearchResult {
    pub step: f64,
    pub x: Vec<f64>,
    pub value: f64,
    pub grad: Vec<f64>,
}

struct Probe {
    step: f64,
    value: f64,
    slope: f64,
    x: Vec<f64>,
    grad: Vec<f64>,
}

fn probe<F: SmoothFn>(f: &F, x: &[f64], dir: &[f64], step: f64) -> Probe {
    let xs: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a + step * d).collect();
    let mut grad = vec![0.0; x.len()];
    let value = f.value_grad(&xs, &mut grad);
    let slope = if value.is_finite() {
        dot(&grad, dir)
    } else {
        f64::NAN
    };
    Probe {
        step,
        value,
        slope,
        x: xs,
        grad,
    }
}

/// Minimizer of the cubic through `(a, fa, ga)` and `(b, fb, gb)`, clamped to
/// the interior of the bracket; falls back to bisection.
fn cubic_step(a: f64, fa: f64, ga: f64, b: f64, fb: f64, gb: f64) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let mid = 0.5 * (a + b);
    if !(fb.is_finite() && gb.is_finite()) {
        return mid;
    }
    let d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - ga * gb;
    if disc < 0.0 {
        return mid;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (gb + d2 - d1) / (gb - ga + 2.0 * d2);
    let margin = 0.1 * (hi - lo);
    if !t.is_finite() || t < lo + margin || t > hi - margin {
        mid
    } else {
        t
    }
}

/// Strong-Wolfe line search along `dir` from `x` (value `fx`, directional
/// derivative `slope < 0`). Returns `None` when no acceptable step is found
/// within the evaluation budget.
pub fn strong_wolfe<F: SmoothFn>(
    f: &F,
    x: &[f64],
    fx: f64,
    slope: f64,
    dir: &[f64],
    step0: f64,
    p: &WolfeParams,
) -> Option<LineSearchResult> {
    let accept = |pr: Probe| LineSearchResult {
        step: pr.step,
        x: pr.x,
        value: pr.value,
        grad: pr.grad,
    };
    let mut prev_step = 0.0;
    let mut prev_value = fx;
    let mut prev_slope = slope;
    let mut step = step0;
    let mut evals = 0;
    let mut best: Option<Probe> = None;

    loop {
        let cur = probe(f, x, dir, step);
        evals += 1;
        let sufficient = cur.value.is_finite() && cur.value <= fx + p.c1 * step * slope;
        if !sufficient || (evals > 1 && cur.value >= prev_value) {
            return zoom(
                f, x, fx, slope, dir, p, prev_step, prev_value, prev_slope, cur, evals, best,
            );
        }
        if cur.slope.abs() <= -p.c2 * slope {
            return Some(accept(cur));
        }
        if cur.slope >= 0.0 {
            let (hi_step, hi_value, hi_slope) = (prev_step, prev_value, prev_slope);
            let lo = cur;
            return zoom_from(
                f, x, fx, slope, dir, p, lo, hi_step, hi_value, hi_slope, evals,
            );
        }
        if evals >= p.max_evals || step >= p.max_step {
            return Some(accept(cur));
        }
        prev_step = step;
        prev_value = cur.value;
        prev_slope = cur.slope;
        step = (2.0 * step).min(p.max_step);
        best = Some(cur);
    }
}

#[allow(clippy::too_many_arguments)]
fn zoom<F: SmoothFn>(
    f: &F,
    x: &[f64],
    fx: f64,
    slope: f64,
    dir: &[f64],
    p: &WolfeParams,
    lo_step: f64,
    lo_value: f64,
    lo_slope: f64,
    hi: Probe,
    evals: usize,
    best: Option<Probe>,
) -> Option<LineSearchResult> {
    // `lo` is the best point with sufficient decrease (possibly step 0)
    let lo = match best {
        Some(b) if b.step == lo_step => b,
        _ => Probe {
            step: lo_step,
            value: lo_value,
            slope: lo_slope,
            x: x.to_vec(),
            grad: Vec::new(),
        },
    };
    zoom_from(
        f, x, fx, slope, dir, p, lo, hi.step, hi.value, hi.slope, evals,
    )
}

#[allow(clippy::too_many_arguments)]
fn zoom_from<F: SmoothFn>(
    f: &F,
    x: &[f64],
    fx: f64,
    slope: f64,
    dir: &[f64],
    p: &WolfeParams,
    mut lo: Probe,
    mut hi_step: f64,
    mut hi_value: f64,
    mut hi_slope: f64,
    mut evals: usize,
) -> Option<LineSearchResult> {
    while evals < p.max_evals {
        let step = cubic_step(lo.step, lo.value, lo.slope, hi_step, hi_value, hi_slope);
        if (step - lo.step).abs() <= 1e-16 * lo.step.abs().max(1e-300) {
            break;
        }
        let cur = probe(f, x, dir, step);
        evals += 1;
        let sufficient = cur.value.is_finite() && cur.value <= fx + p.c1 * step * slope;
        if !sufficient || cur.value >= lo.value {
            hi_step = cur.step;
            hi_value = cur.value;
            hi_slope = cur.slope;
        } else {
            if cur.slope.abs() <= -p.c2 * slope {
                return Some(LineSearchResult {
                    step: cur.step,
                    x: cur.x,
                    value: cur.value,
                    grad: cur.grad,
                });
            }
            if cur.slope * (hi_step - lo.step) >= 0.0 {
                hi_step = lo.step;
                hi_value = lo.value;
                hi_slope = lo.slope;
            }
            lo = cur;
        }
    }
    // budget exhausted: settle for sufficient decrease if we have it
    if lo.step > 0.0 && !lo.grad.is_empty() && lo.value < fx {
        return Some(LineSearchResult {
            step: lo.step,
            x: lo.x,
            value: lo.value,
            grad: lo.grad,
        });
    }
    None
}

#[derive(Debug, Clone)]
pub struct ArmijoResult {
    pub step: f64,
    pub x: Vec<f64>,
    pub smooth_value: f64,
    pub composite_value: f64,
    pub grad: Vec<f64>,
    pub evals: usize,
}

/// Backtracking on `F = f + λ1 ‖·‖₁` until
/// `F(x + t d) <= F(x) + σ t Δ`, where `Δ = gᵀd + λ1 (‖x+d‖₁ − ‖x‖₁)`.
#[allow(clippy::too_many_arguments)]
pub fn armijo_composite<F: SmoothFn>(
    f: &F,
    x: &[f64],
    composite: f64,
    decrease: f64,
    dir: &[f64],
    lambda1: f64,
    sigma: f64,
    shrink: f64,
    max_evals: usize,
) -> Option<ArmijoResult> {
    let mut step = 1.0;
    let mut grad = vec![0.0; x.len()];
    for evals in 1..=max_evals {
        let xs: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a + step * d).collect();
        let smooth = f.value_grad(&xs, &mut grad);
        let total = smooth + lambda1 * xs.iter().map(|v| v.abs()).sum::<f64>();
        if total.is_finite() && total <= composite + sigma * step * decrease {
            return Some(ArmijoResult {
                step,
                x: xs,
                smooth_value: smooth,
                composite_value: total,
                grad,
                evals,
            });
        }
        step *= shrink;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosenbrock;

    impl SmoothFn for Rosenbrock {
        fn value_grad(&self, x: &[f64], g: &mut [f64]) -> f64 {
            let (a, b) = (x[0], x[1]);
            g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
            g[1] = 200.0 * (b - a * a);
            (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
        }
    }

    #[test]
    fn wolfe_conditions_hold() {
        let f = Rosenbrock;
        let x = [-1.2, 1.0];
        let mut g = [0.0; 2];
        let fx = f.value_grad(&x, &mut g);
        let dir = [-g[0], -g[1]];
        let slope = dot(&g, &dir);
        let p = WolfeParams::default();
        for step0 in [1e-4, 1e-2, 1.0] {
            let r = strong_wolfe(&f, &x, fx, slope, &dir, step0, &p).unwrap();
            assert!(r.value <= fx + p.c1 * r.step * slope);
            assert!(dot(&r.grad, &dir).abs() <= p.c2 * slope.abs());
        }
    }

    #[test]
    fn armijo_backtracks_to_decrease() {
        let f = Rosenbrock;
        let x = [0.0, 0.0];
        let mut g = [0.0; 2];
        let fx = f.value_grad(&x, &mut g);
        let dir = [-g[0] * 10.0, -g[1] * 10.0];
        let dec = dot(&g, &dir);
        let r = armijo_composite(&f, &x, fx, dec, &dir, 0.0, 1e-4, 0.5, 60).unwrap();
        assert!(r.step < 1.0);
        assert!(r.composite_value < fx);
    }
}
