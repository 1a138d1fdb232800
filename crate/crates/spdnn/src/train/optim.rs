//! Unconstrained minimization: limited-memory BFGS with a strong Wolfe line
//! search (cubic interpolation in the zoom phase), and Adam as a first-order
//! alternative.

use crate::{Error, Result};
use std::collections::VecDeque;
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Lbfgs,
    Adam,
}

impl Method {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "lbfgs" => Ok(Method::Lbfgs),
            "adam" => Ok(Method::Adam),
            other => Err(Error::Config(format!("unknown optimizer `{other}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct OptimizerConfig {
    pub method: Method,
    /// Function-evaluation budget (loss+gradient calls).
    pub max_evals: usize,
    /// L-BFGS history length.
    pub memory: usize,
    /// Wolfe sufficient-decrease and curvature constants.
    pub c1: f64,
    pub c2: f64,
    /// Stop when the gradient norm falls below this.
    pub grad_tol: f64,
    /// Optional global-norm gradient clip (exploding-gradient guard).
    pub grad_clip: Option<f64>,
    pub adam_lr: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            method: Method::Lbfgs,
            max_evals: 50_000,
            memory: 10,
            c1: 1e-4,
            c2: 0.9,
            grad_tol: 1e-12,
            grad_clip: None,
            adam_lr: 1e-3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MinimizeStatus {
    GradientConverged,
    BudgetExhausted,
    LineSearchFailed,
}

#[derive(Clone, Copy, Debug)]
pub struct IterRecord {
    pub iter: usize,
    pub loss: f64,
    pub grad_norm: f64,
    pub fevals: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct MinimizeResult {
    pub theta: Vec<f64>,
    pub loss: f64,
    pub status: MinimizeStatus,
    pub fevals: usize,
    pub history: Vec<IterRecord>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes a deterministic loss with exact gradients. Accepted L-BFGS
/// iterates never increase the loss; the best iterate seen is returned even
/// when the line search fails.
pub fn minimize<F>(f: &mut F, theta0: &[f64], cfg: &OptimizerConfig) -> Result<MinimizeResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    match cfg.method {
        Method::Lbfgs => lbfgs(f, theta0, cfg),
        Method::Adam => adam(f, theta0, cfg),
    }
}

fn clip(mut g: Vec<f64>, clip: Option<f64>) -> Vec<f64> {
    if let Some(c) = clip {
        let n = norm(&g);
        if n > c {
            let s = c / n;
            for v in g.iter_mut() {
                *v *= s;
            }
        }
    }
    g
}

fn lbfgs<F>(f: &mut F, theta0: &[f64], cfg: &OptimizerConfig) -> Result<MinimizeResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let start = Instant::now();
    let n = theta0.len();
    let mut fevals = 0usize;
    // Track the best point over ALL evaluations, including line-search
    // trials, so a failed search still returns the lowest loss seen.
    let mut best = (theta0.to_vec(), f64::INFINITY);
    let mut eval = |x: &[f64], fevals: &mut usize| -> Result<(f64, Vec<f64>)> {
        *fevals += 1;
        let (v, g) = f(x)?;
        if v < best.1 {
            best = (x.to_vec(), v);
        }
        Ok((v, clip(g, cfg.grad_clip)))
    };

    let mut x = theta0.to_vec();
    let (mut fx, mut gx) = eval(&x, &mut fevals)?;
    let mut history = vec![IterRecord {
        iter: 0,
        loss: fx,
        grad_norm: norm(&gx),
        fevals,
        seconds: start.elapsed().as_secs_f64(),
    }];
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new(); // (s, y, ρ)
    let mut status = MinimizeStatus::BudgetExhausted;
    let mut iter = 0usize;

    while fevals < cfg.max_evals {
        let gnorm = norm(&gx);
        if gnorm < cfg.grad_tol {
            status = MinimizeStatus::GradientConverged;
            break;
        }
        // Two-loop recursion for the search direction.
        let mut q = gx.clone();
        let mut alphas = Vec::with_capacity(mem.len());
        for (s, y, rho) in mem.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = mem.back() {
            let scale = dot(s, y) / dot(y, y);
            for qi in q.iter_mut() {
                *qi *= scale;
            }
        }
        for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        let p: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut dphi0 = dot(&gx, &p);
        let p = if dphi0 >= 0.0 {
            // Not a descent direction (stale curvature): fall back to steepest
            // descent and drop the history.
            mem.clear();
            dphi0 = -gnorm * gnorm;
            gx.iter().map(|v| -v).collect()
        } else {
            p
        };

        let alpha0 = if mem.is_empty() { (1.0 / gnorm).min(1.0) } else { 1.0 };
        match wolfe_search(&mut eval, &mut fevals, &x, fx, &gx, &p, dphi0, alpha0, cfg)? {
            Some((alpha, fx_new, gx_new)) => {
                let x_new: Vec<f64> =
                    x.iter().zip(&p).map(|(xi, pi)| xi + alpha * pi).collect();
                let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = gx_new.iter().zip(&gx).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &y);
                if sy > 1e-12 * norm(&s) * norm(&y) {
                    if mem.len() == cfg.memory {
                        mem.pop_front();
                    }
                    mem.push_back((s, y, 1.0 / sy));
                }
                x = x_new;
                fx = fx_new;
                gx = gx_new;
                iter += 1;
                history.push(IterRecord {
                    iter,
                    loss: fx,
                    grad_norm: norm(&gx),
                    fevals,
                    seconds: start.elapsed().as_secs_f64(),
                });
                debug_assert_eq!(n, x.len());
            }
            None => {
                status = MinimizeStatus::LineSearchFailed;
                break;
            }
        }
    }
    Ok(MinimizeResult { theta: best.0, loss: best.1, status, fevals, history })
}

/// Strong Wolfe line search (bracket + zoom with cubic interpolation).
/// Returns `(α, f(x+αp), ∇f(x+αp))` or `None` when no acceptable step is
/// found within the evaluation budget.
#[allow(clippy::too_many_arguments)]
fn wolfe_search<E>(
    eval: &mut E,
    fevals: &mut usize,
    x: &[f64],
    f0: f64,
    _g0: &[f64],
    p: &[f64],
    dphi0: f64,
    alpha0: f64,
    cfg: &OptimizerConfig,
) -> Result<Option<(f64, f64, Vec<f64>)>>
where
    E: FnMut(&[f64], &mut usize) -> Result<(f64, Vec<f64>)>,
{
    let phi = |alpha: f64, fevals: &mut usize, eval: &mut E| -> Result<(f64, f64, Vec<f64>)> {
        let xt: Vec<f64> = x.iter().zip(p).map(|(xi, pi)| xi + alpha * pi).collect();
        let (v, g) = eval(&xt, fevals)?;
        let d = dot(&g, p);
        Ok((v, d, g))
    };

    let mut alpha_prev = 0.0;
    let mut f_prev = f0;
    let mut d_prev = dphi0;
    let mut alpha = alpha0;
    let max_expand = 20;
    for i in 0..max_expand {
        if *fevals >= cfg.max_evals {
            return Ok(None);
        }
        let (fi, di, gi) = phi(alpha, fevals, eval)?;
        if !fi.is_finite() || fi > f0 + cfg.c1 * alpha * dphi0 || (i > 0 && fi >= f_prev) {
            return zoom(eval, fevals, x, f0, dphi0, p, alpha_prev, f_prev, d_prev, alpha, cfg);
        }
        if di.abs() <= -cfg.c2 * dphi0 {
            return Ok(Some((alpha, fi, gi)));
        }
        if di >= 0.0 {
            return zoom(eval, fevals, x, f0, dphi0, p, alpha, fi, di, alpha_prev, cfg);
        }
        alpha_prev = alpha;
        f_prev = fi;
        d_prev = di;
        alpha *= 2.5;
    }
    Ok(None)
}

/// Zoom phase: shrink `[lo, hi]` around an acceptable step, interpolating
/// cubically from the endpoint values and slopes.
#[allow(clippy::too_many_arguments)]
fn zoom<E>(
    eval: &mut E,
    fevals: &mut usize,
    x: &[f64],
    f0: f64,
    dphi0: f64,
    p: &[f64],
    mut lo: f64,
    mut f_lo: f64,
    mut d_lo: f64,
    mut hi: f64,
    cfg: &OptimizerConfig,
) -> Result<Option<(f64, f64, Vec<f64>)>>
where
    E: FnMut(&[f64], &mut usize) -> Result<(f64, Vec<f64>)>,
{
    let phi = |alpha: f64, fevals: &mut usize, eval: &mut E| -> Result<(f64, f64, Vec<f64>)> {
        let xt: Vec<f64> = x.iter().zip(p).map(|(xi, pi)| xi + alpha * pi).collect();
        let (v, g) = eval(&xt, fevals)?;
        let d = dot(&g, p);
        Ok((v, d, g))
    };
    // Evaluate the hi endpoint for interpolation.
    let (mut f_hi, mut d_hi, _) = phi(hi, fevals, eval)?;
    for _ in 0..30 {
        if *fevals >= cfg.max_evals {
            return Ok(None);
        }
        // Cubic interpolation; bisection fallback keeps the step interior.
        let alpha = {
            let d1 = d_lo + d_hi - 3.0 * (f_lo - f_hi) / (lo - hi);
            let disc = d1 * d1 - d_lo * d_hi;
            let mut a = if disc >= 0.0 && (hi - lo).abs() > 0.0 {
                let d2 = disc.sqrt() * (hi - lo).signum();
                hi - (hi - lo) * (d_hi + d2 - d1) / (d_hi - d_lo + 2.0 * d2)
            } else {
                0.5 * (lo + hi)
            };
            let (a_min, a_max) = if lo < hi { (lo, hi) } else { (hi, lo) };
            let width = a_max - a_min;
            if !a.is_finite() || a <= a_min + 0.1 * width || a >= a_max - 0.1 * width {
                a = 0.5 * (lo + hi);
            }
            a
        };
        let (fi, di, gi) = phi(alpha, fevals, eval)?;
        if !fi.is_finite() || fi > f0 + cfg.c1 * alpha * dphi0 || fi >= f_lo {
            hi = alpha;
            f_hi = fi;
            d_hi = di;
        } else {
            if di.abs() <= -cfg.c2 * dphi0 {
                return Ok(Some((alpha, fi, gi)));
            }
            if di * (hi - lo) >= 0.0 {
                hi = lo;
                f_hi = f_lo;
                d_hi = d_lo;
            }
            lo = alpha;
            f_lo = fi;
            d_lo = di;
        }
        if (hi - lo).abs() * norm(p) < 1e-16 * (1.0 + norm(x)) {
            break;
        }
    }
    Ok(None)
}

fn adam<F>(f: &mut F, theta0: &[f64], cfg: &OptimizerConfig) -> Result<MinimizeResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let start = Instant::now();
    let (b1, b2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let mut x = theta0.to_vec();
    let mut m = vec![0.0; x.len()];
    let mut v = vec![0.0; x.len()];
    let mut fevals = 0usize;
    let mut history = Vec::new();
    let mut best = (x.clone(), f64::INFINITY);
    let mut status = MinimizeStatus::BudgetExhausted;
    let mut t = 0usize;
    while fevals < cfg.max_evals {
        let (fx, g) = f(&x)?;
        fevals += 1;
        let g = clip(g, cfg.grad_clip);
        let gnorm = norm(&g);
        if fx < best.1 {
            best = (x.clone(), fx);
        }
        history.push(IterRecord {
            iter: t,
            loss: fx,
            grad_norm: gnorm,
            fevals,
            seconds: start.elapsed().as_secs_f64(),
        });
        if gnorm < cfg.grad_tol {
            status = MinimizeStatus::GradientConverged;
            break;
        }
        t += 1;
        let bc1 = 1.0 - b1.powi(t as i32);
        let bc2 = 1.0 - b2.powi(t as i32);
        for i in 0..x.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            x[i] -= cfg.adam_lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + eps);
        }
    }
    Ok(MinimizeResult { theta: best.0, loss: best.1, status, fevals, history })
}

/// Writes the iteration history as `iter,loss,gradnorm,fevals,seconds`.
pub fn write_training_log(path: &std::path::Path, history: &[IterRecord]) -> Result<()> {
    let mut s = String::from("iter,loss,gradnorm,fevals,seconds\n");
    for r in history {
        s.push_str(&format!("{},{},{},{},{}\n", r.iter, r.loss, r.grad_norm, r.fevals, r.seconds));
    }
    std::fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl_converges_fast() {
        let a = [1.0, -2.0, 0.5, 3.0, -1.5];
        let mut f = |x: &[f64]| -> crate::Result<(f64, Vec<f64>)> {
            let v: f64 = x.iter().zip(&a).map(|(xi, ai)| (xi - ai) * (xi - ai)).sum();
            let g: Vec<f64> = x.iter().zip(&a).map(|(xi, ai)| 2.0 * (xi - ai)).collect();
            Ok((v, g))
        };
        let cfg = OptimizerConfig { max_evals: 200, ..Default::default() };
        let res = minimize(&mut f, &[0.0; 5], &cfg).unwrap();
        for (xi, ai) in res.theta.iter().zip(&a) {
            assert!((xi - ai).abs() < 1e-8, "{xi} vs {ai}");
        }
        // ≤ 2n iterations (records include the initial point).
        assert!(res.history.len() <= 11, "{} iterations", res.history.len());
    }

    #[test]
    fn rosenbrock_reaches_floor() {
        let mut f = |x: &[f64]| -> crate::Result<(f64, Vec<f64>)> {
            let (a, b) = (1.0, 100.0);
            let v = (a - x[0]).powi(2) + b * (x[1] - x[0] * x[0]).powi(2);
            let g = vec![
                -2.0 * (a - x[0]) - 4.0 * b * (x[1] - x[0] * x[0]) * x[0],
                2.0 * b * (x[1] - x[0] * x[0]),
            ];
            Ok((v, g))
        };
        let cfg = OptimizerConfig { max_evals: 2000, ..Default::default() };
        let res = minimize(&mut f, &[-1.2, 1.0], &cfg).unwrap();
        assert!(res.loss < 1e-8, "loss {}", res.loss);
    }

    #[test]
    fn zero_gradient_stops_immediately() {
        let mut f = |x: &[f64]| -> crate::Result<(f64, Vec<f64>)> {
            Ok((7.0, vec![0.0; x.len()]))
        };
        let res = minimize(&mut f, &[1.0, 2.0], &Default::default()).unwrap();
        assert_eq!(res.status, MinimizeStatus::GradientConverged);
        assert_eq!(res.fevals, 1);
        assert_eq!(res.theta, vec![1.0, 2.0]);
    }

    #[test]
    fn accepted_iterates_never_increase() {
        let mut f = |x: &[f64]| -> crate::Result<(f64, Vec<f64>)> {
            let v = x[0].powi(4) + (x[0] - 1.0).powi(2) + (x[1] + 0.5).powi(2) * 3.0
                + (x[0] * x[1]).sin();
            let g = vec![
                4.0 * x[0].powi(3) + 2.0 * (x[0] - 1.0) + x[1] * (x[0] * x[1]).cos(),
                6.0 * (x[1] + 0.5) + x[0] * (x[0] * x[1]).cos(),
            ];
            Ok((v, g))
        };
        let cfg = OptimizerConfig { max_evals: 500, ..Default::default() };
        let res = minimize(&mut f, &[2.0, -3.0], &cfg).unwrap();
        for w in res.history.windows(2) {
            assert!(w[1].loss <= w[0].loss + 1e-15, "loss increased: {:?}", w);
        }
    }

    #[test]
    fn unbounded_descent_reports_line_search_failure() {
        // f = xᵀ1 is linear: the strong Wolfe curvature condition can never
        // hold, so the search must give up and return the best iterate.
        let mut f = |x: &[f64]| -> crate::Result<(f64, Vec<f64>)> {
            Ok((x.iter().sum(), vec![1.0; x.len()]))
        };
        let cfg = OptimizerConfig { max_evals: 300, ..Default::default() };
        let res = minimize(&mut f, &[0.0, 0.0], &cfg).unwrap();
        assert_eq!(res.status, MinimizeStatus::LineSearchFailed);
        assert!(res.loss < 0.0);
    }

    #[test]
    fn adam_decreases_moving_average() {
        let mut f = |x: &[f64]| -> crate::Result<(f64, Vec<f64>)> {
            let v: f64 = x.iter().map(|xi| xi * xi).sum();
            Ok((v, x.iter().map(|xi| 2.0 * xi).collect()))
        };
        let cfg = OptimizerConfig {
            method: Method::Adam,
            max_evals: 400,
            adam_lr: 0.05,
            ..Default::default()
        };
        let res = minimize(&mut f, &[3.0, -2.0], &cfg).unwrap();
        let avg = |r: &[IterRecord]| r.iter().map(|x| x.loss).sum::<f64>() / r.len() as f64;
        let first = avg(&res.history[..100]);
        let last = avg(&res.history[res.history.len() - 100..]);
        assert!(last < first * 0.5, "{first} -> {last}");
    }

    #[test]
    fn gradient_clipping_bounds_step() {
        let mut seen_norm = f64::INFINITY;
        {
            let mut f = |x: &[f64]| -> crate::Result<(f64, Vec<f64>)> {
                Ok((x[0] * x[0] * 1e8, vec![2e8 * x[0]]))
            };
            let cfg = OptimizerConfig {
                method: Method::Adam,
                max_evals: 5,
                grad_clip: Some(1.0),
                adam_lr: 0.1,
                ..Default::default()
            };
            let res = minimize(&mut f, &[1.0], &cfg).unwrap();
            for r in &res.history {
                seen_norm = seen_norm.min(r.grad_norm);
            }
            // History records the clipped gradient norms.
            assert!(res.history.iter().all(|r| r.grad_norm <= 1.0 + 1e-12));
        }
        assert!(seen_norm.is_finite());
    }

    #[test]
    fn training_log_roundtrip_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        let hist = vec![IterRecord { iter: 0, loss: 1.5, grad_norm: 0.3, fevals: 1, seconds: 0.01 }];
        write_training_log(&path, &hist).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("iter,loss,gradnorm,fevals,seconds\n"));
        assert!(text.contains("0,1.5,0.3,1,"));
    }
}
