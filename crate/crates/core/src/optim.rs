//! BFGS quasi-Newton minimization with a strong-Wolfe line search.
//!
//! The line search brackets a step and then zooms with safeguarded cubic
//! interpolation. The dense inverse-Hessian approximation is updated only
//! when the curvature condition `sᵀy > 1e−10 ‖s‖‖y‖` holds.
//!
//! An optional validation callable turns on early stopping: it is evaluated
//! after every accepted iteration and the run stops once its value has not
//! improved for `patience` consecutive iterations. The point with the best
//! validation value is returned.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimOptions {
    /// Stop when the Euclidean gradient norm falls to this value.
    pub gtol: f64,
    /// Stop when an accepted step changes the objective by less than
    /// `ftol · max(1, |f|)`. Zero disables the test.
    pub ftol: f64,
    pub max_iter: usize,
    /// Validation early-stop window, in accepted iterations.
    pub patience: usize,
    pub ls_c1: f64,
    pub ls_c2: f64,
    pub ls_max_trials: usize,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            gtol: 1e-6,
            ftol: 1e-14,
            max_iter: 500,
            patience: 10,
            ls_c1: 1e-4,
            ls_c2: 0.9,
            ls_max_trials: 25,
        }
    }
}

impl OptimOptions {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.ls_c1 && self.ls_c1 < self.ls_c2 && self.ls_c2 < 1.0) {
            return Err(Error::domain(format!(
                "Wolfe constants must satisfy 0 < c1 < c2 < 1, got c1={} c2={}",
                self.ls_c1, self.ls_c2
            )));
        }
        if self.patience == 0 {
            return Err(Error::domain("patience must be at least 1"));
        }
        if !(self.gtol >= 0.0) || !(self.ftol >= 0.0) {
            return Err(Error::domain("tolerances must be non-negative"));
        }
        if self.ls_max_trials == 0 {
            return Err(Error::domain("line search needs at least one trial"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    GradientTolerance,
    FunctionTolerance,
    MaxIterations,
    LineSearchFailed,
    EarlyStopped,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub objective: f64,
    pub grad_norm: f64,
    pub step: f64,
    pub validation: Option<f64>,
}

/// Per-iteration history of a run. Entry 0 describes the starting point.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimTrace {
    pub records: Vec<IterRecord>,
    pub termination: Option<Termination>,
    pub evaluations: usize,
}

impl OptimTrace {
    /// Number of accepted iterations.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad: Vec<f64>,
    pub trace: OptimTrace,
}

impl Minimum {
    pub fn grad_norm(&self) -> f64 {
        norm(&self.grad)
    }

    pub fn termination(&self) -> Termination {
        self.trace.termination.expect("terminated run")
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f`, which returns the objective and writes the gradient into
/// its second argument.
pub fn minimize<F>(f: F, x0: &[f64], opts: &OptimOptions) -> Result<Minimum>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    run(f, x0, opts, None::<fn(&[f64]) -> f64>)
}

/// [`minimize`] with validation-based early stopping.
pub fn minimize_with_validation<F, V>(
    f: F,
    x0: &[f64],
    opts: &OptimOptions,
    validation: V,
) -> Result<Minimum>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
    V: FnMut(&[f64]) -> f64,
{
    run(f, x0, opts, Some(validation))
}

struct Point {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

struct Probe<'a, F> {
    f: &'a mut F,
    evaluations: &'a mut usize,
    origin: &'a [f64],
    dir: &'a [f64],
}

impl<F: FnMut(&[f64], &mut [f64]) -> f64> Probe<'_, F> {
    fn at(&mut self, alpha: f64) -> (f64, f64, Point) {
        let x: Vec<f64> = self
            .origin
            .iter()
            .zip(self.dir)
            .map(|(o, d)| o + alpha * d)
            .collect();
        let mut g = vec![0.0; x.len()];
        let fx = (self.f)(&x, &mut g);
        *self.evaluations += 1;
        let finite = fx.is_finite() && g.iter().all(|v| v.is_finite());
        // A non-finite probe is treated as an overshoot.
        let (phi, dphi) = if finite {
            (fx, dot(&g, self.dir))
        } else {
            (f64::INFINITY, f64::NAN)
        };
        (phi, dphi, Point { x, f: phi, g })
    }
}

/// Minimizer of the cubic through `(a, fa, da)` and `(b, fb, db)`, or `None`
/// when it does not exist.
fn cubic_min(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> Option<f64> {
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if !disc.is_finite() || disc < 0.0 {
        return None;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let denom = db - da + 2.0 * d2;
    if denom == 0.0 {
        return None;
    }
    let t = b - (b - a) * (db + d2 - d1) / denom;
    t.is_finite().then_some(t)
}

struct Bracket {
    alpha: f64,
    phi: f64,
    dphi: f64,
}

/// Strong-Wolfe line search. Returns the accepted step and point, or `None`
/// when no acceptable step was found within the trial budget.
fn line_search<F: FnMut(&[f64], &mut [f64]) -> f64>(
    probe: &mut Probe<'_, F>,
    phi0: f64,
    dphi0: f64,
    alpha_init: f64,
    opts: &OptimOptions,
) -> Option<(f64, Point)> {
    let (c1, c2) = (opts.ls_c1, opts.ls_c2);
    let sufficient = |alpha: f64, phi: f64| phi <= phi0 + c1 * alpha * dphi0;
    let curvature = |dphi: f64| dphi.abs() <= -c2 * dphi0;

    let mut trials = 0;
    let mut prev = Bracket { alpha: 0.0, phi: phi0, dphi: dphi0 };
    let mut alpha = alpha_init;
    let (mut lo, mut hi);
    loop {
        if trials >= opts.ls_max_trials {
            return None;
        }
        trials += 1;
        let (phi, dphi, pt) = probe.at(alpha);
        let cur = Bracket { alpha, phi, dphi };
        if !sufficient(alpha, phi) || (trials > 1 && phi >= prev.phi) {
            lo = prev;
            hi = cur;
            break;
        }
        if curvature(dphi) {
            return Some((alpha, pt));
        }
        if dphi >= 0.0 {
            lo = cur;
            hi = prev;
            break;
        }
        // still descending: extrapolate
        let guess = cubic_min(prev.alpha, prev.phi, prev.dphi, alpha, phi, dphi);
        let next = match guess {
            Some(t) if t > alpha => t.clamp(2.0 * alpha, 10.0 * alpha),
            _ => 4.0 * alpha,
        };
        prev = cur;
        alpha = next;
    }

    // zoom: lo satisfies sufficient decrease and has the lowest value seen
    while trials < opts.ls_max_trials {
        trials += 1;
        let (a, b) = (lo.alpha, hi.alpha);
        let width = b - a;
        let mut t = if hi.phi.is_finite() && hi.dphi.is_finite() {
            cubic_min(a, lo.phi, lo.dphi, b, hi.phi, hi.dphi).unwrap_or(a + 0.5 * width)
        } else {
            a + 0.5 * width
        };
        let (min_t, max_t) = if a < b { (a, b) } else { (b, a) };
        let margin = 0.1 * width.abs();
        if !(t > min_t + margin && t < max_t - margin) {
            t = a + 0.5 * width;
        }
        if t == a || t == b {
            return None;
        }
        let (phi, dphi, pt) = probe.at(t);
        let cur = Bracket { alpha: t, phi, dphi };
        if !sufficient(t, phi) || phi >= lo.phi {
            hi = cur;
        } else {
            if curvature(dphi) {
                return Some((t, pt));
            }
            if dphi * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
    None
}

fn run<F, V>(mut f: F, x0: &[f64], opts: &OptimOptions, mut validation: Option<V>) -> Result<Minimum>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
    V: FnMut(&[f64]) -> f64,
{
    opts.validate()?;
    let n = x0.len();
    let mut trace = OptimTrace::default();

    let mut g0 = vec![0.0; n];
    let f0 = f(x0, &mut g0);
    trace.evaluations = 1;
    if !f0.is_finite() || g0.iter().any(|v| !v.is_finite()) {
        trace.termination = None;
        return Err(Error::Optim {
            reason: format!("non-finite objective or gradient at the starting point (f = {f0})"),
            trace: Box::new(trace),
        });
    }
    let mut cur = Point { x: x0.to_vec(), f: f0, g: g0 };

    let mut best_val = validation.as_mut().map(|v| v(&cur.x));
    let mut best_point: Option<(Vec<f64>, f64, Vec<f64>)> = None;
    let mut stall = 0usize;

    trace.records.push(IterRecord {
        objective: cur.f,
        grad_norm: norm(&cur.g),
        step: 0.0,
        validation: best_val,
    });

    let mut h = DMatrix::<f64>::identity(n, n);
    let mut h_is_identity = true;
    let mut scaled = false;

    let termination = 'outer: loop {
        if norm(&cur.g) <= opts.gtol {
            break Termination::GradientTolerance;
        }
        if trace.iterations() >= opts.max_iter {
            break Termination::MaxIterations;
        }

        // search direction, resetting to steepest descent if not a descent direction
        let gv = DVector::from_column_slice(&cur.g);
        let mut dir: Vec<f64> = (-(&h * &gv)).iter().copied().collect();
        let mut dphi0 = dot(&dir, &cur.g);
        if !(dphi0 < 0.0) {
            h = DMatrix::identity(n, n);
            h_is_identity = true;
            scaled = false;
            dir = cur.g.iter().map(|v| -v).collect();
            dphi0 = -dot(&cur.g, &cur.g);
        }

        let (alpha, next) = loop {
            let alpha_init = if h_is_identity && !scaled {
                1.0f64.min(1.0 / norm(&cur.g))
            } else {
                1.0
            };
            let mut probe = Probe {
                f: &mut f,
                evaluations: &mut trace.evaluations,
                origin: &cur.x,
                dir: &dir,
            };
            match line_search(&mut probe, cur.f, dphi0, alpha_init, opts) {
                Some(found) => break found,
                None if !h_is_identity => {
                    // retry once along steepest descent before giving up
                    h = DMatrix::identity(n, n);
                    h_is_identity = true;
                    scaled = false;
                    dir = cur.g.iter().map(|v| -v).collect();
                    dphi0 = -dot(&cur.g, &cur.g);
                }
                None => break 'outer Termination::LineSearchFailed,
            }
        };

        let s: Vec<f64> = next.x.iter().zip(&cur.x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.g.iter().zip(&cur.g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * norm(&s) * norm(&y) {
            let sv = DVector::from_vec(s);
            let yv = DVector::from_vec(y);
            if !scaled {
                h = DMatrix::identity(n, n) * (sy / yv.dot(&yv));
                scaled = true;
            }
            let rho = 1.0 / sy;
            let hy = &h * &yv;
            let yhy = yv.dot(&hy);
            // H⁺ = H − ρ(H y sᵀ + s yᵀ H) + (ρ² yᵀHy + ρ) s sᵀ
            h -= rho * (&hy * sv.transpose() + &sv * hy.transpose());
            h += (rho * rho * yhy + rho) * (&sv * sv.transpose());
            h_is_identity = false;
        }

        let f_prev = cur.f;
        cur = next;

        let val = validation.as_mut().map(|v| v(&cur.x));
        trace.records.push(IterRecord {
            objective: cur.f,
            grad_norm: norm(&cur.g),
            step: alpha,
            validation: val,
        });

        if let (Some(v), Some(best)) = (val, best_val.as_mut()) {
            if v < *best {
                *best = v;
                best_point = Some((cur.x.clone(), cur.f, cur.g.clone()));
                stall = 0;
            } else {
                stall += 1;
                if stall >= opts.patience {
                    break Termination::EarlyStopped;
                }
            }
        }

        if (f_prev - cur.f).abs() <= opts.ftol * cur.f.abs().max(1.0) {
            break Termination::FunctionTolerance;
        }
    };
    trace.termination = Some(termination);

    let (x, value, grad) = match (validation.is_some(), best_point) {
        (true, Some(best)) => best,
        (true, None) => (x0.to_vec(), f0, trace_start_grad(&mut f, x0)),
        (false, _) => (cur.x, cur.f, cur.g),
    };
    Ok(Minimum { x, value, grad, trace })
}

fn trace_start_grad<F: FnMut(&[f64], &mut [f64]) -> f64>(f: &mut F, x0: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x0.len()];
    f(x0, &mut g);
    g
}

/// Outcome of [`multi_restart`].
#[derive(Clone, Debug)]
pub struct Restarts<T> {
    pub best: T,
    pub best_cost: f64,
    pub best_index: usize,
    /// Final cost of every restart in seed order; `None` for failed ones.
    pub costs: Vec<Option<f64>>,
}

/// Runs `fit` once per seed (concurrently) and keeps the candidate with the
/// smallest final cost. Ties go to the earliest seed.
pub fn multi_restart<T, F>(fit: F, seeds: &[u64]) -> Result<Restarts<T>>
where
    T: Send,
    F: Fn(u64) -> Result<(T, f64)> + Sync,
{
    if seeds.is_empty() {
        return Err(Error::domain("multi_restart needs at least one seed"));
    }
    let outcomes: Vec<Result<(T, f64)>> = seeds.par_iter().map(|&s| fit(s)).collect();
    let costs: Vec<Option<f64>> = outcomes
        .iter()
        .map(|o| o.as_ref().ok().map(|(_, c)| *c).filter(|c| !c.is_nan()))
        .collect();
    let best_index = costs
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|c| (i, c)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i);
    let Some(best_index) = best_index else {
        let msgs: Vec<String> = outcomes
            .into_iter()
            .zip(seeds)
            .map(|(o, s)| match o {
                Err(e) => format!("seed {s}: {e}"),
                Ok(_) => format!("seed {s}: NaN cost"),
            })
            .collect();
        return Err(Error::Numeric(format!("all restarts failed: {}", msgs.join("; "))));
    };
    let (best, best_cost) = outcomes
        .into_iter()
        .nth(best_index)
        .expect("index in range")
        .expect("successful restart");
    Ok(Restarts { best, best_cost, best_index, costs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bowl(a: Vec<f64>) -> impl FnMut(&[f64], &mut [f64]) -> f64 {
        move |x, g| {
            let mut f = 0.0;
            for i in 0..x.len() {
                let d = x[i] - a[i];
                g[i] = 2.0 * d;
                f += d * d;
            }
            f
        }
    }

    fn rosenbrock(x: &[f64], g: &mut [f64]) -> f64 {
        let (a, b) = (x[0], x[1]);
        g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
        g[1] = 200.0 * (b - a * a);
        (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
    }

    #[test]
    fn quadratic_bowl() {
        let a = vec![1.0, -2.0, 3.5, 0.25];
        let opts = OptimOptions { gtol: 1e-10, ..Default::default() };
        let m = minimize(bowl(a.clone()), &[10.0, 10.0, -4.0, 0.0], &opts).unwrap();
        for (x, t) in m.x.iter().zip(&a) {
            assert!((x - t).abs() < 1e-8);
        }
        // one scaled steepest-descent warmup, then exact
        assert!(m.trace.iterations() <= 4, "{} iterations", m.trace.iterations());
    }

    #[test]
    fn rosenbrock_from_classic_start() {
        let opts = OptimOptions { gtol: 1e-10, ftol: 0.0, max_iter: 1000, ..Default::default() };
        let m = minimize(rosenbrock, &[-1.2, 1.0], &opts).unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6, "{:?}", m.x);
    }

    #[test]
    fn accepted_steps_never_increase_objective() {
        let m = minimize(rosenbrock, &[-1.2, 1.0], &OptimOptions::default()).unwrap();
        for w in m.trace.records.windows(2) {
            assert!(w[1].objective <= w[0].objective);
        }
    }

    #[test]
    fn nonfinite_start_is_reported() {
        let err = minimize(|_x: &[f64], _g: &mut [f64]| f64::NAN, &[0.0], &OptimOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::Optim { .. }));
    }

    #[test]
    fn line_search_backs_off_from_nonfinite_region() {
        // (x − 1)² that is undefined beyond x = 1.5
        let mut f = |x: &[f64], g: &mut [f64]| {
            if x[0] > 1.5 {
                return f64::NAN;
            }
            g[0] = 2.0 * (x[0] - 1.0);
            (x[0] - 1.0).powi(2)
        };
        let mut evaluations = 0;
        let (origin, dir) = ([0.0], [1.0]);
        let mut probe = Probe { f: &mut f, evaluations: &mut evaluations, origin: &origin, dir: &dir };
        let opts = OptimOptions::default();
        let (alpha, pt) = line_search(&mut probe, 1.0, -2.0, 10.0, &opts).expect("step found");
        assert!(alpha <= 1.5 && pt.f.is_finite());
        assert!(pt.f <= 1.0 + opts.ls_c1 * alpha * -2.0);
        assert!((2.0 * (alpha - 1.0)).abs() <= opts.ls_c2 * 2.0);
    }

    #[test]
    fn invalid_options_rejected() {
        let bad = OptimOptions { ls_c1: 0.9, ls_c2: 0.1, ..Default::default() };
        assert!(minimize(bowl(vec![0.0]), &[1.0], &bad).is_err());
        let bad = OptimOptions { patience: 0, ..Default::default() };
        assert!(minimize(bowl(vec![0.0]), &[1.0], &bad).is_err());
    }

    #[test]
    fn validation_early_stop_returns_best_validation_point() {
        // training pulls toward 2, validation prefers 1
        let opts = OptimOptions { patience: 3, gtol: 0.0, ftol: 0.0, max_iter: 200, ..Default::default() };
        let f = |x: &[f64], g: &mut [f64]| {
            // slow, curved descent so many iterations happen
            let d = x[0] - 2.0;
            g[0] = 4.0 * d.powi(3);
            d.powi(4)
        };
        let m = minimize_with_validation(f, &[-3.0], &opts, |x| (x[0] - 1.0).powi(2)).unwrap();
        assert_eq!(m.termination(), Termination::EarlyStopped);
        let vals: Vec<f64> = m.trace.records.iter().filter_map(|r| r.validation).collect();
        let best = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(((m.x[0] - 1.0).powi(2) - best).abs() < 1e-15);
        // the last `patience` validations did not improve on the best
        let tail = &vals[vals.len() - 3..];
        assert!(tail.iter().all(|v| *v >= best));
    }

    #[test]
    fn multi_restart_single_seed_equals_fit() {
        let fit = |seed: u64| -> Result<(u64, f64)> { Ok((seed * 2, seed as f64)) };
        let r = multi_restart(fit, &[7]).unwrap();
        assert_eq!(r.best, 14);
        assert_eq!(r.best_index, 0);
    }

    #[test]
    fn multi_restart_finds_global_basin() {
        // two basins: shallow at x=−1 (f=0.5), deep at x=2 (f=0)
        let objective = |x: &[f64], g: &mut [f64]| {
            let (p, q) = (x[0] + 1.0, x[0] - 2.0);
            let bump = (-q * q).exp();
            g[0] = 2.0 * p * q * q + 2.0 * q * p * p + q * bump;
            p * p * q * q + 0.5 * (1.0 - bump)
        };
        let fit = |seed: u64| -> Result<(f64, f64)> {
            let x0 = -3.0 + seed as f64;
            let m = minimize(objective, &[x0], &OptimOptions::default())?;
            Ok((m.x[0], m.value))
        };
        let seeds = [0u64, 1, 4, 5];
        let r = multi_restart(fit, &seeds).unwrap();
        assert!((r.best - 2.0).abs() < 1e-4, "{}", r.best);
        for c in r.costs.iter().flatten() {
            assert!(r.best_cost <= *c);
        }
        assert!(r.costs.iter().flatten().any(|c| *c > 0.1), "seeds should cover both basins");
    }

    #[test]
    fn multi_restart_all_fail() {
        let fit = |_s: u64| -> Result<((), f64)> { Err(Error::domain("nope")) };
        assert!(multi_restart(fit, &[1, 2]).is_err());
        assert!(multi_restart(fit, &[]).is_err());
    }
}
