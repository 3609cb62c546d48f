//! Dense BFGS minimizer with a strong-Wolfe line search.

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Stop when the Euclidean gradient norm falls below this.
    pub grad_tol: f64,
    /// Stop when `|f_old - f_new| / max(|f_new|, 1)` stays below this for two
    /// iterations, or when no decrease can be found along steepest descent.
    pub rel_tol: f64,
    /// Longest step allowed in one line search, in parameter units.
    pub max_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            grad_tol: 1e-5,
            rel_tol: 1e-9,
            max_step: 5.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Objective after the start and after every accepted iteration.
    pub trace: Vec<f64>,
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const MAX_LS: usize = 40;

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

struct Counted<F> {
    inner: F,
    evaluations: usize,
}

impl<F: FnMut(&[f64]) -> (f64, Vec<f64>)> Counted<F> {
    fn eval(&mut self, x: &[f64]) -> (f64, Vec<f64>) {
        self.evaluations += 1;
        let (f, g) = (self.inner)(x);
        if f.is_finite() && g.iter().all(|v| v.is_finite()) {
            (f, g)
        } else {
            (f64::INFINITY, g)
        }
    }

    fn at(&mut self, base: &[f64], dir: &[f64], alpha: f64) -> Point {
        let x: Vec<f64> = base.iter().zip(dir).map(|(b, d)| b + alpha * d).collect();
        let (f, g) = self.eval(&x);
        Point { x, f, g }
    }
}

/// Minimizes `objective`, which returns the value and gradient at a point.
/// Non-finite values are treated as `+inf` and rejected by the line search.
pub fn minimize<F>(objective: F, x0: &[f64], opts: &BfgsOptions) -> BfgsOutcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut obj = Counted {
        inner: objective,
        evaluations: 0,
    };
    let (f0, g0) = obj.eval(x0);
    let mut cur = Point {
        x: x0.to_vec(),
        f: f0,
        g: g0,
    };
    let mut trace = vec![cur.f];
    if !cur.f.is_finite() {
        return BfgsOutcome {
            x: cur.x,
            f: cur.f,
            grad: cur.g,
            iterations: 0,
            evaluations: obj.evaluations,
            converged: false,
            trace,
        };
    }

    let mut h = identity(n);
    let mut scaled = false;
    let mut small_steps = 0;
    let mut converged = norm(&cur.g) < opts.grad_tol;
    let mut iterations = 0;

    while !converged && iterations < opts.max_iter {
        let mut dir = mat_vec(&h, &cur.g);
        dir.iter_mut().for_each(|d| *d = -*d);
        let mut slope = dot(&cur.g, &dir);
        if slope.is_nan() || slope >= 0.0 {
            h = identity(n);
            scaled = false;
            dir = cur.g.iter().map(|g| -g).collect();
            slope = dot(&cur.g, &dir);
        }
        let dnorm = norm(&dir);
        let alpha_max = opts.max_step / dnorm;
        let alpha0 = if scaled { 1.0f64.min(alpha_max) } else { (1.0 / dnorm).min(alpha_max) };

        let next = match line_search(&mut obj, &cur, &dir, slope, alpha0, alpha_max) {
            Some(p) => p,
            None if scaled => {
                // retry once along steepest descent with a fresh metric
                h = identity(n);
                scaled = false;
                continue;
            }
            None => {
                // no decrease along steepest descent: the objective change is zero
                converged = true;
                break;
            }
        };
        iterations += 1;

        let s: Vec<f64> = next.x.iter().zip(&cur.x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.g.iter().zip(&cur.g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
            if !scaled {
                let gamma = sy / dot(&y, &y);
                h = identity(n);
                h.iter_mut().flatten().for_each(|v| *v *= gamma);
                scaled = true;
            }
            bfgs_update(&mut h, &s, &y, sy);
        }

        let rel = (cur.f - next.f).abs() / next.f.abs().max(1.0);
        cur = next;
        trace.push(cur.f);
        if norm(&cur.g) < opts.grad_tol {
            converged = true;
        } else if rel < opts.rel_tol {
            small_steps += 1;
            converged = small_steps >= 2;
        } else {
            small_steps = 0;
        }
    }

    BfgsOutcome {
        x: cur.x,
        f: cur.f,
        grad: cur.g,
        iterations,
        evaluations: obj.evaluations,
        converged,
        trace,
    }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

/// Inverse-Hessian update `H <- (I - rho s y') H (I - rho y s') + rho s s'`.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy = mat_vec(h, y);
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

/// Strong-Wolfe line search; returns the accepted point, or a point with
/// sufficient decrease if the curvature condition could not be met.
fn line_search<F>(
    obj: &mut Counted<F>,
    cur: &Point,
    dir: &[f64],
    slope0: f64,
    alpha0: f64,
    alpha_max: f64,
) -> Option<Point>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let armijo = |alpha: f64, f: f64| f <= cur.f + C1 * alpha * slope0;
    let mut lo = (0.0, cur.f, slope0);
    let mut lo_point: Option<Point> = None;
    let mut alpha = alpha0;

    for i in 0..MAX_LS {
        let p = obj.at(&cur.x, dir, alpha);
        let slope = dot(&p.g, dir);
        if !armijo(alpha, p.f) || (i > 0 && p.f >= lo.1) {
            return zoom(obj, cur, dir, slope0, lo, lo_point, (alpha, p.f, slope));
        }
        if slope.abs() <= -C2 * slope0 {
            return Some(p);
        }
        if slope >= 0.0 {
            let hi = (lo.0, lo.1, lo.2);
            return zoom(obj, cur, dir, slope0, (alpha, p.f, slope), Some(p), hi);
        }
        lo = (alpha, p.f, slope);
        lo_point = Some(p);
        if alpha >= alpha_max {
            return lo_point;
        }
        alpha = (2.0 * alpha).min(alpha_max);
    }
    lo_point
}

#[allow(clippy::too_many_arguments)]
fn zoom<F>(
    obj: &mut Counted<F>,
    cur: &Point,
    dir: &[f64],
    slope0: f64,
    mut lo: (f64, f64, f64),
    mut lo_point: Option<Point>,
    mut hi: (f64, f64, f64),
) -> Option<Point>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    for _ in 0..MAX_LS {
        let (a_lo, a_hi) = (lo.0, hi.0);
        let width = (a_hi - a_lo).abs();
        if width < 1e-16 * a_lo.abs().max(a_hi.abs()).max(1e-300) {
            break;
        }
        let left = a_lo.min(a_hi);
        let mut alpha = cubic_min(lo, hi).unwrap_or(0.5 * (a_lo + a_hi));
        let guard = 0.1 * width;
        if !(alpha > left + guard && alpha < left + width - guard) {
            alpha = 0.5 * (a_lo + a_hi);
        }
        let p = obj.at(&cur.x, dir, alpha);
        let slope = dot(&p.g, dir);
        if p.f > cur.f + C1 * alpha * slope0 || p.f >= lo.1 {
            hi = (alpha, p.f, slope);
        } else {
            if slope.abs() <= -C2 * slope0 {
                return Some(p);
            }
            if slope * (hi.0 - lo.0) >= 0.0 {
                hi = lo;
            }
            lo = (alpha, p.f, slope);
            lo_point = Some(p);
        }
    }
    lo_point.filter(|p| p.f < cur.f)
}

/// Minimizer of the cubic through two points with known values and slopes.
fn cubic_min(a: (f64, f64, f64), b: (f64, f64, f64)) -> Option<f64> {
    let (x0, f0, d0) = a;
    let (x1, f1, d1) = b;
    if !(f0.is_finite() && f1.is_finite() && d0.is_finite() && d1.is_finite()) {
        return None;
    }
    let d = x1 - x0;
    let t1 = d0 + d1 - 3.0 * (f0 - f1) / (x0 - x1);
    let disc = t1 * t1 - d0 * d1;
    if disc < 0.0 {
        return None;
    }
    let t2 = d.signum() * disc.sqrt();
    let denom = d1 - d0 + 2.0 * t2;
    if denom == 0.0 {
        return None;
    }
    let x = x1 - d * (d1 + t2 - t1) / denom;
    x.is_finite().then_some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> (f64, Vec<f64>) {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![
            -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
            200.0 * (b - a * a),
        ];
        (f, g)
    }

    #[test]
    fn solves_rosenbrock() {
        let out = minimize(rosenbrock, &[-1.2, 1.0], &BfgsOptions::default());
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-5 && (out.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn trace_is_monotone() {
        let out = minimize(rosenbrock, &[-1.2, 1.0], &BfgsOptions::default());
        assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn quadratic_in_few_iterations() {
        let q = |x: &[f64]| {
            let f = 0.5 * (x[0] * x[0] + 10.0 * x[1] * x[1] + 100.0 * x[2] * x[2]);
            (f, vec![x[0], 10.0 * x[1], 100.0 * x[2]])
        };
        let out = minimize(q, &[1.0, 1.0, 1.0], &BfgsOptions::default());
        assert!(out.converged);
        assert!(out.iterations < 30, "{}", out.iterations);
    }

    #[test]
    fn rejects_non_finite_region() {
        // log barrier: undefined for x <= 0
        let f = |x: &[f64]| {
            if x[0] <= 0.0 {
                (f64::NAN, vec![f64::NAN])
            } else {
                (x[0] - x[0].ln(), vec![1.0 - 1.0 / x[0]])
            }
        };
        let out = minimize(f, &[3.0], &BfgsOptions::default());
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-5);
    }
}
