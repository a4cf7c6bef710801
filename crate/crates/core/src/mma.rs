//! Method of Moving Asymptotes for unit-box variables and a few inequality
//! constraints `g_i(x) ≤ 0`.
//!
//! The convex separable subproblem is solved through its dual, which has one
//! variable per constraint, by a projected damped Newton iteration.

use rayon::prelude::*;
use crate::error::{Error, Result};

/// Tuning constants of the update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmaSettings {
    pub move_limit: f64,
    pub asymptote_init: f64,
    pub asymptote_incr: f64,
    pub asymptote_decr: f64,
    /// Keeps the subproblem bounds a fraction away from the asymptotes.
    pub albefa: f64,
    /// Linear and quadratic cost of the elastic constraint relaxations.
    pub elastic_c: f64,
    pub elastic_d: f64,
    pub dual_tolerance: f64,
    pub max_dual_iterations: usize,
}

impl Default for MmaSettings {
    fn default() -> Self {
        MmaSettings {
            move_limit: 0.1,
            asymptote_init: 0.5,
            asymptote_incr: 1.2,
            asymptote_decr: 0.7,
            albefa: 0.1,
            elastic_c: 1000.0,
            elastic_d: 1.0,
            dual_tolerance: 1e-9,
            max_dual_iterations: 500,
        }
    }
}

impl MmaSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("MMA settings: {what}")));
        if !(self.move_limit > 0.0 && self.move_limit <= 1.0) {
            return bad("move limit must lie in (0, 1]");
        }
        if !(self.asymptote_init > 0.0 && self.asymptote_init <= 10.0) {
            return bad("initial asymptote span must lie in (0, 10]");
        }
        if !(self.asymptote_incr >= 1.0 && self.asymptote_decr > 0.0 && self.asymptote_decr <= 1.0) {
            return bad("asymptote factors need incr ≥ 1 and 0 < decr ≤ 1");
        }
        if !(self.albefa > 0.0 && self.albefa < 1.0) {
            return bad("albefa must lie in (0, 1)");
        }
        if !(self.elastic_c > 0.0 && self.elastic_d > 0.0) {
            return bad("elastic costs must be positive");
        }
        if !(self.dual_tolerance > 0.0) || self.max_dual_iterations == 0 {
            return bad("dual tolerance and iteration cap must be positive");
        }
        Ok(())
    }
}

/// Optimizer memory carried between updates.
#[derive(Debug, Clone)]
pub struct MmaState {
    pub settings: MmaSettings,
    pub lower_asymptotes: Vec<f64>,
    pub upper_asymptotes: Vec<f64>,
    pub x_prev: Vec<f64>,
    pub x_prev2: Vec<f64>,
    pub iteration: usize,
    /// Dual multipliers of the last subproblem, reused as a warm start.
    pub multipliers: Vec<f64>,
    /// KKT residual of the last subproblem solve.
    pub last_dual_residual: f64,
}

impl MmaState {
    pub fn new(num_vars: usize, num_constraints: usize, settings: MmaSettings) -> Result<Self> {
        settings.validate()?;
        Ok(MmaState {
            settings,
            lower_asymptotes: vec![0.0; num_vars],
            upper_asymptotes: vec![1.0; num_vars],
            x_prev: Vec::new(),
            x_prev2: Vec::new(),
            iteration: 0,
            multipliers: vec![0.0; num_constraints],
            last_dual_residual: 0.0,
        })
    }
}

const RAA0: f64 = 1e-5;
// Smallest asymptote distance. A floor of 0.01 locks oscillating variables
// into a two-cycle of width 0.018 around their optimum.
const MIN_SPAN: f64 = 1e-5;
const CHUNK: usize = 2048;

/// Subproblem data in the separable form
/// `Σ_j (p0_j + λ·p_j)/(U_j - x_j) + (q0_j + λ·q_j)/(x_j - L_j)`.
struct Subproblem<'a> {
    m: usize,
    low: &'a [f64],
    upp: &'a [f64],
    alpha: Vec<f64>,
    beta: Vec<f64>,
    p0: Vec<f64>,
    q0: Vec<f64>,
    /// Row-major `n × m`.
    p: Vec<f64>,
    q: Vec<f64>,
    b: Vec<f64>,
    c: f64,
    d: f64,
}

struct DualEval {
    value: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
}

impl Subproblem<'_> {
    fn primal_x(&self, j: usize, lambda: &[f64]) -> f64 {
        let m = self.m;
        let mut pj = self.p0[j];
        let mut qj = self.q0[j];
        for i in 0..m {
            pj += lambda[i] * self.p[j * m + i];
            qj += lambda[i] * self.q[j * m + i];
        }
        let (sp, sq) = (pj.sqrt(), qj.sqrt());
        let x = (self.upp[j] * sq + self.low[j] * sp) / (sp + sq);
        x.clamp(self.alpha[j], self.beta[j])
    }

    fn primal_y(&self, lambda: &[f64]) -> Vec<f64> {
        lambda.iter().map(|&l| ((l - self.c) / self.d).max(0.0)).collect()
    }

    fn eval(&self, lambda: &[f64], with_hessian: bool) -> DualEval {
        let m = self.m;
        let n = self.p0.len();
        // fixed chunks summed in order keep the result independent of scheduling
        let partials: Vec<(f64, Vec<f64>, Vec<f64>)> = (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let (mut v, mut g, mut h) = (0.0, vec![0.0; m], vec![0.0; m * m]);
                for j in c * CHUNK..((c + 1) * CHUNK).min(n) {
                    let x = self.primal_x(j, lambda);
                    let (ux, xl) = (self.upp[j] - x, x - self.low[j]);
                    let mut pj = self.p0[j];
                    let mut qj = self.q0[j];
                    for i in 0..m {
                        pj += lambda[i] * self.p[j * m + i];
                        qj += lambda[i] * self.q[j * m + i];
                    }
                    v += pj / ux + qj / xl;
                    for i in 0..m {
                        g[i] += self.p[j * m + i] / ux + self.q[j * m + i] / xl;
                    }
                    let interior = x > self.alpha[j] && x < self.beta[j];
                    if with_hessian && interior {
                        let curv = 2.0 * pj / (ux * ux * ux) + 2.0 * qj / (xl * xl * xl);
                        let mut gcol = [0.0; 8];
                        for i in 0..m {
                            gcol[i] = self.p[j * m + i] / (ux * ux) - self.q[j * m + i] / (xl * xl);
                        }
                        for i in 0..m {
                            for k in 0..m {
                                h[i * m + k] -= gcol[i] * gcol[k] / curv;
                            }
                        }
                    }
                }
                (v, g, h)
            })
            .collect();
        let mut value = 0.0;
        let mut grad = vec![0.0; m];
        let mut hess = vec![0.0; m * m];
        for (v, g, h) in partials {
            value += v;
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b;
            }
            for (a, b) in hess.iter_mut().zip(h) {
                *a += b;
            }
        }
        let y = self.primal_y(lambda);
        for i in 0..m {
            value += self.c * y[i] + 0.5 * self.d * y[i] * y[i] - lambda[i] * y[i] - lambda[i] * self.b[i];
            grad[i] -= y[i] + self.b[i];
            if lambda[i] > self.c {
                hess[i * m + i] -= 1.0 / self.d;
            }
        }
        DualEval { value, grad, hess }
    }
}

/// Projected-gradient optimality measure of the dual at `lambda`.
fn kkt_residual(lambda: &[f64], grad: &[f64]) -> f64 {
    lambda
        .iter()
        .zip(grad)
        .map(|(&l, &g)| (l - (l + g).max(0.0)).abs())
        .fold(0.0, f64::max)
}

/// Solves the small symmetric positive definite system `a s = r` in place.
fn solve_spd(a: &mut [f64], r: &mut [f64], k: usize) -> bool {
    for c in 0..k {
        let piv = a[c * k + c];
        if !(piv > 0.0) {
            return false;
        }
        for row in c + 1..k {
            let f = a[row * k + c] / piv;
            for col in c..k {
                a[row * k + col] -= f * a[c * k + col];
            }
            r[row] -= f * r[c];
        }
    }
    for c in (0..k).rev() {
        let mut s = r[c];
        for col in c + 1..k {
            s -= a[c * k + col] * r[col];
        }
        r[c] = s / a[c * k + c];
    }
    true
}

/// Maximizes the concave dual over `λ ≥ 0`.
fn solve_dual(sub: &Subproblem, start: &[f64], settings: &MmaSettings) -> Result<(Vec<f64>, f64)> {
    let m = sub.m;
    let mut lambda = start.to_vec();
    let mut cur = sub.eval(&lambda, true);
    for _ in 0..settings.max_dual_iterations {
        let res = kkt_residual(&lambda, &cur.grad);
        if res < settings.dual_tolerance {
            return Ok((lambda, res));
        }
        // free set: multipliers that may move
        let free: Vec<usize> = (0..m).filter(|&i| lambda[i] > 0.0 || cur.grad[i] > 0.0).collect();
        let k = free.len();
        let mut a = vec![0.0; k * k];
        let mut r = vec![0.0; k];
        let scale = (0..m).map(|i| cur.hess[i * m + i].abs()).fold(0.0, f64::max).max(1e-12);
        for (ai, &i) in free.iter().enumerate() {
            r[ai] = cur.grad[i];
            for (bi, &l) in free.iter().enumerate() {
                a[ai * k + bi] = -cur.hess[i * m + l];
            }
            a[ai * k + ai] += 1e-10 * scale;
        }
        let mut dir = vec![0.0; m];
        if solve_spd(&mut a, &mut r, k) {
            for (ai, &i) in free.iter().enumerate() {
                dir[i] = r[ai];
            }
        } else {
            for &i in &free {
                dir[i] = cur.grad[i] / scale;
            }
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..80 {
            let trial: Vec<f64> = (0..m).map(|i| (lambda[i] + t * dir[i]).max(0.0)).collect();
            let ev = sub.eval(&trial, false);
            let gain: f64 = (0..m).map(|i| cur.grad[i] * (trial[i] - lambda[i])).sum();
            // near the optimum W is flat to round-off; fall back to the residual
            let flat = ev.value >= cur.value - 1e-14 * cur.value.abs()
                && kkt_residual(&trial, &ev.grad) < res;
            if ev.value >= cur.value + 1e-4 * gain.max(0.0) || flat {
                lambda = trial;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // no ascent along the Newton path: try the plain projected gradient
            let mut t = 1.0 / scale;
            for _ in 0..80 {
                let trial: Vec<f64> = (0..m).map(|i| (lambda[i] + t * cur.grad[i]).max(0.0)).collect();
                if sub.eval(&trial, false).value > cur.value {
                    lambda = trial;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
        }
        cur = sub.eval(&lambda, true);
        if !accepted {
            break;
        }
    }
    let res = kkt_residual(&lambda, &cur.grad);
    if res < settings.dual_tolerance {
        Ok((lambda, res))
    } else {
        Err(Error::Optimizer(format!(
            "dual subproblem stalled with KKT residual {res:e}"
        )))
    }
}

/// One MMA step for variables in `[0, 1]`.
///
/// `g` holds the constraint values in `g ≤ 0` form and `dg[i]` the gradient
/// of constraint `i`. Returns the next iterate; `state` is advanced.
pub fn mma_update(
    x: &[f64],
    f0: f64,
    df0: &[f64],
    g: &[f64],
    dg: &[Vec<f64>],
    state: &mut MmaState,
) -> Result<Vec<f64>> {
    let n = x.len();
    let m = g.len();
    if df0.len() != n || dg.len() != m || dg.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidArgument("MMA: inconsistent dimensions".into()));
    }
    if state.lower_asymptotes.len() != n || state.multipliers.len() != m {
        return Err(Error::InvalidArgument("MMA: state sized for a different problem".into()));
    }
    if m > 8 {
        return Err(Error::InvalidArgument("MMA: at most 8 constraints supported".into()));
    }
    if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidArgument("MMA: variables outside [0, 1]".into()));
    }
    if !f0.is_finite()
        || df0.iter().any(|v| !v.is_finite())
        || g.iter().any(|v| !v.is_finite())
        || dg.iter().flatten().any(|v| !v.is_finite())
    {
        return Err(Error::Optimizer("non-finite objective or constraint data".into()));
    }
    for (i, row) in dg.iter().enumerate() {
        if g[i] > 0.0 && row.iter().all(|&v| v == 0.0) {
            return Err(Error::Optimizer(format!(
                "constraint {i} is violated (g = {:e}) but has a zero gradient",
                g[i]
            )));
        }
    }

    let s = state.settings;
    state.iteration += 1;
    let k = state.iteration;
    // asymptotes
    {
        let (low, upp) = (&mut state.lower_asymptotes, &mut state.upper_asymptotes);
        if k <= 2 || state.x_prev2.len() != n {
            for j in 0..n {
                low[j] = x[j] - s.asymptote_init;
                upp[j] = x[j] + s.asymptote_init;
            }
        } else {
            for j in 0..n {
                let osc = (x[j] - state.x_prev[j]) * (state.x_prev[j] - state.x_prev2[j]);
                let factor = if osc < 0.0 {
                    s.asymptote_decr
                } else if osc > 0.0 {
                    s.asymptote_incr
                } else {
                    1.0
                };
                let l = x[j] - factor * (state.x_prev[j] - low[j]);
                let u = x[j] + factor * (upp[j] - state.x_prev[j]);
                low[j] = l.clamp(x[j] - 10.0, x[j] - MIN_SPAN);
                upp[j] = u.clamp(x[j] + MIN_SPAN, x[j] + 10.0);
            }
        }
    }
    let low = &state.lower_asymptotes;
    let upp = &state.upper_asymptotes;

    let mut alpha = vec![0.0; n];
    let mut beta = vec![0.0; n];
    let mut p0 = vec![0.0; n];
    let mut q0 = vec![0.0; n];
    let mut p = vec![0.0; n * m];
    let mut q = vec![0.0; n * m];
    let mut b: Vec<f64> = g.iter().map(|v| -v).collect();
    for j in 0..n {
        alpha[j] = 0f64
            .max(low[j] + s.albefa * (x[j] - low[j]))
            .max(x[j] - s.move_limit);
        beta[j] = 1f64
            .min(upp[j] - s.albefa * (upp[j] - x[j]))
            .min(x[j] + s.move_limit);
        let ux2 = (upp[j] - x[j]).powi(2);
        let xl2 = (x[j] - low[j]).powi(2);
        let split = |d: f64| {
            let (pos, neg) = (d.max(0.0), (-d).max(0.0));
            (
                (1.001 * pos + 0.001 * neg + RAA0) * ux2,
                (0.001 * pos + 1.001 * neg + RAA0) * xl2,
            )
        };
        (p0[j], q0[j]) = split(df0[j]);
        for i in 0..m {
            let (pi, qi) = split(dg[i][j]);
            p[j * m + i] = pi;
            q[j * m + i] = qi;
            b[i] += pi / (upp[j] - x[j]) + qi / (x[j] - low[j]);
        }
    }
    let sub = Subproblem {
        m,
        low,
        upp,
        alpha,
        beta,
        p0,
        q0,
        p,
        q,
        b,
        c: s.elastic_c,
        d: s.elastic_d,
    };
    let start = state.multipliers.clone();
    let (lambda, residual) = solve_dual(&sub, &start, &s)?;
    let x_new: Vec<f64> = (0..n).map(|j| sub.primal_x(j, &lambda)).collect();

    state.multipliers = lambda;
    state.last_dual_residual = residual;
    state.x_prev2 = std::mem::replace(&mut state.x_prev, x.to_vec());
    Ok(x_new)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_quadratic(n: usize, iters: usize) -> (Vec<f64>, usize) {
        let mut st = MmaState::new(n, 0, MmaSettings::default()).unwrap();
        let mut x = vec![0.5; n];
        for it in 1..=iters {
            let df: Vec<f64> = x.iter().map(|v| 2.0 * (v - 0.3)).collect();
            let f: f64 = x.iter().map(|v| (v - 0.3).powi(2)).sum();
            let next = mma_update(&x, f, &df, &[], &[], &mut st).unwrap();
            let done = next.iter().all(|v| (v - 0.3).abs() < 1e-6);
            x = next;
            if done {
                return (x, it);
            }
        }
        (x, iters)
    }

    #[test]
    fn separable_quadratic_converges() {
        let (x, iters) = run_quadratic(10, 30);
        assert!(x.iter().all(|v| (v - 0.3).abs() < 1e-6), "{x:?}");
        assert!(iters <= 30);
    }

    #[test]
    fn quadratic_from_off_grid_start_settles() {
        // the move-limited steps overshoot 0.3, so the asymptotes must shrink
        let n = 4;
        let mut st = MmaState::new(n, 0, MmaSettings::default()).unwrap();
        let mut x = vec![0.93; n];
        for _ in 0..80 {
            let df: Vec<f64> = x.iter().map(|v| 2.0 * (v - 0.3)).collect();
            let f = x.iter().map(|v| (v - 0.3).powi(2)).sum();
            x = mma_update(&x, f, &df, &[], &[], &mut st).unwrap();
        }
        assert!(x.iter().all(|v| (v - 0.3).abs() < 1e-6), "{x:?}");
    }

    #[test]
    fn linear_constraint_becomes_active() {
        let n = 20;
        let mut st = MmaState::new(n, 1, MmaSettings::default()).unwrap();
        let mut x = vec![0.1; n];
        for _ in 0..60 {
            let mean = x.iter().sum::<f64>() / n as f64;
            let df = vec![-1.0 / n as f64; n];
            let dg = vec![vec![1.0 / n as f64; n]];
            x = mma_update(&x, -mean, &df, &[mean - 0.4], &dg, &mut st).unwrap();
            assert!(st.last_dual_residual < 1e-9);
        }
        let mean = x.iter().sum::<f64>() / n as f64;
        assert!((mean - 0.4).abs() < 1e-6, "mean {mean}");
        assert!(x.iter().all(|v| (v - x[0]).abs() < 1e-12));
    }

    #[test]
    fn zero_gradient_on_violated_constraint_is_an_error() {
        let mut st = MmaState::new(3, 1, MmaSettings::default()).unwrap();
        let r = mma_update(&[0.5; 3], 0.0, &[1.0; 3], &[0.2], &[vec![0.0; 3]], &mut st);
        assert!(matches!(r, Err(Error::Optimizer(_))));
    }

    #[test]
    fn rejects_bad_input() {
        let mut st = MmaState::new(3, 0, MmaSettings::default()).unwrap();
        assert!(mma_update(&[0.5, 1.5, 0.2], 0.0, &[0.0; 3], &[], &[], &mut st).is_err());
        assert!(mma_update(&[0.5; 2], 0.0, &[0.0; 2], &[], &[], &mut st).is_err());
        assert!(mma_update(&[0.5; 3], f64::NAN, &[0.0; 3], &[], &[], &mut st).is_err());
        let bad = MmaSettings {
            move_limit: 0.0,
            ..MmaSettings::default()
        };
        assert!(MmaState::new(3, 0, bad).is_err());
    }

    #[test]
    fn three_constraints_with_nested_bounds() {
        // maximize Σ w_j x_j under three overlapping linear budgets
        let n = 30;
        let w: Vec<f64> = (0..n).map(|j| 1.0 + j as f64 / n as f64).collect();
        let mut st = MmaState::new(n, 3, MmaSettings::default()).unwrap();
        let mut x = vec![0.5; n];
        let rows: Vec<Vec<f64>> = vec![
            vec![1.0 / n as f64; n],
            (0..n).map(|j| if j % 2 == 0 { 2.0 / n as f64 } else { 0.0 }).collect(),
            (0..n).map(|j| if j < n / 3 { 3.0 / n as f64 } else { 0.0 }).collect(),
        ];
        let bounds = [0.4, 0.3, 0.2];
        for _ in 0..100 {
            let g: Vec<f64> = rows
                .iter()
                .zip(bounds)
                .map(|(r, b)| r.iter().zip(&x).map(|(a, v)| a * v).sum::<f64>() - b)
                .collect();
            let df: Vec<f64> = w.iter().map(|v| -v / n as f64).collect();
            let f = df.iter().zip(&x).map(|(a, v)| a * v).sum();
            x = mma_update(&x, f, &df, &g, &rows, &mut st).unwrap();
            assert!(st.last_dual_residual < 1e-9);
        }
        let g0: f64 = rows[0].iter().zip(&x).map(|(a, v)| a * v).sum::<f64>() - bounds[0];
        assert!(g0 < 1e-6 && g0 > -1e-3, "{g0}");
    }
}
