//! Single-phase subproblem: maximize `f(phi)^(1/M) / h(phi)` with
//! `f = alpha + r1 cos(phi - varphi1)` and `h = beta + r2 cos(phi - varphi2)`.
//!
//! Stationary points come from a quartic in `z = tan(phi / 2)` solved in
//! closed form (Ferrari, with a Cardano resolvent). `phi = pi` is the pole of
//! the substitution and is always a candidate.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::linalg::ComplexMatrix;
use crate::prewhiten::{wrap, PhaseGrid};

/// Imaginary-part tolerance for accepting a closed-form root as real.
const REAL_ROOT_TOL: f64 = 1e-8;
/// Normalized quartic residual above which a root is discarded.
const RESIDUAL_TOL: f64 = 1e-6;
/// Points in the cheap post-check of the closed-form answer.
const COARSE_CHECK_POINTS: usize = 16;
const DEFAULT_FALLBACK_POINTS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarPhaseProblem {
    pub alpha: f64,
    pub beta: f64,
    pub r1: f64,
    pub r2: f64,
    pub varphi1: f64,
    pub varphi2: f64,
    pub m: usize,
}

impl ScalarPhaseProblem {
    /// Reduces the row objective `(u A u^H)^(1/M) / (u B u^H)` to entry `n`
    /// of row vector `u` (whose entries have unit modulus). Entry `n` of `u`
    /// is ignored.
    pub fn from_row(a: &ComplexMatrix, b: &ComplexMatrix, u: &[Complex64], n: usize) -> Self {
        let m = u.len();
        let zero = Complex64::new(0.0, 0.0);
        let (mut ca, mut cb) = (zero, zero);
        let (mut qa, mut qb) = (0.0, 0.0);
        for k in 0..m {
            if k == n {
                continue;
            }
            ca += a[(n, k)] * u[k].conj();
            cb += b[(n, k)] * u[k].conj();
            let (mut ra, mut rb) = (zero, zero);
            for j in 0..m {
                if j != n {
                    ra += a[(k, j)] * u[j].conj();
                    rb += b[(k, j)] * u[j].conj();
                }
            }
            qa += (u[k] * ra).re;
            qb += (u[k] * rb).re;
        }
        Self::from_parts(a[(n, n)].re + qa, ca, b[(n, n)].re + qb, cb, m)
    }

    /// Builds the problem from `f = alpha + 2 Re(e^{j phi} ca)` and
    /// `h = beta + 2 Re(e^{j phi} cb)`.
    pub fn from_parts(alpha: f64, ca: Complex64, beta: f64, cb: Complex64, m: usize) -> Self {
        Self { alpha, beta, r1: 2.0 * ca.norm(), r2: 2.0 * cb.norm(), varphi1: -ca.arg(), varphi2: -cb.arg(), m }
    }

    pub fn f(&self, phi: f64) -> f64 {
        self.alpha + self.r1 * (phi - self.varphi1).cos()
    }

    pub fn h(&self, phi: f64) -> f64 {
        self.beta + self.r2 * (phi - self.varphi2).cos()
    }

    /// `f'h - M f h'`, zero at every stationary point of the cost.
    fn stationarity(&self, phi: f64) -> (f64, f64) {
        let (s1, c1) = (phi - self.varphi1).sin_cos();
        let (s2, c2) = (phi - self.varphi2).sin_cos();
        let f = self.alpha + self.r1 * c1;
        let h = self.beta + self.r2 * c2;
        let (fp, hp) = (-self.r1 * s1, -self.r2 * s2);
        let (fpp, hpp) = (-self.r1 * c1, -self.r2 * c2);
        let m = self.m as f64;
        let d = fp * h - m * f * hp;
        let dp = fpp * h + (1.0 - m) * fp * hp - m * f * hpp;
        (d, dp)
    }
}

/// `[alpha + r1 cos(phi - varphi1)]^(1/M) / (beta + r2 cos(phi - varphi2))`.
pub fn scalar_phase_cost(p: &ScalarPhaseProblem, phi: f64) -> f64 {
    p.f(phi).max(0.0).powf(1.0 / p.m as f64) / p.h(phi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarSolution {
    pub phase: f64,
    pub cost: f64,
    /// The closed form was degenerate or lost to the coarse check, and the
    /// dense grid search produced the answer.
    pub used_fallback: bool,
}

/// Real roots of the monic quartic `z^4 + a3 z^3 + a2 z^2 + a1 z + a0`.
pub fn quartic_real_roots(a3: f64, a2: f64, a1: f64, a0: f64) -> Vec<f64> {
    let t1 = resolvent_root(a3, a2, a1, a0);
    let cx = |x: f64| Complex64::new(x, 0.0);
    let r = cx(0.25 * a3 * a3 - a2 + t1).sqrt();
    let base = 0.75 * a3 * a3 - 2.0 * a2;
    let (d, e) = if r.norm() > 1e-12 * (1.0 + a3.abs() + a2.abs().sqrt()) {
        let k = cx(4.0 * a3 * a2 - 8.0 * a1 - a3 * a3 * a3) / (r * 4.0);
        ((cx(base) - r * r + k).sqrt(), (cx(base) - r * r - k).sqrt())
    } else {
        let s = cx(t1 * t1 - 4.0 * a0).sqrt() * 2.0;
        ((cx(base) + s).sqrt(), (cx(base) - s).sqrt())
    };
    let shift = cx(-0.25 * a3);
    let roots =
        [shift + r * 0.5 + d * 0.5, shift + r * 0.5 - d * 0.5, shift - r * 0.5 + e * 0.5, shift - r * 0.5 - e * 0.5];
    roots
        .iter()
        .filter(|z| z.im.abs() <= REAL_ROOT_TOL * (1.0 + z.re.abs()))
        .map(|z| z.re)
        .filter(|&z| {
            let terms = [z.powi(4), a3 * z.powi(3), a2 * z * z, a1 * z, a0];
            let scale: f64 = terms.iter().map(|t| t.abs()).sum();
            let resid: f64 = terms.iter().sum::<f64>().abs();
            z.is_finite() && resid <= RESIDUAL_TOL * scale.max(1e-300)
        })
        .collect()
}

/// A real root of `t^3 - a2 t^2 + (a1 a3 - 4 a0) t + (4 a2 a0 - a1^2 - a3^2 a0)`.
fn resolvent_root(a3: f64, a2: f64, a1: f64, a0: f64) -> f64 {
    let b = -a2;
    let c = a1 * a3 - 4.0 * a0;
    let d = 4.0 * a2 * a0 - a1 * a1 - a3 * a3 * a0;
    let roots = cubic_roots(b, c, d);
    let mut t = roots.iter().min_by(|x, y| x.im.abs().total_cmp(&y.im.abs())).map(|z| z.re).unwrap_or(0.0);
    for _ in 0..3 {
        let val = ((t + b) * t + c) * t + d;
        let der = (3.0 * t + 2.0 * b) * t + c;
        if der == 0.0 || !val.is_finite() {
            break;
        }
        let next = t - val / der;
        if !next.is_finite() {
            break;
        }
        let next_val = ((next + b) * next + c) * next + d;
        if next_val.abs() >= val.abs() {
            break;
        }
        t = next;
    }
    t
}

/// Cardano roots of the monic cubic `t^3 + b t^2 + c t + d`.
fn cubic_roots(b: f64, c: f64, d: f64) -> [Complex64; 3] {
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let cx = |x: f64| Complex64::new(x, 0.0);
    let disc = cx(q * q / 4.0 + p * p * p / 27.0).sqrt();
    let mut u3 = cx(-q / 2.0) + disc;
    if u3.norm() < 1e-300 {
        u3 = cx(-q / 2.0) - disc;
    }
    let omega = Complex64::from_polar(1.0, TAU / 3.0);
    let u = u3.powf(1.0 / 3.0);
    let mut out = [Complex64::new(0.0, 0.0); 3];
    let mut uk = u;
    for slot in out.iter_mut() {
        let s = if uk.norm() < 1e-300 { cx(0.0) } else { uk - cx(p) / (uk * 3.0) };
        *slot = s - cx(b / 3.0);
        uk *= omega;
    }
    out
}

/// Stationary-point candidates from the closed form, or `None` when the
/// quartic normalization is degenerate.
fn closed_form_candidates(p: &ScalarPhaseProblem) -> Option<Vec<f64>> {
    let (s1, c1) = p.varphi1.sin_cos();
    let (s2, c2) = p.varphi2.sin_cos();
    let (u1, v1, u2, v2) = (p.r1 * s1, p.r1 * c1, p.r2 * s2, p.r2 * c2);
    let m = p.m as f64;
    let (alpha, beta) = (p.alpha, p.beta);
    let lead = u1 * (beta - v2) - m * u2 * (alpha - v1);
    let scale = p.r1 * (beta + p.r2) + m * p.r2 * (alpha + p.r1);
    if !(lead.abs() > 1e-12 * scale) {
        return None;
    }
    let a3 = (2.0 * v1 * beta - 2.0 * m * v2 * alpha + (2.0 * m - 2.0) * (v1 * v2 - u1 * u2)) / lead;
    let a2 = ((4.0 - 2.0 * m) * u2 * v1 + (2.0 - 4.0 * m) * u1 * v2) / lead;
    let a1 = (2.0 * v1 * beta - 2.0 * m * v2 * alpha + (2.0 * m - 2.0) * (u1 * u2 - v1 * v2)) / lead;
    let a0 = (m * u2 * (alpha + v1) - u1 * (beta + v2)) / lead;
    if ![a3, a2, a1, a0].iter().all(|x| x.is_finite()) {
        return None;
    }
    let mut cands: Vec<f64> = quartic_real_roots(a3, a2, a1, a0).into_iter().map(|z| wrap(2.0 * z.atan())).collect();
    cands.push(PI);
    Some(cands)
}

/// Safeguarded Newton polish of a stationary point; never lowers the cost.
fn polish(p: &ScalarPhaseProblem, phi: f64) -> f64 {
    let mut best = phi;
    let mut best_cost = scalar_phase_cost(p, phi);
    for _ in 0..8 {
        let (d, dp) = p.stationarity(best);
        if dp == 0.0 || d == 0.0 {
            break;
        }
        let step = (-d / dp).clamp(-0.25, 0.25);
        let next = wrap(best + step);
        let cost = scalar_phase_cost(p, next);
        if cost >= best_cost {
            let done = (next - best).abs() < 1e-15;
            best = next;
            best_cost = cost;
            if done {
                break;
            }
        } else {
            break;
        }
    }
    best
}

fn golden_max(p: &ScalarPhaseProblem, mut lo: f64, mut hi: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (scalar_phase_cost(p, x1), scalar_phase_cost(p, x2));
    for _ in 0..80 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = scalar_phase_cost(p, x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = scalar_phase_cost(p, x1);
        }
    }
    wrap(0.5 * (lo + hi))
}

/// Local maxima of a dense uniform grid, each refined by golden section.
fn grid_maxima(p: &ScalarPhaseProblem, points: usize) -> Vec<f64> {
    let step = TAU / points as f64;
    let vals: Vec<f64> = (0..points).map(|i| scalar_phase_cost(p, i as f64 * step)).collect();
    let mut out = Vec::new();
    for i in 0..points {
        let prev = vals[(i + points - 1) % points];
        let next = vals[(i + 1) % points];
        if vals[i] >= prev && vals[i] >= next {
            let x = i as f64 * step;
            let refined = golden_max(p, x - step, x + step);
            out.push(if scalar_phase_cost(p, refined) >= vals[i] { refined } else { x });
        }
    }
    if out.is_empty() {
        out.push(0.0);
    }
    out
}

fn best_of(p: &ScalarPhaseProblem, cands: &[f64]) -> (f64, f64) {
    cands.iter().map(|&x| (x, scalar_phase_cost(p, x))).fold((0.0, f64::NEG_INFINITY), |acc, (x, c)| {
        if c > acc.1 {
            (x, c)
        } else {
            acc
        }
    })
}

/// All stationary-point candidates (polished) plus whether the dense-grid
/// fallback had to supply them.
pub fn stationary_candidates(p: &ScalarPhaseProblem, fallback_points: usize) -> (Vec<f64>, bool) {
    if p.r1 == 0.0 && p.r2 == 0.0 {
        return (vec![0.0], false);
    }
    if p.r1 == 0.0 {
        let x = wrap(p.varphi2 + PI);
        return (vec![x, wrap(p.varphi2)], false);
    }
    if p.r2 == 0.0 {
        let x = wrap(p.varphi1);
        return (vec![x, wrap(p.varphi1 + PI)], false);
    }
    if let Some(raw) = closed_form_candidates(p) {
        let cands: Vec<f64> = raw.into_iter().map(|x| polish(p, x)).collect();
        let (_, best) = best_of(p, &cands);
        let coarse_step = TAU / COARSE_CHECK_POINTS as f64;
        let beaten =
            (0..COARSE_CHECK_POINTS).any(|i| scalar_phase_cost(p, i as f64 * coarse_step) > best * (1.0 + 1e-9));
        if !beaten && best.is_finite() {
            return (cands, false);
        }
    }
    let mut cands = grid_maxima(p, fallback_points.max(COARSE_CHECK_POINTS));
    cands.push(PI);
    (cands, true)
}

/// Continuous-phase maximizer.
pub fn solve_phase_infinite(p: &ScalarPhaseProblem) -> ScalarSolution {
    solve_phase_infinite_with(p, DEFAULT_FALLBACK_POINTS)
}

pub fn solve_phase_infinite_with(p: &ScalarPhaseProblem, fallback_points: usize) -> ScalarSolution {
    let (cands, used_fallback) = stationary_candidates(p, fallback_points);
    let (phase, cost) = best_of(p, &cands);
    ScalarSolution { phase, cost, used_fallback }
}

/// Grid maximizer. The cost is unimodal between consecutive stationary
/// points, so the best grid phase brackets one of the stationary points;
/// only the two grid neighbours of each candidate are evaluated. Ties go to
/// the smaller grid index.
pub fn solve_phase_quantized(p: &ScalarPhaseProblem, grid: PhaseGrid) -> ScalarSolution {
    solve_phase_quantized_with(p, grid, DEFAULT_FALLBACK_POINTS)
}

pub fn solve_phase_quantized_with(p: &ScalarPhaseProblem, grid: PhaseGrid, fallback_points: usize) -> ScalarSolution {
    let Some(step) = grid.step() else {
        return solve_phase_infinite_with(p, fallback_points);
    };
    let levels = grid.levels().unwrap() as i64;
    let (cands, used_fallback) = stationary_candidates(p, fallback_points);
    let mut best: Option<(i64, f64)> = None;
    for &phi in &cands {
        let k = ((wrap(phi) / step).floor() as i64).rem_euclid(levels);
        for idx in [k, (k + 1).rem_euclid(levels)] {
            let cost = scalar_phase_cost(p, grid.phase(idx));
            best = match best {
                Some((bi, bc)) if bc > cost || (bc == cost && bi <= idx) => Some((bi, bc)),
                _ => Some((idx, cost)),
            };
        }
    }
    let (idx, cost) = best.expect("at least one candidate");
    ScalarSolution { phase: grid.phase(idx), cost, used_fallback }
}
