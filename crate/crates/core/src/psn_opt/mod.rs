//! Phase optimization for the analog prewhitener.
//!
//! [`optimize_psn`] maximizes `|E E^H|^(1/M) / tr(E R E^H)` one row at a
//! time. With the other rows `E_bar` fixed the row objective is
//! `(x A x^H)^(1/M) / (x B x^H)`, and each entry of `x` is then updated by
//! the exact single-phase solver in [`scalar`]. [`opp_prewhitener`] is the
//! alternating nearest-unitary benchmark.

mod opp;
pub mod scalar;

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{HimapError, Result};
use crate::linalg::{self, cis, ComplexMatrix};
use crate::prewhiten::{wrap, PhaseGrid, PhaseMatrix};
use crate::rng::{self, SimRng};

pub use opp::{opp_prewhitener, OppResult};
pub use scalar::{scalar_phase_cost, solve_phase_infinite, solve_phase_quantized, ScalarPhaseProblem, ScalarSolution};

const MAX_INIT_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub max_sweeps: usize,
    /// Stop once a full sweep improves the objective by less than this
    /// fraction.
    pub rel_tol: f64,
    pub restarts: usize,
    pub grid_fallback_points: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { max_sweeps: 50, rel_tol: 1e-8, restarts: 4, grid_fallback_points: 4096 }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_sweeps == 0 || self.restarts == 0 || self.grid_fallback_points == 0 {
            return Err(HimapError::InvalidConfig("optimizer counts must be positive".into()));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(HimapError::InvalidConfig(format!("rel_tol must be positive, got {}", self.rel_tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimizationTrace {
    /// Whiteness of `E R E^H` after every row update, starting with the
    /// initialization. This is the optimized objective up to the constant
    /// factor `M |R|^(1/M)`, so it is non-decreasing.
    pub objective_per_update: Vec<f64>,
    pub sweeps: usize,
    /// Scalar solves where the closed form had to be replaced by the dense
    /// grid search.
    pub fallback_events: usize,
    /// Random initializations drawn, including rejected singular ones.
    pub init_attempts: usize,
}

impl OptimizationTrace {
    pub fn final_objective(&self) -> f64 {
        self.objective_per_update.last().copied().unwrap_or(0.0)
    }

    pub fn is_monotone(&self) -> bool {
        self.objective_per_update.windows(2).all(|w| w[1] >= w[0])
    }
}

/// `A = I - E_bar^H (E_bar E_bar^H)^{-1} E_bar` and
/// `B = R + tr(E_bar R E_bar^H) / M * I` for the row set `E_bar`.
pub fn row_subproblem(e_bar: &ComplexMatrix, r: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let m = linalg::ensure_square(r, "covariance")?;
    if e_bar.ncols() != m || e_bar.nrows() + 1 != m {
        return Err(HimapError::Dimension(format!(
            "row set is {}x{}, expected {}x{m}",
            e_bar.nrows(),
            e_bar.ncols(),
            m - 1
        )));
    }
    linalg::ensure_hermitian(r)?;
    let gram = linalg::hermitian_part(&(e_bar * e_bar.adjoint()));
    let lambda = linalg::eigvalsh(&gram);
    let (hi, lo) = (lambda.first().copied().unwrap_or(1.0), lambda.last().copied().unwrap_or(1.0));
    if !(lo > 1e-12 * hi) {
        return Err(HimapError::RankDeficient(format!("row set Gram eigenvalues {lo:e} / {hi:e}")));
    }
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| HimapError::RankDeficient("row set Gram matrix is not positive definite".into()))?;
    let a = linalg::identity(m) - e_bar.adjoint() * chol.solve(e_bar);
    let tr = linalg::trace_re(&(e_bar * r * e_bar.adjoint()));
    let b = r + linalg::identity(m) * Complex64::new(tr / m as f64, 0.0);
    Ok((linalg::hermitian_part(&a), linalg::hermitian_part(&b)))
}

/// Whiteness of `E R E^H` from `log|det E|`, exact up to rounding and
/// cheap enough to evaluate after every row.
fn objective(e: &ComplexMatrix, r: &ComplexMatrix, log_det_r: f64) -> f64 {
    let m = e.nrows() as f64;
    let log_det_e = linalg::log_abs_det(e);
    if !log_det_e.is_finite() {
        return 0.0;
    }
    let tr = linalg::trace_re(&(e * r * e.adjoint()));
    let w = ((2.0 * log_det_e + log_det_r) / m - (tr / m).ln()).exp();
    if w.is_finite() {
        w.min(1.0)
    } else {
        0.0
    }
}

/// Full M x M phases, row-major, diagonal included. Finite grids keep the
/// integer index alongside so the final normalization is exact.
#[derive(Debug, Clone)]
struct RowPhases {
    m: usize,
    phases: Vec<f64>,
    index: Option<Vec<i64>>,
}

impl RowPhases {
    fn matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.m, self.m, |i, j| cis(self.phases[i * self.m + j]))
    }

    fn set(&mut self, i: usize, j: usize, phase: f64, grid: PhaseGrid) {
        self.phases[i * self.m + j] = phase;
        if let Some(idx) = self.index.as_mut() {
            idx[i * self.m + j] = grid.index_of(phase).expect("grid solver returns grid phases");
        }
    }

    fn random(m: usize, grid: PhaseGrid, rng: &mut SimRng) -> Self {
        match grid.levels() {
            None => Self { m, phases: (0..m * m).map(|_| rng.random_range(0.0..TAU)).collect(), index: None },
            Some(levels) => {
                let index: Vec<i64> = (0..m * m).map(|_| rng.random_range(0..levels) as i64).collect();
                Self { m, phases: index.iter().map(|&k| grid.phase(k)).collect(), index: Some(index) }
            }
        }
    }

    fn all_equal(&self) -> bool {
        match &self.index {
            Some(idx) => idx.iter().all(|&k| k == idx[0]),
            None => self.phases.iter().all(|&p| p == self.phases[0]),
        }
    }

    /// Removes each row's diagonal phase so the diagonal becomes zero.
    fn normalized(&self, grid: PhaseGrid) -> Result<PhaseMatrix> {
        let m = self.m;
        let phases = match (&self.index, grid.levels()) {
            (Some(idx), Some(_)) => (0..m * m)
                .map(|p| {
                    let (i, j) = (p / m, p % m);
                    if i == j {
                        0.0
                    } else {
                        grid.phase(idx[p] - idx[i * m + i])
                    }
                })
                .collect(),
            _ => (0..m * m)
                .map(|p| {
                    let (i, j) = (p / m, p % m);
                    if i == j {
                        0.0
                    } else {
                        wrap(self.phases[p] - self.phases[i * m + i])
                    }
                })
                .collect(),
        };
        let out = PhaseMatrix::new(m, phases, grid)?;
        assert!(out.as_slice().iter().all(|&p| grid.contains(p)), "normalized phases left the grid");
        Ok(out)
    }
}

/// Row vector `u` with `A conj(u)` and `B conj(u)` kept current, so each
/// scalar problem costs O(M) to form and each accepted update O(M) to apply.
struct RowForms<'a> {
    a: &'a ComplexMatrix,
    b: &'a ComplexMatrix,
    u: Vec<Complex64>,
    wa: linalg::ComplexVector,
    wb: linalg::ComplexVector,
}

impl<'a> RowForms<'a> {
    fn new(a: &'a ComplexMatrix, b: &'a ComplexMatrix, u: Vec<Complex64>) -> Self {
        let conj_u = linalg::ComplexVector::from_iterator(u.len(), u.iter().map(|z| z.conj()));
        Self { a, b, wa: a * &conj_u, wb: b * &conj_u, u }
    }

    fn problem(&self, n: usize) -> ScalarPhaseProblem {
        let m = self.u.len();
        let qa: f64 = (0..m).map(|k| (self.u[k] * self.wa[k]).re).sum();
        let qb: f64 = (0..m).map(|k| (self.u[k] * self.wb[k]).re).sum();
        let ca = self.wa[n] - self.a[(n, n)] * self.u[n].conj();
        let cb = self.wb[n] - self.b[(n, n)] * self.u[n].conj();
        let un = self.u[n];
        ScalarPhaseProblem::from_parts(qa - 2.0 * (un * ca).re, ca, qb - 2.0 * (un * cb).re, cb, m)
    }

    fn set(&mut self, n: usize, value: Complex64) {
        let delta = (value - self.u[n]).conj();
        self.u[n] = value;
        for k in 0..self.u.len() {
            self.wa[k] += self.a[(k, n)] * delta;
            self.wb[k] += self.b[(k, n)] * delta;
        }
    }
}

fn solve(p: &ScalarPhaseProblem, grid: PhaseGrid, cfg: &OptimizerConfig) -> ScalarSolution {
    if grid.is_continuous() {
        scalar::solve_phase_infinite_with(p, cfg.grid_fallback_points)
    } else {
        scalar::solve_phase_quantized_with(p, grid, cfg.grid_fallback_points)
    }
}

/// Row-by-row ascent from one initialization. `naive` rebuilds every
/// scalar problem from scratch instead of updating it incrementally.
fn ascend(
    r: &ComplexMatrix,
    grid: PhaseGrid,
    cfg: &OptimizerConfig,
    mut state: RowPhases,
    naive: bool,
) -> Result<(RowPhases, OptimizationTrace)> {
    let m = state.m;
    let log_det_r = linalg::log_abs_det(r);
    let mut e = state.matrix();
    let mut trace = OptimizationTrace { objective_per_update: vec![objective(&e, r, log_det_r)], ..Default::default() };
    for _ in 0..cfg.max_sweeps {
        let sweep_start = trace.final_objective();
        for l in 0..m {
            let saved = state.clone();
            let (a, b) = row_subproblem(&e.clone().remove_row(l), r)?;
            let mut forms = RowForms::new(&a, &b, e.row(l).iter().copied().collect());
            for n in 0..m {
                let p = if naive { ScalarPhaseProblem::from_row(&a, &b, &forms.u, n) } else { forms.problem(n) };
                let sol = solve(&p, grid, cfg);
                trace.fallback_events += usize::from(sol.used_fallback);
                // Strict improvement only; the row-level check below keeps
                // rounding noise out of the trace.
                if sol.cost > scalar_phase_cost(&p, state.phases[l * m + n]) {
                    forms.set(n, cis(sol.phase));
                    state.set(l, n, sol.phase, grid);
                }
            }
            let candidate = state.matrix();
            let value = objective(&candidate, r, log_det_r);
            if value >= trace.final_objective() {
                e = candidate;
                trace.objective_per_update.push(value);
            } else {
                state = saved;
                trace.objective_per_update.push(trace.final_objective());
            }
        }
        trace.sweeps += 1;
        let gain = trace.final_objective() - sweep_start;
        if gain < cfg.rel_tol * sweep_start.abs() {
            break;
        }
    }
    Ok((state, trace))
}

fn random_start(m: usize, grid: PhaseGrid, rng: &mut SimRng, attempts: &mut usize) -> Result<RowPhases> {
    while *attempts < MAX_INIT_ATTEMPTS {
        *attempts += 1;
        let s = RowPhases::random(m, grid, rng);
        if s.all_equal() {
            continue;
        }
        let e = s.matrix();
        let ok = (0..m).all(|l| row_subproblem(&e.clone().remove_row(l), &linalg::identity(m)).is_ok())
            && linalg::log_abs_det(&e).is_finite()
            && linalg::log_abs_det(&e) - 0.5 * m as f64 * (m as f64).ln() > -20.0;
        if ok {
            return Ok(s);
        }
    }
    Err(HimapError::RankDeficient(format!("no non-singular initialization in {MAX_INIT_ATTEMPTS} draws")))
}

/// Optimizes the network phases for covariance `r_hat`. Runs
/// `cfg.restarts` independent initializations and keeps the whitest.
pub fn optimize_psn(
    r_hat: &ComplexMatrix,
    grid: PhaseGrid,
    cfg: &OptimizerConfig,
    rng: &mut SimRng,
) -> Result<(PhaseMatrix, OptimizationTrace)> {
    optimize_psn_impl(r_hat, grid, cfg, rng, false)
}

fn optimize_psn_impl(
    r_hat: &ComplexMatrix,
    grid: PhaseGrid,
    cfg: &OptimizerConfig,
    rng: &mut SimRng,
    naive: bool,
) -> Result<(PhaseMatrix, OptimizationTrace)> {
    cfg.validate()?;
    let m = linalg::ensure_square(r_hat, "covariance")?;
    linalg::ensure_hermitian(r_hat)?;
    if m < 2 {
        return Err(HimapError::Dimension("a phase-shifter network needs at least two antennas".into()));
    }
    if let Some((index, &value)) = linalg::eigvalsh(r_hat).iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(HimapError::NotPositiveDefinite { index, value });
    }
    let mut best: Option<(RowPhases, OptimizationTrace)> = None;
    let mut attempts = 0;
    for _ in 0..cfg.restarts {
        let mut run_rng = rng::fork(rng);
        let (state, mut trace) = loop {
            let start = random_start(m, grid, &mut run_rng, &mut attempts)?;
            match ascend(r_hat, grid, cfg, start, naive) {
                Ok(done) => break done,
                Err(HimapError::RankDeficient(_)) => continue,
                Err(e) => return Err(e),
            }
        };
        trace.init_attempts = attempts;
        debug_assert!(trace.is_monotone());
        if best.as_ref().is_none_or(|(_, t)| trace.final_objective() > t.final_objective()) {
            best = Some((state, trace));
        }
    }
    let (state, mut trace) = best.expect("at least one restart");
    trace.init_attempts = attempts;
    Ok((state.normalized(grid)?, trace))
}
