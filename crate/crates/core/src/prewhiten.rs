//! Phase-shifter networks, the ideal prewhitener, and the metrics used to
//! compare them.

use std::f64::consts::TAU;

use rand_distr::{Distribution, Normal};

use crate::error::{HimapError, Result};
use crate::linalg::{self, cis, ComplexMatrix};
use crate::rng::SimRng;
use crate::scenario::ChannelRealization;

/// Phase resolution of the shifters. `bits: None` is a continuous phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PhaseGrid {
    pub bits: Option<u32>,
}

impl PhaseGrid {
    pub const CONTINUOUS: PhaseGrid = PhaseGrid { bits: None };

    pub fn bits(b: u32) -> Self {
        assert!((1..=30).contains(&b), "phase grid bits must be in 1..=30");
        Self { bits: Some(b) }
    }

    pub fn is_continuous(&self) -> bool {
        self.bits.is_none()
    }

    pub fn levels(&self) -> Option<u64> {
        self.bits.map(|b| 1u64 << b)
    }

    pub fn step(&self) -> Option<f64> {
        self.levels().map(|l| TAU / l as f64)
    }

    /// Phase of grid index `k` (taken modulo the level count).
    pub fn phase(&self, k: i64) -> f64 {
        let levels = self.levels().expect("finite grid") as i64;
        TAU * k.rem_euclid(levels) as f64 / levels as f64
    }

    /// Index of an on-grid phase, if it is one.
    pub fn index_of(&self, phase: f64) -> Option<i64> {
        let step = self.step()?;
        let k = (wrap(phase) / step).round();
        let levels = self.levels().unwrap() as f64;
        let k = if k >= levels { 0.0 } else { k };
        ((wrap(phase) - k * step).abs() < 1e-9 || (wrap(phase) - TAU).abs() < 1e-9).then_some(k as i64)
    }

    pub fn contains(&self, phase: f64) -> bool {
        match self.bits {
            None => phase.is_finite(),
            Some(_) => self.index_of(phase).is_some(),
        }
    }

    /// Nearest allowed phase in `[0, 2pi)`.
    pub fn snap(&self, phase: f64) -> f64 {
        match self.step() {
            None => wrap(phase),
            Some(step) => self.phase((wrap(phase) / step).round() as i64),
        }
    }
}

/// Wraps a phase into `[0, 2pi)`.
pub fn wrap(phase: f64) -> f64 {
    let w = phase.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Phases of an M x M network, row-major, with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMatrix {
    m: usize,
    phases: Vec<f64>,
    grid: PhaseGrid,
}

impl PhaseMatrix {
    pub fn new(m: usize, phases: Vec<f64>, grid: PhaseGrid) -> Result<Self> {
        if phases.len() != m * m {
            return Err(HimapError::Dimension(format!("{} phases for a {m}x{m} network", phases.len())));
        }
        for i in 0..m {
            if phases[i * m + i] != 0.0 {
                return Err(HimapError::InvalidConfig(format!("diagonal phase ({i},{i}) must be 0")));
            }
        }
        if let Some(bad) = phases.iter().position(|&p| !grid.contains(p)) {
            return Err(HimapError::InvalidConfig(format!(
                "phase {} at ({}, {}) is not on the {:?} grid",
                phases[bad],
                bad / m,
                bad % m,
                grid
            )));
        }
        Ok(Self { m, phases: phases.into_iter().map(wrap).collect(), grid })
    }

    pub fn zeros(m: usize, grid: PhaseGrid) -> Self {
        Self { m, phases: vec![0.0; m * m], grid }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn grid(&self) -> PhaseGrid {
        self.grid
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.phases[row * self.m + col]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.phases
    }

    /// Nominal phases plus i.i.d. `N(0, sigma^2)` errors on every shifter
    /// (off-diagonal entry). The result is off-grid, so it carries a
    /// continuous grid.
    pub fn perturbed(&self, sigma_rad: f64, rng: &mut SimRng) -> Self {
        if sigma_rad <= 0.0 {
            return self.clone();
        }
        let normal = Normal::new(0.0, sigma_rad).expect("finite sigma");
        let mut phases = self.phases.clone();
        for i in 0..self.m {
            for j in 0..self.m {
                if i != j {
                    phases[i * self.m + j] = wrap(phases[i * self.m + j] + normal.sample(rng));
                }
            }
        }
        Self { m: self.m, phases, grid: PhaseGrid::CONTINUOUS }
    }
}

/// Entrywise `exp(j phi)`; every entry has unit modulus.
#[derive(Debug, Clone, PartialEq)]
pub struct PsnMatrix {
    pub e: ComplexMatrix,
}

pub fn psn_matrix(phi: &PhaseMatrix) -> PsnMatrix {
    let m = phi.m();
    PsnMatrix { e: ComplexMatrix::from_fn(m, m, |i, j| cis(phi.get(i, j))) }
}

/// `R^{-1/2} = Sigma^{-1/2} U^H` from `R = U Sigma U^H`.
pub fn ideal_prewhitener(r: &ComplexMatrix) -> Result<ComplexMatrix> {
    linalg::ensure_hermitian(r)?;
    let eig = linalg::eigh(r)?;
    if let Some((index, &value)) = eig.values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(HimapError::NotPositiveDefinite { index, value });
    }
    let m = r.nrows();
    let mut w = eig.vectors.adjoint();
    for i in 0..m {
        let s = eig.values[i].sqrt().recip();
        w.row_mut(i).iter_mut().for_each(|z| *z *= s);
    }
    Ok(w)
}

/// Below this Hadamard ratio `|det E| / prod ||row||` the network is treated
/// as singular.
const SINGULAR_RATIO: f64 = 1e-12;

/// Geometric over arithmetic mean of the eigenvalues of `W R W^H` for a
/// general analog stage `W`.
pub fn whiteness_of(w: &ComplexMatrix, r: &ComplexMatrix) -> Result<f64> {
    linalg::ensure_hermitian(r)?;
    let m = w.nrows();
    let row_norms: f64 = (0..m).map(|i| w.row(i).norm().ln()).sum();
    if linalg::log_abs_det(w) - row_norms < SINGULAR_RATIO.ln() {
        return Ok(0.0);
    }
    if linalg::eigvalsh(r).iter().any(|&l| !(l > 0.0)) {
        return Ok(0.0);
    }
    // Log-determinants keep the geometric mean accurate when the output
    // covariance is badly conditioned.
    let mean_log = (2.0 * linalg::log_abs_det(w) + linalg::log_abs_det(r)) / m as f64;
    let mean = linalg::trace_re(&(w * r * w.adjoint())) / m as f64;
    Ok((mean_log - mean.ln()).exp().min(1.0))
}

/// Whiteness of the PSN output covariance `E R E^H`.
pub fn whiteness(phi: &PhaseMatrix, r: &ComplexMatrix) -> Result<f64> {
    whiteness_of(&psn_matrix(phi).e, r)
}

/// SINR at the ADC inputs behind analog stage `w`.
pub fn pre_adc_sinr(w: &ComplexMatrix, real: &ChannelRealization) -> Result<f64> {
    let wh = w * &real.h;
    let cz = real.interference_noise_covariance();
    let denom = linalg::trace_re(&(w * cz * w.adjoint()));
    if !(denom > 0.0) {
        return Err(HimapError::ZeroDenominator("pre-ADC SINR"));
    }
    Ok(wh.norm_squared() * real.sigma_x2 / denom)
}

/// Prewhitened SINR predicted from the MMSE output SINR.
pub fn lemma1_sinr(rho_mmse: f64, m: usize) -> f64 {
    let t = if rho_mmse.is_infinite() { 1.0 } else { rho_mmse / (1.0 + rho_mmse) };
    t / (m as f64 - t)
}
