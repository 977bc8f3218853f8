//! One end-to-end run of the receiver: train on the bypassed array, set the
//! analog stage, detect the preamble, beamform, and score.

use num_complex::Complex64;

use crate::adc::{quantize, regularize_covariance, AdcConfig};
use crate::detect::{self, detect_and_sync, exact_mmse_weights, mmse_weights, ppsinr_real, DetectionConfig, Preamble};
use crate::error::{HimapError, Result};
use crate::linalg::{self, ComplexMatrix};
use crate::prewhiten::{ideal_prewhitener, pre_adc_sinr, psn_matrix, whiteness_of, PhaseGrid};
use crate::psn_opt::{optimize_psn, OptimizationTrace, OptimizerConfig};
use crate::rng::SimRng;
use crate::scenario::{generate_block, generate_block_with, realize_channel, ChannelRealization, ScenarioConfig};

/// Gaussian error on every shifter phase, applied to the optimized network.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseErrorModel {
    pub sigma_deg: f64,
}

impl PhaseErrorModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_deg >= 0.0 && self.sigma_deg.is_finite()) {
            return Err(HimapError::InvalidConfig(format!("phase error sigma {} must be >= 0", self.sigma_deg)));
        }
        Ok(())
    }
}

/// What sits between the antennas and the ADCs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalogStage {
    /// Optimized phase-shifter network.
    Psn(PhaseGrid),
    /// Unconstrained `R^{-1/2}` from the training covariance.
    Ideal,
    /// Nothing: digital processing only.
    Bypass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub stage: AnalogStage,
    pub adc: AdcConfig,
    pub optimizer: OptimizerConfig,
    pub detector: DetectionConfig,
    pub phase_error: PhaseErrorModel,
    /// Start of the preamble in the detection stream.
    pub preamble_offset: usize,
    /// Payload samples after the preamble.
    pub payload_len: usize,
    /// Fresh samples for the realized-SINR estimate; 0 skips it.
    pub n_eval: usize,
    /// Use true covariance and channel instead of sample estimates, for
    /// both the analog stage and the beamformer.
    pub exact_estimates: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            stage: AnalogStage::Psn(PhaseGrid::bits(6)),
            adc: AdcConfig::default(),
            optimizer: OptimizerConfig::default(),
            detector: DetectionConfig::default(),
            phase_error: PhaseErrorModel::default(),
            preamble_offset: 200,
            payload_len: 100,
            n_eval: 20_000,
            exact_estimates: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub pre_adc_sinr_db: f64,
    /// Whiteness of the engaged analog stage against the true covariance.
    pub whiteness: f64,
    pub detected: bool,
    pub p_sync: Option<usize>,
    pub sync_correct: bool,
    /// Detection statistic of the window aligned with the preamble.
    pub theta_at_offset: f64,
    /// Statistics of the windows that end before the preamble starts.
    pub null_thetas: Vec<f64>,
    pub gamma: f64,
    /// `NaN` when not evaluated.
    pub ppsinr_db: f64,
    /// Output SINR of the ideal unquantized MMSE receiver.
    pub mmse_sinr_db: f64,
    pub trace: Option<OptimizationTrace>,
}

/// Step 1: bypassed, quantized training covariance with the quantization
/// variance loaded on the diagonal.
pub fn training_covariance(
    scenario: &ScenarioConfig,
    real: &ChannelRealization,
    adc: &AdcConfig,
    rng: &mut SimRng,
) -> Result<ComplexMatrix> {
    let block = generate_block(real, scenario.l1, rng);
    let q = quantize(&block, adc)?;
    regularize_covariance(&q.block.sample_covariance(), q.delta_rms())
}

/// Step 2 plus the engagement of step 3: the analog matrix designed from
/// `r_hat` alone, with the phase errors of the physical shifters applied.
pub fn analog_stage(
    r_hat: &ComplexMatrix,
    cfg: &PipelineConfig,
    rng: &mut SimRng,
) -> Result<(ComplexMatrix, Option<OptimizationTrace>)> {
    let m = r_hat.nrows();
    Ok(match cfg.stage {
        AnalogStage::Bypass => (linalg::identity(m), None),
        AnalogStage::Ideal => (ideal_prewhitener(r_hat)?, None),
        AnalogStage::Psn(grid) => {
            let (phi, trace) = optimize_psn(r_hat, grid, &cfg.optimizer, rng)?;
            if !trace.is_monotone() {
                return Err(HimapError::InvalidConfig("optimizer trace decreased".into()));
            }
            let engaged = phi.perturbed(cfg.phase_error.sigma_deg.to_radians(), rng);
            (psn_matrix(&engaged).e, Some(trace))
        }
    })
}

pub fn run_himap_pipeline(scenario: &ScenarioConfig, cfg: &PipelineConfig, rng: &mut SimRng) -> Result<TrialRecord> {
    let real = realize_channel(scenario, rng)?;
    run_pipeline_on(scenario, &real, cfg, rng)
}

/// The five steps for an already drawn channel.
pub fn run_pipeline_on(
    scenario: &ScenarioConfig,
    real: &ChannelRealization,
    cfg: &PipelineConfig,
    rng: &mut SimRng,
) -> Result<TrialRecord> {
    cfg.phase_error.validate()?;
    cfg.detector.validate()?;
    let r_true = real.received_covariance();

    // Step 1
    let r_hat = if cfg.exact_estimates { r_true.clone() } else { training_covariance(scenario, real, &cfg.adc, rng)? };

    // Step 2 sees only the covariance estimate.
    let (e, trace) = analog_stage(&r_hat, cfg, rng)?;
    let whiteness = whiteness_of(&e, &r_true)?;
    let pre_adc = pre_adc_sinr(&e, real)?;

    // Steps 3 and 4: silence, preamble, payload, all through the engaged stage.
    let l2 = scenario.l2;
    let preamble = Preamble::qpsk(l2, rng)?;
    let amp = real.sigma_x2.sqrt();
    let zero = Complex64::new(0.0, 0.0);
    let mut symbols = vec![zero; cfg.preamble_offset];
    symbols.extend(preamble.symbols.iter().map(|x| x * amp));
    symbols.extend((0..cfg.payload_len).map(|_| crate::scenario::complex_gaussian(rng, real.sigma_x2)));
    let stream = generate_block_with(real, &symbols, rng).transformed(&e);
    let q = quantize(&stream, &cfg.adc)?;
    let det_cfg = DetectionConfig { delta: q.delta_rms(), ..cfg.detector };
    let det = detect_and_sync(&q.block, &preamble, &det_cfg)?;
    let theta_at_offset = det.theta_trace[cfg.preamble_offset];
    let null_end = (cfg.preamble_offset + 1).saturating_sub(l2);
    let null_thetas = det.theta_trace[..null_end].to_vec();
    let sync_correct = det.p_sync == Some(cfg.preamble_offset);

    // Step 5: beamform on the detected window, or on the true one if the
    // detector missed so the realized SINR is still defined.
    let ppsinr_db = if cfg.n_eval == 0 {
        f64::NAN
    } else {
        let w = if cfg.exact_estimates {
            exact_mmse_weights(&e, real)?
        } else {
            let p = det.p_sync.unwrap_or(cfg.preamble_offset);
            mmse_weights(&q.block, &preamble, p, q.delta_rms())?
        };
        ppsinr_real(&w, &e, real, &cfg.adc, cfg.n_eval, rng)?
    };

    Ok(TrialRecord {
        pre_adc_sinr_db: linalg::db(pre_adc),
        whiteness,
        detected: det.detected,
        p_sync: det.p_sync,
        sync_correct,
        theta_at_offset,
        null_thetas,
        gamma: det.gamma,
        ppsinr_db,
        mmse_sinr_db: linalg::db(real.mmse_sinr()?),
        trace,
    })
}

/// Detection probability and empirical false-alarm rate at threshold
/// `far` over a set of trial records.
pub fn roc_point(records: &[TrialRecord], m: usize, l2: usize, far: f64) -> Result<(f64, f64)> {
    let gamma = detect::beta_threshold(m, l2, far)?;
    if records.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let pd = records.iter().filter(|r| r.theta_at_offset >= gamma).count() as f64 / records.len() as f64;
    let (hits, total) = records.iter().fold((0usize, 0usize), |(h, t), r| {
        (h + r.null_thetas.iter().filter(|&&x| x >= gamma).count(), t + r.null_thetas.len())
    });
    let fa = if total == 0 { f64::NAN } else { hits as f64 / total as f64 };
    Ok((pd, fa))
}
