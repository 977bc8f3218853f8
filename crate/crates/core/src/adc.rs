//! Finite-resolution ADC model.
//!
//! Each antenna has two rails (I and Q), each digitized by a saturating
//! mid-rise uniform quantizer. With auto gain the full scale of every rail is
//! set from that rail's RMS before quantizing.

use std::f64::consts::PI;

use crate::error::{HimapError, Result};
use crate::linalg::{self, ComplexMatrix};
use crate::rng::SimRng;
use crate::scenario::{self, ChannelRealization, SampleBlock};

/// Full-scale-to-RMS loading at which the granular noise of a uniform
/// quantizer, `delta^2 / 12`, equals `rho * sigma^2` for every bit count:
/// `c^2 / (3 * 4^b) = (pi sqrt(3) / 2) 4^-b` gives `c = sqrt(3 pi sqrt(3) / 2)`.
pub const MODEL_MATCHED_HEADROOM: f64 = 2.856_938_420_591_872;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdcConfig {
    /// Bit count of the simulated quantizer; `f64::INFINITY` disables it.
    pub enob: f64,
    /// Per-rail clip amplitude used when `auto_gain` is off.
    pub full_scale: f64,
    pub auto_gain: bool,
    /// Full scale as a multiple of the rail RMS under auto gain.
    pub headroom: f64,
}

impl Default for AdcConfig {
    fn default() -> Self {
        Self { enob: 12.0, full_scale: 1.0, auto_gain: true, headroom: MODEL_MATCHED_HEADROOM }
    }
}

impl AdcConfig {
    pub fn with_bits(enob: f64) -> Self {
        Self { enob, ..Default::default() }
    }

    pub fn ideal() -> Self {
        Self::with_bits(f64::INFINITY)
    }

    pub fn is_ideal(&self) -> bool {
        self.enob.is_infinite()
    }

    pub fn bits(&self) -> Option<u32> {
        if self.is_ideal() {
            None
        } else {
            Some(self.enob.round().max(1.0) as u32)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.enob > 0.0) || !(self.full_scale > 0.0) || !(self.headroom > 0.0) {
            return Err(HimapError::InvalidConfig(format!(
                "ADC needs enob > 0, full_scale > 0, headroom > 0 (got {self:?})"
            )));
        }
        if self.full_scale.is_infinite() || self.headroom.is_infinite() {
            return Err(HimapError::InvalidConfig("ADC full scale must be finite".into()));
        }
        Ok(())
    }

    pub fn noise_model(&self) -> QuantNoiseModel {
        QuantNoiseModel::new(self.enob, self.full_scale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantNoiseModel {
    pub rho: f64,
    pub delta: f64,
}

impl QuantNoiseModel {
    pub fn new(enob: f64, full_scale: f64) -> Self {
        if enob.is_infinite() {
            return Self { rho: 0.0, delta: 0.0 };
        }
        let rho = PI * 3f64.sqrt() / 2.0 * 2f64.powf(-2.0 * enob);
        let bits = enob.round().max(1.0);
        Self { rho, delta: 2.0 * full_scale / 2f64.powf(bits) }
    }
}

/// Quantizer output plus the per-rail full scales that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantized {
    pub block: SampleBlock,
    /// `2M` entries: antenna 0 I, antenna 0 Q, antenna 1 I, ...
    /// Empty for an ideal ADC.
    pub full_scales: Vec<f64>,
    pub bits: Option<u32>,
}

impl Quantized {
    /// Quantization interval of each rail.
    pub fn deltas(&self) -> Vec<f64> {
        match self.bits {
            None => vec![0.0; self.full_scales.len()],
            Some(b) => self.full_scales.iter().map(|fs| 2.0 * fs / 2f64.powi(b as i32)).collect(),
        }
    }

    /// `sqrt(mean delta^2)` over rails, the scalar used for regularization.
    pub fn delta_rms(&self) -> f64 {
        let d = self.deltas();
        if d.is_empty() {
            return 0.0;
        }
        (d.iter().map(|x| x * x).sum::<f64>() / d.len() as f64).sqrt()
    }
}

#[inline]
fn quantize_scalar(x: f64, delta: f64, levels_half: f64) -> f64 {
    let k = (x / delta).floor().clamp(-levels_half, levels_half - 1.0);
    delta * (k + 0.5)
}

fn rail_rms(block: &SampleBlock, row: usize, imag: bool) -> f64 {
    let n = block.len().max(1) as f64;
    let s: f64 = block.samples.row(row).iter().map(|z| if imag { z.im * z.im } else { z.re * z.re }).sum();
    (s / n).sqrt()
}

/// Quantizes every rail independently.
pub fn quantize(block: &SampleBlock, adc: &AdcConfig) -> Result<Quantized> {
    adc.validate()?;
    block.ensure_finite()?;
    let bits = match adc.bits() {
        None => return Ok(Quantized { block: block.clone(), full_scales: vec![], bits: None }),
        Some(b) => b,
    };
    let m = block.m();
    let full_scales: Vec<f64> = (0..2 * m)
        .map(|rail| {
            if adc.auto_gain {
                let rms = rail_rms(block, rail / 2, rail % 2 == 1);
                if rms > 0.0 {
                    adc.headroom * rms
                } else {
                    adc.full_scale
                }
            } else {
                adc.full_scale
            }
        })
        .collect();
    Ok(quantize_with_scales(block, bits, &full_scales))
}

/// Quantizes with fixed per-rail full scales.
pub fn quantize_with_scales(block: &SampleBlock, bits: u32, full_scales: &[f64]) -> Quantized {
    let m = block.m();
    assert_eq!(full_scales.len(), 2 * m, "one full scale per rail");
    let levels_half = 2f64.powi(bits as i32 - 1);
    let deltas: Vec<f64> = full_scales.iter().map(|fs| 2.0 * fs / 2f64.powi(bits as i32)).collect();
    let mut out = block.samples.clone();
    for row in 0..m {
        let (dr, di) = (deltas[2 * row], deltas[2 * row + 1]);
        for col in 0..block.len() {
            let z = out[(row, col)];
            out[(row, col)] = linalg::c(quantize_scalar(z.re, dr, levels_half), quantize_scalar(z.im, di, levels_half));
        }
    }
    Quantized {
        block: SampleBlock { samples: out, sample_index_origin: block.sample_index_origin },
        full_scales: full_scales.to_vec(),
        bits: Some(bits),
    }
}

/// `SIR + 6.02 ENOB - 4.35` in dB.
pub fn predicted_sqnr_db(sir_db: f64, enob: f64) -> f64 {
    sir_db + 6.02 * enob - 4.35
}

/// Adds the quantization-noise variance `delta^2 / 12` to the diagonal.
pub fn regularize_covariance(r_hat: &ComplexMatrix, delta: f64) -> Result<ComplexMatrix> {
    linalg::ensure_hermitian(r_hat)?;
    let n = r_hat.nrows();
    Ok(r_hat + linalg::identity(n).scale(delta * delta / 12.0))
}

/// Signal power over measured quantization-noise power for `n` fresh samples
/// through the bypassed array: `tr(sigma_x^2 h h^H) / tr(R_q)`.
pub fn empirical_sqnr_db(real: &ChannelRealization, adc: &AdcConfig, n: usize, rng: &mut SimRng) -> Result<f64> {
    let y = scenario::generate_block(real, n, rng);
    let q = quantize(&y, adc)?;
    let noise: f64 = (&q.block.samples - &y.samples).iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
    if noise == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(linalg::db(real.sigma_x2 * real.h.norm_squared() / noise))
}
