//! CFAR preamble detection, timing synchronization and digital MMSE
//! beamforming on the (prewhitened, quantized) stream.
//!
//! The detector correlates each length-`L2` window with the known preamble
//! and normalizes by the window covariance:
//! `theta_p = r(p)^H R(p)^{-1} r(p) / sum |x_n|^2`. Without a preamble this
//! is `Beta(M, L2 - M)` whatever the noise covariance, which fixes the
//! threshold for a target false-alarm rate.

use num_complex::Complex64;
use rand::Rng;
use statrs::function::beta::beta_reg;

use crate::adc::{quantize, AdcConfig};
use crate::error::{HimapError, Result};
use crate::linalg::{self, ComplexMatrix, ComplexVector};
use crate::rng::SimRng;
use crate::scenario::{gaussian_symbols, generate_block_with, ChannelRealization, SampleBlock};

/// Reported instead of dividing by a vanishing PPSINR denominator.
pub const PPSINR_CAP_DB: f64 = 300.0;
const PPSINR_MIN_DENOM: f64 = 1e-30;

#[derive(Debug, Clone, PartialEq)]
pub struct Preamble {
    pub symbols: Vec<Complex64>,
    pub energy: f64,
}

impl Preamble {
    pub fn new(symbols: Vec<Complex64>) -> Result<Self> {
        let energy: f64 = symbols.iter().map(|x| x.norm_sqr()).sum();
        if !(energy > 0.0 && energy.is_finite()) {
            return Err(HimapError::InvalidConfig("preamble energy must be positive".into()));
        }
        Ok(Self { symbols, energy })
    }

    /// Unit-modulus QPSK symbols, so the energy is exactly `len`.
    pub fn qpsk(len: usize, rng: &mut SimRng) -> Result<Self> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let symbols = (0..len)
            .map(|_| {
                let re = if rng.random::<bool>() { s } else { -s };
                let im = if rng.random::<bool>() { s } else { -s };
                Complex64::new(re, im)
            })
            .collect();
        Self::new(symbols).map(|p| Self { energy: len as f64, ..p })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { symbols: self.symbols.iter().map(|x| x * c).collect(), energy: self.energy * c * c }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionConfig {
    pub far_target: f64,
    /// Samples after the first exceedance searched for the correlation peak.
    pub q_window: usize,
    /// Quantization step of the ADC feeding the detector (0 for an ideal
    /// converter); every window covariance is loaded with `L2 delta^2 / 12`.
    pub delta: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self { far_target: 1e-4, q_window: 100, delta: 0.0 }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.far_target > 0.0 && self.far_target < 1.0) {
            return Err(HimapError::OutOfRange(format!("false-alarm rate {} not in (0, 1)", self.far_target)));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(HimapError::OutOfRange(format!("quantization step {} must be >= 0", self.delta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub detected: bool,
    /// Start index of the synchronized window within the stream.
    pub p_sync: Option<usize>,
    pub theta_trace: Vec<f64>,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerWeights {
    pub w: ComplexVector,
    pub h_eff_estimate: ComplexVector,
    /// Regularized per-sample window covariance.
    pub r_tilde: ComplexMatrix,
    pub sigma_x2_estimate: f64,
}

fn check_window(stream: &SampleBlock, p: usize, l2: usize) -> Result<()> {
    if l2 == 0 || p + l2 > stream.len() {
        return Err(HimapError::OutOfRange(format!(
            "window [{p}, {}) exceeds a stream of {} samples",
            p + l2,
            stream.len()
        )));
    }
    Ok(())
}

/// `r(p) = sum_n y_{p+n} conj(x_n)` over the window starting at sample `p`.
pub fn cross_correlation(stream: &SampleBlock, preamble: &Preamble, p: usize) -> Result<ComplexVector> {
    check_window(stream, p, preamble.len())?;
    let m = stream.m();
    let mut r = ComplexVector::zeros(m);
    for (n, x) in preamble.symbols.iter().enumerate() {
        let xc = x.conj();
        for i in 0..m {
            r[i] += stream.samples[(i, p + n)] * xc;
        }
    }
    Ok(r)
}

/// `R(p) = sum_n y_{p+n} y_{p+n}^H` over `l2` samples starting at `p`.
pub fn windowed_covariance(stream: &SampleBlock, p: usize, l2: usize) -> Result<ComplexMatrix> {
    check_window(stream, p, l2)?;
    let win = stream.samples.columns(p, l2);
    Ok(win * win.adjoint())
}

/// Slides a window covariance by one sample.
pub fn recursive_update(prev: &ComplexMatrix, departing: &ComplexVector, arriving: &ComplexVector) -> ComplexMatrix {
    prev - departing * departing.adjoint() + arriving * arriving.adjoint()
}

fn regularized_inverse_apply(
    r: &ComplexMatrix,
    load: f64,
    v: &ComplexVector,
) -> Result<(ComplexMatrix, ComplexVector)> {
    let m = r.nrows();
    let loaded = r + linalg::identity(m).scale(load);
    if let Ok(x) = linalg::solve_hpd(&loaded, v) {
        return Ok((loaded, x));
    }
    let jitter = 1e-12 * linalg::trace_re(r).abs().max(f64::MIN_POSITIVE) / m as f64;
    let jittered = &loaded + linalg::identity(m).scale(jitter);
    let x = linalg::solve_hpd(&jittered, v)
        .map_err(|_| HimapError::Singular("window covariance is singular after regularization".into()))?;
    Ok((jittered, x))
}

/// `theta = r^H R^{-1} r / energy`, clamped to `[0, 1]`.
pub fn test_statistic(r_p: &ComplexVector, big_r: &ComplexMatrix, preamble_energy: f64) -> Result<f64> {
    if !(preamble_energy > 0.0) {
        return Err(HimapError::ZeroDenominator("preamble energy"));
    }
    if r_p.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return Ok(0.0);
    }
    let (_, x) = regularized_inverse_apply(big_r, 0.0, r_p)?;
    let q = r_p.dotc(&x).re / preamble_energy;
    Ok(q.clamp(0.0, 1.0))
}

/// Threshold `Gamma` with `P(theta >= Gamma) = far` for
/// `theta ~ Beta(m, l2 - m)`.
pub fn beta_threshold(m: usize, l2: usize, far: f64) -> Result<f64> {
    if m == 0 || l2 <= m {
        return Err(HimapError::OutOfRange(format!("need l2 > m >= 1, got m={m}, l2={l2}")));
    }
    if !(far > 0.0 && far < 1.0) {
        return Err(HimapError::OutOfRange(format!("false-alarm rate {far} not in (0, 1)")));
    }
    let (a, b) = (m as f64, (l2 - m) as f64);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if 1.0 - beta_reg(a, b, mid) > far {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `theta_p` for every window start, with the covariance slid recursively
/// and recomputed from scratch every `l2` shifts.
pub fn theta_scan(stream: &SampleBlock, preamble: &Preamble, delta: f64) -> Result<Vec<f64>> {
    let l2 = preamble.len();
    check_window(stream, 0, l2)?;
    let load = l2 as f64 * delta * delta / 12.0;
    let mut big_r = windowed_covariance(stream, 0, l2)?;
    let mut out = Vec::with_capacity(stream.len() - l2 + 1);
    for p in 0..=stream.len() - l2 {
        if p > 0 {
            big_r = if p % l2 == 0 {
                windowed_covariance(stream, p, l2)?
            } else {
                recursive_update(&big_r, &stream.snapshot(p - 1), &stream.snapshot(p + l2 - 1))
            };
        }
        let r = cross_correlation(stream, preamble, p)?;
        let loaded = &big_r + linalg::identity(stream.m()).scale(load);
        out.push(test_statistic(&r, &loaded, preamble.energy)?);
    }
    Ok(out)
}

/// Scans the stream; the first window at or above the threshold starts a
/// search of `q_window` further windows for the correlation peak.
pub fn detect_and_sync(stream: &SampleBlock, preamble: &Preamble, cfg: &DetectionConfig) -> Result<DetectionResult> {
    cfg.validate()?;
    let gamma = beta_threshold(stream.m(), preamble.len(), cfg.far_target)?;
    let theta = theta_scan(stream, preamble, cfg.delta)?;
    let first = theta.iter().position(|&t| t >= gamma);
    let p_sync = first.map(|p_bar| {
        let end = (p_bar + cfg.q_window).min(theta.len() - 1);
        (p_bar..=end).fold(p_bar, |best, p| if theta[p] > theta[best] { p } else { best })
    });
    Ok(DetectionResult { detected: first.is_some(), p_sync, theta_trace: theta, gamma })
}

/// Effective channel, signal power and MMSE weights from the synchronized
/// preamble window: `w = R(p)^{-1} r(p) / (energy / L2)`.
pub fn mmse_weights(stream: &SampleBlock, preamble: &Preamble, p_sync: usize, delta: f64) -> Result<BeamformerWeights> {
    let l2 = preamble.len();
    let r = cross_correlation(stream, preamble, p_sync)?;
    let big_r = windowed_covariance(stream, p_sync, l2)?;
    let (loaded, solved) = regularized_inverse_apply(&big_r, l2 as f64 * delta * delta / 12.0, &r)?;
    let sigma_x2_estimate = preamble.energy / l2 as f64;
    let w = solved.unscale(sigma_x2_estimate);
    if w.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(HimapError::Singular("beamformer weights are not finite".into()));
    }
    Ok(BeamformerWeights {
        w,
        h_eff_estimate: r.unscale(preamble.energy),
        r_tilde: loaded.unscale(l2 as f64),
        sigma_x2_estimate,
    })
}

/// Weights from exact second-order statistics: `w = sigma_x^2 R_y^{-1} h`
/// for the analog stage `e` (no estimation error).
pub fn exact_mmse_weights(e: &ComplexMatrix, real: &ChannelRealization) -> Result<BeamformerWeights> {
    let h = e * &real.h;
    let ry = e * real.received_covariance() * e.adjoint();
    let w = linalg::solve_hpd(&ry, &h)?.scale(real.sigma_x2);
    Ok(BeamformerWeights { w, h_eff_estimate: h, r_tilde: ry, sigma_x2_estimate: real.sigma_x2 })
}

/// Realized post-processing SINR in dB: `|w^H E h|^2 sigma_x^2` over the
/// empirical power of `w^H (y~ - E h x)` across `n_eval` fresh samples
/// passed through `e` and the ADC.
pub fn ppsinr_real(
    w: &BeamformerWeights,
    e: &ComplexMatrix,
    real: &ChannelRealization,
    adc: &AdcConfig,
    n_eval: usize,
    rng: &mut SimRng,
) -> Result<f64> {
    if n_eval == 0 {
        return Err(HimapError::InvalidConfig("n_eval must be positive".into()));
    }
    let x = gaussian_symbols(n_eval, real.sigma_x2, rng);
    let y = generate_block_with(real, &x, rng).transformed(e);
    let yq = quantize(&y, adc)?.block;
    let eh = e * &real.h;
    let mut denom = 0.0;
    for (n, xn) in x.iter().enumerate() {
        let mut out = Complex64::new(0.0, 0.0);
        for i in 0..real.m() {
            out += w.w[i].conj() * (yq.samples[(i, n)] - eh[i] * xn);
        }
        denom += out.norm_sqr();
    }
    denom /= n_eval as f64;
    let num = w.w.dotc(&eh).norm_sqr() * real.sigma_x2;
    if denom < PPSINR_MIN_DENOM {
        return Ok(PPSINR_CAP_DB);
    }
    Ok(linalg::db(num / denom).min(PPSINR_CAP_DB))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, frobenius};
    use crate::rng;
    use crate::scenario::{complex_gaussian, realize_channel, ScenarioConfig};
    use statrs::distribution::{Beta, ContinuousCDF};

    fn noise_stream(m: usize, n: usize, rg: &mut SimRng) -> SampleBlock {
        SampleBlock::new(ComplexMatrix::from_fn(m, n, |_, _| complex_gaussian(rg, 1.0)))
    }

    #[test]
    fn correlation_examples() {
        let mut rg = rng::root(1);
        let pre = Preamble::qpsk(50, &mut rg).unwrap();
        assert_eq!(pre.energy, 50.0);
        let h = ComplexVector::from_vec(vec![c(0.3, -1.0), c(2.0, 0.5)]);
        let mut y = ComplexMatrix::zeros(2, 120);
        for (n, x) in pre.symbols.iter().enumerate() {
            y.set_column(40 + n, &(&h * *x));
        }
        let stream = SampleBlock::new(y);
        let r = cross_correlation(&stream, &pre, 40).unwrap();
        assert!((r - h.scale(50.0)).norm() < 1e-12);
        let zeros = Preamble { symbols: vec![c(0.0, 0.0); 50], energy: 0.0 };
        assert_eq!(cross_correlation(&stream, &zeros, 3).unwrap().norm(), 0.0);
        assert!(cross_correlation(&stream, &pre, 71).is_err());

        let stream = noise_stream(3, 200, &mut rg);
        for p in [0, 17, 150] {
            let fast = cross_correlation(&stream, &pre, p).unwrap();
            for i in 0..3 {
                let mut naive = c(0.0, 0.0);
                for n in 0..50 {
                    naive += stream.samples[(i, p + n)] * pre.symbols[n].conj();
                }
                assert!((fast[i] - naive).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn covariance_examples() {
        let mut rg = rng::root(2);
        let stream = noise_stream(3, 20, &mut rg);
        let one = windowed_covariance(&stream, 4, 1).unwrap();
        let y = stream.snapshot(4);
        assert!(frobenius(&(one - &y * y.adjoint())) < 1e-14);
        let zero = SampleBlock::new(ComplexMatrix::zeros(2, 10));
        assert_eq!(frobenius(&windowed_covariance(&zero, 0, 10).unwrap()), 0.0);
        assert!(windowed_covariance(&stream, 15, 6).is_err());
    }

    #[test]
    fn recursion_tracks_direct_sum() {
        let mut rg = rng::root(3);
        let l2 = 100;
        // Strong common component to make cancellation errors visible.
        let g = ComplexVector::from_vec(vec![c(1.0, 0.0), c(0.5, 0.5), c(-0.2, 1.0)]);
        let mut y = noise_stream(3, 10_000 + l2, &mut rg).samples;
        for n in 0..y.ncols() {
            let s = complex_gaussian(&mut rg, 1e6);
            for i in 0..3 {
                y[(i, n)] += g[i] * s;
            }
        }
        let stream = SampleBlock::new(y);
        let mut rec = windowed_covariance(&stream, 0, l2).unwrap();
        for p in 1..=10_000 {
            rec = recursive_update(&rec, &stream.snapshot(p - 1), &stream.snapshot(p + l2 - 1));
            if p % 997 == 0 || p == 10_000 {
                let direct = windowed_covariance(&stream, p, l2).unwrap();
                assert!(frobenius(&(&rec - &direct)) <= 1e-8 * frobenius(&direct));
            }
        }
    }

    #[test]
    fn statistic_examples() {
        let big_r = linalg::identity(2);
        assert_eq!(test_statistic(&ComplexVector::zeros(2), &big_r, 10.0).unwrap(), 0.0);
        let mut rg = rng::root(4);
        let pre = Preamble::qpsk(100, &mut rg).unwrap();
        let h = ComplexVector::from_vec(vec![c(1.0, 0.2), c(-0.4, 0.9)]);
        let mut y = noise_stream(2, 100, &mut rg).samples.scale(1e-6);
        for (n, x) in pre.symbols.iter().enumerate() {
            for i in 0..2 {
                y[(i, n)] += h[i] * x;
            }
        }
        let stream = SampleBlock::new(y);
        let theta = test_statistic(
            &cross_correlation(&stream, &pre, 0).unwrap(),
            &windowed_covariance(&stream, 0, 100).unwrap(),
            pre.energy,
        )
        .unwrap();
        assert!(theta > 1.0 - 1e-9, "{theta}");
    }

    #[test]
    fn statistic_is_scale_invariant() {
        let mut rg = rng::root(5);
        let pre = Preamble::qpsk(40, &mut rg).unwrap();
        let stream = noise_stream(3, 40, &mut rg);
        let theta = |s: &SampleBlock| {
            test_statistic(&cross_correlation(s, &pre, 0).unwrap(), &windowed_covariance(s, 0, 40).unwrap(), pre.energy)
                .unwrap()
        };
        let base = theta(&stream);
        for k in [c(1e-3, 0.0), c(-2.0, 7.0), c(0.0, 1e4)] {
            let scaled = SampleBlock::new(stream.samples.map(|z| z * k));
            assert!((theta(&scaled) - base).abs() < 1e-10);
        }
    }

    #[test]
    fn threshold_examples() {
        assert!((beta_threshold(1, 2, 0.3).unwrap() - 0.7).abs() < 1e-12);
        assert!(beta_threshold(2, 100, 1.0 - 1e-12).unwrap() < 1e-5);
        let g = beta_threshold(2, 100, 1e-2).unwrap();
        let dist = Beta::new(2.0, 98.0).unwrap();
        assert!((1.0 - dist.cdf(g) - 1e-2).abs() < 1e-10);
        assert!(beta_threshold(2, 2, 0.1).is_err());
        assert!(beta_threshold(2, 10, 0.0).is_err());
    }

    fn null_thetas(n: usize, seed: u64) -> Vec<f64> {
        let mut rg = rng::root(seed);
        let pre = Preamble::qpsk(100, &mut rg).unwrap();
        // Correlated, unequal-power noise: the null law does not depend on it.
        let mix = ComplexMatrix::from_row_slice(2, 2, &[c(3.0, 0.0), c(0.0, 0.0), c(1.0, 2.0), c(0.1, 0.0)]);
        (0..n)
            .map(|_| {
                let s = noise_stream(2, 100, &mut rg).transformed(&mix);
                test_statistic(
                    &cross_correlation(&s, &pre, 0).unwrap(),
                    &windowed_covariance(&s, 0, 100).unwrap(),
                    pre.energy,
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn null_statistic_is_beta_distributed() {
        let mut t = null_thetas(10_000, 6);
        t.sort_by(f64::total_cmp);
        let dist = Beta::new(2.0, 98.0).unwrap();
        let n = t.len() as f64;
        let ks = t
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = dist.cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        let critical = 1.6276 / n.sqrt();
        assert!(ks < critical, "KS {ks} vs {critical}");
        assert!(t.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn empirical_false_alarm_rate() {
        let t = null_thetas(100_000, 7);
        let gamma = beta_threshold(2, 100, 1e-2).unwrap();
        let rate = t.iter().filter(|&&x| x >= gamma).count() as f64 / t.len() as f64;
        assert!(rate > 1e-2 / 1.5 && rate < 1e-2 * 1.5, "{rate}");
    }

    #[test]
    fn detection_on_noise_and_on_preamble() {
        let mut rg = rng::root(8);
        let pre = Preamble::qpsk(100, &mut rg).unwrap();
        let cfg = DetectionConfig { far_target: 1e-3, q_window: 0, delta: 0.0 };
        let mut windows = 0;
        let mut alarms = 0;
        for _ in 0..200 {
            let s = noise_stream(2, 300, &mut rg);
            let res = detect_and_sync(&s, &pre, &cfg).unwrap();
            windows += res.theta_trace.len();
            alarms += res.theta_trace.iter().filter(|&&t| t >= res.gamma).count();
            assert_eq!(res.detected, res.theta_trace.iter().any(|&t| t >= res.gamma));
        }
        let rate = alarms as f64 / windows as f64;
        assert!(rate < 3e-3, "{rate}");

        let h = ComplexVector::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]);
        let mut y = noise_stream(2, 600, &mut rg).samples;
        for (n, x) in pre.symbols.iter().enumerate() {
            for i in 0..2 {
                y[(i, 250 + n)] += h[i] * x;
            }
        }
        let stream = SampleBlock::new(y);
        let res = detect_and_sync(&stream, &pre, &DetectionConfig { q_window: 100, ..cfg }).unwrap();
        assert_eq!(res.p_sync, Some(250));
        let res0 = detect_and_sync(&stream, &pre, &cfg).unwrap();
        let first = res0.theta_trace.iter().position(|&t| t >= res0.gamma);
        assert_eq!(res0.p_sync, first);
    }

    #[test]
    fn clean_channel_weights_recover_symbols() {
        let mut rg = rng::root(9);
        let pre = Preamble::qpsk(64, &mut rg).unwrap();
        let h = ComplexVector::from_vec(vec![c(0.7, 0.1), c(-0.3, 1.1), c(0.2, 0.2)]);
        let y = ComplexMatrix::from_fn(3, 64, |i, n| h[i] * pre.symbols[n]);
        let stream = SampleBlock::new(y);
        let bw = mmse_weights(&stream, &pre, 0, 0.0).unwrap();
        let out: Vec<Complex64> = (0..64).map(|n| bw.w.dotc(&stream.snapshot(n))).collect();
        let cross: Complex64 = out.iter().zip(&pre.symbols).map(|(o, x)| o * x.conj()).sum();
        let corr = cross.norm() / (out.iter().map(|o| o.norm_sqr()).sum::<f64>().sqrt() * pre.energy.sqrt());
        assert!(corr > 0.999, "{corr}");
        assert!(cross.re > 0.0 && cross.im.abs() < 1e-6 * cross.re);
        assert!((bw.h_eff_estimate - &h).norm() < 1e-12);
    }

    #[test]
    fn preamble_scaling_changes_power_not_sinr() {
        let cfg = ScenarioConfig { sir_db: -30.0, snr_db: 5.0, ..Default::default() };
        let mut rg = rng::root(10);
        let real = realize_channel(&cfg, &mut rg).unwrap();
        let pre = Preamble::qpsk(100, &mut rg).unwrap();
        let amp = real.sigma_x2.sqrt();
        let x: Vec<Complex64> = pre.symbols.iter().map(|s| s * amp).collect();
        let stream = generate_block_with(&real, &x, &mut rg);
        let e = linalg::identity(2);
        let adc = AdcConfig::ideal();
        let base = mmse_weights(&stream, &pre, 0, 0.0).unwrap();
        let scaled = mmse_weights(&stream, &pre.scaled(3.0), 0, 0.0).unwrap();
        assert!((scaled.sigma_x2_estimate / base.sigma_x2_estimate - 9.0).abs() < 1e-12);
        let s1 = ppsinr_real(&base, &e, &real, &adc, 20_000, &mut rng::root(11)).unwrap();
        let s2 = ppsinr_real(&scaled, &e, &real, &adc, 20_000, &mut rng::root(11)).unwrap();
        assert!((s1 - s2).abs() < 1e-9, "{s1} vs {s2}");
        // Direction is unchanged by positive scaling of the stream.
        let louder = SampleBlock::new(stream.samples.scale(5.0));
        let w5 = mmse_weights(&louder, &pre, 0, 0.0).unwrap().w;
        let cosine = w5.dotc(&base.w).norm() / (w5.norm() * base.w.norm());
        assert!((cosine - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ppsinr_matches_closed_form_with_exact_statistics() {
        let mut rg = rng::root(12);
        for (sir, snr) in [(-30.0, 10.0), (-60.0, 0.0), (10.0, 20.0)] {
            let cfg = ScenarioConfig { sir_db: sir, snr_db: snr, ..Default::default() };
            let real = realize_channel(&cfg, &mut rg).unwrap();
            let e = linalg::identity(2);
            let w = exact_mmse_weights(&e, &real).unwrap();
            let got = ppsinr_real(&w, &e, &real, &AdcConfig::ideal(), 100_000, &mut rg).unwrap();
            let want = linalg::db(real.mmse_sinr().unwrap());
            assert!((got - want).abs() < 0.5, "SIR {sir}: {got} vs {want}");
        }
    }

    #[test]
    fn ppsinr_guard_and_quantization_floor() {
        let cfg = ScenarioConfig {
            k_interferers: 0,
            interferer_doas_deg: vec![],
            sir_db: f64::INFINITY,
            ..Default::default()
        };
        let mut rg = rng::root(13);
        let mut real = realize_channel(&cfg, &mut rg).unwrap();
        real.sigma_eta2 = 0.0;
        let e = linalg::identity(2);
        let w = BeamformerWeights {
            w: real.h.clone(),
            h_eff_estimate: real.h.clone(),
            r_tilde: linalg::identity(2),
            sigma_x2_estimate: real.sigma_x2,
        };
        assert_eq!(ppsinr_real(&w, &e, &real, &AdcConfig::ideal(), 1000, &mut rg).unwrap(), PPSINR_CAP_DB);

        // Bypassed array: the receiver only has the quantized stream to
        // estimate its weights from.
        let cfg = ScenarioConfig { sir_db: -80.0, ..Default::default() };
        let real = realize_channel(&cfg, &mut rg).unwrap();
        let adc = AdcConfig::with_bits(12.0);
        let trials = 20;
        let mut total = 0.0;
        for _ in 0..trials {
            let pre = Preamble::qpsk(100, &mut rg).unwrap();
            let x: Vec<Complex64> = pre.symbols.iter().map(|s| s * real.sigma_x2.sqrt()).collect();
            let q = quantize(&generate_block_with(&real, &x, &mut rg), &adc).unwrap();
            let w = mmse_weights(&q.block, &pre, 0, q.delta_rms()).unwrap();
            total += ppsinr_real(&w, &e, &real, &adc, 20_000, &mut rg).unwrap();
        }
        let got = total / trials as f64;
        let floor = crate::adc::predicted_sqnr_db(-80.0, 12.0);
        assert!((got - floor).abs() < 3.0, "{got} vs {floor}");
    }
}
