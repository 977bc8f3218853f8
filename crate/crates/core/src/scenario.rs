//! Array responses, channel realizations and received sample streams.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{HimapError, Result};
use crate::linalg::{self, c, cis, ComplexMatrix, ComplexVector};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    LineOfSight,
    Rayleigh,
}

/// Waveform statistics of each interferer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterferenceWaveform {
    /// Unit-modulus samples with i.i.d. uniform phase, scaled to the
    /// interferer power.
    ConstantEnvelope,
    /// Circularly-symmetric complex Gaussian samples.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub m_antennas: usize,
    pub k_interferers: usize,
    pub signal_doa_deg: f64,
    pub interferer_doas_deg: Vec<f64>,
    /// Per-antenna signal-to-thermal-noise ratio.
    pub snr_db: f64,
    /// Signal power over total interference power; `+inf` means no interference.
    pub sir_db: f64,
    pub channel: ChannelKind,
    pub interference: InterferenceWaveform,
    pub l1: usize,
    pub l2: usize,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            m_antennas: 2,
            k_interferers: 1,
            signal_doa_deg: 0.0,
            interferer_doas_deg: vec![30.0],
            snr_db: 25.0,
            sir_db: -70.0,
            channel: ChannelKind::LineOfSight,
            interference: InterferenceWaveform::ConstantEnvelope,
            l1: 100,
            l2: 100,
            seed: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HimapError::InvalidConfig(m));
        if self.m_antennas == 0 {
            return bad("m_antennas must be positive".into());
        }
        if self.interferer_doas_deg.len() != self.k_interferers {
            return bad(format!(
                "{} interferer DOAs given for k = {}",
                self.interferer_doas_deg.len(),
                self.k_interferers
            ));
        }
        if self.l1 == 0 || self.l2 == 0 {
            return bad("l1 and l2 must be positive".into());
        }
        if !self.snr_db.is_finite() {
            return bad("snr_db must be finite".into());
        }
        if self.sir_db.is_nan() || self.sir_db == f64::NEG_INFINITY {
            return bad("sir_db must be a number or +inf".into());
        }
        if self.k_interferers == 0 && self.sir_db.is_finite() {
            return bad("sir_db is undefined without interferers (use +inf)".into());
        }
        if self.k_interferers > 0 && !self.sir_db.is_finite() {
            return bad("interferers need a finite sir_db".into());
        }
        if !self.signal_doa_deg.is_finite() || self.interferer_doas_deg.iter().any(|d| !d.is_finite()) {
            return bad("DOAs must be finite".into());
        }
        Ok(())
    }
}

/// Ground truth of one trial's propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: ComplexVector,
    /// M x K; column k is the response of interferer k.
    pub g: ComplexMatrix,
    pub sigma_x2: f64,
    pub sigma_xi2: Vec<f64>,
    pub sigma_eta2: f64,
    pub interference: InterferenceWaveform,
}

impl ChannelRealization {
    pub fn m(&self) -> usize {
        self.h.len()
    }

    pub fn k(&self) -> usize {
        self.g.ncols()
    }

    /// Interference-plus-noise covariance `C_z`.
    pub fn interference_noise_covariance(&self) -> ComplexMatrix {
        let m = self.m();
        let mut cz = linalg::identity(m).scale(self.sigma_eta2);
        for (k, &p) in self.sigma_xi2.iter().enumerate() {
            let gk = self.g.column(k).into_owned();
            cz += linalg::outer(&gk).scale(p);
        }
        cz
    }

    /// Received covariance `R_y = sigma_x^2 h h^H + C_z`.
    pub fn received_covariance(&self) -> ComplexMatrix {
        linalg::outer(&self.h).scale(self.sigma_x2) + self.interference_noise_covariance()
    }

    /// Output SINR of the exact MMSE beamformer, `sigma_x^2 h^H C_z^-1 h`.
    pub fn mmse_sinr(&self) -> Result<f64> {
        let x = linalg::solve_hpd(&self.interference_noise_covariance(), &self.h)?;
        Ok(self.sigma_x2 * self.h.dotc(&x).re)
    }

    /// Multiplies every power by `factor`.
    pub fn scaled_powers(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.sigma_x2 *= factor;
        out.sigma_eta2 *= factor;
        out.sigma_xi2.iter_mut().for_each(|p| *p *= factor);
        out
    }
}

/// N snapshots stored as the columns of an M x N matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBlock {
    pub samples: ComplexMatrix,
    pub sample_index_origin: i64,
}

impl SampleBlock {
    pub fn new(samples: ComplexMatrix) -> Self {
        Self { samples, sample_index_origin: 0 }
    }

    pub fn m(&self) -> usize {
        self.samples.nrows()
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.ncols() == 0
    }

    pub fn snapshot(&self, n: usize) -> ComplexVector {
        self.samples.column(n).into_owned()
    }

    pub fn ensure_finite(&self) -> Result<()> {
        match self.samples.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            Some(i) => Err(HimapError::NonFinite(i / self.m().max(1))),
            None => Ok(()),
        }
    }

    /// Sample covariance `(1/N) sum y y^H`.
    pub fn sample_covariance(&self) -> ComplexMatrix {
        let n = self.len().max(1) as f64;
        (&self.samples * self.samples.adjoint()).unscale(n)
    }

    /// Applies an M x M analog stage to every snapshot.
    pub fn transformed(&self, w: &ComplexMatrix) -> Self {
        Self { samples: w * &self.samples, sample_index_origin: self.sample_index_origin }
    }
}

/// Half-wavelength ULA response: entry `p` is `exp(-j pi p sin(theta))`.
pub fn steering_vector(theta_deg: f64, m: usize) -> ComplexVector {
    let s = theta_deg.to_radians().sin();
    ComplexVector::from_iterator(m, (0..m).map(|p| cis(-PI * p as f64 * s)))
}

/// Circularly-symmetric complex Gaussian sample with the given variance.
pub fn complex_gaussian(rng: &mut SimRng, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c(re * s, im * s)
}

fn interferer_sample(rng: &mut SimRng, kind: InterferenceWaveform, power: f64) -> Complex64 {
    match kind {
        InterferenceWaveform::ConstantEnvelope => Complex64::from_polar(power.sqrt(), rng.random::<f64>() * 2.0 * PI),
        InterferenceWaveform::Gaussian => complex_gaussian(rng, power),
    }
}

/// Draws array responses and sets the powers so the per-antenna SNR and the
/// total SIR match the configuration. Thermal noise power is 1.
pub fn realize_channel(cfg: &ScenarioConfig, rng: &mut SimRng) -> Result<ChannelRealization> {
    cfg.validate()?;
    let m = cfg.m_antennas;
    let k = cfg.k_interferers;
    let (h, g) = match cfg.channel {
        ChannelKind::LineOfSight => {
            let h = steering_vector(cfg.signal_doa_deg, m);
            let mut g = ComplexMatrix::zeros(m, k);
            for (i, &doa) in cfg.interferer_doas_deg.iter().enumerate() {
                g.set_column(i, &steering_vector(doa, m));
            }
            (h, g)
        }
        ChannelKind::Rayleigh => {
            let h = ComplexVector::from_fn(m, |_, _| complex_gaussian(rng, 1.0));
            let g = ComplexMatrix::from_fn(m, k, |_, _| complex_gaussian(rng, 1.0));
            (h, g)
        }
    };

    let sigma_eta2 = 1.0;
    let h_energy = h.norm_squared();
    if h_energy <= 0.0 {
        return Err(HimapError::InvalidConfig("signal response has zero energy".into()));
    }
    let sigma_x2 = linalg::from_db(cfg.snr_db) * sigma_eta2 * m as f64 / h_energy;
    let total_interference = if k == 0 { 0.0 } else { sigma_x2 * h_energy / linalg::from_db(cfg.sir_db) };
    let sigma_xi2: Vec<f64> = (0..k).map(|i| total_interference / (k as f64 * g.column(i).norm_squared())).collect();
    if !(sigma_x2 > 0.0 && sigma_x2.is_finite()) || sigma_xi2.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
        return Err(HimapError::InvalidConfig("derived powers must be finite and positive".into()));
    }
    Ok(ChannelRealization { h, g, sigma_x2, sigma_xi2, sigma_eta2, interference: cfg.interference })
}

/// I.i.d. Gaussian signal symbols of power `power`.
pub fn gaussian_symbols(n: usize, power: f64, rng: &mut SimRng) -> Vec<Complex64> {
    (0..n).map(|_| complex_gaussian(rng, power)).collect()
}

/// Received stream `y_n = h x_n + sum_k g_k xi_kn + eta_n` for caller-chosen
/// signal symbols `x_n` (already at their true amplitude).
pub fn generate_block_with(real: &ChannelRealization, symbols: &[Complex64], rng: &mut SimRng) -> SampleBlock {
    let m = real.m();
    let n = symbols.len();
    let mut y = ComplexMatrix::zeros(m, n);
    let mut xi = vec![Complex64::new(0.0, 0.0); real.k()];
    for (col, &x) in symbols.iter().enumerate() {
        for (k, p) in real.sigma_xi2.iter().enumerate() {
            xi[k] = interferer_sample(rng, real.interference, *p);
        }
        for row in 0..m {
            let mut v = real.h[row] * x;
            for (k, &xk) in xi.iter().enumerate() {
                v += real.g[(row, k)] * xk;
            }
            if real.sigma_eta2 > 0.0 {
                v += complex_gaussian(rng, real.sigma_eta2);
            }
            y[(row, col)] = v;
        }
    }
    SampleBlock::new(y)
}

/// Received stream with i.i.d. Gaussian signal symbols at the configured power.
pub fn generate_block(real: &ChannelRealization, n: usize, rng: &mut SimRng) -> SampleBlock {
    let x = gaussian_symbols(n, real.sigma_x2, rng);
    generate_block_with(real, &x, rng)
}

/// Per-antenna-summed signal power over interference-plus-noise power.
pub fn antenna_sinr(real: &ChannelRealization) -> Result<f64> {
    let interference: f64 = (0..real.k()).map(|k| real.g.column(k).norm_squared() * real.sigma_xi2[k]).sum();
    let denom = interference + real.m() as f64 * real.sigma_eta2;
    if denom <= 0.0 {
        return Err(HimapError::ZeroDenominator("antenna SINR"));
    }
    Ok(real.h.norm_squared() * real.sigma_x2 / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn los(m: usize, sir_db: f64) -> ScenarioConfig {
        ScenarioConfig { m_antennas: m, sir_db, ..Default::default() }
    }

    #[test]
    fn steering_vector_examples() {
        let v = steering_vector(0.0, 4);
        assert!(v.iter().all(|z| (z - c(1.0, 0.0)).norm() < 1e-15));
        let v = steering_vector(30.0, 2);
        assert!((v[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((v[1] - c(0.0, -1.0)).norm() < 1e-15);
        // independent scalar evaluation
        let v = steering_vector(60.0, 3);
        let s = (60.0f64 * PI / 180.0).sin();
        for p in 0..3 {
            let arg = -PI * p as f64 * s;
            assert!((v[p].re - arg.cos()).abs() < 1e-14);
            assert!((v[p].im - arg.sin()).abs() < 1e-14);
            assert!((v[p].norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn los_powers_match_snr() {
        let cfg = los(2, -70.0);
        let real = realize_channel(&cfg, &mut rng::root(1)).unwrap();
        assert!(real.h.iter().all(|z| (z - c(1.0, 0.0)).norm() < 1e-15));
        let per_antenna_snr = real.sigma_x2 * real.h[0].norm_sqr() / real.sigma_eta2;
        assert!((per_antenna_snr / 10f64.powf(2.5) - 1.0).abs() < 1e-12);
        let sir = real.sigma_x2 * real.h.norm_squared() / (real.sigma_xi2[0] * real.g.column(0).norm_squared());
        assert!((linalg::db(sir) + 70.0).abs() < 1e-9);
        assert_eq!(real.g[(0, 0)], c(1.0, 0.0));
    }

    #[test]
    fn finite_sir_without_interferers_is_rejected() {
        let cfg = ScenarioConfig { k_interferers: 0, interferer_doas_deg: vec![], ..Default::default() };
        assert!(matches!(realize_channel(&cfg, &mut rng::root(0)), Err(HimapError::InvalidConfig(_))));
        let ok = ScenarioConfig { sir_db: f64::INFINITY, ..cfg };
        assert!(realize_channel(&ok, &mut rng::root(0)).is_ok());
    }

    #[test]
    fn rayleigh_entries_have_unit_variance() {
        let cfg = ScenarioConfig { m_antennas: 8, channel: ChannelKind::Rayleigh, ..Default::default() };
        let mut r = rng::root(3);
        let draws = 10_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let real = realize_channel(&cfg, &mut r).unwrap();
            acc += real.h.norm_squared() / 8.0;
        }
        let mean = acc / draws as f64;
        assert!((mean - 1.0).abs() < 0.05, "E|h_i|^2 = {mean}");
    }

    #[test]
    fn noiseless_block_is_pure_signal() {
        let real = ChannelRealization {
            h: steering_vector(20.0, 3),
            g: ComplexMatrix::zeros(3, 0),
            sigma_x2: 2.0,
            sigma_xi2: vec![],
            sigma_eta2: 0.0,
            interference: InterferenceWaveform::Gaussian,
        };
        let mut r = rng::root(5);
        let x = gaussian_symbols(16, 2.0, &mut r);
        let y = generate_block_with(&real, &x, &mut r);
        for (n, xn) in x.iter().enumerate() {
            assert_eq!(y.snapshot(n), &real.h * *xn);
        }
    }

    #[test]
    fn second_moment_converges() {
        for wave in [InterferenceWaveform::Gaussian, InterferenceWaveform::ConstantEnvelope] {
            let cfg = ScenarioConfig {
                m_antennas: 3,
                k_interferers: 2,
                interferer_doas_deg: vec![25.0, -40.0],
                snr_db: 5.0,
                sir_db: -10.0,
                interference: wave,
                ..Default::default()
            };
            let mut r = rng::root(11);
            let real = realize_channel(&cfg, &mut r).unwrap();
            let y = generate_block(&real, 100_000, &mut r);
            let emp = y.sample_covariance();
            let exact = real.received_covariance();
            let rel = linalg::frobenius(&(emp - &exact)) / linalg::frobenius(&exact);
            assert!(rel < 0.03, "{wave:?}: relative error {rel}");
        }
    }

    #[test]
    fn empirical_antenna_sinr_matches_config() {
        let cfg = ScenarioConfig { snr_db: 25.0, sir_db: -70.0, ..Default::default() };
        let mut r = rng::root(12);
        let real = realize_channel(&cfg, &mut r).unwrap();
        let n = 20_000;
        let x = gaussian_symbols(n, real.sigma_x2, &mut r);
        let mut silent = real.clone();
        silent.sigma_x2 = 0.0;
        let z = generate_block_with(&silent, &vec![c(0.0, 0.0); n], &mut r);
        let sig: f64 = x.iter().map(|v| v.norm_sqr() * real.h.norm_squared()).sum();
        let zpow: f64 = z.samples.iter().map(|v| v.norm_sqr()).sum();
        let emp_db = linalg::db(sig / zpow);
        assert!((emp_db + 70.0).abs() < 0.5, "empirical SINR {emp_db} dB");
    }

    #[test]
    fn antenna_sinr_examples() {
        let real = ChannelRealization {
            h: steering_vector(0.0, 4),
            g: ComplexMatrix::zeros(4, 0),
            sigma_x2: 1.5,
            sigma_xi2: vec![],
            sigma_eta2: 1.5,
            interference: InterferenceWaveform::Gaussian,
        };
        assert!((antenna_sinr(&real).unwrap() - 1.0).abs() < 1e-15);

        let real = realize_channel(&ScenarioConfig { sir_db: -80.0, ..Default::default() }, &mut rng::root(0)).unwrap();
        // direct evaluation: 2*10^2.5 / (2*P_xi + 2) with P_xi = 10^2.5 * 10^8
        let p_xi = 10f64.powf(2.5) * 1e8;
        let expect = 2.0 * 10f64.powf(2.5) / (2.0 * p_xi + 2.0);
        let got = antenna_sinr(&real).unwrap();
        assert!((got / expect - 1.0).abs() < 1e-12);
        assert!((linalg::db(got) + 80.0).abs() < 1e-3);
        let scaled = antenna_sinr(&real.scaled_powers(37.0)).unwrap();
        assert!((scaled / got - 1.0).abs() < 1e-12);
    }

    #[test]
    fn antenna_sinr_zero_denominator() {
        let real = ChannelRealization {
            h: steering_vector(0.0, 2),
            g: ComplexMatrix::zeros(2, 0),
            sigma_x2: 1.0,
            sigma_xi2: vec![],
            sigma_eta2: 0.0,
            interference: InterferenceWaveform::Gaussian,
        };
        assert!(antenna_sinr(&real).is_err());
    }
}
