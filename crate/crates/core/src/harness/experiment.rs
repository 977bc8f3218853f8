//! Monte-Carlo experiments, one kind per reproduced figure.
//!
//! Every trial draws from its own stream keyed by `(seed, point, trial)`,
//! trials run in parallel, and results are reduced in trial order, so a
//! table depends only on the spec and the seed.

use std::fmt;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::pipeline::{
    analog_stage, roc_point, run_pipeline_on, training_covariance, AnalogStage, PhaseErrorModel, PipelineConfig,
    TrialRecord,
};
use super::specfile;
use super::table::ResultTable;
use crate::adc::AdcConfig;
use crate::detect::DetectionConfig;
use crate::error::{HimapError, Result};
use crate::linalg;
use crate::prewhiten::{pre_adc_sinr, psn_matrix, PhaseGrid};
use crate::psn_opt::{opp_prewhitener, optimize_psn, OptimizerConfig};
use crate::rng::{self, SimRng};
use crate::scenario::{realize_channel, ChannelKind, ChannelRealization, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    PrewhitenerComparison,
    ConvergenceTrace,
    SinrSweep,
    PpsinrSweep,
    Roc,
    AdcResolutionSweep,
    PhaseErrorSweep,
    RayleighSweep,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        Self::PrewhitenerComparison,
        Self::ConvergenceTrace,
        Self::SinrSweep,
        Self::PpsinrSweep,
        Self::Roc,
        Self::AdcResolutionSweep,
        Self::PhaseErrorSweep,
        Self::RayleighSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::PrewhitenerComparison => "prewhitener_comparison",
            Self::ConvergenceTrace => "convergence_trace",
            Self::SinrSweep => "sinr_sweep",
            Self::PpsinrSweep => "ppsinr_sweep",
            Self::Roc => "roc",
            Self::AdcResolutionSweep => "adc_resolution_sweep",
            Self::PhaseErrorSweep => "phase_error_sweep",
            Self::RayleighSweep => "rayleigh_sweep",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn description(self) -> &'static str {
        match self {
            Self::PrewhitenerComparison => {
                "pre-ADC SINR of the optimized PSN vs the nearest-unitary benchmark, over SIR"
            }
            Self::ConvergenceTrace => "whiteness after each row update of the phase optimizer",
            Self::SinrSweep => "pre-ADC SINR with no prewhitening, the ideal prewhitener and PSNs, over SIR",
            Self::PpsinrSweep => "realized post-processing SINR of HIMAP vs DSP-only, over SIR",
            Self::Roc => "detection probability and false-alarm rate over the target false-alarm grid",
            Self::AdcResolutionSweep => "realized post-processing SINR over ADC resolution",
            Self::PhaseErrorSweep => "realized post-processing SINR over shifter phase-error spread",
            Self::RayleighSweep => "realized post-processing SINR over SIR with Rayleigh fading",
        }
    }

    /// What `sweep_values` holds for this kind.
    pub fn sweep_key(self) -> Option<&'static str> {
        match self {
            Self::PrewhitenerComparison | Self::SinrSweep | Self::PpsinrSweep | Self::RayleighSweep => {
                Some("sweep.sir_db")
            }
            Self::PhaseErrorSweep => Some("sweep.sigma_deg"),
            Self::AdcResolutionSweep => Some("adc.bits"),
            Self::Roc => Some("detector.far_grid"),
            Self::ConvergenceTrace => None,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub scenario: ScenarioConfig,
    /// SIR values (dB) or phase-error spreads (deg), depending on the kind.
    pub sweep_values: Vec<f64>,
    pub ps_bits_list: Vec<PhaseGrid>,
    /// ADC resolutions; `inf` is an ideal converter. Swept by
    /// [`ExperimentKind::AdcResolutionSweep`], otherwise the first is used.
    pub adc_bits_list: Vec<f64>,
    pub adc_headroom: f64,
    pub trials: usize,
    pub far_grid: Vec<f64>,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
    pub detector: DetectionConfig,
    pub phase_error: PhaseErrorModel,
    pub preamble_offset: usize,
    pub payload_len: usize,
    pub n_eval: usize,
    pub exact_estimates: bool,
}

fn sir_grid() -> Vec<f64> {
    (0..=10).map(|i| -100.0 + 10.0 * i as f64).collect()
}

impl ExperimentSpec {
    /// Defaults mirroring the corresponding figure's setup.
    pub fn new(kind: ExperimentKind) -> Self {
        let mut spec = Self {
            kind,
            scenario: ScenarioConfig::default(),
            sweep_values: vec![],
            ps_bits_list: vec![PhaseGrid::bits(6)],
            adc_bits_list: vec![12.0],
            adc_headroom: AdcConfig::default().headroom,
            trials: 100,
            far_grid: vec![1e-4, 1e-3, 1e-2, 1e-1],
            seed: 1,
            optimizer: OptimizerConfig::default(),
            detector: DetectionConfig::default(),
            phase_error: PhaseErrorModel::default(),
            preamble_offset: 200,
            payload_len: 100,
            n_eval: 20_000,
            exact_estimates: false,
        };
        match kind {
            ExperimentKind::PrewhitenerComparison => {
                spec.scenario.m_antennas = 4;
                spec.scenario.interferer_doas_deg = vec![60.0];
                spec.sweep_values = vec![-60.0, -50.0, -40.0, -30.0, -20.0, -10.0, 0.0];
                spec.ps_bits_list = vec![PhaseGrid::CONTINUOUS];
            }
            ExperimentKind::ConvergenceTrace => {
                spec.ps_bits_list =
                    vec![PhaseGrid::CONTINUOUS, PhaseGrid::bits(6), PhaseGrid::bits(4), PhaseGrid::bits(2)];
            }
            ExperimentKind::SinrSweep => {
                spec.sweep_values = sir_grid();
                spec.ps_bits_list = vec![PhaseGrid::CONTINUOUS, PhaseGrid::bits(6), PhaseGrid::bits(4)];
            }
            ExperimentKind::PpsinrSweep => {
                spec.scenario.m_antennas = 4;
                spec.scenario.k_interferers = 2;
                spec.scenario.interferer_doas_deg = vec![30.0, 60.0];
                spec.sweep_values = sir_grid();
                spec.ps_bits_list = vec![PhaseGrid::CONTINUOUS, PhaseGrid::bits(6)];
            }
            ExperimentKind::Roc => {
                spec.scenario.sir_db = -100.0;
                spec.scenario.snr_db = 0.0;
            }
            ExperimentKind::AdcResolutionSweep => {
                spec.adc_bits_list = vec![6.0, 8.0, 10.0, 12.0, 14.0, 16.0];
            }
            ExperimentKind::PhaseErrorSweep => {
                spec.sweep_values = vec![0.0, 0.5, 1.0, 2.0, 3.0, 5.0];
                spec.ps_bits_list = vec![PhaseGrid::CONTINUOUS, PhaseGrid::bits(6)];
            }
            ExperimentKind::RayleighSweep => {
                spec.scenario.channel = ChannelKind::Rayleigh;
                spec.scenario.m_antennas = 8;
                spec.scenario.k_interferers = 2;
                spec.scenario.interferer_doas_deg = vec![30.0, 60.0];
                spec.sweep_values = sir_grid();
            }
        }
        spec
    }

    /// The values a table row is produced for.
    pub fn points(&self) -> Vec<f64> {
        match self.kind {
            ExperimentKind::AdcResolutionSweep => self.adc_bits_list.clone(),
            ExperimentKind::Roc => self.far_grid.clone(),
            ExperimentKind::ConvergenceTrace => vec![],
            _ => self.sweep_values.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HimapError::InvalidConfig(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.ps_bits_list.is_empty() {
            return bad("psn.bits must list at least one resolution".into());
        }
        if self.adc_bits_list.is_empty() {
            return bad("adc.bits must list at least one resolution".into());
        }
        if let Some(key) = self.kind.sweep_key() {
            if self.points().is_empty() {
                return bad(format!("{key} must not be empty for {}", self.kind));
            }
        }
        if self.n_eval == 0 && !matches!(self.kind, ExperimentKind::Roc | ExperimentKind::SinrSweep) {
            return bad("eval.n_eval must be positive".into());
        }
        for &b in &self.adc_bits_list {
            AdcConfig { headroom: self.adc_headroom, ..AdcConfig::with_bits(b) }.validate()?;
        }
        for &f in &self.far_grid {
            DetectionConfig { far_target: f, ..self.detector }.validate()?;
        }
        self.detector.validate()?;
        self.optimizer.validate()?;
        self.phase_error.validate()?;
        let mut check = self.scenario.clone();
        if self.kind.sweep_key() == Some("sweep.sir_db") {
            for &sir in &self.sweep_values {
                check.sir_db = sir;
                check.validate()?;
            }
        } else {
            check.validate()?;
        }
        if self.scenario.l2 <= self.scenario.m_antennas {
            return bad(format!("scenario.l2 = {} must exceed scenario.m", self.scenario.l2));
        }
        Ok(())
    }

    /// SHA-256 of the canonical spec text.
    pub fn hash_hex(&self) -> String {
        let digest = Sha256::digest(specfile::render_spec(self).as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn adc(&self, bits: f64) -> AdcConfig {
        AdcConfig { headroom: self.adc_headroom, ..AdcConfig::with_bits(bits) }
    }

    fn pipeline(&self, stage: AnalogStage, adc_bits: f64) -> PipelineConfig {
        PipelineConfig {
            stage,
            adc: self.adc(adc_bits),
            optimizer: self.optimizer,
            detector: self.detector,
            phase_error: self.phase_error,
            preamble_offset: self.preamble_offset,
            payload_len: self.payload_len,
            n_eval: self.n_eval,
            exact_estimates: self.exact_estimates,
        }
    }
}

pub fn grid_label(grid: PhaseGrid) -> String {
    match grid.bits {
        None => "inf".into(),
        Some(b) => b.to_string(),
    }
}

fn grid_value(grid: PhaseGrid) -> f64 {
    grid.bits.map_or(f64::INFINITY, f64::from)
}

/// Mean and standard error of the finite entries.
fn mean_se(values: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    let v: Vec<f64> = values.filter(|x| x.is_finite()).collect();
    let n = v.len();
    if n == 0 {
        return (f64::NAN, f64::NAN, 0);
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::NAN, 1);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt(), n)
}

/// Runs `trial` for every `(point, trial)` pair in parallel and returns the
/// results grouped by point, in trial order.
fn monte_carlo<T: Send>(
    spec: &ExperimentSpec,
    points: usize,
    trial: impl Fn(usize, &mut SimRng, &mut SimRng) -> Result<T> + Sync,
) -> Vec<Vec<Result<T>>> {
    let jobs: Vec<(usize, usize)> = (0..points).flat_map(|p| (0..spec.trials).map(move |t| (p, t))).collect();
    let mut flat: Vec<Result<T>> = jobs
        .par_iter()
        .map(|&(p, t)| {
            let mut channel_rng = rng::stream(spec.seed, &[p as u64, t as u64, 0]);
            let mut run_rng = rng::stream(spec.seed, &[p as u64, t as u64, 1]);
            trial(p, &mut channel_rng, &mut run_rng)
        })
        .collect();
    let mut out = Vec::with_capacity(points);
    for _ in 0..points {
        out.push(flat.drain(..spec.trials).collect());
    }
    out
}

/// Trial outcome as named metrics.
type Metrics = Vec<f64>;

fn metric_table(
    spec: &ExperimentSpec,
    point_name: &str,
    metric_names: &[String],
    results: Vec<Vec<Result<Metrics>>>,
) -> Result<ResultTable> {
    let mut columns = vec![point_name.to_string()];
    for name in metric_names {
        columns.push(format!("{name}_mean"));
        columns.push(format!("{name}_se"));
    }
    columns.push("trials_ok".into());
    columns.push("failures".into());
    let mut table = ResultTable::new(columns);
    for (point, trials) in spec.points().iter().zip(results) {
        let ok: Vec<&Metrics> = trials.iter().filter_map(|r| r.as_ref().ok()).collect();
        let mut row = vec![*point];
        for i in 0..metric_names.len() {
            let (m, se, _) = mean_se(ok.iter().map(|v| v[i]));
            row.push(m);
            row.push(se);
        }
        row.push(ok.len() as f64);
        row.push((trials.len() - ok.len()) as f64);
        table.push_row(row)?;
    }
    Ok(table)
}

fn scenario_at(spec: &ExperimentSpec, point: f64) -> ScenarioConfig {
    let mut s = spec.scenario.clone();
    if spec.kind.sweep_key() == Some("sweep.sir_db") {
        s.sir_db = point;
    }
    s
}

fn comparison(spec: &ExperimentSpec) -> Result<ResultTable> {
    let mut names = vec!["none_sinr_db".to_string(), "ideal_sinr_db".to_string()];
    for g in &spec.ps_bits_list {
        let b = grid_label(*g);
        names.extend([format!("psn{b}_sinr_db"), format!("opp{b}_sinr_db"), format!("psn{b}_beats_opp")]);
    }
    let points = spec.points();
    let results = monte_carlo(spec, points.len(), |p, ch, run| {
        let scenario = scenario_at(spec, points[p]);
        let real = realize_channel(&scenario, ch)?;
        let r_hat = training_covariance(&scenario, &real, &spec.adc(spec.adc_bits_list[0]), run)?;
        let db_sinr = |w: &linalg::ComplexMatrix| pre_adc_sinr(w, &real).map(linalg::db);
        let mut out = vec![db_sinr(&linalg::identity(real.m()))?];
        out.push(db_sinr(&crate::prewhiten::ideal_prewhitener(&r_hat)?)?);
        for &g in &spec.ps_bits_list {
            let (phi, _) = optimize_psn(&r_hat, g, &spec.optimizer, run)?;
            let alg = db_sinr(&psn_matrix(&phi).e)?;
            let opp = db_sinr(&psn_matrix(&opp_prewhitener(&r_hat, g, &spec.optimizer)?.phases).e)?;
            out.extend([alg, opp, f64::from(u8::from(alg > opp))]);
        }
        Ok(out)
    });
    metric_table(spec, "sir_db", &names, results)
}

fn sinr_sweep(spec: &ExperimentSpec) -> Result<ResultTable> {
    let mut names =
        vec!["none_sinr_db".to_string(), "ideal_sinr_db".to_string(), "predicted_ideal_sinr_db".to_string()];
    for g in &spec.ps_bits_list {
        let b = grid_label(*g);
        names.extend([format!("psn{b}_sinr_db"), format!("psn{b}_whiteness")]);
    }
    let points = spec.points();
    let results = monte_carlo(spec, points.len(), |p, ch, run| {
        let scenario = scenario_at(spec, points[p]);
        let real = realize_channel(&scenario, ch)?;
        let r_hat = training_covariance(&scenario, &real, &spec.adc(spec.adc_bits_list[0]), run)?;
        let r_true = real.received_covariance();
        let mut out = vec![linalg::db(pre_adc_sinr(&linalg::identity(real.m()), &real)?)];
        let ideal = spec.pipeline(AnalogStage::Ideal, spec.adc_bits_list[0]);
        out.push(linalg::db(pre_adc_sinr(&analog_stage(&r_hat, &ideal, run)?.0, &real)?));
        out.push(linalg::db(crate::prewhiten::lemma1_sinr(real.mmse_sinr()?, real.m())));
        for &g in &spec.ps_bits_list {
            let cfg = spec.pipeline(AnalogStage::Psn(g), spec.adc_bits_list[0]);
            let (e, _) = analog_stage(&r_hat, &cfg, run)?;
            out.push(linalg::db(pre_adc_sinr(&e, &real)?));
            out.push(crate::prewhiten::whiteness_of(&e, &r_true)?);
        }
        Ok(out)
    });
    metric_table(spec, "sir_db", &names, results)
}

/// Shared body of the realized-SINR sweeps: DSP-only (optional) plus one
/// HIMAP variant per phase resolution, all on the same channel draw.
fn ppsinr_family(spec: &ExperimentSpec, point_name: &str, with_dsp: bool) -> Result<ResultTable> {
    let mut names = vec!["mmse_ref_db".to_string()];
    if with_dsp {
        names.push("dsp_ppsinr_db".into());
    }
    for g in &spec.ps_bits_list {
        let b = grid_label(*g);
        names.extend([format!("himap{b}_ppsinr_db"), format!("himap{b}_sync_rate")]);
    }
    let points = spec.points();
    let results = monte_carlo(spec, points.len(), |p, ch, run| {
        let point = points[p];
        let scenario = scenario_at(spec, point);
        let adc_bits = if spec.kind == ExperimentKind::AdcResolutionSweep { point } else { spec.adc_bits_list[0] };
        let real = realize_channel(&scenario, ch)?;
        let mut out = vec![linalg::db(real.mmse_sinr()?)];
        if with_dsp {
            let rec = run_pipeline_on(&scenario, &real, &spec.pipeline(AnalogStage::Bypass, adc_bits), run)?;
            out.push(rec.ppsinr_db);
        }
        for &g in &spec.ps_bits_list {
            let mut cfg = spec.pipeline(AnalogStage::Psn(g), adc_bits);
            if spec.kind == ExperimentKind::PhaseErrorSweep {
                cfg.phase_error = PhaseErrorModel { sigma_deg: point };
            }
            let rec = run_pipeline_on(&scenario, &real, &cfg, run)?;
            out.extend([rec.ppsinr_db, f64::from(u8::from(rec.sync_correct))]);
        }
        Ok(out)
    });
    metric_table(spec, point_name, &names, results)
}

fn roc(spec: &ExperimentSpec) -> Result<ResultTable> {
    let mut stages = vec![("dsp".to_string(), AnalogStage::Bypass)];
    stages.extend(spec.ps_bits_list.iter().map(|g| (format!("himap{}", grid_label(*g)), AnalogStage::Psn(*g))));
    let per_trial = monte_carlo(spec, 1, |_, ch, run| {
        let real: ChannelRealization = realize_channel(&spec.scenario, ch)?;
        stages
            .iter()
            .map(|(_, stage)| {
                let mut cfg = spec.pipeline(*stage, spec.adc_bits_list[0]);
                cfg.n_eval = 0;
                run_pipeline_on(&spec.scenario, &real, &cfg, run)
            })
            .collect::<Result<Vec<TrialRecord>>>()
    })
    .pop()
    .unwrap_or_default();
    let ok: Vec<&Vec<TrialRecord>> = per_trial.iter().filter_map(|r| r.as_ref().ok()).collect();
    let mut columns = vec!["far".to_string()];
    for (name, _) in &stages {
        columns.push(format!("{name}_pd"));
        columns.push(format!("{name}_far_empirical"));
    }
    columns.extend(["trials_ok".into(), "failures".into()]);
    let mut table = ResultTable::new(columns);
    for &far in &spec.far_grid {
        let mut row = vec![far];
        for s in 0..stages.len() {
            let recs: Vec<TrialRecord> = ok.iter().map(|v| v[s].clone()).collect();
            let (pd, fa) = roc_point(&recs, spec.scenario.m_antennas, spec.scenario.l2, far)?;
            row.extend([pd, fa]);
        }
        row.extend([ok.len() as f64, (per_trial.len() - ok.len()) as f64]);
        table.push_row(row)?;
    }
    Ok(table)
}

fn convergence(spec: &ExperimentSpec) -> Result<ResultTable> {
    let grids = &spec.ps_bits_list;
    let per_grid = monte_carlo(spec, grids.len(), |p, ch, run| {
        let real = realize_channel(&spec.scenario, ch)?;
        let r_hat = training_covariance(&spec.scenario, &real, &spec.adc(spec.adc_bits_list[0]), run)?;
        let (_, trace) = optimize_psn(&r_hat, grids[p], &spec.optimizer, run)?;
        if !trace.is_monotone() {
            return Err(HimapError::InvalidConfig("optimizer trace decreased".into()));
        }
        Ok(trace.objective_per_update)
    });
    let mut table = ResultTable::new(
        ["ps_bits", "update", "objective_mean", "objective_se", "fraction_above_0999", "trials_ok", "failures"]
            .map(String::from)
            .to_vec(),
    );
    for (g, results) in grids.iter().zip(per_grid) {
        let ok: Vec<&Vec<f64>> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
        let len = ok.iter().map(|t| t.len()).max().unwrap_or(0);
        for u in 0..len {
            let at = |t: &Vec<f64>| t.get(u).copied().unwrap_or(*t.last().unwrap());
            let (m, se, _) = mean_se(ok.iter().map(|t| at(t)));
            let frac = ok.iter().filter(|t| at(t) >= 0.999).count() as f64 / ok.len().max(1) as f64;
            table.push_row(vec![
                grid_value(*g),
                u as f64,
                m,
                se,
                frac,
                ok.len() as f64,
                (results.len() - ok.len()) as f64,
            ])?;
        }
    }
    Ok(table)
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let mut table = match spec.kind {
        ExperimentKind::PrewhitenerComparison => comparison(spec)?,
        ExperimentKind::ConvergenceTrace => convergence(spec)?,
        ExperimentKind::SinrSweep => sinr_sweep(spec)?,
        ExperimentKind::PpsinrSweep | ExperimentKind::RayleighSweep => ppsinr_family(spec, "sir_db", true)?,
        ExperimentKind::AdcResolutionSweep => ppsinr_family(spec, "adc_bits", true)?,
        ExperimentKind::PhaseErrorSweep => ppsinr_family(spec, "sigma_deg", false)?,
        ExperimentKind::Roc => roc(spec)?,
    };
    table.metadata = vec![
        ("experiment".into(), spec.kind.name().into()),
        ("seed".into(), spec.seed.to_string()),
        ("trials".into(), spec.trials.to_string()),
        ("spec_sha256".into(), spec.hash_hex()),
        ("himap_version".into(), env!("CARGO_PKG_VERSION").into()),
    ];
    Ok(table)
}
