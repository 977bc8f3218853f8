//! Plain-text experiment specs: one `key = value` per line, `#` comments,
//! lists comma-separated, `inf` for unlimited resolution. Keys not set keep
//! the defaults of the chosen `experiment.kind`, which must come first.

use std::fmt::Write as _;

use super::experiment::{grid_label, ExperimentKind, ExperimentSpec};
use crate::error::{HimapError, Result};
use crate::prewhiten::PhaseGrid;
use crate::scenario::{ChannelKind, InterferenceWaveform};

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("experiment.kind", "one of the names printed by `list-experiments`"),
    ("experiment.trials", "Monte-Carlo trials per sweep point"),
    ("experiment.seed", "root seed"),
    ("scenario.m", "number of antennas"),
    ("scenario.k", "number of interferers"),
    ("scenario.doas_deg", "interferer directions, degrees (K values)"),
    ("scenario.signal_doa_deg", "signal direction, degrees"),
    ("scenario.snr_db", "per-antenna signal-to-noise ratio"),
    ("scenario.sir_db", "signal-to-total-interference ratio when SIR is not swept (`inf` with K = 0)"),
    ("scenario.channel", "`los` or `rayleigh`"),
    ("scenario.interference", "`constant_envelope` or `gaussian`"),
    ("scenario.l1", "training samples for the covariance estimate"),
    ("scenario.l2", "preamble length"),
    ("sweep.sir_db", "swept SIR values (SIR sweeps and the prewhitener comparison)"),
    ("sweep.sigma_deg", "swept phase-error standard deviations, degrees"),
    ("psn.bits", "phase-shifter resolutions, `inf` for continuous"),
    ("psn.phase_error_deg", "phase-error standard deviation when not swept"),
    ("adc.bits", "ADC resolutions (swept by adc_resolution_sweep, else the first is used)"),
    ("adc.headroom", "ADC full scale as a multiple of the rail RMS"),
    ("detector.far", "target false-alarm rate of the detector"),
    ("detector.far_grid", "false-alarm rates evaluated by roc"),
    ("detector.q_window", "windows searched for the peak after the first exceedance"),
    ("detector.preamble_offset", "samples of silence before the preamble"),
    ("detector.payload_len", "payload samples after the preamble"),
    ("optimizer.restarts", "random initializations per optimization"),
    ("optimizer.max_sweeps", "row sweeps per initialization"),
    ("optimizer.rel_tol", "stop when a sweep improves less than this fraction"),
    ("optimizer.grid_fallback_points", "grid size of the scalar solver's fallback search"),
    ("eval.n_eval", "fresh samples for the realized SINR"),
    ("eval.exact_estimates", "`true` to use exact covariance and channel"),
];

fn num(v: &str) -> std::result::Result<f64, String> {
    match v {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => v.parse::<f64>().map_err(|e| format!("{v:?} is not a number ({e})")),
    }
}

fn list(v: &str) -> std::result::Result<Vec<f64>, String> {
    if v.trim().is_empty() {
        return Ok(vec![]);
    }
    v.split(',').map(|x| num(x.trim())).collect()
}

fn uint(v: &str) -> std::result::Result<usize, String> {
    v.parse::<usize>().map_err(|e| format!("{v:?} is not a non-negative integer ({e})"))
}

fn grid(b: f64) -> std::result::Result<PhaseGrid, String> {
    if b.is_infinite() && b > 0.0 {
        Ok(PhaseGrid::CONTINUOUS)
    } else if b.fract() == 0.0 && (1.0..=30.0).contains(&b) {
        Ok(PhaseGrid::bits(b as u32))
    } else {
        Err(format!("phase resolution {b} must be an integer in 1..=30 or inf"))
    }
}

pub fn parse_spec(text: &str) -> Result<ExperimentSpec> {
    let mut spec: Option<ExperimentSpec> = None;
    let mut seen: Vec<String> = vec![];
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |msg: String| HimapError::SpecFile { line: line_no, msg };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(err(format!("unknown key {key:?}")));
        }
        if seen.iter().any(|k| k == key) {
            return Err(err(format!("duplicate key {key:?}")));
        }
        seen.push(key.to_string());
        if key == "experiment.kind" {
            let kind =
                ExperimentKind::from_name(value).ok_or_else(|| err(format!("unknown experiment kind {value:?}")))?;
            spec = Some(ExperimentSpec::new(kind));
            continue;
        }
        let s = spec.as_mut().ok_or_else(|| err("experiment.kind must be the first key".into()))?;
        apply(s, key, value).map_err(err)?;
    }
    let spec = spec.ok_or(HimapError::SpecFile { line: 0, msg: "missing experiment.kind".into() })?;
    if spec.scenario.interferer_doas_deg.len() != spec.scenario.k_interferers {
        return Err(HimapError::InvalidConfig(format!(
            "scenario.k = {} but scenario.doas_deg lists {} directions",
            spec.scenario.k_interferers,
            spec.scenario.interferer_doas_deg.len()
        )));
    }
    Ok(spec)
}

fn apply(s: &mut ExperimentSpec, key: &str, v: &str) -> std::result::Result<(), String> {
    match key {
        "experiment.trials" => s.trials = uint(v)?,
        "experiment.seed" => s.seed = v.parse().map_err(|e| format!("{v:?} is not a seed ({e})"))?,
        "scenario.m" => s.scenario.m_antennas = uint(v)?,
        "scenario.k" => s.scenario.k_interferers = uint(v)?,
        "scenario.doas_deg" => s.scenario.interferer_doas_deg = list(v)?,
        "scenario.signal_doa_deg" => s.scenario.signal_doa_deg = num(v)?,
        "scenario.snr_db" => s.scenario.snr_db = num(v)?,
        "scenario.sir_db" => s.scenario.sir_db = num(v)?,
        "scenario.channel" => {
            s.scenario.channel = match v {
                "los" => ChannelKind::LineOfSight,
                "rayleigh" => ChannelKind::Rayleigh,
                _ => return Err(format!("channel must be `los` or `rayleigh`, got {v:?}")),
            }
        }
        "scenario.interference" => {
            s.scenario.interference = match v {
                "constant_envelope" => InterferenceWaveform::ConstantEnvelope,
                "gaussian" => InterferenceWaveform::Gaussian,
                _ => return Err(format!("interference must be `constant_envelope` or `gaussian`, got {v:?}")),
            }
        }
        "scenario.l1" => s.scenario.l1 = uint(v)?,
        "scenario.l2" => s.scenario.l2 = uint(v)?,
        "sweep.sir_db" | "sweep.sigma_deg" => {
            if s.kind.sweep_key() != Some(key) {
                return Err(format!("{key} does not apply to {}", s.kind));
            }
            s.sweep_values = list(v)?;
        }
        "psn.bits" => s.ps_bits_list = list(v)?.into_iter().map(grid).collect::<std::result::Result<_, _>>()?,
        "psn.phase_error_deg" => s.phase_error.sigma_deg = num(v)?,
        "adc.bits" => s.adc_bits_list = list(v)?,
        "adc.headroom" => s.adc_headroom = num(v)?,
        "detector.far" => s.detector.far_target = num(v)?,
        "detector.far_grid" => s.far_grid = list(v)?,
        "detector.q_window" => s.detector.q_window = uint(v)?,
        "detector.preamble_offset" => s.preamble_offset = uint(v)?,
        "detector.payload_len" => s.payload_len = uint(v)?,
        "optimizer.restarts" => s.optimizer.restarts = uint(v)?,
        "optimizer.max_sweeps" => s.optimizer.max_sweeps = uint(v)?,
        "optimizer.rel_tol" => s.optimizer.rel_tol = num(v)?,
        "optimizer.grid_fallback_points" => s.optimizer.grid_fallback_points = uint(v)?,
        "eval.n_eval" => s.n_eval = uint(v)?,
        "eval.exact_estimates" => {
            s.exact_estimates = v.parse().map_err(|_| format!("expected `true` or `false`, got {v:?}"))?
        }
        _ => unreachable!("key list and parser disagree on {key}"),
    }
    Ok(())
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

/// Canonical text of a spec; parsing it gives the same spec back.
pub fn render_spec(s: &ExperimentSpec) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    kv("experiment.kind", s.kind.name().into());
    kv("experiment.trials", s.trials.to_string());
    kv("experiment.seed", s.seed.to_string());
    let sc = &s.scenario;
    kv("scenario.m", sc.m_antennas.to_string());
    kv("scenario.k", sc.k_interferers.to_string());
    kv("scenario.doas_deg", join(&sc.interferer_doas_deg));
    kv("scenario.signal_doa_deg", sc.signal_doa_deg.to_string());
    kv("scenario.snr_db", sc.snr_db.to_string());
    kv("scenario.sir_db", sc.sir_db.to_string());
    kv(
        "scenario.channel",
        match sc.channel {
            ChannelKind::LineOfSight => "los",
            ChannelKind::Rayleigh => "rayleigh",
        }
        .into(),
    );
    kv(
        "scenario.interference",
        match sc.interference {
            InterferenceWaveform::ConstantEnvelope => "constant_envelope",
            InterferenceWaveform::Gaussian => "gaussian",
        }
        .into(),
    );
    kv("scenario.l1", sc.l1.to_string());
    kv("scenario.l2", sc.l2.to_string());
    if let Some(key @ ("sweep.sir_db" | "sweep.sigma_deg")) = s.kind.sweep_key() {
        kv(key, join(&s.sweep_values));
    }
    kv("psn.bits", s.ps_bits_list.iter().map(|g| grid_label(*g)).collect::<Vec<_>>().join(", "));
    kv("psn.phase_error_deg", s.phase_error.sigma_deg.to_string());
    kv("adc.bits", join(&s.adc_bits_list));
    kv("adc.headroom", s.adc_headroom.to_string());
    kv("detector.far", s.detector.far_target.to_string());
    kv("detector.far_grid", join(&s.far_grid));
    kv("detector.q_window", s.detector.q_window.to_string());
    kv("detector.preamble_offset", s.preamble_offset.to_string());
    kv("detector.payload_len", s.payload_len.to_string());
    kv("optimizer.restarts", s.optimizer.restarts.to_string());
    kv("optimizer.max_sweeps", s.optimizer.max_sweeps.to_string());
    kv("optimizer.rel_tol", s.optimizer.rel_tol.to_string());
    kv("optimizer.grid_fallback_points", s.optimizer.grid_fallback_points.to_string());
    kv("eval.n_eval", s.n_eval.to_string());
    kv("eval.exact_estimates", s.exact_estimates.to_string());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_text_round_trips() {
        for kind in ExperimentKind::ALL {
            let spec = ExperimentSpec::new(kind);
            let back = parse_spec(&render_spec(&spec)).unwrap();
            assert_eq!(back, spec, "{kind}");
        }
    }

    #[test]
    fn parses_a_hand_written_spec() {
        let text = "\
# detection check
experiment.kind = roc
experiment.trials = 20   # quick
scenario.sir_db = -90
psn.bits = 6, inf
detector.far_grid = 1e-3, 1e-2
";
        let spec = parse_spec(text).unwrap();
        assert_eq!(spec.kind, ExperimentKind::Roc);
        assert_eq!(spec.trials, 20);
        assert_eq!(spec.scenario.sir_db, -90.0);
        assert_eq!(spec.ps_bits_list, vec![PhaseGrid::bits(6), PhaseGrid::CONTINUOUS]);
        assert_eq!(spec.far_grid, vec![1e-3, 1e-2]);
    }

    #[test]
    fn reports_line_numbers_for_errors() {
        let cases = [
            ("experiment.kind = roc\nscenario.bogus = 1\n", 2),
            ("scenario.m = 2\n", 1),
            ("experiment.kind = roc\nscenario.m = two\n", 2),
            ("experiment.kind = roc\nscenario.m = 2\nscenario.m = 3\n", 3),
            ("experiment.kind = roc\nsweep.sir_db = -10\n", 2),
            ("experiment.kind = roc\npsn.bits = 2.5\n", 2),
            ("experiment.kind = nope\n", 1),
            ("experiment.kind = roc\njust words\n", 2),
        ];
        for (text, line) in cases {
            match parse_spec(text) {
                Err(HimapError::SpecFile { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        assert!(parse_spec("experiment.kind = roc\nscenario.k = 2\n").is_err());
        assert!(parse_spec("# empty\n").is_err());
    }
}
