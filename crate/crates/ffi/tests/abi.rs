use std::ffi::{c_char, CStr, CString};
use std::ptr;

use himap_ffi::*;

fn last_error() -> String {
    let n = unsafe { himap_last_error_message(ptr::null_mut(), 0) };
    let mut buf = vec![0 as c_char; n + 1];
    unsafe { himap_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

/// Interleaved row-major covariance of a 70 dB interferer at 30 deg plus
/// a 25 dB signal at broadside over unit noise, two antennas.
fn strong_interferer_cov() -> Vec<f64> {
    let mut a = [0.0; 4];
    let mut g = [0.0; 4];
    unsafe {
        assert_eq!(himap_steering_vector(0.0, 2, a.as_mut_ptr()), HimapStatus::Ok);
        assert_eq!(himap_steering_vector(30.0, 2, g.as_mut_ptr()), HimapStatus::Ok);
    }
    let (ps, pi) = (10f64.powf(2.5), 10f64.powf(9.5));
    let mut r = vec![0.0; 8];
    for i in 0..2 {
        for j in 0..2 {
            // x_i conj(x_j)
            let outer = |v: &[f64; 4]| {
                (v[2 * i] * v[2 * j] + v[2 * i + 1] * v[2 * j + 1], v[2 * i + 1] * v[2 * j] - v[2 * i] * v[2 * j + 1])
            };
            let (sa, sb) = (outer(&a), outer(&g));
            r[2 * (2 * i + j)] = ps * sa.0 + pi * sb.0 + f64::from(u8::from(i == j));
            r[2 * (2 * i + j) + 1] = ps * sa.1 + pi * sb.1;
        }
    }
    r
}

#[test]
fn steering_vector_has_unit_modulus_entries() {
    let mut out = [0.0; 8];
    assert_eq!(unsafe { himap_steering_vector(30.0, 4, out.as_mut_ptr()) }, HimapStatus::Ok);
    for p in out.chunks(2) {
        assert!((p[0].hypot(p[1]) - 1.0).abs() < 1e-15);
    }
    // exp(-j pi sin 30deg) = -j
    assert!(out[2].abs() < 1e-15 && (out[3] + 1.0).abs() < 1e-15);
}

#[test]
fn scalar_entry_points() {
    assert!((himap_predicted_sqnr_db(-80.0, 12.0) + 12.11).abs() < 1e-12);
    let mut gamma = 0.0;
    assert_eq!(unsafe { himap_beta_threshold(2, 100, 1e-2, &mut gamma) }, HimapStatus::Ok);
    assert!(gamma > 0.0 && gamma < 1.0);
    assert_eq!(unsafe { himap_beta_threshold(2, 100, 2.0, &mut gamma) }, HimapStatus::InvalidArgument);
    assert!(!last_error().is_empty());
    let v = unsafe { CStr::from_ptr(himap_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn psn_round_trip() {
    let cov = strong_interferer_cov();
    let mut psn = ptr::null_mut();
    let st = unsafe { himap_psn_optimize(cov.as_ptr(), 2, 0, 7, ptr::null(), &mut psn) };
    assert_eq!(st, HimapStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { himap_psn_order(psn) }, 2);
    let mut w = 0.0;
    assert_eq!(unsafe { himap_psn_whiteness(psn, cov.as_ptr(), &mut w) }, HimapStatus::Ok);
    assert!(w > 0.999, "{w}");

    let n = unsafe { himap_psn_trace_len(psn) };
    let mut trace = vec![0.0; n];
    assert_eq!(unsafe { himap_psn_trace(psn, trace.as_mut_ptr(), n) }, HimapStatus::Ok);
    assert!(trace.windows(2).all(|p| p[1] >= p[0]));
    assert!((trace.last().unwrap() - w).abs() < 1e-9);

    let mut phases = [0.0; 4];
    assert_eq!(unsafe { himap_psn_phases(psn, phases.as_mut_ptr(), 3) }, HimapStatus::Dimension);
    assert_eq!(unsafe { himap_psn_phases(psn, phases.as_mut_ptr(), 4) }, HimapStatus::Ok);
    assert!(phases.iter().all(|p| (0.0..std::f64::consts::TAU).contains(p)));
    unsafe { himap_psn_free(psn) };
}

#[test]
fn quantized_psn_phases_are_on_grid() {
    let cov = strong_interferer_cov();
    let settings = HimapOptimizerSettings { restarts: 2, max_sweeps: 0, rel_tol: 0.0 };
    let mut psn = ptr::null_mut();
    assert_eq!(unsafe { himap_psn_optimize(cov.as_ptr(), 2, 3, 1, &settings, &mut psn) }, HimapStatus::Ok);
    let mut phases = [0.0; 4];
    unsafe { himap_psn_phases(psn, phases.as_mut_ptr(), 4) };
    let step = std::f64::consts::TAU / 8.0;
    for p in phases {
        assert!((p / step - (p / step).round()).abs() < 1e-9, "{p}");
    }
    unsafe { himap_psn_free(psn) };
}

#[test]
fn bad_inputs_map_to_status_codes() {
    let mut psn = ptr::null_mut();
    unsafe {
        assert_eq!(himap_psn_optimize(ptr::null(), 2, 0, 1, ptr::null(), &mut psn), HimapStatus::NullPointer);
        assert!(psn.is_null());
        // Not Hermitian
        let bad = [1.0, 0.0, 5.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        assert_eq!(himap_psn_optimize(bad.as_ptr(), 2, 0, 1, ptr::null(), &mut psn), HimapStatus::NotHermitian);
        // Indefinite
        let indef = [1.0, 0.0, 2.0, 0.0, 2.0, 0.0, 1.0, 0.0];
        assert_eq!(
            himap_psn_optimize(indef.as_ptr(), 2, 0, 1, ptr::null(), &mut psn),
            HimapStatus::NotPositiveDefinite
        );
        let nan = [f64::NAN; 8];
        assert_eq!(himap_psn_optimize(nan.as_ptr(), 2, 0, 1, ptr::null(), &mut psn), HimapStatus::NonFinite);
        let eye = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        assert_eq!(himap_psn_optimize(eye.as_ptr(), 2, 31, 1, ptr::null(), &mut psn), HimapStatus::InvalidArgument);
        assert_eq!(himap_steering_vector(0.0, 0, [0.0; 2].as_mut_ptr()), HimapStatus::Dimension);
        assert_eq!(himap_psn_whiteness(ptr::null(), eye.as_ptr(), &mut 0.0), HimapStatus::NullPointer);
        himap_psn_free(ptr::null_mut());
        himap_experiment_free(ptr::null_mut());
        himap_string_free(ptr::null_mut());
    }
    assert!(last_error().contains("NULL"));
}

#[test]
fn experiment_runs_deterministically() {
    let text = CString::new("experiment.kind = sinr_sweep\nsweep.sir_db = -70\npsn.bits = 6\n").unwrap();
    let mut exp = ptr::null_mut();
    unsafe {
        assert_eq!(himap_experiment_parse(text.as_ptr(), &mut exp), HimapStatus::Ok);
        assert_eq!(himap_experiment_set_trials(exp, 0), HimapStatus::InvalidArgument);
        assert_eq!(himap_experiment_set_trials(exp, 3), HimapStatus::Ok);
        assert_eq!(himap_experiment_set_seed(exp, 5), HimapStatus::Ok);
        let run = || {
            let mut csv = ptr::null_mut();
            assert_eq!(himap_experiment_run_csv(exp, &mut csv), HimapStatus::Ok);
            let s = CStr::from_ptr(csv).to_str().unwrap().to_owned();
            himap_string_free(csv);
            s
        };
        let (a, b) = (run(), run());
        assert_eq!(a, b);
        assert!(a.contains("# seed: 5") && a.contains("psn6_sinr_db_mean"));
        himap_experiment_free(exp);
    }
}

#[test]
fn spec_errors_carry_line_numbers() {
    let text = CString::new("experiment.kind = roc\nno.such.key = 1\n").unwrap();
    let mut exp = ptr::null_mut();
    assert_eq!(unsafe { himap_experiment_parse(text.as_ptr(), &mut exp) }, HimapStatus::SpecFile);
    assert!(exp.is_null());
    assert!(last_error().contains("line 2"), "{}", last_error());
}
