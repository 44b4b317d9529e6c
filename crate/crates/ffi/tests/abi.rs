use std::ffi::{CStr, CString};
use std::ptr;

use emx_ffi::*;

fn device() -> *mut EmxDevice {
    let mut params = std::mem::MaybeUninit::<EmxDeviceParams>::uninit();
    let mut dev = ptr::null_mut();
    unsafe {
        assert_eq!(
            emx_device_default_params(params.as_mut_ptr()),
            EmxStatus::Ok
        );
        assert_eq!(emx_device_new(params.as_ptr(), &mut dev), EmxStatus::Ok);
    }
    dev
}

fn last_error() -> String {
    let p = emx_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn bare_cavity_reflection_dips_on_resonance() {
    let dev = device();
    let offsets = [-1e6, 0.0, 1e6];
    let (mut re, mut im) = ([0.0; 3], [0.0; 3]);
    let st = unsafe {
        emx_s11(
            dev,
            0.0,
            424.7e6,
            0.0,
            offsets.as_ptr(),
            3,
            re.as_mut_ptr(),
            im.as_mut_ptr(),
        )
    };
    assert_eq!(st, EmxStatus::Ok);
    // 1 - 2κe/κ at the centre
    assert!((re[1] - (1.0 - 2.0 * 85.3e3 / 230e3)).abs() < 1e-9);
    assert!(im[1].abs() < 1e-12);
    assert!(re[0] > 0.99 && re[2] > 0.99);
    unsafe { emx_device_free(dev) };
}

#[test]
fn invalid_device_reports_parameter() {
    let mut params = std::mem::MaybeUninit::<EmxDeviceParams>::uninit();
    let mut dev = ptr::null_mut();
    unsafe {
        emx_device_default_params(params.as_mut_ptr());
        let mut p = params.assume_init();
        p.kappa_e_plus_hz = 2.0 * p.kappa_plus_hz;
        assert_eq!(emx_device_new(&p, &mut dev), EmxStatus::InvalidParameter);
    }
    assert!(dev.is_null());
    assert!(last_error().contains("kappa_e_plus"));
}

#[test]
fn null_pointers_are_rejected() {
    let mut out = 0.0;
    let st = unsafe { emx_occupancy(ptr::null(), 1e3, &mut out) };
    assert_eq!(st, EmxStatus::NullPointer);
    assert!(last_error().contains("dev"));
    let dev = device();
    let st = unsafe { emx_npsd(dev, 1e3, 424.7e6, ptr::null(), 4, &mut out) };
    assert_eq!(st, EmxStatus::NullPointer);
    unsafe { emx_device_free(dev) };
}

#[test]
fn scalar_models() {
    let dev = device();
    let (mut n, mut c, mut nd) = (0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(emx_occupancy(dev, 0.0, &mut n), EmxStatus::Ok);
        assert_eq!(
            emx_cooperativity(dev, 17.3 * 4.3e5f64.sqrt(), &mut c),
            EmxStatus::Ok
        );
        assert_eq!(
            emx_photon_number(dev, 0.62e-15, 10.5683e9, &mut nd),
            EmxStatus::Ok
        );
    }
    assert!((n - 1.5).abs() < 1e-12);
    assert!((28.0..=36.0).contains(&c), "{c}");
    assert!(nd > 0.0);
    unsafe { emx_device_free(dev) };
}

#[test]
fn heating_curve_starts_at_bath() {
    let p = EmxHeatingParams {
        gamma_i_hz: 68.0,
        gamma_em_hz: 370.0,
        gamma_p_hz: 100.0,
        n_bath_m: 1.5,
        n_p: 46.8,
        delta_b: 0.5,
        gamma_s_hz: 50.0,
    };
    let t = [0.0, 1e-3, 1.0];
    let mut out = [0.0; 3];
    assert_eq!(
        unsafe { emx_heating_curve(&p, t.as_ptr(), 3, out.as_mut_ptr()) },
        EmxStatus::Ok
    );
    assert!((out[0] - 1.5).abs() < 1e-12);
    let n_hot = (100.0 * 46.8 + 68.0 * 1.5) / 538.0;
    assert!((out[2] - n_hot).abs() < 1e-6);
}

#[test]
fn lorentzian_fit_round_trip() {
    let (f0, kappa, kappa_e) = (10.9975e9, 230e3, 85.3e3);
    let freqs: Vec<f64> = (0..801).map(|i| f0 - 1e6 + 2.5e3 * i as f64).collect();
    let mag: Vec<f64> = freqs
        .iter()
        .map(|&f| {
            let d = f - f0;
            let den = num(kappa / 2.0, d);
            ((1.0 - kappa_e * den.0).powi(2) + (kappa_e * den.1).powi(2)).sqrt()
        })
        .collect();
    let mut rep = ptr::null_mut();
    let st = unsafe { emx_fit_lorentzian(freqs.as_ptr(), mag.as_ptr(), freqs.len(), &mut rep) };
    assert_eq!(st, EmxStatus::Ok);
    unsafe {
        assert!(emx_report_converged(rep));
        assert_eq!(emx_report_param_count(rep), 3);
        let name = CStr::from_ptr(emx_report_param_name(rep, 1))
            .to_str()
            .unwrap();
        assert_eq!(name, "kappa");
        assert!(emx_report_param_name(rep, 3).is_null());
        let (mut v, mut s) = (0.0, 0.0);
        let key = CString::new("kappa_e").unwrap();
        assert_eq!(
            emx_report_param(rep, key.as_ptr(), &mut v, &mut s),
            EmxStatus::Ok
        );
        assert!((v / kappa_e - 1.0).abs() < 1e-4, "{v}");
        let missing = CString::new("nope").unwrap();
        assert_eq!(
            emx_report_param(rep, missing.as_ptr(), &mut v, ptr::null_mut()),
            EmxStatus::NotFound
        );
        let text = emx_report_to_text(rep);
        assert!(CStr::from_ptr(text)
            .to_str()
            .unwrap()
            .starts_with("[report]"));
        emx_string_free(text);
        emx_report_free(rep);
    }
}

/// `1/(a + i b)` as (re, im).
fn num(a: f64, b: f64) -> (f64, f64) {
    let d = a * a + b * b;
    (a / d, -b / d)
}

#[test]
fn ringdown_fit_recovers_rate() {
    let gamma_hz: f64 = 68.0;
    let t: Vec<f64> = (0..2000)
        .map(|i| i as f64 * 5.0 / (2.0 * std::f64::consts::PI * gamma_hz) / 2000.0)
        .collect();
    let p: Vec<f64> = t
        .iter()
        .map(|&t| (-2.0 * std::f64::consts::PI * gamma_hz * t).exp())
        .collect();
    let mut rep = ptr::null_mut();
    unsafe {
        assert_eq!(
            emx_fit_ringdown(t.as_ptr(), p.as_ptr(), t.len(), &mut rep),
            EmxStatus::Ok
        );
        let key = CString::new("gamma_m").unwrap();
        let mut v = 0.0;
        assert_eq!(
            emx_report_param(rep, key.as_ptr(), &mut v, ptr::null_mut()),
            EmxStatus::Ok
        );
        assert!((v - gamma_hz).abs() < 1e-3, "{v}");
        emx_report_free(rep);
    }
}

#[test]
fn short_trace_is_an_error_not_a_handle() {
    let mut rep = ptr::null_mut();
    let x = [1.0];
    let st = unsafe { emx_fit_lorentzian(x.as_ptr(), x.as_ptr(), 1, &mut rep) };
    assert_ne!(st, EmxStatus::Ok);
    assert!(rep.is_null());
    assert!(!last_error().is_empty());
}
