//! C ABI for the emx models and fits.
//!
//! Every entry point returns an [`EmxStatus`]; on failure the message is kept
//! per thread and read back with [`emx_last_error`]. Objects cross the
//! boundary as opaque handles that must be released with their `_free`
//! function. Frequencies and rates are ordinary (Hz) on this side.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use emx_core::dynamics::{heating_closed_form, HeatingParams, RingdownTrace};
use emx_core::estimation::{fit_lorentzian, fit_ringdown, Convergence, FitReport};
use emx_core::model::{angular, ordinary, photons_from_input_power, CavityPair, MechMode};
use emx_core::spectra::{
    cooperativity, npsd_sii, occupancy_steady, s11_eit, s11_eit_jittered, JitterKernel,
    SpectrumTrace, TraceKind,
};
use emx_core::Error;

/// Result codes shared by all functions.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Singular = 3,
    InvalidTrace = 4,
    Integration = 5,
    FitFailed = 6,
    Parse = 7,
    Config = 8,
    Io = 9,
    NotFound = 10,
    Panic = 11,
}

impl From<&Error> for EmxStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidParameter { .. } => EmxStatus::InvalidParameter,
            Error::Singular(_) => EmxStatus::Singular,
            Error::InvalidTrace(_) => EmxStatus::InvalidTrace,
            Error::Integration(_) => EmxStatus::Integration,
            Error::Fit(_) => EmxStatus::FitFailed,
            Error::Parse { .. } => EmxStatus::Parse,
            Error::Config(_) => EmxStatus::Config,
            Error::Io { .. } | Error::MissingInputs(_) => EmxStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: EmxStatus, msg: impl Into<String>) -> EmxStatus {
    set_error(msg);
    status
}

/// Run `f`, turning core errors and panics into status codes.
fn guard<F>(f: F) -> EmxStatus
where
    F: FnOnce() -> Result<(), EmxStatus>,
{
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EmxStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(EmxStatus::Panic, "internal panic"),
    }
}

fn core<T>(r: emx_core::Result<T>) -> Result<T, EmxStatus> {
    r.map_err(|e| fail(EmxStatus::from(&e), e.to_string()))
}

fn null(what: &str) -> EmxStatus {
    fail(EmxStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], EmxStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], EmxStatus> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn write<T>(p: *mut T, v: T, what: &str) -> Result<(), EmxStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(v);
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn emx_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Device parameters, all rates and frequencies in Hz.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmxDeviceParams {
    pub omega_r0_hz: f64,
    pub coupling_j_hz: f64,
    pub kappa_plus_hz: f64,
    pub kappa_minus_hz: f64,
    pub kappa_e_plus_hz: f64,
    pub kappa_e_minus_hz: f64,
    pub n_bath_plus: f64,
    pub omega_m_hz: f64,
    pub gamma_i_hz: f64,
    pub n_bath_m: f64,
}

/// Opaque device handle.
pub struct EmxDevice {
    cav: CavityPair,
    mech: MechMode,
}

/// Fill `out` with the reference device.
///
/// # Safety
/// `out` must be NULL or point to writable memory for one `EmxDeviceParams`.
#[no_mangle]
pub unsafe extern "C" fn emx_device_default_params(out: *mut EmxDeviceParams) -> EmxStatus {
    guard(|| {
        let cfg = emx_core::io::ExperimentConfig::preset();
        let (cav, mech) = (cfg.cavity(), cfg.mech());
        write(
            out,
            EmxDeviceParams {
                omega_r0_hz: ordinary(cav.omega_r0),
                coupling_j_hz: ordinary(cav.coupling_j),
                kappa_plus_hz: ordinary(cav.kappa_plus),
                kappa_minus_hz: ordinary(cav.kappa_minus),
                kappa_e_plus_hz: ordinary(cav.kappa_e_plus),
                kappa_e_minus_hz: ordinary(cav.kappa_e_minus),
                n_bath_plus: cav.n_bath_plus,
                omega_m_hz: ordinary(mech.omega_m),
                gamma_i_hz: ordinary(mech.gamma_i),
                n_bath_m: mech.n_bath_m,
            },
            "out",
        )
    })
}

/// Validate `params` and allocate a device. Release with [`emx_device_free`].
///
/// # Safety
/// `params` must point to a valid `EmxDeviceParams`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn emx_device_new(
    params: *const EmxDeviceParams,
    out: *mut *mut EmxDevice,
) -> EmxStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        out.write(ptr::null_mut());
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        let cav = CavityPair {
            omega_r0: angular(p.omega_r0_hz),
            coupling_j: angular(p.coupling_j_hz),
            kappa_plus: angular(p.kappa_plus_hz),
            kappa_minus: angular(p.kappa_minus_hz),
            kappa_e_plus: angular(p.kappa_e_plus_hz),
            kappa_e_minus: angular(p.kappa_e_minus_hz),
            n_bath_plus: p.n_bath_plus,
        };
        let mech = MechMode {
            omega_m: angular(p.omega_m_hz),
            gamma_i: angular(p.gamma_i_hz),
            n_bath_m: p.n_bath_m,
        };
        core(cav.validate())?;
        core(mech.validate())?;
        out.write(Box::into_raw(Box::new(EmxDevice { cav, mech })));
        Ok(())
    })
}

/// # Safety
/// `dev` must be NULL or a handle from [`emx_device_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn emx_device_free(dev: *mut EmxDevice) {
    if !dev.is_null() {
        drop(Box::from_raw(dev));
    }
}

/// Reflection `S11` of the even supermode at `n` probe offsets from it (Hz),
/// for enhanced coupling `coupling_hz` and drive detuning
/// `omega_plus - omega_d` of `drive_detuning_hz`. A positive
/// `jitter_fwhm_hz` averages over Gaussian frequency jitter.
///
/// # Safety
/// `dev` must be a live handle; the arrays must hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn emx_s11(
    dev: *const EmxDevice,
    coupling_hz: f64,
    drive_detuning_hz: f64,
    jitter_fwhm_hz: f64,
    probe_offsets_hz: *const f64,
    n: usize,
    out_re: *mut f64,
    out_im: *mut f64,
) -> EmxStatus {
    guard(|| {
        let dev = dev.as_ref().ok_or_else(|| null("dev"))?;
        let offsets = slice(probe_offsets_hz, n, "probe_offsets_hz")?;
        let re = slice_mut(out_re, n, "out_re")?;
        let im = slice_mut(out_im, n, "out_im")?;
        let g = angular(coupling_hz);
        let delta = angular(drive_detuning_hz);
        let kernel = JitterKernel::gaussian(jitter_fwhm_hz);
        for (k, &f) in offsets.iter().enumerate() {
            let r = if jitter_fwhm_hz > 0.0 {
                s11_eit_jittered(angular(f), &dev.cav, &dev.mech, g, delta, &kernel, 61)
            } else {
                s11_eit(angular(f), &dev.cav, &dev.mech, g, delta)
            };
            let r = core(r)?;
            re[k] = r.re();
            im[k] = r.im();
        }
        Ok(())
    })
}

/// Output noise spectrum in vacuum units at `n` offsets from the drive (Hz).
///
/// # Safety
/// `dev` must be a live handle; the arrays must hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn emx_npsd(
    dev: *const EmxDevice,
    coupling_hz: f64,
    drive_detuning_hz: f64,
    offsets_hz: *const f64,
    n: usize,
    out: *mut f64,
) -> EmxStatus {
    guard(|| {
        let dev = dev.as_ref().ok_or_else(|| null("dev"))?;
        let offsets = slice(offsets_hz, n, "offsets_hz")?;
        let dst = slice_mut(out, n, "out")?;
        let g = angular(coupling_hz);
        let delta = angular(drive_detuning_hz);
        for (d, &f) in dst.iter_mut().zip(offsets) {
            *d = core(npsd_sii(angular(f), &dev.cav, &dev.mech, g, delta))?;
        }
        Ok(())
    })
}

/// Steady-state phonon occupancy under red-sideband pumping.
///
/// # Safety
/// `dev` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn emx_occupancy(
    dev: *const EmxDevice,
    coupling_hz: f64,
    out: *mut f64,
) -> EmxStatus {
    guard(|| {
        let dev = dev.as_ref().ok_or_else(|| null("dev"))?;
        let n = core(occupancy_steady(&dev.cav, &dev.mech, angular(coupling_hz)))?;
        write(out, n, "out")
    })
}

/// # Safety
/// `dev` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn emx_cooperativity(
    dev: *const EmxDevice,
    coupling_hz: f64,
    out: *mut f64,
) -> EmxStatus {
    guard(|| {
        let dev = dev.as_ref().ok_or_else(|| null("dev"))?;
        let c = core(cooperativity(
            angular(coupling_hz),
            dev.cav.kappa_plus,
            dev.mech.gamma_i,
        ))?;
        write(out, c, "out")
    })
}

/// Odd-mode intracavity photon number for `power_w` at the device input and a
/// drive at `drive_hz`.
///
/// # Safety
/// `dev` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn emx_photon_number(
    dev: *const EmxDevice,
    power_w: f64,
    drive_hz: f64,
    out: *mut f64,
) -> EmxStatus {
    guard(|| {
        let dev = dev.as_ref().ok_or_else(|| null("dev"))?;
        let omega_d = angular(drive_hz);
        let n = core(photons_from_input_power(
            power_w,
            omega_d,
            dev.cav.omega_minus() - omega_d,
            &dev.cav,
        ))?;
        write(out, n, "out")
    })
}

/// Pulsed-heating model parameters; rates in Hz.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmxHeatingParams {
    pub gamma_i_hz: f64,
    pub gamma_em_hz: f64,
    pub gamma_p_hz: f64,
    pub n_bath_m: f64,
    pub n_p: f64,
    pub delta_b: f64,
    pub gamma_s_hz: f64,
}

/// Phonon occupancy at `n` times (s) after the pump switches on.
///
/// # Safety
/// `params` must be valid; the arrays must hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn emx_heating_curve(
    params: *const EmxHeatingParams,
    times_s: *const f64,
    n: usize,
    out: *mut f64,
) -> EmxStatus {
    guard(|| {
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        let hp = HeatingParams {
            gamma_i: angular(p.gamma_i_hz),
            gamma_em: angular(p.gamma_em_hz),
            gamma_p: angular(p.gamma_p_hz),
            n_bath_m: p.n_bath_m,
            n_p: p.n_p,
            delta_b: p.delta_b,
            gamma_s: angular(p.gamma_s_hz),
        };
        let times = slice(times_s, n, "times_s")?;
        let dst = slice_mut(out, n, "out")?;
        for (d, &t) in dst.iter_mut().zip(times) {
            *d = core(heating_closed_form(t, &hp))?;
        }
        Ok(())
    })
}

/// Opaque fit result.
pub struct EmxFitReport {
    report: FitReport,
    names: Vec<CString>,
}

impl EmxFitReport {
    fn boxed(report: FitReport) -> *mut Self {
        let names = report
            .params
            .keys()
            .map(|k| CString::new(k.as_str()).unwrap_or_default())
            .collect();
        Box::into_raw(Box::new(EmxFitReport { report, names }))
    }
}

unsafe fn emit_report(out: *mut *mut EmxFitReport, r: FitReport) -> Result<(), EmxStatus> {
    out.write(EmxFitReport::boxed(r));
    Ok(())
}

/// Fit a bare-cavity `|S11|` trace (frequencies in Hz). The report holds
/// `omega_0`, `kappa` and `kappa_e`.
///
/// # Safety
/// The arrays must hold `n` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn emx_fit_lorentzian(
    freqs_hz: *const f64,
    magnitude: *const f64,
    n: usize,
    out: *mut *mut EmxFitReport,
) -> EmxStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        out.write(ptr::null_mut());
        let f = slice(freqs_hz, n, "freqs_hz")?;
        let m = slice(magnitude, n, "magnitude")?;
        let trace = core(SpectrumTrace::new(
            f.to_vec(),
            m.to_vec(),
            TraceKind::Reflection,
        ))?;
        emit_report(out, core(fit_lorentzian(&trace))?)
    })
}

/// Fit a power ringdown (times in s). The report holds `gamma_m` in Hz.
///
/// # Safety
/// The arrays must hold `n` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn emx_fit_ringdown(
    times_s: *const f64,
    power: *const f64,
    n: usize,
    out: *mut *mut EmxFitReport,
) -> EmxStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        out.write(ptr::null_mut());
        let t = slice(times_s, n, "times_s")?;
        let p = slice(power, n, "power")?;
        let trace = core(RingdownTrace::new(t.to_vec(), p.to_vec()))?;
        emit_report(out, core(fit_ringdown(&trace))?)
    })
}

/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn emx_report_param_count(report: *const EmxFitReport) -> usize {
    report.as_ref().map_or(0, |r| r.names.len())
}

/// Name of parameter `index`, or NULL when out of range. Owned by the report.
///
/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn emx_report_param_name(
    report: *const EmxFitReport,
    index: usize,
) -> *const c_char {
    report
        .as_ref()
        .and_then(|r| r.names.get(index))
        .map_or(ptr::null(), |s| s.as_ptr())
}

/// Value and standard error of the parameter called `name`.
///
/// # Safety
/// `report` must be a live handle, `name` a NUL-terminated string, and
/// `value`/`stderr` writable (either may be NULL to skip it).
#[no_mangle]
pub unsafe extern "C" fn emx_report_param(
    report: *const EmxFitReport,
    name: *const c_char,
    value: *mut f64,
    stderr: *mut f64,
) -> EmxStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        if name.is_null() {
            return Err(null("name"));
        }
        let name = CStr::from_ptr(name).to_string_lossy();
        let p = r
            .report
            .get(&name)
            .ok_or_else(|| fail(EmxStatus::NotFound, format!("no parameter `{name}`")))?;
        if !value.is_null() {
            value.write(p.value);
        }
        if !stderr.is_null() {
            stderr.write(p.stderr);
        }
        Ok(())
    })
}

/// True when the fit converged to a usable optimum.
///
/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn emx_report_converged(report: *const EmxFitReport) -> bool {
    report
        .as_ref()
        .is_some_and(|r| r.report.convergence == Convergence::Converged)
}

/// Text rendering of the report; release with [`emx_string_free`].
///
/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn emx_report_to_text(report: *const EmxFitReport) -> *mut c_char {
    report.as_ref().map_or(ptr::null_mut(), |r| {
        CString::new(r.report.to_text()).map_or(ptr::null_mut(), CString::into_raw)
    })
}

/// # Safety
/// `report` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn emx_report_free(report: *mut EmxFitReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn emx_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
