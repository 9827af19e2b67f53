//! C ABI for decay-core: opaque density handles, scalar evaluation
//! routines, and status codes. All functions are
//! null-safe and never unwind across the FFI boundary.

use decay_core::{amplitude, heff1d, spectral};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NumericFailure = 3,
}

/// Opaque spectral-density handle; create with the constructors below
/// and release with `decay_density_free`.
pub struct DecayDensity {
    inner: spectral::SpectralDensity,
}

fn status_of(e: &decay_core::Error) -> DecayStatus {
    use decay_core::Error;
    match e {
        Error::Domain(_) | Error::Config(_) | Error::ModelFile(_) => {
            DecayStatus::InvalidArgument
        }
        _ => DecayStatus::NumericFailure,
    }
}

fn guarded(f: impl FnOnce() -> DecayStatus) -> DecayStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or(DecayStatus::NumericFailure)
}

unsafe fn write_out<T>(ptr: *mut T, value: T) -> bool {
    if ptr.is_null() {
        return false;
    }
    *ptr = value;
    true
}

fn make_density(
    out: *mut *mut DecayDensity,
    build: impl FnOnce() -> decay_core::Result<spectral::SpectralDensity>,
) -> DecayStatus {
    guarded(|| {
        if out.is_null() {
            return DecayStatus::NullPointer;
        }
        match build() {
            Ok(inner) => {
                let handle = Box::into_raw(Box::new(DecayDensity { inner }));
                unsafe { *out = handle };
                DecayStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Truncated Breit-Wigner density with resonance `e0`, width `gamma0`,
/// and threshold `emin`.
#[no_mangle]
pub extern "C" fn decay_density_breit_wigner(
    e0: f64,
    gamma0: f64,
    emin: f64,
    out: *mut *mut DecayDensity,
) -> DecayStatus {
    make_density(out, || spectral::SpectralDensity::breit_wigner(e0, gamma0, emin))
}

/// Linear-onset density `(E - emin) exp(-(E - emin)/scale) / scale^2`.
#[no_mangle]
pub extern "C" fn decay_density_linear_onset(
    emin: f64,
    scale: f64,
    out: *mut *mut DecayDensity,
) -> DecayStatus {
    make_density(out, || spectral::SpectralDensity::linear_onset(emin, scale))
}

/// Release a density handle. Passing NULL is a no-op.
#[no_mangle]
pub extern "C" fn decay_density_free(d: *mut DecayDensity) {
    if !d.is_null() {
        unsafe { drop(Box::from_raw(d)) };
    }
}

/// Density value `omega(E)`.
#[no_mangle]
pub extern "C" fn decay_density_value(
    d: *const DecayDensity,
    e: f64,
    out: *mut f64,
) -> DecayStatus {
    guarded(|| {
        let Some(d) = (unsafe { d.as_ref() }) else {
            return DecayStatus::NullPointer;
        };
        if unsafe { write_out(out, d.inner.value(e)) } {
            DecayStatus::Ok
        } else {
            DecayStatus::NullPointer
        }
    })
}

/// Survival amplitude `a(t)`; real and imaginary parts written to the
/// output pointers.
#[no_mangle]
pub extern "C" fn decay_survival_amplitude(
    d: *const DecayDensity,
    t: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> DecayStatus {
    guarded(|| {
        let Some(d) = (unsafe { d.as_ref() }) else {
            return DecayStatus::NullPointer;
        };
        if out_re.is_null() || out_im.is_null() {
            return DecayStatus::NullPointer;
        }
        match amplitude::survival_best(&d.inner, t, 1e-10) {
            Ok((a, _)) => unsafe {
                *out_re = a.re;
                *out_im = a.im;
                DecayStatus::Ok
            },
            Err(e) => status_of(&e),
        }
    })
}

/// Survival probability `P(t) = |a(t)|^2`.
#[no_mangle]
pub extern "C" fn decay_survival_probability(
    d: *const DecayDensity,
    t: f64,
    out: *mut f64,
) -> DecayStatus {
    guarded(|| {
        let Some(d) = (unsafe { d.as_ref() }) else {
            return DecayStatus::NullPointer;
        };
        if out.is_null() {
            return DecayStatus::NullPointer;
        }
        match amplitude::survival_best(&d.inner, t, 1e-10) {
            Ok((a, _)) => unsafe {
                *out = a.norm_sqr();
                DecayStatus::Ok
            },
            Err(e) => status_of(&e),
        }
    })
}

/// Effective Hamiltonian `h(t) = i adot/a`. `out_trusted` is 1 where the
/// value is reliable, 0 in the near-zero transition region.
#[no_mangle]
pub extern "C" fn decay_effective_hamiltonian(
    d: *const DecayDensity,
    t: f64,
    out_re: *mut f64,
    out_im: *mut f64,
    out_trusted: *mut i32,
) -> DecayStatus {
    guarded(|| {
        let Some(d) = (unsafe { d.as_ref() }) else {
            return DecayStatus::NullPointer;
        };
        if out_re.is_null() || out_im.is_null() || out_trusted.is_null() {
            return DecayStatus::NullPointer;
        }
        match heff1d::effective_hamiltonian(&d.inner, t, 1e-10) {
            Ok(s) => unsafe {
                *out_re = s.h.re;
                *out_im = s.h.im;
                *out_trusted = s.trusted as i32;
                DecayStatus::Ok
            },
            Err(e) => status_of(&e),
        }
    })
}

/// Crossover time where the exponential and background amplitude parts
/// balance.
#[no_mangle]
pub extern "C" fn decay_transition_time(
    d: *const DecayDensity,
    out: *mut f64,
) -> DecayStatus {
    guarded(|| {
        let Some(d) = (unsafe { d.as_ref() }) else {
            return DecayStatus::NullPointer;
        };
        if out.is_null() {
            return DecayStatus::NullPointer;
        }
        match heff1d::transition_time(&d.inner) {
            Ok(r) => unsafe {
                *out = r.t_as;
                DecayStatus::Ok
            },
            Err(e) => status_of(&e),
        }
    })
}

/// Power-law exponent of `P(t)` fitted over `[t_lo, t_hi]`.
#[no_mangle]
pub extern "C" fn decay_tail_exponent(
    d: *const DecayDensity,
    t_lo: f64,
    t_hi: f64,
    out: *mut f64,
) -> DecayStatus {
    guarded(|| {
        let Some(d) = (unsafe { d.as_ref() }) else {
            return DecayStatus::NullPointer;
        };
        if out.is_null() {
            return DecayStatus::NullPointer;
        }
        match heff1d::tail_exponent(&d.inner, (t_lo, t_hi)) {
            Ok(lambda) => unsafe {
                *out = lambda;
                DecayStatus::Ok
            },
            Err(e) => status_of(&e),
        }
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn decay_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn breit_wigner_round_trip() {
        let mut handle: *mut DecayDensity = std::ptr::null_mut();
        let st = decay_density_breit_wigner(25.0, 1.0, 0.0, &mut handle);
        assert_eq!(st, DecayStatus::Ok);
        let mut p = 0.0;
        assert_eq!(decay_survival_probability(handle, 0.0, &mut p), DecayStatus::Ok);
        assert!((p - 1.0).abs() < 1e-12);
        let mut tas = 0.0;
        assert_eq!(decay_transition_time(handle, &mut tas), DecayStatus::Ok);
        assert!((tas - 22.8).abs() < 0.5, "t_as = {tas}");
        decay_density_free(handle);
    }

    #[test]
    fn null_and_invalid_inputs() {
        let mut handle: *mut DecayDensity = std::ptr::null_mut();
        assert_eq!(
            decay_density_breit_wigner(25.0, -1.0, 0.0, &mut handle),
            DecayStatus::InvalidArgument
        );
        assert_eq!(
            decay_density_breit_wigner(25.0, 1.0, 0.0, std::ptr::null_mut()),
            DecayStatus::NullPointer
        );
        let mut p = 0.0;
        assert_eq!(
            decay_survival_probability(std::ptr::null(), 1.0, &mut p),
            DecayStatus::NullPointer
        );
        decay_density_free(std::ptr::null_mut());
    }

    #[test]
    fn version_is_nul_terminated() {
        let v = decay_version();
        let s = unsafe { std::ffi::CStr::from_ptr(v) };
        assert_eq!(s.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
