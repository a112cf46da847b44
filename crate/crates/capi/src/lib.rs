//! C ABI over the lab: opaque handles, integer error codes, and UTF-8 bit
//! strings. The header `include/monolab.h` is generated by cbindgen at build
//! time and committed for consumers without a Rust toolchain.
//!
//! Conventions:
//! - Every function that can fail returns a [`MonolabStatus`]; on failure a
//!   thread-local message is readable via [`monolab_last_error`] until the
//!   next failing call on the same thread.
//! - Returned strings are allocated by this library and must be released
//!   with [`monolab_string_free`].
//! - Bit strings cross the boundary as NUL-terminated ASCII of `0`/`1`.
//!   Descriptors additionally accept the s-expression forms, e.g.
//!   `(diag (const 0))`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use monolab::adversary;
use monolab::bits::BitString;
use monolab::complexity::{self, IncompressibleMode};
use monolab::dsl;
use monolab::harness::cache::DiskCache;
use monolab::predictors;
use monolab::vm::{self, Program, RunStatus};
use monolab::{Error, Lab};

/// Opaque handle to a shared execution context.
pub struct MonolabLab {
    inner: Lab,
}

/// Result codes for every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonolabStatus {
    MonolabOk = 0,
    MonolabNullPointer = 1,
    MonolabInvalidArgument = 2,
    MonolabParseError = 3,
    MonolabBudgetExceeded = 4,
    MonolabIoError = 5,
    MonolabInternalError = 6,
}

/// Why a machine run stopped.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonolabRunStatus {
    MonolabRunHalted = 0,
    MonolabRunFuelExhausted = 1,
    MonolabRunOutputLimit = 2,
    MonolabRunInputExhausted = 3,
    MonolabRunEmptyProgram = 4,
}

/// Outcome of a machine run.
#[repr(C)]
pub struct MonolabRunResult {
    pub status: MonolabRunStatus,
    pub steps_used: u64,
    /// Output bits as ASCII; free with `monolab_string_free`.
    pub output: *mut c_char,
}

/// Learning verdict of a predictor on a generator's sequence.
#[repr(C)]
pub struct MonolabLearnVerdict {
    pub learned_at_horizon: bool,
    pub partial: bool,
    pub error_count: u64,
    pub convergence_step: u64,
}

/// Outcome of a diagonal duel.
#[repr(C)]
pub struct MonolabDefeatReport {
    pub all_wrong: bool,
    pub wrong_positions: u64,
    pub pred_code_bits: u64,
    pub diag_code_bits: u64,
}

/// Complexity-estimate flavors.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonolabKhatVariant {
    MonolabKhatHalting = 0,
    MonolabKhatMonotone = 1,
    MonolabKhatDl = 2,
}

/// A complexity upper bound. `found == false` means no witness within the
/// caps, and `value_bits`/`witness` are meaningless.
#[repr(C)]
pub struct MonolabEstimate {
    pub found: bool,
    pub value_bits: u64,
    /// Witness rendering (program bits or descriptor s-expression); free with
    /// `monolab_string_free`. Null when `found` is false.
    pub witness: *mut c_char,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = message);
}

fn status_of(e: &Error) -> MonolabStatus {
    match e {
        Error::InvalidArgument(_) => MonolabStatus::MonolabInvalidArgument,
        Error::Decode(_) | Error::Parse(_) => MonolabStatus::MonolabParseError,
        Error::BudgetExceeded(_) => MonolabStatus::MonolabBudgetExceeded,
        Error::Io(_) => MonolabStatus::MonolabIoError,
        Error::CacheCorruption(_) | Error::Config(_) => MonolabStatus::MonolabInternalError,
    }
}

fn fail(e: Error) -> MonolabStatus {
    let status = status_of(&e);
    set_error(&e.to_string());
    status
}

/// Last error message on this thread; valid until the next failing call.
/// Never null. Do not free.
#[no_mangle]
pub extern "C" fn monolab_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Releases a string returned by this library. Null is accepted.
///
/// # Safety
/// `s` must have been returned by a monolab function and not freed before.
#[no_mangle]
pub unsafe extern "C" fn monolab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates an execution context.
#[no_mangle]
pub extern "C" fn monolab_lab_new() -> *mut MonolabLab {
    Box::into_raw(Box::new(MonolabLab { inner: Lab::new() }))
}

/// Creates an execution context backed by an on-disk run cache.
/// Returns null on failure (see `monolab_last_error`).
///
/// # Safety
/// `cache_dir` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn monolab_lab_with_cache(cache_dir: *const c_char) -> *mut MonolabLab {
    if cache_dir.is_null() {
        set_error("cache_dir is null");
        return std::ptr::null_mut();
    }
    let Ok(dir) = CStr::from_ptr(cache_dir).to_str() else {
        set_error("cache_dir is not valid UTF-8");
        return std::ptr::null_mut();
    };
    match DiskCache::open(Path::new(dir)) {
        Ok(cache) => Box::into_raw(Box::new(MonolabLab {
            inner: Lab::with_disk_cache(cache),
        })),
        Err(e) => {
            set_error(&e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Releases an execution context. Null is accepted.
///
/// # Safety
/// `lab` must have come from `monolab_lab_new`/`monolab_lab_with_cache` and
/// must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn monolab_lab_free(lab: *mut MonolabLab) {
    if !lab.is_null() {
        drop(Box::from_raw(lab));
    }
}

unsafe fn read_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, MonolabStatus> {
    if ptr.is_null() {
        set_error(&format!("{what} is null"));
        return Err(MonolabStatus::MonolabNullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(&format!("{what} is not valid UTF-8"));
        MonolabStatus::MonolabParseError
    })
}

fn read_bits(s: &str, what: &str) -> Result<BitString, MonolabStatus> {
    s.parse().map_err(|e: Error| {
        set_error(&format!("{what}: {e}"));
        MonolabStatus::MonolabParseError
    })
}

fn export_string(s: String) -> *mut c_char {
    CString::new(s).unwrap_or_default().into_raw()
}

fn guarded<F: FnOnce() -> MonolabStatus>(f: F) -> MonolabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            MonolabStatus::MonolabInternalError
        }
    }
}

/// Runs a program on the machine under explicit budgets.
///
/// # Safety
/// `lab` and `out` must be valid; `program` and `input` must be
/// NUL-terminated bit strings (input may be empty).
#[no_mangle]
pub unsafe extern "C" fn monolab_vm_run(
    lab: *mut MonolabLab,
    program: *const c_char,
    input: *const c_char,
    fuel: u64,
    max_out: u64,
    out: *mut MonolabRunResult,
) -> MonolabStatus {
    if lab.is_null() || out.is_null() {
        set_error("lab/out is null");
        return MonolabStatus::MonolabNullPointer;
    }
    let lab = &(*lab).inner;
    let program = match read_str(program, "program") {
        Ok(s) => s,
        Err(e) => return e,
    };
    let input = match read_str(input, "input") {
        Ok(s) => s,
        Err(e) => return e,
    };
    guarded(|| {
        let program = match read_bits(program, "program") {
            Ok(b) => Program::new(b),
            Err(e) => return e,
        };
        let input = match read_bits(input, "input") {
            Ok(b) => b,
            Err(e) => return e,
        };
        let r = lab.run(&program, &input, fuel, max_out);
        (*out).status = match r.status {
            RunStatus::Halted => MonolabRunStatus::MonolabRunHalted,
            RunStatus::FuelExhausted => MonolabRunStatus::MonolabRunFuelExhausted,
            RunStatus::OutputLimitReached => MonolabRunStatus::MonolabRunOutputLimit,
            RunStatus::InputExhausted => MonolabRunStatus::MonolabRunInputExhausted,
            RunStatus::EmptyProgram => MonolabRunStatus::MonolabRunEmptyProgram,
        };
        (*out).steps_used = r.steps_used;
        (*out).output = export_string(r.output.to_string());
        MonolabStatus::MonolabOk
    })
}

/// Disassembles a program: one `IDX OPCODE OPERAND` line per instruction.
///
/// # Safety
/// `program` must be a NUL-terminated bit string; `out_listing` must be valid.
#[no_mangle]
pub unsafe extern "C" fn monolab_vm_disasm(
    program: *const c_char,
    out_listing: *mut *mut c_char,
) -> MonolabStatus {
    if out_listing.is_null() {
        set_error("out_listing is null");
        return MonolabStatus::MonolabNullPointer;
    }
    let program = match read_str(program, "program") {
        Ok(s) => s,
        Err(e) => return e,
    };
    guarded(|| {
        let program = match read_bits(program, "program") {
            Ok(b) => Program::new(b),
            Err(e) => return e,
        };
        *out_listing = export_string(program.disassemble());
        MonolabStatus::MonolabOk
    })
}

/// Evaluates a generator descriptor to its first `len` symbols.
///
/// # Safety
/// `lab` must be valid, `descriptor` NUL-terminated, `out_prefix` valid;
/// `out_truncated` may be null when the caller does not care.
#[no_mangle]
pub unsafe extern "C" fn monolab_seq_eval(
    lab: *mut MonolabLab,
    descriptor: *const c_char,
    len: u64,
    fuel: u64,
    out_prefix: *mut *mut c_char,
    out_truncated: *mut bool,
) -> MonolabStatus {
    if lab.is_null() || out_prefix.is_null() {
        set_error("lab/out_prefix is null");
        return MonolabStatus::MonolabNullPointer;
    }
    let lab = &(*lab).inner;
    let descriptor = match read_str(descriptor, "descriptor") {
        Ok(s) => s,
        Err(e) => return e,
    };
    guarded(|| {
        let g = match dsl::generator_from_str(descriptor) {
            Ok(g) => g,
            Err(e) => return fail(e),
        };
        let eval = dsl::eval_gen(lab, &g, len, fuel);
        *out_prefix = export_string(eval.prefix.to_string());
        if !out_truncated.is_null() {
            *out_truncated = eval.truncated;
        }
        MonolabStatus::MonolabOk
    })
}

/// Predicts the next symbol after `obs`.
///
/// # Safety
/// `lab`, `out_bit` must be valid; `predictor` and `obs` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn monolab_predict(
    lab: *mut MonolabLab,
    predictor: *const c_char,
    obs: *const c_char,
    fuel: u64,
    out_bit: *mut u8,
) -> MonolabStatus {
    if lab.is_null() || out_bit.is_null() {
        set_error("lab/out_bit is null");
        return MonolabStatus::MonolabNullPointer;
    }
    let lab = &(*lab).inner;
    let predictor = match read_str(predictor, "predictor") {
        Ok(s) => s,
        Err(e) => return e,
    };
    let obs = match read_str(obs, "obs") {
        Ok(s) => s,
        Err(e) => return e,
    };
    guarded(|| {
        let p = match dsl::predictor_from_str(predictor) {
            Ok(p) => p,
            Err(e) => return fail(e),
        };
        let obs = match read_bits(obs, "obs") {
            Ok(b) => b,
            Err(e) => return e,
        };
        match predictors::predict(lab, &p, &obs, fuel) {
            Ok(bit) => {
                *out_bit = bit;
                MonolabStatus::MonolabOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Learning verdict of a predictor on a generator's sequence.
///
/// # Safety
/// `lab` and `out` must be valid; `predictor` and `generator` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn monolab_learns(
    lab: *mut MonolabLab,
    predictor: *const c_char,
    generator: *const c_char,
    burn_in: u64,
    horizon: u64,
    fuel: u64,
    out: *mut MonolabLearnVerdict,
) -> MonolabStatus {
    if lab.is_null() || out.is_null() {
        set_error("lab/out is null");
        return MonolabStatus::MonolabNullPointer;
    }
    let lab = &(*lab).inner;
    let predictor = match read_str(predictor, "predictor") {
        Ok(s) => s,
        Err(e) => return e,
    };
    let generator = match read_str(generator, "generator") {
        Ok(s) => s,
        Err(e) => return e,
    };
    guarded(|| {
        let p = match dsl::predictor_from_str(predictor) {
            Ok(p) => p,
            Err(e) => return fail(e),
        };
        let g = match dsl::generator_from_str(generator) {
            Ok(g) => g,
            Err(e) => return fail(e),
        };
        match predictors::learns(lab, &p, &g, burn_in, horizon, fuel) {
            Ok(v) => {
                (*out).learned_at_horizon = v.learned_at_horizon;
                (*out).partial = v.partial;
                (*out).error_count = v.error_positions.len() as u64;
                (*out).convergence_step = v.convergence_step;
                MonolabStatus::MonolabOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Duels a predictor against its own diagonal sequence.
///
/// # Safety
/// `lab` and `out` must be valid; `predictor` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn monolab_duel(
    lab: *mut MonolabLab,
    predictor: *const c_char,
    horizon: u64,
    fuel: u64,
    out: *mut MonolabDefeatReport,
) -> MonolabStatus {
    if lab.is_null() || out.is_null() {
        set_error("lab/out is null");
        return MonolabStatus::MonolabNullPointer;
    }
    let lab = &(*lab).inner;
    let predictor = match read_str(predictor, "predictor") {
        Ok(s) => s,
        Err(e) => return e,
    };
    guarded(|| {
        let p = match dsl::predictor_from_str(predictor) {
            Ok(p) => p,
            Err(e) => return fail(e),
        };
        let report = adversary::verify_defeat(lab, &p, horizon, fuel);
        (*out).all_wrong = report.all_wrong;
        (*out).wrong_positions = report.wrong_positions;
        (*out).pred_code_bits = report.pred_code_bits;
        (*out).diag_code_bits = report.diag_code_bits;
        MonolabStatus::MonolabOk
    })
}

/// Complexity upper bound for a target string under the chosen variant.
///
/// # Safety
/// `lab` and `out` must be valid; `target` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn monolab_khat(
    lab: *mut MonolabLab,
    variant: MonolabKhatVariant,
    target: *const c_char,
    max_len_bits: u64,
    fuel: u64,
    out: *mut MonolabEstimate,
) -> MonolabStatus {
    if lab.is_null() || out.is_null() {
        set_error("lab/out is null");
        return MonolabStatus::MonolabNullPointer;
    }
    let lab = &(*lab).inner;
    let target = match read_str(target, "target") {
        Ok(s) => s,
        Err(e) => return e,
    };
    guarded(|| {
        let x = match read_bits(target, "target") {
            Ok(b) => b,
            Err(e) => return e,
        };
        let estimate = match variant {
            MonolabKhatVariant::MonolabKhatHalting => {
                complexity::khat_halting(&x, max_len_bits, fuel)
            }
            MonolabKhatVariant::MonolabKhatMonotone => {
                complexity::khat_monotone(&x, max_len_bits, fuel)
            }
            MonolabKhatVariant::MonolabKhatDl => complexity::khat_dl(lab, &x, max_len_bits, fuel),
        };
        (*out).found = estimate.value_bits.is_some();
        (*out).value_bits = estimate.value_bits.unwrap_or(0);
        (*out).witness = match estimate.witness {
            Some(complexity::Witness::Machine(p)) => export_string(p.to_string()),
            Some(complexity::Witness::Generator(s)) => export_string(s),
            Some(complexity::Witness::Predictor(s)) => export_string(s),
            None => std::ptr::null_mut(),
        };
        MonolabStatus::MonolabOk
    })
}

/// First string of length `len` with no generating program shorter than
/// `len` bits. `mode` 0 = halting, 1 = monotone.
///
/// # Safety
/// `lab` and `out_string` must be valid.
#[no_mangle]
pub unsafe extern "C" fn monolab_find_incompressible(
    lab: *mut MonolabLab,
    len: u32,
    fuel: u64,
    mode: u32,
    out_string: *mut *mut c_char,
) -> MonolabStatus {
    if lab.is_null() || out_string.is_null() {
        set_error("lab/out_string is null");
        return MonolabStatus::MonolabNullPointer;
    }
    let lab = &(*lab).inner;
    guarded(|| {
        let mode = match mode {
            0 => IncompressibleMode::Halting,
            1 => IncompressibleMode::Monotone,
            _ => {
                set_error("mode must be 0 (halting) or 1 (monotone)");
                return MonolabStatus::MonolabInvalidArgument;
            }
        };
        match complexity::find_incompressible(lab, len, fuel, mode) {
            Ok(x) => {
                *out_string = export_string(x.to_string());
                MonolabStatus::MonolabOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Library version as a static string. Do not free.
#[no_mangle]
pub extern "C" fn monolab_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

/// Time-profile probe: steps at which each of the first `k` output symbols of
/// a program appears, written into `out_steps[0..k]`; entries beyond what
/// fuel admits are set to `u64::MAX`. Returns the number of symbols produced.
///
/// # Safety
/// `program` NUL-terminated; `out_steps` must point to at least `k` u64s or
/// be null.
#[no_mangle]
pub unsafe extern "C" fn monolab_time_profile(
    program: *const c_char,
    k: u64,
    fuel: u64,
    out_steps: *mut u64,
) -> u64 {
    let Ok(text) = read_str(program, "program") else {
        return 0;
    };
    let Ok(bits) = text.parse::<BitString>() else {
        set_error("program is not a bit string");
        return 0;
    };
    let profile = vm::time_profile(&Program::new(bits), k, fuel);
    if !out_steps.is_null() {
        for i in 0..k as usize {
            *out_steps.add(i) = profile.per_symbol_steps.get(i).copied().unwrap_or(u64::MAX);
        }
    }
    profile.per_symbol_steps.len() as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    fn c(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    #[test]
    fn vm_run_through_the_abi() {
        let lab = monolab_lab_new();
        let mut out = MonolabRunResult {
            status: MonolabRunStatus::MonolabRunHalted,
            steps_used: 0,
            output: std::ptr::null_mut(),
        };
        let status = unsafe {
            monolab_vm_run(
                lab,
                c("0010000011100000").as_ptr(),
                c("").as_ptr(),
                100,
                100,
                &mut out,
            )
        };
        assert_eq!(status, MonolabStatus::MonolabOk);
        assert_eq!(out.status, MonolabRunStatus::MonolabRunHalted);
        assert_eq!(out.steps_used, 2);
        let rendered = unsafe { CStr::from_ptr(out.output) }.to_str().unwrap();
        assert_eq!(rendered, "1");
        unsafe {
            monolab_string_free(out.output);
            monolab_lab_free(lab);
        }
    }

    #[test]
    fn seq_eval_and_predict() {
        let lab = monolab_lab_new();
        let mut prefix: *mut c_char = std::ptr::null_mut();
        let mut truncated = false;
        let status = unsafe {
            monolab_seq_eval(
                lab,
                c("(diag (const 0))").as_ptr(),
                5,
                100,
                &mut prefix,
                &mut truncated,
            )
        };
        assert_eq!(status, MonolabStatus::MonolabOk);
        assert_eq!(unsafe { CStr::from_ptr(prefix) }.to_str().unwrap(), "11111");
        assert!(!truncated);
        unsafe { monolab_string_free(prefix) };

        let mut bit = 9u8;
        let status = unsafe {
            monolab_predict(lab, c("(copylast)").as_ptr(), c("10").as_ptr(), 100, &mut bit)
        };
        assert_eq!(status, MonolabStatus::MonolabOk);
        assert_eq!(bit, 0);
        unsafe { monolab_lab_free(lab) };
    }

    #[test]
    fn duel_reports_total_defeat() {
        let lab = monolab_lab_new();
        let mut out = MonolabDefeatReport {
            all_wrong: false,
            wrong_positions: 0,
            pred_code_bits: 0,
            diag_code_bits: 0,
        };
        let status = unsafe { monolab_duel(lab, c("0000").as_ptr(), 32, 1000, &mut out) };
        assert_eq!(status, MonolabStatus::MonolabOk);
        assert!(out.all_wrong);
        assert_eq!(out.pred_code_bits, 4);
        assert_eq!(out.diag_code_bits, 6);
        unsafe { monolab_lab_free(lab) };
    }

    #[test]
    fn khat_through_the_abi() {
        let lab = monolab_lab_new();
        let mut out = MonolabEstimate {
            found: false,
            value_bits: 0,
            witness: std::ptr::null_mut(),
        };
        let status = unsafe {
            monolab_khat(
                lab,
                MonolabKhatVariant::MonolabKhatMonotone,
                c("1111").as_ptr(),
                16,
                100,
                &mut out,
            )
        };
        assert_eq!(status, MonolabStatus::MonolabOk);
        assert!(out.found);
        assert_eq!(out.value_bits, 8);
        unsafe {
            monolab_string_free(out.witness);
            monolab_lab_free(lab);
        }
    }

    #[test]
    fn errors_set_messages() {
        let lab = monolab_lab_new();
        let mut bit = 0u8;
        let status =
            unsafe { monolab_predict(lab, c("(nonsense)").as_ptr(), c("").as_ptr(), 10, &mut bit) };
        assert_eq!(status, MonolabStatus::MonolabParseError);
        let msg = unsafe { CStr::from_ptr(monolab_last_error()) }
            .to_str()
            .unwrap();
        assert!(msg.contains("nonsense"));
        unsafe { monolab_lab_free(lab) };
    }

    #[test]
    fn null_arguments_are_rejected() {
        let status = unsafe {
            monolab_vm_run(
                std::ptr::null_mut(),
                std::ptr::null(),
                std::ptr::null(),
                1,
                1,
                std::ptr::null_mut(),
            )
        };
        assert_eq!(status, MonolabStatus::MonolabNullPointer);
    }

    #[test]
    fn time_profile_through_the_abi() {
        let mut steps = [0u64; 4];
        let produced = unsafe {
            monolab_time_profile(c("0010000000000000").as_ptr(), 4, 100, steps.as_mut_ptr())
        };
        assert_eq!(produced, 4);
        assert_eq!(steps, [1, 2, 3, 4]);
    }
}
