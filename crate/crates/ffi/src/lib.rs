// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.


//! C ABI over the hyperwalk harness.
//!
//! Every object crosses the boundary as an opaque pointer owned by the
//! caller and released with the matching `*_free`. Every fallible call
//! returns an [`HwStatus`]; on failure the message is available from
//! [`hw_last_error`] on the same thread until the next failing call.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use hyperwalk::harness::{escape_rate, write_run, EnsembleStats, Prepared, RunConfig, RunOptions, RESAMPLES};
use hyperwalk::pivotal::FreePivotState;
use hyperwalk::spaces::{GroupWord, Letter};
use hyperwalk::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum HwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Input = 3,
    Config = 4,
    NumericDomain = 5,
    ConstructionFailed = 6,
    Infeasible = 7,
    Invariant = 8,
    OutOfRange = 9,
    Io = 10,
    Internal = 11,
    Panic = 12,
}

impl From<&Error> for HwStatus {
    fn from(e: &Error) -> HwStatus {
        match e {
            Error::Input(_) | Error::Classification(_) | Error::Contract(_) => HwStatus::Input,
            Error::Config(_) => HwStatus::Config,
            Error::NumericDomain(_) | Error::Fit(_) | Error::Truncation { .. } => HwStatus::NumericDomain,
            Error::ConstructionFailed(_) | Error::SearchFailed { .. } => HwStatus::ConstructionFailed,
            Error::Infeasible { .. } => HwStatus::Infeasible,
            Error::Invariant(_) => HwStatus::Invariant,
            Error::IndexOutOfRange { .. } => HwStatus::OutOfRange,
            Error::Io(_) => HwStatus::Io,
            #[allow(unreachable_patterns)]
            _ => HwStatus::Internal,
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

fn fail(status: HwStatus, msg: impl Into<String>) -> HwStatus {
    set_error(msg);
    status
}

fn guard<F: FnOnce() -> Result<(), HwStatus>>(f: F) -> HwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HwStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(HwStatus::Panic, "panic inside hyperwalk"),
    }
}

fn check(r: hyperwalk::Result<()>) -> Result<(), HwStatus> {
    r.map_err(|e| fail(HwStatus::from(&e), e.to_string()))
}

fn lift<T>(r: hyperwalk::Result<T>) -> Result<T, HwStatus> {
    r.map_err(|e| fail(HwStatus::from(&e), e.to_string()))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, HwStatus> {
    if p.is_null() {
        return Err(fail(HwStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(HwStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn obj<'a, T>(p: *const T, name: &str) -> Result<&'a T, HwStatus> {
    p.as_ref().ok_or_else(|| fail(HwStatus::NullPointer, format!("{name} is null")))
}

unsafe fn obj_mut<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, HwStatus> {
    p.as_mut().ok_or_else(|| fail(HwStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out<T>(p: *mut T, value: T, name: &str) -> Result<(), HwStatus> {
    if p.is_null() {
        return Err(fail(HwStatus::NullPointer, format!("{name} is null")));
    }
    p.write(value);
    Ok(())
}

/// Message of the last failing call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hw_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// A validated run configuration.
pub struct HwConfig {
    config: RunConfig,
}

/// Parses a TOML run configuration.
#[no_mangle]
pub unsafe extern "C" fn hw_config_from_toml(toml: *const c_char, config: *mut *mut HwConfig) -> HwStatus {
    guard(|| {
        let text = str_arg(toml, "toml")?;
        let parsed = lift(RunConfig::from_toml(text))?;
        out(config, Box::into_raw(Box::new(HwConfig { config: parsed })), "config")
    })
}

/// Overrides the master seed.
#[no_mangle]
pub unsafe extern "C" fn hw_config_set_seed(config: *mut HwConfig, seed: u64) -> HwStatus {
    guard(|| {
        obj_mut(config, "config")?.config.seed = seed;
        Ok(())
    })
}

/// Overrides the number of trajectories.
#[no_mangle]
pub unsafe extern "C" fn hw_config_set_trials(config: *mut HwConfig, trials: usize) -> HwStatus {
    guard(|| {
        let c = obj_mut(config, "config")?;
        c.config.trials = trials;
        check(c.config.validate())
    })
}

#[no_mangle]
pub unsafe extern "C" fn hw_config_free(config: *mut HwConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// A finished ensemble.
pub struct HwRun {
    prepared: Prepared,
    stats: EnsembleStats,
}

/// Summary of one recorded time.
#[repr(C)]
#[derive(Copy, Clone, Debug, Default)]
pub struct HwGridRow {
    pub n: usize,
    pub trials: usize,
    pub mean_distance: f64,
    pub sd_distance: f64,
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
    pub mean_pivots: f64,
}

/// Empirical `P(d(o, Z_n o) <= r n)` with its Wilson interval.
#[repr(C)]
#[derive(Copy, Clone, Debug, Default)]
pub struct HwDeviation {
    pub n: usize,
    pub successes: usize,
    pub trials: usize,
    pub p: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Runs the ensemble described by `config` on `workers` threads (0 means
/// all cores). The result does not depend on `workers`.
#[no_mangle]
pub unsafe extern "C" fn hw_run(config: *const HwConfig, workers: usize, run: *mut *mut HwRun) -> HwStatus {
    guard(|| {
        let c = obj(config, "config")?;
        let prepared = lift(Prepared::new(c.config.clone()))?;
        let stats = lift(prepared.run(workers, &RunOptions::default()))?;
        out(run, Box::into_raw(Box::new(HwRun { prepared, stats })), "run")
    })
}

#[no_mangle]
pub unsafe extern "C" fn hw_run_free(run: *mut HwRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of recorded times.
#[no_mangle]
pub unsafe extern "C" fn hw_run_grid_len(run: *const HwRun) -> usize {
    run.as_ref().map_or(0, |r| r.stats.rows.len())
}

#[no_mangle]
pub unsafe extern "C" fn hw_run_grid_row(run: *const HwRun, index: usize, row: *mut HwGridRow) -> HwStatus {
    guard(|| {
        let r = obj(run, "run")?;
        let g = r
            .stats
            .rows
            .get(index)
            .ok_or_else(|| fail(HwStatus::OutOfRange, format!("row {index} of {}", r.stats.rows.len())))?;
        let value = HwGridRow {
            n: g.n,
            trials: g.trials,
            mean_distance: g.mean_d,
            sd_distance: g.sd_d,
            q10: g.q10,
            q50: g.q50,
            q90: g.q90,
            mean_pivots: g.mean_pivots,
        };
        out(row, value, "row")
    })
}

/// Deviation estimate at recorded time `index` for the configured rate `r`.
#[no_mangle]
pub unsafe extern "C" fn hw_run_deviation(run: *const HwRun, r: f64, index: usize, point: *mut HwDeviation) -> HwStatus {
    guard(|| {
        let run = obj(run, "run")?;
        let k = lift(run.stats.r_index(r))?;
        let series = &run.stats.deviations[k];
        let p = series
            .get(index)
            .ok_or_else(|| fail(HwStatus::OutOfRange, format!("point {index} of {}", series.len())))?;
        let value = HwDeviation { n: p.n, successes: p.successes, trials: p.trials, p: p.p, ci_lo: p.ci.lo, ci_hi: p.ci.hi };
        out(point, value, "point")
    })
}

/// Escape-rate estimate at the last recorded time with a bootstrap interval.
#[no_mangle]
pub unsafe extern "C" fn hw_run_escape_rate(run: *const HwRun, ell: *mut f64, lo: *mut f64, hi: *mut f64) -> HwStatus {
    guard(|| {
        let r = obj(run, "run")?;
        let rate = lift(escape_rate(&r.stats, RESAMPLES, r.prepared.config.seed))?;
        out(ell, rate.ell_hat, "ell")?;
        out(lo, rate.ci.lo, "lo")?;
        out(hi, rate.ci.hi, "hi")
    })
}

/// Total invariant failures seen by paranoid runs (0 otherwise).
#[no_mangle]
pub unsafe extern "C" fn hw_run_invariant_failures(run: *const HwRun) -> usize {
    run.as_ref().map_or(0, |r| r.stats.tally.failures() as usize)
}

/// Writes the tables and `summary.json` into directory `dir`.
#[no_mangle]
pub unsafe extern "C" fn hw_run_write(run: *const HwRun, dir: *const c_char) -> HwStatus {
    guard(|| {
        let r = obj(run, "run")?;
        let dir = str_arg(dir, "dir")?;
        lift(write_run(Path::new(dir), &r.prepared, &r.stats)).map(drop)
    })
}

/// Free-group walk with its pivotal stack.
pub struct HwFreeState {
    state: FreePivotState,
}

#[no_mangle]
pub extern "C" fn hw_free_state_new() -> *mut HwFreeState {
    Box::into_raw(Box::new(HwFreeState { state: FreePivotState::new() }))
}

#[no_mangle]
pub unsafe extern "C" fn hw_free_state_free(state: *mut HwFreeState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Advances by `Z_{n+1} = Z_n s w`. Letters are encoded `2i` for generator
/// `i` and `2i + 1` for its inverse; `w` may be null when `w_len` is 0.
#[no_mangle]
pub unsafe extern "C" fn hw_free_state_step(
    state: *mut HwFreeState,
    s: u16,
    w: *const u16,
    w_len: usize,
    pivotal: *mut bool,
) -> HwStatus {
    guard(|| {
        let st = obj_mut(state, "state")?;
        let letters: &[u16] = if w_len == 0 {
            &[]
        } else if w.is_null() {
            return Err(fail(HwStatus::NullPointer, "w is null"));
        } else {
            std::slice::from_raw_parts(w, w_len)
        };
        let word = GroupWord::from_letters(letters.iter().map(|&l| Letter(l)));
        let outcome = lift(st.state.step(Letter(s), &word))?;
        if !pivotal.is_null() {
            pivotal.write(outcome.pivotal);
        }
        Ok(())
    })
}

/// Number of pivotal times currently on the stack.
#[no_mangle]
pub unsafe extern "C" fn hw_free_state_pivots(state: *const HwFreeState) -> usize {
    state.as_ref().map_or(0, |s| s.state.pivots())
}

/// Word length of the current position.
#[no_mangle]
pub unsafe extern "C" fn hw_free_state_length(state: *const HwFreeState) -> usize {
    state.as_ref().map_or(0, |s| s.state.current().len())
}

/// Copies up to `cap` letters of the current reduced word into `buf` and
/// stores the full length in `len`.
#[no_mangle]
pub unsafe extern "C" fn hw_free_state_word(
    state: *const HwFreeState,
    buf: *mut u16,
    cap: usize,
    len: *mut usize,
) -> HwStatus {
    guard(|| {
        let st = obj(state, "state")?;
        let letters = st.state.current().letters();
        if !buf.is_null() {
            for (i, l) in letters.iter().take(cap).enumerate() {
                buf.add(i).write(l.0);
            }
        }
        out(len, letters.len(), "len")
    })
}

/// Whether the stack invariants hold.
#[no_mangle]
pub unsafe extern "C" fn hw_free_state_check(state: *const HwFreeState) -> bool {
    state.as_ref().is_some_and(|s| s.state.check_invariants())
}
