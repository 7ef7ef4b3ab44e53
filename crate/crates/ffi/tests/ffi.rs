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


use std::ffi::{CStr, CString};
use std::ptr;

use hyperwalk_ffi::*;

const CONFIG: &str = r#"
seed = 3
trials = 64
n_max = 20
r_grid = [0.25]
engine = "free"
[backend]
kind = "tree"
rank = 2
[measure]
kind = "uniform_generators"
[free_words]
kind = "adversarial"
"#;

fn last_error() -> String {
    let p = hw_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn config() -> *mut HwConfig {
    let text = CString::new(CONFIG).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { hw_config_from_toml(text.as_ptr(), &mut cfg) }, HwStatus::Ok);
    assert!(!cfg.is_null());
    cfg
}

#[test]
fn run_round_trip() {
    let cfg = config();
    let mut a = ptr::null_mut();
    let mut b = ptr::null_mut();
    unsafe {
        assert_eq!(hw_run(cfg, 1, &mut a), HwStatus::Ok);
        assert_eq!(hw_run(cfg, 4, &mut b), HwStatus::Ok);
        assert_eq!(hw_run_grid_len(a), 20);
        for i in 0..hw_run_grid_len(a) {
            let mut ra = HwGridRow::default();
            let mut rb = HwGridRow::default();
            assert_eq!(hw_run_grid_row(a, i, &mut ra), HwStatus::Ok);
            assert_eq!(hw_run_grid_row(b, i, &mut rb), HwStatus::Ok);
            assert_eq!(ra.n, i + 1);
            assert_eq!(ra.mean_distance.to_bits(), rb.mean_distance.to_bits());
        }
        let mut row = HwGridRow::default();
        assert_eq!(hw_run_grid_row(a, 99, &mut row), HwStatus::OutOfRange);

        let mut dev = HwDeviation::default();
        assert_eq!(hw_run_deviation(a, 0.25, 19, &mut dev), HwStatus::Ok);
        assert_eq!(dev.n, 20);
        assert_eq!(dev.trials, 64);
        assert!(dev.ci_lo <= dev.p && dev.p <= dev.ci_hi);
        assert_eq!(hw_run_deviation(a, 0.3, 0, &mut dev), HwStatus::Config);

        let (mut ell, mut lo, mut hi) = (0.0, 0.0, 0.0);
        assert_eq!(hw_run_escape_rate(a, &mut ell, &mut lo, &mut hi), HwStatus::Ok);
        assert!(lo <= ell && ell <= hi && ell > 0.2 && ell <= 2.0, "{ell}");

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().to_str().unwrap()).unwrap();
        assert_eq!(hw_run_write(a, path.as_ptr()), HwStatus::Ok);
        assert!(dir.path().join("summary.json").exists());
        assert_eq!(hw_run_invariant_failures(a), 0);

        hw_run_free(a);
        hw_run_free(b);
        hw_config_free(cfg);
    }
}

#[test]
fn errors_are_reported() {
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(hw_config_from_toml(ptr::null(), &mut cfg), HwStatus::NullPointer);
        assert!(last_error().contains("null"));
        let bad = CString::new("trials = \"many\"").unwrap();
        assert_eq!(hw_config_from_toml(bad.as_ptr(), &mut cfg), HwStatus::Config);
        assert!(cfg.is_null());
        assert!(!last_error().is_empty());

        let cfg = config();
        assert_eq!(hw_config_set_seed(cfg, 9), HwStatus::Ok);
        assert_eq!(hw_config_set_trials(cfg, 0), HwStatus::Config);
        hw_config_free(cfg);
        hw_config_free(ptr::null_mut());
        hw_run_free(ptr::null_mut());
        assert_eq!(hw_run_grid_len(ptr::null()), 0);
    }
}

#[test]
fn free_state_tracks_pivots() {
    unsafe {
        let st = hw_free_state_new();
        let mut pivotal = false;
        // The word after each generator must be nontrivial.
        assert_eq!(hw_free_state_step(st, 0, ptr::null(), 0, &mut pivotal), HwStatus::Input);
        let b = [2u16];
        assert_eq!(hw_free_state_step(st, 0, b.as_ptr(), 1, &mut pivotal), HwStatus::Ok);
        assert!(pivotal);
        let a = [0u16];
        assert_eq!(hw_free_state_step(st, 0, a.as_ptr(), 1, &mut pivotal), HwStatus::Ok);
        assert_eq!(hw_free_state_length(st), 4);
        let mut buf = [9u16; 8];
        let mut len = 0;
        assert_eq!(hw_free_state_word(st, buf.as_mut_ptr(), buf.len(), &mut len), HwStatus::Ok);
        assert_eq!(&buf[..len], &[0, 2, 0, 0]);
        assert_eq!(hw_free_state_pivots(st), 2);
        // Backtracking over the last step removes its record.
        let back = [1u16, 1];
        assert_eq!(hw_free_state_step(st, 1, back.as_ptr(), 2, &mut pivotal), HwStatus::Ok);
        assert!(!pivotal);
        assert_eq!(hw_free_state_length(st), 3);
        assert!(hw_free_state_pivots(st) < 2);
        assert!(hw_free_state_check(st));
        assert_eq!(hw_free_state_step(st, 0, ptr::null(), 2, &mut pivotal), HwStatus::NullPointer);
        hw_free_state_free(st);
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/hyperwalk.h")).unwrap();
    let source = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let mut count = 0;
    for line in source.lines().filter(|l| l.contains("extern \"C\" fn ")) {
        let name = line.split("fn ").nth(1).unwrap().split('(').next().unwrap();
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
        count += 1;
    }
    assert!(count >= 15);
    for ty in ["HwConfig", "HwRun", "HwFreeState", "HW_STATUS_INFEASIBLE"] {
        assert!(header.contains(ty), "{ty}");
    }
    let version = unsafe { CStr::from_ptr(hw_version()) }.to_str().unwrap();
    assert_eq!(version, env!("CARGO_PKG_VERSION"));
}
