use std::ffi::{CStr, CString};
use std::ptr;

use rbandit_ffi::*;

const ACCEPTANCE: &str = r#"{"arms": [
    {"transition": [[0.7, 0.3], [0.3, 0.7]], "rewards": [0, 1]},
    {"transition": [[0.3, 0.7], [0.2, 0.8]], "rewards": [0, 1]}
]}"#;

fn instance(json: &str) -> *mut RbInstance {
    let c = CString::new(json).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { rb_instance_from_json(c.as_ptr(), 0, &mut h) }, RbStatus::Ok);
    assert!(!h.is_null());
    h
}

fn last_error() -> String {
    let p = rb_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

#[test]
fn shape_and_stationary() {
    let h = instance(ACCEPTANCE);
    let (mut k, mut n) = (0usize, 0usize);
    unsafe {
        assert_eq!(rb_instance_num_arms(h, &mut k), RbStatus::Ok);
        assert_eq!(rb_instance_arm_size(h, 1, &mut n), RbStatus::Ok);
        assert_eq!((k, n), (2, 2));
        let mut pi = [0.0; 2];
        assert_eq!(rb_stationary(h, 1, pi.as_mut_ptr(), 2), RbStatus::Ok);
        // 0.7·π0 = 0.2·π1
        assert!((pi[0] - 2.0 / 9.0).abs() < 1e-12 && (pi[1] - 7.0 / 9.0).abs() < 1e-12);
        assert_eq!(rb_stationary(h, 1, pi.as_mut_ptr(), 1), RbStatus::BufferTooSmall);
        assert_eq!(rb_instance_arm_size(h, 2, &mut n), RbStatus::Domain);
        assert!(last_error().contains("no arm 2"));
        rb_instance_free(h);
    }
}

#[test]
fn invalid_inputs_report_codes() {
    let bad = CString::new(r#"{"arms": [{"transition": [[0.5, 0.6], [0.5, 0.5]]}]}"#).unwrap();
    let periodic = CString::new(r#"{"arms": [{"transition": [[0, 1], [1, 0]]}]}"#).unwrap();
    let junk = CString::new("{").unwrap();
    let mut h = ptr::null_mut();
    unsafe {
        assert_eq!(rb_instance_from_json(bad.as_ptr(), 0, &mut h), RbStatus::Validation);
        assert!(last_error().contains("sums to"));
        assert_eq!(rb_instance_from_json(junk.as_ptr(), 0, &mut h), RbStatus::Validation);
        assert_eq!(rb_instance_from_json(periodic.as_ptr(), 0, &mut h), RbStatus::Validation);
        assert_eq!(rb_instance_from_json(periodic.as_ptr(), 1, &mut h), RbStatus::Ok);
        rb_instance_free(h);
        assert_eq!(rb_instance_from_json(ptr::null(), 0, &mut h), RbStatus::NullPointer);
        let invalid = [0xffu8, 0];
        assert_eq!(rb_instance_from_json(invalid.as_ptr().cast(), 0, &mut h), RbStatus::InvalidUtf8);
        assert_eq!(rb_solution_gain(ptr::null(), ptr::null_mut()), RbStatus::NullPointer);
        rb_instance_free(ptr::null_mut());
        rb_solution_free(ptr::null_mut());
        rb_string_free(ptr::null_mut());
    }
}

#[test]
fn error_clears_on_success() {
    let h = instance(ACCEPTANCE);
    let mut n = 0;
    unsafe {
        assert_eq!(rb_instance_arm_size(h, 9, &mut n), RbStatus::Domain);
        assert!(!rb_last_error().is_null());
        assert_eq!(rb_instance_arm_size(h, 0, &mut n), RbStatus::Ok);
        assert!(rb_last_error().is_null());
        rb_instance_free(h);
    }
}

#[test]
fn solve_and_query() {
    let h = instance(ACCEPTANCE);
    let mut sol = ptr::null_mut();
    unsafe {
        assert_eq!(rb_solve(h, 4, &mut sol), RbStatus::Ok);
        let mut g = 0.0;
        assert_eq!(rb_solution_gain(sol, &mut g), RbStatus::Ok);
        // between the better stationary mean and the one-step best reward
        assert!(g > 7.0 / 9.0 - 1e-9 && g < 0.8, "{g}");
        let mut size = 0;
        assert_eq!(rb_solution_grid_size(sol, &mut size), RbStatus::Ok);
        assert_eq!(size, 4 * (2 * 4 - 1));
        let (s, tau) = ([1usize, 0], [1u64, 2]);
        let mut v = [0.0; 2];
        assert_eq!(rb_solution_action_values(sol, s.as_ptr(), tau.as_ptr(), 2, v.as_mut_ptr(), 2), RbStatus::Ok);
        assert!(v.iter().all(|x| x.is_finite()));
        let bad = [5usize, 0];
        assert_eq!(rb_solution_action_values(sol, bad.as_ptr(), tau.as_ptr(), 2, v.as_mut_ptr(), 2), RbStatus::Domain);
        let zero = [1u64, 0];
        assert_eq!(rb_solution_action_values(sol, s.as_ptr(), zero.as_ptr(), 2, v.as_mut_ptr(), 2), RbStatus::Domain);
        rb_solution_free(sol);
        rb_instance_free(h);
    }
}

#[test]
fn oracle_one_step() {
    let h = instance(ACCEPTANCE);
    let (s, tau) = ([1usize, 0], [2u64, 1]);
    let mut v = 0.0;
    unsafe {
        assert_eq!(rb_oracle_value(h, s.as_ptr(), tau.as_ptr(), 2, 1, &mut v), RbStatus::Ok);
        // arm 0 from state 1 after two steps: 0.3·0.3 + 0.7·0.7; arm 1 from 0 after one: 0.7
        assert!((v - 0.7).abs() < 1e-12, "{v}");
        rb_instance_free(h);
    }
}

#[test]
fn experiment_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = CString::new(
        r#"{"name": "ffi", "instance": {"generator": "acceptance"}, "algorithms": [{"kind": "myopic"}],
            "horizons": [10, 20, 30, 40], "replicates": 2, "seed": 1}"#,
    )
    .unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(rb_run_experiment(cfg.as_ptr(), out.as_ptr(), 1, &mut m), RbStatus::Ok);
        let text = CStr::from_ptr(m).to_str().unwrap().to_string();
        rb_string_free(m);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["runs"].as_array().unwrap().len(), 2);
        assert!(dir.path().join("manifest.json").exists());
        let bad = CString::new(r#"{"horizons": []}"#).unwrap();
        assert_eq!(rb_run_experiment(bad.as_ptr(), out.as_ptr(), 1, &mut m), RbStatus::Validation);
    }
}

#[test]
fn version_and_header() {
    let v = unsafe { CStr::from_ptr(rb_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/rbandit.h")).unwrap();
    for sym in ["rb_instance_from_json", "rb_solve", "rb_oracle_value", "rb_run_experiment", "RB_STATUS_OK", "typedef struct RbInstance"] {
        assert!(header.contains(sym), "{sym}");
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"rbandit.h\"\nint main(void) { RbInstance *h = 0; RbStatus s = rb_instance_num_arms(h, 0); return s == RB_STATUS_NULL_POINTER ? 0 : 1; }\n",
    )
    .unwrap();
    let Ok(status) = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", concat!(env!("CARGO_MANIFEST_DIR"), "/include")])
        .arg(&src)
        .status()
    else {
        eprintln!("no C compiler, skipping");
        return;
    };
    assert!(status.success());
}
