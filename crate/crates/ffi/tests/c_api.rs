use std::ffi::{c_char, c_int, c_void, CStr};
use std::ptr;

use autotune_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    unsafe { at_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }
        .to_string_lossy()
        .into_owned()
}

unsafe extern "C" fn quadratic_cost(
    point: *const c_int,
    len: usize,
    user_data: *mut c_void,
    cost: *mut f64,
) -> c_int {
    let p = std::slice::from_raw_parts(point, len);
    *user_data.cast::<usize>() += 1;
    *cost = ((p[0] - 3) as f64).powi(2);
    0
}

unsafe extern "C" fn failing_cost(_: *const f64, _: usize, _: *mut c_void, _: *mut f64) -> c_int {
    -7
}

unsafe extern "C" fn counting_runtime(_: *const c_int, _: usize, user_data: *mut c_void) -> c_int {
    *user_data.cast::<usize>() += 1;
    0
}

#[test]
fn optimizer_handle_lifecycle() {
    let mut opt = ptr::null_mut();
    assert_eq!(unsafe { at_csa_new(2, 3, 5, 1, &mut opt) }, AtStatus::Ok);
    assert_eq!(unsafe { at_optimizer_dimension(opt) }, 2);
    assert_eq!(unsafe { at_optimizer_num_points(opt) }, 3);

    let mut point = [0.0f64; 2];
    let mut cost = f64::NAN;
    let mut evals = 0;
    while !unsafe { at_optimizer_is_end(opt) } {
        assert_eq!(
            unsafe { at_optimizer_run(opt, cost, point.as_mut_ptr(), 2) },
            AtStatus::Ok
        );
        assert!(point.iter().all(|v| (-1.0..=1.0).contains(v)));
        cost = point.iter().map(|v| v * v).sum();
        evals += 1;
    }
    // The final call only returns the best point.
    assert_eq!(evals, 5 * 3 + 1);

    let mut best = 0.0;
    assert_eq!(
        unsafe { at_optimizer_best_cost(opt, &mut best) },
        AtStatus::Ok
    );
    let desc = unsafe { at_optimizer_describe(opt) };
    let text = unsafe { CStr::from_ptr(desc) }.to_str().unwrap().to_owned();
    unsafe { at_string_free(desc) };
    assert!(text.starts_with("csa "), "{text}");

    assert_eq!(unsafe { at_optimizer_reset(opt, -1) }, AtStatus::Contract);
    assert_eq!(unsafe { at_optimizer_reset(opt, 2) }, AtStatus::Ok);
    assert_eq!(
        unsafe { at_optimizer_best_cost(opt, &mut best) },
        AtStatus::Usage
    );
    unsafe { at_optimizer_free(opt) };
}

#[test]
fn construction_errors_carry_messages() {
    let mut opt = ptr::null_mut();
    assert_eq!(
        unsafe { at_nelder_mead_new(2, 0.0, 10, 1, &mut opt) },
        AtStatus::Config
    );
    assert!(opt.is_null());
    assert!(last_error().contains("tolerance"), "{}", last_error());

    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { at_session_new(5.0, 5.0, 0, 1, 4, 10, 1, true, &mut s) },
        AtStatus::Config
    );
    assert!(s.is_null());
    assert_eq!(
        unsafe { at_csa_new(1, 1, 1, 1, ptr::null_mut()) },
        AtStatus::NullPointer
    );
}

#[test]
fn wrong_buffer_length_is_reported() {
    let mut opt = ptr::null_mut();
    unsafe { at_nelder_mead_new(2, 1e-6, 0, 1, &mut opt) };
    let mut point = [0.0f64; 3];
    assert_eq!(
        unsafe { at_optimizer_run(opt, 0.0, point.as_mut_ptr(), 3) },
        AtStatus::Dimension
    );
    unsafe { at_optimizer_free(opt) };
}

#[test]
fn entire_exec_through_callbacks() {
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { at_session_new(1.0, 9.0, 0, 1, 4, 10, 1, true, &mut s) },
        AtStatus::Ok
    );
    let mut calls = 0usize;
    let mut chunk: c_int = 0;
    let st = unsafe {
        at_session_entire_exec_int(
            s,
            &mut chunk,
            1,
            Some(quadratic_cost),
            (&mut calls as *mut usize).cast(),
        )
    };
    assert_eq!(st, AtStatus::Ok);
    assert_eq!(calls, 40);
    assert_eq!(chunk, 3);
    assert!(unsafe { at_session_is_finished(s) });
    assert_eq!(unsafe { at_session_target_execs(s) }, 40);
    unsafe { at_session_free(s) };
}

#[test]
fn single_exec_runtime_counts_with_warmup() {
    let mut s = ptr::null_mut();
    unsafe { at_session_new(1.0, 16.0, 1, 1, 2, 3, 5, true, &mut s) };
    let mut calls = 0usize;
    let mut chunk: c_int = 0;
    for _ in 0..20 {
        let st = unsafe {
            at_session_single_exec_runtime_int(
                s,
                &mut chunk,
                1,
                Some(counting_runtime),
                (&mut calls as *mut usize).cast(),
            )
        };
        assert_eq!(st, AtStatus::Ok);
    }
    assert_eq!(calls, 20);
    assert_eq!(unsafe { at_session_target_execs(s) }, 3 * 2 * 2);
    assert!((1..=16).contains(&chunk));
    unsafe { at_session_free(s) };
}

#[test]
fn target_failure_is_reported_and_session_survives() {
    let mut opt = ptr::null_mut();
    unsafe { at_nelder_mead_new(1, 1e-6, 20, 3, &mut opt) };
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { at_session_with_optimizer(0.0, 1.0, 0, opt, false, &mut s) },
        AtStatus::Ok
    );
    let mut x = 0.0f64;
    let mut cost = 0.0;
    let st = unsafe {
        at_session_single_exec_double(s, &mut x, 1, Some(failing_cost), ptr::null_mut(), &mut cost)
    };
    assert_eq!(st, AtStatus::Target);
    assert!(last_error().contains("-7"));

    let mut steps = 0;
    while !unsafe { at_session_is_finished(s) } {
        assert_eq!(
            unsafe { at_session_exec_double(s, &mut x, 1, (x - 0.25).powi(2)) },
            AtStatus::Ok
        );
        steps += 1;
        assert!(steps <= 25);
    }
    assert!((0.0..=1.0).contains(&x));
    unsafe { at_session_free(s) };
}

#[test]
fn manual_start_end_and_usage_errors() {
    let mut s = ptr::null_mut();
    unsafe { at_session_new(1.0, 8.0, 0, 2, 2, 2, 7, true, &mut s) };
    let mut p = [0 as c_int; 2];
    assert_eq!(unsafe { at_session_end(s) }, AtStatus::Usage);
    assert_eq!(
        unsafe { at_session_start_int(s, p.as_mut_ptr(), 1) },
        AtStatus::Dimension
    );
    assert_eq!(
        unsafe { at_session_start_int(s, p.as_mut_ptr(), 2) },
        AtStatus::Ok
    );
    assert_eq!(
        unsafe { at_session_start_int(s, p.as_mut_ptr(), 2) },
        AtStatus::Usage
    );
    assert_eq!(unsafe { at_session_end(s) }, AtStatus::Ok);
    let mut d = [0.0f64; 2];
    assert_eq!(
        unsafe { at_session_start_double(s, d.as_mut_ptr(), 2) },
        AtStatus::Ok
    );
    assert_eq!(unsafe { at_session_end(s) }, AtStatus::Ok);
    assert_eq!(unsafe { at_session_reset(s, -3) }, AtStatus::Contract);
    assert_eq!(unsafe { at_session_reset(s, 1) }, AtStatus::Ok);
    assert_eq!(
        unsafe { at_session_end(ptr::null_mut()) },
        AtStatus::NullPointer
    );
    unsafe { at_session_free(s) };
}

#[test]
fn header_declares_the_api() {
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/autotune.h"))
            .expect("header generated by the build script");
    for name in [
        "AT_STATUS_OK",
        "AT_STATUS_TARGET",
        "typedef struct AtOptimizer AtOptimizer",
        "typedef struct AtSession AtSession",
        "at_csa_new",
        "at_nelder_mead_new",
        "at_optimizer_run",
        "at_optimizer_reset",
        "at_session_new",
        "at_session_with_optimizer",
        "at_session_entire_exec_runtime_int",
        "at_session_single_exec_double",
        "at_last_error_message",
        "at_string_free",
    ] {
        assert!(header.contains(name), "header is missing {name}");
    }
}
