use std::ffi::{c_char, CStr, CString};
use std::ptr;

use hpcalc_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    unsafe {
        hp_last_error(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn entries(m: *const HpMatrix) -> Vec<(f64, f64)> {
    unsafe {
        let n = hp_matrix_dim(m);
        let mut re = vec![0.0; n * n];
        let mut im = vec![0.0; n * n];
        assert_eq!(hp_matrix_copy(m, re.as_mut_ptr(), im.as_mut_ptr(), n * n), HpStatus::Ok);
        re.into_iter().zip(im).collect()
    }
}

fn catalog(name: &str) -> *mut HpFunction {
    let name = CString::new(name).unwrap();
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { hp_function_catalog(name.as_ptr(), &mut f) }, HpStatus::Ok);
    f
}

#[test]
fn resolvent_of_diagonal_operator() {
    unsafe {
        let re = [1.0, 2.0];
        let mut op = ptr::null_mut();
        assert_eq!(hp_operator_diagonal(re.as_ptr(), ptr::null(), 2, &mut op), HpStatus::Ok);
        assert_eq!(hp_operator_dim(op), 2);
        let f = catalog("resolvent");
        let mut m = ptr::null_mut();
        assert_eq!(hp_apply_function(op, f, &mut m), HpStatus::Ok);
        let e = entries(m);
        let want = [(0.5, 0.0), (0.0, 0.0), (0.0, 0.0), (1.0 / 3.0, 0.0)];
        for (got, w) in e.iter().zip(want) {
            assert!(
                (got.0 - w.0).abs() < 1e-9 && (got.1 - w.1).abs() < 1e-9,
                "{got:?} vs {w:?}"
            );
        }
        assert!((hp_matrix_norm(m) - 0.5).abs() < 1e-9);
        hp_matrix_free(m);
        hp_function_free(f);
        hp_operator_free(op);
    }
}

#[test]
fn resolvent_of_jordan_block() {
    unsafe {
        let mut op = ptr::null_mut();
        assert_eq!(hp_operator_jordan(1.0, 0.0, 2, &mut op), HpStatus::Ok);
        let src = CString::new("rpow(add(z,1),-1)").unwrap();
        let mut f = ptr::null_mut();
        assert_eq!(hp_function_parse(src.as_ptr(), &mut f), HpStatus::Ok);
        let mut m = ptr::null_mut();
        assert_eq!(hp_apply_function(op, f, &mut m), HpStatus::Ok);
        let (mut re, mut im) = (0.0, 0.0);
        assert_eq!(hp_matrix_get(m, 0, 1, &mut re, &mut im), HpStatus::Ok);
        assert!((re + 0.25).abs() < 1e-9 && im.abs() < 1e-9, "{re} {im}");
        assert_eq!(hp_matrix_get(m, 2, 0, &mut re, &mut im), HpStatus::InvalidArgument);
        hp_matrix_free(m);
        hp_function_free(f);
        hp_operator_free(op);
    }
}

#[test]
fn dense_operator_matches_diagonal_for_atom() {
    unsafe {
        let re = [1.0, 0.0, 0.0, 2.0];
        let mut op = ptr::null_mut();
        assert_eq!(hp_operator_dense(re.as_ptr(), ptr::null(), 2, &mut op), HpStatus::Ok);
        let src = CString::new("atom 1 1 0\n").unwrap();
        let mut mu = ptr::null_mut();
        assert_eq!(
            hp_measure_parse(src.as_ptr(), &mut mu),
            HpStatus::Ok,
            "{}",
            last_error()
        );
        let mut m = ptr::null_mut();
        assert_eq!(hp_apply_measure(op, mu, &mut m), HpStatus::Ok, "{}", last_error());
        let e = entries(m);
        assert!((e[0].0 - (-1.0f64).exp()).abs() < 1e-12);
        assert!((e[3].0 - (-2.0f64).exp()).abs() < 1e-12);
        hp_matrix_free(m);
        hp_measure_free(mu);
        hp_operator_free(op);
    }
}

#[test]
fn smoothed_resolvent_power() {
    unsafe {
        let re = [1.0, 3.0];
        let mut op = ptr::null_mut();
        assert_eq!(hp_operator_diagonal(re.as_ptr(), ptr::null(), 2, &mut op), HpStatus::Ok);
        let f = catalog("one");
        let mut m = ptr::null_mut();
        assert_eq!(
            hp_apply_smoothed(op, f, -1.0, 0.0, 0.5, 0.0, &mut m),
            HpStatus::Ok,
            "{}",
            last_error()
        );
        let e = entries(m);
        assert!((e[0].0 - 2f64.powf(-0.5)).abs() < 1e-6, "{:?}", e[0]);
        assert!((e[3].0 - 0.5).abs() < 1e-6, "{:?}", e[3]);
        hp_matrix_free(m);
        hp_function_free(f);
        hp_operator_free(op);
    }
}

#[test]
fn eta_envelope_and_certificate() {
    unsafe {
        let (mut upper, mut lower) = (0.0, 0.0);
        assert_eq!(hp_eta_envelope(1.0, 2.0, 2.0, &mut upper, &mut lower), HpStatus::Ok);
        let closed = ((4.0f64).exp() - 1.0).powf(-0.5);
        assert!(
            lower <= upper && upper <= closed * (1.0 + 1e-12),
            "{lower} {upper} {closed}"
        );
        let mut c = ptr::null_mut();
        assert_eq!(hp_certificate_best(1.0, 2.0, 2.0, &mut c), HpStatus::Ok);
        assert!((hp_certificate_value(c) - upper).abs() <= 1e-12 * upper);
        assert!(hp_certificate_residual(c) >= 0.0);
        hp_certificate_free(c);
        assert!(hp_certificate_value(ptr::null()).is_nan());
    }
}

#[test]
fn sup_norm_of_resolvent() {
    unsafe {
        let f = catalog("resolvent");
        let mut s = 0.0;
        assert_eq!(hp_function_sup_norm(f, 0.0, &mut s), HpStatus::Ok);
        assert!((s - 1.0).abs() < 1e-6, "{s}");
        hp_function_free(f);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut op = ptr::null_mut();
        assert_eq!(
            hp_operator_diagonal(ptr::null(), ptr::null(), 2, &mut op),
            HpStatus::NullPointer
        );
        assert!(op.is_null());
        assert!(last_error().contains("null"));

        let bad = CString::new("rpow(add(z,1),").unwrap();
        let mut f = ptr::null_mut();
        assert_eq!(hp_function_parse(bad.as_ptr(), &mut f), HpStatus::Parse);
        assert!(f.is_null());
        assert!(!last_error().is_empty());

        let missing = CString::new("no_such_function").unwrap();
        assert_eq!(hp_function_catalog(missing.as_ptr(), &mut f), HpStatus::InvalidArgument);
        assert!(last_error().contains("no_such_function"));

        let (mut u, mut l) = (0.0, 0.0);
        assert_eq!(
            hp_eta_envelope(1.0, 1.0, 0.5, &mut u, &mut l),
            HpStatus::InvalidArgument
        );

        let mut re = [0.0; 1];
        let mut im = [0.0; 1];
        let d = [1.0, 2.0];
        assert_eq!(hp_operator_diagonal(d.as_ptr(), ptr::null(), 2, &mut op), HpStatus::Ok);
        let g = catalog("one");
        let mut m = ptr::null_mut();
        assert_eq!(hp_apply_function(op, g, &mut m), HpStatus::Ok);
        assert_eq!(last_error(), "");
        assert_eq!(
            hp_matrix_copy(m, re.as_mut_ptr(), im.as_mut_ptr(), 1),
            HpStatus::BufferTooSmall
        );
        hp_matrix_free(m);
        hp_function_free(g);
        hp_operator_free(op);

        hp_operator_free(ptr::null_mut());
        hp_matrix_free(ptr::null_mut());
        assert_eq!(hp_matrix_dim(ptr::null()), 0);
    }
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(hp_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
