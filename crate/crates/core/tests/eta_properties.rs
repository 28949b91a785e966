use hpcalc::eta::{self, conjugate, CertificateKind, Regime};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn conjugate_exponents_give_the_same_value(a in 0.02f64..5.0, q in 1.1f64..6.0) {
        let qc = conjugate(q);
        let u = eta::best_certificate(a, 1.0, q).unwrap().value;
        let v = eta::best_certificate(a, 1.0, qc).unwrap().value;
        prop_assert!(rel(u, v) < 1e-9, "{u} vs {v}");
    }

    #[test]
    fn value_depends_only_on_the_product(a in 0.02f64..5.0, t in 0.05f64..20.0, q in 1.1f64..6.0) {
        let u = eta::best_certificate(a / t, t, q).unwrap().value;
        let v = eta::best_certificate(a, 1.0, q).unwrap().value;
        prop_assert!(rel(u, v) < 1e-10, "{u} vs {v}");
    }

    #[test]
    fn lower_bound_below_certificate(a in 0.005f64..6.0, q in 1.05f64..8.0) {
        let env = eta::envelope(a, 1.0, q).unwrap();
        prop_assert!(env.lower <= env.upper * (1.0 + 1e-12), "{env:?}");
    }

    #[test]
    fn lower_bound_nonincreasing(a in 0.001f64..5.0, k in 1.0f64..3.0, q in 1.05f64..8.0) {
        let lo = eta::lower_bound(a, 1.0, q).unwrap().value;
        let hi = eta::lower_bound(a * k, 1.0, q).unwrap().value;
        prop_assert!(hi <= lo * (1.0 + 1e-14));
    }

    #[test]
    fn certificates_reproduce_the_weight(a in 0.05f64..4.0, t in 0.2f64..5.0, q in 1.2f64..5.0, u in 0.0f64..1.0) {
        let alpha = a / t;
        let cert = eta::best_certificate(alpha, t, q).unwrap();
        let r = t + u * (cert.verification_horizon() - t);
        let want = (-alpha * r).exp();
        prop_assert!((cert.convolution(r) - want).abs() <= 1e-7 * (-a).exp(), "{} {}", cert.convolution(r), want);
        let norms = cert.psi.norm(q) * cert.phi.norm(conjugate(q));
        prop_assert!(rel(norms, cert.value) < 1e-9);
    }

    #[test]
    fn exchange_keeps_value(a in 0.05f64..3.0, q in 1.2f64..5.0) {
        let cert = eta::trivial_certificate(a, 1.0, q).unwrap();
        let s = cert.swapped();
        prop_assert_eq!(s.q, conjugate(q));
        let norms = s.psi.norm(s.q) * s.phi.norm(conjugate(s.q));
        prop_assert!(rel(norms, cert.value) < 1e-9);
    }
}

#[test]
fn exponential_regime_closed_form() {
    for q in [1.5, 2.0, 3.0] {
        for a in [0.75, 1.0, 2.0, 4.0] {
            let cert = eta::exponential_certificate(a, 1.0, q).unwrap();
            let closed = (a * q).exp_m1().powf(-1.0 / q);
            assert!(rel(cert.value, closed) <= 1e-12, "q={q} a={a}");
            assert!(cert.value <= 2.0 * (-a).exp());
            let env = eta::envelope(a, 1.0, q).unwrap();
            assert_eq!(env.regime, Regime::Exponential);
            assert!(env.upper <= closed * (1.0 + 1e-12));
        }
    }
}

#[test]
fn log_regime_uses_the_log_pair() {
    let env = eta::envelope(1e-3, 1.0, 2.0).unwrap();
    assert_eq!(env.regime, Regime::Log);
    assert_eq!(env.upper_source, CertificateKind::Log);
    let ratio = env.upper / 1e-3f64.ln().abs();
    assert!(ratio > 0.05 && ratio < 2.0, "{ratio}");
}

#[test]
fn certificate_text_round_trip() {
    let cert = eta::best_certificate(0.5, 2.0, 3.0).unwrap();
    let back = eta::FactorizationCertificate::parse(&cert.to_text()).unwrap();
    assert_eq!(back.kind, cert.kind);
    assert!(rel(back.value, cert.value) < 1e-12);
    assert!((back.convolution(3.0) - cert.convolution(3.0)).abs() < 1e-12);
}

#[test]
fn invalid_parameters_are_rejected() {
    assert!(eta::best_certificate(0.0, 1.0, 2.0).is_err());
    assert!(eta::best_certificate(1.0, -1.0, 2.0).is_err());
    assert!(eta::best_certificate(1.0, 1.0, 0.9).is_err());
    assert!(eta::log_certificate(5.0, 1.0, 2.0).is_err());
    assert!(eta::exponential_certificate(0.1, 1.0, 2.0).is_err());
}

#[test]
fn large_exponent_norms_do_not_underflow() {
    let (a, q) = (5.122918173317304, 1.05);
    let cert = eta::exponential_certificate(a, 1.0, conjugate(q)).unwrap();
    let closed = (a * conjugate(q)).exp_m1().powf(-1.0 / conjugate(q));
    assert!(rel(cert.value, closed) < 1e-12, "{} {closed}", cert.value);
}
