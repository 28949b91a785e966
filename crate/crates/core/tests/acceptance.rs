//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; exits non-zero on failure.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use hpcalc::calculus::{self, apply_function, apply_smoothed, convergence_limit};
use hpcalc::eta::{self, conjugate, FactorizationCertificate};
use hpcalc::experiments::{self, ExperimentConfig, Settings};
use hpcalc::measure::{ExpPoly, WeightedMeasure};
use hpcalc::operator::{self, operator_norm, OperatorModel};
use hpcalc::symbol::{catalog, Expr, HalfPlaneFunction};
use hpcalc::transference::{default_vectors, factorization_check};
use hpcalc::{CMat, Result, C64};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn rel_dist(a: &CMat, b: &CMat) -> f64 {
    operator_norm(&(a - b)) / operator_norm(b).max(1e-300)
}

fn upper(rows: &[&[f64]]) -> OperatorModel {
    let n = rows.len();
    OperatorModel::dense(CMat::from_fn(n, n, |i, j| c(rows[i][j], 0.0))).unwrap()
}

/// Diagonal, dense and Jordan operators with spectrum in `Re z >= 1/2`.
fn operators() -> Vec<(&'static str, OperatorModel)> {
    vec![
        (
            "diagonal",
            OperatorModel::diagonal(vec![c(1.0, 0.0), c(2.0, 1.0), c(0.5, -3.0)]).unwrap(),
        ),
        ("dense", upper(&[&[1.0, 0.5, 0.2], &[0.0, 2.0, -0.7], &[0.3, 0.0, 1.5]])),
        ("jordan", OperatorModel::jordan(c(1.0, 0.5), 3).unwrap()),
    ]
}

fn demo() -> (ExperimentConfig, Settings) {
    let cfg = ExperimentConfig::parse(experiments::DEMO_CONFIG).unwrap();
    let s = Settings::from_config(&cfg).unwrap();
    (cfg, s)
}

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Result<Outcome>);

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn oracle_equivalence() -> Result<Outcome> {
    let start = Instant::now();
    let mut worst = (0.0f64, String::new());
    let mut pairs = 0;
    for (kind, op) in operators() {
        for (name, _) in catalog::ENTRIES {
            let f = catalog::get(name).unwrap();
            let hp = apply_function(&op, &f)?;
            if hp.route == calculus::Route::SpectralOracle {
                return outcome(false, format!("{kind}/{name} fell back to the oracle"));
            }
            let err = rel_dist(&hp.matrix, &operator::spectral_oracle(&op, &f)?);
            pairs += 1;
            if err > worst.0 {
                worst = (err, format!("{kind}/{name}"));
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        pairs >= 12 && worst.0 <= 1e-6 && elapsed <= Duration::from_secs(10),
        format!(
            "{pairs} pairs, max rel err {:.2e} ({}), {:.2?}",
            worst.0, worst.1, elapsed
        ),
    )
}

fn transference_identity() -> Result<Outcome> {
    let term = |coeff: f64, shift: f64, power: f64, rate: C64| {
        WeightedMeasure::from_term(ExpPoly::new(c(coeff, 0.0), shift, c(power, 0.0), rate).unwrap())
    };
    let atoms =
        |v: &[(f64, f64)]| WeightedMeasure::from_atoms(v.iter().map(|&(t, a)| (t, c(a, 0.0))).collect()).unwrap();
    let d12 = || OperatorModel::diagonal_real(&[1.0, 2.0]).unwrap();
    let j12 = || OperatorModel::jordan(c(1.0, 0.0), 2).unwrap();
    let triples: Vec<(OperatorModel, WeightedMeasure, FactorizationCertificate)> = vec![
        (d12(), atoms(&[(1.0, 1.0)]), eta::trivial_certificate(1.0, 1.0, 2.0)?),
        (d12(), atoms(&[(1.5, 1.0)]), eta::best_certificate(1.0, 1.0, 2.0)?),
        (
            j12(),
            term(1.0, 1.0, 0.0, c(-1.0, 0.0)),
            eta::trivial_certificate(0.5, 1.0, 2.0)?,
        ),
        (
            j12(),
            atoms(&[(1.0, 1.0), (2.0, 0.5)]),
            eta::best_certificate(0.5, 1.0, 2.0)?,
        ),
        (
            OperatorModel::jordan(c(0.5, 1.0), 3)?,
            term(1.0, 0.5, 1.0, c(-2.0, 0.0)),
            eta::best_certificate(1.0, 0.5, 2.0)?,
        ),
        (
            upper(&[&[1.0, 0.5], &[0.0, 2.0]]),
            atoms(&[(0.75, 1.0)]),
            eta::exponential_certificate(2.0, 0.75, 2.0)?,
        ),
        (
            OperatorModel::diagonal(vec![c(1.0, 2.0), c(3.0, -1.0)])?,
            term(1.0, 0.3, 0.0, c(-1.0, 1.0)),
            eta::trivial_certificate(0.5, 0.3, 3.0)?,
        ),
        (
            OperatorModel::jordan(c(2.0, 0.0), 2)?,
            atoms(&[(0.2, 1.0)]).plus(&term(0.5, 0.4, 0.0, c(-1.0, 0.0))),
            eta::best_certificate(0.5, 0.2, 1.5)?,
        ),
        (
            OperatorModel::diagonal_real(&[0.5, 4.0])?,
            term(1.0, 1.0, 0.0, c(-1.0, 0.0)),
            eta::best_certificate(0.25, 1.0, 2.0)?,
        ),
        (
            upper(&[&[1.0, 1.0, 0.0], &[0.0, 1.5, 1.0], &[0.0, 0.0, 2.0]]),
            atoms(&[(1.0, 1.0), (1.25, -0.5)]),
            eta::trivial_certificate(0.8, 1.0, 2.0)?,
        ),
        (
            d12(),
            term(1.0, 2.0, 0.5, c(-1.0, 0.0)),
            eta::best_certificate(0.5, 2.0, 2.0)?,
        ),
    ];
    let mut worst_err = 0.0f64;
    let mut worst_chain = 0.0f64;
    let mut ok = true;
    for (op, mu, cert) in &triples {
        let rep = factorization_check(op, mu, cert, &default_vectors(op.dim()), 1e-5)?;
        let l = rep.multiplier_norm.max(rep.plancherel_norm);
        let chain = rep.operator_norm / (rep.m * rep.m * rep.certificate_value * l);
        worst_err = worst_err.max(rep.max_relative_error);
        worst_chain = worst_chain.max(chain);
        ok &= rep.max_relative_error <= 1e-5 && chain <= 1.0 + 1e-3;
    }
    outcome(
        ok && triples.len() >= 10,
        format!(
            "{} triples, max rel err {worst_err:.2e}, max |T_mu| / (M^2 value |L|) = {worst_chain:.3}",
            triples.len()
        ),
    )
}

fn eta_sandwich() -> Result<Outcome> {
    let mut ok = true;
    let mut bands = Vec::new();
    for q in [1.5, 2.0, 3.0] {
        let mut ratios = Vec::new();
        for a in [1e-1, 1e-2, 1e-3, 1e-4] {
            let cert = eta::best_certificate(a, 1.0, q)?;
            let lb = eta::lower_bound(a, 1.0, q)?;
            ok &= lb.value <= cert.value;
            ratios.push(cert.value / a.ln().abs());
        }
        let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        bands.push(hi / lo);
        ok &= hi / lo <= 10.0;
    }
    let mut closed_err = 0.0f64;
    for q in [1.5, 2.0, 3.0] {
        for a in [0.75, 1.0, 2.0, 4.0] {
            let cert = eta::exponential_certificate(a, 1.0, q)?;
            let closed = (a * q).exp_m1().powf(-1.0 / q);
            let err = (cert.value - closed).abs() / closed;
            closed_err = closed_err.max(err);
            ok &= err <= 1e-12 && cert.value <= 2.0 * (-a).exp();
            // the exchanged pair certifies the conjugate exponent
            ok &= (cert.swapped().q - conjugate(q)).abs() < 1e-15;
        }
    }
    let bands: Vec<String> = bands.iter().map(|b| format!("{b:.2}")).collect();
    outcome(
        ok,
        format!(
            "log bands [{}], closed form max rel err {closed_err:.1e}",
            bands.join(", ")
        ),
    )
}

fn main_bound() -> Result<Outcome> {
    let (cfg, s) = demo();
    let start = Instant::now();
    let a = experiments::run_thm35(&cfg, s)?;
    let b = experiments::run_cor310(&cfg, s)?;
    let elapsed = start.elapsed();
    let rows = a.rows.len() + b.rows.len();
    let failed = a.rows.iter().chain(&b.rows).filter(|r| !r.pass).count();
    outcome(
        rows >= 200 && failed == 0 && elapsed <= Duration::from_secs(60),
        format!("{rows} rows, {failed} failed, {elapsed:.2?}"),
    )
}

fn m_bounded() -> Result<Outcome> {
    let (cfg, s) = demo();
    let t = experiments::run_thm44(&cfg, s)?;
    let first: Vec<_> = t.rows.iter().filter(|r| r.param("order") == Some("1")).collect();
    let mut ok = first.len() >= 50 && t.all_pass();
    // the first-order bound is M^2 / (2|omega|) times the sup norm
    for r in &first {
        let m: f64 = r.param("m").unwrap().parse().unwrap();
        let omega: f64 = r.param("omega").unwrap().parse().unwrap();
        let sup: f64 = r.param("sup_norm").unwrap().parse().unwrap();
        let expected = m * m / (2.0 * omega.abs()) * sup;
        ok &= (r.bound - expected).abs() <= 1e-12 * expected;
    }
    outcome(
        ok,
        format!(
            "{} first-order rows of {}, all pass: {}",
            first.len(),
            t.rows.len(),
            t.all_pass()
        ),
    )
}

fn smoothing() -> Result<Outcome> {
    let lambda = c(-1.0, 0.0);
    let names = [
        "one",
        "resolvent",
        "delay",
        "sqrt_resolvent",
        "crank_nicolson",
        "two_roots",
    ];
    let mut worst = (0.0f64, String::new());
    let mut count = 0;
    for alpha in [0.25, 0.5, 1.0] {
        let al = c(alpha, 0.0);
        for (kind, op) in operators() {
            for name in names {
                let f = catalog::get(name).unwrap();
                let got = apply_smoothed(&op, &f, lambda, al)?;
                let target = f.product(&HalfPlaneFunction::new(Expr::RPow { lambda, alpha: al }));
                let err = rel_dist(&got.matrix, &operator::spectral_oracle(&op, &target)?);
                count += 1;
                if err > worst.0 {
                    worst = (err, format!("{kind}/{name}/alpha={alpha}"));
                }
            }
        }
    }
    outcome(
        worst.0 <= 1e-5,
        format!("{count} cases, max rel err {:.2e} ({})", worst.0, worst.1),
    )
}

fn stability() -> Result<Outcome> {
    let (cfg, s) = demo();
    let t = experiments::run_stability(&cfg, s)?;
    let spreads: Vec<_> = t.rows.iter().filter(|r| r.param("kind") == Some("spread")).collect();
    let worst = spreads.iter().map(|r| r.measured).fold(0.0, f64::max);
    outcome(
        !spreads.is_empty() && worst <= 0.05 && t.all_pass(),
        format!(
            "{} non-normal operator(s), max spread {:.2}%",
            spreads.len(),
            100.0 * worst
        ),
    )
}

fn convergence() -> Result<Outcome> {
    let op = OperatorModel::jordan(c(1.0, 0.0), 2)?;
    let ks = [10.0, 100.0, 1000.0];
    let eps = [1e-1, 1e-2, 1e-3];
    let mut ok = true;
    let mut worst = (0.0f64, String::new());
    for (name, _) in catalog::ENTRIES {
        let f = catalog::get(name).unwrap();
        let rep = convergence_limit(&op, &f, &ks, &eps, 1e-2)?;
        let diagonal: Vec<f64> = ks
            .iter()
            .zip(&eps)
            .map(|(&k, &e)| rep.rows.iter().find(|r| r.k == k && r.eps == e).unwrap().error)
            .collect();
        let relative = rep.final_error / rep.limit_norm;
        ok &= relative <= 1e-2 && diagonal.windows(2).all(|w| w[1] < w[0]);
        if relative > worst.0 {
            worst = (relative, name.to_string());
        }
    }
    outcome(
        ok,
        format!(
            "{} functions, worst corner error {:.2e} |f(A)| ({})",
            catalog::ENTRIES.len(),
            worst.0,
            worst.1
        ),
    )
}

fn determinism() -> Result<Outcome> {
    let (cfg, s) = demo();
    let first = experiments::run_all(&cfg, s)?;
    let second = experiments::run_all(&cfg, s)?;
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let mut mismatches = Vec::new();
    for (a, b) in first.iter().zip(&second) {
        let csv = a.to_csv();
        if csv != b.to_csv() {
            mismatches.push(format!("{} rerun", a.name));
        }
        match std::fs::read_to_string(golden.join(format!("{}.csv", a.name))) {
            Ok(g) if g == csv => {}
            Ok(_) => mismatches.push(format!("{} golden", a.name)),
            Err(_) => mismatches.push(format!("{} golden missing", a.name)),
        }
    }
    let detail = if mismatches.is_empty() {
        format!("{} tables byte-identical across reruns and goldens", first.len())
    } else {
        format!("mismatch: {}", mismatches.join(", "))
    };
    outcome(
        mismatches.is_empty() && first.len() == experiments::EXPERIMENTS.len(),
        detail,
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("oracle equivalence", oracle_equivalence),
        ("transference identity", transference_identity),
        ("eta sandwich", eta_sandwich),
        ("main bound realization", main_bound),
        ("m-bounded constant", m_bounded),
        ("smoothing", smoothing),
        ("stability", stability),
        ("convergence", convergence),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || *f == (i + 1).to_string()) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match run() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!(
            "criterion {}: {} {name}: {detail} [{:.2?}]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            start.elapsed()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
