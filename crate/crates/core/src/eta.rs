//! Factorization certificates for
//! `η(α,t,q) = inf { ‖ψ‖_q ‖φ‖_q' : ψ∗φ = e^{-α·} on [t,∞) }`.
//!
//! Everything is built in unit coordinates `t = 1`, `α' = αt`, where every
//! factor is `h(s) e^{rate s}` with `h` constant on the unit intervals
//! `[j, j+1)` and eventually equal to a tail height. The rescaling
//! `ψ_t(s) = t^{-1/q} ψ(s/t)` maps a unit certificate to one for `(α, t)`
//! without changing norms.

use std::fmt::Write as _;

use rustfft::FftPlanner;

use crate::{Error, Result, C64};

/// Conjugate exponent; `1 <-> ∞`.
pub fn conjugate(q: f64) -> f64 {
    if q == 1.0 {
        f64::INFINITY
    } else if q.is_infinite() {
        1.0
    } else {
        q / (q - 1.0)
    }
}

/// `∫_a^b e^{cs} ds`.
fn exp_integral(c: f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if c == 0.0 {
        b - a
    } else if c * (b - a) < 700.0 {
        (c * a).exp() * (c * (b - a)).exp_m1() / c
    } else {
        ((c * b).exp() - (c * a).exp()) / c
    }
}

/// `s -> amplitude · h(s/scale) e^{rate s/scale}` with `h` a step function on
/// unit intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFactor {
    pub heights: Vec<f64>,
    /// Height on `[heights.len(), ∞)`.
    pub tail: f64,
    pub rate: f64,
    pub scale: f64,
    pub amplitude: f64,
}

impl StepFactor {
    /// A factor in unit coordinates (`scale = amplitude = 1`).
    pub fn unit(heights: Vec<f64>, tail: f64, rate: f64) -> Self {
        Self {
            heights,
            tail,
            rate,
            scale: 1.0,
            amplitude: 1.0,
        }
    }

    fn height(&self, u: f64) -> f64 {
        if u < 0.0 {
            0.0
        } else {
            let j = u.floor();
            if j < self.heights.len() as f64 {
                self.heights[j as usize]
            } else {
                self.tail
            }
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        let u = s / self.scale;
        self.amplitude * self.height(u) * (self.rate * u).exp()
    }

    /// One-sided limit at `s`, from the right or from the left.
    pub fn eval_limit(&self, s: f64, from_right: bool) -> f64 {
        let u = s / self.scale;
        let nudge = 1e-9 * (1.0 + u.abs());
        let h = self.height(if from_right { u + nudge } else { u - nudge });
        self.amplitude * h * (self.rate * u).exp()
    }

    /// End of the support, possibly infinite.
    pub fn support_end(&self) -> f64 {
        if self.tail != 0.0 {
            f64::INFINITY
        } else {
            self.heights.len() as f64 * self.scale
        }
    }

    /// `‖·‖_p` in closed form; infinite when a tail does not decay.
    pub fn norm(&self, p: f64) -> f64 {
        let unit = if p.is_infinite() {
            let steps = self.heights.iter().enumerate().map(|(j, h)| {
                let j = j as f64;
                h.abs() * (self.rate * j).exp().max((self.rate * (j + 1.0)).exp())
            });
            let tail = if self.tail == 0.0 {
                0.0
            } else if self.rate > 0.0 {
                f64::INFINITY
            } else {
                self.tail.abs() * (self.rate * self.heights.len() as f64).exp()
            };
            steps.fold(tail, f64::max)
        } else {
            let c = p * self.rate;
            let cell = exp_integral(c, 0.0, 1.0);
            // heights are normalized so that large p cannot underflow them
            let top = self.heights.iter().fold(self.tail.abs(), |m, h| m.max(h.abs()));
            if top == 0.0 {
                return 0.0;
            }
            let mut acc = 0.0;
            let mut growth = 1.0;
            let step = c.exp();
            for h in &self.heights {
                acc += (h.abs() / top).powf(p) * growth * cell;
                growth *= step;
            }
            if self.tail != 0.0 {
                if c >= 0.0 {
                    return f64::INFINITY;
                }
                acc += (self.tail.abs() / top).powf(p) * (c * self.heights.len() as f64).exp() / -c;
            }
            top * acc.powf(1.0 / p)
        };
        let scale = if p.is_infinite() { 1.0 } else { self.scale.powf(1.0 / p) };
        self.amplitude * scale * unit
    }

    /// Pieces `(start, end, height)` in unit coordinates.
    fn pieces(&self) -> Vec<(f64, f64, f64)> {
        let mut out: Vec<(f64, f64, f64)> = self
            .heights
            .iter()
            .enumerate()
            .map(|(j, &h)| (j as f64, j as f64 + 1.0, h))
            .collect();
        if self.tail != 0.0 {
            out.push((self.heights.len() as f64, f64::INFINITY, self.tail));
        }
        out
    }

    fn rescaled(&self, t: f64, p: f64) -> Self {
        let mut out = self.clone();
        out.scale = t;
        out.amplitude = if p.is_infinite() { 1.0 } else { t.powf(-1.0 / p) };
        out
    }
}

/// `(f∗g)(r)` for unit-coordinate factors, exactly: both are exponentials
/// times step functions, so every overlap integrates in closed form.
pub fn unit_convolution(f: &StepFactor, g: &StepFactor, r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let fp = f.pieces();
    let gp = g.pieces();
    let mut acc = 0.0;
    let c = g.rate - f.rate;
    let scale = (f.rate * r).exp();
    for &(a, b, hg) in &gp {
        if a >= r {
            break;
        }
        // s in [a, min(b, r)], u = r - s in [r - min(b,r), r - a]
        let (u_lo, u_hi) = (r - b.min(r), r - a);
        let first = fp.partition_point(|p| p.1 <= u_lo);
        for &(c0, c1, hf) in &fp[first..] {
            if c0 >= u_hi {
                break;
            }
            let lo = c0.max(u_lo);
            let hi = c1.min(u_hi);
            if hi > lo {
                acc += hf * hg * exp_integral(c, r - hi, r - lo);
            }
        }
    }
    scale * acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateKind {
    Trivial,
    Log,
    Exponential,
    Refined,
}

impl CertificateKind {
    pub fn name(self) -> &'static str {
        match self {
            CertificateKind::Trivial => "trivial",
            CertificateKind::Log => "log",
            CertificateKind::Exponential => "exponential",
            CertificateKind::Refined => "refined",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "trivial" => CertificateKind::Trivial,
            "log" => CertificateKind::Log,
            "exponential" => CertificateKind::Exponential,
            "refined" => CertificateKind::Refined,
            _ => return None,
        })
    }
}

/// A pair with `ψ∗φ = e^{-α·}` on `[t, T_ver]`, `T_ver = t + 30/α`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationCertificate {
    pub kind: CertificateKind,
    pub psi: StepFactor,
    pub phi: StepFactor,
    pub q: f64,
    pub alpha: f64,
    pub t: f64,
    pub value: f64,
    pub residual: f64,
}

impl FactorizationCertificate {
    pub fn q_conjugate(&self) -> f64 {
        conjugate(self.q)
    }

    pub fn verification_horizon(&self) -> f64 {
        self.t + 30.0 / self.alpha
    }

    /// `(ψ∗φ)(r)` in original coordinates.
    pub fn convolution(&self, r: f64) -> f64 {
        let unit = |f: &StepFactor| StepFactor::unit(f.heights.clone(), f.tail, f.rate);
        unit_convolution(&unit(&self.psi), &unit(&self.phi), r / self.t)
    }

    /// The same pair with the roles of `q` and `q'` exchanged.
    pub fn swapped(&self) -> Self {
        let q = conjugate(self.q);
        Self {
            kind: self.kind,
            psi: self.phi.rescaled(self.t, q),
            phi: self.psi.rescaled(self.t, conjugate(q)),
            q,
            ..self.clone()
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "certificate {} {:e} {:e} {:e}",
            self.kind.name(),
            self.q,
            self.alpha,
            self.t
        );
        let _ = writeln!(s, "value {:e}", self.value);
        let _ = writeln!(s, "residual {:e}", self.residual);
        for (name, f) in [("psi", &self.psi), ("phi", &self.phi)] {
            let _ = write!(s, "{name} {:e} {:e}", f.rate, f.tail);
            for h in &f.heights {
                let _ = write!(s, " {h:e}");
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut header = None;
        let mut value = None;
        let mut residual = None;
        let mut factors: Vec<StepFactor> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let key = it.next().unwrap_or_default();
            let nums = |it: std::str::SplitWhitespace<'_>| -> Result<Vec<f64>> {
                it.map(|w| {
                    w.parse::<f64>()
                        .map_err(|_| Error::parse(i + 1, format!("bad number `{w}`")))
                })
                .collect()
            };
            match key {
                "certificate" => {
                    let kind = it
                        .next()
                        .and_then(CertificateKind::from_name)
                        .ok_or_else(|| Error::parse(i + 1, "unknown certificate kind"))?;
                    let v = nums(it)?;
                    if v.len() != 3 {
                        return Err(Error::parse(i + 1, "expected q, alpha and t"));
                    }
                    header = Some((kind, v[0], v[1], v[2]));
                }
                "value" | "residual" => {
                    let v = nums(it)?;
                    if v.len() != 1 {
                        return Err(Error::parse(i + 1, "expected one number"));
                    }
                    if key == "value" {
                        value = Some(v[0]);
                    } else {
                        residual = Some(v[0]);
                    }
                }
                "psi" | "phi" => {
                    let v = nums(it)?;
                    if v.len() < 2 {
                        return Err(Error::parse(i + 1, "expected rate and tail"));
                    }
                    if (key == "psi") != factors.is_empty() {
                        return Err(Error::parse(i + 1, "psi must precede phi"));
                    }
                    factors.push(StepFactor::unit(v[2..].to_vec(), v[1], v[0]));
                }
                other => return Err(Error::parse(i + 1, format!("unknown key `{other}`"))),
            }
        }
        let (kind, q, alpha, t) = header.ok_or_else(|| Error::parse(0, "missing certificate header"))?;
        if factors.len() != 2 {
            return Err(Error::parse(0, "expected psi and phi"));
        }
        let phi = factors.pop().unwrap().rescaled(t, conjugate(q));
        let psi = factors.pop().unwrap().rescaled(t, q);
        Ok(Self {
            kind,
            psi,
            phi,
            q,
            alpha,
            t,
            value: value.ok_or_else(|| Error::parse(0, "missing value"))?,
            residual: residual.ok_or_else(|| Error::parse(0, "missing residual"))?,
        })
    }
}

fn check_params(alpha: f64, t: f64, q: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) || !(t > 0.0 && t.is_finite()) {
        return Err(Error::Precondition(format!(
            "alpha and t must be positive, got {alpha}, {t}"
        )));
    }
    if !(q >= 1.0) {
        return Err(Error::Precondition(format!("q must be in [1, ∞], got {q}")));
    }
    Ok(())
}

/// Residual `max |(ψ∗φ)(r) - e^{-α' r}|` over `[1, 1 + 30/α']` in unit
/// coordinates, on all integer nodes up to 64 and a uniform grid.
fn unit_residual(psi: &StepFactor, phi: &StepFactor, a: f64) -> f64 {
    let end = 1.0 + 30.0 / a;
    if psi.rate == phi.rate && psi.tail == 0.0 && phi.tail == 0.0 && psi.heights.len() + phi.heights.len() > 4096 {
        return ramp_residual(psi, phi, a, end);
    }
    let pieces = psi.heights.len() + phi.heights.len() + 2;
    let points = (200_000_000 / pieces).clamp(32, 400);
    let mut rs: Vec<f64> = (1..=64).map(|n| n as f64).filter(|&r| r <= end).collect();
    rs.extend((0..=points).map(|k| 1.0 + (end - 1.0) * k as f64 / points as f64));
    rs.extend((0..points).map(|k| 1.0 + (end - 1.0) * (k as f64 + 0.37) / points as f64));
    rs.iter()
        .map(|&r| (unit_convolution(psi, phi, r) - (-a * r).exp()).abs())
        .fold(0.0, f64::max)
}

/// Equal rates and finite support: `e^{a r}(ψ∗φ)(r)` is linear between
/// integers with node values `c_{n-1}`, `c = h ∗ g` the discrete
/// convolution of the heights. The residual is bounded by the node
/// deviations weighted at the left end of each cell.
fn ramp_residual(psi: &StepFactor, phi: &StepFactor, a: f64, end: f64) -> f64 {
    let c = discrete_convolution(&psi.heights, &phi.heights);
    let last = end.ceil() as usize;
    let dev = |n: usize| -> f64 {
        // value at integer r = n
        let v = if n == 0 {
            0.0
        } else {
            c.get(n - 1).copied().unwrap_or(0.0)
        };
        (v - 1.0).abs()
    };
    (1..last)
        .map(|n| dev(n).max(dev(n + 1)) * (-a * n as f64).exp())
        .fold(0.0, f64::max)
}

fn discrete_convolution(h: &[f64], g: &[f64]) -> Vec<f64> {
    let len = (h.len() + g.len()).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let mut x: Vec<C64> = h.iter().map(|&v| C64::new(v, 0.0)).collect();
    x.resize(len, C64::new(0.0, 0.0));
    let mut y: Vec<C64> = g.iter().map(|&v| C64::new(v, 0.0)).collect();
    y.resize(len, C64::new(0.0, 0.0));
    fwd.process(&mut x);
    fwd.process(&mut y);
    for (u, v) in x.iter_mut().zip(&y) {
        *u *= v / len as f64;
    }
    inv.process(&mut x);
    x.truncate(h.len() + g.len() - 1);
    x.into_iter().map(|v| v.re).collect()
}

fn finish(
    kind: CertificateKind,
    psi: StepFactor,
    phi: StepFactor,
    alpha: f64,
    t: f64,
    q: f64,
) -> Result<FactorizationCertificate> {
    let a = alpha * t;
    let residual = unit_residual(&psi, &phi, a);
    let qc = conjugate(q);
    let value = psi.norm(q) * phi.norm(qc);
    if !value.is_finite() {
        return Err(Error::Divergence(format!("{} pair has infinite norm", kind.name())));
    }
    if residual > 1e-8 * (-a).exp() {
        return Err(Error::Convergence(format!(
            "{} pair misses the convolution identity by {residual:e}",
            kind.name()
        )));
    }
    Ok(FactorizationCertificate {
        kind,
        psi: psi.rescaled(t, q),
        phi: phi.rescaled(t, qc),
        q,
        alpha,
        t,
        value,
        residual,
    })
}

/// `ψ = 1_{[0,t]} e^{-α·}`, `φ = t^{-1} e^{-α·}`.
pub fn trivial_certificate(alpha: f64, t: f64, q: f64) -> Result<FactorizationCertificate> {
    check_params(alpha, t, q)?;
    let a = alpha * t;
    finish(
        CertificateKind::Trivial,
        StepFactor::unit(vec![1.0], 0.0, -a),
        StepFactor::unit(Vec::new(), 1.0, -a),
        alpha,
        t,
        q,
    )
}

/// `β_j` with `Σ β_j x^j = (1-x)^{-a}`.
fn binomial_series(a: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut b = 1.0;
    for j in 0..len {
        if j > 0 {
            b *= (j as f64 - 1.0 + a) / j as f64;
        }
        out.push(b);
    }
    out
}

/// `g` with `Σ_{j+k=n} h_j g_k = 1` for all `n < len`.
fn deconvolve_ones(h: &[f64], len: usize) -> Vec<f64> {
    let mut g = Vec::with_capacity(len);
    for m in 0..len {
        let s: f64 = (1..=m.min(h.len() - 1)).map(|j| h[j] * g[m - j]).sum();
        g.push((1.0 - s) / h[0]);
    }
    g
}

/// Largest number of unit steps a certificate may use.
pub const MAX_STEPS: usize = 50_000_000;

/// Step pair whose unweighted convolution is the ramp `min(s, 1)`, weighted
/// by `e^{-α'·}`. `ψ₀` has heights `(1-x)^{-1/q'}` and `φ₀` is obtained
/// from it by forward substitution.
pub fn log_certificate(alpha: f64, t: f64, q: f64) -> Result<FactorizationCertificate> {
    check_params(alpha, t, q)?;
    if !(q > 1.0 && q.is_finite()) {
        return Err(Error::Precondition("the log construction needs 1 < q < ∞".into()));
    }
    let a = alpha * t;
    let qc = conjugate(q);
    let limit = (1.0 / q).min(1.0 / qc);
    if a > limit {
        return Err(Error::Precondition(format!(
            "alpha t = {a} exceeds min(1/q, 1/q') = {limit}"
        )));
    }
    let steps = (1.0 + 30.0 / a).ceil() + 2.0;
    if steps > MAX_STEPS as f64 {
        return Err(Error::Truncation(format!(
            "{steps} steps exceed the cap of {MAX_STEPS}"
        )));
    }
    let j = steps as usize;
    let beta = binomial_series(1.0 / qc, j);
    let beta_prime = if (q - 2.0).abs() < 1e-15 {
        beta.clone()
    } else {
        binomial_series(1.0 / q, j)
    };
    finish(
        CertificateKind::Log,
        StepFactor::unit(beta, 0.0, -a),
        StepFactor::unit(beta_prime, 0.0, -a),
        alpha,
        t,
        q,
    )
}

/// `φ = 1_{[0,1]} e^{α'(q-1)·}`, `ψ = α'q/(e^{α'q}-1) e^{-α'·}` (in unit
/// coordinates), with value `(e^{α'q}-1)^{-1/q}`. When only `α' > 1/q'`
/// holds the construction is run for `q'` and the factors exchanged.
/// [`best_certificate`] also tries the exchange when both apply.
pub fn exponential_certificate(alpha: f64, t: f64, q: f64) -> Result<FactorizationCertificate> {
    check_params(alpha, t, q)?;
    let a = alpha * t;
    let qc = conjugate(q);
    let limit = (1.0 / q).min(1.0 / qc);
    if a <= limit {
        return Err(Error::Precondition(format!(
            "alpha t = {a} must exceed min(1/q, 1/q') = {limit}"
        )));
    }
    let build = |q: f64| -> Result<FactorizationCertificate> {
        let (phi_rate, c) = if q.is_infinite() {
            // limit q -> ∞ of the pair is degenerate; use the q' side instead
            return Err(Error::Precondition("q = ∞ handled by exchange".into()));
        } else {
            (a * (q - 1.0), a * q / (a * q).exp_m1())
        };
        finish(
            CertificateKind::Exponential,
            StepFactor::unit(Vec::new(), c, -a),
            StepFactor::unit(vec![1.0], 0.0, phi_rate),
            alpha,
            t,
            q,
        )
    };
    if a > 1.0 / q {
        build(q)
    } else {
        build(qc).map(|c| c.swapped())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LowerBoundSource {
    /// `sin(π/q)/(eπ) |log(αt)|`.
    Hilbert,
    /// `e^{-αt}`.
    Exponential,
}

impl LowerBoundSource {
    pub fn name(self) -> &'static str {
        match self {
            LowerBoundSource::Hilbert => "hilbert",
            LowerBoundSource::Exponential => "exponential",
        }
    }
}

/// Both analytic lower bounds for `η(α,t,q)` and the larger one.
#[derive(Debug, Clone, Copy)]
pub struct LowerBound {
    pub value: f64,
    pub source: LowerBoundSource,
    /// `sin(π/q)/(eπ) |log(αt)|` for `αt < 1`, else 0.
    pub hilbert: f64,
    /// `e^{-αt}`.
    pub exponential: f64,
}

pub fn lower_bound(alpha: f64, t: f64, q: f64) -> Result<LowerBound> {
    check_params(alpha, t, q)?;
    let x = alpha * t;
    let exponential = (-x).exp();
    let hilbert = if x < 1.0 && q.is_finite() {
        (std::f64::consts::PI / q).sin() / (std::f64::consts::E * std::f64::consts::PI) * x.ln().abs()
    } else {
        0.0
    };
    let (value, source) = if hilbert > exponential {
        (hilbert, LowerBoundSource::Hilbert)
    } else {
        (exponential, LowerBoundSource::Exponential)
    };
    Ok(LowerBound {
        value,
        source,
        hilbert,
        exponential,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Log,
    Exponential,
}

#[derive(Debug, Clone)]
pub struct EtaEnvelope {
    pub upper: f64,
    pub upper_source: CertificateKind,
    pub lower: f64,
    pub lower_source: LowerBoundSource,
    pub regime: Regime,
}

/// Best certificate among all constructions and their exchanges, with the
/// analytic lower bound.
pub fn best_certificate(alpha: f64, t: f64, q: f64) -> Result<FactorizationCertificate> {
    check_params(alpha, t, q)?;
    let qc = conjugate(q);
    let a = alpha * t;
    let mut cands = vec![trivial_certificate(alpha, t, q)?];
    if qc.is_finite() {
        cands.push(trivial_certificate(alpha, t, qc)?.swapped());
    }
    if a > (1.0 / q).min(1.0 / qc) {
        cands.push(exponential_certificate(alpha, t, q)?);
        if a > 1.0 / q && a > 1.0 / qc {
            cands.push(exponential_certificate(alpha, t, qc)?.swapped());
        }
    } else if q > 1.0 && q.is_finite() {
        cands.push(log_certificate(alpha, t, q)?);
    }
    Ok(cands
        .into_iter()
        .min_by(|x, y| x.value.total_cmp(&y.value))
        .expect("trivial candidate"))
}

pub fn envelope(alpha: f64, t: f64, q: f64) -> Result<EtaEnvelope> {
    let best = best_certificate(alpha, t, q)?;
    let lb = lower_bound(alpha, t, q)?;
    let (lower, lower_source) = (lb.value, lb.source);
    let qc = conjugate(q);
    let regime = if alpha * t <= (1.0 / q).min(1.0 / qc) {
        Regime::Log
    } else {
        Regime::Exponential
    };
    Ok(EtaEnvelope {
        upper: best.value,
        upper_source: best.kind,
        lower,
        lower_source,
        regime,
    })
}

/// Outcome of coordinate descent.
#[derive(Debug, Clone)]
pub struct Refinement {
    pub certificate: FactorizationCertificate,
    pub seed_value: f64,
    pub iterations: usize,
    /// Relative improvement over the seed, in percent.
    pub improvement_percent: f64,
    /// No improvement of at least 0.01% was found within the budget.
    pub stalled: bool,
}

/// Parametrized `ψ₀` heights: free leading heights, a power-law tail and an
/// exponential tilt.
#[derive(Debug, Clone)]
struct Family {
    lead: Vec<f64>,
    decay: f64,
    tilt: f64,
}

impl Family {
    fn heights(&self, len: usize) -> Vec<f64> {
        let p = self.lead.len();
        (0..len)
            .map(|j| {
                let base = if j < p {
                    self.lead[j]
                } else {
                    self.lead[p - 1] * (p as f64 / (j + 1) as f64).powf(self.decay)
                };
                base * (self.tilt * j as f64).exp()
            })
            .collect()
    }

    fn params(&self) -> Vec<f64> {
        let mut v = self.lead.clone();
        v.push(self.decay);
        v.push(self.tilt);
        v
    }

    fn from_params(v: &[f64]) -> Self {
        let n = v.len();
        Self {
            lead: v[..n - 2].to_vec(),
            decay: v[n - 2],
            tilt: v[n - 1],
        }
    }
}

/// Coordinate descent over step-height families. `φ₀` is re-solved from
/// `ψ₀` by forward substitution so the identity holds on the whole
/// verification horizon; the value never increases.
pub fn refine_certificate(seed: &FactorizationCertificate, budget: usize) -> Result<Refinement> {
    let (alpha, t, q) = (seed.alpha, seed.t, seed.q);
    let a = alpha * t;
    let qc = conjugate(q);
    let len = ((1.0 + 30.0 / a).ceil() as usize + 2).max(2);
    if len > 20_000 {
        return Err(Error::Truncation(format!(
            "refinement over {len} steps is too expensive"
        )));
    }
    let start = match seed.kind {
        CertificateKind::Log | CertificateKind::Refined if !seed.psi.heights.is_empty() => {
            let h = &seed.psi.heights;
            let p = h.len().min(8);
            Family {
                lead: h[..p].to_vec(),
                decay: if q.is_finite() { 1.0 / q } else { 0.0 },
                tilt: 0.0,
            }
        }
        _ => Family {
            lead: vec![1.0, 0.0],
            decay: 0.0,
            tilt: 0.0,
        },
    };
    let evaluate = |fam: &Family| -> Option<(f64, StepFactor, StepFactor)> {
        let h = fam.heights(len);
        if !(h[0].abs() > 1e-12) {
            return None;
        }
        let g = deconvolve_ones(&h, len);
        let psi = StepFactor::unit(h, 0.0, -a);
        let phi = StepFactor::unit(g, 0.0, -a);
        let v = psi.norm(q) * phi.norm(qc);
        v.is_finite().then_some((v, psi, phi))
    };
    let mut params = start.params();
    let mut best = evaluate(&start).map(|r| r.0).unwrap_or(f64::INFINITY);
    let mut steps: Vec<f64> = params.iter().map(|p| 0.1 * p.abs().max(0.1)).collect();
    let mut last_gain = 0usize;
    let mut iterations = 0;
    while iterations < budget {
        iterations += 1;
        let before = best;
        for i in 0..params.len() {
            let mut moved = false;
            for dir in [1.0, -1.0] {
                let mut trial = params.clone();
                trial[i] += dir * steps[i];
                if let Some((v, _, _)) = evaluate(&Family::from_params(&trial)) {
                    if v < best {
                        best = v;
                        params = trial;
                        moved = true;
                        break;
                    }
                }
            }
            if !moved {
                steps[i] *= 0.5;
            }
        }
        if best < before * (1.0 - 1e-4) {
            last_gain = iterations;
        }
    }
    let stalled = last_gain == 0;
    let seed_value = seed.value;
    let (_, psi, phi) =
        evaluate(&Family::from_params(&params)).ok_or_else(|| Error::Convergence("descent left the family".into()))?;
    let refined = finish(CertificateKind::Refined, psi, phi, alpha, t, q);
    let certificate = match refined {
        Ok(c) if c.value < seed_value => c,
        _ => seed.clone(),
    };
    let improvement_percent = 100.0 * (seed_value - certificate.value) / seed_value;
    Ok(Refinement {
        certificate,
        seed_value,
        iterations,
        improvement_percent,
        stalled,
    })
}
