//! The Hille-Phillips calculus `T_μ = ∫ T(t) μ(dt)` and `f(A)` for bounded
//! holomorphic `f`.
//!
//! `f(A)` is computed by one of two routes. When `f` is recognized as a
//! Laplace transform `μ̂` (exponentials times rational functions, or a single
//! fractional resolvent power), `f(A) = T_μ` directly. Otherwise
//! `h = f (z-λ)^{-1}` with `λ = ω - 1` is turned into a density by FFT and
//! `f(A) = (A-λ) h(A)`. Every result is checked against the spectral oracle.

use nalgebra::DMatrix;

use crate::measure::{ExpPoly, WeightedMeasure};
use crate::operator::{self, OperatorModel, ResolventPower, Semigroup};
use crate::special;
use crate::symbol::{self, catalog, Expr, HalfPlaneFunction};
use crate::{linalg, CMat, Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Primary,
    Regularized,
    SpectralOracle,
}

impl Route {
    pub fn name(self) -> &'static str {
        match self {
            Route::Primary => "primary",
            Route::Regularized => "regularized",
            Route::SpectralOracle => "spectral-oracle",
        }
    }
}

/// Quadrature diagnostics.
#[derive(Debug, Clone, Copy, Default)]
pub struct QuadReport {
    pub nodes: usize,
    /// Largest time reached by the quadrature.
    pub t_max: f64,
    /// Difference between the result and a refined quadrature.
    pub step_error: f64,
    /// Estimated error of the route, absolute in operator norm.
    pub tolerance: f64,
    /// Distance to the spectral oracle, when it was computed.
    pub oracle_distance: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CalculusResult {
    pub matrix: CMat,
    pub route: Route,
    pub report: QuadReport,
    pub norm_value: f64,
}

impl CalculusResult {
    fn new(matrix: CMat, route: Route, report: QuadReport) -> Self {
        let norm_value = operator::operator_norm(&matrix);
        Self {
            matrix,
            route,
            report,
            norm_value,
        }
    }

    pub fn distance(&self, other: &CalculusResult) -> f64 {
        operator::operator_norm(&(&self.matrix - &other.matrix))
    }
}

fn spread(op: &OperatorModel) -> f64 {
    let omega0 = op.half_plane_type();
    op.eigenvalues()
        .iter()
        .map(|l| (l - omega0).norm() + l.im.abs())
        .fold(1.0, f64::max)
}

fn transform(sg: &Semigroup, mu: &WeightedMeasure, decay: f64, spread: f64, poly: f64) -> Result<(CMat, usize, f64)> {
    let mut nodes: Vec<(f64, C64)> = mu.atoms().to_vec();
    let cont = mu.continuous_nodes(decay, spread, poly)?;
    let t_max = cont
        .iter()
        .map(|n| n.0)
        .chain(nodes.iter().map(|n| n.0))
        .fold(0.0, f64::max);
    nodes.extend(cont.iter().map(|&(s, w)| (s, mu.density(s) * w)));
    Ok((sg.weighted_sum(&nodes)?, nodes.len(), t_max))
}

/// `T_μ = ∫ T(t) μ(dt)`: atoms exactly, densities by quadrature. The step
/// error compares against a rule twice as fine.
pub fn apply_measure(op: &OperatorModel, mu: &WeightedMeasure) -> Result<CalculusResult> {
    let sg = Semigroup::new(op);
    let decay = op.half_plane_type();
    let poly = (op.dim() - 1) as f64;
    let sp = spread(op);
    let (m, nodes, t_max) = transform(&sg, mu, decay, sp, poly)?;
    let step_error = if mu.is_discrete() {
        0.0
    } else {
        let (fine, _, _) = transform(&sg, mu, decay, 2.0 * sp, poly)?;
        operator::operator_norm(&(&fine - &m))
    };
    let report = QuadReport {
        nodes,
        t_max,
        step_error,
        tolerance: step_error + 1e-12 * (1.0 + operator::operator_norm(&m)),
        oracle_distance: None,
    };
    Ok(CalculusResult::new(m, Route::Primary, report))
}

/// `c e^{-τz} z^k Π (z-λ_j)^{-α_j}`.
#[derive(Debug, Clone)]
struct Monomial {
    coeff: C64,
    tau: f64,
    zpow: u32,
    factors: Vec<(C64, C64)>,
}

impl Monomial {
    fn one() -> Self {
        Self {
            coeff: C64::new(1.0, 0.0),
            tau: 0.0,
            zpow: 0,
            factors: Vec::new(),
        }
    }

    fn times(&self, other: &Monomial) -> Monomial {
        let mut factors = self.factors.clone();
        for &(l, a) in &other.factors {
            match factors.iter_mut().find(|f| f.0 == l) {
                Some(f) => f.1 += a,
                None => factors.push((l, a)),
            }
        }
        factors.retain(|f| f.1 != C64::new(0.0, 0.0));
        Monomial {
            coeff: self.coeff * other.coeff,
            tau: self.tau + other.tau,
            zpow: self.zpow + other.zpow,
            factors,
        }
    }
}

const MAX_MONOMIALS: usize = 4096;

fn expand(e: &Expr) -> Option<Vec<Monomial>> {
    let mono = |f: &dyn Fn(&mut Monomial)| {
        let mut m = Monomial::one();
        f(&mut m);
        Some(vec![m])
    };
    match e {
        Expr::Const(v) => mono(&|m| m.coeff = *v),
        Expr::Var => mono(&|m| m.zpow = 1),
        Expr::Exp(t) => mono(&|m| m.tau = *t),
        Expr::RPow { lambda, alpha } => mono(&|m| m.factors.push((*lambda, *alpha))),
        Expr::Shift(..) => expand(&e.simplify()),
        Expr::Add(xs) => {
            let mut out = Vec::new();
            for x in xs {
                out.extend(expand(x)?);
                if out.len() > MAX_MONOMIALS {
                    return None;
                }
            }
            Some(out)
        }
        Expr::Mul(xs) => {
            let mut acc = vec![Monomial::one()];
            for x in xs {
                let ys = expand(x)?;
                if acc.len() * ys.len() > MAX_MONOMIALS {
                    return None;
                }
                acc = acc.iter().flat_map(|a| ys.iter().map(move |y| a.times(y))).collect();
            }
            Some(acc)
        }
        Expr::Pow(x, n) => expand(&Expr::Mul(vec![(**x).clone(); *n as usize])),
    }
}

fn is_integer(a: C64) -> bool {
    a.im == 0.0 && a.re.fract() == 0.0
}

/// Power series product truncated to `len` terms.
fn series_mul(a: &[C64], b: &[C64], len: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); len];
    for (i, x) in a.iter().enumerate().take(len) {
        for (j, y) in b.iter().enumerate().take(len - i) {
            out[i + j] += x * y;
        }
    }
    out
}

/// Coefficients of a polynomial in `z`, lowest degree first.
fn poly_mul(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Taylor coefficients of polynomial `p` about `z0`.
fn poly_taylor(p: &[C64], z0: C64) -> Vec<C64> {
    let n = p.len();
    (0..n)
        .map(|k| {
            (k..n)
                .map(|j| p[j] * special::binomial(j as u32, k as u32) * z0.powu((j - k) as u32))
                .sum()
        })
        .collect()
}

/// Measure whose transform is the monomial, if it is one of the recognized
/// shapes.
fn monomial_measure(m: &Monomial) -> Option<WeightedMeasure> {
    let zero = C64::new(0.0, 0.0);
    if m.coeff == zero {
        return Some(WeightedMeasure::zero());
    }
    // numerator polynomial from z^k and (z-λ)^n with n >= 0
    let mut num = vec![zero; m.zpow as usize];
    num.push(C64::new(1.0, 0.0));
    let mut poles: Vec<(C64, u32)> = Vec::new();
    let mut fractional = Vec::new();
    for &(l, a) in &m.factors {
        if is_integer(a) && a.re <= 0.0 {
            for _ in 0..(-a.re) as u32 {
                num = poly_mul(&num, &[-l, C64::new(1.0, 0.0)]);
            }
        } else if is_integer(a) {
            poles.push((l, a.re as u32));
        } else if a.re > 0.0 {
            fractional.push((l, a));
        } else {
            return None;
        }
    }
    let degree = num.len() - 1;
    if let [(l, a)] = fractional[..] {
        if degree != 0 || !poles.is_empty() {
            return None;
        }
        let term = ExpPoly::new(m.coeff / special::gamma(a), m.tau, a - 1.0, l).ok()?;
        return Some(WeightedMeasure::from_term(term));
    }
    if !fractional.is_empty() {
        return None;
    }
    let den_degree: u32 = poles.iter().map(|p| p.1).sum();
    if degree as u32 > den_degree {
        return None;
    }
    let mut atoms = Vec::new();
    if degree as u32 == den_degree {
        atoms.push((m.tau, m.coeff * num[degree]));
    }
    let mut terms = Vec::new();
    for (j, &(lj, mj)) in poles.iter().enumerate() {
        let len = mj as usize;
        let mut series = poly_taylor(&num, lj);
        series.resize(len.max(series.len()), zero);
        series.truncate(len);
        for (i, &(li, mi)) in poles.iter().enumerate() {
            if i == j {
                continue;
            }
            let rp = ResolventPower {
                lambda: li,
                alpha: C64::new(mi as f64, 0.0),
            };
            let t = operator::ScalarFunction::taylor(&rp, lj, len - 1).ok()?;
            series = series_mul(&series, &t, len);
        }
        for r in 1..=mj {
            let a = series[(mj - r) as usize];
            if a != zero {
                let coeff = m.coeff * a / special::factorial(r - 1);
                terms.push(ExpPoly::new(coeff, m.tau, C64::new((r - 1) as f64, 0.0), lj).ok()?);
            }
        }
    }
    WeightedMeasure::from_parts(atoms, Vec::new(), terms).ok()
}

/// The measure `μ` with `μ̂ = f`, when `f` is a sum of delayed rational
/// functions vanishing or constant at infinity, or delayed single
/// fractional resolvent powers.
pub fn recognize(f: &HalfPlaneFunction) -> Option<WeightedMeasure> {
    let monomials = expand(&f.expr().simplify())?;
    let mut out = WeightedMeasure::zero();
    for m in &monomials {
        out = out.plus(&monomial_measure(m)?);
    }
    let w = f.abscissa();
    Some(if w.is_finite() { out.with_weight(w) } else { out })
}

fn check_domain(op: &OperatorModel, f: &HalfPlaneFunction) -> Result<f64> {
    let omega0 = op.half_plane_type();
    if f.abscissa() >= omega0 {
        return Err(Error::Precondition(format!(
            "f is holomorphic only right of {}, which does not reach left of the spectrum at {omega0}",
            f.abscissa()
        )));
    }
    Ok(omega0)
}

/// Working abscissa `ω` strictly between the function's abscissa and `ω₀`.
fn working_abscissa(f: &HalfPlaneFunction, omega0: f64) -> f64 {
    if f.abscissa().is_finite() {
        0.5 * (f.abscissa() + omega0)
    } else {
        omega0 - 1.0
    }
}

/// The spectral ground truth wrapped as a result.
pub fn apply_oracle(op: &OperatorModel, f: &HalfPlaneFunction) -> Result<CalculusResult> {
    check_domain(op, f)?;
    let m = operator::spectral_oracle(op, f)?;
    Ok(CalculusResult::new(m, Route::SpectralOracle, QuadReport::default()))
}

/// `f(A)` through the regularizer `(z-λ)^{-1}`, `λ = ω - 1`.
pub fn apply_regularized(op: &OperatorModel, f: &HalfPlaneFunction) -> Result<CalculusResult> {
    let omega0 = check_domain(op, f)?;
    let omega = working_abscissa(f, omega0);
    f.check_bounded(omega).map_err(|e| {
        Error::Recognition(format!(
            "f is not recognized as a transform and the regularized route fails: {e}"
        ))
    })?;
    let lambda = C64::new(omega - 1.0, 0.0);
    let sigma = 0.5 * (omega + omega0);
    let rec = symbol::factor_density(f.expr(), C64::new(1.0, 0.0), lambda, sigma)?;
    let shifted = OperatorModel::shifted(op.clone(), C64::new(-sigma, 0.0));
    let h = apply_measure(&shifted, &rec.measure)?;
    let a_minus = op.matrix() - linalg::identity(op.dim()) * lambda;
    let scale = operator::operator_norm(&a_minus);
    let m = &a_minus * &h.matrix;
    let report = QuadReport {
        nodes: h.report.nodes,
        t_max: h.report.t_max,
        step_error: h.report.step_error * scale,
        tolerance: (h.report.tolerance + rec.laplace_error) * scale,
        oracle_distance: None,
    };
    Ok(CalculusResult::new(m, Route::Regularized, report))
}

fn with_oracle(op: &OperatorModel, f: &HalfPlaneFunction, mut r: CalculusResult) -> CalculusResult {
    if let Ok(o) = operator::spectral_oracle(op, f) {
        r.report.oracle_distance = Some(operator::operator_norm(&(&r.matrix - &o)));
    }
    r
}

/// `f(A)`, by the primary route when `f` is recognized and the regularized
/// route otherwise; the distance to the spectral oracle is recorded.
pub fn apply_function(op: &OperatorModel, f: &HalfPlaneFunction) -> Result<CalculusResult> {
    check_domain(op, f)?;
    let r = match recognize(f) {
        Some(mu) => apply_measure(op, &mu)?,
        None => apply_regularized(op, f)?,
    };
    Ok(with_oracle(op, f, r))
}

/// `f(A) T(τ) = (e_{-τ} f)(A)`.
pub fn apply_with_semigroup(op: &OperatorModel, f: &HalfPlaneFunction, tau: f64) -> Result<CalculusResult> {
    if !(tau > 0.0) {
        return Err(Error::Precondition(format!("tau must be positive, got {tau}")));
    }
    apply_function(op, &f.product(&HalfPlaneFunction::new(Expr::Exp(tau))))
}

/// `f(A)(A-λ)^{-α} = 1/Γ(α) ∫ t^{α-1} e^{λt} f(A)T(t) dt`. Since `f(A)`
/// commutes with `T(t)`, it is computed once and multiplied into the
/// weighted semigroup sum.
pub fn apply_smoothed(op: &OperatorModel, f: &HalfPlaneFunction, lambda: C64, alpha: C64) -> Result<CalculusResult> {
    if alpha.re <= 0.0 {
        return Err(Error::Precondition(format!("Re alpha must be positive, got {alpha}")));
    }
    let omega0 = op.half_plane_type();
    if lambda.re >= 0.0_f64.min(omega0) {
        return Err(Error::Precondition(format!(
            "Re lambda = {} must be negative and left of the spectrum",
            lambda.re
        )));
    }
    let fa = apply_function(op, f)?;
    let sg = Semigroup::new(op);
    let (nodes, t_max) = operator::laplace_power_nodes(&sg, omega0 - lambda.re, spread(op), lambda, alpha)?;
    let power = sg.weighted_sum(&nodes)?;
    let m = &fa.matrix * &power;
    let target = f.product(&HalfPlaneFunction::new(Expr::RPow { lambda, alpha }));
    let oracle = operator::spectral_oracle(op, &target).ok();
    let report = QuadReport {
        nodes: fa.report.nodes + nodes.len(),
        t_max: fa.report.t_max.max(t_max),
        step_error: fa.report.step_error * operator::operator_norm(&power),
        tolerance: fa.report.tolerance * operator::operator_norm(&power) + 1e-12 * operator::operator_norm(&m),
        oracle_distance: oracle.map(|o| operator::operator_norm(&(&m - &o))),
    };
    Ok(CalculusResult::new(m, fa.route, report))
}

/// Both routes to `f^{(m)}(A)`.
#[derive(Debug, Clone)]
pub struct DerivativeResult {
    /// Symbolic derivative fed to [`apply_function`].
    pub symbolic: CalculusResult,
    /// `T_{(-t)^m μ}` when `f = μ̂` is recognized.
    pub moment: Option<CalculusResult>,
}

impl DerivativeResult {
    pub fn route_distance(&self) -> Option<f64> {
        self.moment.as_ref().map(|m| m.distance(&self.symbolic))
    }
}

pub fn apply_derivative(op: &OperatorModel, f: &HalfPlaneFunction, m: u32) -> Result<DerivativeResult> {
    if m == 0 {
        return Err(Error::Precondition("derivative order must be positive".into()));
    }
    let symbolic = apply_function(op, &f.derivative(m))?;
    let moment = match recognize(f) {
        Some(mu) => Some(apply_measure(op, &mu.moment(m))?),
        None => None,
    };
    Ok(DerivativeResult { symbolic, moment })
}

/// One entry of a convergence table.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceRow {
    pub k: f64,
    pub eps: f64,
    pub error: f64,
    pub norm: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub limit_norm: f64,
    /// `sup ‖f_{k,ε}(A)‖` over the grid.
    pub uniform_bound: f64,
    /// `‖f_{k,ε}(A)‖` at the finest corner, standing in for the lim sup.
    pub limsup_estimate: f64,
    pub final_error: f64,
    /// The finest corner is within `tol` of the best error on the grid.
    pub settles: bool,
    pub passed: bool,
}

/// Tabulates `‖f_{k,ε}(A) - f(A)‖` for `f_{k,ε}(z) = f(z+ε) g_k(z+ε)`,
/// `g_k(z) = k/(z-ω+k)`. The finest corner is the largest `k` with the
/// smallest `ε`.
pub fn convergence_limit(
    op: &OperatorModel,
    f: &HalfPlaneFunction,
    k_grid: &[f64],
    eps_grid: &[f64],
    tol: f64,
) -> Result<ConvergenceReport> {
    let omega0 = check_domain(op, f)?;
    if k_grid.is_empty() || eps_grid.is_empty() {
        return Err(Error::Precondition("empty k or eps grid".into()));
    }
    let omega = working_abscissa(f, omega0);
    let limit = apply_function(op, f)?;
    let mut rows = Vec::new();
    for &k in k_grid {
        for &eps in eps_grid {
            let approx = apply_function(op, &catalog::approximant(f, k, eps, omega))?;
            rows.push(ConvergenceRow {
                k,
                eps,
                error: approx.distance(&limit),
                norm: approx.norm_value,
            });
        }
    }
    let k_max = k_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let eps_min = eps_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let corner = rows
        .iter()
        .find(|r| r.k == k_max && r.eps == eps_min)
        .copied()
        .expect("corner is on the grid");
    let best = rows.iter().map(|r| r.error).fold(f64::INFINITY, f64::min);
    let uniform_bound = rows.iter().map(|r| r.norm).fold(0.0, f64::max);
    let settles = corner.error <= best + tol;
    let passed = settles && corner.error <= tol && limit.norm_value <= corner.norm + tol;
    Ok(ConvergenceReport {
        rows,
        limit_norm: limit.norm_value,
        uniform_bound,
        limsup_estimate: corner.norm,
        final_error: corner.error,
        settles,
        passed,
    })
}

/// `f(A + ω)` and `f(ω + ·)(A)`, for the shift rule.
pub fn shift_pair(op: &OperatorModel, f: &HalfPlaneFunction, omega: f64) -> Result<(CalculusResult, CalculusResult)> {
    let lhs = apply_function(&OperatorModel::shifted(op.clone(), C64::new(omega, 0.0)), f)?;
    let rhs = apply_function(op, &f.shifted(omega))?;
    Ok((lhs, rhs))
}

/// Diagonal matrix from a slice, for tests and examples.
pub fn diag(values: &[C64]) -> CMat {
    DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(values))
}
