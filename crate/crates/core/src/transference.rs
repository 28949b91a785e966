//! Grid model of the factorization `T_μ = P ∘ L_{e_ω μ} ∘ ι`.
//!
//! Signals are `ℂⁿ`-valued functions on a uniform grid over `[-L, L]`,
//! stored as left and right limits at every node so that jumps of step
//! factors sitting on nodes are integrated exactly. All three maps are
//! second order in the step; [`factorization_check`] runs two steps and
//! extrapolates.

use nalgebra::DVector;
use rustfft::FftPlanner;

use crate::calculus;
use crate::eta::{self, FactorizationCertificate, StepFactor};
use crate::measure::WeightedMeasure;
use crate::operator::{self, OperatorModel, Semigroup, TimeGrid};
use crate::{quad, CMat, CVec, Error, Result, C64};

/// Uniform nodes `s_i = -l + i h`, `i = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub h: f64,
    pub l: f64,
    pub n: usize,
}

impl Grid {
    /// Step `h = unit / m` and half-width a multiple of `h` covering `reach`.
    pub fn new(unit: f64, m: usize, reach: f64) -> Self {
        let h = unit / m as f64;
        let half = (reach / h).ceil() as usize;
        Self {
            h,
            l: half as f64 * h,
            n: 2 * half + 1,
        }
    }

    pub fn node(&self, i: usize) -> f64 {
        -self.l + i as f64 * self.h
    }

    pub fn zero_index(&self) -> usize {
        self.n / 2
    }

    fn refined(&self) -> Self {
        Self {
            h: self.h / 2.0,
            l: self.l,
            n: 2 * self.n - 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridSignal {
    pub grid: Grid,
    pub left: Vec<CVec>,
    pub right: Vec<CVec>,
    pub p: f64,
}

impl GridSignal {
    pub fn zeros(grid: Grid, dim: usize, p: f64) -> Self {
        let z = CVec::zeros(dim);
        Self {
            grid,
            left: vec![z.clone(); grid.n],
            right: vec![z; grid.n],
            p,
        }
    }

    pub fn dim(&self) -> usize {
        self.left.first().map_or(0, |v| v.len())
    }

    /// Discrete `L^p` norm, trapezoid on `|f|^p` with one-sided limits.
    pub fn norm(&self) -> f64 {
        let h = self.grid.h;
        if self.p.is_infinite() {
            return self
                .left
                .iter()
                .chain(&self.right)
                .map(|v| v.norm())
                .fold(0.0, f64::max);
        }
        let p = self.p;
        let s: f64 = (0..self.grid.n - 1)
            .map(|i| 0.5 * h * (self.right[i].norm().powf(p) + self.left[i + 1].norm().powf(p)))
            .sum();
        s.powf(1.0 / p)
    }

    /// Largest value at the two outermost nodes.
    pub fn boundary_value(&self) -> f64 {
        let n = self.grid.n;
        [&self.left[0], &self.right[0], &self.left[n - 1], &self.right[n - 1]]
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }
}

/// `ι(x)(s) = ψ(-s) T(-s) x` for `s <= 0`, zero for `s > 0`.
pub fn embed(x: &CVec, psi: &StepFactor, sg: &Semigroup, grid: Grid, p: f64) -> Result<GridSignal> {
    let mut sig = GridSignal::zeros(grid, x.len(), p);
    if x.iter().all(|v| *v == C64::new(0.0, 0.0)) {
        return Ok(sig);
    }
    let z = grid.zero_index();
    for i in 0..=z {
        let u = -grid.node(i).min(0.0);
        let tx = sg.at(u)? * x;
        // s -> s⁻ is u -> u⁺
        sig.left[i] = &tx * C64::new(psi.eval_limit(u, true), 0.0);
        sig.right[i] = if i == z {
            CVec::zeros(x.len())
        } else {
            &tx * C64::new(psi.eval_limit(u, false), 0.0)
        };
    }
    Ok(sig)
}

/// `Pf = ∫_0^∞ φ(t) T(t) f(t) dt`, trapezoid with one-sided limits.
pub fn project(sig: &GridSignal, phi: &StepFactor, sg: &Semigroup) -> Result<CVec> {
    let grid = sig.grid;
    let h = grid.h;
    let mut acc = CVec::zeros(sig.dim());
    let z = grid.zero_index();
    let mut prev_t: Option<CMat> = None;
    for i in z..grid.n - 1 {
        let (a, b) = (grid.node(i), grid.node(i + 1));
        let ta = match prev_t.take() {
            Some(t) => t,
            None => sg.at(a.max(0.0))?,
        };
        let tb = sg.at(b)?;
        let fa = &ta * &sig.right[i] * C64::new(phi.eval_limit(a.max(0.0), true), 0.0);
        let fb = &tb * &sig.left[i + 1] * C64::new(phi.eval_limit(b, false), 0.0);
        acc += (fa + fb) * C64::new(0.5 * h, 0.0);
        prev_t = Some(tb);
    }
    Ok(acc)
}

/// Diagnostics of the grid convolution.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConvolutionReport {
    pub off_grid_atoms: usize,
    /// Cubic minus linear interpolation at off-grid atoms, as a bound on the
    /// interpolation error.
    pub interpolation_error: f64,
    /// Mass of the density beyond the grid.
    pub truncated_mass: f64,
}

/// Hat-function weights `(a_k, b_k)` of a density on cells `[kh, (k+1)h]`:
/// `a_k = ∫ g (1-θ)`, `b_k = ∫ g θ` with `r = kh + θh`.
fn hat_weights(mu: &WeightedMeasure, h: f64, cells: usize) -> (Vec<C64>, Vec<C64>) {
    let mut a = vec![C64::new(0.0, 0.0); cells];
    let mut b = vec![C64::new(0.0, 0.0); cells];
    for (k, (ak, bk)) in a.iter_mut().zip(b.iter_mut()).enumerate() {
        let (lo, hi) = (k as f64 * h, (k + 1) as f64 * h);
        // split at term starts inside the cell, algebraic rules after them
        let mut cuts = vec![lo];
        for t in mu.terms() {
            if t.shift > lo && t.shift < hi {
                cuts.push(t.shift);
            }
        }
        cuts.push(hi);
        for w in cuts.windows(2) {
            let singular = mu
                .terms()
                .iter()
                .filter(|t| t.shift == w[0] && t.power.re < 0.0)
                .map(|t| t.power.re)
                .fold(f64::INFINITY, f64::min);
            let mut nodes = Vec::new();
            if singular.is_finite() {
                quad::push_algebraic(w[0], w[1], singular, 4, &mut nodes);
            } else {
                quad::push_panels(w[0], w[1], 1, &mut nodes);
            }
            for (r, q) in nodes {
                let theta = (r - lo) / h;
                let g = mu.density(r) * q;
                *ak += g * (1.0 - theta);
                *bk += g * theta;
            }
        }
    }
    (a, b)
}

/// Linear convolution `out[i] = Σ_k w[k] f[i-k]` for `i < f.len()`.
fn fft_convolve(planner: &mut FftPlanner<f64>, f: &[C64], w: &[C64]) -> Vec<C64> {
    let len = (f.len() + w.len()).next_power_of_two();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let mut x: Vec<C64> = f.to_vec();
    x.resize(len, C64::new(0.0, 0.0));
    let mut y: Vec<C64> = w.to_vec();
    y.resize(len, C64::new(0.0, 0.0));
    fwd.process(&mut x);
    fwd.process(&mut y);
    for (a, b) in x.iter_mut().zip(&y) {
        *a *= b / len as f64;
    }
    inv.process(&mut x);
    x.truncate(f.len());
    x
}

fn cubic_at(values: &[C64], pos: f64) -> (C64, C64) {
    let n = values.len() as isize;
    let i = pos.floor() as isize;
    let frac = pos - i as f64;
    let get = |k: isize| {
        if k >= 0 && k < n {
            values[k as usize]
        } else {
            C64::new(0.0, 0.0)
        }
    };
    let (p0, p1, p2, p3) = (get(i - 1), get(i), get(i + 1), get(i + 2));
    let x = frac;
    let cubic = p0 * (-x * (x - 1.0) * (x - 2.0) / 6.0)
        + p1 * ((x + 1.0) * (x - 1.0) * (x - 2.0) / 2.0)
        + p2 * (-(x + 1.0) * x * (x - 2.0) / 2.0)
        + p3 * ((x + 1.0) * x * (x - 1.0) / 6.0);
    let linear = p1 * (1.0 - x) + p2 * x;
    (cubic, linear)
}

/// `L_ν f = ν ∗ f` on the grid. Atoms on nodes shift exactly; others are
/// interpolated cubically. The density is integrated against the
/// piecewise-linear interpolant of `f`, so the result is continuous.
pub fn convolve_operator(sig: &GridSignal, nu: &WeightedMeasure) -> Result<(GridSignal, ConvolutionReport)> {
    let grid = sig.grid;
    let h = grid.h;
    let n = grid.n;
    let dim = sig.dim();
    let mut out = GridSignal::zeros(grid, dim, sig.p);
    let mut report = ConvolutionReport::default();
    for &(t, a) in nu.atoms() {
        let shift = t / h;
        let k = shift.round();
        if (shift - k).abs() < 1e-9 {
            let k = k as usize;
            for i in k..n {
                out.left[i] += &sig.left[i - k] * a;
                out.right[i] += &sig.right[i - k] * a;
            }
        } else {
            report.off_grid_atoms += 1;
            for c in 0..dim {
                let vals: Vec<C64> = (0..n).map(|i| 0.5 * (sig.left[i][c] + sig.right[i][c])).collect();
                for i in 0..n {
                    let pos = i as f64 - shift;
                    if pos < -2.0 {
                        continue;
                    }
                    let (cubic, linear) = cubic_at(&vals, pos);
                    report.interpolation_error = report.interpolation_error.max(((cubic - linear) * a).norm());
                    out.left[i][c] += cubic * a;
                    out.right[i][c] += cubic * a;
                }
            }
        }
    }
    if !nu.terms().is_empty() || !nu.grids().is_empty() {
        let cells = n - 1;
        let (wa, wb) = hat_weights(nu, h, cells);
        let inside: f64 = wa.iter().chain(&wb).map(|w| w.norm()).sum();
        let total = nu.clone().with_weight(0.0).tv_norm().unwrap_or(inside);
        report.truncated_mass = (total - inside).max(0.0);
        let mut planner = FftPlanner::new();
        for c in 0..dim {
            let fl: Vec<C64> = sig.left.iter().map(|v| v[c]).collect();
            let fr: Vec<C64> = sig.right.iter().map(|v| v[c]).collect();
            // Σ_k a_k f⁻[i-k] + Σ_k b_k f⁺[i-k-1]
            let ca = fft_convolve(&mut planner, &fl, &wa);
            let mut shifted_b = vec![C64::new(0.0, 0.0)];
            shifted_b.extend_from_slice(&wb);
            let cb = fft_convolve(&mut planner, &fr, &shifted_b);
            for i in 0..n {
                let v = ca[i] + cb[i];
                out.left[i][c] += v;
                out.right[i][c] += v;
            }
        }
    }
    Ok((out, report))
}

/// Largest singular value of `L_ν` on scalar `ℓ²` signals of the grid, by
/// power iteration on `L*L` (200 steps or relative change below 1e-6).
pub fn multiplier_norm(nu: &WeightedMeasure, grid: Grid) -> Result<f64> {
    let n = grid.n;
    let mut kernel = vec![C64::new(0.0, 0.0); n];
    let mut has_off_grid = false;
    for &(t, a) in nu.atoms() {
        let k = (t / grid.h).round();
        if ((t / grid.h) - k).abs() > 1e-9 || k as usize >= n {
            has_off_grid = true;
        } else {
            kernel[k as usize] += a;
        }
    }
    if has_off_grid {
        return Err(Error::Precondition("power iteration needs on-grid atoms".into()));
    }
    if !nu.terms().is_empty() || !nu.grids().is_empty() {
        let (wa, wb) = hat_weights(nu, grid.h, n - 1);
        for k in 0..n - 1 {
            kernel[k] += wa[k];
            kernel[k + 1] += wb[k];
        }
    }
    let adjoint: Vec<C64> = kernel.iter().map(|c| c.conj()).collect();
    let mut planner = FftPlanner::new();
    let mut x: Vec<C64> = (0..n)
        .map(|i| C64::new(1.0 + 0.1 * ((i * 7919) % 13) as f64, 0.0))
        .collect();
    let mut lambda = 0.0;
    for _ in 0..200 {
        let y = fft_convolve(&mut planner, &x, &kernel);
        // adjoint: correlation, by reversing the signal
        let mut rev: Vec<C64> = y.iter().rev().copied().collect();
        rev = fft_convolve(&mut planner, &rev, &adjoint);
        let z: Vec<C64> = rev.into_iter().rev().collect();
        let norm = z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let xn = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let next = norm / xn;
        if norm == 0.0 {
            return Ok(0.0);
        }
        x = z.into_iter().map(|v| v / norm).collect();
        let change = (next - lambda).abs() / next;
        lambda = next;
        if change < 1e-6 {
            break;
        }
    }
    Ok(lambda.sqrt())
}

/// `sup_s |ν̂(is)|`.
pub fn plancherel_norm(nu: &WeightedMeasure) -> Result<f64> {
    nu.clone().with_weight(0.0).boundary_sup()
}

/// Operator norms of `ι` and `P` for `p = 2`, from their Gram matrices
/// `∫ ψ(s)² T(s)*T(s) ds` and `∫ φ(s)² T(s)T(s)* ds`.
pub fn hilbert_map_norms(psi: &StepFactor, phi: &StepFactor, sg: &Semigroup, grid: Grid) -> Result<(f64, f64)> {
    let dim = sg.dim();
    let mut gi = CMat::zeros(dim, dim);
    let mut gp = CMat::zeros(dim, dim);
    let z = grid.zero_index();
    for i in z..grid.n - 1 {
        let (a, b) = (grid.node(i), grid.node(i + 1));
        for (s, w, side) in [(a, 0.5 * grid.h, true), (b, 0.5 * grid.h, false)] {
            let t = sg.at(s)?;
            let ps = psi.eval_limit(s, side);
            let ph = phi.eval_limit(s, side);
            gi += t.adjoint() * &t * C64::new(w * ps * ps, 0.0);
            gp += &t * t.adjoint() * C64::new(w * ph * ph, 0.0);
        }
    }
    Ok((operator::operator_norm(&gi).sqrt(), operator::operator_norm(&gp).sqrt()))
}

/// One test vector of a factorization check.
#[derive(Debug, Clone)]
pub struct FactorizationRow {
    pub direct: CVec,
    pub factorized: CVec,
    pub relative_error: f64,
    /// Richardson error estimate of the factorized value.
    pub error_estimate: f64,
}

#[derive(Debug, Clone)]
pub struct FactorizationReport {
    pub rows: Vec<FactorizationRow>,
    pub max_relative_error: f64,
    pub m: f64,
    pub certificate_value: f64,
    /// `‖T_μ‖`.
    pub operator_norm: f64,
    /// Power-iteration norm of `L` on the grid.
    pub multiplier_norm: f64,
    /// `sup |ν̂(is)|`.
    pub plancherel_norm: f64,
    /// `M² · value · ‖L‖`.
    pub bound: f64,
    pub bound_holds: bool,
    pub iota_norm: f64,
    pub iota_bound: f64,
    pub projection_norm: f64,
    pub projection_bound: f64,
    pub convolution: ConvolutionReport,
    pub grid: Grid,
    pub passed: bool,
}

struct Pair<'a> {
    psi: &'a StepFactor,
    phi: &'a StepFactor,
    p: f64,
    value: f64,
}

/// `P L ι x` at steps `h` and `h/2`, extrapolated.
fn factorized(
    x: &CVec,
    pair: &Pair<'_>,
    nu: &WeightedMeasure,
    sg: &Semigroup,
    grid: Grid,
) -> Result<(CVec, f64, ConvolutionReport)> {
    let run = |g: Grid| -> Result<(CVec, ConvolutionReport)> {
        let sig = embed(x, pair.psi, sg, g, pair.p)?;
        let (conv, rep) = convolve_operator(&sig, nu)?;
        Ok((project(&conv, pair.phi, sg)?, rep))
    };
    let (coarse, _) = run(grid)?;
    let (fine, rep) = run(grid.refined())?;
    let extrapolated = (&fine * C64::new(4.0, 0.0) - &coarse) / C64::new(3.0, 0.0);
    let estimate = (&fine - &coarse).norm() / 3.0;
    Ok((extrapolated, estimate, rep))
}

fn semigroup_bound(op: &OperatorModel, reach: f64) -> Result<f64> {
    if op.half_plane_type() < -1e-12 {
        return Err(Error::Precondition(format!(
            "the semigroup must be bounded; half-plane type is {}",
            op.half_plane_type()
        )));
    }
    Ok(operator::certify_type(op, 0.0, TimeGrid::new(reach.max(1.0), 400))?.m)
}

fn fastest_rate(op: &OperatorModel, others: &[f64]) -> f64 {
    op.eigenvalues()
        .iter()
        .map(|l| l.norm())
        .chain(others.iter().map(|r| r.abs()))
        .fold(1.0, f64::max)
}

#[allow(clippy::too_many_arguments)]
fn run_check(
    op: &OperatorModel,
    direct_op: &CMat,
    nu: &WeightedMeasure,
    pair: Pair<'_>,
    grid: Grid,
    m: f64,
    xs: &[CVec],
    tol: f64,
) -> Result<FactorizationReport> {
    let sg = Semigroup::new(op);
    let mut rows = Vec::new();
    let mut convolution = ConvolutionReport::default();
    for x in xs {
        if x.len() != op.dim() {
            return Err(Error::Precondition("test vector has the wrong dimension".into()));
        }
        let direct = direct_op * x;
        let (fact, estimate, rep) = factorized(x, &pair, nu, &sg, grid)?;
        convolution.off_grid_atoms = convolution.off_grid_atoms.max(rep.off_grid_atoms);
        convolution.interpolation_error = convolution.interpolation_error.max(rep.interpolation_error);
        convolution.truncated_mass = convolution.truncated_mass.max(rep.truncated_mass);
        let scale = direct.norm().max(1e-300);
        rows.push(FactorizationRow {
            relative_error: (&fact - &direct).norm() / scale,
            error_estimate: estimate / scale,
            direct,
            factorized: fact,
        });
    }
    let max_relative_error = rows.iter().map(|r| r.relative_error).fold(0.0, f64::max);
    let norm_t = operator::operator_norm(direct_op);
    let l_norm = if nu
        .atoms()
        .iter()
        .all(|&(t, _)| ((t / grid.h) - (t / grid.h).round()).abs() < 1e-9)
    {
        multiplier_norm(nu, grid)?
    } else {
        f64::NAN
    };
    let planch = plancherel_norm(nu)?;
    let l_for_bound = if l_norm.is_nan() { planch } else { l_norm.max(planch) };
    let bound = m * m * pair.value * l_for_bound;
    let (iota_norm, projection_norm) = if pair.p == 2.0 {
        hilbert_map_norms(pair.psi, pair.phi, &sg, grid)?
    } else {
        (f64::NAN, f64::NAN)
    };
    let qc = eta::conjugate(pair.p);
    let bound_holds = norm_t <= bound * (1.0 + tol) + tol;
    Ok(FactorizationReport {
        rows,
        max_relative_error,
        m,
        certificate_value: pair.value,
        operator_norm: norm_t,
        multiplier_norm: l_norm,
        plancherel_norm: planch,
        bound,
        bound_holds,
        iota_norm,
        iota_bound: m * pair.psi.norm(pair.p),
        projection_norm,
        projection_bound: m * pair.phi.norm(qc),
        convolution,
        grid,
        passed: bound_holds && max_relative_error <= tol,
    })
}

/// Checks `T_μ x = P L_{e_ω μ} ι x` for the certificate's `(ω, τ, p)`, and
/// the estimate `‖T_μ‖ <= M² value ‖L_{e_ω μ}‖`.
pub fn factorization_check(
    op: &OperatorModel,
    mu: &WeightedMeasure,
    cert: &FactorizationCertificate,
    xs: &[CVec],
    tol: f64,
) -> Result<FactorizationReport> {
    let (omega, tau) = (cert.alpha, cert.t);
    if mu.support_low() < tau {
        return Err(Error::SupportViolation(format!(
            "measure support starts at {} but the certificate needs [{tau}, ∞)",
            mu.support_low()
        )));
    }
    let reach = tau.max(1.0) + 30.0 / omega;
    let m = semigroup_bound(op, reach)?;
    let per_unit = (64.0 * fastest_rate(op, &[omega]) * tau).ceil() as usize;
    let grid = Grid::new(tau, per_unit.max(8), reach);
    let direct = calculus::apply_measure(op, mu)?.matrix;
    let nu = mu.exp_weighted(omega);
    let pair = Pair {
        psi: &cert.psi,
        phi: &cert.phi,
        p: cert.q,
        value: cert.value,
    };
    run_check(op, &direct, &nu, pair, grid, m, xs, tol)
}

/// `p^{-1/p} (p')^{-1/p'}`.
pub fn moment_constant(p: f64) -> f64 {
    let pc = eta::conjugate(p);
    let part = |x: f64| if x.is_infinite() { 1.0 } else { x.powf(-1.0 / x) };
    part(p) * part(pc)
}

/// Checks `T_{tμ} = P L_{e_{-ω} μ} ι` with `ψ = φ = e^{ω·}` (`ω < 0`) and the
/// bound `M²/|ω| p^{-1/p} (p')^{-1/p'} ‖L‖`.
pub fn moment_factorization_check(
    op: &OperatorModel,
    mu: &WeightedMeasure,
    omega: f64,
    p: f64,
    xs: &[CVec],
    tol: f64,
) -> Result<FactorizationReport> {
    if !(omega < 0.0) {
        return Err(Error::Precondition(format!("omega must be negative, got {omega}")));
    }
    let reach = 1.0 + 30.0 / omega.abs();
    let m = semigroup_bound(op, reach)?;
    let per_unit = (64.0 * fastest_rate(op, &[omega])).ceil() as usize;
    let grid = Grid::new(1.0, per_unit, reach);
    let direct = -calculus::apply_measure(op, &mu.moment(1))?.matrix;
    let nu = mu.exp_weighted(-omega);
    let factor = StepFactor::unit(Vec::new(), 1.0, omega);
    let value = factor.norm(p) * factor.norm(eta::conjugate(p));
    let pair = Pair {
        psi: &factor,
        phi: &factor,
        p,
        value,
    };
    run_check(op, &direct, &nu, pair, grid, m, xs, tol)
}

/// Norm identities of a scalar measure: boundary sup, total variation and
/// the grid norm of `L_{e_{-ω}μ}` on `ℓ^p`.
#[derive(Debug, Clone)]
pub struct NormIdentityReport {
    pub p: f64,
    pub boundary_sup: f64,
    pub tv_norm: f64,
    /// Grid norm of the convolution operator, NaN when atoms are off-grid.
    pub grid_norm: f64,
    /// The analytic norm for this `p`: TV for `p ∈ {1, ∞}`, sup for `p = 2`.
    pub analytic_norm: f64,
    pub relative_gap: f64,
    pub sup_below_tv: bool,
}

fn aligned_grid(mu: &WeightedMeasure) -> Grid {
    let extent = mu.time_extent();
    let reach = extent + 30.0 * extent.max(1.0);
    let mut m = 64;
    while m <= 1 << 12 {
        let h = 1.0 / m as f64;
        if mu
            .atoms()
            .iter()
            .all(|&(t, _)| ((t / h) - (t / h).round()).abs() < 1e-9)
        {
            break;
        }
        m *= 2;
    }
    Grid::new(1.0, m.min(1 << 12), reach)
}

pub fn am1_norm_identity_check(mu: &WeightedMeasure, p: f64) -> Result<NormIdentityReport> {
    if ![1.0, 2.0, f64::INFINITY].contains(&p) {
        return Err(Error::Precondition(format!("p must be 1, 2 or infinity, got {p}")));
    }
    let boundary_sup = mu.boundary_sup()?;
    let tv_norm = mu.tv_norm()?;
    let nu = mu.exp_weighted(-mu.weight_exponent());
    let grid = aligned_grid(mu);
    let grid_norm = if p == 2.0 {
        multiplier_norm(&nu, grid).unwrap_or(f64::NAN)
    } else {
        // ℓ¹ and ℓ^∞ convolution norms are the ℓ¹ norm of the kernel
        let atoms: f64 = nu.atoms().iter().map(|a| a.1.norm()).sum();
        let cont = if nu.terms().is_empty() && nu.grids().is_empty() {
            0.0
        } else {
            let (a, b) = hat_weights(&nu, grid.h, grid.n - 1);
            let mut k = vec![C64::new(0.0, 0.0); grid.n];
            for j in 0..grid.n - 1 {
                k[j] += a[j];
                k[j + 1] += b[j];
            }
            k.iter().map(|v| v.norm()).sum()
        };
        atoms + cont
    };
    let analytic_norm = if p == 2.0 { boundary_sup } else { tv_norm };
    Ok(NormIdentityReport {
        p,
        boundary_sup,
        tv_norm,
        grid_norm,
        analytic_norm,
        relative_gap: (grid_norm - analytic_norm).abs() / analytic_norm.max(1e-300),
        sup_below_tv: boundary_sup <= tv_norm * (1.0 + 1e-9) + 1e-12,
    })
}

/// Deterministic test vectors: the standard basis and a fixed mixed vector.
pub fn default_vectors(dim: usize) -> Vec<CVec> {
    let mut out: Vec<CVec> = (0..dim)
        .map(|i| DVector::from_fn(dim, |j, _| C64::new(if i == j { 1.0 } else { 0.0 }, 0.0)))
        .collect();
    out.push(DVector::from_fn(dim, |j, _| {
        C64::new(1.0 / (j + 1) as f64, 0.3 * j as f64)
    }));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eta::trivial_certificate;
    use crate::measure::ExpPoly;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn d12() -> OperatorModel {
        OperatorModel::diagonal_real(&[1.0, 2.0]).unwrap()
    }

    #[test]
    fn embed_examples() {
        let op = d12();
        let sg = Semigroup::new(&op);
        let grid = Grid::new(1.0, 16, 3.0);
        let zero = embed(&CVec::zeros(2), &StepFactor::unit(vec![1.0], 0.0, 0.0), &sg, grid, 2.0).unwrap();
        assert_eq!(zero.norm(), 0.0);

        let a0 = OperatorModel::diagonal_real(&[0.0, 0.0]).unwrap();
        let x = DVector::from_vec(vec![c(1.0), c(2.0)]);
        let sig = embed(
            &x,
            &StepFactor::unit(vec![1.0], 0.0, 0.0),
            &Semigroup::new(&a0),
            grid,
            2.0,
        )
        .unwrap();
        for i in 0..grid.n {
            let s = grid.node(i);
            let inside = (-1.0..0.0).contains(&s);
            let expected = if inside { x.clone() } else { CVec::zeros(2) };
            assert!((&sig.right[i] - &expected).norm() < 1e-15, "{s}");
        }

        let cert = trivial_certificate(1.0, 1.0, 2.0).unwrap();
        let sig = embed(&x, &cert.psi, &sg, grid, 2.0).unwrap();
        assert!(sig.norm() <= cert.psi.norm(2.0) * x.norm() + 1e-3);
    }

    #[test]
    fn convolution_examples() {
        let grid = Grid::new(1.0, 8, 4.0);
        let mut sig = GridSignal::zeros(grid, 1, 2.0);
        for i in 0..grid.n {
            let v = DVector::from_element(1, c((grid.node(i)).sin()));
            sig.left[i] = v.clone();
            sig.right[i] = v;
        }
        let (same, _) = convolve_operator(&sig, &WeightedMeasure::dirac(0.0).unwrap()).unwrap();
        for i in 0..grid.n {
            assert_eq!(same.left[i], sig.left[i]);
        }
        let (shifted, rep) = convolve_operator(&sig, &WeightedMeasure::dirac(3.0 * grid.h).unwrap()).unwrap();
        assert_eq!(rep.off_grid_atoms, 0);
        for i in 3..grid.n {
            assert_eq!(shifted.right[i], sig.right[i - 3]);
        }
    }

    #[test]
    fn plancherel_consistency() {
        let grid = Grid::new(1.0, 32, 80.0);
        let nu = WeightedMeasure::exponential(c(-1.0));
        let power = multiplier_norm(&nu, grid).unwrap();
        let sup = plancherel_norm(&nu).unwrap();
        assert!((sup - 1.0).abs() < 1e-9);
        assert!((power - sup).abs() <= 0.01 * sup, "{power} {sup}");
    }

    #[test]
    fn norm_identities() {
        let r = am1_norm_identity_check(&WeightedMeasure::dirac(1.5).unwrap(), 1.0).unwrap();
        assert!((r.tv_norm - 1.0).abs() < 1e-12 && (r.boundary_sup - 1.0).abs() < 1e-9);
        assert!((r.grid_norm - 1.0).abs() < 1e-12);
        let r = am1_norm_identity_check(&WeightedMeasure::exponential(c(-1.0)), 2.0).unwrap();
        assert!((r.boundary_sup - 1.0).abs() < 1e-9 && (r.tv_norm - 1.0).abs() < 1e-9);
        assert!(r.relative_gap < 0.01, "{r:?}");
        let two = WeightedMeasure::from_atoms(vec![(1.0, c(1.0)), (2.0, c(-1.0))]).unwrap();
        let r = am1_norm_identity_check(&two, 2.0).unwrap();
        assert!((r.boundary_sup - 2.0).abs() < 1e-6 && (r.tv_norm - 2.0).abs() < 1e-12);
        assert!(r.sup_below_tv && r.relative_gap < 0.01, "{r:?}");
    }

    #[test]
    fn project_examples() {
        let a0 = OperatorModel::diagonal_real(&[0.0]).unwrap();
        let sg = Semigroup::new(&a0);
        let grid = Grid::new(1.0, 16, 3.0);
        let x = DVector::from_element(1, C64::new(0.5, -2.0));
        let mut sig = GridSignal::zeros(grid, 1, 2.0);
        assert_eq!(
            project(&sig, &StepFactor::unit(vec![1.0], 0.0, 0.0), &sg)
                .unwrap()
                .norm(),
            0.0
        );
        for i in 0..grid.n {
            let s = grid.node(i);
            if (0.0..=1.0).contains(&s) {
                sig.left[i] = x.clone();
                sig.right[i] = x.clone();
            }
        }
        let v = project(&sig, &StepFactor::unit(vec![1.0], 0.0, 0.0), &sg).unwrap();
        assert!((v - &x).norm() < 1e-14);
    }

    #[test]
    fn delta_factorization() {
        let op = d12();
        let cert = trivial_certificate(1.0, 1.0, 2.0).unwrap();
        let mu = WeightedMeasure::dirac(1.0).unwrap();
        let rep = factorization_check(&op, &mu, &cert, &default_vectors(2), 1e-6).unwrap();
        assert!(rep.max_relative_error <= 1e-6, "{}", rep.max_relative_error);
        assert!(rep.passed);
        assert!(rep.iota_norm <= rep.iota_bound + 1e-9);
        assert!(rep.projection_norm <= rep.projection_bound + 1e-9);
        assert!(rep.operator_norm <= rep.projection_norm * rep.multiplier_norm * rep.iota_norm * (1.0 + 1e-6));

        let early = WeightedMeasure::dirac(0.5).unwrap();
        assert!(matches!(
            factorization_check(&op, &early, &cert, &default_vectors(2), 1e-6),
            Err(Error::SupportViolation(_))
        ));
    }

    #[test]
    fn density_factorization() {
        let op = OperatorModel::jordan(c(1.0), 2).unwrap();
        let cert = trivial_certificate(0.5, 1.0, 2.0).unwrap();
        let mu = WeightedMeasure::from_term(ExpPoly::new(c(1.0), 1.0, c(0.0), c(-1.0)).unwrap());
        let rep = factorization_check(&op, &mu, &cert, &default_vectors(2), 1e-5).unwrap();
        assert!(rep.max_relative_error <= 1e-5, "{}", rep.max_relative_error);
        assert!(rep.bound_holds);
    }

    #[test]
    fn moment_examples() {
        assert!((moment_constant(2.0) - 0.5).abs() < 1e-15);
        let omega = -0.5;
        let f = StepFactor::unit(Vec::new(), 1.0, omega);
        for r in [0.5, 2.0, 10.0] {
            let v = eta::unit_convolution(&f, &f, r);
            assert!((v - r * (omega * r).exp()).abs() <= 1e-10);
        }
        let op = d12();
        let lambda = c(-1.0);
        let mu = WeightedMeasure::exponential(lambda);
        let rep = moment_factorization_check(&op, &mu, omega, 2.0, &default_vectors(2), 1e-6).unwrap();
        // closed form (A - λ)^{-2}
        let r = operator::resolvent(&op, lambda).unwrap();
        let closed = &r * &r;
        for (x, row) in default_vectors(2).iter().zip(&rep.rows) {
            let want = &closed * x;
            assert!((&row.factorized - &want).norm() <= 1e-6 * want.norm());
        }
        assert!(rep.bound_holds);
    }
}
