//! Finite-dimensional generators: semigroups `T(t) = exp(-tA)`, resolvents,
//! fractional resolvent powers and the spectral ground truth for `f(A)`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::linalg::{self, Eigen};
use crate::special;
use crate::{quad, CMat, Error, Result, C64};

/// Eigenvector condition number above which the eigenbasis is not trusted.
pub const EIGEN_CONDITION_CAP: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorKind {
    Diagonal(Vec<C64>),
    Dense(CMat),
    /// A single Jordan block `eigenvalue I + N` with ones on the superdiagonal.
    Jordan {
        eigenvalue: C64,
        size: usize,
    },
    /// `base + shift I`.
    Shifted {
        base: Box<OperatorModel>,
        shift: C64,
    },
}

/// A matrix `A` whose negative generates the semigroup under study.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorModel {
    kind: OperatorKind,
    dim: usize,
    half_plane_type: f64,
}

/// The operator after resolving shifts.
#[derive(Debug, Clone)]
pub(crate) enum Structure {
    Diagonal(Vec<C64>),
    Jordan(C64, usize),
    Dense(CMat),
}

impl OperatorModel {
    pub fn diagonal(values: Vec<C64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Precondition("empty diagonal".into()));
        }
        let dim = values.len();
        Ok(Self::finish(OperatorKind::Diagonal(values), dim))
    }

    pub fn diagonal_real(values: &[f64]) -> Result<Self> {
        Self::diagonal(values.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn dense(matrix: CMat) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::Precondition(format!(
                "dense operator must be square and nonempty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if !linalg::is_finite(&matrix) {
            return Err(Error::Precondition("dense operator has non-finite entries".into()));
        }
        let dim = matrix.nrows();
        Ok(Self::finish(OperatorKind::Dense(matrix), dim))
    }

    pub fn jordan(eigenvalue: C64, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::Precondition("Jordan block of size 0".into()));
        }
        Ok(Self::finish(OperatorKind::Jordan { eigenvalue, size }, size))
    }

    pub fn shifted(base: OperatorModel, shift: C64) -> Self {
        let dim = base.dim;
        Self::finish(
            OperatorKind::Shifted {
                base: Box::new(base),
                shift,
            },
            dim,
        )
    }

    fn finish(kind: OperatorKind, dim: usize) -> Self {
        let mut op = Self {
            kind,
            dim,
            half_plane_type: 0.0,
        };
        op.half_plane_type = op.eigenvalues().iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        op
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `min Re σ(A)`: the spectrum lies in the closed half-plane right of it.
    pub fn half_plane_type(&self) -> f64 {
        self.half_plane_type
    }

    pub(crate) fn structure(&self) -> Structure {
        match &self.kind {
            OperatorKind::Diagonal(v) => Structure::Diagonal(v.clone()),
            OperatorKind::Dense(m) => Structure::Dense(m.clone()),
            OperatorKind::Jordan { eigenvalue, size } => Structure::Jordan(*eigenvalue, *size),
            OperatorKind::Shifted { base, shift } => match base.structure() {
                Structure::Diagonal(v) => Structure::Diagonal(v.iter().map(|z| z + shift).collect()),
                Structure::Jordan(l, n) => Structure::Jordan(l + shift, n),
                Structure::Dense(m) => {
                    let n = m.nrows();
                    Structure::Dense(m + linalg::identity(n) * *shift)
                }
            },
        }
    }

    pub fn matrix(&self) -> CMat {
        match self.structure() {
            Structure::Diagonal(v) => DMatrix::from_diagonal(&DVector::from_vec(v)),
            Structure::Jordan(l, n) => jordan_matrix(l, n),
            Structure::Dense(m) => m,
        }
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        match self.structure() {
            Structure::Diagonal(v) => v,
            Structure::Jordan(l, n) => vec![l; n],
            Structure::Dense(m) => linalg::eigenvalues(&m),
        }
    }

    /// Parses the flat text format:
    ///
    /// ```text
    /// # comment
    /// dense 2
    /// 1,0 1,0
    /// 0,0 2,0
    /// ```
    ///
    /// `diagonal n` takes one row of `n` entries, `jordan n` one entry (the
    /// eigenvalue), `shifted n` one entry (the shift) followed by the base
    /// operator in the same format.
    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        let mut pos = 0;
        let op = parse_operator(&lines, &mut pos)?;
        if pos != lines.len() {
            return Err(Error::parse(lines[pos].0, "trailing content after operator"));
        }
        Ok(op)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        write_operator(self, &mut out);
        out
    }
}

fn jordan_matrix(l: C64, n: usize) -> CMat {
    let mut m = DMatrix::from_diagonal_element(n, n, l);
    for i in 0..n.saturating_sub(1) {
        m[(i, i + 1)] = C64::new(1.0, 0.0);
    }
    m
}

fn parse_complex(tok: &str, line: usize) -> Result<C64> {
    let (re, im) = tok
        .split_once(',')
        .ok_or_else(|| Error::parse(line, format!("expected re,im pair, got `{tok}`")))?;
    let re: f64 = re
        .trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("bad real part `{re}`")))?;
    let im: f64 = im
        .trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("bad imaginary part `{im}`")))?;
    Ok(C64::new(re, im))
}

fn parse_row(line: (usize, &str), expected: usize) -> Result<Vec<C64>> {
    let row: Vec<C64> = line
        .1
        .split_whitespace()
        .map(|t| parse_complex(t, line.0))
        .collect::<Result<_>>()?;
    if row.len() != expected {
        return Err(Error::parse(
            line.0,
            format!("expected {expected} entries, got {}", row.len()),
        ));
    }
    Ok(row)
}

fn parse_operator(lines: &[(usize, &str)], pos: &mut usize) -> Result<OperatorModel> {
    let &(ln, header) = lines
        .get(*pos)
        .ok_or_else(|| Error::parse(0, "missing operator header"))?;
    *pos += 1;
    let mut parts = header.split_whitespace();
    let kind = parts.next().unwrap_or("");
    let dim: usize = parts
        .next()
        .and_then(|d| d.parse().ok())
        .ok_or_else(|| Error::parse(ln, "header must be `kind dim`"))?;
    if dim == 0 {
        return Err(Error::parse(ln, "dimension must be positive"));
    }
    let mut next_row = |expected: usize| -> Result<Vec<C64>> {
        let line = *lines
            .get(*pos)
            .ok_or_else(|| Error::parse(ln, "unexpected end of operator data"))?;
        *pos += 1;
        parse_row(line, expected)
    };
    match kind {
        "diagonal" => OperatorModel::diagonal(next_row(dim)?),
        "jordan" => OperatorModel::jordan(next_row(1)?[0], dim),
        "dense" => {
            let mut m = DMatrix::zeros(dim, dim);
            for i in 0..dim {
                for (j, z) in next_row(dim)?.into_iter().enumerate() {
                    m[(i, j)] = z;
                }
            }
            OperatorModel::dense(m)
        }
        "shifted" => {
            let shift = next_row(1)?[0];
            let base = parse_operator(lines, pos)?;
            if base.dim() != dim {
                return Err(Error::parse(ln, "shifted dimension differs from base"));
            }
            Ok(OperatorModel::shifted(base, shift))
        }
        other => Err(Error::parse(ln, format!("unknown operator kind `{other}`"))),
    }
}

fn fmt_c(z: C64) -> String {
    format!("{},{}", z.re, z.im)
}

fn write_operator(op: &OperatorModel, out: &mut String) {
    match &op.kind {
        OperatorKind::Diagonal(v) => {
            let _ = writeln!(out, "diagonal {}", op.dim);
            let row: Vec<String> = v.iter().map(|&z| fmt_c(z)).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        OperatorKind::Jordan { eigenvalue, size } => {
            let _ = writeln!(out, "jordan {size}");
            let _ = writeln!(out, "{}", fmt_c(*eigenvalue));
        }
        OperatorKind::Dense(m) => {
            let _ = writeln!(out, "dense {}", op.dim);
            for i in 0..m.nrows() {
                let row: Vec<String> = (0..m.ncols()).map(|j| fmt_c(m[(i, j)])).collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        }
        OperatorKind::Shifted { base, shift } => {
            let _ = writeln!(out, "shifted {}", op.dim);
            let _ = writeln!(out, "{}", fmt_c(*shift));
            write_operator(base, out);
        }
    }
}

enum Repr {
    Diagonal(Vec<C64>),
    Jordan(C64, usize),
    Eigen(Eigen),
    Pade(CMat),
}

/// Evaluator for `t -> exp(-tA)`. Dense operators use their eigenbasis when
/// its condition number is below [`EIGEN_CONDITION_CAP`] and the Padé
/// exponential otherwise.
pub struct Semigroup {
    repr: Repr,
    dim: usize,
}

impl Semigroup {
    pub fn new(op: &OperatorModel) -> Self {
        let repr = match op.structure() {
            Structure::Diagonal(v) => Repr::Diagonal(v),
            Structure::Jordan(l, n) => Repr::Jordan(l, n),
            Structure::Dense(m) => match linalg::eigen(&m) {
                Some(e) if e.condition < EIGEN_CONDITION_CAP => Repr::Eigen(e),
                _ => Repr::Pade(-m),
            },
        };
        Self { repr, dim: op.dim() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, t: f64) -> Result<CMat> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::Precondition(format!("semigroup time must be >= 0, got {t}")));
        }
        self.weighted_sum(&[(t, C64::new(1.0, 0.0))])
    }

    /// `sum_i w_i T(t_i)`.
    pub fn weighted_sum(&self, nodes: &[(f64, C64)]) -> Result<CMat> {
        let n = self.dim;
        let out = match &self.repr {
            Repr::Diagonal(v) => {
                let d: Vec<C64> = v
                    .iter()
                    .map(|&l| nodes.iter().map(|&(t, w)| w * (-l * t).exp()).sum())
                    .collect();
                DMatrix::from_diagonal(&DVector::from_vec(d))
            }
            Repr::Jordan(l, size) => {
                // coefficient of N^k is sum_i w_i e^{-t_i l} (-t_i)^k / k!
                let mut coef = vec![C64::new(0.0, 0.0); *size];
                for &(t, w) in nodes {
                    let base = w * (-l * t).exp();
                    let mut term = base;
                    for (k, c) in coef.iter_mut().enumerate() {
                        if k > 0 {
                            term *= -t / k as f64;
                        }
                        *c += term;
                    }
                }
                let mut m = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in i..n {
                        m[(i, j)] = coef[j - i];
                    }
                }
                m
            }
            Repr::Eigen(e) => {
                let d: Vec<C64> = e
                    .values
                    .iter()
                    .map(|&l| nodes.iter().map(|&(t, w)| w * (-l * t).exp()).sum())
                    .collect();
                let mut scaled = e.vectors.clone();
                for j in 0..n {
                    for i in 0..n {
                        scaled[(i, j)] *= d[j];
                    }
                }
                scaled * &e.inverse
            }
            Repr::Pade(neg_a) => {
                let mut acc = DMatrix::zeros(n, n);
                for &(t, w) in nodes {
                    acc += linalg::expm(&(neg_a * C64::new(t, 0.0))) * w;
                }
                acc
            }
        };
        if !linalg::is_finite(&out) {
            return Err(Error::Overflow("semigroup entries exceed f64 range".into()));
        }
        Ok(out)
    }
}

/// `exp(-tA)`.
pub fn semigroup_at(op: &OperatorModel, t: f64) -> Result<CMat> {
    Semigroup::new(op).at(t)
}

/// Largest singular value.
pub fn operator_norm(m: &CMat) -> f64 {
    linalg::spectral_norm(m)
}

/// Uniform sampling grid `[0, t_max]` used to certify a type pair.
#[derive(Debug, Clone, Copy)]
pub struct TimeGrid {
    pub t_max: f64,
    pub nodes: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, nodes: usize) -> Self {
        Self { t_max, nodes }
    }
}

/// A certified type pair `(M, omega)`: `|T(t)| <= M e^{omega t}` on the
/// certification grid. `M` is a grid maximum and can only underestimate the
/// true supremum between nodes.
#[derive(Debug, Clone)]
pub struct SemigroupType {
    pub m: f64,
    pub omega: f64,
    pub t_argmax: f64,
    pub time_grid: Vec<f64>,
}

/// Certifies `M = max_t |T(t)| e^{-omega t}` with adaptive refinement: an
/// interval is bisected while its endpoint values differ by more than 1%,
/// and refinement stops once a round changes `M` by less than 0.1%.
pub fn certify_type(op: &OperatorModel, omega: f64, grid: TimeGrid) -> Result<SemigroupType> {
    if grid.t_max <= 0.0 || grid.nodes < 2 {
        return Err(Error::Precondition(
            "certification grid needs t_max > 0 and >= 2 nodes".into(),
        ));
    }
    let sg = Semigroup::new(op);
    let g = |t: f64| -> Result<f64> { Ok(operator_norm(&sg.at(t)?) * (-omega * t).exp()) };
    let mut ts: Vec<f64> = (0..grid.nodes)
        .map(|i| grid.t_max * i as f64 / (grid.nodes - 1) as f64)
        .collect();
    let mut vals: Vec<f64> = ts.iter().map(|&t| g(t)).collect::<Result<_>>()?;
    let argmax = |vals: &[f64]| {
        let mut best = 0;
        for (i, &v) in vals.iter().enumerate() {
            if v > vals[best] {
                best = i;
            }
        }
        best
    };
    let mut m = vals[argmax(&vals)];
    for _round in 0..30 {
        let mut new_ts = Vec::with_capacity(ts.len() * 2);
        let mut new_vals = Vec::with_capacity(ts.len() * 2);
        let mut inserted = false;
        for i in 0..ts.len() {
            new_ts.push(ts[i]);
            new_vals.push(vals[i]);
            if i + 1 < ts.len() {
                let (a, b) = (vals[i], vals[i + 1]);
                if (a - b).abs() > 0.01 * a.max(b) && ts[i + 1] - ts[i] > 1e-12 * grid.t_max {
                    let mid = 0.5 * (ts[i] + ts[i + 1]);
                    new_ts.push(mid);
                    new_vals.push(g(mid)?);
                    inserted = true;
                }
            }
        }
        ts = new_ts;
        vals = new_vals;
        let new_m = vals[argmax(&vals)];
        let change = (new_m - m).abs() / m.max(1e-300);
        m = new_m;
        if !inserted || change < 1e-3 {
            break;
        }
    }
    let best = argmax(&vals);
    let last = vals.len() - 1;
    if best == last && vals[last] > vals[last - 1] * (1.0 + 1e-12) {
        return Err(Error::Divergence(format!(
            "|T(t)| e^(-{omega} t) is still growing at t_max = {}",
            grid.t_max
        )));
    }
    Ok(SemigroupType {
        m: vals[best],
        omega,
        t_argmax: ts[best],
        time_grid: ts,
    })
}

/// `(z - A)^{-1}`.
pub fn resolvent(op: &OperatorModel, z: C64) -> Result<CMat> {
    let dist = op
        .eigenvalues()
        .iter()
        .map(|l| (z - l).norm())
        .fold(f64::INFINITY, f64::min);
    if dist < 1e-10 * (1.0 + z.norm()) {
        return Err(Error::Singularity(format!("z = {z} lies on the spectrum")));
    }
    let n = op.dim();
    match op.structure() {
        Structure::Diagonal(v) => Ok(DMatrix::from_diagonal(&DVector::from_vec(
            v.iter().map(|l| 1.0 / (z - l)).collect(),
        ))),
        Structure::Jordan(l, size) => {
            // sum_k N^k / (z - l)^{k+1}
            let r = 1.0 / (z - l);
            let mut m = DMatrix::zeros(n, n);
            let mut p = r;
            for k in 0..size {
                for i in 0..(size - k) {
                    m[(i, i + k)] = p;
                }
                p *= r;
            }
            Ok(m)
        }
        Structure::Dense(a) => {
            let shifted = linalg::identity(n) * z - a;
            shifted
                .lu()
                .try_inverse()
                .ok_or_else(|| Error::Singularity(format!("z = {z}: zI - A not invertible")))
        }
    }
}

/// A scalar holomorphic function that the spectral oracle can apply.
pub trait ScalarFunction {
    fn value(&self, z: C64) -> Result<C64>;
    /// Taylor coefficients `f^(k)(z) / k!` for `k = 0..order`.
    fn taylor(&self, z: C64, order: usize) -> Result<Vec<C64>>;
    /// `f` is holomorphic on `Re z > abscissa`.
    fn abscissa(&self) -> f64;
}

/// `(z - lambda)^{-alpha}` on the principal branch.
#[derive(Debug, Clone, Copy)]
pub struct ResolventPower {
    pub lambda: C64,
    pub alpha: C64,
}

impl ScalarFunction for ResolventPower {
    fn value(&self, z: C64) -> Result<C64> {
        Ok((z - self.lambda).powc(-self.alpha))
    }

    fn taylor(&self, z: C64, order: usize) -> Result<Vec<C64>> {
        let w = z - self.lambda;
        let mut out = Vec::with_capacity(order + 1);
        let mut c = C64::new(1.0, 0.0);
        for k in 0..=order {
            if k > 0 {
                c *= -(self.alpha + (k - 1) as f64) / k as f64;
            }
            out.push(c * w.powc(-self.alpha - k as f64));
        }
        Ok(out)
    }

    fn abscissa(&self) -> f64 {
        self.lambda.re
    }
}

/// Ground-truth `f(A)`: entrywise on diagonals, Taylor form on Jordan blocks,
/// `V f(Λ) V^-1` on well-conditioned dense matrices, and a circular Cauchy
/// integral otherwise.
pub fn spectral_oracle(op: &OperatorModel, f: &dyn ScalarFunction) -> Result<CMat> {
    let n = op.dim();
    match op.structure() {
        Structure::Diagonal(v) => {
            let d: Vec<C64> = v.iter().map(|&l| f.value(l)).collect::<Result<_>>()?;
            Ok(DMatrix::from_diagonal(&DVector::from_vec(d)))
        }
        Structure::Jordan(l, size) => {
            let coef = f.taylor(l, size - 1)?;
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    m[(i, j)] = coef[j - i];
                }
            }
            Ok(m)
        }
        Structure::Dense(a) => match linalg::eigen(&a) {
            Some(e) if e.condition < EIGEN_CONDITION_CAP => {
                let vals: Vec<C64> = e.values.iter().map(|&l| f.value(l)).collect::<Result<_>>()?;
                let mut scaled = e.vectors.clone();
                for j in 0..n {
                    for i in 0..n {
                        scaled[(i, j)] *= vals[j];
                    }
                }
                Ok(scaled * &e.inverse)
            }
            _ => contour_oracle(&a, f),
        },
    }
}

fn contour_oracle(a: &CMat, f: &dyn ScalarFunction) -> Result<CMat> {
    let n = a.nrows();
    let eigs = linalg::eigenvalues(a);
    let center = eigs.iter().sum::<C64>() / n as f64;
    let rho = eigs.iter().map(|l| (l - center).norm()).fold(0.0, f64::max);
    let gap = center.re - rho - f.abscissa();
    if gap <= 0.0 {
        return Err(Error::Conditioning(
            "eigenbasis ill-conditioned and no circle around the spectrum fits in the function's domain".into(),
        ));
    }
    let r = rho + 0.5 * gap.min(rho + 1.0);
    let eval = |points: usize| -> Result<CMat> {
        let mut acc = DMatrix::zeros(n, n);
        for k in 0..points {
            let theta = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / points as f64;
            let dz = C64::from_polar(r, theta);
            let zeta = center + dz;
            let res = (linalg::identity(n) * zeta - a)
                .lu()
                .try_inverse()
                .ok_or_else(|| Error::Singularity("contour hits the spectrum".into()))?;
            acc += res * (f.value(zeta)? * dz);
        }
        Ok(acc / C64::new(points as f64, 0.0))
    };
    let mut points = 256;
    let mut prev = eval(points)?;
    while points < 1 << 15 {
        points *= 2;
        let next = eval(points)?;
        let diff = (&next - &prev).norm();
        prev = next;
        if diff <= 1e-13 * (1.0 + prev.norm()) {
            return Ok(prev);
        }
    }
    Err(Error::Conditioning("contour quadrature did not settle".into()))
}

/// Both routes to `(A - lambda)^{-alpha}`.
#[derive(Debug, Clone)]
pub struct FractionalPower {
    /// `1/Γ(α) ∫ t^{α-1} e^{λt} T(t) dt` by quadrature.
    pub quadrature: CMat,
    /// Spectral evaluation of `(z - λ)^{-α}`.
    pub oracle: CMat,
    pub truncation: f64,
    pub nodes: usize,
}

impl FractionalPower {
    pub fn discrepancy(&self) -> f64 {
        operator_norm(&(&self.quadrature - &self.oracle)) / operator_norm(&self.oracle).max(1e-300)
    }
}

/// Quadrature nodes for `∫_0^∞ t^{α-1} e^{λt} T(t) dt` (weights include
/// `t^{α-1} e^{λt} / Γ(α)`), with the truncation point it chose.
pub(crate) fn laplace_power_nodes(
    sg: &Semigroup,
    decay: f64,
    spread: f64,
    lambda: C64,
    alpha: C64,
) -> Result<(Vec<(f64, C64)>, f64)> {
    if decay <= 0.0 {
        return Err(Error::Convergence("integrand does not decay".into()));
    }
    let t0 = (1.0 / (decay + spread)).min(1.0 / decay);
    let scale = special::gamma_real(alpha.re) / decay.powf(alpha.re);
    let integrand_norm =
        |t: f64| -> Result<f64> { Ok(t.powf(alpha.re - 1.0) * (lambda.re * t).exp() * operator_norm(&sg.at(t)?)) };
    // truncation: the tail bound (integrand / decay) must fall below 1e-15 of the scale
    let mut t_max = t0.max(1.0 / decay);
    let mut tries = 0;
    loop {
        let a = integrand_norm(t_max)?;
        let b = integrand_norm(1.25 * t_max)?;
        if b <= a && a / decay * 2.0 < 1e-15 * scale {
            break;
        }
        t_max *= 1.5;
        tries += 1;
        if tries > 200 || t_max > 1e7 / decay {
            return Err(Error::Convergence(format!(
                "tail estimate {a:e} still above tolerance at t = {t_max}"
            )));
        }
    }
    let inv_gamma = 1.0 / special::gamma(alpha);
    let mut raw = Vec::new();
    quad::push_algebraic(0.0, t0, alpha.re - 1.0, 24, &mut raw);
    let width = (8.0 / spread.max(1e-300)).min(4.0 / decay);
    let panels = (((t_max - t0) / width).ceil() as usize).clamp(1, 2_000_000);
    quad::push_panels(t0, t_max, panels, &mut raw);
    let nodes = raw
        .into_iter()
        .map(|(t, w)| {
            let kernel = C64::new(t, 0.0).powc(alpha - 1.0) * (lambda * t).exp() * inv_gamma;
            (t, kernel * w)
        })
        .collect();
    Ok((nodes, t_max))
}

/// `(A - λ)^{-α}` for `Re λ < ω₀ <= Re σ(A)` and `Re α > 0`.
pub fn fractional_resolvent_power(op: &OperatorModel, lambda: C64, alpha: C64) -> Result<FractionalPower> {
    if alpha.re <= 0.0 {
        return Err(Error::Precondition(format!("Re alpha must be positive, got {alpha}")));
    }
    let omega0 = op.half_plane_type();
    if lambda.re >= omega0 {
        return Err(Error::Precondition(format!(
            "Re lambda = {} must lie left of the spectrum (half-plane type {omega0})",
            lambda.re
        )));
    }
    let sg = Semigroup::new(op);
    let spread = op.eigenvalues().iter().map(|l| (l - lambda).norm()).fold(0.0, f64::max) + op.dim() as f64;
    let (nodes, t_max) = laplace_power_nodes(&sg, omega0 - lambda.re, spread, lambda, alpha)?;
    let quadrature = sg.weighted_sum(&nodes)?;
    let oracle = spectral_oracle(op, &ResolventPower { lambda, alpha })?;
    Ok(FractionalPower {
        quadrature,
        oracle,
        truncation: t_max,
        nodes: nodes.len(),
    })
}
