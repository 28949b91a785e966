//! Exponentially weighted measures on the half-line: atoms, gridded
//! densities and closed-form exponential-polynomial densities.

use std::fmt::Write as _;

use crate::special;
use crate::{quad, Error, Result, C64};

pub use crate::transference::{am1_norm_identity_check, NormIdentityReport};

/// Piecewise-linear density on `[t0, t0 + (n-1) h]`, zero outside.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    pub t0: f64,
    pub h: f64,
    pub values: Vec<C64>,
}

impl GridDensity {
    pub fn new(t0: f64, h: f64, values: Vec<C64>) -> Result<Self> {
        if !(t0 >= 0.0 && h > 0.0 && values.len() >= 2) {
            return Err(Error::Precondition(
                "grid density needs t0 >= 0, h > 0 and >= 2 values".into(),
            ));
        }
        Ok(Self { t0, h, values })
    }

    /// Samples `g` at the grid nodes.
    pub fn sample(t0: f64, h: f64, n: usize, g: impl Fn(f64) -> C64) -> Result<Self> {
        Self::new(t0, h, (0..n).map(|k| g(t0 + k as f64 * h)).collect())
    }

    pub fn end(&self) -> f64 {
        self.t0 + self.h * (self.values.len() - 1) as f64
    }

    pub fn eval(&self, s: f64) -> C64 {
        if s < self.t0 || s > self.end() {
            return C64::new(0.0, 0.0);
        }
        let x = (s - self.t0) / self.h;
        let k = (x.floor() as usize).min(self.values.len() - 2);
        let frac = x - k as f64;
        self.values[k] * (1.0 - frac) + self.values[k + 1] * frac
    }

    fn shifted(&self, by: f64, scale: C64) -> Self {
        Self {
            t0: self.t0 + by,
            h: self.h,
            values: self.values.iter().map(|v| v * scale).collect(),
        }
    }
}

/// `coeff (s - shift)^power e^{rate (s - shift)}` for `s > shift`, zero before.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpPoly {
    pub coeff: C64,
    pub shift: f64,
    pub power: C64,
    pub rate: C64,
}

impl ExpPoly {
    pub fn new(coeff: C64, shift: f64, power: C64, rate: C64) -> Result<Self> {
        if power.re <= -1.0 {
            return Err(Error::Precondition(format!(
                "density power {power} is not locally integrable"
            )));
        }
        if shift < 0.0 {
            return Err(Error::Precondition("density shift must be >= 0".into()));
        }
        Ok(Self {
            coeff,
            shift,
            power,
            rate,
        })
    }

    pub fn eval(&self, s: f64) -> C64 {
        let u = s - self.shift;
        if u < 0.0 || (u == 0.0 && self.power.re > 0.0) {
            return C64::new(0.0, 0.0);
        }
        if u == 0.0 {
            return if self.power == C64::new(0.0, 0.0) {
                self.coeff
            } else {
                C64::new(f64::INFINITY, 0.0)
            };
        }
        self.coeff * C64::new(u, 0.0).powc(self.power) * (self.rate * u).exp()
    }

    /// `coeff e^{-shift z} Γ(power + 1) (z - rate)^{-(power + 1)}`.
    pub fn laplace(&self, z: C64) -> C64 {
        let b = self.power + 1.0;
        self.coeff * (-z * self.shift).exp() * special::gamma(b) * (z - self.rate).powc(-b)
    }

    /// Decay rate of `|term| e^{-decay s}` after the shift.
    fn excess(&self, decay: f64) -> f64 {
        decay - self.rate.re
    }
}

/// An element of the weighted measure algebra: `μ(ds) = e^{ωs} ν(ds)` with
/// `ν` finite, stored as atoms plus densities.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedMeasure {
    atoms: Vec<(f64, C64)>,
    grids: Vec<GridDensity>,
    terms: Vec<ExpPoly>,
    weight_exponent: f64,
    support_low: f64,
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

impl WeightedMeasure {
    pub fn zero() -> Self {
        Self {
            atoms: Vec::new(),
            grids: Vec::new(),
            terms: Vec::new(),
            weight_exponent: 0.0,
            support_low: f64::INFINITY,
        }
    }

    pub fn dirac(t: f64) -> Result<Self> {
        Self::from_atoms(vec![(t, C64::new(1.0, 0.0))])
    }

    pub fn from_atoms(atoms: Vec<(f64, C64)>) -> Result<Self> {
        Self::from_parts(atoms, Vec::new(), Vec::new())
    }

    /// `e^{rate s} ds` on the half-line.
    pub fn exponential(rate: C64) -> Self {
        Self::from_parts(
            Vec::new(),
            Vec::new(),
            vec![ExpPoly {
                coeff: C64::new(1.0, 0.0),
                shift: 0.0,
                power: zero(),
                rate,
            }],
        )
        .expect("valid exponential density")
    }

    pub fn from_term(term: ExpPoly) -> Self {
        Self::from_parts(Vec::new(), Vec::new(), vec![term]).expect("validated term")
    }

    pub fn from_grid(grid: GridDensity) -> Self {
        Self::from_parts(Vec::new(), vec![grid], Vec::new()).expect("validated grid")
    }

    pub fn from_parts(atoms: Vec<(f64, C64)>, grids: Vec<GridDensity>, terms: Vec<ExpPoly>) -> Result<Self> {
        if atoms.iter().any(|&(t, _)| !(t >= 0.0) || !t.is_finite()) {
            return Err(Error::Precondition("atom locations must be finite and >= 0".into()));
        }
        let mut m = Self {
            atoms,
            grids,
            terms,
            weight_exponent: 0.0,
            support_low: 0.0,
        };
        m.normalize_atoms();
        m.support_low = m.actual_support_low();
        Ok(m)
    }

    fn normalize_atoms(&mut self) {
        self.atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, C64)> = Vec::with_capacity(self.atoms.len());
        for &(t, a) in &self.atoms {
            match merged.last_mut() {
                Some(last) if last.0 == t => last.1 += a,
                _ => merged.push((t, a)),
            }
        }
        self.atoms = merged;
    }

    fn actual_support_low(&self) -> f64 {
        let a = self.atoms.iter().map(|x| x.0);
        let g = self.grids.iter().map(|g| g.t0);
        let e = self.terms.iter().map(|t| t.shift);
        a.chain(g).chain(e).fold(f64::INFINITY, f64::min)
    }

    pub fn with_weight(mut self, omega: f64) -> Self {
        self.weight_exponent = omega;
        self
    }

    /// Declares a lower support bound; it may not exceed the actual support.
    pub fn with_support_low(mut self, tau: f64) -> Result<Self> {
        if tau > self.actual_support_low() {
            return Err(Error::SupportViolation(format!(
                "declared support bound {tau} exceeds actual support start {}",
                self.actual_support_low()
            )));
        }
        self.support_low = tau;
        Ok(self)
    }

    pub fn atoms(&self) -> &[(f64, C64)] {
        &self.atoms
    }

    pub fn grids(&self) -> &[GridDensity] {
        &self.grids
    }

    pub fn terms(&self) -> &[ExpPoly] {
        &self.terms
    }

    pub fn weight_exponent(&self) -> f64 {
        self.weight_exponent
    }

    pub fn support_low(&self) -> f64 {
        self.support_low
    }

    pub fn is_discrete(&self) -> bool {
        self.grids.is_empty() && self.terms.is_empty()
    }

    /// Density value at `s` (atoms excluded).
    pub fn density(&self, s: f64) -> C64 {
        self.grids.iter().map(|g| g.eval(s)).sum::<C64>() + self.terms.iter().map(|t| t.eval(s)).sum::<C64>()
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut m = Self {
            atoms: self.atoms.iter().chain(&other.atoms).copied().collect(),
            grids: self.grids.iter().chain(&other.grids).cloned().collect(),
            terms: self.terms.iter().chain(&other.terms).copied().collect(),
            weight_exponent: self.weight_exponent.max(other.weight_exponent),
            support_low: self.support_low.min(other.support_low),
        };
        m.normalize_atoms();
        m
    }

    pub fn scaled(&self, c: C64) -> Self {
        let mut m = self.clone();
        m.atoms.iter_mut().for_each(|a| a.1 *= c);
        m.grids
            .iter_mut()
            .for_each(|g| g.values.iter_mut().for_each(|v| *v *= c));
        m.terms.iter_mut().for_each(|t| t.coeff *= c);
        m
    }

    /// `e^{kappa s} μ(ds)`; the weight exponent moves by `kappa`.
    pub fn exp_weighted(&self, kappa: f64) -> Self {
        let mut m = self.clone();
        for a in &mut m.atoms {
            a.1 *= (kappa * a.0).exp();
        }
        for g in &mut m.grids {
            for (k, v) in g.values.iter_mut().enumerate() {
                *v *= (kappa * (g.t0 + k as f64 * g.h)).exp();
            }
        }
        for t in &mut m.terms {
            t.coeff *= (kappa * t.shift).exp();
            t.rate += kappa;
        }
        m.weight_exponent += kappa;
        m
    }

    /// `(-s)^m μ(ds)`.
    pub fn moment(&self, m: u32) -> Self {
        let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
        let mut out = self.clone();
        for a in &mut out.atoms {
            a.1 *= sign * a.0.powi(m as i32);
        }
        for g in &mut out.grids {
            for (k, v) in g.values.iter_mut().enumerate() {
                *v *= sign * (g.t0 + k as f64 * g.h).powi(m as i32);
            }
        }
        // (u + shift)^m = sum_j C(m, j) shift^{m-j} u^j
        out.terms = self
            .terms
            .iter()
            .flat_map(|t| {
                (0..=m).filter_map(move |j| {
                    let c = sign * special::binomial(m, j) * t.shift.powi((m - j) as i32);
                    (c != 0.0).then_some(ExpPoly {
                        coeff: t.coeff * c,
                        shift: t.shift,
                        power: t.power + j as f64,
                        rate: t.rate,
                    })
                })
            })
            .collect();
        out.atoms.retain(|a| a.1 != zero());
        out
    }

    /// Quadrature nodes `(s, w)` for `∫ g(s) K(s) ds` over the continuous part,
    /// for kernels with `|K(s)| <~ s^poly e^{-decay s}` oscillating at most
    /// at frequency `spread`.
    pub(crate) fn continuous_nodes(&self, decay: f64, spread: f64, poly: f64) -> Result<Vec<(f64, f64)>> {
        let mut out = Vec::new();
        for t in &self.terms {
            if t.excess(decay) <= 0.0 {
                return Err(Error::Divergence(format!(
                    "density e^({} s) is not integrable against e^(-{decay} s)",
                    t.rate
                )));
            }
        }
        // breakpoints: term starts and grid ranges
        let mut breaks: Vec<f64> = self.terms.iter().map(|t| t.shift).collect();
        for g in &self.grids {
            breaks.push(g.t0);
            breaks.push(g.end());
        }
        if breaks.is_empty() {
            return Ok(out);
        }
        let mut tail_end = breaks.iter().copied().fold(0.0, f64::max);
        let mut min_excess = f64::INFINITY;
        let mut freq = spread;
        for t in &self.terms {
            let k = t.excess(decay);
            min_excess = min_excess.min(k);
            freq = freq.max(spread + t.rate.im.abs());
            let p = t.power.re + poly;
            let scale = special::gamma_real(p.max(0.0) + 1.0) / k.powf(p.max(0.0) + 1.0);
            let mut u = (p.max(0.0) + 1.0) / k;
            let mut steps = 0;
            while u.powf(p) * (-k * u).exp() / k > 1e-17 * scale {
                u *= 1.25;
                steps += 1;
                if steps > 400 {
                    return Err(Error::Divergence(
                        "density tail never meets the truncation criterion".into(),
                    ));
                }
            }
            tail_end = tail_end.max(t.shift + u);
        }
        breaks.push(tail_end);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let width = (8.0 / freq.max(1e-300)).min(4.0 / min_excess.max(1e-300)).max(1e-12);
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let singular = self
                .terms
                .iter()
                .filter(|t| t.shift == a)
                .map(|t| t.power.re)
                .fold(f64::INFINITY, f64::min);
            let grid_cells: Vec<&GridDensity> = self.grids.iter().filter(|g| g.t0 < b && g.end() > a).collect();
            if let Some(h) = grid_cells.iter().map(|g| g.h).reduce(f64::min) {
                // cell-aligned 3-point rules; grids are assumed to share alignment
                let g0 = grid_cells[0];
                let first = ((a - g0.t0) / h).floor();
                let mut lo = a;
                let mut k = first + 1.0;
                while lo < b {
                    let hi = (g0.t0 + k * h).min(b);
                    if hi > lo {
                        if lo == a && singular.is_finite() {
                            quad::push_algebraic(lo, hi, singular, 4, &mut out);
                        } else {
                            out.extend(quad::gl3(lo, hi));
                        }
                    }
                    lo = hi;
                    k += 1.0;
                }
                continue;
            }
            let u0 = width.min(b - a);
            let power = if singular.is_finite() { singular } else { 0.0 };
            quad::push_algebraic(a, a + u0, power, 24, &mut out);
            let panels = ((b - a - u0) / width).ceil() as usize;
            if panels > 4_000_000 {
                return Err(Error::Convergence("density quadrature needs too many panels".into()));
            }
            quad::push_panels(a + u0, b, panels, &mut out);
        }
        Ok(out)
    }

    /// `‖e_{-ω} μ‖_TV`.
    pub fn tv_norm(&self) -> Result<f64> {
        let w = self.weight_exponent;
        let atoms: f64 = self.atoms.iter().map(|&(t, a)| a.norm() * (-w * t).exp()).sum();
        if self.grids.is_empty() && self.terms.len() == 1 {
            let t = self.terms[0];
            let k = t.excess(w);
            if k <= 0.0 {
                return Err(Error::Divergence(format!(
                    "density e^({} s) has infinite mass against weight e^(-{w} s)",
                    t.rate
                )));
            }
            let b = t.power.re + 1.0;
            return Ok(atoms + t.coeff.norm() * (-w * t.shift).exp() * special::gamma_real(b) / k.powf(b));
        }
        let nodes = self.continuous_nodes(w, 0.0, 0.0)?;
        let cont: f64 = nodes
            .iter()
            .map(|&(s, q)| q * self.density(s).norm() * (-w * s).exp())
            .sum();
        Ok(atoms + cont)
    }

    /// `μ̂(z) = ∫ e^{-zs} μ(ds)`, defined for `Re z > ω`.
    pub fn laplace_transform(&self, z: C64) -> Result<C64> {
        if z.re <= self.weight_exponent {
            return Err(Error::Domain(format!(
                "Re z = {} must exceed the weight exponent {}",
                z.re, self.weight_exponent
            )));
        }
        let mut acc: C64 = self.atoms.iter().map(|&(t, a)| a * (-z * t).exp()).sum();
        for t in &self.terms {
            if z.re <= t.rate.re {
                return Err(Error::Domain(format!(
                    "Re z = {} is left of the density abscissa {}",
                    z.re, t.rate.re
                )));
            }
            acc += t.laplace(z);
        }
        for g in &self.grids {
            for k in 0..g.values.len() - 1 {
                let lo = g.t0 + k as f64 * g.h;
                for (s, w) in quad::gl3(lo, lo + g.h) {
                    acc += g.eval(s) * (-z * s).exp() * w;
                }
            }
        }
        Ok(acc)
    }

    /// Characteristic time span, used to pick sampling resolutions.
    pub(crate) fn time_extent(&self) -> f64 {
        let w = self.weight_exponent;
        let a = self.atoms.iter().map(|x| x.0);
        let g = self.grids.iter().map(|g| g.end());
        let e = self.terms.iter().map(|t| t.shift + 1.0 / t.excess(w).max(1e-3));
        a.chain(g).chain(e).fold(1.0, f64::max)
    }

    /// `sup_s |μ̂(ω + is)|` over the boundary line of the weight half-plane.
    pub fn boundary_sup(&self) -> Result<f64> {
        let w = self.weight_exponent;
        if let Some(t) = self.terms.iter().find(|t| t.excess(w) <= 0.0) {
            return Err(Error::Domain(format!(
                "density rate {} reaches the boundary line Re z = {w}",
                t.rate
            )));
        }
        let eval = |s: f64| -> f64 {
            let z = C64::new(w, s);
            let mut acc: C64 = self.atoms.iter().map(|&(t, a)| a * (-z * t).exp()).sum();
            acc += self.terms.iter().map(|t| t.laplace(z)).sum::<C64>();
            for g in &self.grids {
                for k in 0..g.values.len() - 1 {
                    let lo = g.t0 + k as f64 * g.h;
                    for (x, q) in quad::gl3(lo, lo + g.h) {
                        acc += g.eval(x) * (-z * x).exp() * q;
                    }
                }
            }
            acc.norm()
        };
        let spacing = (0.25 / self.time_extent()).min(0.05);
        let reach = if self.grids.is_empty() { 1e8 } else { 1e4 };
        Ok(quad::line_max(eval, spacing, reach, &[]).1)
    }

    /// Convolution `μ ∗ ν`. Densities that have no closed-form product are
    /// discretized onto a common grid of step `h` (taken from a grid
    /// operand, or `default_h` when there is none).
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        self.convolve_with_step(other, 1e-3)
    }

    pub fn convolve_with_step(&self, other: &Self, default_h: f64) -> Result<Self> {
        let weight = self.weight_exponent.max(other.weight_exponent);
        let mut atoms = Vec::new();
        let mut grids = Vec::new();
        let mut terms = Vec::new();
        for &(s, a) in &self.atoms {
            for &(t, b) in &other.atoms {
                atoms.push((s + t, a * b));
            }
        }
        let cross = |atoms_of: &Self, cont_of: &Self, grids: &mut Vec<GridDensity>, terms: &mut Vec<ExpPoly>| {
            for &(s, a) in &atoms_of.atoms {
                grids.extend(cont_of.grids.iter().map(|g| g.shifted(s, a)));
                terms.extend(cont_of.terms.iter().map(|t| ExpPoly {
                    coeff: t.coeff * a,
                    shift: t.shift + s,
                    ..*t
                }));
            }
        };
        cross(self, other, &mut grids, &mut terms);
        cross(other, self, &mut grids, &mut terms);

        let step = self
            .grids
            .iter()
            .chain(&other.grids)
            .map(|g| g.h)
            .reduce(f64::min)
            .unwrap_or(default_h);
        for a in &self.terms {
            for b in &other.terms {
                match closed_form_product(a, b) {
                    Some(ts) => terms.extend(ts),
                    None => {
                        let ga = discretize(a, step, weight)?;
                        let gb = discretize(b, step, weight)?;
                        grids.push(grid_convolve(&ga, &gb)?);
                    }
                }
            }
        }
        for ga in &self.grids {
            for gb in &other.grids {
                grids.push(grid_convolve(ga, gb)?);
            }
            for b in &other.terms {
                grids.push(grid_convolve(ga, &discretize(b, ga.h, weight)?)?);
            }
        }
        for gb in &other.grids {
            for a in &self.terms {
                grids.push(grid_convolve(&discretize(a, gb.h, weight)?, gb)?);
            }
        }
        let mut m = Self::from_parts(atoms, grids, terms)?.with_weight(weight);
        m.support_low = self.support_low + other.support_low;
        Ok(m)
    }

    /// Writes the text form:
    ///
    /// ```text
    /// weight 0
    /// support 1
    /// atom 1 2 0
    /// density 0 0.5 1,0 0.5,0 0,0
    /// exppoly 0 1,0 0,0 -1,0
    /// ```
    ///
    /// `exppoly shift coeff power rate` is the density
    /// `coeff (s - shift)^power e^{rate (s - shift)}` for `s > shift`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "weight {}", self.weight_exponent);
        let _ = writeln!(out, "support {}", self.support_low);
        for &(t, a) in &self.atoms {
            let _ = writeln!(out, "atom {} {} {}", t, a.re, a.im);
        }
        for g in &self.grids {
            let vals: Vec<String> = g.values.iter().map(|v| format!("{},{}", v.re, v.im)).collect();
            let _ = writeln!(out, "density {} {} {}", g.t0, g.h, vals.join(" "));
        }
        for t in &self.terms {
            let _ = writeln!(
                out,
                "exppoly {} {},{} {},{} {},{}",
                t.shift, t.coeff.re, t.coeff.im, t.power.re, t.power.im, t.rate.re, t.rate.im
            );
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut atoms = Vec::new();
        let mut grids = Vec::new();
        let mut terms = Vec::new();
        let mut weight = 0.0;
        let mut support = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let mut toks = body.split_whitespace();
            let key = toks.next().unwrap_or("");
            let rest: Vec<&str> = toks.collect();
            let num =
                |s: &str| -> Result<f64> { s.parse().map_err(|_| Error::parse(line, format!("bad number `{s}`"))) };
            let cplx = |s: &str| -> Result<C64> {
                let (a, b) = s
                    .split_once(',')
                    .ok_or_else(|| Error::parse(line, format!("expected re,im pair, got `{s}`")))?;
                Ok(C64::new(num(a)?, num(b)?))
            };
            match (key, rest.len()) {
                ("weight", 1) => weight = num(rest[0])?,
                ("support", 1) => support = Some(num(rest[0])?),
                ("atom", 3) => atoms.push((num(rest[0])?, C64::new(num(rest[1])?, num(rest[2])?))),
                ("density", n) if n >= 4 => {
                    let values = rest[2..].iter().map(|v| cplx(v)).collect::<Result<_>>()?;
                    grids.push(
                        GridDensity::new(num(rest[0])?, num(rest[1])?, values)
                            .map_err(|e| Error::parse(line, e.to_string()))?,
                    );
                }
                ("exppoly", 4) => terms.push(
                    ExpPoly::new(cplx(rest[1])?, num(rest[0])?, cplx(rest[2])?, cplx(rest[3])?)
                        .map_err(|e| Error::parse(line, e.to_string()))?,
                ),
                _ => return Err(Error::parse(line, format!("unrecognized measure line `{body}`"))),
            }
        }
        let m = Self::from_parts(atoms, grids, terms)?.with_weight(weight);
        match support {
            Some(tau) => m.with_support_low(tau),
            None => Ok(m),
        }
    }
}

/// Closed forms for `a ∗ b` when the rates agree (a Beta integral) or both
/// terms are pure exponentials.
fn closed_form_product(a: &ExpPoly, b: &ExpPoly) -> Option<Vec<ExpPoly>> {
    let shift = a.shift + b.shift;
    let coeff = a.coeff * b.coeff;
    if (a.rate - b.rate).norm() <= 1e-14 * (1.0 + a.rate.norm()) {
        let (x, y) = (a.power + 1.0, b.power + 1.0);
        let beta = special::gamma(x) * special::gamma(y) / special::gamma(x + y);
        return Some(vec![ExpPoly {
            coeff: coeff * beta,
            shift,
            power: x + y - 1.0,
            rate: a.rate,
        }]);
    }
    if coeff == zero() {
        return Some(Vec::new());
    }
    let (m, n) = (integer_power(a.power)?, integer_power(b.power)?);
    // nearly equal rates cancel catastrophically in the partial fractions
    if m + n > 0 && (a.rate - b.rate).norm() < 1e-2 * (1.0 + a.rate.norm().max(b.rate.norm())) {
        return None;
    }
    // partial fractions of m! n! / ((z-a)^{m+1} (z-b)^{n+1})
    let mut out = Vec::with_capacity(m + n + 2);
    let factorial = |k: usize| (1..=k).map(|j| j as f64).product::<f64>();
    let scale = coeff * factorial(m) * factorial(n);
    let mut side = |p: usize, q: usize, own: C64, other: C64| {
        for k in 0..=p {
            let j = p - k;
            let sign = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
            let c = sign * binomial(q + j, j) / factorial(k);
            out.push(ExpPoly {
                coeff: scale * c * (own - other).powi(-((q + 1 + j) as i32)),
                shift,
                power: C64::new(k as f64, 0.0),
                rate: own,
            });
        }
    };
    side(m, n, a.rate, b.rate);
    side(n, m, b.rate, a.rate);
    Some(out)
}

fn integer_power(p: C64) -> Option<usize> {
    (p.im == 0.0 && p.re >= 0.0 && p.re <= 20.0 && p.re.fract() == 0.0).then_some(p.re as usize)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

const MAX_GRID_NODES: usize = 1 << 16;

/// Samples a term onto a grid of step `h`, long enough that the weighted
/// tail mass beyond it is below `1e-10`. The node at a singular start is set
/// so the first cell carries the exact mass.
fn discretize(t: &ExpPoly, h: f64, weight: f64) -> Result<GridDensity> {
    let k = t.excess(weight).max(1e-12);
    let b = t.power.re.max(0.0);
    let mut u = (b + 1.0) / k;
    while u.powf(b) * (-k * u).exp() / k > 1e-10 {
        u *= 1.25;
    }
    let n = (u / h).ceil() as usize + 1;
    if n > MAX_GRID_NODES {
        return Err(Error::GridResolution(format!(
            "discretizing the density needs {n} nodes (cap {MAX_GRID_NODES}); increase the step"
        )));
    }
    let mut values: Vec<C64> = (0..n).map(|j| t.eval(t.shift + j as f64 * h)).collect();
    if t.power.re != 0.0 || t.power.im != 0.0 {
        let mut nodes = Vec::new();
        quad::push_algebraic(t.shift, t.shift + h, t.power.re, 4, &mut nodes);
        let mass: C64 = nodes.iter().map(|&(s, w)| t.eval(s) * w).sum();
        values[0] = mass * 2.0 / h - values[1];
    }
    GridDensity::new(t.shift, h, values)
}

/// Trapezoidal convolution of two grids with the same step.
fn grid_convolve(a: &GridDensity, b: &GridDensity) -> Result<GridDensity> {
    if (a.h - b.h).abs() > 1e-12 * a.h {
        return Err(Error::GridResolution(format!("grid steps differ: {} vs {}", a.h, b.h)));
    }
    let (na, nb) = (a.values.len(), b.values.len());
    let n = na + nb - 1;
    if n > MAX_GRID_NODES {
        return Err(Error::GridResolution(format!(
            "convolution grid of {n} nodes exceeds the cap"
        )));
    }
    let mut out = vec![zero(); n];
    for (i, &x) in a.values.iter().enumerate() {
        let wi = if i == 0 || i == na - 1 { 0.5 } else { 1.0 };
        for (j, &y) in b.values.iter().enumerate() {
            let wj = if j == 0 || j == nb - 1 { 0.5 } else { 1.0 };
            out[i + j] += x * y * (wi * wj * a.h);
        }
    }
    GridDensity::new(a.t0 + b.t0, a.h, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn tv_norm_examples() {
        assert_eq!(WeightedMeasure::dirac(2.5).unwrap().tv_norm().unwrap(), 1.0);
        let e = WeightedMeasure::exponential(c(-1.0));
        assert!((e.tv_norm().unwrap() - 1.0).abs() < 1e-15);
        let mixed = WeightedMeasure::from_atoms(vec![(1.0, c(2.0))])
            .unwrap()
            .plus(&e)
            .with_weight(-1.0);
        assert!(matches!(mixed.tv_norm(), Err(Error::Divergence(_))));
    }

    #[test]
    fn tv_norm_numeric_path_matches_closed_form() {
        let a = ExpPoly::new(c(1.0), 0.0, c(-0.5), c(-1.0)).unwrap();
        let b = ExpPoly::new(c(2.0), 1.0, c(0.0), c(-3.0)).unwrap();
        let m = WeightedMeasure::from_parts(vec![], vec![], vec![a, b]).unwrap();
        // both densities are positive, so the norm is additive
        let exact = special::gamma_real(0.5) + 2.0 / 3.0;
        assert!((m.tv_norm().unwrap() - exact).abs() < 1e-12, "{}", m.tv_norm().unwrap());
    }

    #[test]
    fn convolution_examples() {
        let d = WeightedMeasure::dirac(0.5)
            .unwrap()
            .convolve(&WeightedMeasure::dirac(1.25).unwrap())
            .unwrap();
        assert_eq!(d.atoms(), &[(1.75, c(1.0))]);
        let tau = 0.75;
        let shifted = WeightedMeasure::dirac(tau)
            .unwrap()
            .convolve(&WeightedMeasure::exponential(c(-1.0)))
            .unwrap();
        for s in [0.0, 0.5, 0.76, 1.0, 3.0, 10.0] {
            let expected = if s > tau { (-(s - tau)).exp() } else { 0.0 };
            assert!((shifted.density(s) - c(expected)).norm() < 1e-15);
        }
        assert_eq!(shifted.support_low(), tau);
        let mu = WeightedMeasure::exponential(C64::new(-2.0, 1.0)).plus(&WeightedMeasure::dirac(1.0).unwrap());
        let id = WeightedMeasure::dirac(0.0).unwrap().convolve(&mu).unwrap();
        assert_eq!(id, mu);
    }

    #[test]
    fn laplace_examples() {
        let z = C64::new(0.7, -2.0);
        let tau = 1.5;
        let d = WeightedMeasure::dirac(tau).unwrap();
        assert!((d.laplace_transform(z).unwrap() - (-tau * z).exp()).norm() < 1e-15);
        let e = WeightedMeasure::exponential(c(-1.0));
        assert!((e.laplace_transform(z).unwrap() - 1.0 / (1.0 + z)).norm() < 1e-15);
        let conv = d.convolve(&e).unwrap();
        let expected = (-tau * z).exp() / (1.0 + z);
        assert!((conv.laplace_transform(z).unwrap() - expected).norm() < 1e-15);
        // direct quadrature oracle of ∫_τ^∞ e^{-zs} e^{-(s-τ)} ds
        let re = quad::integrate(|s| ((-z * s).exp() * (-(s - tau)).exp()).re, tau, tau + 60.0, 200);
        let im = quad::integrate(|s| ((-z * s).exp() * (-(s - tau)).exp()).im, tau, tau + 60.0, 200);
        assert!((C64::new(re, im) - expected).norm() < 1e-13);
        assert!(matches!(e.laplace_transform(c(0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn gamma_density_transform() {
        // t^{-1/2} e^{-t} / Γ(1/2) has transform (1+z)^{-1/2}
        let g = ExpPoly::new(c(1.0 / special::gamma_real(0.5)), 0.0, c(-0.5), c(-1.0)).unwrap();
        let z = C64::new(0.3, 4.0);
        assert!((g.laplace(z) - (1.0 + z).powf(-0.5)).norm() < 1e-14);
    }

    #[test]
    fn closed_form_products() {
        let a = WeightedMeasure::exponential(c(-1.0));
        let b = WeightedMeasure::exponential(c(-3.0));
        let z = C64::new(0.5, 1.0);
        for (x, y) in [(&a, &a), (&a, &b)] {
            let p = x.convolve(y).unwrap();
            let lhs = p.laplace_transform(z).unwrap();
            let rhs = x.laplace_transform(z).unwrap() * y.laplace_transform(z).unwrap();
            assert!((lhs - rhs).norm() < 1e-14);
        }
    }

    #[test]
    fn polynomial_densities_convolve_exactly() {
        let a = WeightedMeasure::from_term(ExpPoly::new(c(1.5), 0.25, c(1.0), c(-1.0)).unwrap());
        let b = WeightedMeasure::from_term(ExpPoly::new(c(-0.5), 0.0, c(2.0), C64::new(-3.0, 1.0)).unwrap());
        let p = a.convolve(&b).unwrap();
        assert!(p.grids().is_empty());
        for z in [C64::new(0.1, 0.0), C64::new(0.5, 1.0), C64::new(2.0, -4.0)] {
            let lhs = p.laplace_transform(z).unwrap();
            let rhs = a.laplace_transform(z).unwrap() * b.laplace_transform(z).unwrap();
            assert!((lhs - rhs).norm() < 1e-14, "{lhs} {rhs}");
        }
    }

    #[test]
    fn gridded_convolution_is_second_order() {
        let g = GridDensity::sample(0.0, 0.01, 101, |_| c(1.0)).unwrap();
        let box1 = WeightedMeasure::from_grid(g);
        let tri = box1.convolve(&box1).unwrap();
        // 1_[0,1] * 1_[0,1] is the hat function peaking at s = 1
        assert!((tri.density(1.0) - c(1.0)).norm() < 2e-2);
        assert!((tri.density(0.5) - c(0.5)).norm() < 2e-2);
        let mixed = box1
            .convolve(&WeightedMeasure::exponential(C64::new(-1.0, 2.0)))
            .unwrap();
        let z = C64::new(1.0, 0.5);
        let lhs = mixed.laplace_transform(z).unwrap();
        let rhs = box1.laplace_transform(z).unwrap() / (z + C64::new(1.0, -2.0));
        assert!((lhs - rhs).norm() < 1e-3 * rhs.norm(), "{lhs} {rhs}");
    }

    #[test]
    fn moments() {
        let e = WeightedMeasure::exponential(c(-2.0));
        let z = C64::new(0.5, 0.25);
        // Laplace of (-s)^m μ is the m-th derivative of μ̂
        let m1 = e.moment(1).laplace_transform(z).unwrap();
        assert!((m1 + 1.0 / ((z + 2.0) * (z + 2.0))).norm() < 1e-14);
        let sh = WeightedMeasure::dirac(1.0).unwrap().convolve(&e).unwrap();
        let m2 = sh.moment(2).laplace_transform(z).unwrap();
        // d²/dz² e^{-z}/(z+2) = e^{-z} (1/(z+2) + 2/(z+2)^2 + 2/(z+2)^3)
        let w = z + 2.0;
        let expected = (-z).exp() * (1.0 / w + 2.0 / (w * w) + 2.0 / (w * w * w));
        assert!((m2 - expected).norm() < 1e-14);
    }

    #[test]
    fn boundary_sup_examples() {
        let d = WeightedMeasure::dirac(3.0).unwrap();
        assert!((d.boundary_sup().unwrap() - 1.0).abs() < 1e-15);
        let e = WeightedMeasure::exponential(c(-1.0));
        assert!((e.boundary_sup().unwrap() - 1.0).abs() < 1e-12);
        let two = WeightedMeasure::from_atoms(vec![(1.0, c(1.0)), (2.0, c(-1.0))]).unwrap();
        assert!((two.boundary_sup().unwrap() - 2.0).abs() < 1e-12);
        assert!((two.tv_norm().unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn text_round_trip() {
        let g = GridDensity::new(0.25, 0.1, vec![C64::new(1.0 / 3.0, -2e-9), c(0.5), c(0.0)]).unwrap();
        let t = ExpPoly::new(C64::new(0.1, 0.2), 1.0, c(-0.5), C64::new(-1.0, 7.0)).unwrap();
        let m = WeightedMeasure::from_parts(vec![(0.3, C64::new(2.0, 1e-300))], vec![g], vec![t])
            .unwrap()
            .with_weight(-0.125)
            .with_support_low(0.1)
            .unwrap();
        let text = m.to_text();
        assert_eq!(WeightedMeasure::parse(&text).unwrap(), m);
        assert!(matches!(
            WeightedMeasure::parse("atom 1 2"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            WeightedMeasure::parse("support 2\natom 1 1 0\n"),
            Err(Error::SupportViolation(_))
        ));
    }
}
