//! Experiment runners that tabulate measured operator norms against the
//! explicit bounds of the calculus, with CSV and SVG output.
//!
//! Every row carries `ratio = measured / bound` and `pass ⇔ ratio <= 1 + tol`.
//! Rows are computed in parallel and emitted in grid order, so a fixed
//! configuration and seed give byte-identical files.

pub mod config;
pub mod svg;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock};

use nalgebra::DVector;
use rayon::prelude::*;

use crate::calculus;
use crate::eta;
use crate::operator::{self, OperatorModel, TimeGrid};
use crate::symbol::{catalog, Expr, HalfPlaneFunction};
use crate::{linalg, quad, special, CMat, CVec, Error, Result, C64};

pub use config::{ExperimentConfig, OperatorRecipe};
use svg::{LineChart, Series};

/// Bundled demo configuration.
pub const DEMO_CONFIG: &str = include_str!("../../configs/demo.conf");

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub params: Vec<(String, String)>,
    pub measured: f64,
    pub bound: f64,
    pub ratio: f64,
    pub pass: bool,
}

impl ResultRow {
    pub fn new(experiment: &str, params: Vec<(&str, String)>, measured: f64, bound: f64, tol: f64) -> Self {
        let ratio = if bound == 0.0 && measured == 0.0 {
            0.0
        } else {
            measured / bound
        };
        Self {
            experiment: experiment.to_string(),
            params: params.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            measured,
            bound,
            ratio,
            pass: ratio <= 1.0 + tol,
        }
    }

    pub fn param(&self, name: &str) -> Option<&str> {
        self.params.iter().find(|p| p.0 == name).map(|p| p.1.as_str())
    }
}

/// Rows of one experiment plus an optional chart.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub rows: Vec<ResultRow>,
    pub chart: Option<LineChart>,
}

impl Table {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for r in &self.rows {
            for (k, _) in &r.params {
                if !names.contains(k) {
                    names.push(k.clone());
                }
            }
        }
        names
    }

    pub fn to_csv(&self) -> String {
        let names = self.param_names();
        let mut s = String::from("experiment");
        for n in &names {
            let _ = write!(s, ",param:{n}");
        }
        s.push_str(",measured,bound,ratio,pass\n");
        for r in &self.rows {
            s.push_str(&r.experiment);
            for n in &names {
                s.push(',');
                s.push_str(r.param(n).unwrap_or(""));
            }
            let _ = writeln!(s, ",{},{},{},{}", sci(r.measured), sci(r.bound), sci(r.ratio), r.pass);
        }
        s
    }
}

/// 17 significant digits.
pub fn sci(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn short(x: f64) -> String {
    format!("{x}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Svg,
}

impl Format {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "csv" => Ok(Format::Csv),
            "svg" => Ok(Format::Svg),
            other => Err(Error::Usage(format!(
                "unknown output format `{other}` (expected csv or svg)"
            ))),
        }
    }
}

/// Writes `<dir>/<name>.csv` and `<dir>/<name>.svg`; returns the paths written.
pub fn emit(table: &Table, formats: &[Format], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for f in formats {
        let (path, body) = match f {
            Format::Csv => (dir.join(format!("{}.csv", table.name)), table.to_csv()),
            Format::Svg => match &table.chart {
                Some(c) => (dir.join(format!("{}.svg", table.name)), c.render()),
                None => continue,
            },
        };
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        out.push(path);
    }
    Ok(out)
}

/// Global settings from the `[general]` section.
#[derive(Debug, Clone, Copy)]
pub struct Settings {
    pub seed: u64,
    pub tol: f64,
}

impl Settings {
    pub fn from_config(c: &ExperimentConfig) -> Result<Self> {
        Ok(Self {
            seed: c.integer("general", "seed", 20_240_501)?,
            tol: c.number("general", "tol", 1e-9)?,
        })
    }
}

/// `sup_t ‖T(t)‖` for an operator of positive half-plane type: the grid
/// certificate polished by a golden-section search around its argmax.
pub fn semigroup_constant(op: &OperatorModel) -> Result<f64> {
    let w0 = op.half_plane_type();
    if w0 <= 0.0 {
        return Err(Error::Precondition(format!(
            "semigroup must be exponentially stable, half-plane type is {w0}"
        )));
    }
    let t_max = 40.0 / w0.min(1.0);
    let ty = operator::certify_type(op, 0.0, TimeGrid::new(t_max, 400))?;
    let sg = operator::Semigroup::new(op);
    let step = t_max / 399.0;
    let lo = (ty.t_argmax - step).max(0.0);
    let hi = ty.t_argmax + step;
    let (_, polished) = quad::golden_max(
        |t| sg.at(t).map(|m| operator::operator_norm(&m)).unwrap_or(0.0),
        lo,
        hi,
        1e-10,
    );
    Ok(ty.m.max(polished).max(1.0))
}

/// `η(a, 1, 2)` from the best certificate, memoized.
pub fn eta_upper(a: f64) -> Result<f64> {
    static MEMO: OnceLock<Mutex<HashMap<u64, f64>>> = OnceLock::new();
    let memo = MEMO.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = memo.lock().expect("memo lock").get(&a.to_bits()) {
        return Ok(*v);
    }
    let v = eta::best_certificate(a, 1.0, 2.0)?.value;
    memo.lock().expect("memo lock").insert(a.to_bits(), v);
    Ok(v)
}

fn regime(a: f64) -> &'static str {
    if a <= 0.5 {
        "log"
    } else {
        "exponential"
    }
}

fn function(name: &str) -> Result<HalfPlaneFunction> {
    catalog::get(name).ok_or_else(|| Error::Usage(format!("unknown catalog function `{name}`")))
}

fn delay(tau: f64) -> HalfPlaneFunction {
    HalfPlaneFunction::new(Expr::Exp(tau))
}

struct Family {
    labels: Vec<String>,
    ops: Vec<OperatorModel>,
    m: Vec<f64>,
}

fn family(recipes: &[OperatorRecipe], seed: u64) -> Result<Family> {
    let ops: Vec<OperatorModel> = recipes
        .iter()
        .enumerate()
        .map(|(i, r)| r.build(seed, i))
        .collect::<Result<_>>()?;
    let m = ops.par_iter().map(semigroup_constant).collect::<Result<Vec<_>>>()?;
    Ok(Family {
        labels: recipes.iter().map(|r| r.to_string()).collect(),
        ops,
        m,
    })
}

fn eta_grid(pairs: &[f64]) -> Result<HashMap<u64, f64>> {
    let mut uniq: Vec<f64> = pairs.to_vec();
    uniq.sort_by(f64::total_cmp);
    uniq.dedup();
    let vals = uniq.par_iter().map(|&a| eta_upper(a)).collect::<Result<Vec<_>>>()?;
    Ok(uniq.iter().map(|a| a.to_bits()).zip(vals).collect())
}

const DEFAULT_OPERATORS: &str = "diag(1,2); jordan(1,2); normal(3); normal(4); perturbed(3); perturbed(4)";

/// `‖(e_{-τ} f)(A)‖` against `M² η(ω, τ, 2) ‖e_{-τ} f‖_{H∞(R_{-ω})}`, and in
/// the exponential regime against `2 M² e^{-ωτ} ‖e_{-τ} f‖`. Fit rows compare
/// the family supremum of `‖F(A)‖ / (M² ‖F‖)` with the η curve, and a band
/// row checks that `η / |log(ωτ)|` varies by at most a factor 10.
pub fn run_thm35(c: &ExperimentConfig, s: Settings) -> Result<Table> {
    let recipes = c.operators("thm35", DEFAULT_OPERATORS)?;
    let names = c.names("thm35", "functions", &["one", "resolvent", "delay", "crank_nicolson"]);
    let taus = c.numbers("thm35", "tau", &[0.01, 0.1, 1.0, 4.0])?;
    let omegas = c.numbers("thm35", "omega", &[0.5, 0.1])?;
    let fam = family(&recipes, s.seed)?;
    let fns: Vec<HalfPlaneFunction> = names.iter().map(|n| function(n)).collect::<Result<_>>()?;
    let products: Vec<f64> = omegas.iter().flat_map(|w| taus.iter().map(move |t| w * t)).collect();
    let etas = eta_grid(&products)?;

    let mut jobs = Vec::new();
    for (oi, _) in fam.ops.iter().enumerate() {
        for (fi, _) in fns.iter().enumerate() {
            for &tau in &taus {
                for &omega in &omegas {
                    jobs.push((oi, fi, tau, omega));
                }
            }
        }
    }
    // (rows, normalized measurement for the fit)
    let computed = jobs
        .par_iter()
        .map(|&(oi, fi, tau, omega)| -> Result<(Vec<ResultRow>, f64)> {
            let big_f = fns[fi].product(&delay(tau));
            let sup = big_f.sup_norm(-omega)?;
            let measured = calculus::apply_function(&fam.ops[oi], &big_f)?.norm_value;
            let m2 = fam.m[oi] * fam.m[oi];
            let a = omega * tau;
            let eta_v = etas[&a.to_bits()];
            let base = vec![
                ("operator", fam.labels[oi].clone()),
                ("function", names[fi].clone()),
                ("tau", short(tau)),
                ("omega", short(omega)),
                ("omega_tau", short(a)),
                ("regime", regime(a).into()),
                ("m", sci(fam.m[oi])),
                ("eta", sci(eta_v)),
                ("sup_norm", sci(sup)),
            ];
            let mut rows = Vec::new();
            let mut p = base.clone();
            p.push(("form", "eta".into()));
            rows.push(ResultRow::new("thm35", p, measured, m2 * eta_v * sup, s.tol));
            if a > 0.5 {
                let mut p = base;
                p.push(("form", "closed".into()));
                rows.push(ResultRow::new("thm35", p, measured, 2.0 * m2 * (-a).exp() * sup, s.tol));
            }
            Ok((rows, if sup > 0.0 { measured / (m2 * sup) } else { 0.0 }))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows: Vec<ResultRow> = computed.iter().flat_map(|c| c.0.iter().cloned()).collect();
    let mut uniq = products.clone();
    uniq.sort_by(f64::total_cmp);
    uniq.dedup();
    let mut fit_points = Vec::new();
    for &a in &uniq {
        let sup = jobs
            .iter()
            .zip(&computed)
            .filter(|(j, _)| j.3 * j.2 == a)
            .map(|(_, c)| c.1)
            .fold(0.0, f64::max);
        let eta_v = etas[&a.to_bits()];
        fit_points.push((a, sup, eta_v));
        rows.push(ResultRow::new(
            "thm35",
            vec![
                ("omega_tau", short(a)),
                ("regime", regime(a).into()),
                ("form", "fit".into()),
            ],
            sup,
            eta_v,
            s.tol,
        ));
    }
    let logs: Vec<f64> = uniq
        .iter()
        .filter(|&&a| a <= 0.5)
        .map(|&a| etas[&a.to_bits()] / a.ln().abs())
        .collect();
    if logs.len() >= 2 {
        let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
        rows.push(ResultRow::new(
            "thm35",
            vec![("form", "log_band".into())],
            hi / lo,
            10.0,
            s.tol,
        ));
    }
    let c_fit = logs.iter().copied().fold(0.0, f64::max);
    let chart = LineChart {
        title: "Decay-weighted calculus bound".into(),
        x_label: "omega tau".into(),
        y_label: "norm / (M^2 sup)".into(),
        log_x: true,
        log_y: true,
        series: vec![
            Series {
                name: "eta upper".into(),
                points: fit_points.iter().map(|p| (p.0, p.2)).collect(),
                scatter: false,
            },
            Series {
                name: "family sup".into(),
                points: fit_points.iter().map(|p| (p.0, p.1)).collect(),
                scatter: false,
            },
            Series {
                name: "c |log|".into(),
                points: fit_points
                    .iter()
                    .filter(|p| p.0 < 1.0)
                    .map(|p| (p.0, c_fit * p.0.ln().abs()))
                    .collect(),
                scatter: false,
            },
        ],
    };
    Ok(Table {
        name: "thm35".into(),
        rows,
        chart: Some(chart),
    })
}

/// `C(α, λ, ω) = 1/|Γ(α)| ∫_0^∞ t^{Re α - 1} e^{(Re λ + ω) t} η(ωt, 1, 2) dt`,
/// the constant with `‖f(A)(A-λ)^{-α}‖ <= C M² ‖f‖_{H∞(R_{-ω})}`.
///
/// `η` is nonincreasing, so on a geometric grid of `u = ωt` it is bounded
/// by its value at the left node. Beyond the grid `η <= 2e^{-u}`; below it
/// `η <= κ |log u|` with `κ` the largest ratio on the first decade.
pub fn smoothing_constant(alpha: C64, lambda: C64, omega: f64) -> Result<f64> {
    if !(alpha.re > 0.0 && lambda.re < 0.0 && omega > 0.0) {
        return Err(Error::Precondition(
            "need Re alpha > 0, Re lambda < 0, omega > 0".into(),
        ));
    }
    let (u_min, u_max, ratio) = (1e-4f64, 8.0f64, 2f64.powf(0.25));
    let mut grid = vec![u_min];
    while *grid.last().expect("nonempty") < u_max {
        let next = grid.last().expect("nonempty") * ratio;
        grid.push(next.min(u_max));
    }
    let etas = grid.par_iter().map(|&u| eta_upper(u)).collect::<Result<Vec<_>>>()?;
    let kappa = grid
        .iter()
        .zip(&etas)
        .filter(|(u, _)| **u <= 10.0 * u_min)
        .map(|(u, e)| e / u.ln().abs())
        .fold(0.0, f64::max);
    let b = alpha.re - 1.0;
    let c = lambda.re / omega + 1.0;
    let weight = |u: f64| u.powf(b) * (c * u).exp();
    let mut acc = 0.0;
    // [0, u_min]: κ|log u|
    let mut nodes = Vec::new();
    quad::push_algebraic(0.0, u_min, b, 8, &mut nodes);
    acc += nodes
        .iter()
        .map(|&(u, w)| w * weight(u) * kappa * u.ln().abs())
        .sum::<f64>();
    for (k, win) in grid.windows(2).enumerate() {
        acc += etas[k] * quad::integrate(weight, win[0], win[1], 2);
    }
    // tail with η <= 2e^{-u}
    let tail_rate = c - 1.0;
    let end = u_max + 60.0 / tail_rate.abs().max(1e-3);
    acc += quad::integrate(
        |u| 2.0 * weight(u) * (-u).exp(),
        u_max,
        end,
        ((end - u_max) / 2.0).ceil() as usize,
    );
    let gamma = special::gamma(alpha).norm();
    Ok(acc * omega.powf(-alpha.re) / gamma)
}

/// Hilbert-space rows: `‖g(A)T(τ)‖` against `M² η(ω,τ,2) e^{ωτ} ‖g‖` (and
/// `2M²‖g‖` in the exponential regime), plus smoothing rows
/// `‖f(A)(A-λ)^{-α}‖ <= C(α,λ,ω) M² ‖f‖`.
pub fn run_cor310(c: &ExperimentConfig, s: Settings) -> Result<Table> {
    let recipes = c.operators("cor310", DEFAULT_OPERATORS)?;
    let names = c.names("cor310", "functions", &["one", "resolvent", "delay", "crank_nicolson"]);
    let taus = c.numbers("cor310", "tau", &[0.01, 0.1, 1.0, 4.0])?;
    let omegas = c.numbers("cor310", "omega", &[0.5, 0.1])?;
    let alphas = c.numbers("cor310", "alpha", &[0.25, 0.5, 1.0])?;
    let lambdas = c.numbers("cor310", "lambda", &[-1.0])?;
    let smooth_omega = c.number("cor310", "smoothing_omega", 0.5)?;
    let fam = family(&recipes, s.seed)?;
    let fns: Vec<HalfPlaneFunction> = names.iter().map(|n| function(n)).collect::<Result<_>>()?;
    let products: Vec<f64> = omegas.iter().flat_map(|w| taus.iter().map(move |t| w * t)).collect();
    let etas = eta_grid(&products)?;
    let mut constants = HashMap::new();
    for &al in &alphas {
        for &la in &lambdas {
            let k = smoothing_constant(C64::new(al, 0.0), C64::new(la, 0.0), smooth_omega)?;
            constants.insert((al.to_bits(), la.to_bits()), k);
        }
    }

    #[derive(Clone, Copy)]
    enum Job {
        Semigroup {
            oi: usize,
            fi: usize,
            tau: f64,
            omega: f64,
        },
        Smoothing {
            oi: usize,
            fi: usize,
            alpha: f64,
            lambda: f64,
        },
    }
    let mut jobs = Vec::new();
    for oi in 0..fam.ops.len() {
        for fi in 0..fns.len() {
            for &tau in &taus {
                for &omega in &omegas {
                    jobs.push(Job::Semigroup { oi, fi, tau, omega });
                }
            }
            for &alpha in &alphas {
                for &lambda in &lambdas {
                    jobs.push(Job::Smoothing { oi, fi, alpha, lambda });
                }
            }
        }
    }
    let rows = jobs
        .par_iter()
        .map(|job| -> Result<Vec<ResultRow>> {
            match *job {
                Job::Semigroup { oi, fi, tau, omega } => {
                    let g = &fns[fi];
                    let sup = g.sup_norm(-omega)?;
                    let measured = calculus::apply_with_semigroup(&fam.ops[oi], g, tau)?.norm_value;
                    let m2 = fam.m[oi] * fam.m[oi];
                    let a = omega * tau;
                    let eta_v = etas[&a.to_bits()];
                    let base = vec![
                        ("part", "a".to_string()),
                        ("operator", fam.labels[oi].clone()),
                        ("function", names[fi].clone()),
                        ("tau", short(tau)),
                        ("omega", short(omega)),
                        ("omega_tau", short(a)),
                        ("regime", regime(a).into()),
                        ("m", sci(fam.m[oi])),
                        ("eta", sci(eta_v)),
                        ("sup_norm", sci(sup)),
                    ];
                    let mut out = Vec::new();
                    let mut p = base.clone();
                    p.push(("form", "eta".into()));
                    out.push(ResultRow::new("cor310", p, measured, m2 * eta_v * a.exp() * sup, s.tol));
                    if a > 0.5 {
                        let mut p = base;
                        p.push(("form", "closed".into()));
                        out.push(ResultRow::new("cor310", p, measured, 2.0 * m2 * sup, s.tol));
                    }
                    Ok(out)
                }
                Job::Smoothing { oi, fi, alpha, lambda } => {
                    let f = &fns[fi];
                    let sup = f.sup_norm(-smooth_omega)?;
                    let r = calculus::apply_smoothed(&fam.ops[oi], f, C64::new(lambda, 0.0), C64::new(alpha, 0.0))?;
                    let k = constants[&(alpha.to_bits(), lambda.to_bits())];
                    let m2 = fam.m[oi] * fam.m[oi];
                    let p = vec![
                        ("part", "c".to_string()),
                        ("operator", fam.labels[oi].clone()),
                        ("function", names[fi].clone()),
                        ("omega", short(smooth_omega)),
                        ("alpha", short(alpha)),
                        ("lambda", short(lambda)),
                        ("m", sci(fam.m[oi])),
                        ("constant", sci(k)),
                        ("sup_norm", sci(sup)),
                        ("form", "smoothing".into()),
                    ];
                    Ok(vec![ResultRow::new("cor310", p, r.norm_value, k * m2 * sup, s.tol)])
                }
            }
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect::<Vec<_>>();
    let smoothing: Vec<&ResultRow> = rows.iter().filter(|r| r.param("form") == Some("smoothing")).collect();
    let chart = LineChart {
        title: "Smoothing rows".into(),
        x_label: "row".into(),
        y_label: "norm".into(),
        log_x: false,
        log_y: true,
        series: vec![
            Series {
                name: "bound".into(),
                points: smoothing.iter().enumerate().map(|(i, r)| (i as f64, r.bound)).collect(),
                scatter: true,
            },
            Series {
                name: "measured".into(),
                points: smoothing
                    .iter()
                    .enumerate()
                    .map(|(i, r)| (i as f64, r.measured))
                    .collect(),
                scatter: true,
            },
        ],
    };
    Ok(Table {
        name: "cor310".into(),
        rows,
        chart: Some(chart),
    })
}

/// `‖f'(A)‖ <= M²/(2|ω|) ‖f‖_{H∞(R_ω)}` for `ω < 0`; order-2 rows apply the
/// same bound to `f'` on `R_{ω/2}` and report `‖f''(A)‖ |ω|² / (M² ‖f‖)`.
pub fn run_thm44(c: &ExperimentConfig, s: Settings) -> Result<Table> {
    let recipes = c.operators("thm44", DEFAULT_OPERATORS)?;
    let names = c.names(
        "thm44",
        "functions",
        &["resolvent", "delay", "double_pole", "crank_nicolson", "complex_pole"],
    );
    let omegas = c.numbers("thm44", "omega", &[-0.9, -0.5, -0.25, -0.1])?;
    let orders = c.numbers("thm44", "order", &[1.0, 2.0])?;
    if omegas.iter().any(|&w| w >= 0.0) {
        return Err(Error::Usage("thm44 omega values must be negative".into()));
    }
    let fam = family(&recipes, s.seed)?;
    let fns: Vec<HalfPlaneFunction> = names.iter().map(|n| function(n)).collect::<Result<_>>()?;
    let constant = transference_constant();
    let mut jobs = Vec::new();
    for oi in 0..fam.ops.len() {
        for fi in 0..fns.len() {
            for &omega in &omegas {
                for &m in &orders {
                    jobs.push((oi, fi, omega, m as u32));
                }
            }
        }
    }
    let rows = jobs
        .par_iter()
        .map(|&(oi, fi, omega, m)| -> Result<ResultRow> {
            let f = &fns[fi];
            let m2 = fam.m[oi] * fam.m[oi];
            let sup = f.sup_norm(omega)?;
            let measured = calculus::apply_derivative(&fam.ops[oi], f, m)?.symbolic.norm_value;
            let (beta, bound) = match m {
                1 => (omega, m2 * constant / omega.abs() * sup),
                _ => {
                    let beta = omega / 2.0;
                    let lower = f.derivative(m - 1).sup_norm(beta)?;
                    (beta, m2 * constant / beta.abs() * lower)
                }
            };
            let measured_constant = measured * omega.abs().powi(m as i32) / (m2 * sup);
            Ok(ResultRow::new(
                "thm44",
                vec![
                    ("operator", fam.labels[oi].clone()),
                    ("function", names[fi].clone()),
                    ("omega", short(omega)),
                    ("order", m.to_string()),
                    ("beta", short(beta)),
                    ("m", sci(fam.m[oi])),
                    ("sup_norm", sci(sup)),
                    ("measured_constant", sci(measured_constant)),
                ],
                measured,
                bound,
                s.tol,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let first: Vec<&ResultRow> = rows.iter().filter(|r| r.param("order") == Some("1")).collect();
    let chart = LineChart {
        title: "First derivative bound".into(),
        x_label: "row".into(),
        y_label: "norm".into(),
        log_x: false,
        log_y: true,
        series: vec![
            Series {
                name: "bound".into(),
                points: first.iter().enumerate().map(|(i, r)| (i as f64, r.bound)).collect(),
                scatter: true,
            },
            Series {
                name: "measured".into(),
                points: first.iter().enumerate().map(|(i, r)| (i as f64, r.measured)).collect(),
                scatter: true,
            },
        ],
    };
    Ok(Table {
        name: "thm44".into(),
        rows,
        chart: Some(chart),
    })
}

/// `p^{-1/p} (p')^{-1/p'}` at `p = 2`.
pub fn transference_constant() -> f64 {
    crate::transference::moment_constant(2.0)
}

fn is_normal(m: &CMat) -> bool {
    let comm = m * m.adjoint() - m.adjoint() * m;
    operator::operator_norm(&comm) <= 1e-10 * operator::operator_norm(m).powi(2).max(1e-300)
}

/// `max_{1 <= n <= N} ‖r^n x‖`.
pub fn power_sup(r: &CMat, x: &CVec, n_max: usize) -> f64 {
    let mut v = x.clone();
    let mut best: f64 = 0.0;
    for _ in 0..n_max {
        v = r * v;
        best = best.max(v.norm());
    }
    best
}

/// `r(hA)` for `r(z) = (2-z)/(2+z)`, through the calculus.
pub fn crank_nicolson_step(op: &OperatorModel, h: f64) -> Result<CMat> {
    let scaled = OperatorModel::dense(op.matrix() * C64::new(h, 0.0))?;
    Ok(calculus::apply_function(&scaled, &function("crank_nicolson")?)?.matrix)
}

/// Powers of the Crank-Nicolson step on smoothed initial data
/// `x_α = (A-λ)^{-α} x₀`. With `A = B + δ`, `δ` half the half-plane type,
/// the bound is `C(α, λ-δ, δ) M_B² ‖x₀‖`. Non-normal operators also get a
/// row for the spread of the supremum across `h`.
pub fn run_stability(c: &ExperimentConfig, s: Settings) -> Result<Table> {
    let recipes = c.operators("stability", "upper(0.05,1); diag(1,2)")?;
    let alphas = c.numbers("stability", "alpha", &[0.5])?;
    let hs = c.numbers("stability", "h", &[1.0, 0.1, 0.01])?;
    let n_max = c.integer("stability", "n_max", 10_000)? as usize;
    let lambda = c.number("stability", "lambda", -1.0)?;
    let spread_tol = c.number("stability", "spread_tol", 0.05)?;
    let ops: Vec<OperatorModel> = recipes
        .iter()
        .enumerate()
        .map(|(i, r)| r.build(s.seed, i))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut series = Vec::new();

    let boundary = (0..=20_000)
        .map(|i| {
            let y = -1000.0 + 0.1 * i as f64;
            let z = C64::new(0.0, y);
            ((2.0 - z) / (2.0 + z)).norm()
        })
        .fold(0.0, f64::max);
    rows.push(ResultRow::new(
        "stability",
        vec![("kind", "boundary".into())],
        boundary,
        1.0,
        s.tol,
    ));

    for (oi, op) in ops.iter().enumerate() {
        let label = recipes[oi].to_string();
        let n = op.dim();
        let x0 = DVector::from_element(n, C64::new(1.0 / (n as f64).sqrt(), 0.0));
        let delta = 0.5 * op.half_plane_type();
        let b = OperatorModel::shifted(op.clone(), C64::new(-delta, 0.0));
        let mb = semigroup_constant(&b)?;
        let steps = hs
            .par_iter()
            .map(|&h| crank_nicolson_step(op, h))
            .collect::<Result<Vec<_>>>()?;
        let normal = is_normal(&op.matrix());
        if normal {
            for (k, &h) in hs.iter().enumerate() {
                let sup = power_sup(&steps[k], &x0, n_max);
                rows.push(ResultRow::new(
                    "stability",
                    vec![
                        ("kind", "contraction".into()),
                        ("operator", label.clone()),
                        ("h", short(h)),
                    ],
                    sup,
                    x0.norm(),
                    s.tol,
                ));
            }
        }
        for &alpha in &alphas {
            let al = C64::new(alpha, 0.0);
            let la = C64::new(lambda, 0.0);
            let power = operator::fractional_resolvent_power(op, la, al)?;
            let x_alpha = &power.quadrature * &x0;
            let inverse = linalg::inverse(&power.quadrature)
                .ok_or_else(|| Error::Conditioning("fractional power is singular".into()))?;
            let lift = operator::operator_norm(&inverse);
            let k = smoothing_constant(al, la - delta, delta)?;
            let bound = k * mb * mb * x0.norm();
            let mut sups = Vec::new();
            for (i, &h) in hs.iter().enumerate() {
                let sup = power_sup(&steps[i], &x_alpha, n_max);
                let raw = power_sup(&steps[i], &x0, n_max);
                sups.push((h, sup));
                let base = vec![("operator", label.clone()), ("alpha", short(alpha)), ("h", short(h))];
                let mut p = base.clone();
                p.insert(0, ("kind", "smoothed".into()));
                p.push(("m", sci(mb)));
                p.push(("constant", sci(k)));
                rows.push(ResultRow::new("stability", p, sup, bound, s.tol));
                let mut p = base;
                p.insert(0, ("kind", "raw".into()));
                rows.push(ResultRow::new("stability", p, raw, lift * sup, s.tol));
            }
            if !normal && sups.len() >= 2 {
                let hi = sups.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
                let lo = sups.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
                rows.push(ResultRow::new(
                    "stability",
                    vec![
                        ("kind", "spread".into()),
                        ("operator", label.clone()),
                        ("alpha", short(alpha)),
                    ],
                    (hi - lo) / lo,
                    spread_tol,
                    s.tol,
                ));
            }
            series.push(Series {
                name: format!("{label} a={alpha}"),
                points: sups,
                scatter: false,
            });
        }
    }
    let chart = LineChart {
        title: "sup_n |r(hA)^n x_alpha|".into(),
        x_label: "h".into(),
        y_label: "sup".into(),
        log_x: true,
        log_y: false,
        series,
    };
    Ok(Table {
        name: "stability".into(),
        rows,
        chart: Some(chart),
    })
}

/// Envelope table over `(αt, q)`: lower bound against the best certificate,
/// the closed exponential form against `2e^{-αt}`, and a log band per `q`.
pub fn run_eta_sweep(c: &ExperimentConfig, s: Settings) -> Result<Table> {
    let qs = c.numbers("eta", "q", &[1.5, 2.0, 3.0])?;
    let logs = c.numbers("eta", "log_at", &[1e-1, 1e-2, 1e-3, 1e-4])?;
    let exps = c.numbers("eta", "exp_at", &[0.75, 1.0, 2.0, 4.0])?;
    let mut jobs = Vec::new();
    for &q in &qs {
        for &a in logs.iter().chain(&exps) {
            jobs.push((q, a));
        }
    }
    let env = jobs
        .par_iter()
        .map(|&(q, a)| eta::envelope(a, 1.0, q))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut series = Vec::new();
    for &q in &qs {
        let qc = eta::conjugate(q);
        let limit = (1.0 / q).min(1.0 / qc);
        let mut upper_pts = Vec::new();
        let mut lower_pts = Vec::new();
        let mut band = Vec::new();
        for ((jq, a), e) in jobs.iter().zip(&env) {
            if *jq != q {
                continue;
            }
            let regime = if *a <= limit { "log" } else { "exponential" };
            upper_pts.push((*a, e.upper));
            lower_pts.push((*a, e.lower));
            rows.push(ResultRow::new(
                "eta",
                vec![
                    ("kind", "sandwich".into()),
                    ("q", short(q)),
                    ("alpha_t", short(*a)),
                    ("regime", regime.into()),
                    ("upper_source", e.upper_source.name().into()),
                    ("lower_source", e.lower_source.name().into()),
                ],
                e.lower,
                e.upper,
                s.tol,
            ));
            if *a <= limit && *a < 1.0 {
                band.push(e.upper / a.ln().abs());
            } else if *a > 1.0 / q {
                let cert = eta::exponential_certificate(*a, 1.0, q)?;
                rows.push(ResultRow::new(
                    "eta",
                    vec![
                        ("kind", "exponential".into()),
                        ("q", short(q)),
                        ("alpha_t", short(*a)),
                        ("regime", regime.into()),
                        ("closed_form", sci(((a * q).exp_m1()).powf(-1.0 / q))),
                    ],
                    cert.value,
                    2.0 * (-a).exp(),
                    s.tol,
                ));
            }
        }
        if band.len() >= 2 {
            let hi = band.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = band.iter().copied().fold(f64::INFINITY, f64::min);
            rows.push(ResultRow::new(
                "eta",
                vec![("kind", "log_band".into()), ("q", short(q))],
                hi / lo,
                10.0,
                s.tol,
            ));
        }
        series.push(Series {
            name: format!("upper q={q}"),
            points: upper_pts,
            scatter: false,
        });
        series.push(Series {
            name: format!("lower q={q}"),
            points: lower_pts,
            scatter: false,
        });
    }
    let mut grid: Vec<f64> = logs.iter().chain(&exps).copied().collect();
    grid.sort_by(f64::total_cmp);
    series.push(Series {
        name: "2 exp(-at)".into(),
        points: grid
            .iter()
            .filter(|&&a| a > 0.3)
            .map(|&a| (a, 2.0 * (-a).exp()))
            .collect(),
        scatter: false,
    });
    let chart = LineChart {
        title: "eta envelope".into(),
        x_label: "alpha t".into(),
        y_label: "eta".into(),
        log_x: true,
        log_y: true,
        series,
    };
    Ok(Table {
        name: "eta".into(),
        rows,
        chart: Some(chart),
    })
}

/// Registry of experiment names.
pub const EXPERIMENTS: &[&str] = &["thm35", "cor310", "thm44", "stability", "eta"];

pub fn run(name: &str, c: &ExperimentConfig, s: Settings) -> Result<Table> {
    match name {
        "thm35" => run_thm35(c, s),
        "cor310" => run_cor310(c, s),
        "thm44" => run_thm44(c, s),
        "stability" => run_stability(c, s),
        "eta" => run_eta_sweep(c, s),
        other => Err(Error::Usage(format!("unknown experiment `{other}`"))),
    }
}

/// Runs every experiment whose section is present (all of them when the
/// configuration has no experiment sections).
pub fn run_all(c: &ExperimentConfig, s: Settings) -> Result<Vec<Table>> {
    let any = EXPERIMENTS.iter().any(|e| c.has_section(e));
    EXPERIMENTS
        .iter()
        .filter(|e| !any || c.has_section(e))
        .map(|e| run(e, c, s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings() -> Settings {
        Settings { seed: 1, tol: 1e-9 }
    }

    #[test]
    fn csv_shape() {
        let t = Table {
            name: "x".into(),
            rows: vec![],
            chart: None,
        };
        assert_eq!(t.to_csv(), "experiment,measured,bound,ratio,pass\n");
        let r = ResultRow::new("x", vec![("a", "1".into())], 0.5, 2.0, 1e-9);
        assert_eq!(r.ratio, 0.25);
        assert!(r.pass);
        let t = Table {
            name: "x".into(),
            rows: vec![r],
            chart: None,
        };
        assert_eq!(
            t.to_csv(),
            "experiment,param:a,measured,bound,ratio,pass\nx,1,5.0000000000000000e-1,2.0000000000000000e0,2.5000000000000000e-1,true\n"
        );
        assert!(Format::parse("png").is_err());
    }

    #[test]
    fn thm35_contraction_example() {
        let c = ExperimentConfig::parse("[thm35]\noperators = diag(1,2)\nfunctions = one\ntau = 0.1\nomega = 0.5\n")
            .unwrap();
        let t = run_thm35(&c, settings()).unwrap();
        let row = &t.rows[0];
        assert!(row.measured < 1.0 && row.pass);
        assert!((row.measured - (-0.1f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn exponential_branch_row() {
        let c =
            ExperimentConfig::parse("[thm35]\noperators = diag(1,2)\nfunctions = one\ntau = 2\nomega = 0.5\n").unwrap();
        let t = run_thm35(&c, settings()).unwrap();
        let closed = t.rows.iter().find(|r| r.param("form") == Some("closed")).unwrap();
        assert!(closed.pass);
        assert_eq!(closed.param("regime"), Some("exponential"));
    }

    #[test]
    fn smoothing_constant_is_finite() {
        for al in [0.25, 0.5, 1.0] {
            let k = smoothing_constant(C64::new(al, 0.0), C64::new(-1.0, 0.0), 0.5).unwrap();
            assert!(k.is_finite() && k > 0.0);
        }
    }

    #[test]
    fn crank_nicolson_matches_algebra() {
        let op = OperatorModel::jordan(C64::new(0.3, 0.0), 3).unwrap();
        let h = 0.7;
        let r = crank_nicolson_step(&op, h).unwrap();
        let a = op.matrix() * C64::new(h, 0.0);
        let two = linalg::identity(3) * C64::new(2.0, 0.0);
        let direct = (&two - &a) * linalg::inverse(&(&two + &a)).unwrap();
        assert!(operator::operator_norm(&(r - direct)) < 1e-9);
    }

    #[test]
    fn constant_at_two() {
        assert!((transference_constant() - 0.5).abs() < 1e-15);
    }
}
