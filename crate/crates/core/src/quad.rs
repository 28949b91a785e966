//! Quadrature node generators shared by the scalar and operator-valued
//! integrals. Everything is built on a fixed 20-point Gauss-Legendre rule
//! applied on composite panels.

use std::sync::OnceLock;

/// A quadrature node `(t, w)`: abscissa and weight.
pub type Node = (f64, f64);

const GL_ORDER: usize = 20;

fn legendre_rule(n: usize) -> Vec<Node> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Tricomi initial guess, refined by Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((x, w));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// The reference 20-point rule on `[-1, 1]`.
pub fn gl20() -> &'static [Node] {
    static RULE: OnceLock<Vec<Node>> = OnceLock::new();
    RULE.get_or_init(|| legendre_rule(GL_ORDER))
}

/// Appends the nodes of `panels` equal Gauss-Legendre panels on `[a, b]`.
pub fn push_panels(a: f64, b: f64, panels: usize, out: &mut Vec<Node>) {
    if b <= a || panels == 0 {
        return;
    }
    let h = (b - a) / panels as f64;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        for &(x, w) in gl20() {
            out.push((mid + 0.5 * h * x, 0.5 * h * w));
        }
    }
}

/// Nodes on `[a, b]` for integrands behaving like `(t - a)^(power)` near `a`,
/// `power > -1`. The substitution `t = a + (b - a) v^m` with
/// `m (power + 1) >= 3` turns the singularity into a smooth factor.
pub fn push_algebraic(a: f64, b: f64, power: f64, panels: usize, out: &mut Vec<Node>) {
    if b <= a {
        return;
    }
    let m = (3.0 / (power + 1.0)).ceil().max(1.0);
    let mut unit = Vec::new();
    push_panels(0.0, 1.0, panels, &mut unit);
    let len = b - a;
    for (v, w) in unit {
        let t = a + len * v.powf(m);
        let jac = len * m * v.powf(m - 1.0);
        out.push((t, w * jac));
    }
}

/// Geometrically graded panels towards `a`: `[a, a + len 2^-levels]` is a
/// single panel, followed by dyadic panels up to `b`.
pub fn push_graded(a: f64, b: f64, levels: usize, out: &mut Vec<Node>) {
    if b <= a {
        return;
    }
    let len = b - a;
    let mut hi = len;
    for _ in 0..levels {
        let lo = 0.5 * hi;
        push_panels(a + lo, a + hi, 1, out);
        hi = lo;
    }
    push_panels(a, a + hi, 1, out);
}

/// Integrates a scalar function on `[a, b]` with `panels` GL panels.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize) -> f64 {
    let mut nodes = Vec::new();
    push_panels(a, b, panels, &mut nodes);
    nodes.iter().map(|&(t, w)| w * f(t)).sum()
}

/// Golden-section search for a local maximum of `f` on `[a, b]`.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iter = 0;
    while (b - a).abs() > tol * (1.0 + c.abs()) && iter < 200 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
        iter += 1;
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Nodes of the 3-point Gauss-Legendre rule on `[a, b]`.
pub fn gl3(a: f64, b: f64) -> [Node; 3] {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let x = (0.6f64).sqrt();
    [
        (mid - half * x, half * 5.0 / 9.0),
        (mid, half * 8.0 / 9.0),
        (mid + half * x, half * 5.0 / 9.0),
    ]
}

/// Maximizes `f` over the real line in three stages: a uniform grid of the
/// given spacing near the origin (plus dense `(center, half_width)`
/// patches), log-spaced tails out to `reach`, and golden-section refinement
/// around the best local maxima.
/// Returns the abscissa and value of the maximum found.
pub fn line_max<F: Fn(f64) -> f64>(f: F, spacing: f64, reach: f64, patches: &[(f64, f64)]) -> (f64, f64) {
    let core = (spacing * 20_000.0).max(100.0).min(reach);
    let n_core = ((2.0 * core / spacing).ceil() as usize).min(2_000_000);
    let mut xs: Vec<f64> = (0..=n_core)
        .map(|i| -core + 2.0 * core * i as f64 / n_core as f64)
        .collect();
    for &(c, w) in patches {
        xs.extend((0..=400).map(|i| c - w + 2.0 * w * i as f64 / 400.0));
    }
    xs.sort_by(f64::total_cmp);
    if reach > core {
        let tail = 2_000;
        let ratio = (reach / core).ln();
        for i in 1..=tail {
            let x = core * (ratio * i as f64 / tail as f64).exp();
            xs.push(x);
            xs.push(-x);
        }
        xs.sort_by(f64::total_cmp);
    }
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut peaks: Vec<usize> = (0..xs.len())
        .filter(|&i| {
            let left = if i > 0 { ys[i - 1] } else { f64::NEG_INFINITY };
            let right = if i + 1 < ys.len() { ys[i + 1] } else { f64::NEG_INFINITY };
            ys[i] >= left && ys[i] >= right
        })
        .collect();
    peaks.sort_by(|&a, &b| ys[b].total_cmp(&ys[a]));
    peaks.truncate(8);
    let mut best = (xs[peaks[0]], ys[peaks[0]]);
    for &i in &peaks {
        let lo = xs[i.saturating_sub(1)];
        let hi = xs[(i + 1).min(xs.len() - 1)];
        let (x, y) = golden_max(&f, lo, hi, 1e-14);
        if y > best.1 {
            best = (x, y);
        }
        if ys[i] > best.1 {
            best = (xs[i], ys[i]);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        let s: f64 = gl20().iter().map(|n| n.1).sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn polynomial_exactness() {
        // degree 39 is integrated exactly by a 20-point rule
        let v = integrate(|t| t.powi(38), -1.0, 1.0, 1);
        assert!((v - 2.0 / 39.0).abs() < 1e-14);
    }

    #[test]
    fn algebraic_singularity() {
        let mut nodes = Vec::new();
        push_algebraic(0.0, 1.0, -0.75, 4, &mut nodes);
        let v: f64 = nodes.iter().map(|&(t, w)| w * t.powf(-0.75)).sum();
        assert!((v - 4.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn graded_log_singularity() {
        let mut nodes = Vec::new();
        push_graded(0.0, 1.0, 60, &mut nodes);
        let v: f64 = nodes.iter().map(|&(t, w)| w * t.ln()).sum();
        assert!((v + 1.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn line_max_finds_oscillating_peak() {
        // |e^{-is} - e^{-2is}| = 2|sin(s/2)| peaks at s = pi
        let (_, v) = line_max(|s| (2.0 * (0.5 * s).sin()).abs(), 0.05, 1e6, &[]);
        assert!((v - 2.0).abs() < 1e-12);
        let (x, v) = line_max(|s| 1.0 / (1.0 + s * s).sqrt(), 0.05, 1e8, &[]);
        assert!(x.abs() < 1e-6 && (v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn golden_section_finds_peak() {
        let (x, fx) = golden_max(|s| -(s - 0.3) * (s - 0.3), -1.0, 2.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-6);
        assert!(fx.abs() < 1e-12);
    }
}
