//! Dense complex linear algebra used by the operator layer: spectral norm,
//! Schur-based eigendecomposition and a Padé matrix exponential.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use crate::{CMat, CVec};

pub fn identity(n: usize) -> CMat {
    DMatrix::identity(n, n)
}

/// Largest singular value.
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

pub fn vector_norm(v: &CVec) -> f64 {
    v.norm()
}

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn condition_number(m: &CMat) -> f64 {
    let sv = m.clone().singular_values();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        sv.max() / min
    }
}

pub fn inverse(m: &CMat) -> Option<CMat> {
    m.clone().try_inverse()
}

/// Complex Schur form `m = Q T Q*` with `T` upper triangular.
pub fn schur(m: &CMat) -> (CMat, CMat) {
    let (q, mut t) = Schur::new(m.clone()).unpack();
    // scrub roundoff below the diagonal
    let n = t.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            t[(i, j)] = Complex64::new(0.0, 0.0);
        }
    }
    (q, t)
}

pub fn eigenvalues(m: &CMat) -> Vec<Complex64> {
    let (_, t) = schur(m);
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

/// Eigendecomposition `m = V diag(values) V^-1`.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<Complex64>,
    pub vectors: CMat,
    pub inverse: CMat,
    pub condition: f64,
}

impl Eigen {
    pub fn reconstruct(&self, f: impl Fn(Complex64) -> Complex64) -> CMat {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let fj = f(self.values[j]);
            for i in 0..n {
                scaled[(i, j)] *= fj;
            }
        }
        scaled * &self.inverse
    }
}

/// Eigenvectors by back-substitution on the Schur factor. Returns `None`
/// when the eigenvector basis is numerically defective.
pub fn eigen(m: &CMat) -> Option<Eigen> {
    let n = m.nrows();
    let (q, t) = schur(m);
    let scale = t.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    let mut y = DMatrix::<Complex64>::zeros(n, n);
    for k in 0..n {
        let lk = t[(k, k)];
        y[(k, k)] = Complex64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for l in (j + 1)..=k {
                s += t[(j, l)] * y[(l, k)];
            }
            let mut d = t[(j, j)] - lk;
            if d.norm() < 1e-14 * scale {
                if s.norm() < 1e-14 * scale {
                    // repeated eigenvalue with a decoupled eigenvector
                    d = Complex64::new(1.0, 0.0);
                    s = Complex64::new(0.0, 0.0);
                } else {
                    return None;
                }
            }
            y[(j, k)] = -s / d;
        }
    }
    let mut v = q * y;
    for j in 0..n {
        let norm = v.column(j).norm();
        if norm == 0.0 || !norm.is_finite() {
            return None;
        }
        for i in 0..n {
            v[(i, j)] /= norm;
        }
    }
    let condition = condition_number(&v);
    let inverse = v.clone().try_inverse()?;
    let values = (0..n).map(|i| t[(i, i)]).collect();
    Some(Eigen {
        values,
        vectors: v,
        inverse,
        condition,
    })
}

fn one_norm(m: &CMat) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371_920_351_148_152;

/// Matrix exponential by scaling and squaring with the [13/13] Padé
/// approximant.
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    if n == 0 {
        return a.clone();
    }
    let norm = one_norm(a);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a * Complex64::new(0.5f64.powi(s), 0.0);
    let b = |i: usize| Complex64::new(PADE13[i], 0.0);
    let id = identity(n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9)) + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &id * b(1);
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8)) + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &id * b(0);
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .unwrap_or_else(|| DMatrix::from_element(n, n, Complex64::new(f64::NAN, 0.0)));
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn spectral_norm_examples() {
        assert!((spectral_norm(&identity(2)) - 1.0).abs() < 1e-14);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(3.0, 0.0), c(0.0, -4.0)]));
        assert!((spectral_norm(&d) - 4.0).abs() < 1e-14);
        let nil = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!((spectral_norm(&nil) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn schur_is_triangular_and_eigen_reconstructs() {
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[
                c(1.0, 0.5),
                c(2.0, 0.0),
                c(0.0, 1.0),
                c(0.3, 0.0),
                c(2.0, -1.0),
                c(1.0, 0.0),
                c(0.0, 0.0),
                c(0.5, 0.2),
                c(3.0, 0.0),
            ],
        );
        let (q, t) = schur(&m);
        let back = &q * &t * q.adjoint();
        assert!((back - &m).norm() < 1e-12);
        let e = eigen(&m).expect("diagonalizable");
        let rec = e.reconstruct(|z| z);
        assert!((rec - &m).norm() < 1e-11);
    }

    #[test]
    fn defective_matrix_is_rejected() {
        let j = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(eigen(&j).is_none());
    }

    #[test]
    fn expm_jordan_block() {
        // exp(-J) for J = [[1,1],[0,1]] is e^-1 [[1,-1],[0,1]]
        let j = DMatrix::from_row_slice(2, 2, &[c(-1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
        let e = expm(&j);
        let em1 = (-1f64).exp();
        let expected = DMatrix::from_row_slice(2, 2, &[c(em1, 0.0), c(-em1, 0.0), c(0.0, 0.0), c(em1, 0.0)]);
        assert!((e - expected).norm() < 1e-14);
    }

    #[test]
    fn expm_large_norm_uses_squaring() {
        let a = DMatrix::from_row_slice(2, 2, &[c(-20.0, 3.0), c(15.0, 0.0), c(0.0, 0.0), c(-21.0, 0.0)]);
        let e = expm(&a);
        let eig = eigen(&a).unwrap();
        let reference = eig.reconstruct(|z| z.exp());
        assert!((e - &reference).norm() < 1e-12 * (1.0 + reference.norm()));
    }
}
