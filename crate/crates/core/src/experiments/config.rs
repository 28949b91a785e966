//! Experiment configuration files.
//!
//! The format is flat `key = value` lines grouped under `[section]` headers,
//! with `#` comments. Lists of numbers or names are comma separated; operator
//! lists are semicolon separated because recipes contain commas.
//!
//! ```text
//! [general]
//! seed = 7
//! tol = 1e-9
//!
//! [thm35]
//! operators = diag(1,2); jordan(1,2); normal(3); perturbed(3)
//! functions = one, resolvent
//! tau = 0.1, 1
//! omega = 0.5
//! ```
//!
//! Operator recipes:
//!
//! - `diag(a,b,...)`: real diagonal.
//! - `jordan(l,n)`: one Jordan block with eigenvalue `l`.
//! - `upper(l,c)`: `[[l, c], [0, l]]`.
//! - `normal(n)` or `normal(n,w0)`: random normal matrix, eigenvalues uniform
//!   in `Re ∈ [w0, w0 + 5]`, `|Im| <= 50`; `w0` defaults to 0.5.
//! - `perturbed(n)` or `perturbed(n,w0)`: the same spectrum with a random
//!   strictly upper triangular part, scaled down until the eigenvector
//!   condition number is at most 1e4.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::operator::OperatorModel;
use crate::{linalg, CMat, Error, Result, C64};

pub const IMAG_BOUND: f64 = 50.0;
pub const STRIP_WIDTH: f64 = 5.0;
pub const CONDITION_CAP: f64 = 1e4;
pub const DEFAULT_FLOOR: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorRecipe {
    Diagonal(Vec<f64>),
    Jordan { eigenvalue: f64, size: usize },
    Upper { eigenvalue: f64, coupling: f64 },
    Normal { dim: usize, floor: f64 },
    Perturbed { dim: usize, floor: f64 },
}

fn num(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("expected a number, got `{}`", s.trim())))
}

fn count(s: &str, line: usize) -> Result<usize> {
    s.trim()
        .parse()
        .ok()
        .filter(|&n: &usize| n > 0)
        .ok_or_else(|| Error::parse(line, format!("expected a positive integer, got `{}`", s.trim())))
}

impl OperatorRecipe {
    pub fn parse(text: &str, line: usize) -> Result<Self> {
        let text = text.trim();
        let (name, rest) = text
            .split_once('(')
            .ok_or_else(|| Error::parse(line, format!("operator recipe `{text}` needs arguments")))?;
        let args = rest
            .strip_suffix(')')
            .ok_or_else(|| Error::parse(line, format!("unclosed parenthesis in `{text}`")))?;
        let args: Vec<&str> = args.split(',').map(str::trim).collect();
        let floor = |args: &[&str]| -> Result<f64> {
            match args.get(1) {
                Some(s) => num(s, line),
                None => Ok(DEFAULT_FLOOR),
            }
        };
        let recipe = match (name.trim(), args.len()) {
            ("diag", _) => Self::Diagonal(args.iter().map(|a| num(a, line)).collect::<Result<_>>()?),
            ("jordan", 2) => Self::Jordan {
                eigenvalue: num(args[0], line)?,
                size: count(args[1], line)?,
            },
            ("upper", 2) => Self::Upper {
                eigenvalue: num(args[0], line)?,
                coupling: num(args[1], line)?,
            },
            ("normal", 1 | 2) => Self::Normal {
                dim: count(args[0], line)?,
                floor: floor(&args)?,
            },
            ("perturbed", 1 | 2) => Self::Perturbed {
                dim: count(args[0], line)?,
                floor: floor(&args)?,
            },
            _ => return Err(Error::parse(line, format!("unknown operator recipe `{text}`"))),
        };
        Ok(recipe)
    }

    /// Builds the operator. Random recipes draw from a generator seeded by
    /// `seed` and the recipe's position, so reordering a list changes them.
    pub fn build(&self, seed: u64, index: usize) -> Result<OperatorModel> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        match self {
            Self::Diagonal(v) => OperatorModel::diagonal_real(v),
            Self::Jordan { eigenvalue, size } => OperatorModel::jordan(C64::new(*eigenvalue, 0.0), *size),
            Self::Upper { eigenvalue, coupling } => {
                let l = C64::new(*eigenvalue, 0.0);
                let z = C64::new(0.0, 0.0);
                OperatorModel::dense(DMatrix::from_row_slice(2, 2, &[l, C64::new(*coupling, 0.0), z, l]))
            }
            Self::Normal { dim, floor } => {
                let q = random_unitary(&mut rng, *dim);
                let d = random_spectrum(&mut rng, *dim, *floor);
                OperatorModel::dense(&q * d * q.adjoint())
            }
            Self::Perturbed { dim, floor } => {
                let q = random_unitary(&mut rng, *dim);
                let d = random_spectrum(&mut rng, *dim, *floor);
                let mut upper = CMat::zeros(*dim, *dim);
                for i in 0..*dim {
                    for j in i + 1..*dim {
                        upper[(i, j)] = gaussian(&mut rng);
                    }
                }
                let mut scale = 4.0;
                for _ in 0..60 {
                    let m = &q * (&d + &upper * C64::new(scale, 0.0)) * q.adjoint();
                    let ok = linalg::eigen(&m).is_some_and(|e| e.condition <= CONDITION_CAP);
                    if ok {
                        return OperatorModel::dense(m);
                    }
                    scale *= 0.5;
                }
                OperatorModel::dense(&q * d * q.adjoint())
            }
        }
    }
}

impl fmt::Display for OperatorRecipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Diagonal(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "diag({})", parts.join(","))
            }
            Self::Jordan { eigenvalue, size } => write!(f, "jordan({eigenvalue},{size})"),
            Self::Upper { eigenvalue, coupling } => write!(f, "upper({eigenvalue},{coupling})"),
            Self::Normal { dim, floor } => write!(f, "normal({dim},{floor})"),
            Self::Perturbed { dim, floor } => write!(f, "perturbed({dim},{floor})"),
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    let g = CMat::from_fn(n, n, |_, _| gaussian(rng));
    g.qr().q()
}

fn random_spectrum(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> CMat {
    let v: Vec<C64> = (0..n)
        .map(|_| {
            C64::new(
                floor + STRIP_WIDTH * rng.gen::<f64>(),
                IMAG_BOUND * (2.0 * rng.gen::<f64>() - 1.0),
            )
        })
        .collect();
    DMatrix::from_diagonal(&nalgebra::DVector::from_vec(v))
}

/// Parsed configuration: sections of key-value pairs with line numbers.
#[derive(Debug, Clone, Default)]
pub struct ExperimentConfig {
    sections: BTreeMap<String, BTreeMap<String, (usize, String)>>,
}

pub const SECTIONS: &[&str] = &["general", "thm35", "cor310", "thm44", "stability", "eta"];

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, BTreeMap<String, (usize, String)>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.split('#').next().unwrap_or("").trim();
            if l.is_empty() {
                continue;
            }
            if let Some(name) = l.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                let name = name.trim();
                if !SECTIONS.contains(&name) {
                    return Err(Error::parse(line, format!("unknown section `{name}`")));
                }
                if sections.contains_key(name) {
                    return Err(Error::parse(line, format!("duplicate section `{name}`")));
                }
                sections.insert(name.to_string(), BTreeMap::new());
                current = Some(name.to_string());
                continue;
            }
            let section = current
                .as_ref()
                .ok_or_else(|| Error::parse(line, "key outside of any section"))?;
            let (k, v) = l
                .split_once('=')
                .ok_or_else(|| Error::parse(line, format!("expected `key = value`, got `{l}`")))?;
            let k = k.trim();
            if v.trim().is_empty() {
                return Err(Error::parse(line, format!("empty value for `{k}`")));
            }
            let map = sections.get_mut(section).expect("section exists");
            if map.insert(k.to_string(), (line, v.trim().to_string())).is_some() {
                return Err(Error::parse(line, format!("duplicate key `{k}`")));
            }
        }
        Ok(Self { sections })
    }

    pub fn has_section(&self, name: &str) -> bool {
        self.sections.contains_key(name)
    }

    fn raw(&self, section: &str, key: &str) -> Option<&(usize, String)> {
        self.sections.get(section)?.get(key)
    }

    pub fn number(&self, section: &str, key: &str, default: f64) -> Result<f64> {
        match self.raw(section, key) {
            Some((line, v)) => num(v, *line),
            None => Ok(default),
        }
    }

    pub fn integer(&self, section: &str, key: &str, default: u64) -> Result<u64> {
        match self.raw(section, key) {
            Some((line, v)) => v
                .parse()
                .map_err(|_| Error::parse(*line, format!("expected an integer for `{key}`, got `{v}`"))),
            None => Ok(default),
        }
    }

    pub fn numbers(&self, section: &str, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.raw(section, key) {
            Some((line, v)) => v.split(',').map(|s| num(s, *line)).collect(),
            None => Ok(default.to_vec()),
        }
    }

    pub fn names(&self, section: &str, key: &str, default: &[&str]) -> Vec<String> {
        match self.raw(section, key) {
            Some((_, v)) => v.split(',').map(|s| s.trim().to_string()).collect(),
            None => default.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn operators(&self, section: &str, default: &str) -> Result<Vec<OperatorRecipe>> {
        let (line, text) = match self.raw(section, "operators") {
            Some((l, v)) => (*l, v.as_str()),
            None => (0, default),
        };
        text.split(';')
            .filter(|s| !s.trim().is_empty())
            .map(|s| OperatorRecipe::parse(s, line))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_lists() {
        let c = ExperimentConfig::parse(
            "[general]\nseed = 3 # x\n[thm35]\ntau = 0.1, 1\noperators = diag(1,2); normal(3)\n",
        )
        .unwrap();
        assert_eq!(c.integer("general", "seed", 0).unwrap(), 3);
        assert_eq!(c.numbers("thm35", "tau", &[]).unwrap(), vec![0.1, 1.0]);
        let ops = c.operators("thm35", "").unwrap();
        assert_eq!(ops[0], OperatorRecipe::Diagonal(vec![1.0, 2.0]));
        assert_eq!(ops[1].to_string(), "normal(3,0.5)");
        assert!(ExperimentConfig::parse("[bogus]\n").is_err());
        assert!(ExperimentConfig::parse("seed = 1\n").is_err());
        assert!(ExperimentConfig::parse("[eta]\nq\n").is_err());
    }

    #[test]
    fn random_families() {
        let n = OperatorRecipe::Normal { dim: 4, floor: 0.5 }.build(11, 0).unwrap();
        let m = n.matrix();
        let comm = &m * m.adjoint() - m.adjoint() * &m;
        assert!(crate::operator::operator_norm(&comm) < 1e-9 * crate::operator::operator_norm(&m).powi(2));
        for l in n.eigenvalues() {
            assert!(l.re >= 0.5 - 1e-9 && l.re <= 5.5 + 1e-9 && l.im.abs() <= 50.0 + 1e-9);
        }
        let again = OperatorRecipe::Normal { dim: 4, floor: 0.5 }.build(11, 0).unwrap();
        assert_eq!(again.matrix(), m);
        let p = OperatorRecipe::Perturbed { dim: 3, floor: 0.5 }.build(11, 1).unwrap();
        assert!(linalg::eigen(&p.matrix()).unwrap().condition <= CONDITION_CAP);
    }
}
