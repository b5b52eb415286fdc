//! Finite, symmetric disorder laws for random fields and frequencies.

use rand::distributions::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::rng::{SeedSpec, Stream};

const WEIGHT_TOL: f64 = 1e-12;
const VALUE_TOL: f64 = 1e-12;

/// One support point of a [`DisorderLaw`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub value: f64,
    pub weight: f64,
}

/// An even probability law with finitely many atoms, sorted by value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Atom>", into = "Vec<Atom>")]
pub struct DisorderLaw {
    atoms: Vec<Atom>,
}

impl TryFrom<Vec<Atom>> for DisorderLaw {
    type Error = Error;
    fn try_from(atoms: Vec<Atom>) -> Result<Self> {
        Self::new(atoms.into_iter().map(|a| (a.value, a.weight)).collect())
    }
}

impl From<DisorderLaw> for Vec<Atom> {
    fn from(law: DisorderLaw) -> Self {
        law.atoms
    }
}

impl DisorderLaw {
    /// Builds a law from `(value, weight)` pairs.
    ///
    /// Weights must be positive and sum to one, values must be distinct and
    /// the law must be even: every nonzero atom has a mirror with equal weight.
    pub fn new(pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.is_empty() {
            return config("disorder law has no atoms");
        }
        let mut atoms: Vec<Atom> = pairs
            .into_iter()
            .map(|(value, weight)| Atom { value, weight })
            .collect();
        for a in &atoms {
            if !a.value.is_finite() || !a.weight.is_finite() {
                return config(format!("atom ({}, {}) is not finite", a.value, a.weight));
            }
            if a.weight <= 0.0 {
                return config(format!("atom at {} has non-positive weight {}", a.value, a.weight));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return config(format!("weights must sum to 1, got {total}"));
        }
        atoms.sort_by(|a, b| a.value.total_cmp(&b.value));
        for w in atoms.windows(2) {
            if (w[1].value - w[0].value).abs() <= VALUE_TOL {
                return config(format!("duplicate atom at {}", w[0].value));
            }
        }
        for a in &atoms {
            if a.value.abs() <= VALUE_TOL {
                continue;
            }
            let mirror = atoms
                .iter()
                .find(|b| (b.value + a.value).abs() <= VALUE_TOL);
            match mirror {
                Some(b) if (b.weight - a.weight).abs() <= WEIGHT_TOL => {}
                _ => {
                    return config(format!(
                        "law is not symmetric: atom {} has no mirror of equal weight",
                        a.value
                    ))
                }
            }
        }
        Ok(Self { atoms })
    }

    /// The point mass at zero (no disorder).
    pub fn dirac_zero() -> Self {
        Self {
            atoms: vec![Atom {
                value: 0.0,
                weight: 1.0,
            }],
        }
    }

    /// `½(δ_a + δ_{-a})` for `a > 0`.
    pub fn symmetric_pair(a: f64) -> Result<Self> {
        if !(a > 0.0) {
            return config(format!("symmetric pair needs a > 0, got {a}"));
        }
        Self::new(vec![(-a, 0.5), (a, 0.5)])
    }

    /// Parses `"v1:w1,v2:w2,..."`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (v, w) = item
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("atom `{item}` is not of the form value:weight")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad atom value `{v}`")))?;
            let w: f64 = w
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad atom weight `{w}`")))?;
            pairs.push((v, w));
        }
        Self::new(pairs)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.value).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.weight).collect()
    }

    /// `∫ f dμ`.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.atoms.iter().map(|a| a.weight * f(a.value)).sum()
    }

    /// Index of the atom equal to `value`, if any.
    pub fn index_of(&self, value: f64) -> Option<usize> {
        self.atoms
            .iter()
            .position(|a| (a.value - value).abs() <= VALUE_TOL)
    }

    /// True for `½(δ₁ + δ₋₁)`.
    pub fn is_unit_pair(&self) -> bool {
        self.atoms.len() == 2
            && (self.atoms[0].value + 1.0).abs() <= VALUE_TOL
            && (self.atoms[1].value - 1.0).abs() <= VALUE_TOL
    }

    /// Draws `n` i.i.d. atom indices.
    pub fn sample_indices(&self, n: usize, seed: SeedSpec) -> Result<Vec<usize>> {
        if n == 0 {
            return config("sample size must be at least 1");
        }
        let dist = WeightedIndex::new(self.atoms.iter().map(|a| a.weight))
            .map_err(|e| Error::Config(e.to_string()))?;
        let mut rng = seed.rng(Stream::Disorder);
        Ok((0..n).map(|_| dist.sample(&mut rng)).collect())
    }

    /// Draws `n` i.i.d. field values `η_1..η_n`.
    pub fn sample_disorder(&self, n: usize, seed: SeedSpec) -> Result<Vec<f64>> {
        Ok(self
            .sample_indices(n, seed)?
            .into_iter()
            .map(|i| self.atoms[i].value)
            .collect())
    }
}
