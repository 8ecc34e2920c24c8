//! Scalar basis functions used to expand unknown phenomenological relations.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "order", rename_all = "lowercase")]
pub enum Basis {
    Constant,
    /// `x^k`, `k >= 1`.
    Monomial(u32),
    /// `sin(k x)`, `k >= 1`.
    Sin(u32),
    /// `cos(k x)`, `k >= 1`.
    Cos(u32),
}

impl Basis {
    pub fn eval<T: Scalar>(&self, x: T) -> T {
        match *self {
            Basis::Constant => T::one(),
            Basis::Monomial(k) => x.powi(k as i32),
            Basis::Sin(k) => (T::from_usize_lossy(k as usize) * x).sin(),
            Basis::Cos(k) => (T::from_usize_lossy(k as usize) * x).cos(),
        }
    }

    pub fn name(&self) -> String {
        self.render("x")
    }

    /// Renders the basis applied to `arg`. Compound arguments are parenthesized
    /// where precedence requires it.
    pub fn render(&self, arg: &str) -> String {
        let atom = arg.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') || arg.ends_with(']');
        let wrapped = if atom { arg.to_string() } else { format!("({arg})") };
        let scaled = |k: u32| if k == 1 { arg.to_string() } else { format!("{k}*{wrapped}") };
        match *self {
            Basis::Constant => "1".to_string(),
            Basis::Monomial(1) => arg.to_string(),
            Basis::Monomial(k) => format!("{wrapped}^{k}"),
            Basis::Sin(k) => format!("sin({})", scaled(k)),
            Basis::Cos(k) => format!("cos({})", scaled(k)),
        }
    }

    /// Parses names produced by [`Basis::name`].
    pub fn parse(name: &str) -> Result<Basis, BasisError> {
        let bad = || BasisError::UnknownName(name.to_string());
        let name = name.trim();
        if name == "1" {
            return Ok(Basis::Constant);
        }
        if name == "x" {
            return Ok(Basis::Monomial(1));
        }
        if let Some(k) = name.strip_prefix("x^") {
            let k: u32 = k.parse().map_err(|_| bad())?;
            return if k == 0 { Ok(Basis::Constant) } else { Ok(Basis::Monomial(k)) };
        }
        let harmonic = |inner: &str| -> Result<u32, BasisError> {
            if inner == "x" {
                return Ok(1);
            }
            let k = inner.strip_suffix("*x").or_else(|| inner.strip_suffix('x')).ok_or_else(bad)?;
            let k: u32 = k.parse().map_err(|_| bad())?;
            if k == 0 {
                Err(bad())
            } else {
                Ok(k)
            }
        };
        if let Some(inner) = name.strip_prefix("sin(").and_then(|s| s.strip_suffix(')')) {
            return harmonic(inner).map(Basis::Sin);
        }
        if let Some(inner) = name.strip_prefix("cos(").and_then(|s| s.strip_suffix(')')) {
            return harmonic(inner).map(Basis::Cos);
        }
        Err(bad())
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasisError {
    #[error("unknown basis function `{0}`")]
    UnknownName(String),
    #[error("basis function `{0}` listed twice")]
    Duplicate(String),
    #[error("empty basis library")]
    Empty,
}

/// Ordered, duplicate-free list of basis functions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BasisLibrary {
    entries: Vec<Basis>,
}

impl BasisLibrary {
    pub fn new(entries: Vec<Basis>) -> Result<Self, BasisError> {
        if entries.is_empty() {
            return Err(BasisError::Empty);
        }
        for (i, b) in entries.iter().enumerate() {
            if entries[..i].contains(b) {
                return Err(BasisError::Duplicate(b.name()));
            }
        }
        Ok(Self { entries })
    }

    /// `{1, x, x^2, sin(x), cos(x)}`.
    pub fn standard() -> Self {
        Self { entries: vec![Basis::Constant, Basis::Monomial(1), Basis::Monomial(2), Basis::Sin(1), Basis::Cos(1)] }
    }

    /// `1, x, ..., x^degree` followed by `sin(kx), cos(kx)` for `k = 1..=harmonics`.
    pub fn polynomial_harmonic(degree: u32, harmonics: u32) -> Self {
        let mut entries = vec![Basis::Constant];
        entries.extend((1..=degree).map(Basis::Monomial));
        for k in 1..=harmonics {
            entries.push(Basis::Sin(k));
            entries.push(Basis::Cos(k));
        }
        Self { entries }
    }

    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self, BasisError> {
        Self::new(names.iter().map(|n| Basis::parse(n.as_ref())).collect::<Result<_, _>>()?)
    }

    pub fn entries(&self) -> &[Basis] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(Basis::name).collect()
    }
}

impl Default for BasisLibrary {
    fn default() -> Self {
        Self::standard()
    }
}

impl Serialize for BasisLibrary {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.names().serialize(s)
    }
}

impl<'de> Deserialize<'de> for BasisLibrary {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let names = Vec::<String>::deserialize(d)?;
        Self::from_names(&names).map_err(serde::de::Error::custom)
    }
}
