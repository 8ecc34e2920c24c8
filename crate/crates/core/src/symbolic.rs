//! Symbolic differential-equation form of posed constraints.
//!
//! Under the infinitesimal reading a co-boundary along an axis becomes `d/d<axis>[..]`
//! and dual sampling becomes the identity. Expanding each unknown function in its
//! basis turns a constraint into a sum of terms keyed by (variable, inner derivative
//! orders, basis, outer derivative orders).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{Basis, BasisLibrary};
use crate::forms::{Constraint, INet, Path, RelId, RelationKind, VarId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Segment {
    Topo { axis: usize },
    Slot { rel: RelId },
}

/// A derivation reduced to its operator chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathShape {
    pub source: VarId,
    pub source_name: String,
    pub segments: Vec<Segment>,
    /// Variable reached after each segment.
    pub reached: Vec<VarId>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymbolicError {
    #[error("path relation {0} is missing from the I-net")]
    MissingRelation(RelId),
    #[error("path source {0} is not a measured variable")]
    NotMeasured(VarId),
    #[error("unknown function nested inside an unknown function")]
    Nested,
    #[error("{expected} basis libraries required, {got} given")]
    BasisCount { expected: usize, got: usize },
}

impl PathShape {
    pub fn from_path(inet: &INet, path: &Path) -> Result<Self, SymbolicError> {
        let src = inet.var(path.source).ok_or(SymbolicError::NotMeasured(path.source))?;
        let source_name = src.binding.clone().or_else(|| src.name.clone()).ok_or(SymbolicError::NotMeasured(path.source))?;
        let mut segments = Vec::new();
        let mut reached = Vec::new();
        for &r in &path.relations {
            let rel = inet.rel(r).ok_or(SymbolicError::MissingRelation(r))?;
            match rel.kind {
                RelationKind::Topological { axis } => {
                    segments.push(Segment::Topo { axis });
                    reached.push(rel.dst);
                }
                RelationKind::Phenomenological => {
                    segments.push(Segment::Slot { rel: r });
                    reached.push(rel.dst);
                }
                RelationKind::Algebraic { .. } => {}
            }
        }
        Ok(Self { source: path.source, source_name, segments, reached })
    }

    pub fn slots(&self) -> impl Iterator<Item = RelId> + '_ {
        self.segments.iter().filter_map(|s| match s {
            Segment::Slot { rel } => Some(*rel),
            _ => None,
        })
    }

    pub fn slot_count(&self) -> usize {
        self.slots().count()
    }

    /// Position of the single slot, if the path is linear in its unknowns.
    pub fn slot_position(&self) -> Option<usize> {
        self.segments.iter().position(|s| matches!(s, Segment::Slot { .. }))
    }

    fn orders(segments: &[Segment], n_axes: usize) -> Vec<u8> {
        let mut o = vec![0u8; n_axes];
        for s in segments {
            if let Segment::Topo { axis } = s {
                o[*axis] += 1;
            }
        }
        o
    }

    /// Derivative orders before and after the slot. Without a slot everything is inner.
    pub fn split_orders(&self, n_axes: usize) -> (Vec<u8>, Vec<u8>) {
        match self.slot_position() {
            Some(p) => (Self::orders(&self.segments[..p], n_axes), Self::orders(&self.segments[p + 1..], n_axes)),
            None => (Self::orders(&self.segments, n_axes), vec![0; n_axes]),
        }
    }

    /// Unexpanded text, unknown functions named by their index in `slots`.
    pub fn render(&self, inet: &INet, slots: &[RelId]) -> String {
        let mut cur = self.source_name.clone();
        for s in &self.segments {
            cur = match s {
                Segment::Topo { axis } => wrap_derivative(&inet.axes[*axis].name, &cur),
                Segment::Slot { rel } => {
                    let k = slots.iter().position(|x| x == rel).map(|k| k + 1).unwrap_or(0);
                    format!("f{k}({cur})")
                }
            };
        }
        cur
    }
}

fn wrap_derivative(axis: &str, inner: &str) -> String {
    format!("d/d{axis}[{inner}]")
}

fn apply_orders(axes: &[String], orders: &[u8], inner: String) -> String {
    let mut cur = inner;
    for (a, &o) in orders.iter().enumerate() {
        for _ in 0..o {
            cur = wrap_derivative(&axes[a], &cur);
        }
    }
    cur
}

/// Structural identity of one expanded term.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TermKey {
    /// Measured variable name; empty for the constant term.
    pub variable: String,
    pub inner: Vec<u8>,
    pub basis: Basis,
    pub outer: Vec<u8>,
}

impl TermKey {
    pub fn render(&self, axes: &[String]) -> String {
        if self.basis == Basis::Constant {
            return apply_orders(axes, &self.outer, "1".into());
        }
        let arg = apply_orders(axes, &self.inner, self.variable.clone());
        apply_orders(axes, &self.outer, self.basis.render(&arg))
    }

    /// Outer derivative of a constant.
    pub fn vanishes(&self) -> bool {
        self.basis == Basis::Constant && self.outer.iter().any(|&o| o > 0)
    }
}

/// One column-to-be of the feature system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpandedTerm {
    pub key: TermKey,
    /// `+1` for the left derivation, `-1` for the right one.
    pub side: i8,
    /// Index into the constraint's function slots; `None` for a slot-free path.
    pub slot: Option<usize>,
    pub basis: Basis,
}

/// Result of basis expansion: every raw column plus its gauge-reduction status.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Expansion {
    pub columns: Vec<ExpandedTerm>,
    /// Columns surviving reduction, in order.
    pub kept: Vec<usize>,
    /// Columns that vanish identically (derivative of a constant).
    pub vanishing: Vec<usize>,
    /// `(column, kept column with the same key)`.
    pub merged: Vec<(usize, usize)>,
}

impl Expansion {
    pub fn kept_terms(&self) -> impl Iterator<Item = &ExpandedTerm> {
        self.kept.iter().map(move |&i| &self.columns[i])
    }
}

/// Expands a linear constraint. `bases[k]` is the library of function slot `k`.
pub fn expand(inet: &INet, c: &Constraint, bases: &[BasisLibrary]) -> Result<Expansion, SymbolicError> {
    if bases.len() != c.function_slots.len() {
        return Err(SymbolicError::BasisCount { expected: c.function_slots.len(), got: bases.len() });
    }
    let n_axes = inet.axes.len();
    let mut columns = Vec::new();
    for (path, side) in [(&c.lhs, 1i8), (&c.rhs, -1i8)] {
        let shape = PathShape::from_path(inet, path)?;
        if shape.slot_count() > 1 {
            return Err(SymbolicError::Nested);
        }
        let (inner, outer) = shape.split_orders(n_axes);
        let slot = shape.slots().next();
        match slot {
            None => columns.push(ExpandedTerm {
                key: TermKey { variable: shape.source_name.clone(), inner, basis: Basis::Monomial(1), outer },
                side,
                slot: None,
                basis: Basis::Monomial(1),
            }),
            Some(rel) => {
                let k = c.function_slots.iter().position(|&r| r == rel).expect("slot listed in constraint");
                for &b in bases[k].entries() {
                    let key = if b == Basis::Constant {
                        TermKey { variable: String::new(), inner: vec![0; n_axes], basis: b, outer: outer.clone() }
                    } else {
                        TermKey { variable: shape.source_name.clone(), inner: inner.clone(), basis: b, outer: outer.clone() }
                    };
                    columns.push(ExpandedTerm { key, side, slot: Some(k), basis: b });
                }
            }
        }
    }
    let mut kept: Vec<usize> = Vec::new();
    let mut vanishing = Vec::new();
    let mut merged = Vec::new();
    for (i, t) in columns.iter().enumerate() {
        if t.key.vanishes() {
            vanishing.push(i);
        } else if let Some(&j) = kept.iter().find(|&&j| columns[j].key == t.key) {
            merged.push((i, j));
        } else {
            kept.push(i);
        }
    }
    Ok(Expansion { columns, kept, vanishing, merged })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Symbol(String),
    Value(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolicTerm {
    pub key: TermKey,
    pub coefficient: Coefficient,
}

/// Expanded equation `sum(coefficient * term) = 0`, terms sorted by key.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolicEquation {
    pub axes: Vec<String>,
    pub terms: Vec<SymbolicTerm>,
}

impl SymbolicEquation {
    /// Builds from (key, coefficient) pairs; equal keys merge (values add).
    pub fn new(axes: Vec<String>, terms: Vec<SymbolicTerm>) -> Self {
        let mut merged: BTreeMap<TermKey, Coefficient> = BTreeMap::new();
        for t in terms {
            match merged.get_mut(&t.key) {
                Some(Coefficient::Value(v)) => {
                    if let Coefficient::Value(w) = t.coefficient {
                        *v += w;
                    }
                }
                Some(Coefficient::Symbol(_)) => {}
                None => {
                    merged.insert(t.key, t.coefficient);
                }
            }
        }
        Self { axes, terms: merged.into_iter().map(|(key, coefficient)| SymbolicTerm { key, coefficient }).collect() }
    }

    /// Drops terms whose value is exactly zero.
    pub fn without_zeros(mut self) -> Self {
        self.terms.retain(|t| !matches!(t.coefficient, Coefficient::Value(v) if v == 0.0));
        self
    }

    pub fn render(&self) -> String {
        if self.terms.is_empty() {
            return "0 = 0".into();
        }
        let mut s = String::new();
        for (i, t) in self.terms.iter().enumerate() {
            let body = t.key.render(&self.axes);
            match &t.coefficient {
                Coefficient::Symbol(c) => {
                    if i > 0 {
                        s.push_str(" + ");
                    }
                    s.push_str(&format!("{c}*{body}"));
                }
                Coefficient::Value(v) => {
                    let mag = format!("{:.6e}", v.abs());
                    match (i, *v < 0.0) {
                        (0, false) => s.push_str(&format!("{mag}*{body}")),
                        (0, true) => s.push_str(&format!("-{mag}*{body}")),
                        (_, false) => s.push_str(&format!(" + {mag}*{body}")),
                        (_, true) => s.push_str(&format!(" - {mag}*{body}")),
                    }
                }
            }
        }
        s.push_str(" = 0");
        s
    }
}

impl fmt::Display for SymbolicEquation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Unexpanded text of a constraint: `lhs - rhs = 0`.
pub fn emit(inet: &INet, c: &Constraint) -> Result<String, SymbolicError> {
    let l = PathShape::from_path(inet, &c.lhs)?.render(inet, &c.function_slots);
    let r = PathShape::from_path(inet, &c.rhs)?.render(inet, &c.function_slots);
    Ok(format!("{l} - {r} = 0"))
}

/// Expanded equation with symbolic coefficients `c1, c2, ...` in column order.
pub fn emit_expanded(inet: &INet, c: &Constraint, bases: &[BasisLibrary]) -> Result<SymbolicEquation, SymbolicError> {
    let ex = expand(inet, c, bases)?;
    let axes = inet.axes.iter().map(|a| a.name.clone()).collect();
    let terms = ex
        .kept_terms()
        .enumerate()
        .map(|(i, t)| SymbolicTerm { key: t.key.clone(), coefficient: Coefficient::Symbol(format!("c{}", i + 1)) })
        .collect();
    Ok(SymbolicEquation::new(axes, terms))
}

/// Coefficient-free structural key: sorted term keys.
pub fn canonicalize(eq: &SymbolicEquation) -> String {
    let mut keys: Vec<String> = eq.terms.iter().map(|t| t.key.render(&eq.axes)).collect();
    keys.sort();
    keys.dedup();
    keys.join(" ; ")
}

/// Hypotheses sharing one canonical key.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceClass {
    pub key: String,
    pub members: Vec<String>,
}

/// Groups `(key, member)` pairs; members keep their input order, classes are ordered
/// by their first member's position.
pub fn equivalence_classes<I: IntoIterator<Item = (String, String)>>(items: I) -> Vec<EquivalenceClass> {
    let mut out: Vec<EquivalenceClass> = Vec::new();
    for (key, member) in items {
        match out.iter_mut().find(|c| c.key == key) {
            Some(c) => {
                if !c.members.contains(&member) {
                    c.members.push(member)
                }
            }
            None => out.push(EquivalenceClass { key, members: vec![member] }),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::extract_constraints;
    use crate::forms::tests::{energy_form, torque_form};

    fn two() -> Vec<BasisLibrary> {
        vec![BasisLibrary::standard(), BasisLibrary::standard()]
    }

    #[test]
    fn torque_form_text() {
        let n = torque_form();
        let c = &extract_constraints(&n)[0];
        assert_eq!(emit(&n, c).unwrap(), "f1(theta) - d/dt[f2(d/dt[theta])] = 0");
    }

    #[test]
    fn energy_form_text() {
        let n = energy_form();
        let c = &extract_constraints(&n)[0];
        assert_eq!(emit(&n, c).unwrap(), "f1(theta) - f2(d/dt[theta]) = 0");
    }

    #[test]
    fn torque_expansion_drops_derivative_of_constant() {
        let n = torque_form();
        let c = &extract_constraints(&n)[0];
        let ex = expand(&n, c, &two()).unwrap();
        assert_eq!(ex.columns.len(), 10);
        assert_eq!(ex.kept.len(), 9);
        assert_eq!(ex.vanishing, [5]);
        assert!(ex.merged.is_empty());
        let eq = emit_expanded(&n, c, &two()).unwrap();
        let text: Vec<String> = eq.terms.iter().map(|t| t.key.render(&eq.axes)).collect();
        assert!(text.contains(&"sin(theta)".to_string()));
        assert!(text.contains(&"d/dt[d/dt[theta]]".to_string()));
        assert!(text.contains(&"d/dt[d/dt[theta]^2]".to_string()));
    }

    #[test]
    fn energy_expansion_merges_constants() {
        let n = energy_form();
        let c = &extract_constraints(&n)[0];
        let ex = expand(&n, c, &two()).unwrap();
        assert_eq!(ex.columns.len(), 10);
        assert_eq!(ex.kept.len(), 9);
        assert_eq!(ex.merged, [(5, 0)]);
    }

    #[test]
    fn torque_and_energy_keys_differ() {
        let t = torque_form();
        let e = energy_form();
        let kt = canonicalize(&emit_expanded(&t, &extract_constraints(&t)[0], &two()).unwrap());
        let ke = canonicalize(&emit_expanded(&e, &extract_constraints(&e)[0], &two()).unwrap());
        assert_ne!(kt, ke);
    }

    #[test]
    fn negation_leaves_key_unchanged() {
        let axes = vec!["t".to_string()];
        let key = |b| TermKey { variable: "theta".into(), inner: vec![0], basis: b, outer: vec![0] };
        let a = SymbolicEquation::new(
            axes.clone(),
            vec![
                SymbolicTerm { key: key(Basis::Sin(1)), coefficient: Coefficient::Value(1.0) },
                SymbolicTerm { key: key(Basis::Monomial(1)), coefficient: Coefficient::Value(-2.0) },
            ],
        );
        let b = SymbolicEquation::new(
            axes,
            vec![
                SymbolicTerm { key: key(Basis::Monomial(1)), coefficient: Coefficient::Value(2.0) },
                SymbolicTerm { key: key(Basis::Sin(1)), coefficient: Coefficient::Value(-1.0) },
            ],
        );
        assert_eq!(canonicalize(&a), canonicalize(&b));
        assert_eq!(a.render(), "-2.000000e0*theta + 1.000000e0*sin(theta) = 0");
    }

    #[test]
    fn classes_group_by_key() {
        let cls = equivalence_classes(vec![
            ("k1".to_string(), "a".to_string()),
            ("k2".to_string(), "b".to_string()),
            ("k1".to_string(), "c".to_string()),
        ]);
        assert_eq!(cls.len(), 2);
        assert_eq!(cls[0].members, ["a", "c"]);
    }
}
